//! Canonical Lindbladian form extraction and reconstruction.
//!
//! A superoperator K generates a trace- and Hermiticity-preserving family iff
//!
//!   Tr[K(ω)] = 0  and  K(ω†) = (K(ω))†   for all ω,
//!
//! in which case it can be written, for any orthonormal basis {σ_α} with
//! σ_{N²} = 1/√N, as
//!
//!   K(ω) = −i[H, ω] + Σ_{αβ<N²} κ_{αβ} (σ_α ω σ_β† − ½{σ_β† σ_α, ω}),
//!
//! with κ Hermitian and H Hermitian. Diagonalizing κ = V r V† turns this into
//! the canonical form with real rates r_α and orthonormal Lindblad operators
//! L_α = Σ_β V_{βα} σ_β. Negative rates signal the loss of CP-divisibility.

use std::sync::Arc;

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::qops::{Operator, OperatorBasis, SuperOp};
use crate::{tol, Error, Result};

/// The Hermitian coefficient matrix κ of the first-standard-form generator,
/// together with the extracted Hamiltonian.
#[derive(Clone, Debug)]
pub struct GksMatrix {
    basis: Arc<OperatorBasis>,
    /// (N²−1)×(N²−1) block over the traceless basis elements.
    kappa: Array2<C64>,
    hamiltonian: Operator,
}

impl GksMatrix {
    pub fn basis(&self) -> &Arc<OperatorBasis> {
        &self.basis
    }

    pub fn kappa(&self) -> &Array2<C64> {
        &self.kappa
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
}

/// Canonical (diagonal) form: rates, orthonormal Lindblad operators, and the
/// Hamiltonian part.
#[derive(Clone, Debug)]
pub struct CanonicalForm {
    pub rates: Vec<f64>,
    pub lindblad_ops: Vec<Operator>,
    pub hamiltonian: Operator,
}

impl CanonicalForm {
    /// Rates with magnitude above the zero threshold.
    pub fn nonzero_rates(&self, threshold: f64) -> usize {
        self.rates.iter().filter(|r| r.abs() > threshold).count()
    }

    pub fn min_rate(&self) -> f64 {
        self.rates.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Checks Tr[K(ω)] = 0 and K(ω†) = (K(ω))† on every basis element.
pub fn check_generator_conditions(superop: &SuperOp) -> bool {
    let basis = superop.basis();
    for sigma in basis.elements() {
        let out = match superop.apply(sigma) {
            Ok(o) => o,
            Err(_) => return false,
        };
        if out.trace().norm() > tol::GENERATOR_CONDITIONS {
            return false;
        }
        let out_dag = match superop.apply(&sigma.adjoint()) {
            Ok(o) => o,
            Err(_) => return false,
        };
        if out_dag.sub(&out.adjoint()).max_abs() > tol::GENERATOR_CONDITIONS {
            return false;
        }
    }
    true
}

/// Extracts the GKS coefficient matrix and Hamiltonian of a generator.
///
/// The full coefficient matrix is κ_{αβ} = Σ_χ Tr[σ_β σ_χ† σ_α† K(σ_χ)]; its
/// traceless block drives the dissipator while its last column fixes the
/// Hamiltonian through σ = (1/√N) Σ_{α<N²} κ_{α,N²} σ_α, H = (σ† − σ)/2i.
pub fn gks_matrix(superop: &SuperOp) -> Result<GksMatrix> {
    let basis = superop.basis();
    if !basis.last_is_normalized_identity() {
        return Err(Error::PreconditionViolated(
            "GKS extraction needs a basis with the normalized identity last".into(),
        ));
    }
    if !check_generator_conditions(superop) {
        return Err(Error::PreconditionViolated(
            "generator is not trace- and Hermiticity-preserving".into(),
        ));
    }
    let n2 = basis.size();
    let n = basis.dim();

    // K(σ_χ) once per χ.
    let k_sigma: Vec<Operator> =
        basis.elements().iter().map(|s| superop.apply(s).unwrap()).collect();

    let mut kappa_full = Array2::<C64>::zeros((n2, n2));
    for alpha in 0..n2 {
        let sa_dag = basis.element(alpha).adjoint();
        for beta in 0..n2 {
            let sb = basis.element(beta);
            let mut acc = C64::new(0.0, 0.0);
            for chi in 0..n2 {
                let prod = sb
                    .matmul(&basis.element(chi).adjoint())
                    .matmul(&sa_dag)
                    .matmul(&k_sigma[chi]);
                acc += prod.trace();
            }
            kappa_full[[alpha, beta]] = acc;
        }
    }

    let block = kappa_full.slice(ndarray::s![..n2 - 1, ..n2 - 1]).to_owned();
    let herm_resid = (0..n2 - 1)
        .flat_map(|i| (0..n2 - 1).map(move |j| (i, j)))
        .map(|(i, j)| (block[[i, j]] - block[[j, i]].conj()).norm())
        .fold(0.0, f64::max);
    if herm_resid > tol::HERMITICITY {
        return Err(Error::PreconditionViolated(format!(
            "extracted κ is not Hermitian (residual {herm_resid:.3e})"
        )));
    }

    // σ(t) from the identity column.
    let mut sigma_op = Operator::zeros(n);
    for alpha in 0..n2 - 1 {
        sigma_op = sigma_op
            .add(&basis.element(alpha).scale(kappa_full[[alpha, n2 - 1]] / (n as f64).sqrt()));
    }
    // H = (σ† − σ)/(2i)
    let hamiltonian = sigma_op.adjoint().sub(&sigma_op).scale(C64::new(0.0, -0.5));
    if !hamiltonian.is_hermitian(tol::HERMITICITY) {
        return Err(Error::PreconditionViolated("extracted H is not Hermitian".into()));
    }

    Ok(GksMatrix { basis: Arc::clone(basis), kappa: block, hamiltonian })
}

/// Diagonalizes κ into rates and orthonormal Lindblad operators.
///
/// Rates are sorted descending. Phases of the L_α inside degenerate rate
/// subspaces are solver-chosen and not unique.
pub fn canonical_form(gks: &GksMatrix) -> Result<CanonicalForm> {
    let m = gks.kappa.nrows();
    // the solver wants exact Hermiticity; symmetrize its input
    let mut h = Array2::<C64>::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            h[[i, j]] = (gks.kappa[[i, j]] + gks.kappa[[j, i]].conj()) * 0.5;
        }
    }
    let (vals, vecs) = h
        .eigh(UPLO::Lower)
        .map_err(|e| Error::InvalidInput(format!("Hermitian eigensolve failed: {e}")))?;
    // The LAPACK-backed solver hands back conjugated eigenvector columns for
    // row-major complex input; verify H·V = V·diag(w) and conjugate if needed.
    let resid = |v: &Array2<C64>| -> f64 {
        let hv = h.dot(v);
        let mut worst: f64 = 0.0;
        for j in 0..m {
            for i in 0..m {
                worst = worst.max((hv[[i, j]] - v[[i, j]] * vals[j]).norm());
            }
        }
        worst
    };
    let scale = vals.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let vecs = if resid(&vecs) <= 1e-10 * scale {
        vecs
    } else {
        let conj = vecs.mapv(|z| z.conj());
        let r = resid(&conj);
        if r > 1e-10 * scale {
            return Err(Error::InvalidInput(format!(
                "eigenvector orientation check failed (residual {r:.3e})"
            )));
        }
        conj
    };

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap());

    let mut rates = Vec::with_capacity(m);
    let mut lindblad_ops = Vec::with_capacity(m);
    for &idx in &order {
        rates.push(vals[idx]);
        let mut op = Operator::zeros(gks.dim());
        for beta in 0..m {
            op = op.add(&gks.basis.element(beta).scale(vecs[[beta, idx]]));
        }
        lindblad_ops.push(op);
    }
    Ok(CanonicalForm { rates, lindblad_ops, hamiltonian: gks.hamiltonian.clone() })
}

/// Builds −i[H,·] + Σ_α r_α (L_α · L_α† − ½{L_α†L_α, ·}) as a superoperator.
pub fn reconstruct(canon: &CanonicalForm, basis: &Arc<OperatorBasis>) -> Result<SuperOp> {
    let h = canon.hamiltonian.clone();
    let ops = canon.lindblad_ops.clone();
    let rates = canon.rates.clone();
    SuperOp::from_action(
        move |w| {
            let mut out = h.commutator(w).scale(C64::new(0.0, -1.0));
            for (r, l) in rates.iter().zip(ops.iter()) {
                let jump = l.matmul(w).matmul(&l.adjoint());
                let num = l.adjoint().matmul(l);
                let anti = num.anticommutator(w).scale(C64::new(0.5, 0.0));
                out = out.add(&jump.sub(&anti).scale(C64::new(*r, 0.0)));
            }
            out
        },
        basis,
    )
}

/// One-call convenience: canonical rates of a generator at a single time slice.
pub fn canonical_rates(superop: &SuperOp) -> Result<Vec<f64>> {
    Ok(canonical_form(&gks_matrix(superop)?)?.rates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }
    fn sz() -> Operator {
        Operator::new(array![[c(1., 0.), c(0., 0.)], [c(0., 0.), c(-1., 0.)]]).unwrap()
    }
    fn sp() -> Operator {
        Operator::new(array![[c(0., 0.), c(1., 0.)], [c(0., 0.), c(0., 0.)]]).unwrap()
    }
    fn sm() -> Operator {
        Operator::new(array![[c(0., 0.), c(0., 0.)], [c(1., 0.), c(0., 0.)]]).unwrap()
    }

    fn amplitude_damping(basis: &Arc<OperatorBasis>, gamma: f64) -> SuperOp {
        SuperOp::from_action(
            move |w| {
                let jump = sm().matmul(w).matmul(&sp());
                let num = sp().matmul(&sm());
                jump.sub(&num.anticommutator(w).scale(c(0.5, 0.0))).scale(c(gamma, 0.0))
            },
            basis,
        )
        .unwrap()
    }

    /// Kernel-form qubit generator with eigenvalue pattern (0,−k,−k,−2k).
    fn sigma_pm_kernel(basis: &Arc<OperatorBasis>, k: f64) -> SuperOp {
        SuperOp::from_action(
            move |w| {
                let t1 = sm().matmul(w).matmul(&sp());
                let t2 = sp().matmul(w).matmul(&sm());
                t1.add(&t2).sub(w).scale(c(k, 0.0))
            },
            basis,
        )
        .unwrap()
    }

    #[test]
    fn generator_conditions_hold_for_gksl_and_zero() {
        let basis = OperatorBasis::pauli();
        assert!(check_generator_conditions(&amplitude_damping(&basis, 1.0)));
        assert!(check_generator_conditions(&SuperOp::zero(&basis)));
    }

    #[test]
    fn trace_increasing_perturbation_fails_conditions() {
        let basis = OperatorBasis::pauli();
        let good = amplitude_damping(&basis, 1.0);
        // add 0.1·|0⟩⟨0| Tr[·], which increases the trace
        let proj = Operator::new(array![[c(1., 0.), c(0., 0.)], [c(0., 0.), c(0., 0.)]]).unwrap();
        let bad = SuperOp::from_action(|w| proj.scale(w.trace() * 0.1), &basis).unwrap();
        assert!(!check_generator_conditions(&good.add(&bad)));
    }

    #[test]
    fn amplitude_damping_has_no_dephasing_term() {
        // TCL case: m₂ = 2m₃ makes the σz-channel coefficient vanish and the
        // canonical form is a single emission channel with rate γ, L = σ₋ up
        // to phase.
        let basis = OperatorBasis::pauli();
        let gamma = 1.0;
        let gks = gks_matrix(&amplitude_damping(&basis, gamma)).unwrap();
        // σz slot is index 2 in (σx, σy, σz) ordering
        assert!(gks.kappa()[[2, 2]].norm() <= 1e-12, "dephasing coefficient should cancel");
        assert!(gks.hamiltonian().max_abs() < 1e-12);

        let canon = canonical_form(&gks).unwrap();
        assert_eq!(canon.nonzero_rates(1e-9), 1);
        assert!((canon.rates[0] - gamma).abs() < 1e-12);
        assert!(canon.rates[1].abs() < 1e-12 && canon.rates[2].abs() < 1e-12);
        // L matches σ₋ up to a global phase
        let overlap = sm().hs_inner(&canon.lindblad_ops[0]).norm();
        assert!((overlap - 1.0).abs() < 1e-10, "|<σ₋, L>| = {overlap}");
    }

    #[test]
    fn sigma_pm_kernel_has_no_dephasing_term_either() {
        // Kernel case with m_z = 2m_x: the σz-channel coefficient cancels.
        let basis = OperatorBasis::pauli();
        let gks = gks_matrix(&sigma_pm_kernel(&basis, 1.0)).unwrap();
        assert!(gks.kappa()[[2, 2]].norm() <= 1e-10);
    }

    #[test]
    fn pure_dephasing_kappa_is_a_single_entry() {
        // K(ω) = γ(σz ω σz − ω): κ has the single entry 2γ on the σz slot,
        // H = 0.
        let basis = OperatorBasis::pauli();
        let gamma = 0.8;
        let k = SuperOp::from_action(
            move |w| sz().matmul(w).matmul(&sz()).sub(w).scale(c(gamma, 0.0)),
            &basis,
        )
        .unwrap();
        let gks = gks_matrix(&k).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == 2 && j == 2 { c(2.0 * gamma, 0.0) } else { c(0., 0.) };
                assert!(
                    (gks.kappa()[[i, j]] - want).norm() < 1e-12,
                    "kappa[{i}][{j}] = {}",
                    gks.kappa()[[i, j]]
                );
            }
        }
        assert!(gks.hamiltonian().max_abs() < 1e-12);
    }

    #[test]
    fn zero_kappa_gives_zero_rates_and_zero_reconstruction() {
        let basis = OperatorBasis::pauli();
        let gks = gks_matrix(&SuperOp::zero(&basis)).unwrap();
        let canon = canonical_form(&gks).unwrap();
        assert!(canon.rates.iter().all(|r| r.abs() < 1e-14));
        let rec = reconstruct(&canon, &basis).unwrap();
        assert!(rec.frobenius_norm() < 1e-12);
    }

    #[test]
    fn round_trip_on_qubit_generators() {
        let basis = OperatorBasis::pauli();
        for s in [amplitude_damping(&basis, 1.0), sigma_pm_kernel(&basis, 1.0)] {
            let rec =
                reconstruct(&canonical_form(&gks_matrix(&s).unwrap()).unwrap(), &basis).unwrap();
            let resid = rec.sub(&s).frobenius_norm() / s.frobenius_norm();
            assert!(resid <= 1e-9, "round trip residual {resid}");
        }
    }

    #[test]
    fn round_trip_with_hamiltonian_part() {
        let basis = OperatorBasis::pauli();
        let h = Operator::new(array![[c(0.3, 0.), c(0.1, 0.2)], [c(0.1, -0.2), c(-0.3, 0.)]])
            .unwrap();
        let h2 = h.clone();
        let s = SuperOp::from_action(
            move |w| {
                let unitary = h2.commutator(w).scale(c(0.0, -1.0));
                let jump = sm().matmul(w).matmul(&sp());
                let num = sp().matmul(&sm());
                unitary.add(&jump.sub(&num.anticommutator(w).scale(c(0.5, 0.0))))
            },
            &basis,
        )
        .unwrap();
        let gks = gks_matrix(&s).unwrap();
        // the Hamiltonian is recovered up to a multiple of the identity
        let tr = gks.hamiltonian().trace() / c(2.0, 0.0);
        let h_tracefree = gks.hamiltonian().sub(&Operator::identity(2).scale(tr));
        assert!(h_tracefree.sub(&h).max_abs() < 1e-10);

        let rec = reconstruct(&canonical_form(&gks).unwrap(), &basis).unwrap();
        let resid = rec.sub(&s).frobenius_norm() / s.frobenius_norm();
        assert!(resid <= 1e-9, "round trip with H residual {resid}");
    }

    #[test]
    fn round_trip_qutrit_ladder_kernel() {
        let basis = OperatorBasis::gell_mann();
        let z = c(0., 0.);
        let o = c(1., 0.);
        let sp3 = Operator::new(
            Array2::from_shape_vec((3, 3), vec![z, o, z, z, z, o, z, z, z]).unwrap(),
        )
        .unwrap();
        let sm3 = sp3.adjoint();
        let s = SuperOp::from_action(
            move |w| {
                let t1 = sm3.matmul(w).matmul(&sp3);
                let a1 = sp3.matmul(&sm3).anticommutator(w).scale(c(0.5, 0.0));
                let t2 = sp3.matmul(w).matmul(&sm3);
                let a2 = sm3.matmul(&sp3).anticommutator(w).scale(c(0.5, 0.0));
                t1.sub(&a1).add(&t2.sub(&a2))
            },
            &basis,
        )
        .unwrap();
        let canon = canonical_form(&gks_matrix(&s).unwrap()).unwrap();
        let rec = reconstruct(&canon, &basis).unwrap();
        let resid = rec.sub(&s).frobenius_norm() / s.frobenius_norm();
        assert!(resid <= 1e-9, "qutrit round trip residual {resid}");
        // the kernel itself needs only two Lindblad channels
        assert_eq!(canon.nonzero_rates(1e-9), 2);
    }

    #[test]
    fn rates_invariant_under_basis_re_phasing() {
        // σ_α → e^{iθ_α} σ_α leaves the rate spectrum unchanged.
        let basis = OperatorBasis::pauli();
        let thetas = [0.4, -1.1, 2.3];
        let rephased: Vec<Operator> = basis
            .elements()
            .iter()
            .enumerate()
            .map(|(a, e)| {
                if a < 3 {
                    e.scale(C64::from_polar(1.0, thetas[a]))
                } else {
                    e.clone()
                }
            })
            .collect();
        let basis2 = Arc::new(OperatorBasis::new(rephased).unwrap());
        let mut r1 = canonical_rates(&amplitude_damping(&basis, 0.7)).unwrap();
        let mut r2 = canonical_rates(&amplitude_damping(&basis2, 0.7)).unwrap();
        r1.sort_by(|a, b| a.partial_cmp(b).unwrap());
        r2.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in r1.iter().zip(r2.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn non_identity_last_basis_is_rejected() {
        let h = 1.0 / 2f64.sqrt();
        let id = Operator::new(array![[c(h, 0.), c(0., 0.)], [c(0., 0.), c(h, 0.)]]).unwrap();
        let sxn = Operator::new(array![[c(0., 0.), c(h, 0.)], [c(h, 0.), c(0., 0.)]]).unwrap();
        let syn = Operator::new(array![[c(0., 0.), c(0., -h)], [c(0., h), c(0., 0.)]]).unwrap();
        let szn = Operator::new(array![[c(h, 0.), c(0., 0.)], [c(0., 0.), c(-h, 0.)]]).unwrap();
        let basis = Arc::new(OperatorBasis::new(vec![id, sxn, syn, szn]).unwrap());
        let s = SuperOp::zero(&basis);
        assert!(matches!(gks_matrix(&s), Err(Error::PreconditionViolated(_))));
    }
}
