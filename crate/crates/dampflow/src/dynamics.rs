//! Propagation of the dynamical map under the three descriptions.
//!
//! - TCL:      dΛ/dt = K^TCL(t) Λ(t), classical RK4;
//! - NZ:       dΛ/dt = C Λ(t) + ∫₀ᵗ R(t−τ) Λ(τ) dτ, where C collects the
//!   delta weights of the kernel eigenvalues and R(t) its regular part;
//!   trapezoidal memory sum with a predictor-corrector step;
//! - Redfield: dΛ^Red/dt = K^Red(t) Λ^Red(t), RK4 (the time-local reading of
//!   the coarse-grained equation, which is what the divisibility analysis of
//!   the Redfield rates presupposes).
//!
//! Complete positivity is checked through Choi matrices.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::qops::{Operator, OperatorBasis, SuperOp};
use crate::scalarflow::{self, EigenSignal, TimeGrid};
use crate::{tol, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Tcl,
    Nz,
    #[serde(rename = "red")]
    Redfield,
}

impl std::fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeneratorKind::Tcl => write!(f, "tcl"),
            GeneratorKind::Nz => write!(f, "nz"),
            GeneratorKind::Redfield => write!(f, "red"),
        }
    }
}

/// A generator (or kernel) in damping-basis form: fixed bi-orthogonal pair
/// {τ_α}, {ς_α} plus one scalar eigen-signal per channel.
#[derive(Clone)]
pub struct GeneratorSpec {
    kind: GeneratorKind,
    basis: Arc<OperatorBasis>,
    tau: Vec<Operator>,
    sigma_dual: Vec<Operator>,
    signals: Vec<EigenSignal>,
    grid: TimeGrid,
    /// Cached coefficient vectors of τ_α (columns) and ς_α (rows, conjugated),
    /// and the projector matrices M_α = v_α s_α†.
    tau_coeffs: Vec<Array1<C64>>,
    dual_coeffs: Vec<Array1<C64>>,
    projectors: Vec<Array2<C64>>,
}

impl GeneratorSpec {
    pub fn new(
        kind: GeneratorKind,
        basis: Arc<OperatorBasis>,
        tau: Vec<Operator>,
        sigma_dual: Vec<Operator>,
        signals: Vec<EigenSignal>,
    ) -> Result<Self> {
        let n2 = basis.size();
        if tau.len() != n2 || sigma_dual.len() != n2 || signals.len() != n2 {
            return Err(Error::DimensionMismatch(format!(
                "need {} channels, got tau {}, duals {}, signals {}",
                n2,
                tau.len(),
                sigma_dual.len(),
                signals.len()
            )));
        }
        let grid = signals[0].grid();
        if signals.iter().any(|s| s.grid() != grid) {
            return Err(Error::DimensionMismatch("signals live on different grids".into()));
        }
        if kind != GeneratorKind::Nz {
            if let Some(s) = signals.iter().find(|s| s.has_delta()) {
                return Err(Error::PreconditionViolated(format!(
                    "{kind} signals must not carry delta weights (found {})",
                    s.delta_weight()
                )));
            }
        }
        for a in 0..n2 {
            for b in 0..n2 {
                let g = sigma_dual[a].hs_inner(&tau[b]);
                let want = if a == b { 1.0 } else { 0.0 };
                if (g - C64::new(want, 0.0)).norm() > tol::BIORTHOGONALITY {
                    return Err(Error::PreconditionViolated(format!(
                        "damping pair not bi-orthogonal at ({a},{b}): residual {:.3e}",
                        (g - C64::new(want, 0.0)).norm()
                    )));
                }
            }
        }
        let tau_coeffs: Vec<Array1<C64>> = tau.iter().map(|t| basis.project(t)).collect();
        let dual_coeffs: Vec<Array1<C64>> = sigma_dual.iter().map(|s| basis.project(s)).collect();
        let projectors = tau_coeffs
            .iter()
            .zip(dual_coeffs.iter())
            .map(|(v, s)| {
                let mut m = Array2::<C64>::zeros((n2, n2));
                for i in 0..n2 {
                    for j in 0..n2 {
                        m[[i, j]] = v[i] * s[j].conj();
                    }
                }
                m
            })
            .collect();
        Ok(Self { kind, basis, tau, sigma_dual, signals, grid, tau_coeffs, dual_coeffs, projectors })
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn basis(&self) -> &Arc<OperatorBasis> {
        &self.basis
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn channels(&self) -> usize {
        self.signals.len()
    }

    pub fn signals(&self) -> &[EigenSignal] {
        &self.signals
    }

    pub fn signal(&self, alpha: usize) -> &EigenSignal {
        &self.signals[alpha]
    }

    pub fn tau(&self) -> &[Operator] {
        &self.tau
    }

    pub fn sigma_dual(&self) -> &[Operator] {
        &self.sigma_dual
    }

    pub fn projector(&self, alpha: usize) -> &Array2<C64> {
        &self.projectors[alpha]
    }

    /// Same damping pair with different signals (and possibly kind).
    pub fn with_signals(&self, kind: GeneratorKind, signals: Vec<EigenSignal>) -> Result<Self> {
        Self::new(kind, Arc::clone(&self.basis), self.tau.clone(), self.sigma_dual.clone(), signals)
    }

    /// Σ_α m_α M_α for arbitrary channel values.
    pub fn assemble_matrix(&self, values: &[C64]) -> Array2<C64> {
        let n2 = self.basis.size();
        let mut out = Array2::<C64>::zeros((n2, n2));
        for (m, proj) in values.iter().zip(self.projectors.iter()) {
            if m.norm() != 0.0 {
                out = out + proj.mapv(|z| z * m);
            }
        }
        out
    }

    /// Generator superoperator matrix at grid sample k (regular part only;
    /// delta weights are handled by the NZ propagator).
    pub fn matrix_at(&self, k: usize) -> Array2<C64> {
        let values: Vec<C64> = self.signals.iter().map(|s| s.sample(k)).collect();
        self.assemble_matrix(&values)
    }

    pub fn superop_at(&self, k: usize) -> SuperOp {
        SuperOp::from_matrix(self.matrix_at(k), &self.basis).expect("assembled matrix is square")
    }

    /// Σ_α delta_α M_α, the delta-part superoperator of an NZ kernel.
    pub fn delta_matrix(&self) -> Array2<C64> {
        let values: Vec<C64> = self.signals.iter().map(|s| s.delta_weight()).collect();
        self.assemble_matrix(&values)
    }

    /// Channel projection ς_α† X τ_α of a superoperator matrix: recovers the
    /// eigenvalue of X on channel α when X is diagonal in the damping pair.
    pub fn channel_value(&self, matrix: &Array2<C64>, alpha: usize) -> C64 {
        let v = &self.tau_coeffs[alpha];
        let s = &self.dual_coeffs[alpha];
        let xv = matrix.dot(v);
        s.iter().zip(xv.iter()).map(|(si, xi)| si.conj() * xi).sum()
    }

    /// Converts between the TCL, NZ and Redfield descriptions channel by
    /// channel; the damping pair is untouched.
    pub fn convert(&self, to: GeneratorKind) -> Result<Self> {
        use GeneratorKind::*;
        if self.kind == to {
            return Ok(self.clone());
        }
        let signals: Result<Vec<EigenSignal>> = self
            .signals
            .iter()
            .map(|s| match (self.kind, to) {
                (Tcl, Nz) => scalarflow::tcl_to_nz(s),
                (Tcl, Redfield) => scalarflow::g_to_redfield(&scalarflow::tcl_to_g(s)?),
                (Nz, Tcl) => scalarflow::nz_to_tcl(s),
                (Nz, Redfield) => {
                    // the Redfield eigenvalue is the cumulative kernel integral, m^Red = c + ∫₀ᵗ r
                    let mut acc = scalarflow::cumint(s.samples(), s.grid().dt());
                    for z in acc.iter_mut() {
                        *z += s.delta_weight();
                    }
                    EigenSignal::from_samples(s.grid(), acc)
                }
                (Redfield, Nz) => scalarflow::redfield_to_nz(s),
                (Redfield, Tcl) => scalarflow::nz_to_tcl(&scalarflow::redfield_to_nz(s)?),
                _ => unreachable!(),
            })
            .collect();
        self.with_signals(to, signals?)
    }

    /// Map eigenvalue signals m_α(t). For a TCL generator this is the direct
    /// exponential; otherwise the always-regular route m = 1 + ∫₀ᵗ G, which
    /// exists even where the TCL description does not.
    pub fn map_eigenvalue_signals(&self) -> Result<Vec<EigenSignal>> {
        if self.kind == GeneratorKind::Tcl {
            return self.signals.iter().map(scalarflow::tcl_to_map).collect();
        }
        let nz = self.convert(GeneratorKind::Nz)?;
        nz.signals
            .iter()
            .map(|s| {
                let g = solve_g_from_nz(s)?;
                let mut acc = scalarflow::cumtrapz(&g, s.grid().dt());
                for z in acc.iter_mut() {
                    *z += 1.0;
                }
                EigenSignal::from_samples(s.grid(), acc)
            })
            .collect()
    }
}

/// Solves Ġ = r + cG + r∗G, G(0) = c, returning the samples of G.
fn solve_g_from_nz(m_nz: &EigenSignal) -> Result<Vec<C64>> {
    let dt = m_nz.grid().dt();
    let c0 = m_nz.delta_weight();
    let r = m_nz.samples();
    let n = r.len();
    let mut g = vec![C64::new(0.0, 0.0); n];
    let mut gdot = vec![C64::new(0.0, 0.0); n];
    g[0] = c0;
    gdot[0] = r[0] + c0 * g[0];
    for k in 1..n {
        let w = scalarflow::conv_weights(k, dt);
        let mut conv_known = C64::new(0.0, 0.0);
        for j in 0..k {
            conv_known += r[k - j] * g[j] * w[j];
        }
        let a = c0 + r[0] * w[k];
        let rhs = g[k - 1] + (gdot[k - 1] + r[k] + conv_known) * (0.5 * dt);
        g[k] = rhs / (1.0 - a * 0.5 * dt);
        gdot[k] = r[k] + a * g[k] + conv_known;
    }
    Ok(g)
}

/// A propagated family of maps on the grid, Λ(0) = 1.
#[derive(Clone)]
pub struct MapTrajectory {
    grid: TimeGrid,
    basis: Arc<OperatorBasis>,
    maps: Vec<Array2<C64>>,
}

impl MapTrajectory {
    fn new(grid: TimeGrid, basis: Arc<OperatorBasis>, maps: Vec<Array2<C64>>) -> Self {
        Self { grid, basis, maps }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn basis(&self) -> &Arc<OperatorBasis> {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn matrix_at(&self, k: usize) -> &Array2<C64> {
        &self.maps[k]
    }

    pub fn map_at(&self, k: usize) -> SuperOp {
        SuperOp::from_matrix(self.maps[k].clone(), &self.basis).expect("stored map is well-formed")
    }

    /// Largest entrywise deviation between two trajectories.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let n = self.maps.len().min(other.maps.len());
        let mut worst: f64 = 0.0;
        for k in 0..n {
            for (a, b) in self.maps[k].iter().zip(other.maps[k].iter()) {
                worst = worst.max((a - b).norm());
            }
        }
        worst
    }

    /// Worst trace-preservation residual ‖Λ′(1) − 1‖ over the trajectory.
    pub fn trace_preservation_residual(&self) -> f64 {
        let id = Operator::identity(self.basis.dim());
        let mut worst: f64 = 0.0;
        for m in &self.maps {
            let s = SuperOp::from_matrix(m.clone(), &self.basis).unwrap();
            let back = s.dual().apply(&id).unwrap();
            worst = worst.max(back.sub(&id).max_abs());
        }
        worst
    }

    /// Eigenvalue track ς_α† Λ(t_k) τ_α for one channel.
    pub fn eigenvalue_track(&self, gen: &GeneratorSpec, alpha: usize) -> Vec<C64> {
        self.maps.iter().map(|m| gen.channel_value(m, alpha)).collect()
    }
}

fn rk4_propagate(gen: &GeneratorSpec) -> MapTrajectory {
    let grid = gen.grid();
    let n = grid.n_steps();
    let dt = grid.dt();
    let n2 = gen.basis().size();
    let mut maps = Vec::with_capacity(n + 1);
    maps.push(Array2::<C64>::eye(n2));

    let sample_values = |k: usize| -> Vec<C64> {
        gen.signals().iter().map(|s| s.sample(k)).collect::<Vec<_>>()
    };
    // quadratic interpolation of the eigen-signals at the half-step; linear
    // interpolation would degrade RK4 to second order
    let half_values = |k: usize| -> Vec<C64> {
        gen.signals()
            .iter()
            .map(|s| {
                if k == 0 {
                    (s.sample(0) * 3.0 + s.sample(1) * 6.0 - s.sample(2)) / 8.0
                } else {
                    (-s.sample(k - 1) + s.sample(k) * 6.0 + s.sample(k + 1) * 3.0) / 8.0
                }
            })
            .collect()
    };

    for k in 0..n {
        let k0 = gen.assemble_matrix(&sample_values(k));
        let kh = gen.assemble_matrix(&half_values(k));
        let k1 = gen.assemble_matrix(&sample_values(k + 1));
        let y = &maps[k];
        let f1 = k0.dot(y);
        let f2 = kh.dot(&(y + &f1.mapv(|z| z * (0.5 * dt))));
        let f3 = kh.dot(&(y + &f2.mapv(|z| z * (0.5 * dt))));
        let f4 = k1.dot(&(y + &f3.mapv(|z| z * dt)));
        let next = y + &(f1 + f2.mapv(|z| z * 2.0) + f3.mapv(|z| z * 2.0) + f4)
            .mapv(|z| z * (dt / 6.0));
        maps.push(next);
    }
    MapTrajectory::new(grid, Arc::clone(gen.basis()), maps)
}

/// RK4 propagation of dΛ/dt = K^TCL(t)Λ(t).
pub fn propagate_tcl(gen: &GeneratorSpec) -> Result<MapTrajectory> {
    if gen.kind() != GeneratorKind::Tcl {
        return Err(Error::PreconditionViolated(format!(
            "propagate_tcl needs a TCL generator, got {}",
            gen.kind()
        )));
    }
    Ok(rk4_propagate(gen))
}

/// RK4 propagation of dΛ^Red/dt = K^Red(t)Λ^Red(t).
pub fn propagate_redfield(gen: &GeneratorSpec) -> Result<MapTrajectory> {
    if gen.kind() != GeneratorKind::Redfield {
        return Err(Error::PreconditionViolated(format!(
            "propagate_redfield needs a Redfield generator, got {}",
            gen.kind()
        )));
    }
    Ok(rk4_propagate(gen))
}

/// Closed-form commutative path: Λ(t) = Σ_α m_α(t) M_α with
/// m_α = exp(∫₀ᵗ m^TCL_α). Cross-check for the RK4 propagator.
pub fn closed_form_map(gen: &GeneratorSpec) -> Result<MapTrajectory> {
    if gen.kind() != GeneratorKind::Tcl {
        return Err(Error::PreconditionViolated(
            "closed_form_map needs a TCL generator".into(),
        ));
    }
    let m_signals: Result<Vec<EigenSignal>> =
        gen.signals().iter().map(scalarflow::tcl_to_map).collect();
    let m_signals = m_signals?;
    let grid = gen.grid();
    let maps = (0..grid.len())
        .map(|k| {
            let values: Vec<C64> = m_signals.iter().map(|s| s.sample(k)).collect();
            gen.assemble_matrix(&values)
        })
        .collect();
    Ok(MapTrajectory::new(grid, Arc::clone(gen.basis()), maps))
}

/// Marches the memory-kernel equation dΛ/dt = CΛ(t) + ∫₀ᵗ R(t−τ)Λ(τ)dτ.
///
/// The delta part of the kernel contributes the local term CΛ(t) with full
/// weight, which reproduces the exact semigroup in the pure-delta limit. The
/// memory sum uses the same endpoint-corrected trapezoid weights as the
/// scalar Volterra solvers; one explicit predictor plus one corrector pass
/// per step gives second order.
pub fn propagate_nz(gen: &GeneratorSpec) -> Result<MapTrajectory> {
    if gen.kind() != GeneratorKind::Nz {
        return Err(Error::PreconditionViolated(format!(
            "propagate_nz needs an NZ kernel, got {}",
            gen.kind()
        )));
    }
    let grid = gen.grid();
    let n = grid.n_steps();
    let dt = grid.dt();
    let n2 = gen.basis().size();

    let c_mat = gen.delta_matrix();
    let r0_mat = gen.matrix_at(0);
    // S† with rows ς_α†; P_j = S† Λ_j lets the memory sum use the rank-1
    // structure of the projectors: Σ_j w_j R(t−t_j)Λ_j = V · Q with
    // Q[α,·] = Σ_j w_j r_α[k−j] P_j[α,·].
    let mut s_dag = Array2::<C64>::zeros((n2, n2));
    let mut v_mat = Array2::<C64>::zeros((n2, n2));
    for alpha in 0..n2 {
        for i in 0..n2 {
            s_dag[[alpha, i]] = gen.dual_coeffs[alpha][i].conj();
            v_mat[[i, alpha]] = gen.tau_coeffs[alpha][i];
        }
    }
    let r_samples: Vec<&[C64]> = gen.signals().iter().map(|s| s.samples()).collect();

    let mut maps: Vec<Array2<C64>> = Vec::with_capacity(n + 1);
    maps.push(Array2::<C64>::eye(n2));
    let mut p_hist: Vec<Array2<C64>> = Vec::with_capacity(n + 1);
    p_hist.push(s_dag.dot(&maps[0]));

    let mut rhs_k = c_mat.dot(&maps[0]); // memory integral is empty at t = 0

    for k in 0..n {
        let w = scalarflow::conv_weights(k + 1, dt);
        // known part of the memory integral at t_{k+1}
        let mut q = Array2::<C64>::zeros((n2, n2));
        for (j, p) in p_hist.iter().enumerate() {
            for alpha in 0..n2 {
                let coeff = r_samples[alpha][k + 1 - j] * w[j];
                if coeff.norm() != 0.0 {
                    for i in 0..n2 {
                        q[[alpha, i]] += coeff * p[[alpha, i]];
                    }
                }
            }
        }
        let partial = v_mat.dot(&q);
        let w_end = w[k + 1];

        let pred = &maps[k] + &rhs_k.mapv(|z| z * dt);
        let rhs_pred = c_mat.dot(&pred) + &partial + r0_mat.dot(&pred).mapv(|z| z * w_end);
        let next = &maps[k] + &(&rhs_k + &rhs_pred).mapv(|z| z * (0.5 * dt));
        rhs_k = c_mat.dot(&next) + &partial + r0_mat.dot(&next).mapv(|z| z * w_end);
        p_hist.push(s_dag.dot(&next));
        maps.push(next);
    }
    Ok(MapTrajectory::new(grid, Arc::clone(gen.basis()), maps))
}

/// Choi matrix Σ_{ij} |i⟩⟨j| ⊗ Λ(|i⟩⟨j|); positive semidefinite iff Λ is CP.
pub fn choi_matrix(map: &SuperOp) -> Result<Operator> {
    let n = map.dim();
    let mut choi = Array2::<C64>::zeros((n * n, n * n));
    for i in 0..n {
        for j in 0..n {
            let mut unit = Array2::<C64>::zeros((n, n));
            unit[[i, j]] = C64::new(1.0, 0.0);
            let out = map.apply(&Operator::new(unit)?)?;
            for k in 0..n {
                for l in 0..n {
                    choi[[i * n + k, j * n + l]] = out.mat()[[k, l]];
                }
            }
        }
    }
    Operator::new(choi)
}

/// Smallest eigenvalue of the (Hermitian part of the) Choi matrix.
pub fn choi_min_eigenvalue(map: &SuperOp) -> Result<f64> {
    let choi = choi_matrix(map)?;
    let mat = choi.mat();
    let m = mat.nrows();
    let mut h = Array2::<C64>::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            h[[i, j]] = (mat[[i, j]] + mat[[j, i]].conj()) * 0.5;
        }
    }
    let (vals, _) = h
        .eigh(UPLO::Lower)
        .map_err(|e| Error::InvalidInput(format!("Choi eigensolve failed: {e}")))?;
    Ok(vals.iter().cloned().fold(f64::INFINITY, f64::min))
}

#[derive(Clone, Debug)]
pub struct CptpReport {
    pub cptp: bool,
    pub first_violation_time: Option<f64>,
    pub min_choi_eigenvalue: f64,
    pub max_trace_residual: f64,
}

/// Verifies PSD Choi and trace preservation of every map in the trajectory.
pub fn cptp_check(traj: &MapTrajectory, tolerance: f64) -> Result<CptpReport> {
    let id = Operator::identity(traj.basis().dim());
    let mut min_eig = f64::INFINITY;
    let mut max_tr: f64 = 0.0;
    let mut first_violation = None;
    for k in 0..traj.len() {
        let map = traj.map_at(k);
        let eig = choi_min_eigenvalue(&map)?;
        let tr = map.dual().apply(&id)?.sub(&id).max_abs();
        min_eig = min_eig.min(eig);
        max_tr = max_tr.max(tr);
        if (eig < -tolerance || tr > tolerance) && first_violation.is_none() {
            first_violation = Some(traj.grid().time(k));
        }
    }
    Ok(CptpReport {
        cptp: first_violation.is_none(),
        first_violation_time: first_violation,
        min_choi_eigenvalue: min_eig,
        max_trace_residual: max_tr,
    })
}
