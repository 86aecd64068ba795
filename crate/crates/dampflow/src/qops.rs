//! Operator and superoperator algebra.
//!
//! Operators are elements of B(H) for an N-dimensional Hilbert space,
//! represented as N×N complex matrices. A superoperator Ξ acting on B(H) is
//! represented in an orthonormal operator basis {σ_α} by the N²×N² matrix
//!
//!   M^Ξ_{αβ} = Tr[σ_α† Ξ(σ_β)],
//!
//! so that Ξ(ω) = Σ_{αβ} M_{αβ} Tr[σ_β† ω] σ_α. Diagonalizable superoperators
//! admit a damping-basis decomposition Ξ(ω) = Σ_α λ_α Tr[ς_α† ω] τ_α with
//! bi-orthogonal pairs Tr[ς_α† τ_β] = δ_αβ; the τ_α are right eigenoperators
//! of Ξ and the ς_α are eigenoperators of the dual Ξ′ with conjugate
//! eigenvalues.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Inverse, OperationNorm, SVD};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::{tol, Error, Result};

pub type C64 = Complex64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// An element of B(H): an N×N complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    mat: Array2<C64>,
}

impl Operator {
    pub fn new(mat: Array2<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square and nonempty, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("operator entries must be finite".into()));
        }
        Ok(Self { mat })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { mat: Array2::zeros((dim, dim)) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: Array2::eye(dim) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn into_mat(self) -> Array2<C64> {
        self.mat
    }

    /// Hermitian conjugate A†.
    pub fn adjoint(&self) -> Self {
        Self { mat: self.mat.t().mapv(|z| z.conj()) }
    }

    pub fn trace(&self) -> C64 {
        self.mat.diag().sum()
    }

    /// Hilbert–Schmidt inner product ⟨self, other⟩ = Tr[self† other].
    pub fn hs_inner(&self, other: &Self) -> C64 {
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Frobenius norm, which coincides with the HS norm.
    pub fn norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tolerance: f64) -> bool {
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                if (self.mat[[i, j]] - self.mat[[j, i]].conj()).norm() > tolerance {
                    return false;
                }
            }
        }
        true
    }

    pub fn matmul(&self, other: &Self) -> Self {
        Self { mat: self.mat.dot(&other.mat) }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { mat: self.mat.mapv(|z| z * s) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { mat: &self.mat + &other.mat }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { mat: &self.mat - &other.mat }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self { mat: self.mat.dot(&other.mat) - other.mat.dot(&self.mat) }
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        Self { mat: self.mat.dot(&other.mat) + other.mat.dot(&self.mat) }
    }

    /// Row-major JSON with complex entries as `[re, im]` pairs.
    pub fn to_json(&self) -> Value {
        let entries: Vec<Value> = self.mat.iter().map(|z| json!([z.re, z.im])).collect();
        json!({ "dim": self.dim(), "entries": entries })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let dim = v["dim"]
            .as_u64()
            .ok_or_else(|| Error::InvalidInput("operator JSON missing 'dim'".into()))?
            as usize;
        let entries = v["entries"]
            .as_array()
            .ok_or_else(|| Error::InvalidInput("operator JSON missing 'entries'".into()))?;
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "operator JSON has {} entries for dim {}",
                entries.len(),
                dim
            )));
        }
        let mut mat = Array2::zeros((dim, dim));
        for (k, e) in entries.iter().enumerate() {
            let re = e[0].as_f64().ok_or_else(|| Error::InvalidInput("bad complex pair".into()))?;
            let im = e[1].as_f64().ok_or_else(|| Error::InvalidInput("bad complex pair".into()))?;
            mat[[k / dim, k % dim]] = c(re, im);
        }
        Operator::new(mat)
    }
}

/// Matrix exponential by scaling and squaring with a Taylor core.
///
/// Intended for the small matrices that occur here (N² ≤ 9 superoperators);
/// accuracy is close to machine precision for well-scaled inputs.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let norm1 = one_norm(a);
    let s = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a.mapv(|z| z / c(2f64.powi(s as i32), 0.0));
    let mut result = Array2::eye(n);
    let mut term: Array2<C64> = Array2::eye(n);
    for k in 1..40 {
        term = term.dot(&scaled).mapv(|z| z / c(k as f64, 0.0));
        let tn = term.iter().map(|z| z.norm()).fold(0.0, f64::max);
        result += &term;
        if tn < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        result = result.dot(&result);
    }
    result
}

/// An ordered orthonormal basis of B(H) with N² elements.
#[derive(Clone, Debug)]
pub struct OperatorBasis {
    dim: usize,
    elements: Vec<Operator>,
    last_is_normalized_identity: bool,
}

impl OperatorBasis {
    /// Builds a basis, verifying Hilbert–Schmidt orthonormality.
    pub fn new(elements: Vec<Operator>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidInput("empty operator basis".into()));
        }
        let dim = elements[0].dim();
        if elements.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "basis of B(H) with dim {} needs {} elements, got {}",
                dim,
                dim * dim,
                elements.len()
            )));
        }
        for (a, ea) in elements.iter().enumerate() {
            if ea.dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "basis element {} has dim {} instead of {}",
                    a,
                    ea.dim(),
                    dim
                )));
            }
            for (b, eb) in elements.iter().enumerate() {
                let expected = if a == b { 1.0 } else { 0.0 };
                let g = ea.hs_inner(eb);
                if (g - c(expected, 0.0)).norm() > tol::BASIS_ORTHONORMALITY {
                    return Err(Error::InvalidInput(format!(
                        "basis not orthonormal: |<e{},e{}> - {}| = {:.3e}",
                        a,
                        b,
                        expected,
                        (g - c(expected, 0.0)).norm()
                    )));
                }
            }
        }
        let norm_id = Operator::identity(dim).scale(c(1.0 / (dim as f64).sqrt(), 0.0));
        let last_is_normalized_identity =
            elements.last().unwrap().sub(&norm_id).max_abs() <= tol::BASIS_ORTHONORMALITY;
        Ok(Self { dim, elements, last_is_normalized_identity })
    }

    /// Normalized Pauli basis {σx/√2, σy/√2, σz/√2, 1/√2}, identity last.
    pub fn pauli() -> Arc<Self> {
        let h = 1.0 / 2f64.sqrt();
        let sx = Operator::new(ndarray::array![[c(0., 0.), c(h, 0.)], [c(h, 0.), c(0., 0.)]]).unwrap();
        let sy =
            Operator::new(ndarray::array![[c(0., 0.), c(0., -h)], [c(0., h), c(0., 0.)]]).unwrap();
        let sz = Operator::new(ndarray::array![[c(h, 0.), c(0., 0.)], [c(0., 0.), c(-h, 0.)]]).unwrap();
        let id = Operator::new(ndarray::array![[c(h, 0.), c(0., 0.)], [c(0., 0.), c(h, 0.)]]).unwrap();
        Arc::new(Self::new(vec![sx, sy, sz, id]).unwrap())
    }

    /// Normalized Gell-Mann basis σ1..σ8 plus 1/√3, identity last.
    pub fn gell_mann() -> Arc<Self> {
        let r2 = 1.0 / 2f64.sqrt();
        let r6 = 1.0 / 6f64.sqrt();
        let r3 = 1.0 / 3f64.sqrt();
        let z = c(0., 0.);
        let m = |rows: [[C64; 3]; 3]| {
            Operator::new(Array2::from_shape_vec((3, 3), rows.concat()).unwrap()).unwrap()
        };
        let s1 = m([[z, c(r2, 0.), z], [c(r2, 0.), z, z], [z, z, z]]);
        let s2 = m([[z, c(0., -r2), z], [c(0., r2), z, z], [z, z, z]]);
        let s3 = m([[c(r2, 0.), z, z], [z, c(-r2, 0.), z], [z, z, z]]);
        let s4 = m([[z, z, c(r2, 0.)], [z, z, z], [c(r2, 0.), z, z]]);
        let s5 = m([[z, z, c(0., -r2)], [z, z, z], [c(0., r2), z, z]]);
        let s6 = m([[z, z, z], [z, z, c(r2, 0.)], [z, c(r2, 0.), z]]);
        let s7 = m([[z, z, z], [z, z, c(0., -r2)], [z, c(0., r2), z]]);
        let s8 = m([[c(r6, 0.), z, z], [z, c(r6, 0.), z], [z, z, c(-2.0 * r6, 0.)]]);
        let id = m([[c(r3, 0.), z, z], [z, c(r3, 0.), z], [z, z, c(r3, 0.)]]);
        Arc::new(Self::new(vec![s1, s2, s3, s4, s5, s6, s7, s8, id]).unwrap())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of basis elements, N².
    pub fn size(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    pub fn element(&self, alpha: usize) -> &Operator {
        &self.elements[alpha]
    }

    pub fn last_is_normalized_identity(&self) -> bool {
        self.last_is_normalized_identity
    }

    /// Coefficient vector c_α = Tr[σ_α† ω].
    pub fn project(&self, op: &Operator) -> Array1<C64> {
        Array1::from_iter(self.elements.iter().map(|e| e.hs_inner(op)))
    }

    /// Reassembles ω = Σ_α c_α σ_α.
    pub fn assemble(&self, coeffs: &Array1<C64>) -> Operator {
        let mut mat = Array2::zeros((self.dim, self.dim));
        for (e, &cv) in self.elements.iter().zip(coeffs.iter()) {
            mat = mat + e.mat().mapv(|z| z * cv);
        }
        Operator { mat }
    }
}

/// Matrix representation of a linear map on B(H) in a fixed orthonormal basis.
#[derive(Clone, Debug)]
pub struct SuperOp {
    basis: Arc<OperatorBasis>,
    matrix: Array2<C64>,
}

impl SuperOp {
    /// Builds the matrix representation of `action`, M_{αβ} = Tr[σ_α† action(σ_β)].
    ///
    /// The caller guarantees linearity of the action; the reproduction of the
    /// action on the basis is what the representation preserves by
    /// construction. Returns `DimensionMismatch` if the action changes the
    /// operator dimension.
    pub fn from_action<F>(action: F, basis: &Arc<OperatorBasis>) -> Result<Self>
    where
        F: Fn(&Operator) -> Operator,
    {
        let n2 = basis.size();
        let mut matrix = Array2::zeros((n2, n2));
        for (b, sigma_b) in basis.elements().iter().enumerate() {
            let out = action(sigma_b);
            if out.dim() != basis.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "action output dim {} does not match basis dim {}",
                    out.dim(),
                    basis.dim()
                )));
            }
            for (a, sigma_a) in basis.elements().iter().enumerate() {
                matrix[[a, b]] = sigma_a.hs_inner(&out);
            }
        }
        Ok(Self { basis: Arc::clone(basis), matrix })
    }

    pub fn from_matrix(matrix: Array2<C64>, basis: &Arc<OperatorBasis>) -> Result<Self> {
        let n2 = basis.size();
        if matrix.nrows() != n2 || matrix.ncols() != n2 {
            return Err(Error::DimensionMismatch(format!(
                "superop matrix must be {}x{}, got {}x{}",
                n2,
                n2,
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("superop entries must be finite".into()));
        }
        Ok(Self { basis: Arc::clone(basis), matrix })
    }

    pub fn identity(basis: &Arc<OperatorBasis>) -> Self {
        Self { basis: Arc::clone(basis), matrix: Array2::eye(basis.size()) }
    }

    pub fn zero(basis: &Arc<OperatorBasis>) -> Self {
        Self { basis: Arc::clone(basis), matrix: Array2::zeros((basis.size(), basis.size())) }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &Arc<OperatorBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn apply(&self, op: &Operator) -> Result<Operator> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "operator dim {} does not match superop dim {}",
                op.dim(),
                self.dim()
            )));
        }
        let coeffs = self.basis.project(op);
        Ok(self.basis.assemble(&self.matrix.dot(&coeffs)))
    }

    /// The dual map Ξ′ with ⟨ω, Ξ(ρ)⟩ = ⟨Ξ′(ω), ρ⟩; in an orthonormal basis
    /// its matrix is the conjugate transpose.
    pub fn dual(&self) -> Self {
        Self { basis: Arc::clone(&self.basis), matrix: self.matrix.t().mapv(|z| z.conj()) }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { basis: Arc::clone(&self.basis), matrix: self.matrix.mapv(|z| z * s) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { basis: Arc::clone(&self.basis), matrix: &self.matrix + &other.matrix }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { basis: Arc::clone(&self.basis), matrix: &self.matrix - &other.matrix }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self { basis: Arc::clone(&self.basis), matrix: self.matrix.dot(&other.matrix) }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Value {
        let entries: Vec<Value> = self.matrix.iter().map(|z| json!([z.re, z.im])).collect();
        json!({ "dim": self.dim(), "matrix": entries })
    }

    pub fn from_json(v: &Value, basis: &Arc<OperatorBasis>) -> Result<Self> {
        let dim = v["dim"]
            .as_u64()
            .ok_or_else(|| Error::InvalidInput("superop JSON missing 'dim'".into()))?
            as usize;
        if dim != basis.dim() {
            return Err(Error::DimensionMismatch(format!(
                "superop JSON dim {} does not match basis dim {}",
                dim,
                basis.dim()
            )));
        }
        let n2 = dim * dim;
        let entries = v["matrix"]
            .as_array()
            .ok_or_else(|| Error::InvalidInput("superop JSON missing 'matrix'".into()))?;
        if entries.len() != n2 * n2 {
            return Err(Error::DimensionMismatch(format!(
                "superop JSON has {} entries for dim {}",
                entries.len(),
                dim
            )));
        }
        let mut matrix = Array2::zeros((n2, n2));
        for (k, e) in entries.iter().enumerate() {
            let re = e[0].as_f64().ok_or_else(|| Error::InvalidInput("bad complex pair".into()))?;
            let im = e[1].as_f64().ok_or_else(|| Error::InvalidInput("bad complex pair".into()))?;
            matrix[[k / n2, k % n2]] = c(re, im);
        }
        Self::from_matrix(matrix, basis)
    }
}

/// True iff ‖AB − BA‖_max ≤ tol. Symmetric in its arguments.
pub fn commute_test(a: &SuperOp, b: &SuperOp, tolerance: f64) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "superop dims {} and {} differ",
            a.dim(),
            b.dim()
        )));
    }
    let comm = a.matrix.dot(&b.matrix) - b.matrix.dot(&a.matrix);
    Ok(comm.iter().map(|z| z.norm()).fold(0.0, f64::max) <= tolerance)
}

/// A damping-basis decomposition Ξ(ω) = Σ_α λ_α Tr[ς_α† ω] τ_α.
#[derive(Clone, Debug)]
pub struct DampingDecomposition {
    pub eigenvalues: Vec<C64>,
    /// Right eigenoperators of Ξ.
    pub tau: Vec<Operator>,
    /// Eigenoperators of the dual Ξ′, normalized so that Tr[ς_α† τ_β] = δ_αβ.
    pub sigma_dual: Vec<Operator>,
    /// α belongs to a degenerate eigenvalue group; the τ choice inside the
    /// group is an arbitrary orthogonalized one.
    pub degenerate: Vec<bool>,
}

impl DampingDecomposition {
    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Rebuilds the superoperator Σ_α λ_α |τ_α⟩⟨ς_α| in the given basis.
    pub fn reconstruct(&self, basis: &Arc<OperatorBasis>) -> SuperOp {
        let n2 = basis.size();
        let mut matrix = Array2::<C64>::zeros((n2, n2));
        for alpha in 0..self.size() {
            let v = basis.project(&self.tau[alpha]);
            let s = basis.project(&self.sigma_dual[alpha]);
            let lam = self.eigenvalues[alpha];
            for i in 0..n2 {
                for j in 0..n2 {
                    matrix[[i, j]] += lam * v[i] * s[j].conj();
                }
            }
        }
        SuperOp { basis: Arc::clone(basis), matrix }
    }
}

/// Diagonalizes a superoperator into its damping-basis form.
///
/// The bi-orthogonal partners are obtained by inverting the right-eigenvector
/// matrix, which enforces Tr[ς_α†τ_β] = δ_αβ up to linear-solve error.
/// Degenerate eigenvalues (relative gap ≤ 1e-8) are grouped; within a group
/// the τ choice is an arbitrary orthonormalized one and is flagged. Rejects
/// defective (Jordan-form) inputs via the eigenvector condition number.
pub fn damping_decompose(superop: &SuperOp) -> Result<DampingDecomposition> {
    let (vals, vecs) = superop
        .matrix
        .eig()
        .map_err(|e| Error::InvalidInput(format!("eigendecomposition failed: {e}")))?;
    let n2 = vals.len();

    // Deterministic ordering: descending real part, then descending imaginary.
    let mut order: Vec<usize> = (0..n2).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (vals[i], vals[j]);
        b.re.partial_cmp(&a.re)
            .unwrap()
            .then(b.im.partial_cmp(&a.im).unwrap())
    });
    let vals: Vec<C64> = order.iter().map(|&i| vals[i]).collect();
    let mut v = Array2::<C64>::zeros((n2, n2));
    for (new_col, &old_col) in order.iter().enumerate() {
        v.column_mut(new_col).assign(&vecs.column(old_col));
    }

    // Group near-equal eigenvalues and orthonormalize inside each group.
    let mut degenerate = vec![false; n2];
    let mut start = 0;
    while start < n2 {
        let mut end = start + 1;
        while end < n2 {
            let gap = (vals[end] - vals[end - 1]).norm();
            if gap <= tol::DEGENERACY_GROUPING * f64::max(1.0, vals[end].norm()) {
                end += 1;
            } else {
                break;
            }
        }
        if end - start > 1 {
            for d in degenerate.iter_mut().take(end).skip(start) {
                *d = true;
            }
            // Modified Gram-Schmidt over the group's columns; linear combos
            // within a degenerate eigenspace remain eigenvectors.
            for j in start..end {
                for i in start..j {
                    let prev = v.column(i).to_owned();
                    let proj: C64 = prev.iter().zip(v.column(j).iter()).map(|(p, q)| p.conj() * q).sum();
                    let mut col = v.column_mut(j);
                    for (ci, pi) in col.iter_mut().zip(prev.iter()) {
                        *ci -= proj * pi;
                    }
                }
                let nrm = v.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if nrm > 0.0 {
                    v.column_mut(j).mapv_inplace(|z| z / c(nrm, 0.0));
                }
            }
        }
        start = end;
    }

    // Defective inputs show up as an ill-conditioned eigenvector matrix.
    let cond = condition_number(&v)?;
    if cond > tol::DIAGONALIZABILITY_COND {
        return Err(Error::NotDiagonalizable { cond, limit: tol::DIAGONALIZABILITY_COND });
    }

    let v_inv = v
        .inv()
        .map_err(|e| Error::InvalidInput(format!("eigenvector inversion failed: {e}")))?;

    let basis = &superop.basis;
    let mut tau = Vec::with_capacity(n2);
    let mut sigma_dual = Vec::with_capacity(n2);
    for alpha in 0..n2 {
        tau.push(basis.assemble(&v.column(alpha).to_owned()));
        // Row α of V⁻¹, conjugated: s_α† v_β = δ_αβ.
        let s = Array1::from_iter(v_inv.row(alpha).iter().map(|z| z.conj()));
        sigma_dual.push(basis.assemble(&s));
    }

    Ok(DampingDecomposition { eigenvalues: vals, tau, sigma_dual, degenerate })
}

/// Condition number helper exposed for diagnostics.
pub fn condition_number(m: &Array2<C64>) -> Result<f64> {
    let (_, sv, _) = m
        .svd(false, false)
        .map_err(|e| Error::InvalidInput(format!("svd failed: {e}")))?;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(if smin > 0.0 { smax / smin } else { f64::INFINITY })
}

pub fn one_norm(m: &Array2<C64>) -> f64 {
    m.opnorm_one().unwrap_or_else(|_| m.iter().map(|z| z.norm()).sum())
}
