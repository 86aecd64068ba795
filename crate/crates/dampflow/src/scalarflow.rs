//! Scalar eigenvalue-function machinery.
//!
//! In the damping basis all four descriptions of a commutative dynamics share
//! operator structure; what changes are scalar functions of time per channel:
//!
//! - m(t)       map eigenvalue, m(t) = exp(∫₀ᵗ m^TCL)
//! - m^TCL(t)   time-local generator eigenvalue, m^TCL = ṁ/m
//! - G(t)       auxiliary, G = d/dt m = m^TCL·m, with m = 1 + ∫₀ᵗ G
//! - m^NZ(t)    memory-kernel eigenvalue, m̃^NZ = uG̃/(1+G̃); it carries a
//!   Dirac delta at the origin with weight m^TCL(0)
//! - m^Red(t)   coarse-grained eigenvalue, m^Red = ∫₀ᵗ m^NZ, solving the
//!   Volterra equation m^Red = G − G∗m^Red
//!
//! All Laplace-domain relations are executed in the time domain as marching
//! Volterra problems on a uniform grid; a fixed-Talbot inverse Laplace
//! transform provides an independent cross-check path.

use num_complex::Complex64;

use crate::{tol, Error, Result};

pub type C64 = Complex64;

/// A uniform time grid on [0, t_end] with n_steps panels (n_steps+1 samples).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TimeGrid {
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if t_end <= 0.0 || !t_end.is_finite() {
            return Err(Error::InvalidInput(format!("t_end must be positive, got {t_end}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidInput("n_steps must be positive".into()));
        }
        Ok(Self { t_end, n_steps })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    /// Number of samples, n_steps + 1.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        self.dt() * k as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    /// Same horizon with twice the resolution.
    pub fn refined(&self) -> Self {
        Self { t_end: self.t_end, n_steps: self.n_steps * 2 }
    }
}

/// A scalar function of time on a uniform grid, with an optional Dirac-delta
/// weight at the origin (nonzero only for memory-kernel eigenvalues).
#[derive(Clone, Debug)]
pub struct EigenSignal {
    grid: TimeGrid,
    samples: Vec<C64>,
    delta_weight: C64,
}

impl EigenSignal {
    pub fn from_samples(grid: TimeGrid, samples: Vec<C64>) -> Result<Self> {
        Self::with_delta(grid, samples, C64::new(0.0, 0.0))
    }

    pub fn with_delta(grid: TimeGrid, samples: Vec<C64>, delta_weight: C64) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "signal has {} samples for a grid of {}",
                samples.len(),
                grid.len()
            )));
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("signal samples must be finite".into()));
        }
        if !delta_weight.re.is_finite() || !delta_weight.im.is_finite() {
            return Err(Error::InvalidInput("delta weight must be finite".into()));
        }
        Ok(Self { grid, samples, delta_weight })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> C64) -> Self {
        let samples = (0..grid.len()).map(|k| f(grid.time(k))).collect();
        Self { grid, samples, delta_weight: C64::new(0.0, 0.0) }
    }

    pub fn from_real_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |t| C64::new(f(t), 0.0))
    }

    pub fn constant(grid: TimeGrid, value: C64) -> Self {
        Self { grid, samples: vec![value; grid.len()], delta_weight: C64::new(0.0, 0.0) }
    }

    pub fn zero(grid: TimeGrid) -> Self {
        Self::constant(grid, C64::new(0.0, 0.0))
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn sample(&self, k: usize) -> C64 {
        self.samples[k]
    }

    pub fn delta_weight(&self) -> C64 {
        self.delta_weight
    }

    pub fn has_delta(&self) -> bool {
        self.delta_weight.norm() > 0.0
    }

    pub fn set_delta_weight(&mut self, w: C64) {
        self.delta_weight = w;
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.samples
            .iter()
            .zip(other.samples.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|&z| f(z)).collect(),
            delta_weight: self.delta_weight,
        }
    }

    fn require_no_delta(&self, what: &str) -> Result<()> {
        if self.delta_weight.norm() != 0.0 {
            return Err(Error::PreconditionViolated(format!(
                "{what} requires a signal without a delta at the origin \
                 (delta weight {})",
                self.delta_weight
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// grid calculus

/// Cumulative integral by the trapezoidal rule, F(0) = 0.
pub fn cumtrapz(samples: &[C64], dt: f64) -> Vec<C64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = C64::new(0.0, 0.0);
    out.push(acc);
    for k in 1..samples.len() {
        acc += (samples[k - 1] + samples[k]) * 0.5 * dt;
        out.push(acc);
    }
    out
}

/// Third-order cumulative integral (Adams–Moulton 3 marching, the
/// incremental form of the endpoint-corrected trapezoid weights). The plain
/// trapezoid drift of O(dt²·t) is visible at the accuracies the acceptance
/// suite pins for map eigenvalues.
pub fn cumint(samples: &[C64], dt: f64) -> Vec<C64> {
    let n = samples.len();
    if n < 3 {
        return cumtrapz(samples, dt);
    }
    let mut out = Vec::with_capacity(n);
    out.push(C64::new(0.0, 0.0));
    out.push((samples[0] * 5.0 + samples[1] * 8.0 - samples[2]) * (dt / 12.0));
    for k in 1..n - 1 {
        let step = (samples[k + 1] * 5.0 + samples[k] * 8.0 - samples[k - 1]) * (dt / 12.0);
        let prev = out[k];
        out.push(prev + step);
    }
    out
}

/// Second-order derivative: centered in the interior, one-sided at the ends.
pub fn derivative(samples: &[C64], dt: f64) -> Vec<C64> {
    let n = samples.len();
    assert!(n >= 3, "derivative needs at least three samples");
    let mut out = vec![C64::new(0.0, 0.0); n];
    out[0] = (samples[0] * -3.0 + samples[1] * 4.0 - samples[2]) / (2.0 * dt);
    for k in 1..n - 1 {
        out[k] = (samples[k + 1] - samples[k - 1]) / (2.0 * dt);
    }
    out[n - 1] = (samples[n - 1] * 3.0 - samples[n - 2] * 4.0 + samples[n - 3]) / (2.0 * dt);
    out
}

/// Convolution quadrature weights for ∫₀^{k·dt}: trapezoid with the first
/// Gregory endpoint correction (third order). Plain trapezoid accumulates an
/// O(dt²·t) drift that is too large at the accuracies pinned by the
/// acceptance suite; the endpoint-corrected weights remove it while keeping
/// the O(n²) marching structure.
pub(crate) fn conv_weights(k: usize, dt: f64) -> Vec<f64> {
    match k {
        0 => vec![0.0],
        1 => vec![0.5 * dt, 0.5 * dt],
        2 => vec![5.0 / 12.0 * dt, 14.0 / 12.0 * dt, 5.0 / 12.0 * dt],
        _ => {
            let mut w = vec![dt; k + 1];
            w[0] = 5.0 / 12.0 * dt;
            w[k] = 5.0 / 12.0 * dt;
            w[1] = 13.0 / 12.0 * dt;
            w[k - 1] = 13.0 / 12.0 * dt;
            w
        }
    }
}

/// Discrete convolution (f∗g)(t_k) = ∫₀^{t_k} f(t_k−τ)g(τ)dτ on the grid.
pub fn convolve(f: &[C64], g: &[C64], dt: f64) -> Vec<C64> {
    let n = f.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for k in 1..n {
        let w = conv_weights(k, dt);
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..=k {
            acc += f[k - j] * g[j] * w[j];
        }
        out[k] = acc;
    }
    out
}

// ---------------------------------------------------------------------------
// the local/non-local transform chain and the Redfield coarse graining

/// m(t) = exp(∫₀ᵗ m^TCL), the map eigenvalue; m(0) = 1.
pub fn tcl_to_map(m_tcl: &EigenSignal) -> Result<EigenSignal> {
    m_tcl.require_no_delta("tcl_to_map")?;
    let integral = cumint(m_tcl.samples(), m_tcl.grid().dt());
    EigenSignal::from_samples(m_tcl.grid(), integral.into_iter().map(|z| z.exp()).collect())
}

/// m^TCL(t) = ṁ(t)/m(t); fails where the map eigenvalue reaches the singular
/// floor, since the time-local generator only exists for invertible maps.
pub fn map_to_tcl(m: &EigenSignal) -> Result<EigenSignal> {
    map_to_tcl_with_floor(m, tol::SINGULAR_FLOOR)
}

pub fn map_to_tcl_with_floor(m: &EigenSignal, floor: f64) -> Result<EigenSignal> {
    m.require_no_delta("map_to_tcl")?;
    let grid = m.grid();
    check_map_invertible(m.samples(), grid, floor)?;
    let dm = derivative(m.samples(), grid.dt());
    let samples = dm.iter().zip(m.samples().iter()).map(|(d, v)| d / v).collect();
    EigenSignal::from_samples(grid, samples)
}

/// Rejects map eigenvalues with a zero on the grid. Besides the sample floor,
/// a sign change of a numerically real eigenvalue brackets a transversal zero
/// between samples, where the TCL generator diverges even though no sample
/// itself is small.
fn check_map_invertible(samples: &[C64], grid: TimeGrid, floor: f64) -> Result<()> {
    for (k, z) in samples.iter().enumerate() {
        if z.norm() <= floor {
            return Err(Error::SingularMap { t: grid.time(k), value: z.norm(), floor });
        }
    }
    let real_tol = |z: &C64| z.im.abs() <= 1e-9 * f64::max(1.0, z.re.abs());
    for k in 0..samples.len() - 1 {
        let (a, b) = (samples[k], samples[k + 1]);
        if real_tol(&a) && real_tol(&b) && a.re * b.re < 0.0 {
            return Err(Error::SingularMap { t: grid.time(k + 1), value: b.norm(), floor });
        }
    }
    Ok(())
}

/// First time at which the map eigenvalue has a zero on the grid (a sample at
/// or below the floor, or a bracketed real sign change), if any.
pub fn first_map_zero(m: &EigenSignal, floor: f64) -> Option<f64> {
    match check_map_invertible(m.samples(), m.grid(), floor) {
        Ok(()) => None,
        Err(Error::SingularMap { t, .. }) => Some(t),
        Err(_) => None,
    }
}

/// G(t) = d/dt exp(∫₀ᵗ m^TCL), evaluated in product form m^TCL(t)·m(t).
pub fn tcl_to_g(m_tcl: &EigenSignal) -> Result<EigenSignal> {
    m_tcl.require_no_delta("tcl_to_g")?;
    let m = tcl_to_map(m_tcl)?;
    let samples = m_tcl.samples().iter().zip(m.samples().iter()).map(|(a, b)| a * b).collect();
    EigenSignal::from_samples(m_tcl.grid(), samples)
}

/// Solves m^Red(t) = G(t) − ∫₀ᵗ G(t−τ) m^Red(τ) dτ by marching quadrature.
///
/// The linear Volterra equation of the second kind is unconditionally
/// well-posed on a finite grid, so this never fails.
pub fn g_to_redfield(g: &EigenSignal) -> Result<EigenSignal> {
    g.require_no_delta("g_to_redfield")?;
    let dt = g.grid().dt();
    let gs = g.samples();
    let n = gs.len();
    let mut m = vec![C64::new(0.0, 0.0); n];
    m[0] = gs[0];
    for k in 1..n {
        let w = conv_weights(k, dt);
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..k {
            acc += gs[k - j] * m[j] * w[j];
        }
        m[k] = (gs[k] - acc) / (1.0 + w[k] * gs[0]);
    }
    EigenSignal::from_samples(g.grid(), m)
}

/// Splits the kernel eigenvalue as m^NZ(t) = m^Red(0)·δ(t) + d/dt m^Red(t).
pub fn redfield_to_nz(m_red: &EigenSignal) -> Result<EigenSignal> {
    m_red.require_no_delta("redfield_to_nz")?;
    let regular = derivative(m_red.samples(), m_red.grid().dt());
    EigenSignal::with_delta(m_red.grid(), regular, m_red.sample(0))
}

/// Full TCL → NZ pipeline; implements m̃^NZ = uG̃/(1+G̃) in the time domain.
pub fn tcl_to_nz(m_tcl: &EigenSignal) -> Result<EigenSignal> {
    redfield_to_nz(&g_to_redfield(&tcl_to_g(m_tcl)?)?)
}

/// NZ → TCL: solves Ġ = r + cG + r∗G with G(0) = c (the time-domain form of
/// G̃ = m̃^NZ/(u − m̃^NZ) for m^NZ = c·δ + r), then m^TCL = G/(1 + ∫₀ᵗ G).
pub fn nz_to_tcl(m_nz: &EigenSignal) -> Result<EigenSignal> {
    nz_to_tcl_with_floor(m_nz, tol::SINGULAR_FLOOR)
}

pub fn nz_to_tcl_with_floor(m_nz: &EigenSignal, floor: f64) -> Result<EigenSignal> {
    let grid = m_nz.grid();
    let dt = grid.dt();
    let c0 = m_nz.delta_weight();
    let r = m_nz.samples();
    let n = r.len();

    // Trapezoidal step for the integro-differential equation; the implicit
    // endpoint is solved for exactly since everything is linear.
    let mut g = vec![C64::new(0.0, 0.0); n];
    let mut gdot = vec![C64::new(0.0, 0.0); n];
    g[0] = c0;
    gdot[0] = r[0] + c0 * g[0];
    for k in 1..n {
        let w = conv_weights(k, dt);
        let mut conv_known = C64::new(0.0, 0.0);
        for j in 0..k {
            conv_known += r[k - j] * g[j] * w[j];
        }
        let a = c0 + r[0] * w[k];
        let rhs = g[k - 1] + (gdot[k - 1] + r[k] + conv_known) * (0.5 * dt);
        g[k] = rhs / (1.0 - a * 0.5 * dt);
        gdot[k] = r[k] + a * g[k] + conv_known;
    }

    let m = {
        let mut acc = cumtrapz(&g, dt);
        for z in acc.iter_mut() {
            *z += 1.0;
        }
        acc
    };
    check_map_invertible(&m, grid, floor)?;
    let samples = g.iter().zip(m.iter()).map(|(gv, mv)| gv / mv).collect();
    EigenSignal::from_samples(grid, samples)
}

/// Partial Neumann sum Σ_{j=1}^{j_max} (−1)^{j+1} G^{∗j}(t).
///
/// Converges to the Redfield eigenvalue only where |G̃(u)| < 1; used to
/// validate the series against the direct Volterra solve, and to demonstrate
/// its divergence where the bound fails.
pub fn neumann_series_partial(g: &EigenSignal, j_max: usize) -> Result<EigenSignal> {
    g.require_no_delta("neumann_series_partial")?;
    if j_max == 0 {
        return Err(Error::InvalidInput("j_max must be at least 1".into()));
    }
    let dt = g.grid().dt();
    let gs = g.samples().to_vec();
    let mut power = gs.clone();
    let mut sum = gs.clone();
    let mut sign = -1.0;
    for _ in 2..=j_max {
        power = convolve(&gs, &power, dt);
        for (s, p) in sum.iter_mut().zip(power.iter()) {
            *s += p * sign;
        }
        sign = -sign;
    }
    // Partial sums can overflow for strongly divergent series; saturate so
    // the divergence stays observable without violating sample finiteness.
    let sum = sum
        .into_iter()
        .map(|z| {
            if z.re.is_finite() && z.im.is_finite() {
                z
            } else {
                C64::new(f64::MAX, 0.0)
            }
        })
        .collect();
    EigenSignal::from_samples(g.grid(), sum)
}

// ---------------------------------------------------------------------------
// Laplace-domain cross-check path

/// A Laplace-domain function u ↦ f̃(u), defined right of its abscissa.
pub struct LaplaceFn {
    evaluator: Box<dyn Fn(C64) -> C64 + Send + Sync>,
}

impl LaplaceFn {
    pub fn new(evaluator: impl Fn(C64) -> C64 + Send + Sync + 'static) -> Self {
        Self { evaluator: Box::new(evaluator) }
    }

    pub fn eval(&self, u: C64) -> C64 {
        (self.evaluator)(u)
    }
}

/// Fixed-Talbot inverse Laplace transform on the grid.
///
/// Each t > 0 uses a Talbot contour with `contour_nodes` terms; the t = 0
/// sample is filled from the initial-value theorem, u·f̃(u) evaluated at a
/// large real u (an approximation with O(1/u) relative error).
pub fn talbot_inverse_laplace(
    f: &LaplaceFn,
    grid: TimeGrid,
    contour_nodes: usize,
) -> Result<EigenSignal> {
    if contour_nodes < 4 {
        return Err(Error::InvalidInput("need at least 4 contour nodes".into()));
    }
    let mut samples = Vec::with_capacity(grid.len());
    let u0 = C64::new(tol::IVT_POINT, 0.0);
    samples.push(u0 * f.eval(u0));
    for k in 1..grid.len() {
        samples.push(talbot_point(f, grid.time(k), contour_nodes)?);
    }
    EigenSignal::from_samples(grid, samples)
}

fn talbot_point(f: &LaplaceFn, t: f64, m: usize) -> Result<C64> {
    // Abate–Valkó fixed Talbot: r = 2M/(5t), s(θ) = rθ(cot θ + i).
    let r = 2.0 * m as f64 / (5.0 * t);
    let mut total = f.eval(C64::new(r, 0.0)) * (r * t).exp() * 0.5;
    for k in 1..m {
        let theta = k as f64 * std::f64::consts::PI / m as f64;
        let cot = 1.0 / theta.tan();
        let s = C64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let term = (s * t).exp() * f.eval(s) * C64::new(1.0, sigma);
        // The real-part projection assumes conjugate symmetry f̃(s*) = f̃(s)*,
        // which holds for the real-valued signals this path cross-checks.
        total += C64::new(term.re, 0.0);
    }
    let out = total * (r / m as f64);
    if !out.re.is_finite() || !out.im.is_finite() {
        return Err(Error::ContourFailure { t });
    }
    Ok(out)
}

/// Finite-horizon numerical Laplace transform of a sampled signal,
/// G̃(u) ≈ ∫₀^{t_end} e^{−ut} G(t) dt. Truncation makes this a diagnostic
/// estimate only, used to probe the |G̃(u)| < 1 convergence condition.
pub fn laplace_numeric(signal: &EigenSignal, u: f64) -> C64 {
    let dt = signal.grid().dt();
    let weighted: Vec<C64> = signal
        .samples()
        .iter()
        .enumerate()
        .map(|(k, &g)| g * (-u * signal.grid().time(k)).exp())
        .collect();
    *cumtrapz(&weighted, dt).last().unwrap() + signal.delta_weight()
}

/// Max of |G̃(u)| over a real-axis probe grid u ∈ [0.1, 100].
pub fn condpr_probe(g: &EigenSignal) -> f64 {
    let mut worst: f64 = 0.0;
    let mut u = 0.1;
    while u <= 100.0 {
        worst = worst.max(laplace_numeric(g, u).norm());
        u *= 1.5;
    }
    worst
}

// ---------------------------------------------------------------------------
// CSV wire format

/// Writes `t,re,im` rows with the delta weight in a leading comment line.
pub fn signal_to_csv(signal: &EigenSignal) -> String {
    let mut out = String::new();
    let d = signal.delta_weight();
    out.push_str(&format!("# delta_weight={:.16e},{:.16e}\n", d.re, d.im));
    out.push_str("t,re,im\n");
    for (k, z) in signal.samples().iter().enumerate() {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}\n",
            signal.grid().time(k),
            z.re,
            z.im
        ));
    }
    out
}

pub fn signal_from_csv(text: &str) -> Result<EigenSignal> {
    let mut delta = C64::new(0.0, 0.0);
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line == "t,re,im" {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# delta_weight=") {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::InvalidInput("malformed delta_weight line".into()));
            }
            delta = C64::new(
                parts[0].parse().map_err(|_| Error::InvalidInput("bad delta re".into()))?,
                parts[1].parse().map_err(|_| Error::InvalidInput("bad delta im".into()))?,
            );
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidInput(format!("malformed CSV row: {line}")));
        }
        times.push(parts[0].parse::<f64>().map_err(|_| Error::InvalidInput("bad t".into()))?);
        samples.push(C64::new(
            parts[1].parse().map_err(|_| Error::InvalidInput("bad re".into()))?,
            parts[2].parse().map_err(|_| Error::InvalidInput("bad im".into()))?,
        ));
    }
    if times.len() < 2 {
        return Err(Error::InvalidInput("signal CSV needs at least two samples".into()));
    }
    let grid = TimeGrid::new(*times.last().unwrap(), times.len() - 1)?;
    EigenSignal::with_delta(grid, samples, delta)
}
