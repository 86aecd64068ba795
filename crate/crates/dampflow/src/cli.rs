//! Configuration and command implementations behind the `dampflow` binary.
//!
//! One flat JSON config document; command-line flags override file fields.
//! All emitted CSV/JSON is deterministic: identical config and seed give
//! byte-identical files. Floats print with 17 significant digits.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error, 3 numerical
//! error.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::divisibility::{self, SimplexPoint};
use crate::dynamics::{self, GeneratorKind, GeneratorSpec, MapTrajectory};
use crate::lindblad;
use crate::models::{
    self, DephasingProfile, KernelProfile, ModelConfig, ModelId, RateProfile,
};
use crate::qops::OperatorBasis;
use crate::scalarflow::{self, EigenSignal, TimeGrid};
use crate::{tol, Error, Result};

pub const OUTPUT_DIR_ENV: &str = "DAMPFLOW_OUTPUT_DIR";

/// The flat run configuration. Every field has a default so partial config
/// files merge naturally.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,
    /// Simplex point for the random-direction dephasing.
    pub x: Option<[f64; 3]>,
    /// "one-minus-exp" or "const:<value>".
    pub gamma_profile: String,
    /// "exp", "exp:<amplitude>" or "const:<value>".
    pub k_profile: String,
    /// "exp" or "exp-cos".
    pub phi_profile: String,
    /// Source description for `convert`: tcl | nz | red.
    pub from: String,
    /// Target description for `convert`: tcl | nz | red | map.
    pub to: String,
    /// Description to propagate/analyze: tcl | nz | red.
    pub kind: String,
    pub t_end: f64,
    pub n_steps: usize,
    pub output_dir: Option<PathBuf>,
    /// Simplex subdivisions per edge for `scan`.
    pub resolution: usize,
    /// Checkpoint times for `scan`.
    pub times: Vec<f64>,
    /// Times at which to dump full matrices / operator snapshots.
    pub snapshots: Vec<f64>,
    pub seed: u64,
    /// Rate-sign tolerance for divisibility verdicts.
    pub rate_tol: f64,
    pub singular_floor: f64,
    /// When set, replaces every tolerance in `validate` (error-path testing).
    pub tol_override: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: "ex4".into(),
            x: None,
            gamma_profile: "one-minus-exp".into(),
            k_profile: "exp".into(),
            phi_profile: "default".into(),
            from: "tcl".into(),
            to: "nz".into(),
            kind: "tcl".into(),
            t_end: 5.0,
            n_steps: 2000,
            output_dir: None,
            resolution: 60,
            times: vec![0.0, 3.0, 20.0],
            snapshots: Vec::new(),
            seed: 42,
            rate_tol: tol::DIVISIBILITY_RATE,
            singular_floor: tol::SINGULAR_FLOOR,
            tol_override: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_end, self.n_steps)
    }

    pub fn resolved_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let id: ModelId = self.model.parse()?;
        let grid = self.grid()?;
        let mut mc = ModelConfig::new(id, grid);
        mc.gamma = parse_gamma(&self.gamma_profile)?;
        mc.kernel = parse_kernel(&self.k_profile)?;
        if self.phi_profile != "default" {
            mc.phi = parse_phi(&self.phi_profile)?;
        }
        if let Some([a, b, c]) = self.x {
            mc = mc.with_x(SimplexPoint::new(a, b, c)?);
        } else if id == ModelId::RandomDephasing {
            return Err(Error::PreconditionViolated(
                "random-dephasing needs --x x1,x2,x3 on the simplex".into(),
            ));
        }
        Ok(mc)
    }
}

fn parse_gamma(s: &str) -> Result<RateProfile> {
    if s == "one-minus-exp" {
        return Ok(RateProfile::OneMinusExp);
    }
    if let Some(v) = s.strip_prefix("const:") {
        let v: f64 =
            v.parse().map_err(|_| Error::InvalidInput(format!("bad gamma profile: {s}")))?;
        return Ok(RateProfile::Constant(v));
    }
    Err(Error::InvalidInput(format!(
        "unknown gamma profile '{s}' (expected one-minus-exp or const:<v>)"
    )))
}

fn parse_kernel(s: &str) -> Result<KernelProfile> {
    if s == "exp" {
        return Ok(KernelProfile::Exp { amplitude: 1.0 });
    }
    if let Some(v) = s.strip_prefix("exp:") {
        let v: f64 = v.parse().map_err(|_| Error::InvalidInput(format!("bad k profile: {s}")))?;
        return Ok(KernelProfile::Exp { amplitude: v });
    }
    if let Some(v) = s.strip_prefix("const:") {
        let v: f64 = v.parse().map_err(|_| Error::InvalidInput(format!("bad k profile: {s}")))?;
        return Ok(KernelProfile::Constant(v));
    }
    Err(Error::InvalidInput(format!(
        "unknown k profile '{s}' (expected exp, exp:<amp> or const:<v>)"
    )))
}

fn parse_phi(s: &str) -> Result<DephasingProfile> {
    match s {
        "exp" => Ok(DephasingProfile::Exp),
        "exp-cos" => Ok(DephasingProfile::ExpCos),
        _ => Err(Error::InvalidInput(format!(
            "unknown phi profile '{s}' (expected exp or exp-cos)"
        ))),
    }
}

pub fn parse_kind(s: &str) -> Result<GeneratorKind> {
    match s {
        "tcl" => Ok(GeneratorKind::Tcl),
        "nz" => Ok(GeneratorKind::Nz),
        "red" => Ok(GeneratorKind::Redfield),
        _ => Err(Error::InvalidInput(format!("unknown kind '{s}' (expected tcl, nz or red)"))),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

// ---------------------------------------------------------------------------
// convert

pub fn cmd_convert(config: &RunConfig) -> Result<()> {
    let from = parse_kind(&config.from)?;
    let built = models::build(&config.model_config()?)?;
    let source = built.generator.convert(from)?;
    let dir = config.resolved_output_dir();
    let mut paths = Vec::new();

    for (alpha, sig) in source.signals().iter().enumerate() {
        let name = format!("{}_channel{}.csv", config.from, alpha);
        paths.push(write_file(&dir, &name, &scalarflow::signal_to_csv(sig))?);
    }

    let (target_signals, to_label) = convert_signals(&source, &config.to)?;
    for (alpha, sig) in target_signals.iter().enumerate() {
        let name = format!("{}_channel{}.csv", to_label, alpha);
        paths.push(write_file(&dir, &name, &scalarflow::signal_to_csv(sig))?);
    }

    // convergence report: redo the conversion at half the step and compare on
    // the coarse samples
    let fine_cfg = {
        let mut c = config.clone();
        c.n_steps *= 2;
        c
    };
    let fine_built = models::build(&fine_cfg.model_config()?)?;
    let fine_source = fine_built.generator.convert(from)?;
    let (fine_signals, _) = convert_signals(&fine_source, &config.to)?;
    let mut per_channel = Vec::new();
    for (coarse, fine) in target_signals.iter().zip(fine_signals.iter()) {
        let mut worst: f64 = 0.0;
        for k in 0..coarse.grid().len() {
            worst = worst.max((coarse.sample(k) - fine.sample(2 * k)).norm());
        }
        worst = worst.max((coarse.delta_weight() - fine.delta_weight()).norm());
        per_channel.push(worst);
    }
    let report = json!({
        "model": config.model,
        "from": config.from,
        "to": to_label,
        "n_steps": config.n_steps,
        "n_steps_fine": fine_cfg.n_steps,
        "max_abs_diff_per_channel": per_channel,
        "max_abs_diff": per_channel.iter().cloned().fold(0.0, f64::max),
    });
    paths.push(write_file(&dir, "convergence_report.json", &pretty(&report))?);
    written(&paths);
    Ok(())
}

fn convert_signals(source: &GeneratorSpec, to: &str) -> Result<(Vec<EigenSignal>, String)> {
    if to == "map" {
        return Ok((source.map_eigenvalue_signals()?, "map".into()));
    }
    let kind = parse_kind(to)?;
    let converted = source.convert(kind)?;
    Ok((converted.signals().to_vec(), to.to_string()))
}

// ---------------------------------------------------------------------------
// propagate

pub fn cmd_propagate(config: &RunConfig) -> Result<()> {
    let kind = parse_kind(&config.kind)?;
    let built = models::build(&config.model_config()?)?;
    let gen = built.generator.convert(kind)?;
    let traj = match kind {
        GeneratorKind::Tcl => dynamics::propagate_tcl(&gen)?,
        GeneratorKind::Nz => dynamics::propagate_nz(&gen)?,
        GeneratorKind::Redfield => dynamics::propagate_redfield(&gen)?,
    };
    let dir = config.resolved_output_dir();
    let mut paths = Vec::new();
    paths.push(write_file(&dir, "trajectory.csv", &trajectory_csv(&traj, &gen))?);

    for &t in &config.snapshots {
        let k = nearest_sample(traj.grid(), t)?;
        let name = format!("map_t{}.json", fmt_time(traj.grid().time(k)));
        let map = traj.map_at(k);
        paths.push(write_file(&dir, &name, &pretty(&map.to_json()))?);
    }
    written(&paths);
    Ok(())
}

fn trajectory_csv(traj: &MapTrajectory, gen: &GeneratorSpec) -> String {
    let n2 = gen.channels();
    let mut header = String::from("t");
    for alpha in 0..n2 {
        header.push_str(&format!(",lambda{alpha}_re,lambda{alpha}_im"));
    }
    header.push('\n');
    let tracks: Vec<Vec<C64>> = (0..n2).map(|a| traj.eigenvalue_track(gen, a)).collect();
    let mut out = header;
    for k in 0..traj.len() {
        out.push_str(&format!("{:.16e}", traj.grid().time(k)));
        for track in tracks.iter() {
            out.push_str(&format!(",{:.16e},{:.16e}", track[k].re, track[k].im));
        }
        out.push('\n');
    }
    out
}

fn nearest_sample(grid: TimeGrid, t: f64) -> Result<usize> {
    if t < 0.0 || t > grid.t_end() + 1e-12 {
        return Err(Error::InvalidInput(format!(
            "snapshot time {t} outside [0, {}]",
            grid.t_end()
        )));
    }
    Ok(((t / grid.dt()).round() as usize).min(grid.n_steps()))
}

fn fmt_time(t: f64) -> String {
    format!("{t:.6}").replace('.', "p")
}

// ---------------------------------------------------------------------------
// lindblad

pub fn cmd_lindblad(config: &RunConfig) -> Result<()> {
    let kind = parse_kind(&config.kind)?;
    let built = models::build(&config.model_config()?)?;
    let gen = built.generator.convert(kind)?;
    let grid = gen.grid();
    let n_rates = gen.basis().size() - 1;

    let mut csv = String::from("t");
    for i in 1..=n_rates {
        csv.push_str(&format!(",r{i}"));
    }
    csv.push('\n');
    for k in 0..grid.len() {
        let rates = lindblad::canonical_rates(&gen.superop_at(k))?;
        csv.push_str(&format!("{:.16e}", grid.time(k)));
        for r in &rates {
            csv.push_str(&format!(",{r:.16e}"));
        }
        csv.push('\n');
    }
    let dir = config.resolved_output_dir();
    let mut paths = vec![write_file(&dir, "rates.csv", &csv)?];

    for &t in &config.snapshots {
        let k = nearest_sample(grid, t)?;
        let canon = lindblad::canonical_form(&lindblad::gks_matrix(&gen.superop_at(k))?)?;
        let ops: Vec<serde_json::Value> =
            canon.lindblad_ops.iter().map(|o| o.to_json()).collect();
        let snap = json!({
            "t": grid.time(k),
            "rates": canon.rates,
            "hamiltonian": canon.hamiltonian.to_json(),
            "lindblad_ops": ops,
        });
        let name = format!("lindblad_t{}.json", fmt_time(grid.time(k)));
        paths.push(write_file(&dir, &name, &pretty(&snap))?);
    }
    written(&paths);
    Ok(())
}

// ---------------------------------------------------------------------------
// divisibility

pub fn cmd_divisibility(config: &RunConfig) -> Result<()> {
    let kind = parse_kind(&config.kind)?;
    if kind == GeneratorKind::Nz {
        return Err(Error::PreconditionViolated(
            "divisibility analysis needs a time-local description (tcl or red)".into(),
        ));
    }
    let built = models::build(&config.model_config()?)?;
    let gen = built.generator.convert(kind)?;
    let mut report = divisibility::cp_divisibility(&gen, config.rate_tol)?;
    report.model = config.model.clone();

    // Pauli-diagonal qubit models also admit the pairwise-sum P criterion
    let p_until = pauli_rate_signals(&gen).map(|rates| {
        divisibility::pauli_p_divisibility(&rates, config.rate_tol)
            .p_divisible_until
            .unwrap()
    });

    let grid = gen.grid();
    let mut csv = String::from("t");
    for i in 1..report.rates[0].len() + 1 {
        csv.push_str(&format!(",r{i}"));
    }
    csv.push('\n');
    for (k, rates) in report.rates.iter().enumerate() {
        csv.push_str(&format!("{:.16e}", grid.time(k)));
        for r in rates {
            csv.push_str(&format!(",{r:.16e}"));
        }
        csv.push('\n');
    }

    let summary = json!({
        "model": config.model,
        "kind": config.kind,
        "t_end": grid.t_end(),
        "n_steps": grid.n_steps(),
        "rate_tol": config.rate_tol,
        "cp_divisible_until": report.cp_divisible_until,
        "p_divisible_until": p_until,
    });
    let dir = config.resolved_output_dir();
    let paths = vec![
        write_file(&dir, "divisibility_rates.csv", &csv)?,
        write_file(&dir, "divisibility.json", &pretty(&summary))?,
    ];
    written(&paths);
    Ok(())
}

/// For qubit generators diagonal in the Pauli basis, the three Pauli rates
/// γ_k = (m_k − m_i − m_j)/2 recovered from the channel signals.
fn pauli_rate_signals(gen: &GeneratorSpec) -> Option<[EigenSignal; 3]> {
    if gen.basis().dim() != 2 {
        return None;
    }
    let pauli = OperatorBasis::pauli();
    for (tau, sigma) in gen.tau().iter().zip(pauli.elements().iter()) {
        if tau.sub(sigma).max_abs() > 1e-12 {
            return None;
        }
    }
    let grid = gen.grid();
    let m: Vec<&EigenSignal> = gen.signals().iter().collect();
    Some(std::array::from_fn(|k| {
        let i = (k + 1) % 3;
        let j = (k + 2) % 3;
        let samples = (0..grid.len())
            .map(|s| (m[k].sample(s) - m[i].sample(s) - m[j].sample(s)) * 0.5)
            .collect();
        EigenSignal::from_samples(grid, samples).expect("rate samples are finite")
    }))
}

// ---------------------------------------------------------------------------
// scan

pub fn cmd_scan(config: &RunConfig) -> Result<()> {
    let t_max = config.times.iter().cloned().fold(0.0, f64::max).max(1.0);
    let time_grid = TimeGrid::new(t_max, config.n_steps)?;
    let ds =
        divisibility::figure2_scan(config.resolution, &config.times, time_grid, config.rate_tol)?;
    let dir = config.resolved_output_dir();
    let mut paths = vec![write_file(&dir, "region.csv", &ds.to_csv())?];

    let res = config.resolution;
    let mut time_summaries = Vec::new();
    for &t in &ds.times {
        let mut exact_cp = 0usize;
        let mut red_cp = 0usize;
        let mut red_cp_on_tripod = 0usize;
        let mut red_cp_off_tripod = 0usize;
        for r in ds.rows_at(t) {
            let idx = (
                (r.x1 * res as f64).round() as usize,
                (r.x2 * res as f64).round() as usize,
                (r.x3 * res as f64).round() as usize,
            );
            exact_cp += r.exact_cp as usize;
            red_cp += r.red_cp as usize;
            if r.red_cp {
                if divisibility::on_tripod(idx) {
                    red_cp_on_tripod += 1;
                } else {
                    red_cp_off_tripod += 1;
                }
            }
        }
        time_summaries.push(json!({
            "t": t,
            "exact_cp_count": exact_cp,
            "red_cp_count": red_cp,
            "red_cp_on_tripod": red_cp_on_tripod,
            "red_cp_off_tripod": red_cp_off_tripod,
        }));
    }
    let tripod_size =
        divisibility::barycentric_grid(res).into_iter().filter(|&p| divisibility::on_tripod(p)).count();
    let summary = json!({
        "resolution": res,
        "grid_points": divisibility::barycentric_grid(res).len(),
        "tripod_size": tripod_size,
        "rate_tol": config.rate_tol,
        "times": time_summaries,
    });
    paths.push(write_file(&dir, "scan_summary.json", &pretty(&summary))?);
    written(&paths);
    Ok(())
}

// ---------------------------------------------------------------------------
// validate

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Residual shrinks at least quadratically when dt is halved.
    pub dt2_scaling: bool,
}

fn check(name: &str, residual: f64, tolerance: f64, dt2: bool, over: Option<f64>) -> CheckResult {
    let tolerance = over.unwrap_or(tolerance);
    CheckResult {
        name: name.to_string(),
        residual,
        tolerance,
        pass: residual <= tolerance,
        dt2_scaling: dt2,
    }
}

/// Runs the cross-module invariant suite on the model zoo and writes a JSON
/// report with per-check residuals. Returns true iff every check passed.
pub fn cmd_validate(config: &RunConfig) -> Result<bool> {
    let grid = config.grid()?;
    let dt = grid.dt();
    let over = config.tol_override;
    let mut checks: Vec<CheckResult> = Vec::new();

    // operator-basis orthonormality
    for (name, basis) in
        [("pauli_orthonormality", OperatorBasis::pauli()), ("gell_mann_orthonormality", OperatorBasis::gell_mann())]
    {
        let mut worst: f64 = 0.0;
        for a in 0..basis.size() {
            for b in 0..basis.size() {
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst
                    .max((basis.element(a).hs_inner(basis.element(b)) - C64::new(want, 0.0)).norm());
            }
        }
        checks.push(check(name, worst, tol::BASIS_ORTHONORMALITY, false, over));
    }

    let zoo = models::zoo_configs(grid);
    for cfg in &zoo {
        let built = models::build(cfg)?;
        let gen = &built.generator;
        let mid = grid.len() / 2;
        let s = gen.superop_at(mid);

        // damping reconstruction and dual eigen-relation
        let dec = crate::qops::damping_decompose(&s)?;
        let rec = dec.reconstruct(gen.basis());
        let scale = s.frobenius_norm().max(1e-300);
        checks.push(check(
            &format!("damping_reconstruction_{}", cfg.id),
            rec.sub(&s).frobenius_norm() / scale,
            tol::DAMPING_RECONSTRUCTION,
            false,
            over,
        ));
        let dual = s.dual();
        let mut worst: f64 = 0.0;
        for alpha in 0..dec.size() {
            let out = dual.apply(&dec.sigma_dual[alpha])?;
            worst = worst
                .max(out.sub(&dec.sigma_dual[alpha].scale(dec.eigenvalues[alpha].conj())).max_abs());
        }
        checks.push(check(
            &format!("dual_eigen_relation_{}", cfg.id),
            worst,
            1e-9,
            false,
            over,
        ));

        // generator conditions
        let mut worst: f64 = 0.0;
        for sigma in gen.basis().elements() {
            let out = s.apply(sigma)?;
            worst = worst.max(out.trace().norm());
            worst = worst.max(s.apply(&sigma.adjoint())?.sub(&out.adjoint()).max_abs());
        }
        checks.push(check(
            &format!("generator_conditions_{}", cfg.id),
            worst,
            tol::GENERATOR_CONDITIONS,
            false,
            over,
        ));

        // commutativity of the family
        let s2 = gen.superop_at(grid.len() / 5);
        let comm = s.matrix().dot(s2.matrix()) - s2.matrix().dot(s.matrix());
        checks.push(check(
            &format!("commutativity_{}", cfg.id),
            comm.iter().map(|z| z.norm()).fold(0.0, f64::max),
            1e-8,
            false,
            over,
        ));

        // Lindblad round trip on the regular part
        let gks = lindblad::gks_matrix(&s)?;
        let rec = lindblad::reconstruct(&lindblad::canonical_form(&gks)?, gen.basis())?;
        checks.push(check(
            &format!("lindblad_round_trip_{}", cfg.id),
            rec.sub(&s).frobenius_norm() / scale,
            1e-9,
            false,
            over,
        ));
    }

    // scalar transform round trips on a smooth reference signal
    let f = |t: f64| -1.0 + 0.5 * (1.3 * t).sin() * (-0.4 * t).exp() + 0.2 * (2.1 * t).cos();
    let sig = EigenSignal::from_real_fn(grid, f);
    let back = scalarflow::map_to_tcl(&scalarflow::tcl_to_map(&sig)?)?;
    checks.push(check("map_tcl_round_trip", back.max_abs_diff(&sig), 100.0 * dt * dt, true, over));
    let back = scalarflow::nz_to_tcl(&scalarflow::tcl_to_nz(&sig)?)?;
    checks.push(check("nz_tcl_round_trip", back.max_abs_diff(&sig), 100.0 * dt * dt, true, over));

    // origin consistency m^TCL(0) = G(0) = m^Red(0) = delta weight
    let g = scalarflow::tcl_to_g(&sig)?;
    let m_red = scalarflow::g_to_redfield(&g)?;
    let nz = scalarflow::redfield_to_nz(&m_red)?;
    let v0 = sig.sample(0);
    let resid = (g.sample(0) - v0)
        .norm()
        .max((m_red.sample(0) - v0).norm())
        .max((nz.delta_weight() - v0).norm());
    checks.push(check("origin_consistency", resid, 1e-12, false, over));

    // kernel-integral linearity: m^Red = delta + cumulative trapezoid of the
    // regular kernel
    let integral = scalarflow::cumtrapz(nz.samples(), dt);
    let mut worst: f64 = 0.0;
    for k in 0..grid.len() {
        worst = worst.max((nz.delta_weight() + integral[k] - m_red.sample(k)).norm());
    }
    checks.push(check("kernel_integral_linearity", worst, 100.0 * dt * dt, true, over));

    // semigroup limit: constant TCL gives a pure delta kernel
    let semi = scalarflow::tcl_to_nz(&EigenSignal::constant(grid, C64::new(-1.0, 0.0)))?;
    checks.push(check("semigroup_delta_kernel", semi.max_abs(), 100.0 * dt * dt, true, over));

    // Talbot inversion of the exponential family
    let mut worst: f64 = 0.0;
    let talbot_grid = TimeGrid::new(5.0, 50)?;
    for a in [-3.0, -1.5, 0.0] {
        let lf = scalarflow::LaplaceFn::new(move |u| 1.0 / (u - a));
        let inv = scalarflow::talbot_inverse_laplace(&lf, talbot_grid, 32)?;
        for k in 1..talbot_grid.len() {
            let t = talbot_grid.time(k);
            if t >= 0.1 {
                worst = worst.max((inv.sample(k) - C64::new((a * t).exp(), 0.0)).norm());
            }
        }
    }
    checks.push(check("talbot_exponential_pair", worst, 1e-8, false, over));

    // propagation equivalence and trace preservation on the amplitude-damping
    // model
    let ad = models::build(&zoo[0])?;
    let traj_tcl = dynamics::propagate_tcl(&ad.generator)?;
    let gen_nz = ad.generator.convert(GeneratorKind::Nz)?;
    let traj_nz = dynamics::propagate_nz(&gen_nz)?;
    checks.push(check(
        "tcl_nz_propagation_amplitude_damping",
        traj_tcl.max_abs_diff(&traj_nz),
        5.0 * dt * dt,
        true,
        over,
    ));
    checks.push(check(
        "trace_preservation_amplitude_damping",
        traj_tcl.trace_preservation_residual(),
        tol::TRACE_PRESERVATION,
        false,
        over,
    ));

    // RK4 vs closed-form commutative path
    let closed = dynamics::closed_form_map(&ad.generator)?;
    checks.push(check(
        "rk4_vs_closed_form_amplitude_damping",
        traj_tcl.max_abs_diff(&closed),
        100.0 * dt * dt * dt,
        true,
        over,
    ));

    // exact-rate closed forms of the random-direction dephasing
    let eternal = SimplexPoint::new(0.5, 0.5, 0.0)?;
    let rates = models::ex4_exact_rates(&eternal, grid);
    let mut worst: f64 = 0.0;
    for k in 0..grid.len() {
        let t = grid.time(k);
        worst = worst.max((rates[0].sample(k).re - 1.0).abs());
        worst = worst.max((rates[1].sample(k).re - 1.0).abs());
        worst = worst.max((rates[2].sample(k).re + t.tanh()).abs());
    }
    checks.push(check("eternal_rates_closed_form", worst, 1e-12, false, over));

    // seeded random suites: P-divisible Pauli generators keep nonpositive
    // Redfield eigenvalues; single-eigenvalue CP-divisible generators keep
    // m^Red/ℓ nonnegative
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut worst_pauli: f64 = 0.0;
    for _ in 0..20 {
        let m_tcl = random_nonpositive_signal(&mut rng, grid);
        let m_red = scalarflow::g_to_redfield(&scalarflow::tcl_to_g(&m_tcl)?)?;
        worst_pauli =
            worst_pauli.max(m_red.samples().iter().map(|z| z.re).fold(f64::MIN, f64::max));
    }
    checks.push(check("pauli_preservation_random_suite", worst_pauli.max(0.0), 1e-8, false, over));

    let mut worst_single: f64 = 0.0;
    for _ in 0..10 {
        let m_tcl = random_nonpositive_signal(&mut rng, grid);
        let m_red = scalarflow::g_to_redfield(&scalarflow::tcl_to_g(&m_tcl)?)?;
        worst_single =
            worst_single.max(m_red.samples().iter().map(|z| z.re).fold(f64::MIN, f64::max));
    }
    checks.push(check("single_eigenvalue_preservation_random_suite", worst_single.max(0.0), 1e-8, false, over));

    let all_pass = checks.iter().all(|c| c.pass);
    let report = json!({
        "all_pass": all_pass,
        "seed": config.seed,
        "t_end": grid.t_end(),
        "n_steps": grid.n_steps(),
        "tol_override": config.tol_override,
        "failing": checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect::<Vec<_>>(),
        "checks": checks,
    });
    let dir = config.resolved_output_dir();
    let path = write_file(&dir, "validate_report.json", &pretty(&report))?;
    written(&[path]);
    Ok(all_pass)
}

/// Random smooth nonpositive signal: m(t) = −a − b(1 + sin(ωt + φ))e^{−νt}.
fn random_nonpositive_signal<R: Rng>(rng: &mut R, grid: TimeGrid) -> EigenSignal {
    let a = rng.gen_range(0.05..1.5);
    let b = rng.gen_range(0.0..1.0);
    let omega = rng.gen_range(0.3..3.0);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let nu = rng.gen_range(0.0..1.0);
    EigenSignal::from_real_fn(grid, move |t| {
        -a - b * (1.0 + (omega * t + phase).sin()) * (-nu * t).exp()
    })
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serialization cannot fail");
    s.push('\n');
    s
}

/// Maps an error to the process exit code: 2 for usage problems, 3 for
/// numerical failures.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::UnknownModel(_) | Error::InvalidInput(_) => 2,
        Error::Io(_) | Error::Json(_) => 2,
        _ => 3,
    }
}

pub fn error_json(err: &Error) -> String {
    let kind = match err {
        Error::DimensionMismatch(_) => "dimension_mismatch",
        Error::NotDiagonalizable { .. } => "not_diagonalizable",
        Error::SingularMap { .. } => "singular_map",
        Error::ContourFailure { .. } => "contour_failure",
        Error::PreconditionViolated(_) => "precondition_violated",
        Error::UnknownModel(_) => "unknown_model",
        Error::InvalidInput(_) => "invalid_input",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    };
    pretty(&json!({ "error": { "kind": kind, "message": err.to_string() } }))
}
