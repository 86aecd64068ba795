use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dampflow::cli::{self, RunConfig};

/// Damping-basis toolkit for commutative open-quantum-system dynamics:
/// interconvert time-local, memory-kernel and Redfield-like descriptions,
/// extract canonical Lindblad forms, propagate maps, analyze divisibility.
#[derive(Parser)]
#[command(name = "dampflow", version, about)]
struct Cli {
    /// Flat JSON config file; command-line flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print the effective configuration as JSON and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Model: ex1|amplitude-damping, ex2|sigma-pm-kernel, ex3|pure-dephasing,
    /// ex3bar|dephasing-bar, ex4|random-dephasing, qutrit|qutrit-ladder.
    #[arg(long, global = true)]
    model: Option<String>,

    /// Simplex point x1,x2,x3 for the random-direction dephasing.
    #[arg(long, global = true, value_delimiter = ',')]
    x: Option<Vec<f64>>,

    /// Amplitude-damping rate profile: one-minus-exp | const:<v>.
    #[arg(long, global = true)]
    gamma_profile: Option<String>,

    /// Kernel profile: exp | exp:<amp> | const:<v>.
    #[arg(long, global = true)]
    k_profile: Option<String>,

    /// Decoherence profile: exp | exp-cos.
    #[arg(long, global = true)]
    phi_profile: Option<String>,

    #[arg(long, global = true)]
    t_end: Option<f64>,

    #[arg(long, global = true)]
    n_steps: Option<usize>,

    /// Output directory (defaults to $DAMPFLOW_OUTPUT_DIR, then ".").
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Rate-sign tolerance for divisibility verdicts.
    #[arg(long, global = true)]
    rate_tol: Option<f64>,

    /// Replace every validation tolerance (error-path testing).
    #[arg(long, global = true)]
    tol_override: Option<f64>,

    /// Times at which to dump full matrices / operator snapshots.
    #[arg(long, global = true, value_delimiter = ',')]
    snapshots: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Convert between descriptions of a model's dynamics (per-channel CSVs
    /// plus a dt-halving convergence report).
    Convert {
        /// Source description: tcl | nz | red.
        #[arg(long)]
        from: Option<String>,
        /// Target description: tcl | nz | red | map.
        #[arg(long)]
        to: Option<String>,
    },
    /// Propagate the dynamical map and export the eigenvalue trajectory.
    Propagate {
        /// Description to propagate: tcl | nz | red.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Canonical Lindblad rates per time slice (CSV), operator snapshots on
    /// request.
    Lindblad {
        #[arg(long)]
        kind: Option<String>,
    },
    /// CP/P-divisibility report for a time-local description.
    Divisibility {
        /// tcl | red.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Simplex region scan of the random-direction dephasing.
    Scan {
        /// Subdivisions per simplex edge.
        #[arg(long)]
        resolution: Option<usize>,
        /// Checkpoint times.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
    },
    /// Run the cross-module invariant suite on the model zoo.
    Validate,
}

fn build_config(cli: &Cli) -> dampflow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(v) = &o.model {
        cfg.model = v.clone();
    }
    if let Some(v) = &o.x {
        if v.len() != 3 {
            return Err(dampflow::Error::InvalidInput(format!(
                "--x needs exactly three comma-separated coordinates, got {}",
                v.len()
            )));
        }
        cfg.x = Some([v[0], v[1], v[2]]);
    }
    if let Some(v) = &o.gamma_profile {
        cfg.gamma_profile = v.clone();
    }
    if let Some(v) = &o.k_profile {
        cfg.k_profile = v.clone();
    }
    if let Some(v) = &o.phi_profile {
        cfg.phi_profile = v.clone();
    }
    if let Some(v) = o.t_end {
        cfg.t_end = v;
    }
    if let Some(v) = o.n_steps {
        cfg.n_steps = v;
    }
    if let Some(v) = &o.output_dir {
        cfg.output_dir = Some(v.clone());
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.rate_tol {
        cfg.rate_tol = v;
    }
    if let Some(v) = o.tol_override {
        cfg.tol_override = Some(v);
    }
    if let Some(v) = &o.snapshots {
        cfg.snapshots = v.clone();
    }
    match &cli.command {
        Command::Convert { from, to } => {
            if let Some(v) = from {
                cfg.from = v.clone();
            }
            if let Some(v) = to {
                cfg.to = v.clone();
            }
        }
        Command::Propagate { kind }
        | Command::Lindblad { kind }
        | Command::Divisibility { kind } => {
            if let Some(v) = kind {
                cfg.kind = v.clone();
            }
        }
        Command::Scan { resolution, times } => {
            if let Some(v) = resolution {
                cfg.resolution = *v;
            }
            if let Some(v) = times {
                cfg.times = v.clone();
            }
        }
        Command::Validate => {}
    }
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &RunConfig) -> dampflow::Result<bool> {
    match &cli.command {
        Command::Convert { .. } => cli::cmd_convert(cfg).map(|_| true),
        Command::Propagate { .. } => cli::cmd_propagate(cfg).map(|_| true),
        Command::Lindblad { .. } => cli::cmd_lindblad(cfg).map(|_| true),
        Command::Divisibility { .. } => cli::cmd_divisibility(cfg).map(|_| true),
        Command::Scan { .. } => cli::cmd_scan(cfg).map(|_| true),
        Command::Validate => cli::cmd_validate(cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprint!("{}", cli::error_json(&err));
            return ExitCode::from(2);
        }
    };
    if cli.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return ExitCode::SUCCESS;
    }
    match run(&cli, &cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprint!("{}", cli::error_json(&err));
            ExitCode::from(cli::exit_code_for(&err) as u8)
        }
    }
}
