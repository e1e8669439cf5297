use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use arnold_stab::commands::{run_command, Command};
use arnold_stab::config::RunConfig;
use arnold_stab::error::CliError;
use arnold_stab::output::{write_manifest, Manifest, Versions};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "arnold-stab", version, about = "Stability experiments for steady Euler flows in multiply-connected domains")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Build the grid and write its node kinds.
    Gen,
    /// Harmonic basis and the p/q Gram matrices.
    Harmonic,
    /// Stream function of a vorticity field with prescribed circulations.
    Stream,
    /// Energy, energy-Casimir and supporting functionals.
    Functional,
    /// Eigenvalues and the stability criterion of the steady state.
    Spectra,
    /// Steady state for the profile g.
    Steady,
    /// Local-maximizer probe over nearby rearrangements.
    Probe,
    /// Time-dependent run from a perturbed steady state.
    Simulate,
    /// Radial and closed-form reference values for the annulus.
    Oracle,
    /// SVG plots of the CSV outputs.
    Report,
    /// Full acceptance suite.
    VerifyAll,
}

#[derive(Args)]
struct Opts {
    /// key = value configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// annulus or mask.
    #[arg(long, global = true)]
    domain: Option<String>,
    #[arg(long, global = true)]
    rin: Option<String>,
    #[arg(long, global = true)]
    rout: Option<String>,
    /// Cells per unit length (h = 1/res).
    #[arg(long, global = true)]
    res: Option<String>,
    /// Mask file (PGM P5 or run-length text).
    #[arg(long, global = true)]
    mask: Option<String>,
    /// Grid spacing of a mask domain.
    #[arg(long, global = true)]
    h: Option<String>,
    #[arg(long, global = true)]
    x0: Option<String>,
    #[arg(long, global = true)]
    y0: Option<String>,
    /// Profile: linear[:k], affine:k:c, const:c or table:s:g,...
    #[arg(long, global = true)]
    g: Option<String>,
    /// Slope of a linear profile; a number or <x>lambda.
    #[arg(long, global = true)]
    kappa: Option<String>,
    /// Circulations of the steady state, comma separated.
    #[arg(long, global = true)]
    a: Option<String>,
    /// Circulations of the perturbed flow.
    #[arg(long, global = true)]
    b: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    tol: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Input vorticity field file.
    #[arg(long, global = true)]
    omega: Option<String>,
    #[arg(long, global = true)]
    samples: Option<String>,
    /// Probe radius relative to |omega_bar|_2.
    #[arg(long, global = true)]
    radius: Option<String>,
    #[arg(long, global = true)]
    turnovers: Option<String>,
    #[arg(long, global = true)]
    cfl: Option<String>,
    /// semi-lagrangian or upwind2.
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// Perturbation: bump or swap.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Perturbation size relative to |omega_bar|_2.
    #[arg(long, global = true)]
    amplitude: Option<String>,
    #[arg(long, global = true)]
    bins: Option<String>,
    #[arg(long, global = true)]
    cadence: Option<String>,
    /// Picard damping.
    #[arg(long, global = true)]
    beta: Option<String>,
    #[arg(long, global = true)]
    max_iter: Option<String>,
    /// Reduced acceptance suite.
    #[arg(long, global = true)]
    quick: bool,
    /// Directory read by `report` (defaults to the output directory).
    #[arg(long, global = true)]
    input: Option<String>,
}

impl Opts {
    fn flags(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("domain", &self.domain),
            ("rin", &self.rin),
            ("rout", &self.rout),
            ("res", &self.res),
            ("mask", &self.mask),
            ("h", &self.h),
            ("x0", &self.x0),
            ("y0", &self.y0),
            ("g", &self.g),
            ("kappa", &self.kappa),
            ("a", &self.a),
            ("b", &self.b),
            ("seed", &self.seed),
            ("tol", &self.tol),
            ("out", &self.out),
            ("omega", &self.omega),
            ("samples", &self.samples),
            ("radius", &self.radius),
            ("turnovers", &self.turnovers),
            ("cfl", &self.cfl),
            ("scheme", &self.scheme),
            ("mode", &self.mode),
            ("amplitude", &self.amplitude),
            ("bins", &self.bins),
            ("cadence", &self.cadence),
            ("beta", &self.beta),
            ("max_iter", &self.max_iter),
            ("input", &self.input),
        ];
        let mut m: BTreeMap<String, String> =
            pairs.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect();
        if self.quick {
            m.insert("quick".into(), "true".into());
        }
        m
    }
}

fn command(c: Cmd) -> Command {
    match c {
        Cmd::Gen => Command::Gen,
        Cmd::Harmonic => Command::Harmonic,
        Cmd::Stream => Command::Stream,
        Cmd::Functional => Command::Functional,
        Cmd::Spectra => Command::Spectra,
        Cmd::Steady => Command::Steady,
        Cmd::Probe => Command::Probe,
        Cmd::Simulate => Command::Simulate,
        Cmd::Oracle => Command::Oracle,
        Cmd::Report => Command::Report,
        Cmd::VerifyAll => Command::VerifyAll,
    }
}

fn init_threads() -> Result<usize, CliError> {
    let n = match std::env::var("ARNOLD_STAB_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Config(format!("ARNOLD_STAB_THREADS must be a positive integer, got {v:?}")))?,
        Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    Ok(n)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = command(cli.command);
    let start = Instant::now();
    let cfg = match init_threads().and_then(|n| RunConfig::build(cli.opts.config.as_deref(), &cli.opts.flags()).map(|c| (n, c))) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("arnold-stab: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let (threads, cfg) = cfg;
    let result = run_command(cmd, &cfg);
    let (outputs, status, code) = match &result {
        Ok(files) => (files.clone(), "ok".to_string(), 0),
        Err(e) => (vec![], e.to_string(), e.exit_code()),
    };
    if let Err(e) = &result {
        eprintln!("arnold-stab {}: {e}", cmd.name());
    }
    if cfg.out.is_dir() {
        let m = Manifest {
            command: cmd.name(),
            config: &cfg.echo,
            versions: Versions::current(),
            seeds: vec![cfg.seed],
            threads,
            wall_time_s: start.elapsed().as_secs_f64(),
            outputs,
            status,
        };
        if let Err(e) = write_manifest(&cfg.out, &m) {
            eprintln!("arnold-stab: cannot write manifest: {e}");
            return ExitCode::from(if code == 0 { 3 } else { code as u8 });
        }
    }
    ExitCode::from(code as u8)
}
