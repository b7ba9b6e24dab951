use std::path::PathBuf;
use std::process::ExitCode;

use adjwalk_cli::manifest::{ExperimentKind, ExperimentManifest, ParamsSpec, RegimeTag, TOOL_VERSION, parse_schedule};
use adjwalk_cli::output::status_line;
use adjwalk_cli::{CliError, run_manifest};
use clap::{Args, Parser, Subcommand};

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (acceptance suite 1.0)");

/// Monte Carlo simulator and verification suite for the biased adjacent walk.
///
/// Values are taken from, in order of precedence: command-line flags, the
/// `--manifest` file, and the built-in defaults of the subcommand. Outputs go
/// to `--out-dir`, else the manifest's `out_dir`, else `$ADJWALK_OUT_DIR`,
/// else `./adjwalk-out`.
#[derive(Parser)]
#[command(name = "adjwalk", version = VERSION)]
struct Cli {
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in a manifest file.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Trajectories from the maximal configuration against the exact mean.
    Simulate(Overrides),
    /// KS tests of stationary marginals, optionally after running the dynamics.
    StationaryTest(Overrides),
    /// Exponential decay rate of the eigenfunction statistic.
    Decay(Overrides),
    /// Single-event coupling exactness and coalescence times.
    Coupling(Overrides),
    /// Front of the untransformed profile and its barriers.
    HydroNaive(Overrides),
    /// Transformed profiles, including M-domination.
    HydroTransformed(Overrides),
    /// Deterministic schemes against the Lax solution.
    Schemes(Overrides),
    /// Total-variation bounds and the mixing window.
    Mixing(Overrides),
    /// Mixing windows over a schedule of (N, λ) pairs.
    CutoffSweep(Overrides),
}

#[derive(Args, Clone, Debug, Default)]
struct Overrides {
    /// Manifest file supplying values not given as flags.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha1: Option<f64>,
    /// Horizon, or scheme time for the hydrodynamic experiments.
    #[arg(long = "t-max", visible_alias = "t")]
    t_max: Option<f64>,
    /// Comma-separated time grid.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    #[arg(long)]
    trajectories: Option<usize>,
    /// Single-event trials per interval pair (coupling).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Mixing threshold, or the left cut of the sup distance for schemes.
    #[arg(long, visible_alias = "eps")]
    epsilon: Option<f64>,
    /// Relative widening of the fixed-λ bracket.
    #[arg(long)]
    slack: Option<f64>,
    #[arg(long, value_enum)]
    regime: Option<RegimeTag>,
    /// Entries `N:lambda:regime`, comma-separated; lambda may be `N^p`.
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn resolve(kind: ExperimentKind, o: Overrides) -> Result<(ExperimentManifest, Option<PathBuf>), CliError> {
    let mut m = match &o.manifest {
        Some(path) => {
            let m = ExperimentManifest::load(path)?;
            if m.kind != kind {
                return Err(CliError::Usage(format!(
                    "manifest describes {}, not {}",
                    m.kind.as_str(),
                    kind.as_str()
                )));
            }
            m
        }
        None => ExperimentManifest::defaults(kind),
    };
    if o.n.is_some() || o.lambda.is_some() || o.alpha1.is_some() {
        let base = m.params.unwrap_or(ParamsSpec { n: 0, lambda: f64::NAN, alpha1: 1.0 });
        let p = ParamsSpec {
            n: o.n.unwrap_or(base.n),
            lambda: o.lambda.unwrap_or(base.lambda),
            alpha1: o.alpha1.unwrap_or(base.alpha1),
        };
        if p.n == 0 || p.lambda.is_nan() {
            return Err(CliError::Usage("both --n and --lambda are needed".into()));
        }
        m.params = Some(p);
    }
    if let Some(t) = o.t_max {
        m.t_max = Some(t);
    }
    if let Some(times) = o.times {
        m.times = times;
    }
    if let Some(n) = o.trajectories {
        m.trajectories = n;
    }
    if let Some(n) = o.trials {
        m.trials = Some(n);
    }
    if let Some(s) = o.seed {
        m.seed = s;
    }
    if let Some(e) = o.epsilon {
        m.epsilon = Some(e);
    }
    if let Some(s) = o.slack {
        m.slack = Some(s);
    }
    if let Some(r) = o.regime {
        m.regime = Some(r);
    }
    if let Some(s) = &o.schedule {
        m.schedule = parse_schedule(s)?;
    }
    Ok((m, o.out_dir))
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let (manifest, out_flag) = match cli.command {
        Command::Run { manifest, out_dir } => (ExperimentManifest::load(&manifest)?, out_dir),
        Command::Simulate(o) => resolve(ExperimentKind::Simulate, o)?,
        Command::StationaryTest(o) => resolve(ExperimentKind::StationaryTest, o)?,
        Command::Decay(o) => resolve(ExperimentKind::Decay, o)?,
        Command::Coupling(o) => resolve(ExperimentKind::Coupling, o)?,
        Command::HydroNaive(o) => resolve(ExperimentKind::HydroNaive, o)?,
        Command::HydroTransformed(o) => resolve(ExperimentKind::HydroTransformed, o)?,
        Command::Schemes(o) => resolve(ExperimentKind::Schemes, o)?,
        Command::Mixing(o) => resolve(ExperimentKind::Mixing, o)?,
        Command::CutoffSweep(o) => resolve(ExperimentKind::CutoffSweep, o)?,
    };
    if manifest.tool_version != TOOL_VERSION {
        eprintln!(
            "warning: manifest was written for version {}, running {}",
            manifest.tool_version, TOOL_VERSION
        );
    }
    let out_dir = manifest.resolve_out_dir(out_flag.as_deref());
    let outcome = run_manifest(&manifest, &out_dir)?;
    println!("{}", status_line(&manifest, &outcome));
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("adjwalk: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
