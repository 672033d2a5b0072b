use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use continuized_cli::config::{apply_overrides, load_config, Experiment, OverrideSet};
use continuized_cli::{commands, CliError};

#[derive(Parser)]
#[command(
    name = "continuized",
    version,
    about = "Momentum with gradient steps at Poisson random times: seeded \
             experiments, Monte Carlo aggregates, and invariant probes"
)]
struct Cli {
    /// JSON experiment description; flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: FlagOverrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FlagOverrides {
    /// Objective name (quadratic, quasar1d, quasar_radial2d,
    /// finite_sum_quadratic, degenerate_quadratic, dist_sq_ball).
    #[arg(long, global = true)]
    objective: Option<String>,
    /// Objective parameters as inline JSON.
    #[arg(long = "objective-params", global = true, value_name = "JSON")]
    objective_params: Option<String>,
    /// Scheme preset (pl, sqc, sqc-wang, sqc-proj).
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// Gradient step size input for the pl preset.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Rate-vs-constant tradeoff input for the sqc preset.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    steps: Option<u64>,
    #[arg(long, global = true)]
    runs: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Start point as comma-separated coordinates.
    #[arg(long, global = true, value_name = "COORDS")]
    x0: Option<String>,
    /// Output path; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
}

impl FlagOverrides {
    fn into_set(self) -> OverrideSet {
        OverrideSet {
            objective: self.objective,
            objective_params: self.objective_params,
            scheme: self.scheme,
            gamma: self.gamma,
            epsilon: self.epsilon,
            steps: self.steps,
            runs: self.runs,
            seed: self.seed,
            x0: self.x0,
            out: self.out,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one seeded trajectory and write it as CSV.
    Run,
    /// Average independent runs; write per-step aggregates as CSV.
    Mc,
    /// Run named probe suites and write a JSON report.
    Check {
        /// Probe name; repeat for several. Falls back to the config list.
        #[arg(long = "probe", value_name = "NAME")]
        probes: Vec<String>,
    },
    /// Iterations-to-target and fitted rates for baselines and presets.
    Compare {
        /// Comma-separated method list (gd, nesterov, or preset names).
        #[arg(long, value_name = "LIST")]
        methods: Option<String>,
        /// Directory for per-method gap trajectories (k,f_gap schema).
        #[arg(long = "traj-dir", value_name = "DIR")]
        traj_dir: Option<PathBuf>,
    },
    /// Run every cell of the config's sweep grid, one file per cell.
    Sweep {
        /// Output directory; defaults to the working directory.
        #[arg(long = "out-dir", value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("CONTINUIZED_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::Usage(format!(
            "CONTINUIZED_THREADS must be a nonnegative integer (0 = auto), got '{raw}'"
        ))
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool setup failed: {e}")))?;
    }
    Ok(())
}

fn print_warnings(exp: &Experiment) {
    for w in &exp.warnings {
        eprintln!("note: {w}");
    }
}

fn real_main() -> Result<ExitCode, CliError> {
    configure_threads()?;
    let cli = Cli::parse();
    let (mut cfg, raw) = load_config(cli.config.as_deref())?;
    let overrides = cli.overrides.into_set();

    match cli.command {
        Command::Run => {
            apply_overrides(&mut cfg, &overrides)?;
            let exp = cfg.resolve()?;
            print_warnings(&exp);
            commands::cmd_run(&exp, cfg.output.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Mc => {
            apply_overrides(&mut cfg, &overrides)?;
            let exp = cfg.resolve()?;
            print_warnings(&exp);
            commands::cmd_mc(&exp, cfg.output.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { probes } => {
            apply_overrides(&mut cfg, &overrides)?;
            let names = if probes.is_empty() {
                cfg.probes.clone()
            } else {
                probes
            };
            let all_hold = commands::cmd_check(&names, cfg.seed, cfg.output.as_deref())?;
            if all_hold {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("one or more probes failed");
                Ok(ExitCode::from(1))
            }
        }
        Command::Compare { methods, traj_dir } => {
            apply_overrides(&mut cfg, &overrides)?;
            if let Some(list) = methods {
                cfg.compare.methods = list.split(',').map(|s| s.trim().to_string()).collect();
            }
            let exp = cfg.resolve()?;
            print_warnings(&exp);
            commands::cmd_compare(&exp, &cfg.compare, traj_dir.as_deref(), cfg.output.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { out_dir } => {
            commands::cmd_sweep(&cfg, &raw, &overrides, out_dir.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
