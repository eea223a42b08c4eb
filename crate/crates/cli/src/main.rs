use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cpdnes_core::harness::{read_csv, to_csv};
use cpdnes_core::plot::{render_svg, PlotOptions, XAxis};
use cpdnes_core::privacy::{closed_form_coefficient, delta_partial_sum};
use cpdnes_core::{
    check_conditions, ne_linear, run_experiment, Experiment, ExperimentConfig, LedgerMode, Metric, PrivacyLedger,
};

mod report;

#[derive(Parser)]
#[command(name = "cpdnes", version, about = "Compressed, privacy-preserving Nash equilibrium seeking simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the equilibrium of the configured game.
    Ne(ConfigArg),
    /// Run one variant and write its CSV.
    Run {
        #[command(flatten)]
        run: RunArgs,
        /// Variant name; defaults to the first one in the config.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Run every variant, write the CSV and print bits-to-threshold.
    Compare(RunArgs),
    /// Check the step-size exponents.
    CheckSchedule(ConfigArg),
    /// Print the privacy budget per variant.
    Privacy {
        #[command(flatten)]
        config: ConfigArg,
        /// Iterations to tabulate; defaults to the config's budget.
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Render a CSV produced by `run` or `compare` as SVG.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = PlotMetric::Mse)]
        metric: PlotMetric,
        #[arg(long, value_enum, default_value_t = PlotX::Iteration)]
        x: PlotX,
    },
}

#[derive(Args)]
struct ConfigArg {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Worker threads for the trial pool.
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotMetric {
    Mse,
    RmseNorm,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotX {
    Iteration,
    Bits,
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_path(path).with_context(|| format!("loading {}", path.display()))
}

fn execute(args: &RunArgs, only: Option<&str>) -> Result<(ExperimentConfig, Experiment)> {
    let cfg = load(&args.config)?.with_overrides(args.seed, args.trials, args.iters)?;
    let job = || run_experiment(&cfg, only);
    let experiment = match args.parallelism {
        Some(0) => bail!("--parallelism must be at least 1"),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(job)?,
        None => job()?,
    };
    std::fs::write(&args.out, to_csv(&experiment.series)).with_context(|| format!("writing {}", args.out.display()))?;
    log::info!("wrote {}", args.out.display());
    Ok((cfg, experiment))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ne(a) => {
            let cfg = load(&a.config)?;
            let sol = ne_linear(&cfg.game)?;
            print!("{}", report::equilibrium(&sol));
        }
        Command::Run { run, variant } => {
            let cfg = load(&run.config)?;
            let name = match variant {
                Some(v) => v,
                None => cfg.variants[0].name.clone(),
            };
            let (cfg, experiment) = execute(&run, Some(&name))?;
            print!("{}", report::thresholds(&cfg, &experiment));
        }
        Command::Compare(run) => {
            let (cfg, experiment) = execute(&run, None)?;
            print!("{}", report::thresholds(&cfg, &experiment));
        }
        Command::CheckSchedule(a) => {
            let cfg = load(&a.config)?;
            println!("{}", check_conditions(&cfg.schedule()?));
        }
        Command::Privacy { config, iters } => {
            let cfg = load(&config.config)?;
            print!("{}", privacy_table(&cfg, iters.unwrap_or(cfg.iterations))?);
        }
        Command::Plot { csv, out, metric, x } => {
            let rows = read_csv(&csv)?;
            let opts = PlotOptions {
                metric: match metric {
                    PlotMetric::Mse => Metric::Mse,
                    PlotMetric::RmseNorm => Metric::RmseNorm,
                },
                x_axis: match x {
                    PlotX::Iteration => XAxis::Iteration,
                    PlotX::Bits => XAxis::Bits,
                },
            };
            std::fs::write(&out, render_svg(&rows, opts)).with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(())
}

fn privacy_table(cfg: &ExperimentConfig, horizon: usize) -> Result<String> {
    let schedule = cfg.schedule()?;
    let mut out = String::new();
    for (name, engine) in cfg.engine_configs()? {
        let Some(ledger) = cfg.ledger(&engine.variant)? else {
            out.push_str(&format!("{name}: no (0, delta) guarantee\n"));
            continue;
        };
        let ledger = PrivacyLedger::new(ledger.mode, &schedule, cfg.privacy.c, 1, ledger.theta, horizon)?;
        let formula = match ledger.mode {
            LedgerMode::ClosedForm { c4, c5 } => {
                report::closed_form_formula(closed_form_coefficient(c4, c5, cfg.privacy.c, 1, ledger.theta), c5)
            }
            LedgerMode::PartialSum => "partial-sum accounting".to_string(),
            LedgerMode::Dsc { r_base } => format!("dynamic scaling, r_k = {r_base}^k"),
        };
        out.push_str(&format!("{name} [{}]: {formula}\n", ledger.mode.name()));
        let partial = |k| delta_partial_sum(&schedule, k, cfg.privacy.c, 1, ledger.theta);
        out.push_str(&report::ledger_rows(&ledger, &partial));
        if let Some(k) = ledger.saturation() {
            out.push_str(&format!("  saturates at k = {k}\n"));
        }
    }
    Ok(out)
}
