//! `zk`: fit, apply and check zonal kriging models from the command line.

mod commands;
mod config;
mod error;
mod output;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{DriftArg, PoolingArg, RunConfig, WeightArg};
use error::CliError;
use output::Artifacts;

#[derive(Parser, Debug)]
#[command(
    name = "zk",
    version,
    about = "Universal kriging under zonal anisotropy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON run configuration; flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0: all cores).
    #[arg(long, global = true, env = "ZK_THREADS")]
    threads: Option<usize>,
    /// Where to write the run manifest (default: next to the main output).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct ZonalArgs {
    /// Drift polynomial order: constant, linear or quadratic (or 0, 1, 2).
    #[arg(long)]
    drift: Option<DriftArg>,
    /// Per-axis weight policy.
    #[arg(long)]
    weights: Option<WeightArg>,
    #[arg(long)]
    n_bins: Option<usize>,
    #[arg(long)]
    max_lag_fraction: Option<f64>,
    /// Leading non-empty lag bins used by the variogram line fit.
    #[arg(long)]
    fit_lags: Option<usize>,
}

impl ZonalArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let z = &mut cfg.zonal;
        if let Some(d) = self.drift {
            z.drift_order = d.into();
        }
        if let Some(w) = self.weights {
            z.weight_policy = w.into();
        }
        if let Some(b) = self.n_bins {
            z.n_bins = b;
        }
        if let Some(f) = self.max_lag_fraction {
            z.max_lag_fraction = f;
        }
        if let Some(l) = self.fit_lags {
            z.fit.fit_lags = l;
        }
    }
}

/// Input and output paths shared by the subcommands; each uses a subset.
#[derive(Args, Debug, Default)]
struct Paths {
    /// Training CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Target column name.
    #[arg(long)]
    target: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit per-axis variograms and drifts; write the model and a fit report.
    Fit {
        #[command(flatten)]
        paths: Paths,
        /// Model JSON to write.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Fit report JSON (default: <model>.report.json).
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        zonal: ZonalArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Predict query points with a fitted model.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Query CSV with one column per model axis.
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Empirical marginal variograms per axis, with the fitted structures.
    Variogram {
        #[command(flatten)]
        paths: Paths,
        /// Lag table CSV.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Fitted models JSON (default: <output>.fit.json).
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        zonal: ZonalArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the zonal predictor with the dense exact solver.
    Validate {
        #[command(flatten)]
        paths: Paths,
        /// Use this model instead of fitting one to --data.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Held-out CSV; the training points are used when omitted.
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Report JSON.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        dense_limit: Option<usize>,
        /// Comma-separated training sizes to time both paths on.
        #[arg(long, value_delimiter = ',')]
        scaling: Option<Vec<usize>>,
        #[command(flatten)]
        zonal: ZonalArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Draw a synthetic zonal field from a JSON specification.
    Simulate {
        /// Simulation spec JSON.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Dataset CSV.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Ground-truth JSON (default: <output>.truth.json).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        target: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Indicator classification sharing one set of kriging weights.
    #[command(subcommand)]
    Classify(ClassifyCommand),
}

#[derive(Subcommand, Debug)]
enum ClassifyCommand {
    /// Fit the shared structure to a labelled CSV.
    Fit {
        #[command(flatten)]
        paths: Paths,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        pooling: Option<PoolingArg>,
        #[command(flatten)]
        zonal: ZonalArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Class estimates and predicted class per query.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

/// Defaults, then the config file, then `flags`.
fn resolve(common: &Common, flags: impl FnOnce(&mut RunConfig)) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    flags(&mut cfg);
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    if common.manifest.is_some() {
        cfg.manifest = common.manifest.clone();
    }
    cfg.check()?;
    Ok(cfg)
}

fn set<T: Clone>(slot: &mut Option<T>, flag: &Option<T>) {
    if flag.is_some() {
        *slot = flag.clone();
    }
}

impl Paths {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.data, &self.data);
        set(&mut cfg.target, &self.target);
    }
}

type Runner = fn(&RunConfig) -> Result<Artifacts, CliError>;

fn plan(command: Command) -> Result<(&'static str, RunConfig, Runner), CliError> {
    Ok(match command {
        Command::Fit {
            paths,
            model,
            report,
            zonal,
            common,
        } => {
            let cfg = resolve(&common, |c| {
                paths.apply(c);
                set(&mut c.model, &model);
                set(&mut c.report, &report);
                zonal.apply(c);
            })?;
            ("fit", cfg, commands::fit)
        }
        Command::Predict {
            model,
            queries,
            output,
            common,
        } => {
            let cfg = resolve(&common, |c| {
                set(&mut c.model, &model);
                set(&mut c.queries, &queries);
                set(&mut c.output, &output);
            })?;
            ("predict", cfg, commands::predict)
        }
        Command::Variogram {
            paths,
            output,
            report,
            zonal,
            common,
        } => {
            let cfg = resolve(&common, |c| {
                paths.apply(c);
                set(&mut c.output, &output);
                set(&mut c.report, &report);
                zonal.apply(c);
            })?;
            ("variogram", cfg, commands::variogram)
        }
        Command::Validate {
            paths,
            model,
            queries,
            output,
            dense_limit,
            scaling,
            zonal,
            common,
        } => {
            let cfg = resolve(&common, |c| {
                paths.apply(c);
                set(&mut c.model, &model);
                set(&mut c.queries, &queries);
                set(&mut c.output, &output);
                if let Some(l) = dense_limit {
                    c.dense_limit = l;
                }
                if let Some(s) = scaling {
                    c.scaling_sizes = s;
                }
                zonal.apply(c);
            })?;
            ("validate", cfg, validate::validate)
        }
        Command::Simulate {
            spec,
            output,
            report,
            seed,
            n,
            target,
            common,
        } => {
            let cfg = resolve(&common, |c| {
                set(&mut c.spec, &spec);
                set(&mut c.output, &output);
                set(&mut c.report, &report);
                set(&mut c.seed, &seed);
                set(&mut c.n, &n);
                set(&mut c.target, &target);
            })?;
            ("simulate", cfg, commands::simulate)
        }
        Command::Classify(ClassifyCommand::Fit {
            paths,
            model,
            report,
            pooling,
            zonal,
            common,
        }) => {
            let cfg = resolve(&common, |c| {
                paths.apply(c);
                set(&mut c.model, &model);
                set(&mut c.report, &report);
                if let Some(p) = pooling {
                    c.pooling = p.into();
                }
                zonal.apply(c);
            })?;
            ("classify fit", cfg, commands::classify_fit)
        }
        Command::Classify(ClassifyCommand::Predict {
            model,
            queries,
            output,
            common,
        }) => {
            let cfg = resolve(&common, |c| {
                set(&mut c.model, &model);
                set(&mut c.queries, &queries);
                set(&mut c.output, &output);
            })?;
            ("classify predict", cfg, commands::classify_predict)
        }
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, cfg, runner) = plan(cli.command)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let artifacts = runner(&cfg)?;
    let manifest = artifacts.commit(name, &cfg)?;
    log::info!("{name}: manifest written to {}", manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("zk: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(
            &path,
            r#"{"zonal": {"drift_order": 0, "n_bins": 7}, "target": "z"}"#,
        )
        .unwrap();
        let cli = Cli::try_parse_from([
            "zk",
            "fit",
            "--config",
            path.to_str().unwrap(),
            "--drift",
            "quadratic",
        ])
        .unwrap();
        let (_, cfg, _) = plan(cli.command).unwrap();
        assert_eq!(cfg.zonal.drift_order, zonal_kriging::DriftOrder::Quadratic);
        assert_eq!(cfg.zonal.n_bins, 7);
        assert_eq!(cfg.target.as_deref(), Some("z"));
    }

    #[test]
    fn numeric_drift_aliases_parse() {
        let cli = Cli::try_parse_from(["zk", "fit", "--drift", "2"]).unwrap();
        let (_, cfg, _) = plan(cli.command).unwrap();
        assert_eq!(cfg.zonal.drift_order, zonal_kriging::DriftOrder::Quadratic);
    }
}
