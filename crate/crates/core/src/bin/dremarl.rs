use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dremarl::aggregation::AggregationScheme;
use dremarl::env::Scenario;
use dremarl::estimator::SampleMode;
use dremarl::exp::{self, GridAxis};
use dremarl::uncertainty::RewardSettingKind;
use dremarl::{ConfigOverrides, EstimatorKind, RewardScope, RunConfig};

#[derive(Parser)]
#[command(name = "dremarl", version, about = "Distributional reward estimation for multi-agent RL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a single run.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Run directory (defaults to <output root>/<label>_seed<seed>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a grid of configurations over several seeds.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Axis such as `estimator=dre,p2p,none`; repeatable.
        #[arg(long = "grid")]
        grid: Vec<GridAxis>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate metric files into a summary table.
    Summarize {
        /// Run directories, metric files, or trees containing them.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Write the summary here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write long-form learning curves.
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Run the built-in property and oracle checks.
    Check {
        /// Skip the slower checks.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    reward_setting: Option<RewardSettingKind>,
    #[arg(long)]
    estimator: Option<EstimatorKind>,
    #[arg(long)]
    aggregation: Option<AggregationScheme>,
    #[arg(long)]
    reward_mode: Option<SampleMode>,
    #[arg(long)]
    reward_scope: Option<RewardScope>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Root directory for run output.
    #[arg(long, env = "DREMARL_OUT", default_value = "runs")]
    output_root: PathBuf,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let overrides = ConfigOverrides {
            scenario: self.scenario,
            agents: self.agents,
            reward_setting: self.reward_setting,
            estimator: self.estimator,
            aggregation: self.aggregation,
            reward_mode: self.reward_mode,
            reward_scope: self.reward_scope,
            seed: self.seed,
            episodes: self.episodes,
        };
        RunConfig::load(self.config.as_deref(), &overrides).context("loading run configuration")
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train { run, out } => {
            let cfg = run.load()?;
            let dir = out.unwrap_or_else(|| {
                run.output_root
                    .join(format!("{}_seed{}", exp::config_label(&cfg), cfg.seed))
            });
            let rec = exp::run_to_dir(&cfg, &dir)
                .with_context(|| format!("training into {}", dir.display()))?;
            println!(
                "{}: final eval {:.3} +/- {:.3} ({} records) -> {}",
                exp::config_label(&cfg),
                rec.final_mean,
                rec.final_stderr,
                rec.metrics.len(),
                dir.display()
            );
        }
        Command::Sweep {
            run,
            grid,
            seeds,
            out,
        } => {
            let base = run.load()?;
            let configs = exp::expand_grid(&base, &grid)?;
            let out = out.unwrap_or_else(|| run.output_root.join("sweep"));
            let outcome = exp::sweep(&configs, &seeds, &out, |cfg, dir| {
                let rec = exp::run_to_dir(cfg, dir)?;
                eprintln!("done {} ({:.3})", dir.display(), rec.final_mean);
                Ok(rec)
            })?;
            exp::write_summary_csv(io::stdout().lock(), &outcome.summary)?;
            let failed: Vec<_> = outcome.failures().collect();
            for f in &failed {
                eprintln!("failed {}: {}", f.dir.display(), f.result.as_ref().unwrap_err());
            }
            if !failed.is_empty() {
                bail!("{} of {} runs failed", failed.len(), outcome.runs.len());
            }
        }
        Command::Summarize { paths, out, curves } => {
            let dirs = exp::find_runs(&paths)?;
            if dirs.is_empty() {
                bail!("no {} found under the given paths", exp::METRICS_FILE);
            }
            let runs = dirs
                .iter()
                .map(|d| exp::load_run(d).with_context(|| format!("reading {}", d.display())))
                .collect::<Result<Vec<_>>>()?;
            let rows = exp::summarize(&runs)?;
            match out {
                Some(p) => exp::write_summary_csv(
                    BufWriter::new(File::create(&p).with_context(|| p.display().to_string())?),
                    &rows,
                )?,
                None => exp::write_summary_csv(io::stdout().lock(), &rows)?,
            }
            if let Some(p) = curves {
                let file = File::create(&p).with_context(|| p.display().to_string())?;
                exp::write_curves_csv(BufWriter::new(file), &runs)?;
            }
        }
        Command::Check { quick } => {
            let results = dremarl::checks::run_all(quick);
            let mut failed = 0;
            for r in &results {
                println!("{} {:<40} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                failed += usize::from(!r.passed);
            }
            if failed > 0 {
                bail!("{failed} of {} checks failed", results.len());
            }
        }
    }
    Ok(())
}
