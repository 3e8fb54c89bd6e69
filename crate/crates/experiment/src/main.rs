use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use bundleneg_core::background::Method;
use bundleneg_core::negotiation::{StrategyKind, TraceEvent};
use bundleneg_experiment::checks;
use bundleneg_experiment::config::ExperimentConfig;
use bundleneg_experiment::report::{fmt_g, summary_table, write_all};
use bundleneg_experiment::runner::{all_arms, run_arms, Arm, TraceLine};

#[derive(Parser)]
#[command(name = "bundleneg", version, about = "Bundle negotiation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Tdf,
    Tftm,
    Both,
}

impl StrategyArg {
    fn kinds(self) -> Vec<StrategyKind> {
        match self {
            StrategyArg::Tdf => vec![StrategyKind::Tdf],
            StrategyArg::Tftm => vec![StrategyKind::Tftm],
            StrategyArg::Both => vec![StrategyKind::Tdf, StrategyKind::Tftm],
        }
    }
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration; every key is optional.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Override the number of customers per run.
    #[arg(long)]
    customers: Option<usize>,
    /// Override the number of runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Start from ten goods, 12000 customers and ten runs.
    #[arg(long)]
    full_scale: bool,
    /// Write every session trace to traces.jsonl.
    #[arg(long)]
    traces: bool,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None if self.full_scale => ExperimentConfig::full_scale(),
            None => ExperimentConfig::default(),
        };
        if self.config.is_some() && self.full_scale {
            bail!("--full-scale cannot be combined with --config");
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.output {
            cfg.output_dir = o.clone();
        }
        if let Some(c) = self.customers {
            cfg.num_customers = c;
        }
        if let Some(r) = self.runs {
            cfg.num_distributions = r;
        }
        cfg.traces |= self.traces;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured method and customer strategy.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Run MU, S and B on shared seeds.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "both")]
        strategy: StrategyArg,
    },
    /// Run the brute-force consistency checks.
    OracleCheck {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Print a stored session trace.
    Replay {
        /// A traces.jsonl file written with --traces.
        traces: PathBuf,
        #[arg(long, default_value_t = 0)]
        customer: usize,
        #[arg(long, default_value_t = 0)]
        run: usize,
        #[arg(long)]
        method: Option<Method>,
    },
}

fn execute(cfg: &ExperimentConfig, arms: &[Arm]) -> Result<()> {
    let results = run_arms(cfg, arms)?;
    write_all(&cfg.output_dir, &results, cfg.window, cfg.traces)?;
    print!("{}", summary_table(&results));
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

fn replay(path: &PathBuf, customer: usize, run: usize, method: Option<Method>) -> Result<()> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut found = false;
    for line in BufReader::new(f).lines() {
        let t: TraceLine = serde_json::from_str(&line?)?;
        if t.customer != customer || t.run != run || method.is_some_and(|m| m != t.method) {
            continue;
        }
        found = true;
        println!(
            "{} {:?} run {} customer {}: start {} -> {:?}",
            t.method, t.strategy, t.run, t.customer, t.initial, t.result
        );
        for r in &t.trace {
            let mut extra = String::new();
            if let (Some(dt), Some(p)) = (r.delta_t, r.probability) {
                extra += &format!("  dt={} p={}", fmt_g(dt), fmt_g(p));
            }
            if let Some(s) = r.sign {
                extra += &format!("  sign={s}");
            }
            let event = match r.event {
                TraceEvent::Offer => "offer",
                TraceEvent::Accept => "accept",
                TraceEvent::Recommend => "recommend",
                TraceEvent::Breakdown => "breakdown",
            };
            println!(
                "  {:>4} {:<8?} {:<10} {:<14} {:>12}{extra}",
                r.round,
                r.proposer,
                event,
                r.bundle.to_string(),
                fmt_g(r.price)
            );
        }
        if let Some(i) = t.interest {
            println!("  interest bundle at end: {i}");
        }
    }
    if !found {
        bail!("no trace for run {run}, customer {customer} in {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { common } => common.load().and_then(|cfg| {
            let arm = Arm {
                method: cfg.method,
                strategy: cfg.customer_strategy,
            };
            execute(&cfg, &[arm])
        }),
        Command::Compare { common, strategy } => common
            .load()
            .and_then(|cfg| execute(&cfg, &all_arms(&strategy.kinds()))),
        Command::OracleCheck { instances, seed } => {
            let results = checks::run_all(instances, seed);
            let mut ok = true;
            for c in &results {
                let status = if c.passed() { "pass" } else { "FAIL" };
                println!("{status} {:<14} {} cases, {} failures", c.name, c.cases, c.failures.len());
                for f in c.failures.iter().take(5) {
                    println!("    {f}");
                }
                ok &= c.passed();
            }
            if ok {
                Ok(())
            } else {
                Err(anyhow::anyhow!("oracle checks failed"))
            }
        }
        Command::Replay {
            traces,
            customer,
            run,
            method,
        } => replay(&traces, customer, run, method),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
