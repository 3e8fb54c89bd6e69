use std::fmt;

use anyhow::Result;
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use bundleneg_core::background::{
    BenchmarkRanker, GainsTable, LearnedRanker, Method, NeighborRanker, OracleParams, OracleRanker,
};
use bundleneg_core::bundle::Bundle;
use bundleneg_core::negotiation::{run_session, SessionResult, StrategyKind, TraceRecord};
use bundleneg_core::preferences::{
    best_bundles, sample_customer, sample_population, ShopValuation,
};
use bundleneg_core::seeds::{derive, rng_from, tag};

use crate::config::ExperimentConfig;
use crate::metrics::{compute_metrics, initial_bundle, moving_rel_percentage, CustomerRecord, Summary};

/// One method paired with one customer strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Arm {
    pub method: Method,
    pub strategy: StrategyKind,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.strategy {
            StrategyKind::Tdf => "TDF",
            StrategyKind::Tftm => "TFTM",
        };
        write!(f, "{}_{}", self.method, s)
    }
}

/// One session as written to `traces.jsonl`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceLine {
    pub method: Method,
    pub strategy: StrategyKind,
    pub run: usize,
    pub customer: usize,
    pub initial: Bundle,
    pub interest: Option<Bundle>,
    pub result: SessionResult,
    pub trace: Vec<TraceRecord>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<CustomerRecord>,
    pub traces: Vec<TraceLine>,
    /// Final table of the learning ranker.
    pub gains_table: Option<GainsTable>,
}

#[derive(Clone, Debug)]
pub struct ArmResult {
    pub arm: Arm,
    pub runs: Vec<RunOutput>,
}

impl ArmResult {
    pub fn records(&self) -> Vec<Vec<CustomerRecord>> {
        self.runs.iter().map(|r| r.records.clone()).collect()
    }

    pub fn summary(&self) -> Summary {
        Summary::from_runs(&self.records())
    }

    pub fn moving_rel_percentage(&self, window: usize) -> Vec<f64> {
        moving_rel_percentage(&self.records(), window)
    }
}

pub fn run_seed(cfg: &ExperimentConfig, run: usize) -> u64 {
    derive(cfg.seed, &[tag::RUN, run as u64])
}

/// Runs every customer of one run through one arm, in order.
///
/// Population, shop, customers, starting bundles and breakdown draws depend
/// only on the master seed and run index, so arms see the same customers.
pub fn run_one(cfg: &ExperimentConfig, arm: Arm, run: usize) -> Result<RunOutput> {
    let seed = run_seed(cfg, run);
    let params = cfg.population();
    let pop = sample_population(cfg.n, seed, &params)?;
    let sv = ShopValuation::sample(cfg.n, &params.shop, &mut rng_from(seed, &[tag::SHOP]))?;
    let session = cfg.session(arm.strategy);

    let mut learned = LearnedRanker::new(cfg.lambda);
    let mut oracle = OracleRanker::new(
        &pop,
        OracleParams {
            seed: derive(seed, &[tag::ORACLE]),
            ..cfg.oracle
        },
    );
    let mut benchmark = BenchmarkRanker;
    let ranker: &mut dyn NeighborRanker = match arm.method {
        Method::Mu => &mut learned,
        Method::S => &mut oracle,
        Method::B => &mut benchmark,
    };

    let mut records = Vec::with_capacity(cfg.num_customers);
    let mut traces = Vec::new();
    for c in 0..cfg.num_customers {
        let mut crng = rng_from(seed, &[tag::CUSTOMER, c as u64]);
        let cv = sample_customer(&pop, &mut crng);
        let best = best_bundles(&cv, &sv);
        let initial = initial_bundle(&best, &mut crng);
        let mut srng = rng_from(seed, &[tag::SESSION, c as u64]);
        let report = run_session(&cv, &sv, initial, &session, Some(&mut *ranker), &mut srng);
        records.push(compute_metrics(run, c, &report, initial, &best, &cv, &sv));
        if cfg.traces {
            traces.push(TraceLine {
                method: arm.method,
                strategy: arm.strategy,
                run,
                customer: c,
                initial,
                interest: report.interest,
                result: report.outcome.result,
                trace: report.trace,
            });
        }
    }
    let gains_table = (arm.method == Method::Mu).then(|| learned.table.clone());
    info!("{arm} run {run}: {} customers done", records.len());
    Ok(RunOutput {
        records,
        traces,
        gains_table,
    })
}

/// Runs every arm over every run; runs execute in parallel, results come back
/// in arm order then run order.
pub fn run_arms(cfg: &ExperimentConfig, arms: &[Arm]) -> Result<Vec<ArmResult>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..arms.len())
        .flat_map(|a| (0..cfg.num_distributions).map(move |r| (a, r)))
        .collect();
    let outputs: Vec<RunOutput> = jobs
        .par_iter()
        .map(|&(a, r)| run_one(cfg, arms[a], r))
        .collect::<Result<_>>()?;
    let mut outputs = outputs.into_iter();
    Ok(arms
        .iter()
        .map(|&arm| ArmResult {
            arm,
            runs: outputs.by_ref().take(cfg.num_distributions).collect(),
        })
        .collect())
}

pub fn all_arms(strategies: &[StrategyKind]) -> Vec<Arm> {
    strategies
        .iter()
        .flat_map(|&strategy| Method::ALL.iter().map(move |&method| Arm { method, strategy }))
        .collect()
}
