//! Per-customer outcome measures and their aggregation across customers and runs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use bundleneg_core::bundle::{all_bundles, hamming, Bundle};
use bundleneg_core::negotiation::SessionReport;
use bundleneg_core::preferences::{gains, BestBundles, CustomerValuation, ShopValuation};

/// Distance from the best bundle at which customers start.
pub const START_DISTANCE: u32 = 3;

/// A uniform bundle at Hamming distance 3 from a uniformly chosen best bundle,
/// falling back to shorter distances in catalogs too small to have one.
pub fn initial_bundle<R: Rng + ?Sized>(best: &BestBundles, rng: &mut R) -> Bundle {
    let star = best.bundles[rng.random_range(0..best.bundles.len())];
    let all = all_bundles(star.catalog_size()).expect("bundle has a valid catalog");
    for d in (1..=START_DISTANCE).rev() {
        let at: Vec<Bundle> = all
            .iter()
            .copied()
            .filter(|&b| hamming(b, star).unwrap() == d)
            .collect();
        if !at.is_empty() {
            return at[rng.random_range(0..at.len())];
        }
    }
    star
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomerRecord {
    pub run: usize,
    pub customer: usize,
    pub max_gains: f64,
    pub min_gains: f64,
    pub gains_init: f64,
    pub gains_interest: f64,
    pub gains_final: f64,
    pub percentage: f64,
    pub rel_percentage: f64,
    pub deal: bool,
    pub rounds: usize,
}

/// `(g - lo) / (hi - lo)`, or 1 when the range is empty.
pub fn ratio(g: f64, lo: f64, hi: f64) -> f64 {
    if hi == lo {
        1.0
    } else {
        (g - lo) / (hi - lo)
    }
}

pub fn compute_metrics(
    run: usize,
    customer: usize,
    report: &SessionReport,
    initial: Bundle,
    best: &BestBundles,
    cv: &CustomerValuation,
    sv: &ShopValuation,
) -> CustomerRecord {
    let g = |b: Bundle| gains(cv, sv, b);
    let gains_init = g(initial);
    let gains_final = g(report.outcome.final_bundle());
    CustomerRecord {
        run,
        customer,
        max_gains: best.max_gains,
        min_gains: best.min_gains,
        gains_init,
        gains_interest: g(report.interest.unwrap_or(initial)),
        gains_final,
        percentage: ratio(gains_final, best.min_gains, best.max_gains),
        rel_percentage: ratio(gains_final, gains_init, best.max_gains),
        deal: report.outcome.is_deal(),
        rounds: report.outcome.rounds,
    }
}

/// Indicators reported per run, in output order.
pub const INDICATORS: [&str; 9] = [
    "max_gains",
    "min_gains",
    "gains_init",
    "gains_interest",
    "gains_final",
    "percentage",
    "rel_percentage",
    "rounds",
    "deals",
];

/// Run-level means; `rounds` averages over deals only and `deals` is a count.
pub fn run_indicators(records: &[CustomerRecord]) -> [f64; 9] {
    let n = records.len().max(1) as f64;
    let mean = |f: fn(&CustomerRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
    let deals: Vec<&CustomerRecord> = records.iter().filter(|r| r.deal).collect();
    let rounds = if deals.is_empty() {
        f64::NAN
    } else {
        deals.iter().map(|r| r.rounds as f64).sum::<f64>() / deals.len() as f64
    };
    [
        mean(|r| r.max_gains),
        mean(|r| r.min_gains),
        mean(|r| r.gains_init),
        mean(|r| r.gains_interest),
        mean(|r| r.gains_final),
        mean(|r| r.percentage),
        mean(|r| r.rel_percentage),
        rounds,
        deals.len() as f64,
    ]
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    /// Per indicator: (mean across runs, std across runs).
    pub values: Vec<(f64, f64)>,
}

impl Summary {
    pub fn from_runs(runs: &[Vec<CustomerRecord>]) -> Self {
        let per_run: Vec<[f64; 9]> = runs.iter().map(|r| run_indicators(r)).collect();
        let values = (0..INDICATORS.len())
            .map(|i| mean_std(&per_run.iter().map(|r| r[i]).collect::<Vec<_>>()))
            .collect();
        Self { values }
    }

    pub fn get(&self, indicator: &str) -> (f64, f64) {
        let i = INDICATORS
            .iter()
            .position(|&x| x == indicator)
            .unwrap_or_else(|| panic!("unknown indicator {indicator}"));
        self.values[i]
    }
}

/// Trailing moving average; the first `window - 1` entries average what is available.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for i in 0..xs.len() {
        sum += xs[i];
        if i >= window {
            sum -= xs[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Moving average of relative percentage per run, then averaged across runs.
pub fn moving_rel_percentage(runs: &[Vec<CustomerRecord>], window: usize) -> Vec<f64> {
    let len = runs.iter().map(Vec::len).min().unwrap_or(0);
    let mut acc = vec![0.0; len];
    for run in runs {
        let xs: Vec<f64> = run.iter().map(|r| r.rel_percentage).collect();
        for (a, m) in acc.iter_mut().zip(moving_average(&xs, window)) {
            *a += m;
        }
    }
    acc.iter().map(|a| a / runs.len() as f64).collect()
}
