//! Acceptance run: one pass/fail line per criterion, nonzero exit on any failure.
//!
//! Runs without the libtest harness so the report is always printed.

use std::collections::HashMap;
use std::fs;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use statrs::distribution::{ChiSquared, ContinuousCDF};

use bundleneg_core::background::{
    benchmark_order, softmax_order, softmax_probabilities, GainsTable, Method, TrainingExample,
};
use bundleneg_core::bundle::{all_bundles, Bundle};
use bundleneg_core::foreground::{predict_rounds, recommend_probability};
use bundleneg_core::negotiation::{
    perceived_improvement, run_session, tdf_price, tftm_price, History, Role, SessionConfig, SessionResult,
    StrategyKind, StrategyParams,
};
use bundleneg_core::preferences::{
    build_transform, sample_customer, sample_population, CoefficientVector, CustomerValuation,
    PopulationParams, ShopValuation,
};
use bundleneg_core::seeds::rng_from;
use bundleneg_experiment::checks;
use bundleneg_experiment::config::ExperimentConfig;
use bundleneg_experiment::metrics::ratio;
use bundleneg_experiment::runner::{all_arms, run_arms, ArmResult};

struct Report {
    lines: Vec<(u8, bool, String)>,
}

impl Report {
    fn add(&mut self, id: u8, pass: bool, detail: String) {
        println!("criterion {id}: {} {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((id, pass, detail));
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn deciles(xs: &[f64]) -> (f64, f64) {
    let d = xs.len() / 10;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&xs[..d]), mean(&xs[xs.len() - d..]))
}

struct Desk {
    arms: HashMap<String, ArmResult>,
    window: usize,
    elapsed: Duration,
}

impl Desk {
    fn run() -> Self {
        let cfg = ExperimentConfig::default();
        let start = Instant::now();
        let results = run_arms(&cfg, &all_arms(&[StrategyKind::Tdf, StrategyKind::Tftm])).expect("desk run");
        Desk {
            elapsed: start.elapsed(),
            window: cfg.window,
            arms: results.into_iter().map(|r| (r.arm.to_string(), r)).collect(),
        }
    }

    fn mean(&self, method: Method, strategy: &str, indicator: &str) -> f64 {
        self.arms[&format!("{method}_{strategy}")].summary().get(indicator).0
    }

    fn curve(&self, method: Method, strategy: &str) -> Vec<f64> {
        self.arms[&format!("{method}_{strategy}")].moving_rel_percentage(self.window)
    }
}

const STRATEGIES: [&str; 2] = ["TDF", "TFTM"];

fn ordering(desk: &Desk, r: &mut Report) {
    let mut pass = desk.elapsed < Duration::from_secs(300);
    let mut detail = String::new();
    for s in STRATEGIES {
        let [mu, sv, b] = [Method::Mu, Method::S, Method::B].map(|m| desk.mean(m, s, "rel_percentage"));
        pass &= sv - mu > 0.02 && mu - b > 0.02;
        detail += &format!("{s}: S {sv:.4} MU {mu:.4} B {b:.4}; ");
    }
    detail += &format!("{:.0} s", desk.elapsed.as_secs_f64());
    r.add(1, pass, detail);
}

fn learning(desk: &Desk, r: &mut Report) {
    let mut pass = true;
    let mut detail = String::new();
    for s in STRATEGIES {
        let (first, last) = deciles(&desk.curve(Method::Mu, s));
        pass &= last - first > 0.05;
        detail += &format!("MU_{s} {first:.4} -> {last:.4}; ");
    }
    r.add(2, pass, detail);
}

fn gap_closing(desk: &Desk, r: &mut Report) {
    let mut pass = true;
    let mut detail = String::new();
    for s in STRATEGIES {
        let diff: Vec<f64> = desk
            .curve(Method::S, s)
            .iter()
            .zip(desk.curve(Method::Mu, s))
            .map(|(a, b)| a - b)
            .collect();
        let (first, last) = deciles(&diff);
        pass &= last < first;
        detail += &format!("{s} S-MU {first:.4} -> {last:.4}; ");
    }
    r.add(3, pass, detail);
}

fn tradeoff(desk: &Desk, r: &mut Report) {
    let mut pass = true;
    let mut detail = String::new();
    for m in Method::ALL {
        let get = |s, i| desk.mean(m, s, i);
        let deals = (get("TDF", "deals"), get("TFTM", "deals"));
        let rounds = (get("TDF", "rounds"), get("TFTM", "rounds"));
        let g = (get("TDF", "gains_final"), get("TFTM", "gains_final"));
        pass &= deals.1 > deals.0 && rounds.1 < rounds.0 && g.0 > g.1;
        detail += &format!(
            "{m} deals {:.1}/{:.1} rounds {:.2}/{:.2} gains {:.1}/{:.1}; ",
            deals.0, deals.1, rounds.0, rounds.1, g.0, g.1
        );
    }
    r.add(4, pass, format!("(TDF/TFTM) {detail}"));
}

fn beats_benchmark(desk: &Desk, r: &mut Report) {
    let mut pass = true;
    let mut detail = String::new();
    for s in STRATEGIES {
        let (b_rounds, b_deals) = (desk.mean(Method::B, s, "rounds"), desk.mean(Method::B, s, "deals"));
        for m in [Method::Mu, Method::S] {
            let (rounds, deals) = (desk.mean(m, s, "rounds"), desk.mean(m, s, "deals"));
            pass &= rounds < b_rounds && deals >= b_deals;
            detail += &format!("{m}_{s} {rounds:.2} rounds {deals:.1} deals; ");
        }
        detail += &format!("B_{s} {b_rounds:.2} rounds {b_deals:.1} deals; ");
    }
    r.add(5, pass, detail);
}

fn pareto(r: &mut Report) {
    let start = Instant::now();
    let c = checks::pareto(1000, 6);
    let elapsed = start.elapsed();
    let pass = c.passed() && elapsed < Duration::from_secs(10);
    r.add(
        6,
        pass,
        format!("{} pairs, {} failures, {:.2} s", c.cases, c.failures.len(), elapsed.as_secs_f64()),
    );
}

fn formulas(r: &mut Report) {
    let mut failures: Vec<String> = Vec::new();
    let mut extra: Vec<String> = Vec::new();
    let mut expect = |name: &str, got: f64, want: f64| {
        if !close(got, want) {
            failures.push(format!("{name}: {got} vs {want}"));
        }
    };

    // Valuation polynomial: 1 + 2 x0 + 3 x1 + 4 x0 x1.
    let t = build_transform(2).unwrap();
    let layout = t.layout();
    let mut a = CoefficientVector::zeros(layout);
    for (goods, v) in [(&[][..], 1.0), (&[0][..], 2.0), (&[1][..], 3.0), (&[0, 1][..], 4.0)] {
        a.set(layout, goods, v).unwrap();
    }
    let cv = CustomerValuation::from_coefficients(&t, &a);
    for (goods, want) in [(&[0][..], 3.0), (&[1][..], 4.0), (&[0, 1][..], 10.0)] {
        expect("valuation", cv.value(Bundle::from_goods(2, goods).unwrap()), want);
    }

    // Shop valuation with size discounts.
    let sv = ShopValuation::new(vec![10.0, 20.0, 30.0, 40.0], [1.0, 5.0, 9.0]).unwrap();
    for (goods, want) in [(&[1][..], 19.0), (&[0, 1][..], 25.0), (&[0, 1, 2][..], 51.0), (&[0, 1, 2, 3][..], 100.0)] {
        expect("shop valuation", sv.value(Bundle::from_goods(4, goods).unwrap()), want);
    }

    // Subset-sum transform against direct evaluation.
    extra.extend(checks::transform(200, 3).failures);

    // Concession curve.
    let cust = StrategyParams::customer_tdf();
    let shop = StrategyParams::shop_tdf();
    expect("gap customer t=0", tdf_price(100.0, &cust, 0), 50.0);
    expect("gap shop t=0", tdf_price(100.0, &shop, 0), 150.0);
    expect("gap customer t=10", tdf_price(100.0, &cust, 10), 100.0 - 50.0 * (-0.3f64).exp());
    expect("gap shop t=20", tdf_price(80.0, &shop, 20), 80.0 + 40.0 * (-0.6f64).exp());

    // Tit-for-tat concession.
    let b = Bundle::from_goods(1, &[0]).unwrap();
    let value = |_: Bundle| 100.0;
    let mut h = History::new();
    h.push(b, 50.0, Role::Customer);
    h.push(b, 150.0, Role::Shop);
    let own_last = h.push(b, 52.0, Role::Customer);
    h.push(b, 143.0, Role::Shop);
    let shop_offers: Vec<_> = h.by(Role::Shop).copied().collect();
    expect("perceived improvement", perceived_improvement(Role::Customer, &value, &shop_offers).unwrap(), 7.0);
    expect("tftm concedes 7", tftm_price(Role::Customer, &value, b, &shop_offers, &own_last), 59.0);
    let worse = [shop_offers[0], shop_offers[1], bundleneg_core::negotiation::Offer { price: 149.0, ..shop_offers[1] }];
    expect("tftm never retreats", tftm_price(Role::Customer, &value, b, &worse[1..], &own_last), 52.0);

    // Predicted rounds and recommendation probability.
    expect("rounds", predict_rounds(100.0, 60.0, 50.0), 4.0);
    expect("rounds", predict_rounds(200.0, 140.0, 130.0), 6.0);
    expect("probability", recommend_probability(4.0 * 2f64.ln()), 0.5);
    expect("probability", recommend_probability(4.0), 1.0 - (-1.0f64).exp());
    expect("probability", recommend_probability(8.0), 1.0 - (-2.0f64).exp());

    // Softmax first-pick probabilities.
    expect("softmax", softmax_probabilities(&[1.0, 0.0], 1.0)[0], std::f64::consts::E / (std::f64::consts::E + 1.0));
    expect("softmax", softmax_probabilities(&[2.0, 0.0, 0.0], 0.5)[0], 1f64.exp() / (1f64.exp() + 2.0));
    expect("softmax", softmax_probabilities(&[3.0, 1.0], 0.0)[1], 0.5);

    // Percentages.
    expect("rel percentage", ratio(863.33, -1023.61, 1202.81), 1886.94 / 2226.42);
    expect("percentage", ratio(50.0, 0.0, 200.0), 0.25);
    expect("degenerate ratio", ratio(5.0, 5.0, 5.0), 1.0);

    extra.extend(checks::hand_values().failures);
    failures.extend(extra);
    let pass = failures.is_empty();
    r.add(7, pass, if pass { "all hand cases match".into() } else { failures.join("; ") });
}

fn statistics(r: &mut Report) {
    let mut notes = Vec::new();
    let mut pass = true;

    // Bundle valuation moments.
    let n = 4;
    let pop = sample_population(n, 31, &PopulationParams::for_catalog(n)).unwrap();
    let bundles = all_bundles(n).unwrap();
    let picked = [bundles[0], bundles[2], bundles[6], bundles[14]];
    let (mean, cov) = pop.value_marginal(&picked);
    let draws = 100_000;
    let mut rng = rng_from(31, &[1]);
    let xs: Vec<Vec<f64>> = (0..draws)
        .map(|_| {
            let cv = sample_customer(&pop, &mut rng);
            picked.iter().map(|&b| cv.value(b)).collect()
        })
        .collect();
    let nf = draws as f64;
    let m: Vec<f64> = (0..4).map(|i| xs.iter().map(|x| x[i]).sum::<f64>() / nf).collect();
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        worst = worst.max((m[i] - mean[i]).abs() / (cov[(i, i)] / nf).sqrt());
        for j in i..4 {
            let c = xs.iter().map(|x| (x[i] - m[i]) * (x[j] - m[j])).sum::<f64>() / (nf - 1.0);
            let se = ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)].powi(2)) / nf).sqrt();
            worst = worst.max((c - cov[(i, j)]).abs() / se);
        }
    }
    pass &= worst < 3.0;
    notes.push(format!("moments worst {worst:.2} SE"));

    // Softmax at zero and very large temperature.
    let mut rng = rng_from(32, &[]);
    let from = Bundle::from_goods(n, &[0]).unwrap();
    let items: Vec<Bundle> = [1, 2, 3].map(|g| Bundle::from_goods(n, &[0, g]).unwrap()).to_vec();
    let mut table = GainsTable::new();
    for (&to, score) in items.iter().zip([3.0, -1.0, 7.0]) {
        table
            .record(TrainingExample {
                from_bundle: from,
                to_bundle: to,
                price_delta: score,
            })
            .unwrap();
    }
    let mut first = [0usize; 3];
    let trials = 30_000;
    for _ in 0..trials {
        let order = softmax_order(&table, from, &items, 0.0, &mut rng);
        first[items.iter().position(|&b| b == order[0]).unwrap()] += 1;
    }
    let expected = trials as f64 / 3.0;
    let chi: f64 = first.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let p_uniform = 1.0 - ChiSquared::new(2.0).unwrap().cdf(chi);
    let argmax = (0..1000).all(|_| {
        softmax_order(&table, from, &items, 1e3, &mut rng) == vec![items[2], items[0], items[1]]
    });
    pass &= p_uniform > 0.01 && argmax;
    notes.push(format!("softmax uniform p={p_uniform:.3}, argmax {argmax}"));

    // Benchmark permutations.
    let three = &bundles[..3];
    let mut counts: HashMap<Vec<Bundle>, usize> = HashMap::new();
    let trials = 60_000;
    for _ in 0..trials {
        *counts.entry(benchmark_order(three, &mut rng)).or_default() += 1;
    }
    let expected = trials as f64 / 6.0;
    let chi: f64 = counts.values().map(|&o| (o as f64 - expected).powi(2) / expected).sum::<f64>()
        + (6 - counts.len()) as f64 * expected;
    let p_perm = 1.0 - ChiSquared::new(5.0).unwrap().cdf(chi);
    pass &= p_perm > 0.01;
    notes.push(format!("permutations p={p_perm:.3}"));

    // Breakdown tail with no deal possible.
    let cv = CustomerValuation::from_values(1, vec![10.0]).unwrap();
    let sv = ShopValuation::new(vec![100.0], [0.0; 3]).unwrap();
    let b = Bundle::from_goods(1, &[0]).unwrap();
    let q = 0.02;
    let cfg = SessionConfig {
        breakdown_prob: q,
        max_rounds: 100_000,
        ..SessionConfig::default()
    };
    let sessions = 10_000;
    let rounds: Vec<usize> = (0..sessions)
        .map(|s| {
            let rep = run_session(&cv, &sv, b, &cfg, None, &mut rng_from(33, &[s]));
            assert_eq!(rep.outcome.result, SessionResult::Breakdown);
            rep.outcome.rounds
        })
        .collect();
    let mut tail_ok = true;
    for k in [25usize, 50, 100, 200] {
        let p = (1.0 - q).powi(k as i32);
        let observed = rounds.iter().filter(|&&x| x > k).count() as f64 / sessions as f64;
        tail_ok &= (observed - p).abs() < 4.0 * (p * (1.0 - p) / sessions as f64).sqrt();
    }
    pass &= tail_ok;
    notes.push(format!("geometric tail {tail_ok}"));

    r.add(8, pass, notes.join(", "));
}

fn determinism(r: &mut Report) {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let status = Command::new(env!("CARGO_BIN_EXE_bundleneg"))
            .args(["compare", "--customers", "200", "--runs", "2", "--seed", "11", "--output"])
            .arg(d.path())
            .output()
            .expect("binary runs")
            .status;
        assert!(status.success());
    }
    let mut names: Vec<_> = fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    names.sort();
    let differing: Vec<String> = names
        .iter()
        .filter(|n| fs::read(dirs[0].path().join(n)).ok() != fs::read(dirs[1].path().join(n)).ok())
        .map(|n| n.to_string_lossy().into_owned())
        .collect();
    r.add(
        9,
        differing.is_empty() && !names.is_empty(),
        format!("{} csv files compared, differing: {differing:?}", names.len()),
    );
}

fn main() -> ExitCode {
    let mut r = Report { lines: Vec::new() };
    let desk = Desk::run();
    ordering(&desk, &mut r);
    learning(&desk, &mut r);
    gap_closing(&desk, &mut r);
    tradeoff(&desk, &mut r);
    beats_benchmark(&desk, &mut r);
    pareto(&mut r);
    formulas(&mut r);
    statistics(&mut r);
    determinism(&mut r);
    let failed: Vec<u8> = r.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", r.lines.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
