//! Brute-force consistency checks runnable from the command line.

use rand::Rng;

use bundleneg_core::background::softmax_probabilities;
use bundleneg_core::bundle::{all_bundles, Bundle};
use bundleneg_core::negotiation::{run_session, SessionConfig};
use bundleneg_core::preferences::{
    best_bundles, build_transform, customer_net, gains, sample_customer, sample_population,
    shop_net, CoefficientVector, CustomerValuation, PopulationParams, ShopParams, ShopValuation,
};
use bundleneg_core::seeds::{rng_from, SimRng};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// A random catalog size in `1..=6`, a customer drawn from a random
/// population, and a random shop.
pub fn random_instance(rng: &mut SimRng) -> (CustomerValuation, ShopValuation) {
    let n = rng.random_range(1..=6);
    let params = PopulationParams::for_catalog(n);
    let pop = sample_population(n, rng.random(), &params).expect("default population is valid");
    let cv = sample_customer(&pop, rng);
    let sv = ShopValuation::sample(n, &ShopParams::default(), rng).expect("default shop is valid");
    (cv, sv)
}

/// For every best bundle `b*` and every other bundle `b`, at random prices,
/// one side strictly prefers `(b*, p*)`; and moving from `b` to `b*` at
/// `p + v_s(b*) - v_s(b)` keeps the shop's net and raises the customer's.
pub fn pareto(instances: usize, seed: u64) -> Check {
    let mut rng = rng_from(seed, &[]);
    let mut failures = Vec::new();
    let mut cases = 0;
    for inst in 0..instances {
        let (cv, sv) = random_instance(&mut rng);
        let best = best_bundles(&cv, &sv);
        for b in all_bundles(cv.catalog_size()).unwrap() {
            if best.contains(b) {
                continue;
            }
            for &star in &best.bundles {
                cases += 1;
                let p: f64 = rng.random_range(-2000.0..4000.0);
                let p_star: f64 = rng.random_range(-2000.0..4000.0);
                let dominated = customer_net(&cv, b, p) < customer_net(&cv, star, p_star)
                    || shop_net(&sv, b, p) < shop_net(&sv, star, p_star);
                if !dominated {
                    failures.push(format!("instance {inst}: {b}@{p} is not dominated by {star}@{p_star}"));
                }
                let p2 = p + sv.value(star) - sv.value(b);
                let shop_gap = shop_net(&sv, star, p2) - shop_net(&sv, b, p);
                let scale = p.abs().max(sv.value(star)).max(1.0);
                if shop_gap.abs() > 1e-9 * scale {
                    failures.push(format!("instance {inst}: shop not indifferent ({shop_gap})"));
                }
                if customer_net(&cv, star, p2) <= customer_net(&cv, b, p) {
                    failures.push(format!("instance {inst}: customer not better off on {star}"));
                }
            }
        }
    }
    Check {
        name: "pareto",
        cases,
        failures,
    }
}

/// The subset-sum transform against term-by-term polynomial evaluation.
pub fn transform(instances: usize, seed: u64) -> Check {
    let mut rng = rng_from(seed, &[]);
    let mut failures = Vec::new();
    let mut cases = 0;
    for _ in 0..instances {
        let n = rng.random_range(1..=6);
        let t = build_transform(n).unwrap();
        let layout = t.layout();
        let values: Vec<f64> = (0..layout.len()).map(|_| rng.random_range(-100.0..100.0)).collect();
        let a = CoefficientVector::from_values(layout, values).unwrap();
        let via_t = t.apply(a.as_slice());
        for b in all_bundles(n).unwrap() {
            cases += 1;
            let direct = polynomial(n, &a, layout, b);
            let got = via_t[b.bits() as usize - 1];
            if (got - direct).abs() > 1e-9 * direct.abs().max(1.0) {
                failures.push(format!("n={n} {b}: {got} vs {direct}"));
            }
        }
    }
    Check {
        name: "transform",
        cases,
        failures,
    }
}

fn polynomial(
    n: usize,
    a: &CoefficientVector,
    layout: &bundleneg_core::preferences::CoefficientLayout,
    b: Bundle,
) -> f64 {
    let x = |i: usize| if b.bits() & (1 << i) != 0 { 1.0 } else { 0.0 };
    let mut v = a.get(layout, &[]);
    for i in 0..n {
        v += a.get(layout, &[i]) * x(i);
        for j in i + 1..n {
            v += a.get(layout, &[i, j]) * x(i) * x(j);
            for k in j + 1..n {
                v += a.get(layout, &[i, j, k]) * x(i) * x(j) * x(k);
            }
        }
    }
    v
}

/// Best bundles against an independent maximum over all bundles.
pub fn best_bundle_scan(instances: usize, seed: u64) -> Check {
    let mut rng = rng_from(seed, &[]);
    let mut failures = Vec::new();
    for inst in 0..instances {
        let (cv, sv) = random_instance(&mut rng);
        let best = best_bundles(&cv, &sv);
        let all = all_bundles(cv.catalog_size()).unwrap();
        let max = all.iter().map(|&b| gains(&cv, &sv, b)).fold(f64::NEG_INFINITY, f64::max);
        let expected: Vec<Bundle> = all.into_iter().filter(|&b| gains(&cv, &sv, b) == max).collect();
        if expected != best.bundles || max != best.max_gains {
            failures.push(format!("instance {inst}: {:?} vs {:?}", best.bundles, expected));
        }
    }
    Check {
        name: "best_bundles",
        cases: instances,
        failures,
    }
}

/// Fixed hand-computed values.
pub fn hand_values() -> Check {
    let mut failures = Vec::new();
    let p = softmax_probabilities(&[1.0, 0.0], 1.0);
    if (p[0] - 0.7310585786300049).abs() > 1e-12 {
        failures.push(format!("softmax first-pick {}", p[0]));
    }
    let p = softmax_probabilities(&[4.0, -2.0, 0.5, 9.0], 0.0);
    if p.iter().any(|x| (x - 0.25).abs() > 1e-15) {
        failures.push(format!("softmax at zero temperature {p:?}"));
    }
    // Customer values the single good at 100, the shop at 50; both use TDF.
    let cv = CustomerValuation::from_values(1, vec![100.0]).unwrap();
    let sv = ShopValuation::new(vec![50.0], [0.0; 3]).unwrap();
    let cfg = SessionConfig {
        breakdown_prob: 0.0,
        ..SessionConfig::default()
    };
    let b = Bundle::from_goods(1, &[0]).unwrap();
    let rep = run_session(&cv, &sv, b, &cfg, None, &mut rng_from(0, &[]));
    let deal = rep.outcome.deal.map(|(_, p)| p);
    if rep.outcome.rounds != 14 || deal.map_or(true, |p| (p - 66.92642186245412).abs() > 1e-9) {
        failures.push(format!("hand session: {} rounds at {deal:?}", rep.outcome.rounds));
    }
    Check {
        name: "hand_values",
        cases: 3,
        failures,
    }
}

pub fn run_all(instances: usize, seed: u64) -> Vec<Check> {
    vec![
        transform(instances, seed),
        best_bundle_scan(instances, seed ^ 1),
        pareto(instances, seed ^ 2),
        hand_values(),
    ]
}
