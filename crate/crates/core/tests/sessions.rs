//! Properties of full sessions with a recommending shop.

use bundleneg_core::background::{
    BenchmarkRanker, LambdaSchedule, LearnedRanker, NeighborRanker, OracleParams, OracleRanker,
};
use bundleneg_core::bundle::{all_bundles, hamming, Bundle};
use bundleneg_core::negotiation::{run_session, Role, SessionConfig, TraceEvent};
use bundleneg_core::preferences::{sample_customer, sample_population, PopulationParams, ShopValuation};
use bundleneg_core::seeds::rng_from;
use rand::Rng;

fn check_sessions(ranker: &mut dyn NeighborRanker, customers: usize, seed: u64) -> usize {
    let n = 6;
    let params = PopulationParams::for_catalog(n);
    let pop = sample_population(n, seed, &params).unwrap();
    let mut rng = rng_from(seed, &[1]);
    let sv = ShopValuation::sample(n, &params.shop, &mut rng).unwrap();
    let all = all_bundles(n).unwrap();
    let cfg = SessionConfig::default();
    let mut recommendations = 0;
    for c in 0..customers {
        let cv = sample_customer(&pop, &mut rng);
        let initial = all[rng.random_range(0..all.len())];
        let rep = run_session(&cv, &sv, initial, &cfg, Some(&mut *ranker), &mut rng_from(seed, &[2, c as u64]));
        let trace = &rep.trace;
        assert_eq!(trace[0].bundle, initial);
        for (i, r) in trace.iter().enumerate() {
            if r.event != TraceEvent::Recommend {
                continue;
            }
            recommendations += 1;
            assert_eq!(r.proposer, Role::Shop);
            let prev = &trace[i - 1];
            assert_eq!(prev.proposer, Role::Customer);
            assert_eq!(hamming(prev.bundle, r.bundle).unwrap(), 1, "customer {c}: {} -> {}", prev.bundle, r.bundle);
            // Owed recommendations follow a failed one without a draw.
            if let Some(p) = r.probability {
                assert!((0.0..=1.0).contains(&p));
            }
        }
        // Customer offers after a shop offer always follow the shop's bundle.
        for w in trace.windows(2) {
            if w[0].proposer == Role::Shop && w[0].event != TraceEvent::Accept && w[1].event == TraceEvent::Offer {
                assert_eq!(w[1].bundle, w[0].bundle);
            }
        }
        if let Some((b, p)) = rep.outcome.deal {
            assert!(p >= sv.value(b) - 1e-9, "customer {c}: price {p} below cost {}", sv.value(b));
            assert!(p <= cv.value(b) + 1e-9, "customer {c}: price {p} above value {}", cv.value(b));
        }
    }
    recommendations
}

#[test]
fn learned_ranker_sessions_are_well_formed() {
    let mut r = LearnedRanker::new(LambdaSchedule::default());
    assert!(check_sessions(&mut r, 300, 11) > 0);
    assert!(r.table.examples() > 0);
}

#[test]
fn benchmark_ranker_sessions_are_well_formed() {
    let mut r = BenchmarkRanker;
    assert!(check_sessions(&mut r, 300, 12) > 0);
}

#[test]
fn oracle_ranker_sessions_are_well_formed() {
    let params = PopulationParams::for_catalog(6);
    let pop = sample_population(6, 13, &params).unwrap();
    let mut r = OracleRanker::new(
        &pop,
        OracleParams {
            accepted_samples: 2000,
            ..OracleParams::default()
        },
    );
    assert!(check_sessions(&mut r, 100, 13) > 0);
}

#[test]
fn without_a_ranker_the_bundle_never_changes() {
    let n = 4;
    let params = PopulationParams::for_catalog(n);
    let pop = sample_population(n, 3, &params).unwrap();
    let mut rng = rng_from(3, &[]);
    let sv = ShopValuation::sample(n, &params.shop, &mut rng).unwrap();
    let b = Bundle::from_goods(n, &[1, 2]).unwrap();
    for c in 0..200 {
        let cv = sample_customer(&pop, &mut rng);
        let rep = run_session(&cv, &sv, b, &SessionConfig::default(), None, &mut rng_from(3, &[c]));
        assert!(rep.trace.iter().all(|r| r.bundle == b && r.event != TraceEvent::Recommend));
        assert_eq!(rep.interest, None);
    }
}
