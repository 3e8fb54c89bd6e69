//! Orderings of a bundle's neighborhood, used by the shop to pick what to
//! recommend next.
//!
//! Three rankers share the [`NeighborRanker`] interface:
//!
//! * [`LearnedRanker`] keeps a [`GainsTable`] of observed gains differences
//!   between adjacent bundles, pooled across customers, and orders candidates
//!   by sequential softmax sampling.
//! * [`OracleRanker`] knows the generating preference distribution and ranks
//!   by the expected gains of each candidate given the customer is willing to
//!   pay at least her current offer on the interest bundle.
//! * [`BenchmarkRanker`] shuffles uniformly.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io;
use std::str::FromStr;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{hamming, Bundle, Price};
use crate::error::{Error, Result};
use crate::mvn::MvnSampler;
use crate::preferences::{PreferencePopulation, ShopValuation};
use crate::seeds::{rng_from, tag, SimRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MU")]
    Mu,
    S,
    B,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Mu, Method::S, Method::B];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mu => "MU",
            Method::S => "S",
            Method::B => "B",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MU" | "μ" => Ok(Method::Mu),
            "S" => Ok(Method::S),
            "B" => Ok(Method::B),
            _ => Err(Error::Config(format!("unknown method {s:?} (expected MU, S or B)"))),
        }
    }
}

/// A recommendation and the customer's answer to it.
///
/// `from_price` is the customer's last offer on `from` just before `to` was
/// recommended; `to_price` is her counter-offer on `to`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exchange {
    pub from: Bundle,
    pub from_price: Price,
    pub to: Bundle,
    pub to_price: Price,
}

/// One observed change in the shop's net when moving between adjacent bundles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainingExample {
    pub from_bundle: Bundle,
    pub to_bundle: Bundle,
    pub price_delta: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningMean {
    mean: f64,
    count: u64,
}

impl RunningMean {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.mean += (x - self.mean) / self.count as f64;
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

/// Running means of gains differences, keyed by ordered bundle pair.
#[derive(Clone, Debug, Default)]
pub struct GainsTable {
    entries: BTreeMap<(Bundle, Bundle), RunningMean>,
    examples: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotRow {
    from_bits: String,
    to_bits: String,
    mean: f64,
    count: u64,
}

impl GainsTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, example: TrainingExample) -> Result<()> {
        if hamming(example.from_bundle, example.to_bundle)? != 1 {
            return Err(Error::Usage(format!(
                "training example between non-adjacent bundles {} and {}",
                example.from_bundle, example.to_bundle
            )));
        }
        self.entries
            .entry((example.from_bundle, example.to_bundle))
            .or_default()
            .push(example.price_delta);
        self.examples += 1;
        Ok(())
    }

    /// Stores both directions of one exchange.
    pub fn record_exchange(&mut self, e: &Exchange, sv: &ShopValuation) -> Result<()> {
        if hamming(e.from, e.to)? != 1 {
            return Err(Error::Usage(format!(
                "exchange between non-adjacent bundles {} and {}",
                e.from, e.to
            )));
        }
        let delta = (e.to_price - sv.value(e.to)) - (e.from_price - sv.value(e.from));
        self.record(TrainingExample {
            from_bundle: e.from,
            to_bundle: e.to,
            price_delta: delta,
        })?;
        self.record(TrainingExample {
            from_bundle: e.to,
            to_bundle: e.from,
            price_delta: -delta,
        })
    }

    /// Estimated gain in the shop's net from moving `from` → `to`; 0 when unseen.
    pub fn estimate(&self, from: Bundle, to: Bundle) -> f64 {
        self.entries.get(&(from, to)).map_or(0.0, RunningMean::mean)
    }

    pub fn count(&self, from: Bundle, to: Bundle) -> u64 {
        self.entries.get(&(from, to)).map_or(0, RunningMean::count)
    }

    /// Total examples recorded, two per exchange.
    pub fn examples(&self) -> u64 {
        self.examples
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Bundle, Bundle, RunningMean)> + '_ {
        self.entries.iter().map(|(&(a, b), &m)| (a, b, m))
    }

    /// Writes `from_bits,to_bits,mean,count` rows.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for (from, to, m) in self.iter() {
            out.serialize(SnapshotRow {
                from_bits: from.to_bit_string(),
                to_bits: to.to_bit_string(),
                mean: m.mean,
                count: m.count,
            })
            .map_err(|e| Error::Config(format!("writing gains table: {e}")))?;
        }
        out.flush()
            .map_err(|e| Error::Config(format!("writing gains table: {e}")))
    }

    pub fn read_csv<R: io::Read>(r: R) -> Result<Self> {
        let mut table = Self::new();
        for row in csv::Reader::from_reader(r).deserialize() {
            let row: SnapshotRow =
                row.map_err(|e| Error::Config(format!("reading gains table: {e}")))?;
            let from = Bundle::parse_bit_string(&row.from_bits)?;
            let to = Bundle::parse_bit_string(&row.to_bits)?;
            if hamming(from, to)? != 1 {
                return Err(Error::Config(format!(
                    "gains table row {} -> {} is not between neighbors",
                    row.from_bits, row.to_bits
                )));
            }
            table.entries.insert(
                (from, to),
                RunningMean {
                    mean: row.mean,
                    count: row.count,
                },
            );
            table.examples += row.count;
        }
        Ok(table)
    }
}

/// Softmax temperature as a function of the number of recorded examples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LambdaSchedule {
    pub lambda0: f64,
    pub growth: f64,
    pub cap: f64,
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        Self {
            lambda0: 0.0,
            growth: 5e-7,
            cap: 5.0,
        }
    }
}

impl LambdaSchedule {
    pub fn value(&self, examples: u64) -> f64 {
        (self.lambda0 + self.growth * examples as f64).min(self.cap)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda0 >= 0.0
            && self.growth >= 0.0
            && self.cap >= self.lambda0
            && [self.lambda0, self.growth, self.cap].iter().all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid lambda schedule {self:?}")))
        }
    }
}

/// Softmax weights `exp(λ s_i) / Σ exp(λ s_j)`, computed after subtracting the max.
pub fn softmax_probabilities(scores: &[f64], lambda: f64) -> Vec<f64> {
    let max = scores
        .iter()
        .map(|s| lambda * s)
        .fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = scores.iter().map(|s| (lambda * s - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Orders `neighbors` by repeated softmax draws without replacement, scoring
/// each by the table's estimate for `from` → neighbor.
pub fn softmax_order<R: Rng + ?Sized>(
    table: &GainsTable,
    from: Bundle,
    neighbors: &[Bundle],
    lambda: f64,
    rng: &mut R,
) -> Vec<Bundle> {
    let mut left: Vec<Bundle> = neighbors.to_vec();
    let mut scores: Vec<f64> = left.iter().map(|&b| table.estimate(from, b)).collect();
    let mut out = Vec::with_capacity(left.len());
    while !left.is_empty() {
        let probs = softmax_probabilities(&scores, lambda);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = probs.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = i;
                break;
            }
        }
        out.push(left.remove(pick));
        scores.remove(pick);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleParams {
    /// Accepted draws per conditional estimate.
    pub accepted_samples: usize,
    /// Below this acceptance rate the unconditioned mean is used instead.
    pub min_acceptance: f64,
    /// Width of the price buckets estimates are cached under.
    pub price_bucket: f64,
    pub seed: u64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            accepted_samples: 20_000,
            min_acceptance: 1e-3,
            price_bucket: 1.0,
            seed: 0,
        }
    }
}

impl OracleParams {
    pub fn validate(&self) -> Result<()> {
        if self.accepted_samples == 0
            || !(self.min_acceptance > 0.0 && self.min_acceptance <= 1.0)
            || !(self.price_bucket > 0.0)
        {
            return Err(Error::Config(format!("invalid oracle parameters {self:?}")));
        }
        Ok(())
    }
}

/// Monte Carlo estimate of `E[v(b') | v(b) >= price]` for each `b'` in `targets`.
///
/// Falls back to the unconditioned means when fewer than `min_acceptance` of
/// the draws satisfy the condition.
pub fn conditional_means<R: Rng + ?Sized>(
    pop: &PreferencePopulation,
    given: Bundle,
    price: Price,
    targets: &[Bundle],
    params: &OracleParams,
    rng: &mut R,
) -> Vec<f64> {
    let mut bundles = Vec::with_capacity(targets.len() + 1);
    bundles.push(given);
    bundles.extend_from_slice(targets);
    let (mean, cov) = pop.value_marginal(&bundles);
    let unconditioned = mean[1..].to_vec();
    let sampler = match MvnSampler::new(mean, &cov) {
        Ok(s) => s,
        Err(e) => {
            warn!("oracle marginal for {given} is unusable ({e}); using unconditioned means");
            return unconditioned;
        }
    };
    let dim = sampler.dim();
    let mut z = vec![0.0; dim];
    let mut draw = vec![0.0; dim];
    let mut sums = vec![0.0; targets.len()];
    let mut accepted = 0usize;
    let mut draws = 0usize;
    let max_draws = (params.accepted_samples as f64 / params.min_acceptance).ceil() as usize;
    // Decide early on a hopeless condition instead of burning the full budget.
    let probe = max_draws.min(params.accepted_samples.max(1000) * 5);
    while accepted < params.accepted_samples && draws < max_draws {
        sampler.sample_into(rng, &mut z, &mut draw);
        draws += 1;
        if draw[0] >= price {
            accepted += 1;
            for (s, v) in sums.iter_mut().zip(&draw[1..]) {
                *s += v;
            }
        }
        if draws == probe && (accepted as f64) < params.min_acceptance * draws as f64 {
            break;
        }
    }
    if accepted == 0 || (accepted as f64) < params.min_acceptance * draws as f64 {
        warn!(
            "oracle acceptance {accepted}/{draws} for {given} at price {price:.3}; using unconditioned means"
        );
        return unconditioned;
    }
    sums.into_iter().map(|s| s / accepted as f64).collect()
}

/// Sorts by score descending, keeping bundle order among equal scores.
fn order_by_score(neighbors: &[Bundle], scores: &[f64]) -> Vec<Bundle> {
    let mut idx: Vec<usize> = (0..neighbors.len()).collect();
    idx.sort_by(|&i, &j| {
        scores[j]
            .total_cmp(&scores[i])
            .then(neighbors[i].cmp(&neighbors[j]))
    });
    idx.into_iter().map(|i| neighbors[i]).collect()
}

/// Ranks neighbors by `E[v_c(b') | v_c(from) >= price] - v_s(b')`.
pub fn s_oracle_order<R: Rng + ?Sized>(
    pop: &PreferencePopulation,
    sv: &ShopValuation,
    from: Bundle,
    price: Price,
    neighbors: &[Bundle],
    params: &OracleParams,
    rng: &mut R,
) -> Vec<Bundle> {
    let means = conditional_means(pop, from, price, neighbors, params, rng);
    let scores: Vec<f64> = neighbors
        .iter()
        .zip(&means)
        .map(|(&b, m)| m - sv.value(b))
        .collect();
    order_by_score(neighbors, &scores)
}

pub fn benchmark_order<R: Rng + ?Sized>(neighbors: &[Bundle], rng: &mut R) -> Vec<Bundle> {
    let mut out = neighbors.to_vec();
    out.shuffle(rng);
    out
}

/// Orders candidate recommendations and optionally learns from the answers.
pub trait NeighborRanker {
    fn method(&self) -> Method;

    /// Orders `neighbors` of `from`, best first. `price` is the customer's
    /// latest offer on `from`.
    fn rank(
        &mut self,
        from: Bundle,
        price: Price,
        neighbors: &[Bundle],
        sv: &ShopValuation,
        rng: &mut SimRng,
    ) -> Vec<Bundle>;

    fn record(&mut self, _exchange: &Exchange, _sv: &ShopValuation) {}

    fn begin_session(&mut self) {}
}

/// Softmax ordering over a gains table shared by every customer of a run.
#[derive(Clone, Debug, Default)]
pub struct LearnedRanker {
    pub table: GainsTable,
    pub schedule: LambdaSchedule,
}

impl LearnedRanker {
    pub fn new(schedule: LambdaSchedule) -> Self {
        Self {
            table: GainsTable::new(),
            schedule,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.schedule.value(self.table.examples())
    }
}

impl NeighborRanker for LearnedRanker {
    fn method(&self) -> Method {
        Method::Mu
    }

    fn rank(
        &mut self,
        from: Bundle,
        _price: Price,
        neighbors: &[Bundle],
        _sv: &ShopValuation,
        rng: &mut SimRng,
    ) -> Vec<Bundle> {
        softmax_order(&self.table, from, neighbors, self.lambda(), rng)
    }

    fn record(&mut self, exchange: &Exchange, sv: &ShopValuation) {
        // Exchanges come from recommendations, which are always adjacent.
        if let Err(e) = self.table.record_exchange(exchange, sv) {
            warn!("dropped exchange: {e}");
        }
    }
}

/// Ranks by the true distribution; estimates are cached per session under
/// (interest bundle, price bucket) and drawn from a stream seeded by that key.
#[derive(Clone, Debug)]
pub struct OracleRanker<'a> {
    pop: &'a PreferencePopulation,
    params: OracleParams,
    cache: HashMap<(Bundle, i64), Vec<Bundle>>,
}

impl<'a> OracleRanker<'a> {
    pub fn new(pop: &'a PreferencePopulation, params: OracleParams) -> Self {
        Self {
            pop,
            params,
            cache: HashMap::new(),
        }
    }
}

impl NeighborRanker for OracleRanker<'_> {
    fn method(&self) -> Method {
        Method::S
    }

    fn rank(
        &mut self,
        from: Bundle,
        price: Price,
        neighbors: &[Bundle],
        sv: &ShopValuation,
        _rng: &mut SimRng,
    ) -> Vec<Bundle> {
        let bucket = (price / self.params.price_bucket).floor() as i64;
        let full = self.cache.entry((from, bucket)).or_insert_with(|| {
            let all = crate::bundle::neighborhood(from);
            let mut rng = rng_from(
                self.params.seed,
                &[tag::ORACLE, from.bits() as u64, bucket as u64],
            );
            s_oracle_order(self.pop, sv, from, price, &all, &self.params, &mut rng)
        });
        full.iter().copied().filter(|b| neighbors.contains(b)).collect()
    }

    fn begin_session(&mut self) {
        self.cache.clear();
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BenchmarkRanker;

impl NeighborRanker for BenchmarkRanker {
    fn method(&self) -> Method {
        Method::B
    }

    fn rank(
        &mut self,
        _from: Bundle,
        _price: Price,
        neighbors: &[Bundle],
        _sv: &ShopValuation,
        rng: &mut SimRng,
    ) -> Vec<Bundle> {
        benchmark_order(neighbors, rng)
    }
}
