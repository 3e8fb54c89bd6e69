//! Alternating-offers protocol between a customer and the shop.
//!
//! Each loop iteration `k` runs:
//!
//! 1. the customer offers a price for the bundle on the table;
//! 2. the shop accepts, or
//! 3. the session breaks down with the exogenous probability, or
//! 4. the shop counter-offers on the current bundle, the interest bundle, or a
//!    recommended alternative;
//! 5. the customer accepts the counter-offer or the loop repeats.
//!
//! Both strategies measure time in loop iterations, so the shop's ask on a
//! newly recommended bundle uses the current iteration, not a fresh clock.

use serde::{Deserialize, Serialize};

use crate::background::NeighborRanker;
use crate::bundle::{Bundle, Price};
use crate::foreground::{RecommenderState, ShopAction};
use crate::preferences::{CustomerValuation, ShopValuation};
use crate::seeds::SimRng;
use rand::{Rng, SeedableRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Customer,
    Shop,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::Customer => Role::Shop,
            Role::Shop => Role::Customer,
        }
    }

    /// Net monetary value of trading a bundle worth `valuation` to this role at `price`.
    pub fn net(self, valuation: f64, price: Price) -> f64 {
        match self {
            Role::Customer => valuation - price,
            Role::Shop => price - valuation,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Offer {
    pub bundle: Bundle,
    pub price: Price,
    pub proposer: Role,
    /// Index of the offer within its history.
    pub round: usize,
}

/// Offers in the order they were made; each answers the previous one.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    offers: Vec<Offer>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an offer, assigning its round index.
    ///
    /// # Panics
    ///
    /// If `proposer` made the previous offer as well.
    pub fn push(&mut self, bundle: Bundle, price: Price, proposer: Role) -> Offer {
        if let Some(last) = self.offers.last() {
            assert_ne!(last.proposer, proposer, "offers must alternate");
        }
        let offer = Offer {
            bundle,
            price,
            proposer,
            round: self.offers.len(),
        };
        self.offers.push(offer);
        offer
    }

    pub fn offers(&self) -> &[Offer] {
        &self.offers
    }

    pub fn len(&self) -> usize {
        self.offers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offers.is_empty()
    }

    pub fn last(&self) -> Option<&Offer> {
        self.offers.last()
    }

    pub fn by(&self, role: Role) -> impl Iterator<Item = &Offer> {
        self.offers.iter().filter(move |o| o.proposer == role)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "TDF")]
    Tdf,
    #[serde(rename = "TFTM")]
    Tftm,
}

/// Concession strategy parameters.
///
/// `gap_init` is the opening price as a fraction of the valuation (0.5 opens
/// at half, 1.5 at one and a half); the gap to the valuation then closes as
/// `exp(-delta t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyParams {
    pub kind: StrategyKind,
    pub gap_init: f64,
    pub delta: f64,
}

impl StrategyParams {
    pub fn customer_tdf() -> Self {
        Self {
            kind: StrategyKind::Tdf,
            gap_init: 0.5,
            delta: 0.03,
        }
    }

    pub fn customer_tftm() -> Self {
        Self {
            kind: StrategyKind::Tftm,
            gap_init: 0.5,
            delta: 1.0,
        }
    }

    pub fn shop_tdf() -> Self {
        Self {
            kind: StrategyKind::Tdf,
            gap_init: 1.5,
            delta: 0.03,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.gap_init > 0.0 && self.delta > 0.0 && self.gap_init.is_finite() && self.delta.is_finite()
    }
}

/// Time-dependent-fraction price: `v + (gap_init - 1) |v| exp(-delta t)`.
///
/// The gap is a fraction of the valuation's magnitude so a bargainer with a
/// negative valuation still approaches it from its own side.
pub fn tdf_price(valuation: f64, params: &StrategyParams, t: usize) -> Price {
    valuation + (params.gap_init - 1.0) * valuation.abs() * (-params.delta * t as f64).exp()
}

/// Improvement in `role`'s own net value between the opponent's last two offers.
pub fn perceived_improvement(
    role: Role,
    own_value: &dyn Fn(Bundle) -> f64,
    opponent_offers: &[Offer],
) -> Option<f64> {
    match opponent_offers {
        [.., prev, last] => Some(
            role.net(own_value(last.bundle), last.price) - role.net(own_value(prev.bundle), prev.price),
        ),
        _ => None,
    }
}

/// Tit-for-tat-monotone-fraction price for `current`.
///
/// The bargainer's position is the net value of its own last offer. The
/// perceived improvement of the opponent's latest offer, never negative, is
/// given up from that net, which never drops below zero. On an unchanged
/// bundle this moves the last price by exactly the concession; after a bundle
/// switch the same net is kept on the new bundle.
pub fn tftm_price(
    role: Role,
    own_value: &dyn Fn(Bundle) -> f64,
    current: Bundle,
    opponent_offers: &[Offer],
    own_last: &Offer,
) -> Price {
    let concession = perceived_improvement(role, own_value, opponent_offers)
        .unwrap_or(0.0)
        .max(0.0);
    let net = role.net(own_value(own_last.bundle), own_last.price);
    let net = (net - concession).max(0.0);
    match role {
        Role::Customer => own_value(current) - net,
        Role::Shop => own_value(current) + net,
    }
}

/// Standard alternating-offers acceptance: take the incoming offer when it is
/// worth at least as much as the counter-offer the responder would make.
pub fn accepts(role: Role, valuation: f64, incoming_price: Price, planned_counter_price: Price) -> bool {
    role.net(valuation, incoming_price) >= role.net(valuation, planned_counter_price)
}

/// A bargainer's price-setting side: role, strategy, and own valuations.
pub struct Bargainer<'a> {
    pub role: Role,
    pub strategy: StrategyParams,
    pub valuation: &'a dyn Fn(Bundle) -> f64,
}

impl Bargainer<'_> {
    /// Price this bargainer would offer for `bundle` at iteration `t`.
    pub fn price(&self, bundle: Bundle, t: usize, history: &History) -> Price {
        let v = (self.valuation)(bundle);
        let own_last = history.by(self.role).last().copied();
        match (self.strategy.kind, own_last) {
            (StrategyKind::Tdf, _) | (StrategyKind::Tftm, None) => tdf_price(v, &self.strategy, t),
            (StrategyKind::Tftm, Some(last)) => {
                let opponent: Vec<Offer> = history.by(self.role.other()).copied().collect();
                tftm_price(self.role, self.valuation, bundle, &opponent, &last)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionResult {
    Deal,
    Breakdown,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub result: SessionResult,
    /// The last offer on the table when the session ended.
    pub final_offer: Offer,
    /// Loop iterations started (customer offers made).
    pub rounds: usize,
    pub deal: Option<(Bundle, Price)>,
}

impl SessionOutcome {
    pub fn is_deal(&self) -> bool {
        self.result == SessionResult::Deal
    }

    pub fn final_bundle(&self) -> Bundle {
        self.final_offer.bundle
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceEvent {
    Offer,
    Accept,
    Recommend,
    Breakdown,
}

/// One line of a session trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub round: usize,
    pub proposer: Role,
    pub bundle: Bundle,
    pub price: Price,
    pub event: TraceEvent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    /// Impact of a recommendation, filled in once the customer answers it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<u8>,
}

impl TraceRecord {
    fn plain(offer: &Offer, event: TraceEvent) -> Self {
        Self {
            round: offer.round,
            proposer: offer.proposer,
            bundle: offer.bundle,
            price: offer.price,
            event,
            delta_t: None,
            probability: None,
            sign: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub breakdown_prob: f64,
    pub customer: StrategyParams,
    pub shop: StrategyParams,
    /// Iterations after which the session is treated as broken down.
    pub max_rounds: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            breakdown_prob: 0.02,
            customer: StrategyParams::customer_tdf(),
            shop: StrategyParams::shop_tdf(),
            max_rounds: 10_000,
        }
    }
}

/// Everything a finished session leaves behind.
#[derive(Clone, Debug)]
pub struct SessionReport {
    pub outcome: SessionOutcome,
    pub history: History,
    pub trace: Vec<TraceRecord>,
    /// The recommender's interest bundle at the end, when one was running.
    pub interest: Option<Bundle>,
}

/// Runs one customer through the protocol.
///
/// With `ranker = None` the shop never changes the bundle.
pub fn run_session(
    cv: &CustomerValuation,
    sv: &ShopValuation,
    initial: Bundle,
    config: &SessionConfig,
    mut ranker: Option<&mut dyn NeighborRanker>,
    rng: &mut SimRng,
) -> SessionReport {
    let customer_value = |b: Bundle| cv.value(b);
    let shop_value = |b: Bundle| sv.value(b);
    let customer = Bargainer {
        role: Role::Customer,
        strategy: config.customer,
        valuation: &customer_value,
    };
    let shop = Bargainer {
        role: Role::Shop,
        strategy: config.shop,
        valuation: &shop_value,
    };

    let mut history = History::new();
    let mut trace = Vec::new();
    let mut recommender: Option<RecommenderState> = None;
    let mut last_recommend: Option<usize> = None;
    let mut current = initial;
    let mut next_bid = customer.price(current, 0, &history);

    // The recommender draws from its own stream so that breakdown draws line
    // up across rankers for the same customer.
    let mut rec_rng = SimRng::seed_from_u64(rng.random());
    if let Some(r) = ranker.as_deref_mut() {
        r.begin_session();
    }

    let finish = |result, final_offer: Offer, rounds, deal, history, trace, rec: Option<RecommenderState>| SessionReport {
        outcome: SessionOutcome {
            result,
            final_offer,
            rounds,
            deal,
        },
        history,
        trace,
        interest: rec.map(|r| r.interest()),
    };

    let mut k = 0usize;
    loop {
        let bid = history.push(current, next_bid, Role::Customer);
        trace.push(TraceRecord::plain(&bid, TraceEvent::Offer));

        if let Some(r) = ranker.as_deref_mut() {
            match recommender.as_mut() {
                None => recommender = Some(RecommenderState::open(&bid, r, sv, &mut rec_rng)),
                Some(state) => {
                    if let Some(sign) = state.observe_customer_offer(&bid, sv, r, &mut rec_rng) {
                        if let Some(i) = last_recommend.take() {
                            trace[i].sign = Some(sign);
                        }
                    }
                }
            }
        }

        let planned_ask = shop.price(current, k, &history);
        if accepts(Role::Shop, sv.value(current), bid.price, planned_ask) {
            trace.push(TraceRecord {
                proposer: Role::Shop,
                ..TraceRecord::plain(&bid, TraceEvent::Accept)
            });
            return finish(SessionResult::Deal, bid, k + 1, Some((bid.bundle, bid.price)), history, trace, recommender);
        }

        if rng.random::<f64>() < config.breakdown_prob || k + 1 >= config.max_rounds {
            trace.push(TraceRecord::plain(&bid, TraceEvent::Breakdown));
            return finish(SessionResult::Breakdown, bid, k + 1, None, history, trace, recommender);
        }

        let decision = match (ranker.as_deref_mut(), recommender.as_mut()) {
            (Some(r), Some(state)) => state.decide(&bid, sv, r, &mut rec_rng),
            _ => Default::default(),
        };
        let (bundle, event) = match decision.action {
            ShopAction::Stay => (current, TraceEvent::Offer),
            ShopAction::ReturnToInterest(b) => (b, TraceEvent::Offer),
            ShopAction::Recommend(b) => (b, TraceEvent::Recommend),
        };
        current = bundle;
        let ask_price = if bundle == bid.bundle {
            planned_ask
        } else {
            shop.price(bundle, k, &history)
        };
        let ask = history.push(bundle, ask_price, Role::Shop);
        let mut record = TraceRecord::plain(&ask, event);
        if event == TraceEvent::Recommend {
            record.delta_t = decision.delta_t;
            record.probability = decision.probability;
            last_recommend = Some(trace.len());
        }
        trace.push(record);

        next_bid = customer.price(current, k + 1, &history);
        if accepts(Role::Customer, cv.value(current), ask.price, next_bid) {
            trace.push(TraceRecord {
                proposer: Role::Customer,
                ..TraceRecord::plain(&ask, TraceEvent::Accept)
            });
            return finish(SessionResult::Deal, ask, k + 1, Some((ask.bundle, ask.price)), history, trace, recommender);
        }
        k += 1;
    }
}
