//! The shop's recommendation controller.
//!
//! *When* to recommend: from the customer's last two prices on the bundle on
//! the table, extrapolate the rounds left until her bid reaches the shop's
//! valuation, and recommend with probability `1 - exp(-0.25 Δt)`.
//!
//! *What* to recommend: the head of the recommendation set, the Hamming-1
//! neighborhood of the interest bundle ordered by a [`NeighborRanker`]. When
//! the customer's answer to a recommendation beats her best offer so far (from
//! the shop's point of view) the recommended bundle becomes the new interest
//! bundle. Otherwise the shop first returns to the interest bundle and
//! recommends the next candidate one round later, so every recommendation is
//! preceded by an offer on the interest bundle.

use std::collections::VecDeque;

use rand::Rng;

use crate::background::{Exchange, NeighborRanker};
use crate::bundle::{neighborhood, Bundle, Price};
use crate::negotiation::{Offer, Role};
use crate::preferences::ShopValuation;
use crate::seeds::SimRng;

/// Concessions at or below this are treated as no concession.
pub const NO_CONCESSION_EPS: f64 = 1e-9;

/// Predicted rounds until the customer's price reaches `shop_value`.
///
/// Returns 0 when it already has and `+inf` when she has stopped conceding.
pub fn predict_rounds(shop_value: f64, price: Price, prev_price: Price) -> f64 {
    if price >= shop_value {
        0.0
    } else if price - prev_price <= NO_CONCESSION_EPS {
        f64::INFINITY
    } else {
        (shop_value - price) / (price - prev_price)
    }
}

pub fn recommend_probability(delta_t: f64) -> f64 {
    if delta_t.is_nan() || delta_t <= 0.0 {
        0.0
    } else {
        1.0 - (-0.25 * delta_t).exp()
    }
}

/// 1 when `current` is strictly better for the shop than `best`.
pub fn sign(best: &Offer, current: &Offer, sv: &ShopValuation) -> u8 {
    let net = |o: &Offer| o.price - sv.value(o.bundle);
    u8::from(net(current) > net(best))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ShopAction {
    #[default]
    Stay,
    Recommend(Bundle),
    ReturnToInterest(Bundle),
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Decision {
    pub action: ShopAction,
    /// Set when the timing rule was evaluated.
    pub delta_t: Option<f64>,
    pub probability: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Pending {
    bundle: Bundle,
    /// The customer's offer on the interest bundle just before the recommendation.
    prior: Offer,
}

#[derive(Clone, Debug)]
pub struct RecommenderState {
    interest: Bundle,
    rec_set: VecDeque<Bundle>,
    best_customer_offer: Offer,
    pending: Option<Pending>,
    owe_recommendation: bool,
    recommended_since_interest: Vec<Bundle>,
    exhausted: bool,
    last_customer_offers: [Option<Offer>; 2],
}

impl RecommenderState {
    /// Starts from the customer's opening offer, which names the interest bundle.
    pub fn open(
        opening: &Offer,
        ranker: &mut dyn NeighborRanker,
        sv: &ShopValuation,
        rng: &mut SimRng,
    ) -> Self {
        debug_assert_eq!(opening.proposer, Role::Customer);
        let mut state = Self {
            interest: opening.bundle,
            rec_set: VecDeque::new(),
            best_customer_offer: *opening,
            pending: None,
            owe_recommendation: false,
            recommended_since_interest: Vec::new(),
            exhausted: false,
            last_customer_offers: [None, Some(*opening)],
        };
        state.rebuild_rec_set(opening.price, ranker, sv, rng);
        state
    }

    pub fn interest(&self) -> Bundle {
        self.interest
    }

    pub fn rec_set(&self) -> impl Iterator<Item = &Bundle> {
        self.rec_set.iter()
    }

    pub fn best_customer_offer(&self) -> &Offer {
        &self.best_customer_offer
    }

    pub fn pending_recommendation(&self) -> Option<Bundle> {
        self.pending.map(|p| p.bundle)
    }

    /// Replaces the recommendation set with the ranker's ordering of the
    /// interest bundle's neighborhood, minus bundles already tried around it.
    pub fn rebuild_rec_set(
        &mut self,
        price: Price,
        ranker: &mut dyn NeighborRanker,
        sv: &ShopValuation,
        rng: &mut SimRng,
    ) {
        let candidates: Vec<Bundle> = neighborhood(self.interest)
            .into_iter()
            .filter(|b| !self.recommended_since_interest.contains(b))
            .collect();
        self.rec_set = if candidates.is_empty() {
            VecDeque::new()
        } else {
            ranker.rank(self.interest, price, &candidates, sv, rng).into()
        };
    }

    /// Records a customer offer. When it answers a recommendation, evaluates
    /// the sign, feeds the exchange to the ranker, and on success makes the
    /// recommended bundle the new interest bundle. Returns the sign in that case.
    pub fn observe_customer_offer(
        &mut self,
        offer: &Offer,
        sv: &ShopValuation,
        ranker: &mut dyn NeighborRanker,
        rng: &mut SimRng,
    ) -> Option<u8> {
        let mut outcome = None;
        if let Some(p) = self.pending.take() {
            if offer.bundle == p.bundle {
                let s = sign(&self.best_customer_offer, offer, sv);
                ranker.record(
                    &Exchange {
                        from: p.prior.bundle,
                        from_price: p.prior.price,
                        to: offer.bundle,
                        to_price: offer.price,
                    },
                    sv,
                );
                if s == 1 {
                    self.interest = offer.bundle;
                    self.recommended_since_interest.clear();
                    self.exhausted = false;
                    self.owe_recommendation = false;
                    self.rebuild_rec_set(offer.price, ranker, sv, rng);
                } else {
                    self.owe_recommendation = true;
                }
                outcome = Some(s);
            }
        }
        let net = |o: &Offer| o.price - sv.value(o.bundle);
        if net(offer) > net(&self.best_customer_offer) {
            self.best_customer_offer = *offer;
        }
        self.last_customer_offers = [self.last_customer_offers[1], Some(*offer)];
        outcome
    }

    /// Chooses the shop's next move after a customer offer it did not accept.
    pub fn decide(
        &mut self,
        offer: &Offer,
        sv: &ShopValuation,
        ranker: &mut dyn NeighborRanker,
        rng: &mut SimRng,
    ) -> Decision {
        if offer.bundle != self.interest {
            return Decision {
                action: ShopAction::ReturnToInterest(self.interest),
                ..Decision::default()
            };
        }
        if self.owe_recommendation {
            self.owe_recommendation = false;
            return Decision {
                action: self.next_recommendation(offer, sv, ranker, rng),
                ..Decision::default()
            };
        }
        let [Some(prev), Some(last)] = self.last_customer_offers else {
            return Decision::default();
        };
        if prev.bundle != last.bundle || self.exhausted {
            return Decision::default();
        }
        let delta_t = predict_rounds(sv.value(last.bundle), last.price, prev.price);
        let probability = recommend_probability(delta_t);
        let action = if rng.random::<f64>() < probability {
            self.next_recommendation(offer, sv, ranker, rng)
        } else {
            ShopAction::Stay
        };
        Decision {
            action,
            delta_t: Some(delta_t),
            probability: Some(probability),
        }
    }

    fn next_recommendation(
        &mut self,
        offer: &Offer,
        sv: &ShopValuation,
        ranker: &mut dyn NeighborRanker,
        rng: &mut SimRng,
    ) -> ShopAction {
        if self.rec_set.is_empty() && !self.exhausted {
            self.rebuild_rec_set(offer.price, ranker, sv, rng);
            self.exhausted = self.rec_set.is_empty();
        }
        match self.rec_set.pop_front() {
            Some(b) => {
                self.pending = Some(Pending {
                    bundle: b,
                    prior: *offer,
                });
                self.recommended_since_interest.push(b);
                ShopAction::Recommend(b)
            }
            None => ShopAction::Stay,
        }
    }
}
