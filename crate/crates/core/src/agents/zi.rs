//! Zero Intelligence trader with a strategic threshold.

use rand_distr::{Distribution, Uniform};

use super::{choose_side, AgentAction, Decision, DecisionDetail};
use crate::preferences::{PrivateValues, Side};
use crate::price::{Price, TickSize};
use crate::rng::SimRng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZiParams {
    /// Smallest requested surplus.
    pub r_min: f64,
    /// Largest requested surplus.
    pub r_max: f64,
    /// Fraction of the requested surplus the agent accepts to trade immediately.
    pub eta: f64,
}

impl Default for ZiParams {
    fn default() -> Self {
        ZiParams {
            r_min: 0.0,
            r_max: 1.0,
            eta: 1.0,
        }
    }
}

/// Picks a side by coin flip, draws `R ~ U[r_min, r_max]` and shades the
/// valuation by `R`. If the touch already offers at least `eta * R` surplus
/// the agent takes it instead.
#[allow(clippy::too_many_arguments)]
pub fn zi_decide(
    held: i64,
    pv: &PrivateValues,
    r_hat: f64,
    best_bid: Option<Price>,
    best_ask: Option<Price>,
    params: &ZiParams,
    tick: TickSize,
    rng: &mut SimRng,
) -> Decision {
    let Some(side) = choose_side(held, pv, rng) else {
        return Decision::skip();
    };
    let valuation = pv
        .total_valuation(held, side, r_hat)
        .expect("choose_side only returns tradable sides");
    let surplus = Uniform::new_inclusive(params.r_min, params.r_max)
        .expect("surplus range validated")
        .sample(rng);
    let action = zi_order(
        side, valuation, surplus, best_bid, best_ask, params.eta, tick,
    );
    Decision {
        action,
        valuation: Some(valuation),
        detail: DecisionDetail::Zi {
            requested_surplus: surplus,
        },
    }
}

/// The order a ZI agent sends once side, valuation `v` and requested surplus
/// `R` are fixed: take the touch if it yields at least `eta * R`, otherwise
/// rest at `v - R` (buy, rounded down) or `v + R` (sell, rounded up).
pub fn zi_order(
    side: Side,
    valuation: f64,
    surplus: f64,
    best_bid: Option<Price>,
    best_ask: Option<Price>,
    eta: f64,
    tick: TickSize,
) -> AgentAction {
    let threshold = eta * surplus;
    match side {
        Side::Buy => match best_ask {
            Some(ask) if valuation - ask.to_real(tick) >= threshold => {
                AgentAction::Take { side, price: ask }
            }
            _ => AgentAction::Place {
                side,
                price: tick.floor(valuation - surplus).max(Price::ZERO),
            },
        },
        Side::Sell => match best_bid {
            Some(bid) if bid.to_real(tick) - valuation >= threshold => {
                AgentAction::Take { side, price: bid }
            }
            _ => AgentAction::Place {
                side,
                price: tick.ceil(valuation + surplus),
            },
        },
    }
}
