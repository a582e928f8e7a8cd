//! Trading strategies as pure decision functions.
//!
//! A strategy sees its holdings, private values, projected final fundamental
//! and (for HBL) the observed order stream, and returns one [`AgentAction`].
//! The kernel cancels the agent's previous order before acting on it.

pub mod hbl;
pub mod spline;
pub mod zi;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::preferences::{PrivateValues, Side};
use crate::price::Price;
use crate::rng::SimRng;

pub use hbl::{
    expected_surplus, hbl_candidate_grid, hbl_classify, hbl_decide, ClassifyError, GridMode,
    HblMemory, HblParams, OrderOutcome, SuccessMode,
};
pub use zi::{zi_decide, zi_order, ZiParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Zi,
    Hbl,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Zi => "ZI",
            Strategy::Hbl => "HBL",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentAction {
    /// Rest a new single-unit limit order.
    Place {
        side: Side,
        price: Price,
    },
    /// Marketable limit at the current touch.
    Take {
        side: Side,
        price: Price,
    },
    Skip,
}

impl AgentAction {
    pub fn as_str(&self) -> &'static str {
        match self {
            AgentAction::Place { .. } => "PLACE",
            AgentAction::Take { .. } => "TAKE",
            AgentAction::Skip => "SKIP",
        }
    }

    pub fn order(&self) -> Option<(Side, Price)> {
        match *self {
            AgentAction::Place { side, price } | AgentAction::Take { side, price } => {
                Some((side, price))
            }
            AgentAction::Skip => None,
        }
    }
}

/// An action plus what went into it, for decision traces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub action: AgentAction,
    pub valuation: Option<f64>,
    pub detail: DecisionDetail,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecisionDetail {
    None,
    Zi {
        requested_surplus: f64,
    },
    Hbl {
        probability: f64,
        expected_surplus: f64,
    },
}

impl Decision {
    fn skip() -> Self {
        Decision {
            action: AgentAction::Skip,
            valuation: None,
            detail: DecisionDetail::None,
        }
    }
}

/// Fair coin for the side; an agent at a holding limit takes the only legal side.
pub(crate) fn choose_side(held: i64, pv: &PrivateValues, rng: &mut SimRng) -> Option<Side> {
    let side = if rng.random_bool(0.5) {
        Side::Buy
    } else {
        Side::Sell
    };
    [side, side.opposite()]
        .into_iter()
        .find(|&s| pv.can_trade(held, s))
}
