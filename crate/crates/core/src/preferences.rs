//! Incremental private values.
//!
//! An agent allowed to hold between `-q_max` and `q_max` units carries
//! `2 * q_max` private values `theta^q` for `q` in `-q_max+1 ..= q_max`,
//! sorted so each additional unit is worth no more than the previous one.
//! `theta^q` prices the step between holding `q - 1` and `q` units.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Buy => "BUY",
            Side::Sell => "SELL",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PreferenceError {
    #[error("q_max must be at least 1, got {0}")]
    InvalidQMax(i64),
    #[error("cannot {side:?} while holding {held}: outside the holding limit {q_max}")]
    HoldingLimit { side: Side, held: i64, q_max: i64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivateValues {
    q_max: i64,
    // theta[q + q_max - 1] is theta^q
    theta: Vec<f64>,
}

impl PrivateValues {
    /// Draws `2 * q_max` values from `N(0, sigma_pv_sq)` and sorts them descending.
    pub fn draw(q_max: i64, sigma_pv_sq: f64, rng: &mut SimRng) -> Result<Self, PreferenceError> {
        if q_max < 1 {
            return Err(PreferenceError::InvalidQMax(q_max));
        }
        let sd = sigma_pv_sq.sqrt();
        let theta = (0..2 * q_max)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            })
            .collect();
        Ok(Self::from_unsorted(q_max, theta))
    }

    /// Builds from explicit values, sorting them descending.
    pub fn from_unsorted(q_max: i64, mut theta: Vec<f64>) -> Self {
        assert_eq!(theta.len() as i64, 2 * q_max, "need 2*q_max private values");
        theta.sort_by(|a, b| b.total_cmp(a));
        PrivateValues { q_max, theta }
    }

    pub fn q_max(&self) -> i64 {
        self.q_max
    }

    pub fn values(&self) -> &[f64] {
        &self.theta
    }

    fn slot(&self, q: i64) -> Option<usize> {
        (q > -self.q_max && q <= self.q_max).then(|| (q + self.q_max - 1) as usize)
    }

    /// `theta^q`, if `q` is inside `-q_max+1 ..= q_max`.
    pub fn theta(&self, q: i64) -> Option<f64> {
        self.slot(q).map(|i| self.theta[i])
    }

    pub fn can_trade(&self, held: i64, side: Side) -> bool {
        self.theta(Self::unit_index(held, side)).is_some()
    }

    fn unit_index(held: i64, side: Side) -> i64 {
        match side {
            Side::Buy => held + 1,
            Side::Sell => held,
        }
    }

    /// Value of the next unit traded on `side`: `r_hat + theta^{q+1}` to buy,
    /// `r_hat + theta^q` to sell.
    pub fn total_valuation(
        &self,
        held: i64,
        side: Side,
        r_hat: f64,
    ) -> Result<f64, PreferenceError> {
        self.theta(Self::unit_index(held, side))
            .map(|theta| r_hat + theta)
            .ok_or(PreferenceError::HoldingLimit {
                side,
                held,
                q_max: self.q_max,
            })
    }

    /// Private value realized by ending with `held` units: the sum of
    /// `theta^1..=theta^q` when long, minus `theta^{q+1}..=theta^0` when short.
    pub fn realized(&self, held: i64) -> f64 {
        if held >= 0 {
            (1..=held).filter_map(|q| self.theta(q)).sum()
        } else {
            -(held + 1..=0).filter_map(|q| self.theta(q)).sum::<f64>()
        }
    }
}
