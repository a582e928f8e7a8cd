//! Integer tick prices.
//!
//! Every stored price is a whole number of ticks. Real-valued quantities
//! (beliefs, valuations, the OU state) are converted at the boundary with
//! one of the rounding helpers on [`TickSize`].

use std::fmt;

use serde::{Deserialize, Serialize};

/// Slack applied before directional rounding so that values such as
/// `99.8 - 0.25` land on the tick they denote in decimal.
const ROUNDING_SLACK: f64 = 1e-9;

/// A price expressed as a count of ticks.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct Price(pub i64);

impl Price {
    pub const ZERO: Price = Price(0);

    pub fn ticks(self) -> i64 {
        self.0
    }

    pub fn to_real(self, tick: TickSize) -> f64 {
        self.0 as f64 * tick.0
    }

    /// Formats the price with as many decimals as the tick size needs.
    pub fn display(self, tick: TickSize) -> String {
        format!("{:.*}", tick.decimals(), self.to_real(tick))
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}t", self.0)
    }
}

/// Currency per tick.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TickSize(pub f64);

impl Default for TickSize {
    fn default() -> Self {
        TickSize(0.1)
    }
}

impl TickSize {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Round half away from zero.
    pub fn round(self, x: f64) -> Price {
        let scaled = x / self.0;
        Price((scaled + ROUNDING_SLACK.copysign(scaled)).round() as i64)
    }

    /// Round to the nearest tick, never returning a negative price.
    pub fn round_nonneg(self, x: f64) -> Price {
        Price(self.round(x).0.max(0))
    }

    /// Largest tick not above `x`.
    pub fn floor(self, x: f64) -> Price {
        Price((x / self.0 + ROUNDING_SLACK).floor() as i64)
    }

    /// Smallest tick not below `x`.
    pub fn ceil(self, x: f64) -> Price {
        Price((x / self.0 - ROUNDING_SLACK).ceil() as i64)
    }

    /// Number of decimals needed to print a multiple of this tick.
    pub fn decimals(self) -> usize {
        let mut d = 0;
        let mut scaled = self.0;
        while d < 9 && (scaled - scaled.round()).abs() > 1e-9 {
            scaled *= 10.0;
            d += 1;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_away_from_zero() {
        let t = TickSize(0.1);
        assert_eq!(t.round(100.05), Price(1001));
        assert_eq!(t.round(-0.05), Price(-1));
        assert_eq!(t.round_nonneg(-0.05), Price(0));
    }

    #[test]
    fn directional_rounding_respects_decimal_intent() {
        let t = TickSize(0.01);
        assert_eq!(t.floor(99.8 - 0.25), Price(9955));
        assert_eq!(t.ceil(99.8 + 0.25), Price(10005));
        let t = TickSize(0.1);
        assert_eq!(t.floor(99.55), Price(995));
        assert_eq!(t.ceil(99.55), Price(996));
    }

    #[test]
    fn display_uses_tick_decimals() {
        assert_eq!(Price(1002).display(TickSize(0.1)), "100.2");
        assert_eq!(Price(9955).display(TickSize(0.01)), "99.55");
        assert_eq!(Price(7).display(TickSize(1.0)), "7");
    }
}
