//! Heuristic Belief Learning trader.
//!
//! The agent reads the public order stream back to the oldest order involved
//! in the last `L` transactions, classifies each order as a success or a
//! failure, and estimates for a bid at `p`
//!
//! ```text
//! Pr(p) = (A<=p + S<=p) / (A<=p + S<=p + U>=p)
//! ```
//!
//! where `A` counts asks, `S` successful bids and `U` failed bids. The sell
//! side is the mirror image. It then places the order maximizing
//! `(v - p) * Pr(p)`, or behaves as a ZI trader while it has seen fewer
//! than `L` transactions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::spline::NaturalSpline;
use super::zi::{zi_decide, ZiParams};
use super::{choose_side, AgentAction, Decision, DecisionDetail};
use crate::orderbook::{BookEvent, EventKind, OrderId};
use crate::preferences::{PrivateValues, Side};
use crate::price::{Price, TickSize};
use crate::rng::SimRng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuccessMode {
    /// Any execution is a success; cancellation or outliving the grace period a failure.
    #[default]
    Binary,
    /// Weights ramp linearly with time spent resting.
    Fractional,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    /// Prices seen in memory plus one tick beyond each end.
    #[default]
    Observed,
    /// Every tick across the observed range, beliefs from a natural cubic spline.
    Spline,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HblParams {
    /// ZI behaviour used while memory is insufficient.
    pub zi: ZiParams,
    pub memory_length: usize,
    pub grace_period: u64,
    pub success_mode: SuccessMode,
    pub grid: GridMode,
    /// Ticks added beyond the observed range in spline mode.
    pub spline_margin: i64,
}

impl Default for HblParams {
    fn default() -> Self {
        HblParams {
            zi: ZiParams::default(),
            memory_length: 5,
            grace_period: 200,
            success_mode: SuccessMode::Binary,
            grid: GridMode::Observed,
            spline_margin: 1,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ClassifyError {
    #[error("event {index}: time {time} precedes the previous event's time {previous}")]
    TimeRegression {
        index: usize,
        time: u64,
        previous: u64,
    },
    #[error("event {index}: order {order_id} was never placed")]
    UnknownOrder { index: usize, order_id: OrderId },
    #[error("event {index}: order {order_id} placed twice")]
    DuplicatePlacement { index: usize, order_id: OrderId },
    #[error("event {index}: order {order_id} changed after cancellation")]
    AfterCancel { index: usize, order_id: OrderId },
}

/// One remembered order and its success/failure weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderOutcome {
    pub side: Side,
    pub price: Price,
    pub success: f64,
    pub failure: f64,
}

/// Sorted views of one side's evidence, enough to evaluate `Pr(p)` by
/// binary search.
#[derive(Clone, Debug, Default, PartialEq)]
struct SideEvidence {
    // limit prices of the opposite side's orders
    opposite: Vec<Price>,
    // own-side prices with cumulative success/failure weight, sorted by price
    prices: Vec<Price>,
    cum_success: Vec<f64>,
    cum_failure: Vec<f64>,
}

impl SideEvidence {
    fn build(orders: &[OrderOutcome], own: Side) -> Self {
        let mut opposite: Vec<Price> = orders
            .iter()
            .filter(|o| o.side != own)
            .map(|o| o.price)
            .collect();
        opposite.sort_unstable();
        let mut mine: Vec<&OrderOutcome> = orders.iter().filter(|o| o.side == own).collect();
        mine.sort_by_key(|o| o.price);
        let mut cum_success = Vec::with_capacity(mine.len() + 1);
        let mut cum_failure = Vec::with_capacity(mine.len() + 1);
        let (mut s, mut u) = (0.0, 0.0);
        cum_success.push(0.0);
        cum_failure.push(0.0);
        for o in &mine {
            s += o.success;
            u += o.failure;
            cum_success.push(s);
            cum_failure.push(u);
        }
        SideEvidence {
            opposite,
            prices: mine.iter().map(|o| o.price).collect(),
            cum_success,
            cum_failure,
        }
    }

    fn belief(&self, p: Price, side: Side) -> f64 {
        let opp_le = self.opposite.partition_point(|&q| q <= p);
        let opp_lt = self.opposite.partition_point(|&q| q < p);
        let le = self.prices.partition_point(|&q| q <= p);
        let lt = self.prices.partition_point(|&q| q < p);
        let n = self.prices.len();
        let (volume, success, failure) = match side {
            Side::Buy => (
                opp_le as f64,
                self.cum_success[le],
                self.cum_failure[n] - self.cum_failure[lt],
            ),
            Side::Sell => (
                (self.opposite.len() - opp_lt) as f64,
                self.cum_success[n] - self.cum_success[lt],
                self.cum_failure[le],
            ),
        };
        let num = volume + success;
        let den = num + failure;
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

/// What an HBL agent remembers of the order stream.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HblMemory {
    orders: Vec<OrderOutcome>,
    transactions: usize,
    bids: SideEvidence,
    asks: SideEvidence,
}

impl HblMemory {
    pub fn from_outcomes(orders: Vec<OrderOutcome>, transactions: usize) -> Self {
        let bids = SideEvidence::build(&orders, Side::Buy);
        let asks = SideEvidence::build(&orders, Side::Sell);
        HblMemory {
            orders,
            transactions,
            bids,
            asks,
        }
    }

    pub fn orders(&self) -> &[OrderOutcome] {
        &self.orders
    }

    /// Transactions covered by the memory, at most `L`.
    pub fn transactions(&self) -> usize {
        self.transactions
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    /// Estimated probability that an order on `side` at `p` transacts.
    /// Zero when the memory holds no relevant evidence.
    pub fn belief(&self, p: Price, side: Side) -> f64 {
        match side {
            Side::Buy => self.bids.belief(p, side),
            Side::Sell => self.asks.belief(p, side),
        }
    }

    fn price_range(&self) -> Option<(Price, Price)> {
        let lo = self.orders.iter().map(|o| o.price).min()?;
        let hi = self.orders.iter().map(|o| o.price).max()?;
        Some((lo, hi))
    }
}

#[derive(Clone, Copy, Debug)]
struct OrderRecord {
    side: Side,
    price: Price,
    placed: u64,
    first_fill: Option<u64>,
    cancelled: Option<u64>,
}

/// Classifies every order placed since the oldest order involved in the
/// last `L` transactions of `events`, as seen at time `now`.
pub fn hbl_classify(
    events: &[BookEvent],
    now: u64,
    params: &HblParams,
) -> Result<HblMemory, ClassifyError> {
    let window_start = memory_window(events, params.memory_length);
    let start = window_start.first_index;

    let mut records: HashMap<OrderId, OrderRecord> = HashMap::new();
    let mut order_of_placement: Vec<OrderId> = Vec::new();
    let mut previous_time = events.get(start).map_or(0, |e| e.time);
    for (offset, e) in events[start..].iter().enumerate() {
        let index = start + offset;
        if e.time < previous_time {
            return Err(ClassifyError::TimeRegression {
                index,
                time: e.time,
                previous: previous_time,
            });
        }
        previous_time = e.time;
        match e.kind {
            EventKind::Placed => {
                if records.contains_key(&e.order_id) {
                    return Err(ClassifyError::DuplicatePlacement {
                        index,
                        order_id: e.order_id,
                    });
                }
                records.insert(
                    e.order_id,
                    OrderRecord {
                        side: e.side,
                        price: e.price,
                        placed: e.time,
                        first_fill: None,
                        cancelled: None,
                    },
                );
                order_of_placement.push(e.order_id);
            }
            EventKind::Executed | EventKind::Cancelled => {
                let Some(rec) = records.get_mut(&e.order_id) else {
                    // orders placed before the window are not remembered
                    if start == 0 {
                        return Err(ClassifyError::UnknownOrder {
                            index,
                            order_id: e.order_id,
                        });
                    }
                    continue;
                };
                if rec.cancelled.is_some() {
                    return Err(ClassifyError::AfterCancel {
                        index,
                        order_id: e.order_id,
                    });
                }
                if e.kind == EventKind::Executed {
                    rec.first_fill.get_or_insert(e.time);
                } else {
                    rec.cancelled = Some(e.time);
                }
            }
        }
    }

    let grace = params.grace_period.max(1) as f64;
    let orders = order_of_placement
        .iter()
        .map(|id| {
            let rec = records[id];
            let (success, failure) = outcome_weights(&rec, now, grace, params.success_mode);
            OrderOutcome {
                side: rec.side,
                price: rec.price,
                success,
                failure,
            }
        })
        .collect();
    Ok(HblMemory::from_outcomes(orders, window_start.transactions))
}

fn outcome_weights(rec: &OrderRecord, now: u64, grace: f64, mode: SuccessMode) -> (f64, f64) {
    if let Some(filled) = rec.first_fill {
        return match mode {
            SuccessMode::Binary => (1.0, 0.0),
            SuccessMode::Fractional => {
                let s = (1.0 - (filled - rec.placed) as f64 / grace).max(0.0);
                (s, 1.0 - s)
            }
        };
    }
    let alive = (rec.cancelled.unwrap_or(now).max(rec.placed) - rec.placed) as f64;
    match mode {
        SuccessMode::Binary if rec.cancelled.is_some() || alive > grace => (0.0, 1.0),
        SuccessMode::Binary => (0.0, 0.0),
        SuccessMode::Fractional => (0.0, (alive / grace).min(1.0)),
    }
}

struct WindowStart {
    first_index: usize,
    transactions: usize,
}

/// Finds the log position of the oldest placement among orders involved in
/// the last `memory_length` transactions. Each trade has exactly one
/// buy-side `Executed` event, which is what gets counted.
fn memory_window(events: &[BookEvent], memory_length: usize) -> WindowStart {
    let mut involved: Vec<OrderId> = Vec::new();
    let mut transactions = 0;
    for (i, e) in events.iter().enumerate().rev() {
        if transactions < memory_length && e.kind == EventKind::Executed && e.side == Side::Buy {
            transactions += 1;
            involved.push(e.order_id);
            involved.extend(e.counterparty);
        }
        if e.kind == EventKind::Placed {
            involved.retain(|&id| id != e.order_id);
            if transactions == memory_length && involved.is_empty() {
                return WindowStart {
                    first_index: i,
                    transactions,
                };
            }
        }
    }
    WindowStart {
        first_index: 0,
        transactions,
    }
}

/// Candidate limit prices with the belief the agent assigns each.
pub fn hbl_candidate_grid(
    memory: &HblMemory,
    side: Side,
    mode: GridMode,
    spline_margin: i64,
) -> Vec<(Price, f64)> {
    let Some((lo, hi)) = memory.price_range() else {
        return Vec::new();
    };
    let mut observed: Vec<Price> = memory.orders.iter().map(|o| o.price).collect();
    observed.sort_unstable();
    observed.dedup();
    match mode {
        GridMode::Observed => {
            let mut grid = Vec::with_capacity(observed.len() + 2);
            if lo.0 > 0 {
                grid.push(Price(lo.0 - 1));
            }
            grid.extend(observed);
            grid.push(Price(hi.0 + 1));
            grid.into_iter()
                .map(|p| (p, memory.belief(p, side)))
                .collect()
        }
        GridMode::Spline => {
            let knots: Vec<(f64, f64)> = observed
                .iter()
                .map(|&p| (p.0 as f64, memory.belief(p, side)))
                .collect();
            let spline = NaturalSpline::new(&knots);
            let margin = spline_margin.max(0);
            ((lo.0 - margin).max(0)..=hi.0 + margin)
                .map(|t| (Price(t), spline.eval(t as f64).clamp(0.0, 1.0)))
                .collect()
        }
    }
}

/// Expected-surplus maximizing order, or the ZI fallback while fewer than
/// `L` transactions have been observed. Buyers break ties toward the lower
/// price, sellers toward the higher one.
#[allow(clippy::too_many_arguments)]
pub fn hbl_decide(
    held: i64,
    pv: &PrivateValues,
    r_hat: f64,
    memory: &HblMemory,
    best_bid: Option<Price>,
    best_ask: Option<Price>,
    params: &HblParams,
    tick: TickSize,
    rng: &mut SimRng,
) -> Decision {
    if memory.transactions() < params.memory_length || memory.is_empty() {
        return zi_decide(held, pv, r_hat, best_bid, best_ask, &params.zi, tick, rng);
    }
    let Some(side) = choose_side(held, pv, rng) else {
        return Decision::skip();
    };
    let valuation = pv
        .total_valuation(held, side, r_hat)
        .expect("choose_side only returns tradable sides");
    let mut grid = hbl_candidate_grid(memory, side, params.grid, params.spline_margin);
    if side == Side::Sell {
        grid.reverse();
    }
    let mut best: Option<(Price, f64, f64)> = None;
    for (p, prob) in grid {
        let surplus = match side {
            Side::Buy => valuation - p.to_real(tick),
            Side::Sell => p.to_real(tick) - valuation,
        };
        let expected = surplus * prob;
        if best.is_none_or(|(_, _, e)| expected > e) {
            best = Some((p, prob, expected));
        }
    }
    let (price, probability, expected_surplus) =
        best.expect("nonempty memory yields a nonempty grid");
    Decision {
        action: AgentAction::Place { side, price },
        valuation: Some(valuation),
        detail: DecisionDetail::Hbl {
            probability,
            expected_surplus,
        },
    }
}

/// Expected surplus `(v - p) * Pr(p)` for a buyer, mirrored for a seller.
pub fn expected_surplus(
    memory: &HblMemory,
    side: Side,
    valuation: f64,
    p: Price,
    tick: TickSize,
) -> f64 {
    let surplus = match side {
        Side::Buy => valuation - p.to_real(tick),
        Side::Sell => p.to_real(tick) - valuation,
    };
    surplus * memory.belief(p, side)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orderbook::{Order, OrderBook};

    fn params(grace: u64, mode: SuccessMode) -> HblParams {
        HblParams {
            memory_length: 1,
            grace_period: grace,
            success_mode: mode,
            ..HblParams::default()
        }
    }

    fn place(book: &mut OrderBook, id: OrderId, side: Side, price: i64, t: u64) {
        book.place_limit(
            Order {
                id,
                agent: id as usize,
                side,
                price: Price(price),
                quantity: 1,
            },
            t,
        )
        .unwrap();
    }

    fn outcome_of(memory: &HblMemory, price: i64) -> (f64, f64) {
        let o = memory
            .orders()
            .iter()
            .find(|o| o.price == Price(price))
            .unwrap();
        (o.success, o.failure)
    }

    #[test]
    fn instant_execution_is_a_full_success() {
        for mode in [SuccessMode::Binary, SuccessMode::Fractional] {
            let mut book = OrderBook::new();
            place(&mut book, 1, Side::Sell, 1000, 0);
            place(&mut book, 2, Side::Buy, 1001, 5);
            let m = hbl_classify(book.events(), 5, &params(10, mode)).unwrap();
            assert_eq!(outcome_of(&m, 1001), (1.0, 0.0));
        }
    }

    #[test]
    fn stale_order_is_a_full_failure() {
        for mode in [SuccessMode::Binary, SuccessMode::Fractional] {
            let mut book = OrderBook::new();
            place(&mut book, 1, Side::Buy, 990, 0);
            let m = hbl_classify(book.events(), 20, &params(10, mode)).unwrap();
            assert_eq!(outcome_of(&m, 990), (0.0, 1.0));
        }
    }

    #[test]
    fn pending_and_cancelled_orders() {
        let mut book = OrderBook::new();
        place(&mut book, 1, Side::Buy, 990, 0);
        place(&mut book, 2, Side::Buy, 991, 0);
        book.cancel(2, 3).unwrap();
        let binary = hbl_classify(book.events(), 4, &params(10, SuccessMode::Binary)).unwrap();
        assert_eq!(outcome_of(&binary, 990), (0.0, 0.0));
        assert_eq!(outcome_of(&binary, 991), (0.0, 1.0));
        let frac = hbl_classify(book.events(), 4, &params(10, SuccessMode::Fractional)).unwrap();
        assert_eq!(outcome_of(&frac, 990), (0.0, 0.4));
        assert_eq!(outcome_of(&frac, 991), (0.0, 0.3));
    }

    #[test]
    fn fractional_success_ramps_with_resting_time() {
        let mut book = OrderBook::new();
        place(&mut book, 1, Side::Buy, 1000, 0);
        place(&mut book, 2, Side::Sell, 1000, 5);
        let m = hbl_classify(book.events(), 5, &params(10, SuccessMode::Fractional)).unwrap();
        assert_eq!(outcome_of(&m, 1000), (0.5, 0.5));
    }

    #[test]
    fn window_starts_at_oldest_involved_order() {
        let mut book = OrderBook::new();
        place(&mut book, 1, Side::Buy, 990, 0); // before the window
        place(&mut book, 2, Side::Sell, 1000, 1); // oldest involved in the last trade
        place(&mut book, 3, Side::Buy, 995, 2);
        place(&mut book, 4, Side::Buy, 1000, 3); // trades with 2
        let m = hbl_classify(book.events(), 3, &params(10, SuccessMode::Binary)).unwrap();
        assert_eq!(m.transactions(), 1);
        let prices: Vec<_> = m.orders().iter().map(|o| o.price.0).collect();
        assert_eq!(prices, vec![1000, 995, 1000]);
    }

    #[test]
    fn malformed_streams_are_rejected() {
        let mut book = OrderBook::new();
        place(&mut book, 1, Side::Sell, 1000, 0);
        place(&mut book, 2, Side::Buy, 1000, 1);
        let mut events = book.events().to_vec();
        events.remove(0);
        assert!(matches!(
            hbl_classify(&events, 2, &params(10, SuccessMode::Binary)),
            Err(ClassifyError::UnknownOrder { .. })
        ));
        let mut events = book.events().to_vec();
        events[1].time = 0;
        events[0].time = 5;
        assert!(matches!(
            hbl_classify(&events, 5, &params(10, SuccessMode::Binary)),
            Err(ClassifyError::TimeRegression { .. })
        ));
    }

    #[test]
    fn observed_grid_extends_one_tick_each_way() {
        let memory = HblMemory::from_outcomes(
            vec![OrderOutcome {
                side: Side::Buy,
                price: Price(1000),
                success: 1.0,
                failure: 0.0,
            }],
            1,
        );
        let grid: Vec<_> = hbl_candidate_grid(&memory, Side::Buy, GridMode::Observed, 1)
            .into_iter()
            .map(|(p, _)| p.0)
            .collect();
        assert_eq!(grid, vec![999, 1000, 1001]);
    }

    #[test]
    fn spline_grid_is_clamped() {
        let outcomes = [
            (990, 0.0, 1.0),
            (995, 0.0, 1.0),
            (996, 1.0, 0.0),
            (1010, 1.0, 0.0),
        ]
        .into_iter()
        .map(|(p, s, u)| OrderOutcome {
            side: Side::Buy,
            price: Price(p),
            success: s,
            failure: u,
        })
        .collect();
        let memory = HblMemory::from_outcomes(outcomes, 2);
        let grid = hbl_candidate_grid(&memory, Side::Buy, GridMode::Spline, 3);
        assert_eq!(grid.first().unwrap().0, Price(987));
        assert_eq!(grid.last().unwrap().0, Price(1013));
        assert_eq!(grid.len(), 27);
        assert!(grid.iter().all(|&(_, pr)| (0.0..=1.0).contains(&pr)));
        for (p, pr) in &grid {
            if [990, 995, 996, 1010].contains(&p.0) {
                assert!((pr - memory.belief(*p, Side::Buy)).abs() < 1e-12);
            }
        }
    }
}
