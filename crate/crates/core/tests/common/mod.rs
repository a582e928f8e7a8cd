//! Fixtures and independent reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use cdasim::agents::OrderOutcome;
use cdasim::orderbook::{BookEvent, Order, OrderBook, OrderId};
use cdasim::preferences::PrivateValues;
use cdasim::{Price, Side};

pub fn worked_example_values() -> PrivateValues {
    PrivateValues::from_unsorted(3, vec![0.5, 0.3, 0.2, 0.1, -0.2, -0.4])
}

/// The four-transaction order memory from the HBL limit price example,
/// replayed through a real book. Prices are in 0.1 ticks. Each column of the
/// example is one transaction, read top to bottom.
pub fn hbl_example_book() -> OrderBook {
    use Side::{Buy, Sell};
    let script: [(Side, i64); 15] = [
        (Sell, 1000),
        (Buy, 998),
        (Sell, 1003),
        (Buy, 996),
        (Buy, 1000),
        (Sell, 1002),
        (Buy, 1000),
        (Sell, 1003),
        (Buy, 1001),
        (Buy, 1002),
        (Buy, 1001),
        (Sell, 999),
        (Buy, 1002),
        (Sell, 1004),
        (Buy, 1004),
    ];
    let mut book = OrderBook::new();
    for (i, (side, price)) in script.into_iter().enumerate() {
        book.place_limit(
            Order {
                id: i as OrderId + 1,
                agent: i,
                side,
                price: Price(price),
                quantity: 1,
            },
            i as u64 + 1,
        )
        .unwrap();
    }
    book
}

/// The ten probabilities listed in the example as exact fractions
/// `(price, numerator, denominator)`.
pub const HBL_EXAMPLE_BELIEFS: [(i64, u32, u32); 10] = [
    (1005, 10, 10),
    (1004, 10, 10),
    (1003, 8, 8),
    (1002, 6, 7),
    (1001, 4, 6),
    (1000, 3, 6),
    (999, 1, 4),
    (998, 0, 4),
    (997, 0, 4),
    (996, 0, 5),
];

/// `S_p / (S_p + U_p)` over bids at exactly `p`; zero when there are none.
pub fn staged_exact(bids: &[(i64, bool)], p: i64) -> f64 {
    let s = bids.iter().filter(|&&(q, ok)| ok && q == p).count() as f64;
    let u = bids.iter().filter(|&&(q, ok)| !ok && q == p).count() as f64;
    if s + u == 0.0 {
        0.0
    } else {
        s / (s + u)
    }
}

pub fn staged_at_or_below(bids: &[(i64, bool)], p: i64) -> f64 {
    let s = bids.iter().filter(|&&(q, ok)| ok && q <= p).count() as f64;
    let u = bids.iter().filter(|&&(q, ok)| !ok && q <= p).count() as f64;
    s / (s + u)
}

pub fn staged_split(bids: &[(i64, bool)], p: i64) -> f64 {
    let s = bids.iter().filter(|&&(q, ok)| ok && q <= p).count() as f64;
    let u = bids.iter().filter(|&&(q, ok)| !ok && q >= p).count() as f64;
    s / (s + u)
}

pub fn ten_ten_ten() -> Vec<(i64, bool)> {
    let mut bids = vec![(5, false); 10];
    bids.extend([(7, true); 10]);
    bids.extend([(9, true); 10]);
    bids
}

/// Scalar Kalman filter for `x' = (1-k) x + k m + u`, `u ~ N(0, q)`,
/// observed as `x + n`, `n ~ N(0, r)`, propagated one step at a time.
#[derive(Clone, Copy, Debug)]
pub struct KalmanOracle {
    pub mean: f64,
    pub var: f64,
}

impl KalmanOracle {
    pub fn predict(&mut self, steps: u64, k: f64, m: f64, q: f64) {
        for _ in 0..steps {
            self.mean = (1.0 - k) * self.mean + k * m;
            self.var = (1.0 - k) * (1.0 - k) * self.var + q;
        }
    }

    pub fn update(&mut self, obs: f64, r: f64) {
        let s = self.var + r;
        if s == 0.0 {
            self.mean = obs;
            self.var = 0.0;
            return;
        }
        let gain = self.var / s;
        self.mean += gain * (obs - self.mean);
        self.var *= 1.0 - gain;
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || a == b
}

/// Buyer's belief recomputed by scanning every remembered order.
pub fn brute_force_bid_belief(orders: &[OrderOutcome], p: Price) -> f64 {
    let mut asks = 0.0;
    let mut success = 0.0;
    let mut failure = 0.0;
    for o in orders {
        match o.side {
            Side::Sell if o.price <= p => asks += 1.0,
            Side::Buy if o.price <= p => success += o.success,
            _ => {}
        }
        if o.side == Side::Buy && o.price >= p {
            failure += o.failure;
        }
    }
    let num = asks + success;
    if num + failure == 0.0 {
        0.0
    } else {
        num / (num + failure)
    }
}

/// Seller's belief recomputed by scanning every remembered order.
pub fn brute_force_ask_belief(orders: &[OrderOutcome], p: Price) -> f64 {
    let mut bids = 0.0;
    let mut success = 0.0;
    let mut failure = 0.0;
    for o in orders {
        match o.side {
            Side::Buy if o.price >= p => bids += 1.0,
            Side::Sell if o.price >= p => success += o.success,
            _ => {}
        }
        if o.side == Side::Sell && o.price <= p {
            failure += o.failure;
        }
    }
    let num = bids + success;
    if num + failure == 0.0 {
        0.0
    } else {
        num / (num + failure)
    }
}

/// Price-time priority matcher kept deliberately naive: a flat list of
/// resting orders searched linearly.
#[derive(Default)]
pub struct ReferenceBook {
    resting: Vec<(OrderId, Side, i64, u32, usize)>,
    seq: usize,
    pub trades: Vec<(i64, u32, OrderId, OrderId)>,
}

impl ReferenceBook {
    pub fn place(&mut self, id: OrderId, side: Side, price: i64, mut qty: u32) {
        while qty > 0 {
            let best = self
                .resting
                .iter()
                .enumerate()
                .filter(|(_, r)| {
                    r.1 != side
                        && match side {
                            Side::Buy => r.2 <= price,
                            Side::Sell => r.2 >= price,
                        }
                })
                .min_by_key(|(_, r)| {
                    let key = match side {
                        Side::Buy => r.2,
                        Side::Sell => -r.2,
                    };
                    (key, r.4)
                })
                .map(|(i, _)| i);
            let Some(i) = best else { break };
            let fill = qty.min(self.resting[i].3);
            qty -= fill;
            self.resting[i].3 -= fill;
            let maker = self.resting[i];
            let (b, s) = match side {
                Side::Buy => (id, maker.0),
                Side::Sell => (maker.0, id),
            };
            self.trades.push((maker.2, fill, b, s));
            if self.resting[i].3 == 0 {
                self.resting.remove(i);
            }
        }
        if qty > 0 {
            self.seq += 1;
            self.resting.push((id, side, price, qty, self.seq));
        }
    }

    pub fn cancel(&mut self, id: OrderId) {
        self.resting.retain(|r| r.0 != id);
    }
}

/// One operation of a random book stream.
#[derive(Clone, Copy, Debug)]
pub enum BookOp {
    Place {
        side: Side,
        price: i64,
        qty: u32,
        agent: usize,
    },
    Cancel {
        pick: usize,
    },
}

/// Applies `ops` to both books and checks every property after each step.
/// Returns a description of the first violation.
pub fn check_book_stream(ops: &[BookOp]) -> Result<(), String> {
    let mut book = OrderBook::new();
    let mut reference = ReferenceBook::default();
    let mut placed: Vec<OrderId> = Vec::new();
    for (step, op) in ops.iter().enumerate() {
        let now = step as u64 / 3;
        match *op {
            BookOp::Place {
                side,
                price,
                qty,
                agent,
            } => {
                let id = placed.len() as OrderId + 1;
                placed.push(id);
                book.place_limit(
                    Order {
                        id,
                        agent,
                        side,
                        price: Price(price),
                        quantity: qty,
                    },
                    now,
                )
                .map_err(|e| e.to_string())?;
                reference.place(id, side, price, qty);
            }
            BookOp::Cancel { pick } => {
                if placed.is_empty() {
                    continue;
                }
                let id = placed[pick % placed.len()];
                book.cancel(id, now).map_err(|e| e.to_string())?;
                reference.cancel(id);
            }
        }
        if let (Some(b), Some(a)) = (book.best_bid(), book.best_ask()) {
            if b >= a {
                return Err(format!("step {step}: crossed book {b} >= {a}"));
            }
        }
    }

    let trades: Vec<_> = book
        .trades()
        .iter()
        .map(|t| (t.price.ticks(), t.quantity, t.buy_order, t.sell_order))
        .collect();
    if trades != reference.trades {
        return Err("trade sequence differs from the price-time reference".into());
    }

    let snapshot = book.snapshot();
    let mut remaining = std::collections::HashMap::new();
    for (_, queue) in snapshot.bids.iter().chain(&snapshot.asks) {
        for &(id, qty) in queue {
            remaining.insert(id, qty);
        }
    }
    let mut executed = std::collections::HashMap::<OrderId, u32>::new();
    let mut cancelled = std::collections::HashMap::<OrderId, u32>::new();
    let mut original = std::collections::HashMap::<OrderId, u32>::new();
    let mut net = std::collections::HashMap::<usize, i64>::new();
    for e in book.events() {
        use cdasim::orderbook::EventKind;
        match e.kind {
            EventKind::Placed => {
                original.insert(e.order_id, e.quantity);
            }
            EventKind::Executed => {
                *executed.entry(e.order_id).or_default() += e.quantity;
                let signed = match e.side {
                    Side::Buy => e.quantity as i64,
                    Side::Sell => -(e.quantity as i64),
                };
                *net.entry(e.agent).or_default() += signed;
            }
            EventKind::Cancelled => {
                cancelled.insert(e.order_id, e.quantity);
            }
        }
    }
    for (id, qty) in &original {
        let accounted = executed.get(id).copied().unwrap_or(0)
            + cancelled.get(id).copied().unwrap_or(0)
            + remaining.get(id).copied().unwrap_or(0);
        if accounted != *qty {
            return Err(format!(
                "order {id}: {qty} placed but {accounted} accounted for"
            ));
        }
    }
    if net.values().sum::<i64>() != 0 {
        return Err("net holdings do not sum to zero".into());
    }
    let mut cash = std::collections::HashMap::<usize, i64>::new();
    for t in book.trades() {
        let value = t.price.ticks() * t.quantity as i64;
        *cash.entry(t.buyer).or_default() -= value;
        *cash.entry(t.seller).or_default() += value;
    }
    if cash.values().sum::<i64>() != 0 {
        return Err("cash is not conserved".into());
    }

    let replayed = OrderBook::replay(book.events()).map_err(|e| e.to_string())?;
    if replayed.events() != book.events() || replayed.snapshot() != snapshot {
        return Err("replaying the log does not reproduce the book".into());
    }
    Ok(())
}

pub fn events_of(book: &OrderBook) -> Vec<BookEvent> {
    book.events().to_vec()
}
