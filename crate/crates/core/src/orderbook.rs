//! Price-time priority limit order book with an append-only event log.
//!
//! Incoming orders match against the opposite side while they cross. A trade
//! always prints at the resting order's limit price. Each trade appends two
//! `Executed` events, resting order first, so every order's fate can be read
//! back from the log alone.

use std::collections::{BTreeMap, HashMap, VecDeque};

use thiserror::Error;

use crate::preferences::Side;
use crate::price::Price;

pub type OrderId = u64;
pub type AgentId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum BookError {
    #[error("order id {0} was already used")]
    DuplicateOrderId(OrderId),
    #[error("order {0} has zero quantity")]
    ZeroQuantity(OrderId),
    #[error("order {0} has a negative limit price")]
    NegativePrice(OrderId),
    #[error("book time went backwards: {now} < {last}")]
    TimeRegression { now: u64, last: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Order {
    pub id: OrderId,
    pub agent: AgentId,
    pub side: Side,
    pub price: Price,
    pub quantity: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Placed,
    Executed,
    Cancelled,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Placed => "PLACED",
            EventKind::Executed => "EXECUTED",
            EventKind::Cancelled => "CANCELLED",
        }
    }
}

/// One row of the book's log. `agent` and `side` always describe the owner
/// of `order_id`. For `Executed`, `price` is the trade price and `quantity`
/// the filled amount; otherwise they are the order's limit and size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BookEvent {
    pub time: u64,
    pub kind: EventKind,
    pub order_id: OrderId,
    pub agent: AgentId,
    pub side: Side,
    pub price: Price,
    pub quantity: u32,
    pub counterparty: Option<OrderId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Trade {
    pub time: u64,
    pub price: Price,
    pub quantity: u32,
    pub buy_order: OrderId,
    pub sell_order: OrderId,
    pub buyer: AgentId,
    pub seller: AgentId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Resting {
    id: OrderId,
    agent: AgentId,
    remaining: u32,
}

/// Resting state of one side: `(price, [(order_id, remaining)])` in priority order.
pub type SideSnapshot = Vec<(Price, Vec<(OrderId, u32)>)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BookSnapshot {
    pub bids: SideSnapshot,
    pub asks: SideSnapshot,
}

#[derive(Clone, Debug, Default)]
pub struct OrderBook {
    bids: BTreeMap<Price, VecDeque<Resting>>,
    asks: BTreeMap<Price, VecDeque<Resting>>,
    // live orders only
    live: HashMap<OrderId, (Side, Price)>,
    // every order ever placed -> index of its Placed event
    placed_at: HashMap<OrderId, usize>,
    events: Vec<BookEvent>,
    trades: Vec<Trade>,
}

impl OrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    fn last_time(&self) -> u64 {
        self.events.last().map_or(0, |e| e.time)
    }

    fn check_time(&self, now: u64) -> Result<(), BookError> {
        let last = self.last_time();
        if now < last {
            return Err(BookError::TimeRegression { now, last });
        }
        Ok(())
    }

    /// Matches `order` against the book and rests any remainder.
    /// Returns the events this call appended.
    pub fn place_limit(&mut self, order: Order, now: u64) -> Result<Vec<BookEvent>, BookError> {
        if self.placed_at.contains_key(&order.id) {
            return Err(BookError::DuplicateOrderId(order.id));
        }
        if order.quantity == 0 {
            return Err(BookError::ZeroQuantity(order.id));
        }
        if order.price < Price::ZERO {
            return Err(BookError::NegativePrice(order.id));
        }
        self.check_time(now)?;

        let first_new = self.events.len();
        self.placed_at.insert(order.id, first_new);
        self.events.push(BookEvent {
            time: now,
            kind: EventKind::Placed,
            order_id: order.id,
            agent: order.agent,
            side: order.side,
            price: order.price,
            quantity: order.quantity,
            counterparty: None,
        });

        let mut remaining = order.quantity;
        while remaining > 0 {
            let opposite = match order.side {
                Side::Buy => &mut self.asks,
                Side::Sell => &mut self.bids,
            };
            let level = match order.side {
                Side::Buy => opposite.first_entry().filter(|e| *e.key() <= order.price),
                Side::Sell => opposite.last_entry().filter(|e| *e.key() >= order.price),
            };
            let Some(mut level) = level else { break };
            let price = *level.key();
            let queue = level.get_mut();
            let maker = queue.front_mut().expect("empty levels are removed");
            let fill = remaining.min(maker.remaining);
            maker.remaining -= fill;
            remaining -= fill;
            let maker = *maker;
            if maker.remaining == 0 {
                queue.pop_front();
                self.live.remove(&maker.id);
                if queue.is_empty() {
                    level.remove();
                }
            }

            let (buy, sell) = match order.side {
                Side::Buy => ((order.id, order.agent), (maker.id, maker.agent)),
                Side::Sell => ((maker.id, maker.agent), (order.id, order.agent)),
            };
            self.trades.push(Trade {
                time: now,
                price,
                quantity: fill,
                buy_order: buy.0,
                sell_order: sell.0,
                buyer: buy.1,
                seller: sell.1,
            });
            for (id, agent, side, counterparty) in [
                (maker.id, maker.agent, order.side.opposite(), order.id),
                (order.id, order.agent, order.side, maker.id),
            ] {
                self.events.push(BookEvent {
                    time: now,
                    kind: EventKind::Executed,
                    order_id: id,
                    agent,
                    side,
                    price,
                    quantity: fill,
                    counterparty: Some(counterparty),
                });
            }
        }

        if remaining > 0 {
            let own = match order.side {
                Side::Buy => &mut self.bids,
                Side::Sell => &mut self.asks,
            };
            own.entry(order.price).or_default().push_back(Resting {
                id: order.id,
                agent: order.agent,
                remaining,
            });
            self.live.insert(order.id, (order.side, order.price));
        }
        Ok(self.events[first_new..].to_vec())
    }

    /// Removes a resting order. `Ok(None)` when it is unknown or already filled.
    pub fn cancel(&mut self, order_id: OrderId, now: u64) -> Result<Option<BookEvent>, BookError> {
        let Some(&(side, price)) = self.live.get(&order_id) else {
            return Ok(None);
        };
        self.check_time(now)?;
        self.live.remove(&order_id);
        let book = match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        };
        let queue = book.get_mut(&price).expect("live order has a level");
        let pos = queue
            .iter()
            .position(|r| r.id == order_id)
            .expect("live order is queued");
        let resting = queue.remove(pos).expect("position is valid");
        if queue.is_empty() {
            book.remove(&price);
        }
        let event = BookEvent {
            time: now,
            kind: EventKind::Cancelled,
            order_id,
            agent: resting.agent,
            side,
            price,
            quantity: resting.remaining,
            counterparty: None,
        };
        self.events.push(event);
        Ok(Some(event))
    }

    pub fn best_bid(&self) -> Option<Price> {
        self.bids.keys().next_back().copied()
    }

    pub fn best_ask(&self) -> Option<Price> {
        self.asks.keys().next().copied()
    }

    pub fn is_live(&self, order_id: OrderId) -> bool {
        self.live.contains_key(&order_id)
    }

    pub fn live_orders(&self) -> usize {
        self.live.len()
    }

    pub fn events(&self) -> &[BookEvent] {
        &self.events
    }

    /// Events with `from <= time <= to`.
    pub fn events_between(&self, from: u64, to: u64) -> &[BookEvent] {
        let lo = self.events.partition_point(|e| e.time < from);
        let hi = self.events.partition_point(|e| e.time <= to);
        &self.events[lo..hi.max(lo)]
    }

    pub fn trades(&self) -> &[Trade] {
        &self.trades
    }

    /// Log position of the order's `Placed` event.
    pub fn placed_index(&self, order_id: OrderId) -> Option<usize> {
        self.placed_at.get(&order_id).copied()
    }

    pub fn snapshot(&self) -> BookSnapshot {
        fn side<'a>(
            levels: impl Iterator<Item = (&'a Price, &'a VecDeque<Resting>)>,
        ) -> SideSnapshot {
            levels
                .map(|(p, q)| (*p, q.iter().map(|r| (r.id, r.remaining)).collect()))
                .collect()
        }
        BookSnapshot {
            bids: side(self.bids.iter().rev()),
            asks: side(self.asks.iter()),
        }
    }

    /// Rebuilds a book by re-submitting every placement and cancellation in
    /// `events`. Executions are regenerated by matching, not copied.
    pub fn replay(events: &[BookEvent]) -> Result<OrderBook, BookError> {
        let mut book = OrderBook::new();
        for e in events {
            match e.kind {
                EventKind::Placed => {
                    book.place_limit(
                        Order {
                            id: e.order_id,
                            agent: e.agent,
                            side: e.side,
                            price: e.price,
                            quantity: e.quantity,
                        },
                        e.time,
                    )?;
                }
                EventKind::Cancelled => {
                    book.cancel(e.order_id, e.time)?;
                }
                EventKind::Executed => {}
            }
        }
        Ok(book)
    }
}
