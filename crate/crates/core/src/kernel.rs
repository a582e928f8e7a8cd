//! The event loop.
//!
//! Every agent's wake times are drawn up front from its own Poisson stream.
//! Wakes are then served in `(time, agent_id)` order. On each wake the agent
//! observes the fundamental with noise, updates its belief, cancels its
//! resting order and acts. At the horizon every agent is paid
//!
//! ```text
//! payoff = cash + q * r_T + sum(theta^1..=theta^q)        (q > 0)
//! payoff = cash + q * r_T - sum(theta^{q+1}..=theta^0)    (q < 0)
//! ```

use rand_distr::{Distribution, Exp, StandardNormal};
use thiserror::Error;

use crate::agents::{
    hbl_classify, hbl_decide, zi_decide, ClassifyError, Decision, DecisionDetail, Strategy,
};
use crate::config::{ConfigError, SimConfig};
use crate::estimator::{BeliefState, EstimatorError};
use crate::fundamental::{FundamentalError, FundamentalSource};
use crate::orderbook::{AgentId, BookError, BookEvent, Order, OrderBook, OrderId, Trade};
use crate::preferences::{PreferenceError, PrivateValues, Side};
use crate::price::{Price, TickSize};
use crate::rng::{self, SimRng};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("fundamental: {0}")]
    Fundamental(#[from] FundamentalError),
    #[error("estimator: {0}")]
    Estimator(#[from] EstimatorError),
    #[error("order book: {0}")]
    Book(#[from] BookError),
    #[error("HBL memory: {0}")]
    Classify(#[from] ClassifyError),
    #[error("preferences: {0}")]
    Preferences(#[from] PreferenceError),
    #[error("invariant violated at t={time}: {message}")]
    Invariant { time: u64, message: String },
}

impl SimError {
    /// Errors caused by the inputs rather than by the simulation itself.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            SimError::Config(_)
                | SimError::Fundamental(
                    FundamentalError::Io { .. }
                        | FundamentalError::Parse { .. }
                        | FundamentalError::EmptyTable
                        | FundamentalError::BeforeFirstTimestamp { .. }
                )
        )
    }
}

/// Wake times for one agent: ceilings of cumulative exponential
/// inter-arrival draws, strictly increasing, truncated at `horizon`.
pub fn schedule_arrivals(rate: f64, horizon: u64, rng: &mut SimRng) -> Vec<u64> {
    let exp = Exp::new(rate).expect("arrival rate validated positive");
    let mut clock = 0.0f64;
    let mut times: Vec<u64> = Vec::new();
    loop {
        clock += exp.sample(rng);
        let mut t = clock.ceil();
        if t > horizon as f64 {
            break;
        }
        if let Some(&last) = times.last() {
            if t as u64 <= last {
                t = (last + 1) as f64;
                if t > horizon as f64 {
                    break;
                }
            }
        }
        times.push(t as u64);
    }
    times
}

/// Noisy private observation `o_t = r_t + n_t`, rounded to a tick and floored at zero.
pub fn mark_observation(
    true_value: Price,
    sigma_n_sq: f64,
    tick: TickSize,
    rng: &mut SimRng,
) -> Price {
    let z: f64 = StandardNormal.sample(rng);
    tick.round_nonneg(true_value.to_real(tick) + sigma_n_sq.sqrt() * z)
}

#[derive(Clone, Debug)]
pub struct AgentRecord {
    pub id: AgentId,
    pub strategy: Strategy,
    /// Cash in ticks, so that zero-sum accounting is exact.
    pub cash: i64,
    pub held: i64,
    pub private_values: PrivateValues,
    pub belief: BeliefState,
    pub open_order: Option<OrderId>,
    rng: SimRng,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentOutcome {
    pub id: AgentId,
    pub strategy: Strategy,
    pub cash: f64,
    pub held: i64,
    pub payoff: f64,
    pub private_values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorRow {
    pub agent: AgentId,
    pub time: u64,
    pub delta: u64,
    pub observation: Price,
    pub r_tilde: f64,
    pub sigma_tilde_sq: f64,
    pub r_hat: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecisionRow {
    pub time: u64,
    pub agent: AgentId,
    pub strategy: Strategy,
    pub held: i64,
    pub decision: Decision,
}

#[derive(Clone, Debug)]
pub struct SimResult {
    pub master_seed: u64,
    pub tick: TickSize,
    pub final_fundamental: Price,
    pub agents: Vec<AgentOutcome>,
    pub events: Vec<BookEvent>,
    pub trades: Vec<Trade>,
    /// The fundamental at every step for dense sources, at every queried
    /// time for sparse ones.
    pub fundamental_trace: Vec<(u64, Price)>,
    pub estimator_trace: Vec<EstimatorRow>,
    pub decision_trace: Vec<DecisionRow>,
    pub wakes: u64,
    pub invariant_checks: u64,
}

impl SimResult {
    pub fn total_payoff(&self) -> f64 {
        self.agents.iter().map(|a| a.payoff).sum()
    }
}

/// Runs one simulation with `config.market.seed` as the master seed.
pub fn run(config: &SimConfig) -> Result<SimResult, SimError> {
    config.validate()?;
    let seed = config.market.seed;
    let horizon = config.market.horizon;
    let tick = config.tick();
    let estimator = config.estimator_params();
    let zi_params = config.agents.zi_params();
    let hbl_params = config.agents.hbl_params();

    let mut fundamental = FundamentalSource::from_spec(&config.fundamental, seed, horizon, tick)?;
    let r0 = fundamental.value_at(0)?;
    let mut trace: Vec<(u64, Price)> = vec![(0, r0)];
    let belief0 = BeliefState::initial(r0.to_real(tick));

    let mut agents = Vec::with_capacity(config.agents.total());
    let mut wakes: Vec<(u64, AgentId)> = Vec::new();
    for id in 0..config.agents.total() {
        let strategy = if id < config.agents.zi_count {
            Strategy::Zi
        } else {
            Strategy::Hbl
        };
        let mut rng = rng::agent_stream(seed, id);
        let private_values =
            PrivateValues::draw(config.agents.q_max, config.agents.sigma_pv_sq, &mut rng)?;
        let mut arrivals = rng::arrival_stream(seed, id);
        wakes.extend(
            schedule_arrivals(config.agents.arrival_rate, horizon, &mut arrivals)
                .into_iter()
                .map(|t| (t, id)),
        );
        agents.push(AgentRecord {
            id,
            strategy,
            cash: 0,
            held: 0,
            private_values,
            belief: belief0,
            open_order: None,
            rng,
        });
    }
    wakes.sort_unstable();

    let mut book = OrderBook::new();
    let mut next_order: OrderId = 1;
    let mut estimator_trace = Vec::new();
    let mut decision_trace = Vec::new();
    let mut invariant_checks = 0u64;

    for &(now, id) in &wakes {
        let true_value = fundamental.value_at(now)?;
        if fundamental.is_sparse() && trace.last().is_none_or(|&(t, _)| t != now) {
            trace.push((now, true_value));
        }

        let agent = &mut agents[id];
        let observation = mark_observation(true_value, estimator.sigma_n_sq, tick, &mut agent.rng);
        let delta = now - agent.belief.last_wake;
        agent.belief = agent
            .belief
            .advance(now, &estimator)?
            .observe(observation.to_real(tick), &estimator);
        let r_hat = agent.belief.project_final(&estimator);
        if config.output.trace_estimator {
            estimator_trace.push(EstimatorRow {
                agent: id,
                time: now,
                delta,
                observation,
                r_tilde: agent.belief.r_tilde,
                sigma_tilde_sq: agent.belief.sigma_tilde_sq,
                r_hat,
            });
        }

        if let Some(old) = agent.open_order.take() {
            book.cancel(old, now)?;
        }

        let (best_bid, best_ask) = (book.best_bid(), book.best_ask());
        let decision = match agent.strategy {
            Strategy::Zi => zi_decide(
                agent.held,
                &agent.private_values,
                r_hat,
                best_bid,
                best_ask,
                &zi_params,
                tick,
                &mut agent.rng,
            ),
            Strategy::Hbl => {
                let memory = hbl_classify(book.events(), now, &hbl_params)?;
                hbl_decide(
                    agent.held,
                    &agent.private_values,
                    r_hat,
                    &memory,
                    best_bid,
                    best_ask,
                    &hbl_params,
                    tick,
                    &mut agent.rng,
                )
            }
        };
        if config.output.trace_decisions {
            decision_trace.push(DecisionRow {
                time: now,
                agent: id,
                strategy: agent.strategy,
                held: agent.held,
                decision,
            });
        }

        if let Some((side, price)) = decision.action.order() {
            let order_id = next_order;
            next_order += 1;
            let trades_before = book.trades().len();
            book.place_limit(
                Order {
                    id: order_id,
                    agent: id,
                    side,
                    price,
                    quantity: 1,
                },
                now,
            )?;
            if book.is_live(order_id) {
                agents[id].open_order = Some(order_id);
            }
            for trade in &book.trades()[trades_before..] {
                settle(&mut agents, trade);
            }
            for agent in agents.iter_mut() {
                if agent.open_order.is_some_and(|o| !book.is_live(o)) {
                    agent.open_order = None;
                }
            }
        }

        check_invariants(&agents, &book, config.agents.q_max, now)?;
        invariant_checks += 1;
    }

    let final_fundamental = fundamental.value_at(horizon)?;
    if fundamental.is_sparse() {
        if trace.last().is_none_or(|&(t, _)| t != horizon) {
            trace.push((horizon, final_fundamental));
        }
    } else {
        trace = (0..=horizon)
            .map(|t| fundamental.value_at(t).map(|v| (t, v)))
            .collect::<Result<_, _>>()?;
    }

    let r_t = final_fundamental.to_real(tick);
    let outcomes = agents
        .iter()
        .map(|a| {
            let cash = a.cash as f64 * tick.value();
            AgentOutcome {
                id: a.id,
                strategy: a.strategy,
                cash,
                held: a.held,
                payoff: cash + a.held as f64 * r_t + a.private_values.realized(a.held),
                private_values: a.private_values.values().to_vec(),
            }
        })
        .collect();

    Ok(SimResult {
        master_seed: seed,
        tick,
        final_fundamental,
        agents: outcomes,
        events: book.events().to_vec(),
        trades: book.trades().to_vec(),
        fundamental_trace: trace,
        estimator_trace,
        decision_trace,
        wakes: wakes.len() as u64,
        invariant_checks,
    })
}

fn settle(agents: &mut [AgentRecord], trade: &Trade) {
    let value = trade.price.ticks() * trade.quantity as i64;
    let qty = trade.quantity as i64;
    agents[trade.buyer].cash -= value;
    agents[trade.buyer].held += qty;
    agents[trade.seller].cash += value;
    agents[trade.seller].held -= qty;
}

fn check_invariants(
    agents: &[AgentRecord],
    book: &OrderBook,
    q_max: i64,
    time: u64,
) -> Result<(), SimError> {
    let breach = |message: String| Err(SimError::Invariant { time, message });
    let cash: i64 = agents.iter().map(|a| a.cash).sum();
    if cash != 0 {
        return breach(format!("cash sums to {cash} ticks"));
    }
    let held: i64 = agents.iter().map(|a| a.held).sum();
    if held != 0 {
        return breach(format!("holdings sum to {held}"));
    }
    if let Some(a) = agents.iter().find(|a| a.held.abs() > q_max) {
        return breach(format!(
            "agent {} holds {} beyond q_max {q_max}",
            a.id, a.held
        ));
    }
    let open = agents.iter().filter(|a| a.open_order.is_some()).count();
    if open != book.live_orders()
        || agents
            .iter()
            .any(|a| a.open_order.is_some_and(|o| !book.is_live(o)))
    {
        return breach(format!(
            "{} live orders for {open} agents with an open order",
            book.live_orders()
        ));
    }
    if let (Some(bid), Some(ask)) = (book.best_bid(), book.best_ask()) {
        if bid >= ask {
            return breach(format!("book crossed: bid {bid} >= ask {ask}"));
        }
    }
    Ok(())
}

/// Side label used in logs.
pub fn side_label(side: Side) -> &'static str {
    match side {
        Side::Buy => "BID",
        Side::Sell => "ASK",
    }
}

/// Short text form of the strategy-specific decision inputs.
pub fn detail_digest(detail: &DecisionDetail) -> String {
    match detail {
        DecisionDetail::None => String::new(),
        DecisionDetail::Zi { requested_surplus } => format!("R={requested_surplus}"),
        DecisionDetail::Hbl {
            probability,
            expected_surplus,
        } => format!("Pr={probability};E={expected_surplus}"),
    }
}
