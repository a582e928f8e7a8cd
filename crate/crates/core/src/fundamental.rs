//! The exogenous fundamental value series.
//!
//! One series exists per simulation. It is a pure function of the master
//! seed, the process parameters and the query time; nothing an agent does
//! can move it. Four sources are available:
//!
//! * discrete mean reversion, evaluated densely and memoized,
//! * Ornstein-Uhlenbeck, sampled sparsely from its exact transition law,
//! * Ornstein-Uhlenbeck with Poisson "megashock" jumps,
//! * a step-interpolated table loaded from disk.
//!
//! The sparse sources only accept queries in nondecreasing time.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::price::{Price, TickSize};
use crate::rng::{self, SimRng};

#[derive(Debug, Error)]
pub enum FundamentalError {
    #[error("time {t} is beyond the horizon {horizon}")]
    OutOfRange { t: u64, horizon: u64 },
    #[error("queries must be nondecreasing in time: got {t} after {last}")]
    TimeRegression { t: u64, last: u64 },
    #[error("elapsed time must be positive, got {0}")]
    NonPositiveElapsed(f64),
    #[error("time {t} precedes the first table timestamp {first}")]
    BeforeFirstTimestamp { t: u64, first: u64 },
    #[error("fundamental table is empty")]
    EmptyTable,
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, FundamentalError>;

/// Discrete mean-reverting process `r_t = max{0, kappa*r_bar + (1-kappa)*r_{t-1} + u_t}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DmrParams {
    /// Mean fundamental, also the starting value.
    pub r_bar: f64,
    /// Mean reversion per step, in `[0, 1]`.
    pub kappa: f64,
    /// Variance of the per-step shock `u_t`.
    pub sigma_s_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuParams {
    pub mu: f64,
    /// Reversion rate per unit time, strictly positive.
    pub gamma: f64,
    pub sigma_sq: f64,
    /// Value at `t = 0`.
    pub q0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MegashockParams {
    /// The underlying process the shocks are layered on.
    pub ou: OuParams,
    /// Expected shocks per unit time.
    pub arrival_rate: f64,
    /// Distance of each Gaussian lobe's mean from zero.
    pub shock_mean: f64,
    pub shock_var: f64,
}

/// A historical or externally generated series plus the process parameters
/// agents use to reason about it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileParams {
    pub path: PathBuf,
    pub r_bar: f64,
    pub kappa: f64,
    pub sigma_s_sq: f64,
}

/// Which process drives the fundamental, with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FundamentalSpec {
    Dmr(DmrParams),
    Ou(OuParams),
    Megashock(MegashockParams),
    File(FileParams),
}

impl Default for DmrParams {
    fn default() -> Self {
        DmrParams {
            r_bar: 100.0,
            kappa: 0.001,
            sigma_s_sq: 0.001,
        }
    }
}

impl Default for FundamentalSpec {
    fn default() -> Self {
        FundamentalSpec::Dmr(DmrParams::default())
    }
}

/// One step of the discrete mean-reverting recurrence, in real arithmetic.
pub fn dmr_step(prev: f64, params: &DmrParams, noise_draw: f64) -> f64 {
    (params.kappa * params.r_bar + (1.0 - params.kappa) * prev + noise_draw).max(0.0)
}

/// Exact OU transition over `elapsed` time units, floored at zero.
pub fn ou_transition(
    q_prev: f64,
    elapsed: f64,
    params: &OuParams,
    std_normal_draw: f64,
) -> Result<f64> {
    if elapsed.is_nan() || elapsed <= 0.0 {
        return Err(FundamentalError::NonPositiveElapsed(elapsed));
    }
    let decay = (-params.gamma * elapsed).exp();
    let mean = params.mu + (q_prev - params.mu) * decay;
    // 1 - e^{-2 gamma t}, computed without cancellation for small t
    let var = params.sigma_sq / (2.0 * params.gamma) * -(-2.0 * params.gamma * elapsed).exp_m1();
    Ok((mean + var.sqrt() * std_normal_draw).max(0.0))
}

/// [`ou_transition`] rounded to a tick.
pub fn ou_sample(
    q_prev: f64,
    elapsed: f64,
    params: &OuParams,
    std_normal_draw: f64,
    tick: TickSize,
) -> Result<Price> {
    ou_transition(q_prev, elapsed, params, std_normal_draw).map(|q| tick.round_nonneg(q))
}

/// One draw from the symmetric two-lobe megashock mixture.
pub fn draw_megashock(rng: &mut SimRng, params: &MegashockParams) -> f64 {
    let lobe = if rng.random_bool(0.5) {
        params.shock_mean
    } else {
        -params.shock_mean
    };
    let z: f64 = StandardNormal.sample(rng);
    lobe + params.shock_var.sqrt() * z
}

/// Densely evaluated discrete mean-reverting series.
#[derive(Clone, Debug)]
pub struct DmrSource {
    params: DmrParams,
    horizon: u64,
    tick: TickSize,
    rng: SimRng,
    noise_sd: f64,
    // real-valued r_0..=r_k computed so far
    prefix: Vec<f64>,
}

impl DmrSource {
    pub fn new(params: DmrParams, horizon: u64, tick: TickSize, rng: SimRng) -> Self {
        let start = params.r_bar.max(0.0);
        Self::with_start(params, horizon, tick, rng, start)
    }

    /// Starts the series at `r0` instead of the mean.
    pub fn with_start(
        params: DmrParams,
        horizon: u64,
        tick: TickSize,
        rng: SimRng,
        r0: f64,
    ) -> Self {
        let noise_sd = params.sigma_s_sq.sqrt();
        DmrSource {
            params,
            horizon,
            tick,
            rng,
            noise_sd,
            prefix: vec![r0],
        }
    }

    pub fn real_value_at(&mut self, t: u64) -> Result<f64> {
        if t > self.horizon {
            return Err(FundamentalError::OutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let t = t as usize;
        while self.prefix.len() <= t {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            let prev = *self.prefix.last().expect("prefix starts with r0");
            self.prefix
                .push(dmr_step(prev, &self.params, self.noise_sd * z));
        }
        Ok(self.prefix[t])
    }

    pub fn value_at(&mut self, t: u64) -> Result<Price> {
        let r = self.real_value_at(t)?;
        Ok(self.tick.round_nonneg(r))
    }
}

/// Sparse OU sampler, optionally with megashock jumps layered on top.
#[derive(Clone, Debug)]
pub struct OuSource {
    params: OuParams,
    shocks: Option<ShockOverlay>,
    horizon: u64,
    tick: TickSize,
    rng: SimRng,
    // continuous clock of the cached state; may sit on a shock arrival
    state_time: f64,
    state: f64,
    last_query: u64,
}

#[derive(Clone, Debug)]
struct ShockOverlay {
    params: MegashockParams,
    inter_arrival: Exp<f64>,
    arrivals: SimRng,
    sizes: SimRng,
    next_arrival: f64,
}

impl OuSource {
    pub fn new(params: OuParams, horizon: u64, tick: TickSize, rng: SimRng) -> Self {
        OuSource {
            state: params.q0.max(0.0),
            params,
            shocks: None,
            horizon,
            tick,
            rng,
            state_time: 0.0,
            last_query: 0,
        }
    }

    /// OU plus Poisson-arriving bimodal jumps. `arrival_rate` must be positive.
    pub fn with_megashocks(
        params: MegashockParams,
        horizon: u64,
        tick: TickSize,
        rng: SimRng,
        mut arrivals: SimRng,
        sizes: SimRng,
    ) -> Self {
        let inter_arrival = Exp::new(params.arrival_rate).expect("arrival_rate validated positive");
        let next_arrival = inter_arrival.sample(&mut arrivals);
        let mut source = OuSource::new(params.ou.clone(), horizon, tick, rng);
        source.shocks = Some(ShockOverlay {
            params,
            inter_arrival,
            arrivals,
            sizes,
            next_arrival,
        });
        source
    }

    fn hop_to(&mut self, time: f64) -> Result<()> {
        let elapsed = time - self.state_time;
        if elapsed > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.state = ou_transition(self.state, elapsed, &self.params, z)?;
            self.state_time = time;
        }
        Ok(())
    }

    pub fn real_value_at(&mut self, t: u64) -> Result<f64> {
        if t > self.horizon {
            return Err(FundamentalError::OutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        if t < self.last_query {
            return Err(FundamentalError::TimeRegression {
                t,
                last: self.last_query,
            });
        }
        let target = t as f64;
        while let Some(next) = self
            .shocks
            .as_ref()
            .map(|s| s.next_arrival)
            .filter(|&a| a <= target)
        {
            self.hop_to(next)?;
            let overlay = self.shocks.as_mut().expect("checked above");
            let jump = draw_megashock(&mut overlay.sizes, &overlay.params);
            overlay.next_arrival = next + overlay.inter_arrival.sample(&mut overlay.arrivals);
            self.state = (self.state + jump).max(0.0);
        }
        self.hop_to(target)?;
        self.last_query = t;
        Ok(self.state)
    }

    pub fn value_at(&mut self, t: u64) -> Result<Price> {
        let q = self.real_value_at(t)?;
        Ok(self.tick.round_nonneg(q))
    }
}

/// Step-interpolated `(timestamp, value)` table.
#[derive(Clone, Debug, PartialEq)]
pub struct FileSeries {
    rows: Vec<(u64, Price)>,
}

impl FileSeries {
    pub fn from_rows(rows: Vec<(u64, Price)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(FundamentalError::EmptyTable);
        }
        for (i, w) in rows.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(FundamentalError::Parse {
                    line: i as u64 + 2,
                    message: format!("timestamp {} is not after {}", w[1].0, w[0].0),
                });
            }
        }
        Ok(FileSeries { rows })
    }

    pub fn load(path: &Path, tick: TickSize) -> Result<Self> {
        let file = File::open(path).map_err(|source| FundamentalError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(file, tick)
    }

    /// Parses `timestamp,value` lines. A non-numeric first line is taken as a header.
    pub fn parse<R: Read>(reader: R, tick: TickSize) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut rows: Vec<(u64, Price)> = Vec::new();
        for (i, record) in csv.records().enumerate() {
            let record = record.map_err(|e| FundamentalError::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(i as u64 + 1, |p| p.line());
            if record.len() != 2 {
                return Err(FundamentalError::Parse {
                    line,
                    message: format!("expected 2 columns, found {}", record.len()),
                });
            }
            let ts = match record[0].parse::<u64>() {
                Ok(ts) => ts,
                Err(_) if i == 0 => continue,
                Err(e) => {
                    return Err(FundamentalError::Parse {
                        line,
                        message: format!("bad timestamp {:?}: {e}", &record[0]),
                    })
                }
            };
            let value = record[1]
                .parse::<f64>()
                .map_err(|e| FundamentalError::Parse {
                    line,
                    message: format!("bad value {:?}: {e}", &record[1]),
                })?;
            if !value.is_finite() {
                return Err(FundamentalError::Parse {
                    line,
                    message: format!("value {value} is not finite"),
                });
            }
            if let Some(&(prev, _)) = rows.last() {
                if ts <= prev {
                    return Err(FundamentalError::Parse {
                        line,
                        message: format!("timestamp {ts} is not after {prev}"),
                    });
                }
            }
            rows.push((ts, tick.round_nonneg(value)));
        }
        Self::from_rows(rows)
    }

    pub fn value_at(&self, t: u64) -> Result<Price> {
        let idx = self.rows.partition_point(|&(ts, _)| ts <= t);
        if idx == 0 {
            return Err(FundamentalError::BeforeFirstTimestamp {
                t,
                first: self.rows[0].0,
            });
        }
        Ok(self.rows[idx - 1].1)
    }

    pub fn rows(&self) -> &[(u64, Price)] {
        &self.rows
    }
}

/// The single fundamental series of a run.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum FundamentalSource {
    Dmr(DmrSource),
    Ou(OuSource),
    File { series: FileSeries, horizon: u64 },
}

impl FundamentalSource {
    /// Builds the source from its spec, drawing randomness from the labelled
    /// streams of `master_seed`.
    pub fn from_spec(
        spec: &FundamentalSpec,
        master_seed: u64,
        horizon: u64,
        tick: TickSize,
    ) -> Result<Self> {
        let fundamental = rng::stream(master_seed, rng::FUNDAMENTAL);
        Ok(match spec {
            FundamentalSpec::Dmr(p) => {
                FundamentalSource::Dmr(DmrSource::new(p.clone(), horizon, tick, fundamental))
            }
            FundamentalSpec::Ou(p) => {
                FundamentalSource::Ou(OuSource::new(p.clone(), horizon, tick, fundamental))
            }
            FundamentalSpec::Megashock(p) => FundamentalSource::Ou(OuSource::with_megashocks(
                p.clone(),
                horizon,
                tick,
                fundamental,
                rng::stream(master_seed, rng::MEGASHOCK_ARRIVALS),
                rng::stream(master_seed, rng::MEGASHOCK_SIZES),
            )),
            FundamentalSpec::File(p) => FundamentalSource::File {
                series: FileSeries::load(&p.path, tick)?,
                horizon,
            },
        })
    }

    pub fn value_at(&mut self, t: u64) -> Result<Price> {
        match self {
            FundamentalSource::Dmr(s) => s.value_at(t),
            FundamentalSource::Ou(s) => s.value_at(t),
            FundamentalSource::File { series, horizon } => {
                if t > *horizon {
                    return Err(FundamentalError::OutOfRange {
                        t,
                        horizon: *horizon,
                    });
                }
                series.value_at(t)
            }
        }
    }

    /// Sparse sources realize their path only at the times they are queried.
    pub fn is_sparse(&self) -> bool {
        matches!(self, FundamentalSource::Ou(_))
    }
}
