//! Experiment configuration.
//!
//! Configs are TOML with four sections (`market`, `fundamental`, `agents`,
//! `output`). Every key has a default except the parameters of the `ou`,
//! `megashock` and `file` fundamentals, so an empty file is a valid config.
//! Unknown keys are rejected. See `docs/config.md` for the schema.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{GridMode, HblParams, SuccessMode, ZiParams};
use crate::estimator::EstimatorParams;
use crate::fundamental::FundamentalSpec;
use crate::price::TickSize;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("{key}: violates constraint `{constraint}`")]
    Constraint { key: String, constraint: String },
}

fn violation(key: &str, constraint: &str) -> ConfigError {
    ConfigError::Constraint {
        key: key.to_owned(),
        constraint: constraint.to_owned(),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub market: MarketConfig,
    pub fundamental: FundamentalSpec,
    pub agents: AgentsConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketConfig {
    /// Last simulated step `T`.
    pub horizon: u64,
    pub tick_size: f64,
    /// Master seed all random streams derive from.
    pub seed: u64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig {
            horizon: 100_000,
            tick_size: 0.1,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentsConfig {
    pub zi_count: usize,
    pub hbl_count: usize,
    /// Poisson wake intensity per agent, per step.
    pub arrival_rate: f64,
    /// Observation noise variance.
    pub sigma_n_sq: f64,
    pub q_max: i64,
    pub sigma_pv_sq: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub eta: f64,
    pub hbl: HblConfig,
}

impl Default for AgentsConfig {
    fn default() -> Self {
        AgentsConfig {
            zi_count: 25,
            hbl_count: 5,
            arrival_rate: 0.005,
            sigma_n_sq: 0.01,
            q_max: 10,
            sigma_pv_sq: 0.25,
            r_min: 0.0,
            r_max: 1.0,
            eta: 1.0,
            hbl: HblConfig::default(),
        }
    }
}

impl AgentsConfig {
    pub fn total(&self) -> usize {
        self.zi_count + self.hbl_count
    }

    pub fn zi_params(&self) -> ZiParams {
        ZiParams {
            r_min: self.r_min,
            r_max: self.r_max,
            eta: self.eta,
        }
    }

    pub fn hbl_params(&self) -> HblParams {
        HblParams {
            zi: self.zi_params(),
            memory_length: self.hbl.memory_length,
            grace_period: self.hbl.grace_period,
            success_mode: self.hbl.success_mode,
            grid: self.hbl.grid,
            spline_margin: self.hbl.spline_margin,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HblConfig {
    /// Number of most recent transactions remembered (`L`).
    pub memory_length: usize,
    /// Steps an unexecuted order may rest before counting as rejected.
    pub grace_period: u64,
    pub success_mode: SuccessMode,
    pub grid: GridMode,
    pub spline_margin: i64,
}

impl Default for HblConfig {
    fn default() -> Self {
        let p = HblParams::default();
        HblConfig {
            memory_length: p.memory_length,
            grace_period: p.grace_period,
            success_mode: p.success_mode,
            grid: p.grid,
            spline_margin: p.spline_margin,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub trace_estimator: bool,
    pub trace_decisions: bool,
    /// Extra copy of the fundamental series, in the loadable `timestamp,value` format.
    pub fundamental_dump: Option<PathBuf>,
}

impl SimConfig {
    pub fn tick(&self) -> TickSize {
        TickSize(self.market.tick_size)
    }

    /// Checks every constraint; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        let mut warnings = Vec::new();
        let m = &self.market;
        if m.horizon < 1 {
            return Err(violation("market.horizon", "horizon >= 1"));
        }
        if !(m.tick_size > 0.0 && m.tick_size.is_finite()) {
            return Err(violation("market.tick_size", "tick_size > 0"));
        }

        let a = &self.agents;
        if !(a.arrival_rate > 0.0 && a.arrival_rate.is_finite()) {
            return Err(violation("agents.arrival_rate", "arrival_rate > 0"));
        }
        nonneg("agents.sigma_n_sq", a.sigma_n_sq)?;
        nonneg("agents.sigma_pv_sq", a.sigma_pv_sq)?;
        if a.q_max < 1 {
            return Err(violation("agents.q_max", "q_max >= 1"));
        }
        nonneg("agents.r_min", a.r_min)?;
        if !(a.r_max >= a.r_min && a.r_max.is_finite()) {
            return Err(violation("agents.r_max", "r_min <= r_max"));
        }
        unit_interval("agents.eta", "eta", a.eta)?;
        if a.hbl.memory_length < 1 {
            return Err(violation("agents.hbl.memory_length", "memory_length >= 1"));
        }
        if a.hbl.grace_period < 1 {
            return Err(violation("agents.hbl.grace_period", "grace_period >= 1"));
        }
        if a.hbl.spline_margin < 0 {
            return Err(violation("agents.hbl.spline_margin", "spline_margin >= 0"));
        }

        match &self.fundamental {
            FundamentalSpec::Dmr(p) => {
                nonneg("fundamental.r_bar", p.r_bar)?;
                unit_interval("fundamental.kappa", "kappa", p.kappa)?;
                nonneg("fundamental.sigma_s_sq", p.sigma_s_sq)?;
            }
            FundamentalSpec::Ou(p) => check_ou("fundamental", p)?,
            FundamentalSpec::Megashock(p) => {
                check_ou("fundamental.ou", &p.ou)?;
                positive("fundamental.arrival_rate", "arrival_rate", p.arrival_rate)?;
                positive("fundamental.shock_mean", "shock_mean", p.shock_mean)?;
                positive("fundamental.shock_var", "shock_var", p.shock_var)?;
                if p.shock_var <= p.ou.sigma_sq {
                    warnings.push(format!(
                        "fundamental.shock_var ({}) is not larger than fundamental.ou.sigma_sq ({}); megashocks will be hard to tell from ordinary volatility",
                        p.shock_var, p.ou.sigma_sq
                    ));
                }
            }
            FundamentalSpec::File(p) => {
                nonneg("fundamental.r_bar", p.r_bar)?;
                unit_interval("fundamental.kappa", "kappa", p.kappa)?;
                nonneg("fundamental.sigma_s_sq", p.sigma_s_sq)?;
            }
        }
        Ok(warnings)
    }

    /// What a tuned agent knows about the fundamental process. For OU-based
    /// fundamentals the one-step OU transition is mapped onto the discrete
    /// recurrence: `kappa = 1 - e^-gamma` and `sigma_s^2` is the one-step
    /// OU variance.
    pub fn estimator_params(&self) -> EstimatorParams {
        let (r_bar, kappa, sigma_s_sq) = match &self.fundamental {
            FundamentalSpec::Dmr(p) => (p.r_bar, p.kappa, p.sigma_s_sq),
            FundamentalSpec::File(p) => (p.r_bar, p.kappa, p.sigma_s_sq),
            FundamentalSpec::Ou(p) => ou_as_discrete(p),
            FundamentalSpec::Megashock(p) => ou_as_discrete(&p.ou),
        };
        EstimatorParams {
            r_bar,
            kappa,
            sigma_s_sq,
            sigma_n_sq: self.agents.sigma_n_sq,
            horizon: self.market.horizon,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }
}

fn ou_as_discrete(p: &crate::fundamental::OuParams) -> (f64, f64, f64) {
    let kappa = -(-p.gamma).exp_m1();
    let sigma_s_sq = p.sigma_sq / (2.0 * p.gamma) * -(-2.0 * p.gamma).exp_m1();
    (p.mu, kappa, sigma_s_sq)
}

fn check_ou(prefix: &str, p: &crate::fundamental::OuParams) -> Result<(), ConfigError> {
    nonneg(&format!("{prefix}.mu"), p.mu)?;
    positive(&format!("{prefix}.gamma"), "gamma", p.gamma)?;
    nonneg(&format!("{prefix}.sigma_sq"), p.sigma_sq)?;
    nonneg(&format!("{prefix}.q0"), p.q0)
}

fn nonneg(key: &str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        let name = key.rsplit('.').next().unwrap_or(key);
        Err(violation(key, &format!("{name} >= 0")))
    }
}

fn positive(key: &str, name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(violation(key, &format!("{name} > 0")))
    }
}

fn unit_interval(key: &str, name: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(violation(key, &format!("{name} in [0,1]")))
    }
}

/// Parses and validates a TOML config. Returns the config and any warnings.
pub fn parse_config(text: &str) -> Result<(SimConfig, Vec<String>), ConfigError> {
    let config: SimConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let warnings = config.validate()?;
    Ok((config, warnings))
}
