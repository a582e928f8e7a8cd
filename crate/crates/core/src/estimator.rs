//! Per-agent Bayesian tracking of the fundamental.
//!
//! An agent keeps an estimate `r_tilde` of the current fundamental and a
//! variance `sigma_tilde_sq` describing its own uncertainty in that estimate.
//! On every wake it rolls the belief forward through the mean-reversion
//! transition, folds in one noisy observation, and projects the belief to the
//! end of the horizon. Beliefs stay in real arithmetic throughout.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("cannot advance belief backwards from t={last} to t={now}")]
    TimeRegression { last: u64, now: u64 },
}

/// What a tuned agent knows about the fundamental process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub r_bar: f64,
    pub kappa: f64,
    pub sigma_s_sq: f64,
    pub sigma_n_sq: f64,
    pub horizon: u64,
}

impl EstimatorParams {
    /// `(1 - kappa)^steps`.
    fn persistence(&self, steps: u64) -> f64 {
        (steps as f64 * (-self.kappa).ln_1p()).exp()
    }

    /// Weight of `sigma_s_sq` accumulated over `steps` unobserved transitions.
    fn shock_weight(&self, steps: u64) -> f64 {
        if self.kappa == 0.0 {
            return steps as f64;
        }
        let log_decay = 2.0 * (-self.kappa).ln_1p();
        // (1 - (1-k)^{2d}) / (1 - (1-k)^2)
        (steps as f64 * log_decay).exp_m1() / log_decay.exp_m1()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub r_tilde: f64,
    pub sigma_tilde_sq: f64,
    pub last_wake: u64,
}

impl BeliefState {
    /// Belief before any observation: the known starting value, held with certainty.
    pub fn initial(r0: f64) -> Self {
        BeliefState {
            r_tilde: r0,
            sigma_tilde_sq: 0.0,
            last_wake: 0,
        }
    }

    /// Applies `now - last_wake` steps of mean reversion with no evidence.
    pub fn advance(self, now: u64, params: &EstimatorParams) -> Result<Self, EstimatorError> {
        if now < self.last_wake {
            return Err(EstimatorError::TimeRegression {
                last: self.last_wake,
                now,
            });
        }
        let delta = now - self.last_wake;
        if delta == 0 {
            return Ok(self);
        }
        let keep = params.persistence(delta);
        Ok(BeliefState {
            r_tilde: (1.0 - keep) * params.r_bar + keep * self.r_tilde,
            sigma_tilde_sq: keep * keep * self.sigma_tilde_sq
                + params.shock_weight(delta) * params.sigma_s_sq,
            last_wake: now,
        })
    }

    /// Folds in one observation `o_t` made at `last_wake`.
    ///
    /// The prior is weighted by the observation noise and the observation by
    /// the prior's own variance. When both variances are zero the observation
    /// is adopted.
    pub fn observe(self, observation: f64, params: &EstimatorParams) -> Self {
        let noise = params.sigma_n_sq;
        let prior = self.sigma_tilde_sq;
        let total = noise + prior;
        if total == 0.0 {
            return BeliefState {
                r_tilde: observation,
                sigma_tilde_sq: 0.0,
                ..self
            };
        }
        BeliefState {
            r_tilde: (noise / total) * self.r_tilde + (prior / total) * observation,
            sigma_tilde_sq: noise * prior / total,
            ..self
        }
    }

    /// Forecast of the fundamental at the horizon from the current belief.
    pub fn project_final(&self, params: &EstimatorParams) -> f64 {
        let remaining = params.horizon.saturating_sub(self.last_wake);
        let keep = params.persistence(remaining);
        (1.0 - keep) * params.r_bar + keep * self.r_tilde
    }
}
