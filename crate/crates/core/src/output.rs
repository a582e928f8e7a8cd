//! CSV logs and the run manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SimConfig;
use crate::kernel::{detail_digest, side_label, SimResult};
use crate::orderbook::EventKind;

pub const EVENTS_FILE: &str = "events.csv";
pub const TRADES_FILE: &str = "trades.csv";
pub const FUNDAMENTAL_FILE: &str = "fundamental.csv";
pub const AGENTS_FILE: &str = "agents.csv";
pub const ESTIMATOR_FILE: &str = "estimator.csv";
pub const DECISIONS_FILE: &str = "decisions.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    InvariantBreach,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub version: String,
    pub master_seed: u64,
    pub status: RunStatus,
    pub invariant_checks: u64,
    pub wakes: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentPrivateValues {
    pub id: usize,
    pub theta: Vec<f64>,
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run: RunInfo,
    pub config: SimConfig,
    #[serde(default)]
    pub private_values: Vec<AgentPrivateValues>,
}

impl Manifest {
    pub fn for_result(config: &SimConfig, result: &SimResult, warnings: &[String]) -> Self {
        Manifest {
            run: RunInfo {
                version: env!("CARGO_PKG_VERSION").to_string(),
                master_seed: result.master_seed,
                status: RunStatus::Ok,
                invariant_checks: result.invariant_checks,
                wakes: result.wakes,
                error: None,
                warnings: warnings.to_vec(),
            },
            config: config.clone(),
            private_values: result
                .agents
                .iter()
                .map(|a| AgentPrivateValues {
                    id: a.id,
                    theta: a.private_values.clone(),
                })
                .collect(),
        }
    }

    pub fn for_failure(config: &SimConfig, error: &str, warnings: &[String]) -> Self {
        Manifest {
            run: RunInfo {
                version: env!("CARGO_PKG_VERSION").to_string(),
                master_seed: config.market.seed,
                status: RunStatus::InvariantBreach,
                invariant_checks: 0,
                wakes: 0,
                error: Some(error.to_string()),
                warnings: warnings.to_vec(),
            },
            config: config.clone(),
            private_values: Vec::new(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest is always representable as TOML")
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn write(&self, dir: &Path) -> Result<(), OutputError> {
        fs::create_dir_all(dir).map_err(|source| OutputError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.to_toml()).map_err(|source| OutputError::Io { path, source })
    }
}

struct Sheet {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl Sheet {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self, OutputError> {
        let path = dir.join(name);
        let writer = csv::Writer::from_path(&path).map_err(|source| OutputError::Csv {
            path: path.clone(),
            source,
        })?;
        let mut sheet = Sheet { path, writer };
        sheet.row(header)?;
        Ok(sheet)
    }

    fn row<I, T>(&mut self, fields: I) -> Result<(), OutputError>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|source| OutputError::Csv {
                path: self.path.clone(),
                source,
            })
    }

    fn finish(mut self) -> Result<(), OutputError> {
        self.writer.flush().map_err(|source| OutputError::Io {
            path: self.path,
            source,
        })
    }
}

/// Writes the logs, the agent summary, optional traces and the manifest into `dir`.
pub fn emit_outputs(
    result: &SimResult,
    config: &SimConfig,
    warnings: &[String],
    dir: &Path,
) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let tick = result.tick;

    let mut events = Sheet::create(
        dir,
        EVENTS_FILE,
        &[
            "time",
            "kind",
            "order_id",
            "agent_id",
            "side",
            "price",
            "qty",
            "counterparty",
        ],
    )?;
    for e in &result.events {
        let counterparty = match (e.kind, e.counterparty) {
            (EventKind::Executed, Some(c)) => c.to_string(),
            _ => String::new(),
        };
        events.row([
            e.time.to_string(),
            e.kind.as_str().to_string(),
            e.order_id.to_string(),
            e.agent.to_string(),
            side_label(e.side).to_string(),
            e.price.display(tick),
            e.quantity.to_string(),
            counterparty,
        ])?;
    }
    events.finish()?;

    let mut trades = Sheet::create(
        dir,
        TRADES_FILE,
        &["time", "price", "qty", "buy_order", "sell_order"],
    )?;
    for t in &result.trades {
        trades.row([
            t.time.to_string(),
            t.price.display(tick),
            t.quantity.to_string(),
            t.buy_order.to_string(),
            t.sell_order.to_string(),
        ])?;
    }
    trades.finish()?;

    let mut fundamental = Sheet::create(dir, FUNDAMENTAL_FILE, &["timestamp", "value"])?;
    for (t, v) in &result.fundamental_trace {
        fundamental.row([t.to_string(), v.display(tick)])?;
    }
    fundamental.finish()?;

    let mut agents = Sheet::create(dir, AGENTS_FILE, &["id", "strategy", "cash", "q", "payoff"])?;
    for a in &result.agents {
        agents.row([
            a.id.to_string(),
            a.strategy.as_str().to_string(),
            format!("{:.*}", tick.decimals(), a.cash),
            a.held.to_string(),
            a.payoff.to_string(),
        ])?;
    }
    agents.finish()?;

    if config.output.trace_estimator {
        let mut sheet = Sheet::create(
            dir,
            ESTIMATOR_FILE,
            &[
                "time",
                "agent_id",
                "delta",
                "observation",
                "r_tilde",
                "sigma_tilde_sq",
                "r_hat",
            ],
        )?;
        for r in &result.estimator_trace {
            sheet.row([
                r.time.to_string(),
                r.agent.to_string(),
                r.delta.to_string(),
                r.observation.display(tick),
                r.r_tilde.to_string(),
                r.sigma_tilde_sq.to_string(),
                r.r_hat.to_string(),
            ])?;
        }
        sheet.finish()?;
    }

    if config.output.trace_decisions {
        let mut sheet = Sheet::create(
            dir,
            DECISIONS_FILE,
            &[
                "time",
                "agent_id",
                "strategy",
                "q",
                "action",
                "side",
                "price",
                "valuation",
                "detail",
            ],
        )?;
        for r in &result.decision_trace {
            let (side, price) = match r.decision.action.order() {
                Some((side, price)) => (side_label(side).to_string(), price.display(tick)),
                None => (String::new(), String::new()),
            };
            sheet.row([
                r.time.to_string(),
                r.agent.to_string(),
                r.strategy.as_str().to_string(),
                r.held.to_string(),
                r.decision.action.as_str().to_string(),
                side,
                price,
                r.decision
                    .valuation
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
                detail_digest(&r.decision.detail),
            ])?;
        }
        sheet.finish()?;
    }

    if let Some(path) = &config.output.fundamental_dump {
        let mut dump = Sheet::create_at(path, &["timestamp", "value"])?;
        for (t, v) in &result.fundamental_trace {
            dump.row([t.to_string(), v.display(tick)])?;
        }
        dump.finish()?;
    }

    Manifest::for_result(config, result, warnings).write(dir)
}

impl Sheet {
    fn create_at(path: &Path, header: &[&str]) -> Result<Self, OutputError> {
        let dir = path.parent().unwrap_or(Path::new("."));
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Sheet::create(dir, &name, header)
    }
}
