//! Deterministic scenario simulator.
//!
//! Each epoch runs the same phases in the same order:
//!
//! 1. ingest: weight changes and penalty expiry, oracle feeds, injected events, background activity
//! 2. compliance evaluation and disputes
//! 3. incident progression and risk scoring
//! 4. audit scheduling and execution
//! 5. slashing and status updates from audit outcomes
//! 6. proposals, votes, tallies and collusion response
//! 7. delegate election on election epochs
//! 8. staking rewards
//! 9. heartbeat and block sealing
//!
//! All randomness comes from per-consumer streams derived from the scenario
//! seed, and all maps iterate in key order, so a `(scenario, seed)` pair
//! always yields the same chain.

mod engine;
pub mod inspect;
mod journal;
mod privacy;
mod report;
mod rng;
mod scenario;

use std::path::Path;

use thiserror::Error;

pub use engine::{authority_keys, system_key, Simulation};
pub use journal::{Journal, Phase, TraceEntry};
pub use privacy::{scan_for_metrics, Leak};
pub use report::{
    fold_identities, AuditSummary, ComplianceSummary, EpochRow, ExportError, GovernanceSummary,
    IdentitySummary, IncidentSummary, ProposalSummary, ReportError, RiskMetrics, SimReport,
    SystemRisk, TierRate, TokenSummary,
};
pub use rng::{stream, Streams};
pub use scenario::{
    ActivitySpec, AuditorSpec, AuthoritySpec, Injected, InjectedEvent, OracleSpec, ProposalSpec,
    Scenario, ScenarioError, SimConfig, SlashTable, StakeholderSpec, SystemSpec, VoteSpec,
    WeightsSpec,
};

use crate::audit::AuditError;
use crate::compliance::ComplianceError;
use crate::governance::GovernanceError;
use crate::identity::{IdentityError, StoreError};
use crate::ledger::file::{write_chain_file, ChainFileError};
use crate::ledger::{Block, LedgerError};
use crate::risk::RiskError;
use crate::tokens::TokenError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("ledger: {0}")]
    Ledger(#[from] LedgerError),
    #[error("identity: {0}")]
    Identity(#[from] IdentityError),
    #[error("content store: {0}")]
    Store(#[from] StoreError),
    #[error("compliance: {0}")]
    Compliance(#[from] ComplianceError),
    #[error("governance: {0}")]
    Governance(#[from] GovernanceError),
    #[error("tokens: {0}")]
    Tokens(#[from] TokenError),
    #[error("risk: {0}")]
    Risk(#[from] RiskError),
    #[error("audit: {0}")]
    Audit(#[from] AuditError),
    #[error("token conservation broken after epoch {epoch}: {line}")]
    Conservation { epoch: u64, line: String },
    #[error("report: {0}")]
    Report(#[from] ReportError),
    #[error("chain file: {0}")]
    ChainFile(#[from] ChainFileError),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Everything a finished run produced.
#[derive(Debug)]
pub struct SimOutcome {
    pub blocks: Vec<Block>,
    pub trace: Vec<TraceEntry>,
    pub report: SimReport,
}

/// Runs `scenario` to completion.
pub fn run(scenario: Scenario) -> Result<SimOutcome, SimError> {
    let mut sim = Simulation::new(scenario)?;
    sim.run_to_end()?;
    let (ledger, trace) = sim.into_parts();
    let blocks = ledger.into_blocks();
    let report = SimReport::from_chain(&blocks)?;
    Ok(SimOutcome {
        blocks,
        trace,
        report,
    })
}

/// Writes `chain.db`, `report.json` and `report.csv` into `dir`.
pub fn write_outputs(outcome: &SimOutcome, dir: &Path) -> Result<(), SimError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| SimError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    write_chain_file(&dir.join("chain.db"), &outcome.blocks)?;
    let json = dir.join("report.json");
    std::fs::write(&json, outcome.report.to_json()).map_err(io(&json))?;
    let csv = dir.join("report.csv");
    std::fs::write(&csv, outcome.report.to_csv()).map_err(io(&csv))?;
    Ok(())
}

/// Differences between a stored report and the one recomputed from `blocks`.
/// Empty when they agree.
pub fn report_mismatches(blocks: &[Block], stored: &str) -> Result<Vec<String>, ReportError> {
    let fresh = serde_json::to_value(SimReport::from_chain(blocks)?).expect("report serializes");
    let stored: serde_json::Value = match serde_json::from_str(stored) {
        Ok(v) => v,
        Err(e) => return Ok(vec![format!("stored report is not JSON: {e}")]),
    };
    let mut out = Vec::new();
    diff("", &fresh, &stored, &mut out);
    Ok(out)
}

fn diff(path: &str, fresh: &serde_json::Value, stored: &serde_json::Value, out: &mut Vec<String>) {
    use serde_json::Value;
    match (fresh, stored) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, va) in a {
                let p = format!("{path}/{k}");
                match b.get(k) {
                    Some(vb) => diff(&p, va, vb, out),
                    None => out.push(format!("{p}: missing from stored report")),
                }
            }
            for k in b.keys().filter(|k| !a.contains_key(*k)) {
                out.push(format!("{path}/{k}: not derivable from the chain"));
            }
        }
        (a, b) if a != b => out.push(format!("{path}: chain says {a}, report says {b}")),
        _ => {}
    }
}
