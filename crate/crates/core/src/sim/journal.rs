//! Event sink that stamps events and appends them to the ledger.

use serde::{Deserialize, Serialize};

use crate::crypto::KeyPair;
use crate::ledger::{EventBody, EventKind, EventSink, GovernanceEvent, Ledger, LedgerError};

/// Fixed per-epoch processing order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Genesis,
    Ingest,
    Compliance,
    Risk,
    Audit,
    Penalties,
    Governance,
    Election,
    Rewards,
    Seal,
}

impl Phase {
    pub const EPOCH: [Phase; 9] = [
        Phase::Ingest,
        Phase::Compliance,
        Phase::Risk,
        Phase::Audit,
        Phase::Penalties,
        Phase::Governance,
        Phase::Election,
        Phase::Rewards,
        Phase::Seal,
    ];

    /// Phases in which events of `kind` may be emitted.
    pub fn designated(kind: EventKind) -> &'static [Phase] {
        use EventKind as K;
        use Phase::*;
        match kind {
            K::Genesis => &[Genesis],
            K::AuditorAccredited | K::DidRegistered => &[Genesis],
            K::RuleRegistered => &[Genesis, Governance],
            K::DidUpdated => &[Genesis, Ingest, Risk, Penalties],
            K::AccessLogged => &[Genesis, Ingest, Risk, Audit, Penalties],
            K::TokensTransferred => &[Genesis, Ingest, Governance, Rewards],
            K::StakeChanged => &[Genesis, Ingest],
            K::OracleUpdate => &[Ingest],
            K::WeightsAdjusted => &[Ingest, Governance],
            K::AssessmentRecorded | K::DisputeOpened => &[Compliance],
            K::MitigationTriggered => &[Ingest, Compliance, Risk, Governance],
            K::RiskAssessed | K::RiskReclassified | K::IncidentRaised | K::IncidentAdvanced => &[Risk],
            K::AuditRecorded => &[Audit],
            K::SlashApplied => &[Penalties],
            K::ProposalSubmitted | K::VoteCast | K::ProposalResolved | K::CollusionFlagged => &[Governance],
            K::DelegateElected => &[Genesis, Election],
            K::EpochSealed => &[Seal],
        }
    }
}

/// Where and when one event was emitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub event_id: u64,
    pub epoch: u64,
    pub phase: Phase,
    pub kind: EventKind,
}

#[derive(Debug)]
pub struct Journal {
    ledger: Ledger,
    epoch: u64,
    phase: Phase,
    epoch_events: u64,
    trace: Vec<TraceEntry>,
}

impl Journal {
    pub fn new(ledger: Ledger) -> Self {
        Journal {
            ledger,
            epoch: 0,
            phase: Phase::Genesis,
            epoch_events: 0,
            trace: Vec::new(),
        }
    }

    pub fn begin(&mut self, epoch: u64, phase: Phase) {
        if epoch != self.epoch {
            self.epoch_events = 0;
        }
        self.epoch = epoch;
        self.phase = phase;
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn epoch_events(&self) -> u64 {
        self.epoch_events
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn seal(&mut self, keys: &[(String, KeyPair)]) -> Result<usize, LedgerError> {
        self.ledger.seal_all(keys)
    }

    pub fn into_parts(self) -> (Ledger, Vec<TraceEntry>) {
        (self.ledger, self.trace)
    }
}

impl EventSink for Journal {
    fn emit(&mut self, actor: &str, body: EventBody) {
        let event_id = self.ledger.last_event_id() + 1;
        let kind = body.kind();
        let event = GovernanceEvent::new(event_id, self.epoch, actor, &body);
        self.ledger
            .append_event(event)
            .expect("journal assigns consecutive ids to canonical payloads");
        self.epoch_events += 1;
        self.trace.push(TraceEntry {
            event_id,
            epoch: self.epoch,
            phase: self.phase,
            kind,
        });
    }
}
