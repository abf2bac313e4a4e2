//! Read-only views over a sealed chain for the `inspect` command.

use serde::Serialize;

use crate::identity::AISystemRecord;
use crate::ledger::{Block, DidChange, EventBody, EventKind};
use crate::scalar::format_rational;
use crate::tokens::TokenLedger;

use super::report::{fold_identities, ReportError};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DidHistoryEntry {
    pub epoch: u64,
    pub version: u64,
    pub change: DidChange,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DidView {
    pub record: AISystemRecord,
    pub history: Vec<DidHistoryEntry>,
}

pub fn did_view(blocks: &[Block], did: &str) -> Result<Option<DidView>, ReportError> {
    let mut all = fold_identities(blocks)?;
    Ok(all.remove(did).map(|(record, hist)| DidView {
        record,
        history: hist
            .into_iter()
            .map(|(epoch, version, change)| DidHistoryEntry { epoch, version, change })
            .collect(),
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallotView {
    pub voter: String,
    pub direction: String,
    pub magnitude: u64,
    pub power: String,
    pub cost: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProposalView {
    pub proposal_id: u64,
    pub epoch: u64,
    pub proposer: String,
    pub kind: String,
    pub mode: String,
    pub status: String,
    pub threshold: Option<String>,
    pub for_power: Option<String>,
    pub against_power: Option<String>,
    pub ballots: Vec<BallotView>,
}

pub fn proposals_view(blocks: &[Block]) -> Result<Vec<ProposalView>, ReportError> {
    let mut out: Vec<ProposalView> = Vec::new();
    for ev in blocks.iter().flat_map(|b| &b.events) {
        if !matches!(
            ev.kind,
            EventKind::ProposalSubmitted | EventKind::VoteCast | EventKind::ProposalResolved
        ) {
            continue;
        }
        let body = ev.body().map_err(|source| ReportError::Decode {
            event_id: ev.event_id,
            source,
        })?;
        let find = |out: &mut Vec<ProposalView>, id: u64| out.iter_mut().position(|p| p.proposal_id == id);
        match body {
            EventBody::ProposalSubmitted(p) => out.push(ProposalView {
                proposal_id: p.proposal_id,
                epoch: ev.epoch,
                proposer: ev.actor.clone(),
                kind: p.kind.to_string(),
                mode: p.mode.to_string(),
                status: "OPEN".into(),
                threshold: None,
                for_power: None,
                against_power: None,
                ballots: Vec::new(),
            }),
            EventBody::VoteCast(v) => {
                if let Some(i) = find(&mut out, v.proposal_id) {
                    out[i].ballots.push(BallotView {
                        voter: v.voter,
                        direction: v.direction.to_string(),
                        magnitude: v.magnitude,
                        power: format_rational(&v.power),
                        cost: v.cost,
                    });
                }
            }
            EventBody::ProposalResolved(r) => {
                if let Some(i) = find(&mut out, r.proposal_id) {
                    let p = &mut out[i];
                    p.status = r.status.to_string();
                    p.threshold = Some(format_rational(&r.threshold));
                    p.for_power = Some(format_rational(&r.for_power));
                    p.against_power = Some(format_rational(&r.against_power));
                }
            }
            _ => unreachable!("filtered above"),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditView {
    pub audit_id: u64,
    pub epoch: u64,
    pub did: String,
    pub auditor: String,
    pub trigger: String,
    pub outcome: String,
    pub findings: Vec<(String, u32, bool)>,
    pub evidence_commitment: String,
}

pub fn audits_view(blocks: &[Block], did: Option<&str>) -> Result<Vec<AuditView>, ReportError> {
    let mut out = Vec::new();
    for ev in blocks.iter().flat_map(|b| &b.events) {
        if ev.kind != EventKind::AuditRecorded {
            continue;
        }
        let Ok(EventBody::AuditRecorded(a)) = ev.body() else {
            return Err(ReportError::Decode {
                event_id: ev.event_id,
                source: ev.body().expect_err("kind is AUDIT_RECORDED"),
            });
        };
        if did.is_some_and(|d| d != a.did) {
            continue;
        }
        out.push(AuditView {
            audit_id: a.audit_id,
            epoch: ev.epoch,
            did: a.did,
            auditor: a.auditor,
            trigger: a.trigger.to_string(),
            outcome: a.outcome.to_string(),
            findings: a.findings,
            evidence_commitment: a.evidence_commitment.to_hex(),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BalancesView {
    pub ledger: TokenLedger,
    pub conservation_checksum: String,
}

pub fn balances_view(blocks: &[Block]) -> Result<BalancesView, ReportError> {
    let mut bodies = Vec::new();
    for ev in blocks.iter().flat_map(|b| &b.events) {
        let body = ev.body().map_err(|source| ReportError::Decode {
            event_id: ev.event_id,
            source,
        })?;
        bodies.push((ev.epoch, body));
    }
    let ledger = TokenLedger::replay(bodies.iter().map(|(e, b)| (*e, b)))?
        .ok_or(ReportError::MissingGenesis)?;
    Ok(BalancesView {
        conservation_checksum: ledger.conservation().checksum_line(),
        ledger,
    })
}
