//! Run summaries computed purely from a sealed chain.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::DecodeError;
use crate::identity::AISystemRecord;
use crate::ledger::{Block, DidChange, EventBody, EventKind, StakeAction, TransferReason};
use crate::scalar::format_rational;
use crate::tokens::{Conservation, TokenError, TokenLedger};
use crate::types::{AuditOutcome, ComplianceStatus, IncidentState};
use crate::Rational;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("event {event_id} does not decode: {source}")]
    Decode { event_id: u64, source: DecodeError },
    #[error("token replay failed: {0}")]
    Tokens(#[from] TokenError),
    #[error("chain has no genesis event")]
    MissingGenesis,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExportError {
    #[error("unsupported export format {0:?}; expected json or csv")]
    UnsupportedFormat(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: u64,
    pub events: u64,
    pub assessments: u64,
    pub noncompliant: u64,
    pub audits: u64,
    pub audit_failures: u64,
    pub slashes: u64,
    pub votes: u64,
    pub token_operations: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierRate {
    pub assessments: u64,
    pub compliant: u64,
    /// `compliant / assessments` as an exact fraction.
    pub rate: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceSummary {
    pub per_tier: BTreeMap<String, TierRate>,
    pub mitigations: BTreeMap<String, u64>,
    pub disputes: u64,
    pub overturned: u64,
    pub rule_registrations: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub total: u64,
    pub pass: u64,
    pub fail: u64,
    pub inconclusive: u64,
    pub by_trigger: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSummary {
    pub conservation: Conservation,
    pub checksum: String,
    pub operations: u64,
    pub rewards_paid: u64,
    pub quadratic_costs: u64,
    pub slashes: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemRisk {
    /// `(epoch, score)`.
    pub scores: Vec<(u64, String)>,
    /// `(epoch, from, to)`.
    pub reclassifications: Vec<(u64, String, String)>,
    pub flagged_epochs: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncidentSummary {
    pub incident_id: u64,
    pub did: String,
    pub severity: String,
    pub transitions: Vec<(String, u64)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskMetrics {
    pub systems: BTreeMap<String, SystemRisk>,
    pub incidents: Vec<IncidentSummary>,
    /// Mean epochs from RAISED to RESOLVED over resolved incidents.
    pub mean_resolution_epochs: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalSummary {
    pub proposal_id: u64,
    pub epoch: u64,
    pub kind: String,
    pub mode: String,
    pub status: String,
    pub for_power: String,
    pub against_power: String,
    pub votes: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GovernanceSummary {
    pub proposals: Vec<ProposalSummary>,
    pub passed: u64,
    pub rejected: u64,
    pub votes: u64,
    pub elections: u64,
    pub delegates: Vec<String>,
    /// `(epoch, first, second)`.
    pub collusion_flags: Vec<(u64, String, String)>,
    pub weight_adjustments: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentitySummary {
    pub did: String,
    pub owner: String,
    pub risk_tier: String,
    pub status: String,
    pub version: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    pub scenario_digest: String,
    pub seed: u64,
    pub root_hash: String,
    pub blocks: u64,
    pub events: u64,
    pub event_counts: BTreeMap<String, u64>,
    pub epochs: Vec<EpochRow>,
    pub identities: Vec<IdentitySummary>,
    pub compliance: ComplianceSummary,
    pub audits: AuditSummary,
    pub tokens: TokenSummary,
    pub risk_metrics: RiskMetrics,
    pub governance: GovernanceSummary,
}

/// Current record and change history of every DID on the chain.
pub fn fold_identities(
    blocks: &[Block],
) -> Result<BTreeMap<String, (AISystemRecord, Vec<(u64, u64, DidChange)>)>, ReportError> {
    let mut out: BTreeMap<String, (AISystemRecord, Vec<(u64, u64, DidChange)>)> = BTreeMap::new();
    for ev in blocks.iter().flat_map(|b| &b.events) {
        if !matches!(ev.kind, EventKind::DidRegistered | EventKind::DidUpdated) {
            continue;
        }
        match decode(ev)? {
            EventBody::DidRegistered(r) => {
                let record = AISystemRecord {
                    did: r.did.clone(),
                    risk_tier: r.risk_tier,
                    compliance_status: ComplianceStatus::UnderReview,
                    purpose: r.purpose,
                    metadata_refs: Vec::new(),
                    version: 1,
                    owner: r.owner,
                };
                out.insert(r.did, (record, Vec::new()));
            }
            EventBody::DidUpdated(u) => {
                if let Some((rec, hist)) = out.get_mut(&u.did) {
                    rec.apply(&u.change);
                    rec.version = u.version;
                    hist.push((ev.epoch, u.version, u.change));
                }
            }
            _ => unreachable!("filtered above"),
        }
    }
    Ok(out)
}

fn decode(ev: &crate::ledger::GovernanceEvent) -> Result<EventBody, ReportError> {
    ev.body().map_err(|source| ReportError::Decode {
        event_id: ev.event_id,
        source,
    })
}

fn fraction(num: u64, den: u64) -> String {
    if den == 0 {
        return "0".into();
    }
    format_rational(&Rational::new(num as i128, den as i128))
}

impl SimReport {
    /// Folds every sealed event into the summary. Two chains with the same
    /// events always produce equal reports.
    pub fn from_chain(blocks: &[Block]) -> Result<SimReport, ReportError> {
        let mut genesis = None;
        let mut event_counts = BTreeMap::new();
        let mut rows: BTreeMap<u64, EpochRow> = BTreeMap::new();
        let mut compliance = ComplianceSummary::default();
        let mut tier_counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
        let mut audits = AuditSummary::default();
        let mut risk = RiskMetrics::default();
        let mut incidents: BTreeMap<u64, IncidentSummary> = BTreeMap::new();
        let mut gov = GovernanceSummary::default();
        let mut proposals: BTreeMap<u64, ProposalSummary> = BTreeMap::new();
        let (mut operations, mut rewards_paid, mut quadratic_costs, mut slashes) = (0, 0, 0, 0);
        let mut bodies = Vec::new();

        for ev in blocks.iter().flat_map(|b| &b.events) {
            let body = decode(ev)?;
            *event_counts.entry(ev.kind.as_str().to_string()).or_insert(0u64) += 1;
            let e = ev.epoch;
            let mut row = (e > 0).then(|| {
                rows.entry(e).or_insert_with(|| EpochRow {
                    epoch: e,
                    ..Default::default()
                })
            });
            let mut row_add = |f: fn(&mut EpochRow)| {
                if let Some(r) = row.as_deref_mut() {
                    f(r)
                }
            };
            row_add(|r| r.events += 1);
            match &body {
                EventBody::Genesis(g) => genesis = Some((g.scenario_digest, g.seed)),
                EventBody::AssessmentRecorded(a) => {
                    if a.corrected {
                        compliance.overturned += 1;
                    } else {
                        row_add(|r| r.assessments += 1);
                        if !a.compliant {
                            row_add(|r| r.noncompliant += 1);
                        }
                        let t = tier_counts.entry(a.tier.to_string()).or_default();
                        t.0 += 1;
                        t.1 += a.compliant as u64;
                    }
                }
                EventBody::MitigationTriggered(m) => {
                    *compliance.mitigations.entry(format!("{:?}", m.source).to_uppercase()).or_default() += 1;
                }
                EventBody::DisputeOpened(_) => compliance.disputes += 1,
                EventBody::RuleRegistered(_) => compliance.rule_registrations += 1,
                EventBody::AuditRecorded(a) => {
                    row_add(|r| r.audits += 1);
                    audits.total += 1;
                    match a.outcome {
                        AuditOutcome::Pass => audits.pass += 1,
                        AuditOutcome::Fail => {
                            audits.fail += 1;
                            row_add(|r| r.audit_failures += 1);
                        }
                        AuditOutcome::Inconclusive => audits.inconclusive += 1,
                    }
                    *audits.by_trigger.entry(a.trigger.to_string()).or_default() += 1;
                }
                EventBody::TokensTransferred(t) => {
                    operations += 1;
                    row_add(|r| r.token_operations += 1);
                    match t.reason {
                        TransferReason::Reward => rewards_paid += t.amount,
                        TransferReason::QuadraticVote => quadratic_costs += t.amount,
                        _ => {}
                    }
                }
                EventBody::StakeChanged(s) => {
                    operations += 1;
                    row_add(|r| r.token_operations += 1);
                    debug_assert!(matches!(s.action, StakeAction::Stake | StakeAction::Unstake));
                }
                EventBody::SlashApplied(_) => {
                    operations += 1;
                    slashes += 1;
                    row_add(|r| {
                        r.token_operations += 1;
                        r.slashes += 1
                    });
                }
                EventBody::RiskAssessed(r) => {
                    let sys = risk.systems.entry(r.did.clone()).or_default();
                    sys.scores.push((e, format_rational(&r.score)));
                    if r.flagged {
                        sys.flagged_epochs.push(e);
                    }
                }
                EventBody::RiskReclassified(r) => {
                    risk.systems.entry(r.did.clone()).or_default().reclassifications.push((
                        e,
                        r.from.to_string(),
                        r.to.to_string(),
                    ));
                }
                EventBody::IncidentRaised(i) => {
                    incidents.insert(
                        i.incident_id,
                        IncidentSummary {
                            incident_id: i.incident_id,
                            did: i.did.clone(),
                            severity: i.severity.to_string(),
                            transitions: vec![(IncidentState::Raised.to_string(), e)],
                        },
                    );
                }
                EventBody::IncidentAdvanced(i) => {
                    if let Some(s) = incidents.get_mut(&i.incident_id) {
                        s.transitions.push((i.to.to_string(), e));
                    }
                }
                EventBody::ProposalSubmitted(p) => {
                    proposals.insert(
                        p.proposal_id,
                        ProposalSummary {
                            proposal_id: p.proposal_id,
                            epoch: e,
                            kind: p.kind.to_string(),
                            mode: p.mode.to_string(),
                            status: "OPEN".into(),
                            for_power: "0".into(),
                            against_power: "0".into(),
                            votes: 0,
                        },
                    );
                }
                EventBody::VoteCast(v) => {
                    gov.votes += 1;
                    row_add(|r| r.votes += 1);
                    if let Some(p) = proposals.get_mut(&v.proposal_id) {
                        p.votes += 1;
                    }
                }
                EventBody::ProposalResolved(p) => {
                    if let Some(s) = proposals.get_mut(&p.proposal_id) {
                        s.status = p.status.to_string();
                        s.for_power = format_rational(&p.for_power);
                        s.against_power = format_rational(&p.against_power);
                    }
                    match p.status {
                        crate::types::ProposalStatus::Passed => gov.passed += 1,
                        crate::types::ProposalStatus::Rejected => gov.rejected += 1,
                        crate::types::ProposalStatus::Open => {}
                    }
                }
                EventBody::DelegateElected(d) => {
                    gov.elections += 1;
                    gov.delegates = d.delegates.iter().map(|(id, _)| id.clone()).collect();
                }
                EventBody::CollusionFlagged(c) => {
                    gov.collusion_flags.push((e, c.first.clone(), c.second.clone()));
                }
                EventBody::WeightsAdjusted(_) => gov.weight_adjustments += 1,
                _ => {}
            }
            bodies.push((e, body));
        }

        let (digest, seed) = genesis.ok_or(ReportError::MissingGenesis)?;
        let tokens = TokenLedger::replay(bodies.iter().map(|(e, b)| (*e, b)))?
            .ok_or(ReportError::MissingGenesis)?;
        let conservation = tokens.conservation();

        compliance.per_tier = tier_counts
            .into_iter()
            .map(|(tier, (n, ok))| {
                (
                    tier,
                    TierRate {
                        assessments: n,
                        compliant: ok,
                        rate: fraction(ok, n),
                    },
                )
            })
            .collect();

        let resolution: Vec<u64> = incidents
            .values()
            .filter_map(|i| {
                let raised = i.transitions.first()?.1;
                let resolved = i
                    .transitions
                    .iter()
                    .find(|(s, _)| s == IncidentState::Resolved.as_str())?
                    .1;
                Some(resolved - raised)
            })
            .collect();
        risk.mean_resolution_epochs = (!resolution.is_empty())
            .then(|| fraction(resolution.iter().sum(), resolution.len() as u64));
        risk.incidents = incidents.into_values().collect();
        gov.proposals = proposals.into_values().collect();

        let identities = fold_identities(blocks)?
            .into_values()
            .map(|(r, _)| IdentitySummary {
                did: r.did,
                owner: r.owner,
                risk_tier: r.risk_tier.to_string(),
                status: r.compliance_status.to_string(),
                version: r.version,
            })
            .collect();

        Ok(SimReport {
            scenario_digest: digest.to_hex(),
            seed,
            root_hash: blocks.last().map_or_else(String::new, |b| b.block_hash.to_hex()),
            blocks: blocks.len() as u64,
            events: blocks.iter().map(|b| b.events.len() as u64).sum(),
            event_counts,
            epochs: rows.into_values().collect(),
            identities,
            compliance,
            audits,
            tokens: TokenSummary {
                checksum: conservation.checksum_line(),
                conservation,
                operations,
                rewards_paid,
                quadratic_costs,
                slashes,
            },
            risk_metrics: risk,
            governance: gov,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One header row, then one row per epoch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "epoch,events,assessments,noncompliant,audits,audit_failures,slashes,votes,token_operations\n",
        );
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.epoch,
                r.events,
                r.assessments,
                r.noncompliant,
                r.audits,
                r.audit_failures,
                r.slashes,
                r.votes,
                r.token_operations
            ));
        }
        out
    }

    pub fn export(&self, format: &str) -> Result<String, ExportError> {
        match format {
            "json" => Ok(self.to_json()),
            "csv" => Ok(self.to_csv()),
            other => Err(ExportError::UnsupportedFormat(other.to_string())),
        }
    }
}
