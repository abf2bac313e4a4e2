//! Auditor accreditation, risk-tiered scheduling and commitment-checked
//! audit execution.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compliance::{commit_metrics, ComplianceError, Metrics, RuleRegistry};
use crate::crypto::Digest;
use crate::identity::{IdentityError, IdentityRegistry};
use crate::ledger::{AuditRecordedBody, AuditorAccreditedBody, EventBody, EventSink, RuleVerdict};
use crate::types::{Action, AuditOutcome, AuditTrigger, Principal, RiskTier, Role, RuleDomain};

pub const DEFAULT_CAPACITY: usize = 4;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("unknown accrediting body {0:?}")]
    UnknownAccreditor(String),
    #[error("certification scopes must be non-empty")]
    InvalidScope,
    #[error("validity must be at least one epoch")]
    InvalidValidity,
    #[error("unknown auditor {0:?}")]
    UnknownAuditor(String),
    #[error("certification of {auditor} is not valid at epoch {epoch}")]
    Expired { auditor: String, epoch: u64 },
    #[error("{auditor} is not accredited for every domain audited on {did}")]
    ScopeViolation { auditor: String, did: String },
    #[error("no eligible auditor for {0:?}")]
    UnassignableAudit(Vec<String>),
    #[error("disclosed evidence for {did} does not match its commitment (audit {audit_id})")]
    EvidenceForged { audit_id: u64, did: String },
    #[error(transparent)]
    Compliance(#[from] ComplianceError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditorCertification {
    pub auditor_id: String,
    pub accrediting_body: String,
    pub issued_epoch: u64,
    pub expiry_epoch: u64,
    pub scopes: BTreeSet<RuleDomain>,
}

impl AuditorCertification {
    pub fn is_valid_at(&self, epoch: u64) -> bool {
        self.issued_epoch <= epoch && epoch <= self.expiry_epoch
    }

    pub fn covers(&self, domains: &BTreeSet<RuleDomain>) -> bool {
        domains.is_subset(&self.scopes)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub audit_id: u64,
    pub system_did: String,
    pub auditor_id: String,
    pub epoch: u64,
    pub trigger: AuditTrigger,
    pub findings: Vec<RuleVerdict>,
    pub outcome: AuditOutcome,
    pub evidence_commitment: Digest,
}

/// Metric vector and salt revealed to the assigned auditor only.
#[derive(Clone, Debug, PartialEq)]
pub struct Disclosure {
    pub metrics: Metrics,
    pub salt: [u8; 32],
}

impl Disclosure {
    pub fn commitment(&self) -> Digest {
        commit_metrics(&self.metrics, &self.salt)
    }
}

/// Audit intervals in epochs per tier.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cadence {
    pub high: u64,
    pub limited: u64,
    pub minimal: u64,
}

impl Default for Cadence {
    fn default() -> Self {
        Cadence {
            high: 2,
            limited: 8,
            minimal: 32,
        }
    }
}

impl Cadence {
    pub fn interval(&self, tier: RiskTier) -> Option<u64> {
        match tier {
            RiskTier::High => Some(self.high),
            RiskTier::Limited => Some(self.limited),
            RiskTier::Minimal => Some(self.minimal),
            RiskTier::Unacceptable => None,
        }
    }

    pub fn is_due(&self, tier: RiskTier, epoch: u64) -> bool {
        self.interval(tier)
            .is_some_and(|i| i > 0 && epoch % i == 0)
    }
}

/// One system that may need auditing this epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditCandidate {
    pub did: String,
    pub tier: RiskTier,
    /// Domains the auditor must be accredited for.
    pub domains: BTreeSet<RuleDomain>,
    /// Trigger raised for the system this epoch, if any.
    pub trigger: Option<AuditTrigger>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub did: String,
    pub auditor: String,
    pub trigger: AuditTrigger,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schedule {
    pub assignments: Vec<Assignment>,
    /// Carried into the next epoch because every eligible auditor was full.
    pub deferred: Vec<String>,
    pub unassignable: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct AuditBook {
    accreditors: BTreeSet<String>,
    certs: BTreeMap<String, AuditorCertification>,
    records: Vec<AuditRecord>,
    backlog: BTreeMap<String, AuditTrigger>,
    cursor: u64,
    capacity: usize,
    cadence: Cadence,
}

impl AuditBook {
    /// `seed` fixes the round-robin starting offset.
    pub fn new(accreditors: impl IntoIterator<Item = String>, cadence: Cadence, capacity: usize, seed: u64) -> Self {
        AuditBook {
            accreditors: accreditors.into_iter().collect(),
            certs: BTreeMap::new(),
            records: Vec::new(),
            backlog: BTreeMap::new(),
            cursor: seed,
            capacity: capacity.max(1),
            cadence,
        }
    }

    pub fn cadence(&self) -> &Cadence {
        &self.cadence
    }

    pub fn certification(&self, auditor: &str) -> Option<&AuditorCertification> {
        self.certs.get(auditor)
    }

    pub fn certifications(&self) -> impl Iterator<Item = &AuditorCertification> {
        self.certs.values()
    }

    pub fn records(&self) -> &[AuditRecord] {
        &self.records
    }

    pub fn last_outcome(&self, did: &str) -> Option<AuditOutcome> {
        self.records
            .iter()
            .rev()
            .find(|r| r.system_did == did)
            .map(|r| r.outcome)
    }

    pub fn accredit_auditor(
        &mut self,
        auditor: &str,
        body: &str,
        scopes: BTreeSet<RuleDomain>,
        validity_epochs: u64,
        epoch: u64,
        sink: &mut dyn EventSink,
    ) -> Result<AuditorCertification, AuditError> {
        if !self.accreditors.contains(body) {
            return Err(AuditError::UnknownAccreditor(body.to_string()));
        }
        if scopes.is_empty() {
            return Err(AuditError::InvalidScope);
        }
        if validity_epochs == 0 {
            return Err(AuditError::InvalidValidity);
        }
        let cert = AuditorCertification {
            auditor_id: auditor.to_string(),
            accrediting_body: body.to_string(),
            issued_epoch: epoch,
            expiry_epoch: epoch + validity_epochs,
            scopes,
        };
        self.certs.insert(auditor.to_string(), cert.clone());
        sink.emit(
            body,
            EventBody::from(AuditorAccreditedBody {
                auditor: auditor.to_string(),
                body: body.to_string(),
                issued_epoch: cert.issued_epoch,
                expiry_epoch: cert.expiry_epoch,
                scopes: cert.scopes.iter().copied().collect(),
            }),
        );
        Ok(cert)
    }

    /// Auditors valid at `epoch` and accredited for `domains`, in id order.
    pub fn eligible(&self, epoch: u64, domains: &BTreeSet<RuleDomain>) -> Vec<&str> {
        self.certs
            .values()
            .filter(|c| c.is_valid_at(epoch) && c.covers(domains))
            .map(|c| c.auditor_id.as_str())
            .collect()
    }

    /// Assigns due and triggered systems to auditors. Triggered work (and
    /// work deferred from earlier epochs) is placed before cadence work.
    pub fn plan(&mut self, epoch: u64, candidates: &[AuditCandidate]) -> Schedule {
        let mut requests: Vec<(&AuditCandidate, AuditTrigger)> = Vec::new();
        let mut cadence = Vec::new();
        for c in candidates {
            if c.tier == RiskTier::Unacceptable {
                continue;
            }
            let trigger = c.trigger.or_else(|| self.backlog.get(&c.did).copied());
            match trigger {
                Some(t) => requests.push((c, t)),
                None if self.cadence.is_due(c.tier, epoch) => cadence.push((c, AuditTrigger::Cadence)),
                None => {}
            }
        }
        requests.extend(cadence);
        self.backlog.clear();

        let mut load: BTreeMap<String, usize> = BTreeMap::new();
        let mut schedule = Schedule::default();
        for (c, trigger) in requests {
            let eligible: Vec<String> = self
                .eligible(epoch, &c.domains)
                .into_iter()
                .map(String::from)
                .collect();
            if eligible.is_empty() {
                schedule.unassignable.push(c.did.clone());
                continue;
            }
            let n = eligible.len();
            let start = (self.cursor % n as u64) as usize;
            let pick = (0..n)
                .map(|k| &eligible[(start + k) % n])
                .find(|a| load.get(*a).copied().unwrap_or(0) < self.capacity);
            self.cursor = self.cursor.wrapping_add(1);
            match pick {
                Some(a) => {
                    *load.entry(a.clone()).or_insert(0) += 1;
                    schedule.assignments.push(Assignment {
                        did: c.did.clone(),
                        auditor: a.clone(),
                        trigger,
                    });
                }
                None => {
                    self.backlog.insert(c.did.clone(), trigger);
                    schedule.deferred.push(c.did.clone());
                }
            }
        }
        schedule
    }

    /// Like [`plan`](Self::plan) but fails when any system has no eligible auditor.
    pub fn schedule_audits(
        &mut self,
        epoch: u64,
        candidates: &[AuditCandidate],
    ) -> Result<Schedule, AuditError> {
        let s = self.plan(epoch, candidates);
        if s.unassignable.is_empty() {
            Ok(s)
        } else {
            Err(AuditError::UnassignableAudit(s.unassignable))
        }
    }

    /// Checks the disclosure against `commitment` and re-runs the
    /// applicable rules on it. Only the commitment is recorded.
    #[allow(clippy::too_many_arguments)]
    pub fn perform_audit(
        &mut self,
        auditor: &str,
        did: &str,
        tier: RiskTier,
        trigger: AuditTrigger,
        epoch: u64,
        disclosure: &Disclosure,
        commitment: Digest,
        rules: &RuleRegistry,
        identity: &IdentityRegistry,
        sink: &mut dyn EventSink,
    ) -> Result<AuditRecord, AuditError> {
        let cert = self
            .certs
            .get(auditor)
            .ok_or_else(|| AuditError::UnknownAuditor(auditor.to_string()))?;
        if !cert.is_valid_at(epoch) {
            return Err(AuditError::Expired {
                auditor: auditor.to_string(),
                epoch,
            });
        }
        if !cert.covers(&rules.domains_for(tier)) {
            return Err(AuditError::ScopeViolation {
                auditor: auditor.to_string(),
                did: did.to_string(),
            });
        }
        identity.authorize(
            &Principal::stakeholder(auditor, Role::Auditor),
            Action::Audit,
            did,
            sink,
        )?;
        let audit_id = self.records.len() as u64 + 1;
        let forged = disclosure.commitment() != commitment;
        let (findings, outcome) = if forged {
            (Vec::new(), AuditOutcome::Inconclusive)
        } else {
            let a = rules.evaluate(did, tier, &disclosure.metrics, epoch, &BTreeMap::new())?;
            let outcome = if a.compliant {
                AuditOutcome::Pass
            } else {
                AuditOutcome::Fail
            };
            (a.verdicts(), outcome)
        };
        let record = AuditRecord {
            audit_id,
            system_did: did.to_string(),
            auditor_id: auditor.to_string(),
            epoch,
            trigger,
            findings,
            outcome,
            evidence_commitment: commitment,
        };
        sink.emit(
            auditor,
            EventBody::from(AuditRecordedBody {
                audit_id,
                did: did.to_string(),
                auditor: auditor.to_string(),
                trigger,
                findings: record.findings.clone(),
                outcome,
                evidence_commitment: commitment,
            }),
        );
        self.records.push(record.clone());
        if forged {
            log::warn!("{did}: evidence disclosed to {auditor} does not match commitment");
            return Err(AuditError::EvidenceForged {
                audit_id,
                did: did.to_string(),
            });
        }
        Ok(record)
    }
}
