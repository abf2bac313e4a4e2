//! Versioned rule modules, assessments, oracle feeds and dispute panels.

mod rules;

use std::collections::{BTreeMap, BTreeSet};

use num_traits::One;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rules::{
    number_to_rational, standard_rule_pack, CmpOp, ComplianceRuleModule, Condition, MetricCatalog,
    MetricKind, Threshold, MAX_DEPTH,
};

use crate::codec::Encoder;
use crate::crypto::Digest;
use crate::governance::Proposal;
use crate::ledger::{
    AssessmentRecordedBody, DisputeOpenedBody, EventBody, EventSink, MitigationSource,
    MitigationTriggeredBody, OracleUpdateBody, ProposalPayload, RuleRegisteredBody,
};
use crate::types::{ProposalKind, ProposalStatus, RiskTier};
use crate::Rational;

const ACTOR: &str = "protocol:compliance";

/// Oracle metric carrying the current regulation version.
pub const REGULATION_VERSION_METRIC: &str = "regulation_version";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComplianceError {
    #[error("rule registration requires a passed RULE_UPDATE proposal")]
    GovernanceRequired,
    #[error("invalid rule: {0}")]
    InvalidRule(String),
    #[error("missing input metric {0:?}")]
    MissingInput(String),
    #[error("metric {0:?} has the wrong type or is not finite")]
    TypeMismatch(String),
    #[error("unknown rule {rule_id}@v{version}")]
    UnknownRule { rule_id: String, version: u32 },
    #[error("feed {feed_id:?} already ingested for epoch {epoch}")]
    DuplicateFeed { feed_id: String, epoch: u64 },
    #[error("unknown oracle signer {0:?}")]
    UnknownOracle(String),
    #[error("panel of {0} is not an odd size of at least 3")]
    InvalidPanel(usize),
    #[error("assessment of {did} at epoch {epoch} was already disputed")]
    AlreadyDisputed { did: String, epoch: u64 },
    #[error("the system owner cannot dispute its own assessment")]
    ChallengerIsOwner,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricValue {
    Bool(bool),
    Number(f64),
}

pub type Metrics = BTreeMap<String, MetricValue>;

/// Canonical byte encoding of a metric vector (sorted by name).
pub fn encode_metrics(metrics: &Metrics) -> Vec<u8> {
    let mut e = Encoder::new();
    e.u32(metrics.len() as u32);
    for (name, v) in metrics {
        e.str(name);
        match v {
            MetricValue::Bool(b) => {
                e.u8(0);
                e.u8(*b as u8);
            }
            MetricValue::Number(x) => {
                e.u8(1);
                e.u64(x.to_bits());
            }
        }
    }
    e.finish()
}

/// `SHA-256(encode_metrics(metrics) || salt)`.
pub fn commit_metrics(metrics: &Metrics, salt: &[u8; 32]) -> Digest {
    let mut bytes = encode_metrics(metrics);
    bytes.extend_from_slice(salt);
    Digest::of(&bytes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleResult {
    pub rule_id: String,
    pub version: u32,
    pub passed: bool,
    pub mandatory: bool,
    pub weight: u32,
    /// Values of the metrics the rule read. Never written to the ledger.
    pub values: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub system_did: String,
    pub epoch: u64,
    pub tier: RiskTier,
    pub results: Vec<RuleResult>,
    #[serde(with = "crate::scalar::serde_rational")]
    pub aggregate_score: Rational,
    pub compliant: bool,
}

impl Assessment {
    pub fn verdicts(&self) -> Vec<(String, u32, bool)> {
        self.results
            .iter()
            .map(|r| (r.rule_id.clone(), r.version, r.passed))
            .collect()
    }
}

/// How a rule registration was authorized.
#[derive(Clone, Copy, Debug)]
pub enum Authorization<'a> {
    /// Rules installed when the chain is created.
    Genesis,
    Proposal(&'a Proposal),
}

#[derive(Clone, Debug, Default)]
pub struct RuleRegistry {
    catalog: MetricCatalog,
    versions: BTreeMap<String, Vec<ComplianceRuleModule>>,
}

impl RuleRegistry {
    pub fn new(catalog: MetricCatalog) -> Self {
        RuleRegistry {
            catalog,
            versions: BTreeMap::new(),
        }
    }

    pub fn catalog(&self) -> &MetricCatalog {
        &self.catalog
    }

    pub fn register_rule(
        &mut self,
        rule: ComplianceRuleModule,
        authorization: Authorization<'_>,
        sink: &mut dyn EventSink,
    ) -> Result<u32, ComplianceError> {
        let proposal_id = match authorization {
            Authorization::Genesis => None,
            Authorization::Proposal(p) => {
                let matches = matches!(&p.payload, ProposalPayload::Rule(r) if r.same_content(&rule));
                if p.kind != ProposalKind::RuleUpdate || p.status != ProposalStatus::Passed || !matches
                {
                    return Err(ComplianceError::GovernanceRequired);
                }
                Some(p.proposal_id)
            }
        };
        rule.validate(&self.catalog)?;
        let history = self.versions.entry(rule.rule_id.clone()).or_default();
        let version = history.len() as u32 + 1;
        let stored = ComplianceRuleModule { version, ..rule };
        history.push(stored.clone());
        sink.emit(
            ACTOR,
            EventBody::from(RuleRegisteredBody {
                rule: stored,
                authorization: proposal_id,
            }),
        );
        Ok(version)
    }

    pub fn version(&self, rule_id: &str, version: u32) -> Option<&ComplianceRuleModule> {
        self.versions
            .get(rule_id)
            .and_then(|h| h.get((version as usize).checked_sub(1)?))
    }

    pub fn active(&self, rule_id: &str) -> Option<&ComplianceRuleModule> {
        self.versions.get(rule_id).and_then(|h| h.last())
    }

    pub fn all_active(&self) -> impl Iterator<Item = &ComplianceRuleModule> {
        self.versions.values().filter_map(|h| h.last())
    }

    /// Rules evaluated for `tier`: the active version of each rule, or the
    /// pinned version where `pins` names one.
    pub fn applicable(
        &self,
        tier: RiskTier,
        pins: &BTreeMap<String, u32>,
    ) -> Result<Vec<&ComplianceRuleModule>, ComplianceError> {
        let mut out = Vec::new();
        for (id, history) in &self.versions {
            let rule = match pins.get(id) {
                Some(&v) => self.version(id, v).ok_or_else(|| ComplianceError::UnknownRule {
                    rule_id: id.clone(),
                    version: v,
                })?,
                None => history.last().expect("histories are never empty"),
            };
            if rule.applies_to(tier) {
                out.push(rule);
            }
        }
        Ok(out)
    }

    /// Domains of the rules currently applicable to `tier`.
    pub fn domains_for(&self, tier: RiskTier) -> BTreeSet<crate::types::RuleDomain> {
        self.all_active()
            .filter(|r| r.applies_to(tier))
            .map(|r| r.domain)
            .collect()
    }

    /// Pure evaluation of every applicable rule.
    pub fn evaluate(
        &self,
        did: &str,
        tier: RiskTier,
        metrics: &Metrics,
        epoch: u64,
        pins: &BTreeMap<String, u32>,
    ) -> Result<Assessment, ComplianceError> {
        let rules = self.applicable(tier, pins)?;
        let mut results = Vec::with_capacity(rules.len());
        for rule in rules {
            let passed = rule.predicate.eval(metrics)?;
            let values = rule
                .predicate
                .metrics()
                .into_iter()
                .map(|m| (m.to_string(), metrics[m]))
                .collect();
            results.push(RuleResult {
                rule_id: rule.rule_id.clone(),
                version: rule.version,
                passed,
                mandatory: rule.mandatory,
                weight: rule.weight,
                values,
            });
        }
        if results.is_empty() {
            log::warn!("{did}: no rules apply to tier {tier}; vacuously compliant");
        }
        Ok(Assessment {
            system_did: did.to_string(),
            epoch,
            tier,
            aggregate_score: aggregate_score(&results),
            compliant: results.iter().all(|r| r.passed || !r.mandatory),
            results,
        })
    }
}

/// Passed weight over total weight; 1 when nothing applies.
pub fn aggregate_score(results: &[RuleResult]) -> Rational {
    let total: u64 = results.iter().map(|r| r.weight as u64).sum();
    if total == 0 {
        return Rational::one();
    }
    let passed: u64 = results.iter().filter(|r| r.passed).map(|r| r.weight as u64).sum();
    Rational::new(passed as i128, total as i128)
}

/// Appends ASSESSMENT_RECORDED and, when non-compliant, a mitigation trigger.
pub fn record_assessment(assessment: &Assessment, commitment: Digest, sink: &mut dyn EventSink) {
    sink.emit(ACTOR, assessment_event(assessment, commitment, false));
    if !assessment.compliant {
        sink.emit(
            ACTOR,
            EventBody::from(MitigationTriggeredBody {
                did: assessment.system_did.clone(),
                source: MitigationSource::Assessment,
            }),
        );
    }
}

fn assessment_event(a: &Assessment, commitment: Digest, corrected: bool) -> EventBody {
    EventBody::from(AssessmentRecordedBody {
        did: a.system_did.clone(),
        tier: a.tier,
        results: a.verdicts(),
        score: a.aggregate_score,
        compliant: a.compliant,
        commitment,
        corrected,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleFeed {
    pub feed_id: String,
    pub epoch: u64,
    pub values: BTreeMap<String, f64>,
    pub signer: String,
}

#[derive(Clone, Debug, Default)]
pub struct OracleBook {
    authorities: BTreeSet<String>,
    feeds: BTreeMap<(u64, String), OracleFeed>,
    regulation_version: u64,
}

impl OracleBook {
    pub fn new(authorities: impl IntoIterator<Item = String>) -> Self {
        OracleBook {
            authorities: authorities.into_iter().collect(),
            ..Default::default()
        }
    }

    pub fn regulation_version(&self) -> u64 {
        self.regulation_version
    }

    /// Stores the feed. Returns the new regulation version when the feed
    /// raises it.
    pub fn ingest(
        &mut self,
        feed: OracleFeed,
        sink: &mut dyn EventSink,
    ) -> Result<Option<u64>, ComplianceError> {
        if !self.authorities.contains(&feed.signer) {
            return Err(ComplianceError::UnknownOracle(feed.signer));
        }
        let key = (feed.epoch, feed.feed_id.clone());
        if self.feeds.contains_key(&key) {
            return Err(ComplianceError::DuplicateFeed {
                feed_id: feed.feed_id,
                epoch: feed.epoch,
            });
        }
        if let Some((k, _)) = feed.values.iter().find(|(_, v)| !v.is_finite()) {
            return Err(ComplianceError::TypeMismatch(k.clone()));
        }
        let bump = feed
            .values
            .get(REGULATION_VERSION_METRIC)
            .map(|v| *v as u64)
            .filter(|v| *v > self.regulation_version);
        if let Some(v) = bump {
            self.regulation_version = v;
        }
        sink.emit(
            &feed.signer,
            EventBody::from(OracleUpdateBody {
                feed_id: feed.feed_id.clone(),
                signer: feed.signer.clone(),
                values: feed.values.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            }),
        );
        self.feeds.insert(key, feed);
        Ok(bump)
    }

    /// All values published for `epoch`, later feed ids overriding earlier.
    pub fn values_for(&self, epoch: u64) -> Metrics {
        self.feeds
            .range((epoch, String::new())..(epoch + 1, String::new()))
            .flat_map(|(_, f)| f.values.iter())
            .map(|(k, v)| (k.clone(), MetricValue::Number(*v)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PanelVote {
    Uphold,
    Overturn,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dispute {
    pub did: String,
    pub assessment_epoch: u64,
    pub challenger: String,
    pub panel: Vec<String>,
}

#[derive(Clone, Debug, Default)]
pub struct DisputeBook {
    disputed: BTreeSet<(String, u64)>,
}

impl DisputeBook {
    /// Draws an odd panel of `size` from `eligible` auditors using `rng`.
    #[allow(clippy::too_many_arguments)]
    pub fn open_dispute<R: Rng>(
        &mut self,
        assessment: &Assessment,
        owner: &str,
        challenger: &str,
        eligible: &[String],
        size: usize,
        rng: &mut R,
        sink: &mut dyn EventSink,
    ) -> Result<Dispute, ComplianceError> {
        if challenger == owner {
            return Err(ComplianceError::ChallengerIsOwner);
        }
        if size < 3 || size % 2 == 0 || eligible.len() < size {
            return Err(ComplianceError::InvalidPanel(size));
        }
        let key = (assessment.system_did.clone(), assessment.epoch);
        if self.disputed.contains(&key) {
            return Err(ComplianceError::AlreadyDisputed {
                did: key.0,
                epoch: key.1,
            });
        }
        let mut pool = eligible.to_vec();
        pool.sort();
        let mut panel: Vec<String> = pool.choose_multiple(rng, size).cloned().collect();
        panel.sort();
        self.disputed.insert(key);
        let dispute = Dispute {
            did: assessment.system_did.clone(),
            assessment_epoch: assessment.epoch,
            challenger: challenger.to_string(),
            panel,
        };
        sink.emit(
            challenger,
            EventBody::from(DisputeOpenedBody {
                did: dispute.did.clone(),
                assessment_epoch: dispute.assessment_epoch,
                challenger: dispute.challenger.clone(),
                panel: dispute.panel.clone(),
            }),
        );
        Ok(dispute)
    }

    pub fn is_disputed(&self, did: &str, epoch: u64) -> bool {
        self.disputed.contains(&(did.to_string(), epoch))
    }
}

/// Majority decision of the panel. An overturn flips `compliant` and
/// appends a corrected assessment.
pub fn resolve_dispute(
    dispute: &Dispute,
    assessment: &Assessment,
    commitment: Digest,
    votes: &[PanelVote],
    sink: &mut dyn EventSink,
) -> Result<(Assessment, bool), ComplianceError> {
    if votes.len() != dispute.panel.len() || votes.len() % 2 == 0 {
        return Err(ComplianceError::InvalidPanel(votes.len()));
    }
    let overturns = votes.iter().filter(|v| **v == PanelVote::Overturn).count();
    if overturns * 2 < votes.len() {
        return Ok((assessment.clone(), false));
    }
    let corrected = Assessment {
        compliant: !assessment.compliant,
        ..assessment.clone()
    };
    sink.emit(ACTOR, assessment_event(&corrected, commitment, true));
    Ok((corrected, true))
}
