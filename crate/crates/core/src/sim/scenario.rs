//! Scenario files: the complete, seeded description of a simulation run.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::Cadence;
use crate::compliance::{ComplianceRuleModule, MetricValue, Metrics, PanelVote};
use crate::crypto::SignatureScheme;
use crate::governance::{GovernanceConfig, VoteWeights};
use crate::identity::MAX_PURPOSE_LEN;
use crate::ledger::DEFAULT_BLOCK_CAPACITY;
use crate::risk::RiskConfig;
use crate::tokens::{PoolFractions, DEFAULT_TOTAL_SUPPLY};
use crate::types::{Action, Direction, ProposalKind, Role, RiskTier, RuleDomain, Severity, VoteMode};
use crate::{Rational, Weights};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("scenario field `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("scenario field `{path}`: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    pub epochs: u64,
    #[serde(default)]
    pub stakeholders: Vec<StakeholderSpec>,
    #[serde(default)]
    pub ai_systems: Vec<SystemSpec>,
    /// Initial rule pack; the standard pack when absent.
    #[serde(default)]
    pub rules: Option<Vec<ComplianceRuleModule>>,
    #[serde(default)]
    pub oracles: Vec<OracleSpec>,
    #[serde(default)]
    pub authorities: AuthoritySpec,
    #[serde(default)]
    pub accreditors: Vec<String>,
    #[serde(default)]
    pub auditors: Vec<AuditorSpec>,
    #[serde(default)]
    pub injected_events: Vec<Injected>,
    #[serde(default)]
    pub config: SimConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StakeholderSpec {
    pub id: String,
    pub role: Role,
    /// Tokens granted from the DEVELOPMENT pool at genesis.
    #[serde(default)]
    pub grant: u64,
    /// Portion of the grant staked at genesis.
    #[serde(default)]
    pub stake: u64,
    #[serde(default = "default_lock")]
    pub lock_epochs: u64,
}

fn default_lock() -> u64 {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    /// Scenario-local handle; also seeds the system's public key.
    pub name: String,
    pub owner: String,
    pub purpose: String,
    pub risk_tier: RiskTier,
    #[serde(default, with = "crate::scalar::serde_rational")]
    pub exposure: Rational,
    /// Baseline monitored metrics, reported every epoch unless overridden.
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub id: String,
    pub feed_id: String,
    /// Published every `every` epochs.
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
    #[serde(default = "one")]
    pub every: u64,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthoritySpec {
    pub count: usize,
    #[serde(default)]
    pub scheme: SignatureScheme,
    /// Defaults to ceil(2n/3).
    #[serde(default)]
    pub quorum: Option<usize>,
    #[serde(default = "default_capacity")]
    pub block_capacity: usize,
}

fn default_capacity() -> usize {
    DEFAULT_BLOCK_CAPACITY
}

impl Default for AuthoritySpec {
    fn default() -> Self {
        AuthoritySpec {
            count: 4,
            scheme: SignatureScheme::default(),
            quorum: None,
            block_capacity: DEFAULT_BLOCK_CAPACITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditorSpec {
    /// Must name a stakeholder with role AUDITOR.
    pub id: String,
    pub body: String,
    pub scopes: BTreeSet<RuleDomain>,
    #[serde(default = "default_validity")]
    pub validity_epochs: u64,
}

fn default_validity() -> u64 {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Injected {
    pub epoch: u64,
    pub event: InjectedEvent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum InjectedEvent {
    /// Overrides monitored metrics of `system` for `duration` epochs.
    Violation {
        system: String,
        metrics: Metrics,
        #[serde(default = "one")]
        duration: u64,
    },
    /// `voters` cast identical votes on `proposals` fresh routine proposals.
    Collusion {
        voters: Vec<String>,
        #[serde(default = "ten")]
        proposals: u32,
        #[serde(default = "default_direction")]
        direction: Direction,
    },
    /// The first oracle publishes a new regulation version.
    RegulationChange { version: u64 },
    Incident { system: String, severity: Severity },
    Proposal(ProposalSpec),
    /// A stakeholder attempts `action` on `system`; the attempt is logged.
    AccessAttempt {
        actor: String,
        action: Action,
        system: String,
    },
    /// The owner of `system` discloses tampered metrics to this epoch's audit.
    EvidenceForgery { system: String },
    /// `challenger` disputes this epoch's assessment of `system`.
    Dispute {
        system: String,
        challenger: String,
        votes: Vec<PanelVote>,
    },
}

fn ten() -> u32 {
    10
}

fn default_direction() -> Direction {
    Direction::For
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalSpec {
    pub proposer: String,
    pub kind: ProposalKind,
    #[serde(default = "default_mode")]
    pub mode: VoteMode,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub weights: Option<WeightsSpec>,
    #[serde(default)]
    pub rule: Option<ComplianceRuleModule>,
    #[serde(default)]
    pub votes: Vec<VoteSpec>,
}

fn default_mode() -> VoteMode {
    VoteMode::Linear
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoteSpec {
    pub voter: String,
    pub direction: Direction,
    #[serde(default = "one")]
    pub magnitude: u64,
}

/// [`VoteWeights`] with rationals written as decimal or fraction strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    #[serde(with = "crate::scalar::serde_rational_map")]
    pub role_multiplier: BTreeMap<Role, Rational>,
    #[serde(with = "crate::scalar::serde_rational")]
    pub cap_fraction: Rational,
    #[serde(with = "crate::scalar::serde_rational")]
    pub threshold_routine: Rational,
    #[serde(with = "crate::scalar::serde_rational")]
    pub threshold_critical: Rational,
}

impl Default for WeightsSpec {
    fn default() -> Self {
        Weights::default().into()
    }
}

impl From<Weights> for WeightsSpec {
    fn from(w: Weights) -> Self {
        WeightsSpec {
            role_multiplier: w.role_multiplier,
            cap_fraction: w.cap_fraction,
            threshold_routine: w.threshold_routine,
            threshold_critical: w.threshold_critical,
        }
    }
}

impl From<WeightsSpec> for Weights {
    fn from(w: WeightsSpec) -> Self {
        VoteWeights {
            role_multiplier: w.role_multiplier,
            cap_fraction: w.cap_fraction,
            threshold_routine: w.threshold_routine,
            threshold_critical: w.threshold_critical,
        }
    }
}

/// Slash fractions per offence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlashTable {
    #[serde(with = "crate::scalar::serde_rational")]
    pub audit_fail: Rational,
    #[serde(with = "crate::scalar::serde_rational")]
    pub evidence_forged: Rational,
    #[serde(with = "crate::scalar::serde_rational")]
    pub collusion_confirmed: Rational,
}

impl Default for SlashTable {
    fn default() -> Self {
        SlashTable {
            audit_fail: Rational::new(1, 20),
            evidence_forged: Rational::new(1, 5),
            collusion_confirmed: Rational::new(1, 10),
        }
    }
}

/// Background activity drawn from the seeded streams each epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActivitySpec {
    /// Random transfers, stakes, unstakes and overdraft attempts.
    pub token_ops_per_epoch: u32,
    /// Random routine or critical proposals voted on by random subsets.
    pub proposals_per_epoch: u32,
    /// Random VIEW attempts by random stakeholders on random systems.
    pub access_checks_per_epoch: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub total_supply: u64,
    pub pool_fractions: PoolFractions,
    pub weights: WeightsSpec,
    pub governance: GovernanceConfig,
    pub risk: RiskConfig,
    pub cadence: Cadence,
    pub audit_capacity: usize,
    pub slash: SlashTable,
    pub activity: ActivitySpec,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            total_supply: DEFAULT_TOTAL_SUPPLY,
            pool_fractions: PoolFractions::default(),
            weights: WeightsSpec::default(),
            governance: GovernanceConfig::default(),
            risk: RiskConfig::default(),
            cadence: Cadence::default(),
            audit_capacity: crate::audit::DEFAULT_CAPACITY,
            slash: SlashTable::default(),
            activity: ActivitySpec::default(),
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ScenarioError::Parse {
                path,
                message: e.into_inner().to_string(),
            }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Scenario::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Canonical bytes hashed into the genesis event.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("scenario serializes")
    }

    pub fn stakeholder(&self, id: &str) -> Option<&StakeholderSpec> {
        self.stakeholders.iter().find(|s| s.id == id)
    }

    pub fn system(&self, name: &str) -> Option<&SystemSpec> {
        self.ai_systems.iter().find(|s| s.name == name)
    }

    /// Cross-field checks serde cannot express.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut ids = BTreeSet::new();
        for (i, s) in self.stakeholders.iter().enumerate() {
            let p = format!("stakeholders[{i}]");
            if s.id.is_empty() || s.id.starts_with("protocol:") {
                return Err(invalid(format!("{p}.id"), "must be non-empty and not start with `protocol:`"));
            }
            if !ids.insert(s.id.as_str()) {
                return Err(invalid(format!("{p}.id"), format!("duplicate stakeholder {:?}", s.id)));
            }
            if s.stake > s.grant {
                return Err(invalid(format!("{p}.stake"), "stake exceeds grant"));
            }
            if s.stake > 0 && s.lock_epochs == 0 {
                return Err(invalid(format!("{p}.lock_epochs"), "must be positive when staking"));
            }
        }
        let granted: u128 = self.stakeholders.iter().map(|s| s.grant as u128).sum();
        let dev = crate::scalar::floor_u64(
            &(Rational::from_integer(self.config.total_supply as i128) * self.config.pool_fractions.development),
        );
        if granted > dev as u128 {
            return Err(invalid("stakeholders", format!("grants total {granted} exceed the DEVELOPMENT pool {dev}")));
        }

        let mut names = BTreeSet::new();
        for (i, s) in self.ai_systems.iter().enumerate() {
            let p = format!("ai_systems[{i}]");
            if !names.insert(s.name.as_str()) {
                return Err(invalid(format!("{p}.name"), format!("duplicate system {:?}", s.name)));
            }
            if !ids.contains(s.owner.as_str()) {
                return Err(invalid(format!("{p}.owner"), format!("unknown stakeholder {:?}", s.owner)));
            }
            if s.risk_tier == RiskTier::Unacceptable {
                return Err(invalid(format!("{p}.risk_tier"), "UNACCEPTABLE systems may not be registered"));
            }
            if s.purpose.trim().is_empty() || s.purpose.len() > MAX_PURPOSE_LEN {
                return Err(invalid(format!("{p}.purpose"), format!("must be 1..={MAX_PURPOSE_LEN} bytes")));
            }
            if s.exposure < Rational::from_integer(0) || s.exposure > Rational::from_integer(1) {
                return Err(invalid(format!("{p}.exposure"), "must lie in [0, 1]"));
            }
            check_metrics(&format!("{p}.metrics"), &s.metrics)?;
        }

        let mut feeds = BTreeSet::new();
        for (i, o) in self.oracles.iter().enumerate() {
            if o.every == 0 {
                return Err(invalid(format!("oracles[{i}].every"), "must be positive"));
            }
            if !feeds.insert(o.feed_id.as_str()) {
                return Err(invalid(format!("oracles[{i}].feed_id"), "duplicate feed id"));
            }
            if let Some((k, _)) = o.values.iter().find(|(_, v)| !v.is_finite()) {
                return Err(invalid(format!("oracles[{i}].values.{k}"), "must be finite"));
            }
        }

        let a = &self.authorities;
        if a.count == 0 {
            return Err(invalid("authorities.count", "at least one authority is required"));
        }
        if let Some(q) = a.quorum {
            if q == 0 || q > a.count {
                return Err(invalid("authorities.quorum", format!("must lie in 1..={}", a.count)));
            }
        }
        if a.block_capacity == 0 {
            return Err(invalid("authorities.block_capacity", "must be positive"));
        }

        for (i, au) in self.auditors.iter().enumerate() {
            let p = format!("auditors[{i}]");
            match self.stakeholder(&au.id) {
                Some(s) if s.role == Role::Auditor => {}
                _ => return Err(invalid(format!("{p}.id"), "must name a stakeholder with role AUDITOR")),
            }
            if !self.accreditors.contains(&au.body) {
                return Err(invalid(format!("{p}.body"), format!("unknown accreditor {:?}", au.body)));
            }
            if au.scopes.is_empty() {
                return Err(invalid(format!("{p}.scopes"), "must not be empty"));
            }
            if au.validity_epochs == 0 {
                return Err(invalid(format!("{p}.validity_epochs"), "must be positive"));
            }
        }

        let weights: Weights = self.config.weights.clone().into();
        weights
            .validate()
            .map_err(|e| invalid("config.weights", e.to_string()))?;
        if self.config.audit_capacity == 0 {
            return Err(invalid("config.audit_capacity", "must be positive"));
        }
        let r = &self.config.risk;
        if !(r.alpha > 0.0 && r.alpha <= 1.0) {
            return Err(invalid("config.risk.alpha", "must lie in (0, 1]"));
        }

        for (i, inj) in self.injected_events.iter().enumerate() {
            self.validate_injected(i, inj)?;
        }
        Ok(())
    }

    fn validate_injected(&self, i: usize, inj: &Injected) -> Result<(), ScenarioError> {
        let p = format!("injected_events[{i}]");
        if inj.epoch == 0 || inj.epoch > self.epochs {
            return Err(invalid(format!("{p}.epoch"), format!("must lie in 1..={}", self.epochs)));
        }
        let sys = |name: &str| {
            self.system(name)
                .map(|_| ())
                .ok_or_else(|| invalid(format!("{p}.event.system"), format!("unknown system {name:?}")))
        };
        let holder = |field: &str, id: &str| {
            self.stakeholder(id)
                .map(|_| ())
                .ok_or_else(|| invalid(format!("{p}.event.{field}"), format!("unknown stakeholder {id:?}")))
        };
        match &inj.event {
            InjectedEvent::Violation { system, metrics, duration } => {
                sys(system)?;
                check_metrics(&format!("{p}.event.metrics"), metrics)?;
                if *duration == 0 {
                    return Err(invalid(format!("{p}.event.duration"), "must be positive"));
                }
            }
            InjectedEvent::Collusion { voters, proposals, .. } => {
                if voters.len() < 2 {
                    return Err(invalid(format!("{p}.event.voters"), "at least two voters are required"));
                }
                for v in voters {
                    holder("voters", v)?;
                }
                if *proposals == 0 {
                    return Err(invalid(format!("{p}.event.proposals"), "must be positive"));
                }
            }
            InjectedEvent::RegulationChange { .. } => {
                if self.oracles.is_empty() {
                    return Err(invalid(format!("{p}.event"), "REGULATION_CHANGE requires an oracle"));
                }
            }
            InjectedEvent::Incident { system, .. } | InjectedEvent::EvidenceForgery { system } => sys(system)?,
            InjectedEvent::Proposal(ps) => {
                holder("proposer", &ps.proposer)?;
                let fits = match ps.kind {
                    ProposalKind::Routine | ProposalKind::Critical => ps.weights.is_none() && ps.rule.is_none(),
                    ProposalKind::WeightAdjustment => ps.weights.is_some() && ps.rule.is_none(),
                    ProposalKind::RuleUpdate => ps.rule.is_some() && ps.weights.is_none(),
                };
                if !fits {
                    return Err(invalid(
                        format!("{p}.event"),
                        format!("{} proposals carry exactly their own payload", ps.kind),
                    ));
                }
                for (j, v) in ps.votes.iter().enumerate() {
                    holder(&format!("votes[{j}].voter"), &v.voter)?;
                }
            }
            InjectedEvent::AccessAttempt { actor, system, .. } => {
                holder("actor", actor)?;
                sys(system)?;
            }
            InjectedEvent::Dispute { system, challenger, votes } => {
                sys(system)?;
                holder("challenger", challenger)?;
                if votes.is_empty() || votes.len() % 2 == 0 {
                    return Err(invalid(format!("{p}.event.votes"), "panel size must be odd"));
                }
            }
        }
        Ok(())
    }
}

fn check_metrics(path: &str, metrics: &Metrics) -> Result<(), ScenarioError> {
    for (k, v) in metrics {
        if let MetricValue::Number(x) = v {
            if !x.is_finite() {
                return Err(invalid(format!("{path}.{k}"), "must be finite"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"seed": 1, "epochs": 3}"#;

    #[test]
    fn minimal_scenario_takes_defaults() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.authorities.count, 4);
        assert_eq!(s.config.audit_capacity, 4);
        assert_eq!(s.config.slash.audit_fail, Rational::new(1, 20));
        assert!(s.rules.is_none());
    }

    #[test]
    fn round_trips_through_json() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn parse_errors_carry_the_field_path() {
        let text = r#"{"seed": 1, "epochs": 3,
            "stakeholders": [{"id": "a", "role": "BANK"}, {"id": "b", "role": "KING"}]}"#;
        match Scenario::from_json(text) {
            Err(ScenarioError::Parse { path, .. }) => assert_eq!(path, "stakeholders[1].role"),
            other => panic!("{other:?}"),
        }
        let text = r#"{"seed": 1, "epochs": 3, "colour": 1}"#;
        assert!(matches!(Scenario::from_json(text), Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn semantic_errors_carry_the_field_path() {
        let text = r#"{"seed": 1, "epochs": 3,
            "stakeholders": [{"id": "a", "role": "BANK", "grant": 10}],
            "ai_systems": [{"name": "s", "owner": "zed", "purpose": "p", "risk_tier": "HIGH", "metrics": {}}]}"#;
        match Scenario::from_json(text) {
            Err(ScenarioError::Invalid { path, .. }) => assert_eq!(path, "ai_systems[0].owner"),
            other => panic!("{other:?}"),
        }
        let text = r#"{"seed": 1, "epochs": 3,
            "injected_events": [{"epoch": 9, "event": {"type": "REGULATION_CHANGE", "version": 2}}]}"#;
        match Scenario::from_json(text) {
            Err(ScenarioError::Invalid { path, .. }) => assert_eq!(path, "injected_events[0].epoch"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grants_are_bounded_by_the_development_pool() {
        let text = r#"{"seed": 1, "epochs": 3, "config": {"total_supply": 100},
            "stakeholders": [{"id": "a", "role": "BANK", "grant": 31}]}"#;
        assert!(matches!(Scenario::from_json(text), Err(ScenarioError::Invalid { .. })));
    }

    #[test]
    fn injected_event_shapes() {
        let text = r#"{"seed": 1, "epochs": 5,
            "stakeholders": [{"id": "a", "role": "BANK", "grant": 10}, {"id": "b", "role": "FINTECH"}],
            "ai_systems": [{"name": "s", "owner": "a", "purpose": "p", "risk_tier": "HIGH",
                            "metrics": {"capital_ratio": 0.1}}],
            "oracles": [{"id": "o", "feed_id": "f"}],
            "injected_events": [
              {"epoch": 1, "event": {"type": "VIOLATION", "system": "s", "metrics": {"capital_ratio": 0.05}}},
              {"epoch": 2, "event": {"type": "COLLUSION", "voters": ["a", "b"]}},
              {"epoch": 3, "event": {"type": "REGULATION_CHANGE", "version": 2}},
              {"epoch": 3, "event": {"type": "INCIDENT", "system": "s", "severity": "CRITICAL"}},
              {"epoch": 4, "event": {"type": "PROPOSAL", "proposer": "a", "kind": "ROUTINE",
                                     "votes": [{"voter": "b", "direction": "FOR"}]}},
              {"epoch": 4, "event": {"type": "ACCESS_ATTEMPT", "actor": "b", "action": "MODIFY", "system": "s"}},
              {"epoch": 5, "event": {"type": "EVIDENCE_FORGERY", "system": "s"}},
              {"epoch": 5, "event": {"type": "DISPUTE", "system": "s", "challenger": "b",
                                     "votes": ["uphold", "overturn", "uphold"]}}
            ]}"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(s.injected_events.len(), 8);
        assert!(matches!(
            s.injected_events[1].event,
            InjectedEvent::Collusion { proposals: 10, .. }
        ));
    }

    #[test]
    fn proposal_payload_must_match_kind() {
        let text = r#"{"seed": 1, "epochs": 5,
            "stakeholders": [{"id": "a", "role": "BANK"}],
            "injected_events": [{"epoch": 1, "event": {"type": "PROPOSAL", "proposer": "a",
                                 "kind": "WEIGHT_ADJUSTMENT"}}]}"#;
        match Scenario::from_json(text) {
            Err(ScenarioError::Invalid { path, .. }) => assert_eq!(path, "injected_events[0].event"),
            other => panic!("{other:?}"),
        }
    }
}
