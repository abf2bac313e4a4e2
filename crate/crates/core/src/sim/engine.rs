//! The per-epoch driver.

use std::collections::{BTreeMap, BTreeSet};

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::audit::{AuditBook, AuditCandidate, AuditError, Disclosure};
use crate::compliance::{
    record_assessment, resolve_dispute, standard_rule_pack, Assessment, Authorization, DisputeBook,
    MetricValue, Metrics, OracleBook, OracleFeed, RuleRegistry, REGULATION_VERSION_METRIC,
};
use crate::crypto::{Digest, KeyPair};
use crate::governance::Governance;
use crate::identity::{AccessPolicy, ContentStore, IdentityError, IdentityRegistry, MemoryStore};
use crate::ledger::{
    Account, DidChange, EventBody, EventSink, GenesisBody, Ledger, MitigationSource,
    MitigationTriggeredBody, ProposalPayload, TransferReason, AuthoritySet, EpochSealedBody,
};
use crate::risk::RiskEngine;
use crate::tokens::{TokenError, TokenLedger};
use crate::types::{
    Action, AuditOutcome, AuditTrigger, ComplianceStatus, Direction, Pool, Principal, ProposalKind,
    ProposalStatus, Role, RiskTier, SlashReason, VoteMode,
};
use crate::Rational;

use super::journal::{Journal, Phase, TraceEntry};
use super::rng::Streams;
use super::scenario::{InjectedEvent, ProposalSpec, Scenario};
use super::SimError;

const GENESIS_ACTOR: &str = "protocol:genesis";
const TOKENS_ACTOR: &str = "protocol:tokens";
const GOVERNANCE_ACTOR: &str = "protocol:governance";
const COMPLIANCE_ACTOR: &str = "protocol:compliance";

/// Public key derived for a scenario system name.
pub fn system_key(name: &str) -> [u8; 32] {
    Digest::of_parts(&[b"govsim/system-key", name.as_bytes()]).0
}

/// Authority keypairs derived from the scenario seed.
pub fn authority_keys(scenario: &Scenario) -> Vec<(String, KeyPair)> {
    (1..=scenario.authorities.count)
        .map(|i| {
            let id = format!("authority-{i}");
            let seed = format!("{id}/{}", scenario.seed);
            (id, KeyPair::from_seed(scenario.authorities.scheme, seed.as_bytes()))
        })
        .collect()
}

#[derive(Clone, Debug)]
struct Evaluated {
    assessment: Assessment,
    commitment: Digest,
    disclosure: Disclosure,
}

#[derive(Clone, Debug)]
struct SystemState {
    name: String,
    did: String,
    owner: String,
    exposure: Rational,
    baseline: Metrics,
    /// `(last epoch in force, overriding metrics)`.
    overrides: Vec<(u64, Metrics)>,
    last: Option<Evaluated>,
    forge_pending: bool,
}

#[derive(Clone, Debug)]
struct AuditResult {
    did: String,
    owner: String,
    trigger: AuditTrigger,
    outcome: AuditOutcome,
    forged: bool,
}

/// Live simulation state. Build with [`Simulation::new`], then call
/// [`Simulation::step`] once per epoch.
pub struct Simulation {
    scenario: Scenario,
    keys: Vec<(String, KeyPair)>,
    journal: Journal,
    identity: IdentityRegistry,
    store: MemoryStore,
    rules: RuleRegistry,
    oracles: OracleBook,
    disputes: DisputeBook,
    audit: AuditBook,
    tokens: TokenLedger,
    gov: Governance,
    risk: RiskEngine,
    /// Ascending DID order.
    systems: Vec<SystemState>,
    by_name: BTreeMap<String, usize>,
    roles: BTreeMap<String, Role>,
    triggers: BTreeMap<String, AuditTrigger>,
    carry: BTreeMap<String, AuditTrigger>,
    rng: Streams,
    epoch: u64,
}

impl Simulation {
    /// Builds the world and records the genesis events (epoch 0).
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let keys = authority_keys(&scenario);
        let mut authorities = AuthoritySet::from_keys(keys.iter().map(|(id, k)| (id.as_str(), k)));
        if let Some(q) = scenario.authorities.quorum {
            authorities = authorities.with_quorum(q);
        }
        let ledger = Ledger::new(authorities, scenario.authorities.block_capacity);
        let cfg = &scenario.config;
        let tokens = TokenLedger::mint_genesis(cfg.total_supply, &cfg.pool_fractions)?;
        let gov = Governance::new(cfg.weights.clone().into(), cfg.governance.clone())?;
        let audit = AuditBook::new(
            scenario.accreditors.iter().cloned(),
            cfg.cadence.clone(),
            cfg.audit_capacity,
            scenario.seed,
        );
        let mut sim = Simulation {
            keys,
            journal: Journal::new(ledger),
            identity: IdentityRegistry::new(AccessPolicy::default()),
            store: MemoryStore::default(),
            rules: RuleRegistry::default(),
            oracles: OracleBook::new(scenario.oracles.iter().map(|o| o.id.clone())),
            disputes: DisputeBook::default(),
            audit,
            tokens,
            gov,
            risk: RiskEngine::new(cfg.risk.clone()),
            systems: Vec::new(),
            by_name: BTreeMap::new(),
            roles: scenario.stakeholders.iter().map(|s| (s.id.clone(), s.role)).collect(),
            triggers: BTreeMap::new(),
            carry: BTreeMap::new(),
            rng: Streams::new(scenario.seed),
            epoch: 0,
            scenario,
        };
        sim.genesis()?;
        Ok(sim)
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.scenario.epochs
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn ledger(&self) -> &Ledger {
        self.journal.ledger()
    }

    pub fn trace(&self) -> &[TraceEntry] {
        self.journal.trace()
    }

    pub fn tokens(&self) -> &TokenLedger {
        &self.tokens
    }

    pub fn identity(&self) -> &IdentityRegistry {
        &self.identity
    }

    pub fn governance(&self) -> &Governance {
        &self.gov
    }

    pub fn risk(&self) -> &RiskEngine {
        &self.risk
    }

    pub fn audits(&self) -> &AuditBook {
        &self.audit
    }

    pub fn rules(&self) -> &RuleRegistry {
        &self.rules
    }

    /// DID registered for a scenario system name.
    pub fn did_of(&self, name: &str) -> Option<&str> {
        self.by_name.get(name).map(|&i| self.systems[i].did.as_str())
    }

    /// Every monitored metric value each system reported during the run,
    /// keyed by DID. None of them may reach the ledger.
    pub fn private_metrics(&self) -> BTreeMap<String, Vec<(String, MetricValue)>> {
        self.systems
            .iter()
            .map(|s| {
                let values = s
                    .baseline
                    .iter()
                    .chain(s.overrides.iter().flat_map(|(_, o)| o.iter()))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                (s.did.clone(), values)
            })
            .collect()
    }

    pub fn into_parts(self) -> (Ledger, Vec<TraceEntry>) {
        self.journal.into_parts()
    }

    fn role_of(&self, id: &str) -> Role {
        self.roles.get(id).copied().unwrap_or(Role::Developer)
    }

    fn genesis(&mut self) -> Result<(), SimError> {
        self.journal.begin(0, Phase::Genesis);
        let s = &self.scenario;
        let authorities = self.journal.ledger().authorities().clone();
        let body = GenesisBody {
            scenario_digest: Digest::of(&s.canonical_bytes()),
            seed: s.seed,
            scheme: authorities.scheme,
            authorities: authorities.members.into_iter().collect(),
            quorum: authorities.quorum as u32,
            block_capacity: s.authorities.block_capacity as u32,
            total_supply: self.tokens.total_supply,
            pools: self.tokens.genesis_pools(),
        };
        self.journal.emit(GENESIS_ACTOR, EventBody::from(body));

        let pack = s.rules.clone().unwrap_or_else(standard_rule_pack);
        for rule in pack {
            self.rules.register_rule(rule, Authorization::Genesis, &mut self.journal)?;
        }

        for sh in &self.scenario.stakeholders {
            self.gov.add_stakeholder(&sh.id, sh.role)?;
            self.tokens.open_account(&sh.id);
            if sh.grant > 0 {
                self.tokens.transfer(
                    &Account::Pool(Pool::Development),
                    &Account::Holder(sh.id.clone()),
                    sh.grant,
                    TransferReason::Grant,
                    TOKENS_ACTOR,
                    &mut self.journal,
                )?;
            }
            if sh.stake > 0 {
                self.tokens.stake(&sh.id, sh.stake, sh.lock_epochs, 0, &mut self.journal)?;
            }
        }
        self.gov.sync_stakes(&self.tokens);

        for a in &self.scenario.auditors {
            self.audit.accredit_auditor(
                &a.id,
                &a.body,
                a.scopes.clone(),
                a.validity_epochs,
                0,
                &mut self.journal,
            )?;
        }

        let mut systems = Vec::new();
        for spec in &self.scenario.ai_systems {
            let key = system_key(&spec.name);
            let did = self.identity.register_did(
                &key,
                &spec.purpose,
                spec.risk_tier,
                &spec.owner,
                true,
                &mut self.journal,
            )?;
            let card = serde_json::json!({
                "name": spec.name,
                "purpose": spec.purpose,
                "owner": spec.owner,
                "risk_tier": spec.risk_tier,
            });
            let address = self.store.store(card.to_string().as_bytes())?;
            let owner = Principal::stakeholder(&spec.owner, self.roles[&spec.owner]);
            match self.identity.update_did(
                &did,
                DidChange::MetadataRef(address),
                &owner,
                Some(&self.store),
                &mut self.journal,
            ) {
                Ok(_) | Err(IdentityError::AccessDenied { .. }) => {}
                Err(e) => return Err(e.into()),
            }
            self.risk.track(&did, spec.risk_tier);
            systems.push(SystemState {
                name: spec.name.clone(),
                did,
                owner: spec.owner.clone(),
                exposure: spec.exposure,
                baseline: spec.metrics.clone(),
                overrides: Vec::new(),
                last: None,
                forge_pending: false,
            });
        }
        systems.sort_by(|a, b| a.did.cmp(&b.did));
        self.by_name = systems.iter().enumerate().map(|(i, s)| (s.name.clone(), i)).collect();
        self.systems = systems;

        self.elect(0);
        if self.scenario.epochs == 0 {
            self.journal.seal(&self.keys)?;
        }
        Ok(())
    }

    /// Runs one epoch through every phase and seals its blocks.
    pub fn step(&mut self) -> Result<(), SimError> {
        let e = self.epoch + 1;
        self.epoch = e;
        self.triggers = std::mem::take(&mut self.carry);
        let injected: Vec<InjectedEvent> = self
            .scenario
            .injected_events
            .iter()
            .filter(|i| i.epoch == e)
            .map(|i| i.event.clone())
            .collect();
        self.ingest(e, &injected)?;
        self.compliance(e, &injected)?;
        self.assess_risk(e, &injected)?;
        let results = self.run_audits(e)?;
        self.penalties(e, &results)?;
        self.governance_phase(e, &injected)?;
        self.journal.begin(e, Phase::Election);
        if self.gov.is_election_epoch(e) {
            self.elect(e);
        }
        self.rewards(e)?;
        self.seal(e)
    }

    /// Runs every remaining epoch.
    pub fn run_to_end(&mut self) -> Result<(), SimError> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(())
    }

    fn elect(&mut self, epoch: u64) {
        if let Err(e) = self.gov.elect(epoch, None, &mut self.journal) {
            debug!("epoch {epoch}: no election: {e}");
        }
    }

    // Phase 1 ---------------------------------------------------------------

    fn ingest(&mut self, e: u64, injected: &[InjectedEvent]) -> Result<(), SimError> {
        self.journal.begin(e, Phase::Ingest);
        self.gov.begin_epoch(e, &mut self.journal);

        let mut bumped = false;
        for o in &self.scenario.oracles {
            if e % o.every == 0 {
                let feed = OracleFeed {
                    feed_id: o.feed_id.clone(),
                    epoch: e,
                    values: o.values.clone(),
                    signer: o.id.clone(),
                };
                bumped |= self.oracles.ingest(feed, &mut self.journal)?.is_some();
            }
        }
        for inj in injected {
            if let InjectedEvent::RegulationChange { version } = inj {
                let o = &self.scenario.oracles[0];
                let feed = OracleFeed {
                    feed_id: format!("{}/regulation", o.feed_id),
                    epoch: e,
                    values: BTreeMap::from([(REGULATION_VERSION_METRIC.to_string(), *version as f64)]),
                    signer: o.id.clone(),
                };
                bumped |= self.oracles.ingest(feed, &mut self.journal)?.is_some();
            }
        }
        if bumped {
            self.regulation_review(e)?;
        }

        for inj in injected {
            match inj {
                InjectedEvent::Violation { system, metrics, duration } => {
                    let i = self.by_name[system];
                    self.systems[i].overrides.push((e + duration - 1, metrics.clone()));
                }
                InjectedEvent::EvidenceForgery { system } => {
                    let i = self.by_name[system];
                    self.systems[i].forge_pending = true;
                    let did = self.systems[i].did.clone();
                    self.triggers.entry(did).or_insert(AuditTrigger::Mitigation);
                }
                InjectedEvent::AccessAttempt { actor, action, system } => {
                    let did = self.systems[self.by_name[system]].did.clone();
                    let p = Principal::stakeholder(actor, self.role_of(actor));
                    if let Err(err) = self.identity.authorize(&p, *action, &did, &mut self.journal) {
                        debug!("epoch {e}: {err}");
                    }
                }
                _ => {}
            }
        }

        self.random_access(e);
        self.random_token_activity(e);
        Ok(())
    }

    fn regulation_review(&mut self, e: u64) -> Result<(), SimError> {
        let protocol = Principal::Protocol("compliance");
        for s in &self.systems {
            let status = self.identity.get(&s.did).map(|r| r.compliance_status);
            if status == Some(ComplianceStatus::Suspended) {
                continue;
            }
            self.journal.emit(
                COMPLIANCE_ACTOR,
                EventBody::from(MitigationTriggeredBody {
                    did: s.did.clone(),
                    source: MitigationSource::Regulation,
                }),
            );
            self.identity.update_did(
                &s.did,
                DidChange::Status(ComplianceStatus::UnderReview),
                &protocol,
                None,
                &mut self.journal,
            )?;
            self.triggers.insert(s.did.clone(), AuditTrigger::Regulation);
        }
        debug!("epoch {e}: regulation version {}", self.oracles.regulation_version());
        Ok(())
    }

    fn random_access(&mut self, e: u64) {
        let n = self.scenario.config.activity.access_checks_per_epoch;
        if self.systems.is_empty() || self.scenario.stakeholders.is_empty() {
            return;
        }
        for _ in 0..n {
            let who = self.scenario.stakeholders.choose(&mut self.rng.access).expect("non-empty");
            let sys = self.systems.choose(&mut self.rng.access).expect("non-empty");
            let p = Principal::stakeholder(&who.id, who.role);
            if let Err(err) = self.identity.authorize(&p, Action::View, &sys.did, &mut self.journal) {
                debug!("epoch {e}: {err}");
            }
        }
    }

    fn random_token_activity(&mut self, e: u64) {
        let n = self.scenario.config.activity.token_ops_per_epoch;
        let ids: Vec<String> = self.scenario.stakeholders.iter().map(|s| s.id.clone()).collect();
        if ids.len() < 2 {
            return;
        }
        let rng = &mut self.rng.activity;
        for _ in 0..n {
            let who = ids.choose(rng).expect("non-empty").clone();
            let balance = self.tokens.balance(&who);
            let result = match rng.gen_range(0..4u8) {
                0 => {
                    let to = loop {
                        let c = ids.choose(rng).expect("non-empty");
                        if *c != who {
                            break c.clone();
                        }
                    };
                    if balance == 0 {
                        continue;
                    }
                    let amount = rng.gen_range(1..=(balance / 20).max(1));
                    self.tokens.transfer(
                        &Account::Holder(who.clone()),
                        &Account::Holder(to),
                        amount,
                        TransferReason::Transfer,
                        &who,
                        &mut self.journal,
                    )
                }
                1 => {
                    if balance == 0 {
                        continue;
                    }
                    let amount = rng.gen_range(1..=(balance / 10).max(1));
                    let lock = rng.gen_range(1..=8);
                    self.tokens
                        .stake(&who, amount, lock, e, &mut self.journal)
                        .map(|_| ())
                }
                2 => self.tokens.unstake(&who, e, &mut self.journal).map(|_| ()),
                _ => {
                    // Overdraft attempt; must be rejected without side effects.
                    let amount = balance + rng.gen_range(1..=1000);
                    let r = self.tokens.transfer(
                        &Account::Holder(who.clone()),
                        &Account::Holder(ids[0].clone()),
                        amount,
                        TransferReason::Transfer,
                        &who,
                        &mut self.journal,
                    );
                    debug_assert!(matches!(r, Err(TokenError::InsufficientTokens { .. })));
                    r
                }
            };
            if let Err(err) = result {
                debug!("epoch {e}: token op by {who} rejected: {err}");
            }
        }
    }

    // Phase 2 ---------------------------------------------------------------

    fn metrics_for(&self, s: &SystemState, e: u64) -> Metrics {
        let mut m = self.oracles.values_for(e);
        m.extend(s.baseline.iter().map(|(k, v)| (k.clone(), v.clone())));
        for (until, o) in &s.overrides {
            if *until >= e {
                m.extend(o.iter().map(|(k, v)| (k.clone(), v.clone())));
            }
        }
        m
    }

    fn compliance(&mut self, e: u64, injected: &[InjectedEvent]) -> Result<(), SimError> {
        self.journal.begin(e, Phase::Compliance);
        let pins = BTreeMap::new();
        for i in 0..self.systems.len() {
            let did = self.systems[i].did.clone();
            let tier = self.identity.get(&did).expect("registered").risk_tier;
            if tier == RiskTier::Unacceptable {
                continue;
            }
            let metrics = self.metrics_for(&self.systems[i], e);
            let assessment = self.rules.evaluate(&did, tier, &metrics, e, &pins)?;
            let salt: [u8; 32] = self.rng.salts.gen();
            let disclosure = Disclosure { metrics, salt };
            let commitment = disclosure.commitment();
            record_assessment(&assessment, commitment, &mut self.journal);
            if !assessment.compliant {
                self.triggers.entry(did).or_insert(AuditTrigger::Mitigation);
            }
            self.systems[i].last = Some(Evaluated {
                assessment,
                commitment,
                disclosure,
            });
        }

        for inj in injected {
            let InjectedEvent::Dispute { system, challenger, votes } = inj else {
                continue;
            };
            let i = self.by_name[system];
            let Some(ev) = self.systems[i].last.clone().filter(|ev| ev.assessment.epoch == e) else {
                warn!("epoch {e}: dispute of {system} ignored, no assessment this epoch");
                continue;
            };
            let eligible: Vec<String> = self
                .audit
                .certifications()
                .filter(|c| c.is_valid_at(e) && c.auditor_id != *challenger)
                .map(|c| c.auditor_id.clone())
                .collect();
            let owner = self.systems[i].owner.clone();
            let dispute = match self.disputes.open_dispute(
                &ev.assessment,
                &owner,
                challenger,
                &eligible,
                votes.len(),
                &mut self.rng.disputes,
                &mut self.journal,
            ) {
                Ok(d) => d,
                Err(err) => {
                    warn!("epoch {e}: dispute of {system} rejected: {err}");
                    continue;
                }
            };
            let (corrected, overturned) =
                resolve_dispute(&dispute, &ev.assessment, ev.commitment, votes, &mut self.journal)?;
            if overturned {
                let did = self.systems[i].did.clone();
                if corrected.compliant {
                    if self.triggers.get(&did) == Some(&AuditTrigger::Mitigation) {
                        self.triggers.remove(&did);
                    }
                } else {
                    self.journal.emit(
                        COMPLIANCE_ACTOR,
                        EventBody::from(MitigationTriggeredBody {
                            did: did.clone(),
                            source: MitigationSource::Assessment,
                        }),
                    );
                    self.triggers.entry(did).or_insert(AuditTrigger::Mitigation);
                }
                if let Some(last) = self.systems[i].last.as_mut() {
                    last.assessment = corrected;
                }
            }
        }
        Ok(())
    }

    // Phase 3 ---------------------------------------------------------------

    fn assess_risk(&mut self, e: u64, injected: &[InjectedEvent]) -> Result<(), SimError> {
        self.journal.begin(e, Phase::Risk);
        self.risk.advance_all(e, &mut self.identity, &mut self.journal)?;
        for inj in injected {
            if let InjectedEvent::Incident { system, severity } = inj {
                let did = self.systems[self.by_name[system]].did.clone();
                self.risk
                    .raise_incident(&did, *severity, e, &mut self.identity, &mut self.journal)?;
            }
        }
        for i in 0..self.systems.len() {
            let s = &self.systems[i];
            let aggregate = s
                .last
                .as_ref()
                .map_or(Rational::from_integer(1), |ev| ev.assessment.aggregate_score);
            let audit_failed = self.audit.last_outcome(&s.did) == Some(AuditOutcome::Fail);
            let (did, exposure) = (s.did.clone(), s.exposure);
            let outcome = self.risk.assess(
                &did,
                aggregate,
                audit_failed,
                exposure,
                e,
                &mut self.identity,
                &mut self.journal,
            )?;
            if outcome.flagged {
                self.triggers.entry(did).or_insert(AuditTrigger::Forecast);
            }
        }
        Ok(())
    }

    // Phase 4 ---------------------------------------------------------------

    fn run_audits(&mut self, e: u64) -> Result<Vec<AuditResult>, SimError> {
        self.journal.begin(e, Phase::Audit);
        let candidates: Vec<AuditCandidate> = self
            .systems
            .iter()
            .map(|s| {
                let tier = self.identity.get(&s.did).expect("registered").risk_tier;
                AuditCandidate {
                    did: s.did.clone(),
                    tier,
                    domains: self.rules.domains_for(tier),
                    trigger: self.triggers.get(&s.did).copied(),
                }
            })
            .collect();
        let schedule = self.audit.plan(e, &candidates);
        if !schedule.unassignable.is_empty() {
            warn!("epoch {e}: no eligible auditor for {:?}", schedule.unassignable);
        }
        let index: BTreeMap<String, usize> =
            self.systems.iter().enumerate().map(|(i, s)| (s.did.clone(), i)).collect();
        let mut results = Vec::new();
        for a in &schedule.assignments {
            let i = index[&a.did];
            let Some(ev) = self.systems[i].last.clone() else {
                continue;
            };
            let tier = self.identity.get(&a.did).expect("registered").risk_tier;
            let forged = self.systems[i].forge_pending;
            let disclosure = if forged {
                self.systems[i].forge_pending = false;
                tamper(&ev.disclosure)
            } else {
                ev.disclosure.clone()
            };
            let outcome = match self.audit.perform_audit(
                &a.auditor,
                &a.did,
                tier,
                a.trigger,
                e,
                &disclosure,
                ev.commitment,
                &self.rules,
                &self.identity,
                &mut self.journal,
            ) {
                Ok(record) => record.outcome,
                Err(AuditError::EvidenceForged { .. }) => AuditOutcome::Inconclusive,
                Err(err) => return Err(err.into()),
            };
            results.push(AuditResult {
                did: a.did.clone(),
                owner: self.systems[i].owner.clone(),
                trigger: a.trigger,
                outcome,
                forged,
            });
        }
        Ok(results)
    }

    // Phase 5 ---------------------------------------------------------------

    fn penalties(&mut self, e: u64, results: &[AuditResult]) -> Result<(), SimError> {
        self.journal.begin(e, Phase::Penalties);
        let slash = self.scenario.config.slash.clone();
        let protocol = Principal::Protocol("audit");
        for r in results {
            let penalty = match (r.forged, r.outcome, r.trigger) {
                (true, _, _) => Some((SlashReason::EvidenceForged, slash.evidence_forged)),
                (false, AuditOutcome::Fail, AuditTrigger::Collusion) => {
                    Some((SlashReason::CollusionConfirmed, slash.collusion_confirmed))
                }
                (false, AuditOutcome::Fail, _) => Some((SlashReason::AuditFail, slash.audit_fail)),
                _ => None,
            };
            if let Some((reason, fraction)) = penalty {
                self.tokens
                    .slash(&r.owner, reason, fraction, Some(r.did.clone()), &mut self.journal)?;
            }
            let target = match r.outcome {
                AuditOutcome::Pass => ComplianceStatus::Compliant,
                AuditOutcome::Fail | AuditOutcome::Inconclusive => ComplianceStatus::Noncompliant,
            };
            let current = self.identity.get(&r.did).expect("registered").compliance_status;
            if current != target && current != ComplianceStatus::Suspended {
                self.identity.update_did(
                    &r.did,
                    DidChange::Status(target),
                    &protocol,
                    None,
                    &mut self.journal,
                )?;
            }
        }
        self.gov.sync_stakes(&self.tokens);
        Ok(())
    }

    // Phase 6 ---------------------------------------------------------------

    fn governance_phase(&mut self, e: u64, injected: &[InjectedEvent]) -> Result<(), SimError> {
        self.journal.begin(e, Phase::Governance);
        self.gov.sync_stakes(&self.tokens);
        for inj in injected {
            match inj {
                InjectedEvent::Proposal(ps) => self.scripted_proposal(e, ps)?,
                InjectedEvent::Collusion { voters, proposals, direction } => {
                    for k in 0..*proposals {
                        let pid = self.gov.submit_proposal(
                            &voters[0],
                            ProposalKind::Routine,
                            VoteMode::Linear,
                            ProposalPayload::Text(format!("coordinated motion {e}.{k}")),
                            e,
                            &mut self.journal,
                        )?;
                        for v in voters {
                            self.try_vote(v, pid, *direction, 1, e);
                        }
                        self.gov.tally(pid, &mut self.journal)?;
                    }
                }
                _ => {}
            }
        }
        self.random_proposals(e)?;

        let flagged = self.gov.respond_to_collusion(e, &mut self.journal);
        let suspects: BTreeSet<String> = flagged
            .iter()
            .flat_map(|p| [p.first.clone(), p.second.clone()])
            .collect();
        for s in &self.systems {
            if suspects.contains(&s.owner) {
                self.journal.emit(
                    GOVERNANCE_ACTOR,
                    EventBody::from(MitigationTriggeredBody {
                        did: s.did.clone(),
                        source: MitigationSource::Collusion,
                    }),
                );
                self.carry.insert(s.did.clone(), AuditTrigger::Collusion);
            }
        }
        Ok(())
    }

    fn try_vote(&mut self, voter: &str, pid: u64, direction: Direction, magnitude: u64, e: u64) {
        if let Err(err) =
            self.gov
                .cast_vote(voter, pid, direction, magnitude, &mut self.tokens, e, &mut self.journal)
        {
            debug!("epoch {e}: vote by {voter} on #{pid} rejected: {err}");
        }
    }

    fn scripted_proposal(&mut self, e: u64, ps: &ProposalSpec) -> Result<(), SimError> {
        let payload = match ps.kind {
            ProposalKind::Routine | ProposalKind::Critical => {
                ProposalPayload::Text(ps.text.clone().unwrap_or_else(|| format!("{} motion", ps.kind)))
            }
            ProposalKind::WeightAdjustment => {
                ProposalPayload::Weights(ps.weights.clone().expect("validated").into())
            }
            ProposalKind::RuleUpdate => ProposalPayload::Rule(ps.rule.clone().expect("validated")),
        };
        let pid = self
            .gov
            .submit_proposal(&ps.proposer, ps.kind, ps.mode, payload, e, &mut self.journal)?;
        for v in &ps.votes {
            self.try_vote(&v.voter, pid, v.direction, v.magnitude, e);
        }
        let status = self.gov.tally(pid, &mut self.journal)?;
        if status != ProposalStatus::Passed {
            return Ok(());
        }
        match ps.kind {
            ProposalKind::WeightAdjustment => {
                self.gov.adjust_weights(pid, e, &mut self.journal)?;
            }
            ProposalKind::RuleUpdate => {
                let proposal = self.gov.proposal(pid).expect("just tallied");
                let rule = ps.rule.clone().expect("validated");
                if let Err(err) =
                    self.rules
                        .register_rule(rule, Authorization::Proposal(proposal), &mut self.journal)
                {
                    warn!("epoch {e}: rule from proposal #{pid} rejected: {err}");
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn random_proposals(&mut self, e: u64) -> Result<(), SimError> {
        let n = self.scenario.config.activity.proposals_per_epoch;
        let ids: Vec<String> = self.scenario.stakeholders.iter().map(|s| s.id.clone()).collect();
        if ids.is_empty() {
            return Ok(());
        }
        for k in 0..n {
            let rng = &mut self.rng.governance;
            let proposer = ids.choose(rng).expect("non-empty").clone();
            let kind = if rng.gen_ratio(1, 5) {
                ProposalKind::Critical
            } else {
                ProposalKind::Routine
            };
            let mode = if rng.gen_ratio(3, 10) {
                VoteMode::Quadratic
            } else {
                VoteMode::Linear
            };
            let mut ballots = Vec::new();
            for id in &ids {
                if rng.gen_bool(0.5) {
                    let dir = if rng.gen_bool(0.5) { Direction::For } else { Direction::Against };
                    let mag = match mode {
                        VoteMode::Linear => 1,
                        VoteMode::Quadratic => rng.gen_range(1..=3),
                    };
                    ballots.push((id.clone(), dir, mag));
                }
            }
            let pid = self.gov.submit_proposal(
                &proposer,
                kind,
                mode,
                ProposalPayload::Text(format!("motion {e}.{k}")),
                e,
                &mut self.journal,
            )?;
            for (voter, dir, mag) in ballots {
                self.try_vote(&voter, pid, dir, mag, e);
            }
            self.gov.tally(pid, &mut self.journal)?;
        }
        Ok(())
    }

    // Phase 8 ---------------------------------------------------------------

    fn rewards(&mut self, e: u64) -> Result<(), SimError> {
        self.journal.begin(e, Phase::Rewards);
        let mut sums: BTreeMap<String, (Rational, i128)> = BTreeMap::new();
        for s in &self.systems {
            if let Some(ev) = &s.last {
                let entry = sums.entry(s.owner.clone()).or_insert((Rational::from_integer(0), 0));
                entry.0 += ev.assessment.aggregate_score;
                entry.1 += 1;
            }
        }
        let factors: BTreeMap<String, Rational> = sums
            .into_iter()
            .map(|(id, (sum, n))| (id, sum / Rational::from_integer(n)))
            .collect();
        match self.tokens.distribute_rewards(e, &factors, &mut self.journal) {
            Ok(_) => Ok(()),
            Err(TokenError::PoolExhausted { .. }) => {
                warn!("epoch {e}: reward pool exhausted");
                Ok(())
            }
            Err(err) => Err(err.into()),
        }
    }

    // Phase 9 ---------------------------------------------------------------

    fn seal(&mut self, e: u64) -> Result<(), SimError> {
        self.journal.begin(e, Phase::Seal);
        let events_in_epoch = self.journal.epoch_events();
        self.journal.emit(
            "protocol:ledger",
            EventBody::from(EpochSealedBody {
                epoch: e,
                events_in_epoch,
            }),
        );
        self.journal.seal(&self.keys)?;
        let c = self.tokens.conservation();
        if !c.ok {
            return Err(SimError::Conservation {
                epoch: e,
                line: c.checksum_line(),
            });
        }
        Ok(())
    }
}

/// Disclosure whose metrics no longer match the committed ones.
fn tamper(d: &Disclosure) -> Disclosure {
    let mut out = d.clone();
    match out.metrics.iter_mut().next() {
        Some((_, MetricValue::Number(x))) => *x += 1.0,
        Some((_, MetricValue::Bool(b))) => *b = !*b,
        None => out.salt[0] ^= 1,
    }
    out
}
