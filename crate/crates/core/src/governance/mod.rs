//! Delegated stakeholder governance: elections, proposals, weighted and
//! quadratic voting, collusion response and weight adjustment.

mod collusion;
mod power;

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use collusion::{detect_collusion, FlaggedPair, VoteHistory};
pub use power::{
    effective_power, effective_powers, elect_delegates, quadratic_cost, raw_power, tally_outcome,
    VoteWeights,
};

use crate::ledger::{
    Account, CollusionFlaggedBody, DelegateElectedBody, EventBody, EventSink, ProposalPayload,
    ProposalResolvedBody, ProposalSubmittedBody, TransferReason, VoteCastBody, WeightChange,
    WeightsAdjustedBody,
};
use crate::tokens::{TokenError, TokenLedger};
use crate::types::{Direction, Pool, ProposalKind, ProposalStatus, Role, VoteMode};
use crate::{Rational, Weights};

const ACTOR: &str = "protocol:governance";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GovernanceError {
    #[error("total raw voting power is zero")]
    NoVotingPower,
    #[error("{eligible} eligible candidates for {seats} seats")]
    InsufficientCandidates { eligible: usize, seats: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("{voter} already voted on proposal {proposal_id}")]
    AlreadyVoted { voter: String, proposal_id: u64 },
    #[error("{voter} holds {available} unstaked tokens, vote costs {needed}")]
    InsufficientTokens {
        voter: String,
        needed: u64,
        available: u64,
    },
    #[error("proposal {0} is not open")]
    ProposalClosed(u64),
    #[error("proposal {0} was already resolved")]
    AlreadyResolved(u64),
    #[error("unknown proposal {0}")]
    UnknownProposal(u64),
    #[error("unknown stakeholder {0:?}")]
    UnknownStakeholder(String),
    #[error("stakeholder {0:?} already exists")]
    DuplicateStakeholder(String),
    #[error("invalid vote magnitude {magnitude} for {mode} voting")]
    InvalidMagnitude { magnitude: u64, mode: VoteMode },
    #[error("proposal {proposal_id} uses {expected} voting")]
    ModeMismatch { proposal_id: u64, expected: VoteMode },
    #[error("proposal {proposal_id} is not a passed {expected} proposal")]
    NotAuthorized {
        proposal_id: u64,
        expected: ProposalKind,
    },
    #[error("payload does not match proposal kind {0}")]
    PayloadMismatch(ProposalKind),
    #[error(transparent)]
    Tokens(#[from] TokenError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stakeholder {
    pub id: String,
    pub role: Role,
    /// Mirrors the staked amount in [`TokenLedger`]; refreshed by [`Governance::sync_stakes`].
    pub stake: u64,
    pub is_delegate: bool,
    pub vote_history: BTreeMap<u64, Direction>,
    /// Epoch at which an active collusion penalty expires.
    pub penalty_until: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    pub direction: Direction,
    pub magnitude: u64,
    #[serde(with = "crate::scalar::serde_rational")]
    pub power: Rational,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Proposal {
    pub proposal_id: u64,
    pub kind: ProposalKind,
    pub mode: VoteMode,
    pub payload: ProposalPayload,
    pub proposer: String,
    pub submitted_epoch: u64,
    pub status: ProposalStatus,
    pub votes: BTreeMap<String, Vote>,
    pub for_power: Rational,
    pub against_power: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GovernanceConfig {
    pub seats: usize,
    pub election_interval: u64,
    pub collusion_min_common: u32,
    #[serde(with = "crate::scalar::serde_rational")]
    pub collusion_agreement: Rational,
    #[serde(with = "crate::scalar::serde_rational")]
    pub penalty_factor: Rational,
    pub review_epochs: u64,
}

impl Default for GovernanceConfig {
    fn default() -> Self {
        GovernanceConfig {
            seats: 5,
            election_interval: 4,
            collusion_min_common: 10,
            collusion_agreement: Rational::new(9, 10),
            penalty_factor: Rational::new(9, 10),
            review_epochs: 4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Governance {
    weights: Weights,
    pending_weights: Option<(u64, Weights)>,
    stakeholders: BTreeMap<String, Stakeholder>,
    proposals: BTreeMap<u64, Proposal>,
    next_proposal_id: u64,
    flagged: BTreeSet<(String, String)>,
    config: GovernanceConfig,
}

impl Governance {
    pub fn new(weights: Weights, config: GovernanceConfig) -> Result<Self, GovernanceError> {
        weights.validate()?;
        Ok(Governance {
            weights,
            pending_weights: None,
            stakeholders: BTreeMap::new(),
            proposals: BTreeMap::new(),
            next_proposal_id: 1,
            flagged: BTreeSet::new(),
            config,
        })
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn config(&self) -> &GovernanceConfig {
        &self.config
    }

    pub fn stakeholder(&self, id: &str) -> Option<&Stakeholder> {
        self.stakeholders.get(id)
    }

    pub fn stakeholders(&self) -> impl Iterator<Item = &Stakeholder> {
        self.stakeholders.values()
    }

    pub fn proposal(&self, id: u64) -> Option<&Proposal> {
        self.proposals.get(&id)
    }

    pub fn proposals(&self) -> impl Iterator<Item = &Proposal> {
        self.proposals.values()
    }

    pub fn open_proposals(&self) -> Vec<u64> {
        self.proposals
            .values()
            .filter(|p| p.status == ProposalStatus::Open)
            .map(|p| p.proposal_id)
            .collect()
    }

    pub fn delegates(&self) -> Vec<&str> {
        self.stakeholders
            .values()
            .filter(|s| s.is_delegate)
            .map(|s| s.id.as_str())
            .collect()
    }

    pub fn is_flagged(&self, id: &str) -> bool {
        self.flagged.iter().any(|(a, b)| a == id || b == id)
    }

    pub fn add_stakeholder(&mut self, id: &str, role: Role) -> Result<(), GovernanceError> {
        if self.stakeholders.contains_key(id) {
            return Err(GovernanceError::DuplicateStakeholder(id.to_string()));
        }
        self.stakeholders.insert(
            id.to_string(),
            Stakeholder {
                id: id.to_string(),
                role,
                stake: 0,
                is_delegate: false,
                vote_history: BTreeMap::new(),
                penalty_until: None,
            },
        );
        Ok(())
    }

    pub fn sync_stakes(&mut self, tokens: &TokenLedger) {
        for s in self.stakeholders.values_mut() {
            s.stake = tokens.staked(&s.id);
        }
    }

    pub fn penalty(&self, id: &str, epoch: u64) -> Rational {
        match self.stakeholders.get(id).and_then(|s| s.penalty_until) {
            Some(until) if epoch < until => self.config.penalty_factor,
            _ => Rational::one(),
        }
    }

    /// `(id, raw power)` for every stakeholder in id order.
    pub fn raw_powers(&self, epoch: u64) -> Vec<(String, Rational)> {
        self.stakeholders
            .values()
            .map(|s| {
                let p = raw_power(s.stake, s.role, &self.weights, self.penalty(&s.id, epoch));
                (s.id.clone(), p)
            })
            .collect()
    }

    pub fn effective_power_of(&self, id: &str, epoch: u64) -> Result<Rational, GovernanceError> {
        let raws = self.raw_powers(epoch);
        let total = raws.iter().fold(Rational::zero(), |a, (_, r)| a + r);
        let raw = raws
            .iter()
            .find(|(i, _)| i == id)
            .map(|(_, r)| *r)
            .ok_or_else(|| GovernanceError::UnknownStakeholder(id.to_string()))?;
        effective_power(raw, &self.weights, total)
    }

    /// Applies weight changes that take effect at `epoch` and lifts expired
    /// collusion penalties.
    pub fn begin_epoch(&mut self, epoch: u64, sink: &mut dyn EventSink) {
        if let Some((at, _)) = &self.pending_weights {
            if *at <= epoch {
                let (_, w) = self.pending_weights.take().expect("checked above");
                self.weights = w;
            }
        }
        let mut lifted = Vec::new();
        for s in self.stakeholders.values_mut() {
            if matches!(s.penalty_until, Some(until) if until <= epoch) {
                s.penalty_until = None;
                lifted.push(s.id.clone());
            }
        }
        if !lifted.is_empty() {
            self.flagged
                .retain(|(a, b)| !lifted.contains(a) && !lifted.contains(b));
            sink.emit(
                ACTOR,
                EventBody::from(WeightsAdjustedBody {
                    effective_epoch: epoch,
                    change: WeightChange::PenaltyLifted { stakeholders: lifted },
                }),
            );
        }
    }

    /// Elects `min(seats, eligible)` delegates; with `seats` given, exactly
    /// that many are required.
    pub fn elect(
        &mut self,
        epoch: u64,
        seats: Option<usize>,
        sink: &mut dyn EventSink,
    ) -> Result<Vec<(String, Rational)>, GovernanceError> {
        let raws = self.raw_powers(epoch);
        let seats = match seats {
            Some(n) => n,
            None => {
                let eligible = raws.iter().filter(|(_, r)| *r > Rational::zero()).count();
                self.config.seats.min(eligible).max(1)
            }
        };
        let elected = elect_delegates(&raws, &self.weights, seats)?;
        for s in self.stakeholders.values_mut() {
            s.is_delegate = elected.iter().any(|(id, _)| *id == s.id);
        }
        sink.emit(
            ACTOR,
            EventBody::from(DelegateElectedBody {
                delegates: elected.clone(),
            }),
        );
        Ok(elected)
    }

    pub fn is_election_epoch(&self, epoch: u64) -> bool {
        epoch == 0 || (self.config.election_interval > 0 && epoch % self.config.election_interval == 0)
    }

    pub fn submit_proposal(
        &mut self,
        proposer: &str,
        kind: ProposalKind,
        mode: VoteMode,
        payload: ProposalPayload,
        epoch: u64,
        sink: &mut dyn EventSink,
    ) -> Result<u64, GovernanceError> {
        if !self.stakeholders.contains_key(proposer) {
            return Err(GovernanceError::UnknownStakeholder(proposer.to_string()));
        }
        let fits = match (&payload, kind) {
            (ProposalPayload::Weights(_), ProposalKind::WeightAdjustment) => true,
            (ProposalPayload::Rule(_), ProposalKind::RuleUpdate) => true,
            (ProposalPayload::Text(_), ProposalKind::Routine | ProposalKind::Critical) => true,
            _ => false,
        };
        if !fits {
            return Err(GovernanceError::PayloadMismatch(kind));
        }
        let proposal_id = self.next_proposal_id;
        self.next_proposal_id += 1;
        sink.emit(
            proposer,
            EventBody::from(ProposalSubmittedBody {
                proposal_id,
                kind,
                mode,
                payload: payload.clone(),
            }),
        );
        self.proposals.insert(
            proposal_id,
            Proposal {
                proposal_id,
                kind,
                mode,
                payload,
                proposer: proposer.to_string(),
                submitted_epoch: epoch,
                status: ProposalStatus::Open,
                votes: BTreeMap::new(),
                for_power: Rational::zero(),
                against_power: Rational::zero(),
            },
        );
        Ok(proposal_id)
    }

    /// Records one vote. QUADRATIC votes first move `magnitude^2` tokens
    /// from the voter to the GOVERNANCE pool.
    pub fn cast_vote(
        &mut self,
        voter: &str,
        proposal_id: u64,
        direction: Direction,
        magnitude: u64,
        tokens: &mut TokenLedger,
        epoch: u64,
        sink: &mut dyn EventSink,
    ) -> Result<Vote, GovernanceError> {
        let proposal = self
            .proposals
            .get(&proposal_id)
            .ok_or(GovernanceError::UnknownProposal(proposal_id))?;
        if proposal.status != ProposalStatus::Open {
            return Err(GovernanceError::ProposalClosed(proposal_id));
        }
        if !self.stakeholders.contains_key(voter) {
            return Err(GovernanceError::UnknownStakeholder(voter.to_string()));
        }
        if proposal.votes.contains_key(voter) {
            return Err(GovernanceError::AlreadyVoted {
                voter: voter.to_string(),
                proposal_id,
            });
        }
        let mode = proposal.mode;
        let invalid = GovernanceError::InvalidMagnitude { magnitude, mode };
        let (power, cost) = match mode {
            VoteMode::Linear => {
                if magnitude != 1 {
                    return Err(invalid);
                }
                (self.effective_power_of(voter, epoch)?, 0)
            }
            VoteMode::Quadratic => {
                if magnitude == 0 {
                    return Err(invalid);
                }
                let cost = quadratic_cost(magnitude).ok_or(invalid)?;
                let available = tokens.balance(voter);
                if available < cost {
                    return Err(GovernanceError::InsufficientTokens {
                        voter: voter.to_string(),
                        needed: cost,
                        available,
                    });
                }
                tokens.transfer(
                    &Account::Holder(voter.to_string()),
                    &Account::Pool(Pool::Governance),
                    cost,
                    TransferReason::QuadraticVote,
                    voter,
                    sink,
                )?;
                (Rational::from_integer(magnitude as i128), cost)
            }
        };
        let vote = Vote {
            direction,
            magnitude,
            power,
        };
        let proposal = self.proposals.get_mut(&proposal_id).expect("checked above");
        match direction {
            Direction::For => proposal.for_power += power,
            Direction::Against => proposal.against_power += power,
        }
        proposal.votes.insert(voter.to_string(), vote.clone());
        self.stakeholders
            .get_mut(voter)
            .expect("checked above")
            .vote_history
            .insert(proposal_id, direction);
        sink.emit(
            voter,
            EventBody::from(VoteCastBody {
                proposal_id,
                voter: voter.to_string(),
                direction,
                mode,
                magnitude,
                power,
                cost,
            }),
        );
        Ok(vote)
    }

    /// Closes the voting window and records the outcome.
    pub fn tally(
        &mut self,
        proposal_id: u64,
        sink: &mut dyn EventSink,
    ) -> Result<ProposalStatus, GovernanceError> {
        let threshold_of = |kind| self.weights.threshold(kind);
        let proposal = self
            .proposals
            .get(&proposal_id)
            .ok_or(GovernanceError::UnknownProposal(proposal_id))?;
        if proposal.status != ProposalStatus::Open {
            return Err(GovernanceError::AlreadyResolved(proposal_id));
        }
        let threshold = threshold_of(proposal.kind);
        let status = tally_outcome(proposal.for_power, proposal.against_power, threshold);
        let proposal = self.proposals.get_mut(&proposal_id).expect("checked above");
        proposal.status = status;
        sink.emit(
            ACTOR,
            EventBody::from(ProposalResolvedBody {
                proposal_id,
                status,
                for_power: proposal.for_power,
                against_power: proposal.against_power,
                threshold,
            }),
        );
        Ok(status)
    }

    /// Checks `proposal_id` is a PASSED proposal of kind `kind`.
    pub fn authorized(&self, proposal_id: u64, kind: ProposalKind) -> Result<&Proposal, GovernanceError> {
        self.proposals
            .get(&proposal_id)
            .filter(|p| p.kind == kind && p.status == ProposalStatus::Passed)
            .ok_or(GovernanceError::NotAuthorized {
                proposal_id,
                expected: kind,
            })
    }

    /// Schedules the weights of a passed WEIGHT_ADJUSTMENT proposal for the
    /// next epoch boundary.
    pub fn adjust_weights(
        &mut self,
        proposal_id: u64,
        epoch: u64,
        sink: &mut dyn EventSink,
    ) -> Result<Weights, GovernanceError> {
        let proposal = self.authorized(proposal_id, ProposalKind::WeightAdjustment)?;
        let ProposalPayload::Weights(w) = &proposal.payload else {
            return Err(GovernanceError::PayloadMismatch(ProposalKind::WeightAdjustment));
        };
        w.validate()?;
        let w = w.clone();
        let effective_epoch = epoch + 1;
        self.pending_weights = Some((effective_epoch, w.clone()));
        sink.emit(
            ACTOR,
            EventBody::from(WeightsAdjustedBody {
                effective_epoch,
                change: WeightChange::Replace {
                    proposal_id,
                    weights: w.clone(),
                },
            }),
        );
        Ok(w)
    }

    pub fn vote_history(&self) -> VoteHistory {
        self.stakeholders
            .values()
            .filter(|s| !s.vote_history.is_empty())
            .map(|s| (s.id.clone(), s.vote_history.clone()))
            .collect()
    }

    /// Runs the detector and penalizes newly flagged pairs. Returns them.
    pub fn respond_to_collusion(
        &mut self,
        epoch: u64,
        sink: &mut dyn EventSink,
    ) -> Vec<FlaggedPair> {
        let pairs = detect_collusion(
            &self.vote_history(),
            self.config.collusion_min_common,
            self.config.collusion_agreement,
        );
        let fresh: Vec<FlaggedPair> = pairs
            .into_iter()
            .filter(|p| !self.flagged.contains(&(p.first.clone(), p.second.clone())))
            .filter(|p| {
                // A pair whose members are both already under review stays quiet.
                !(self.under_penalty(&p.first, epoch) && self.under_penalty(&p.second, epoch))
            })
            .collect();
        if fresh.is_empty() {
            return fresh;
        }
        let mut penalized = BTreeSet::new();
        for p in &fresh {
            self.flagged.insert((p.first.clone(), p.second.clone()));
            sink.emit(
                ACTOR,
                EventBody::from(CollusionFlaggedBody {
                    first: p.first.clone(),
                    second: p.second.clone(),
                    shared: p.shared,
                    agreeing: p.agreeing,
                }),
            );
            penalized.insert(p.first.clone());
            penalized.insert(p.second.clone());
        }
        let until = epoch + self.config.review_epochs;
        for id in &penalized {
            if let Some(s) = self.stakeholders.get_mut(id) {
                s.penalty_until = Some(until);
            }
        }
        sink.emit(
            ACTOR,
            EventBody::from(WeightsAdjustedBody {
                effective_epoch: epoch,
                change: WeightChange::Penalty {
                    stakeholders: penalized.into_iter().collect(),
                    factor: self.config.penalty_factor,
                },
            }),
        );
        fresh
    }

    fn under_penalty(&self, id: &str, epoch: u64) -> bool {
        self.penalty(id, epoch) != Rational::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::EventKind;
    use crate::tokens::PoolFractions;

    type Sink = Vec<(String, EventBody)>;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    /// A:100 bank, B:50 fintech, C:50 regulator, all staked; 1000 unstaked each.
    fn setup() -> (Governance, TokenLedger, Sink) {
        let mut g = Governance::new(Weights::default(), GovernanceConfig::default()).unwrap();
        let mut t = TokenLedger::mint_genesis(1_000_000, &PoolFractions::default()).unwrap();
        let mut sink = Sink::new();
        for (id, role, stake) in [("A", Role::Bank, 100), ("B", Role::Fintech, 50), ("C", Role::Regulator, 50)] {
            g.add_stakeholder(id, role).unwrap();
            t.open_account(id);
            t.transfer(
                &Account::Pool(Pool::Development),
                &Account::Holder(id.into()),
                1000 + stake,
                TransferReason::Grant,
                "g",
                &mut sink,
            )
            .unwrap();
            t.stake(id, stake, 4, 0, &mut sink).unwrap();
        }
        g.sync_stakes(&t);
        sink.clear();
        (g, t, sink)
    }

    fn text() -> ProposalPayload {
        ProposalPayload::Text("x".into())
    }

    #[test]
    fn election_sets_flags_and_emits() {
        let (mut g, _, mut sink) = setup();
        let d = g.elect(0, Some(2), &mut sink).unwrap();
        assert_eq!(d, vec![("A".into(), r(45, 1)), ("B".into(), r(45, 1))]);
        assert_eq!(g.delegates(), vec!["A", "B"]);
        assert_eq!(sink[0].1.kind(), EventKind::DelegateElected);
        g.elect(0, Some(1), &mut sink).unwrap();
        assert_eq!(g.delegates(), vec!["A"]);
    }

    #[test]
    fn linear_vote_and_critical_boundary() {
        let (mut g, mut t, mut sink) = setup();
        let p = g
            .submit_proposal("A", ProposalKind::Critical, VoteMode::Linear, text(), 0, &mut sink)
            .unwrap();
        let v = g.cast_vote("A", p, Direction::For, 1, &mut t, 0, &mut sink).unwrap();
        assert_eq!(v.power, r(45, 1));
        g.cast_vote("B", p, Direction::For, 1, &mut t, 0, &mut sink).unwrap();
        g.cast_vote("C", p, Direction::Against, 1, &mut t, 0, &mut sink).unwrap();
        assert!(matches!(
            g.cast_vote("A", p, Direction::For, 1, &mut t, 0, &mut sink),
            Err(GovernanceError::AlreadyVoted { .. })
        ));
        assert_eq!(g.tally(p, &mut sink), Ok(ProposalStatus::Rejected));
        assert_eq!(g.tally(p, &mut sink), Err(GovernanceError::AlreadyResolved(p)));
        assert_eq!(
            g.cast_vote("A", p, Direction::For, 1, &mut t, 0, &mut sink),
            Err(GovernanceError::ProposalClosed(p))
        );

        let q = g
            .submit_proposal("A", ProposalKind::Routine, VoteMode::Linear, text(), 0, &mut sink)
            .unwrap();
        for (id, d) in [("A", Direction::For), ("B", Direction::For), ("C", Direction::Against)] {
            g.cast_vote(id, q, d, 1, &mut t, 0, &mut sink).unwrap();
        }
        assert_eq!(g.tally(q, &mut sink), Ok(ProposalStatus::Passed));
    }

    #[test]
    fn linear_magnitude_must_be_one() {
        let (mut g, mut t, mut sink) = setup();
        let p = g
            .submit_proposal("A", ProposalKind::Routine, VoteMode::Linear, text(), 0, &mut sink)
            .unwrap();
        assert!(matches!(
            g.cast_vote("A", p, Direction::For, 2, &mut t, 0, &mut sink),
            Err(GovernanceError::InvalidMagnitude { .. })
        ));
    }

    #[test]
    fn quadratic_vote_debits_square() {
        let (mut g, mut t, mut sink) = setup();
        let p = g
            .submit_proposal("A", ProposalKind::Routine, VoteMode::Quadratic, text(), 0, &mut sink)
            .unwrap();
        let pool_before = t.pool(Pool::Governance);
        let bal_before = t.balance("B");
        let v = g.cast_vote("B", p, Direction::For, 3, &mut t, 0, &mut sink).unwrap();
        assert_eq!(v.power, r(3, 1));
        assert_eq!(bal_before - t.balance("B"), 9);
        assert_eq!(t.pool(Pool::Governance) - pool_before, 9);
        let kinds: Vec<_> = sink.iter().map(|(_, b)| b.kind()).collect();
        assert_eq!(
            &kinds[1..],
            &[EventKind::TokensTransferred, EventKind::VoteCast]
        );
        assert!(matches!(
            g.cast_vote("C", p, Direction::For, 0, &mut t, 0, &mut sink),
            Err(GovernanceError::InvalidMagnitude { .. })
        ));
        assert!(matches!(
            g.cast_vote("C", p, Direction::For, 40, &mut t, 0, &mut sink),
            Err(GovernanceError::InsufficientTokens { needed: 1600, .. })
        ));
        g.cast_vote("A", p, Direction::Against, 2, &mut t, 0, &mut sink).unwrap();
        // 3 for vs 2 against.
        assert_eq!(g.tally(p, &mut sink), Ok(ProposalStatus::Passed));
        assert!(t.conservation().ok);
    }

    #[test]
    fn zero_participation_rejects() {
        let (mut g, _, mut sink) = setup();
        let p = g
            .submit_proposal("A", ProposalKind::Routine, VoteMode::Linear, text(), 0, &mut sink)
            .unwrap();
        assert_eq!(g.tally(p, &mut sink), Ok(ProposalStatus::Rejected));
    }

    fn pass_weights(g: &mut Governance, t: &mut TokenLedger, w: Weights, sink: &mut Sink) -> u64 {
        let p = g
            .submit_proposal(
                "A",
                ProposalKind::WeightAdjustment,
                VoteMode::Linear,
                ProposalPayload::Weights(w),
                0,
                sink,
            )
            .unwrap();
        g.cast_vote("A", p, Direction::For, 1, t, 0, sink).unwrap();
        p
    }

    #[test]
    fn weight_adjustment_applies_next_epoch() {
        let (mut g, mut t, mut sink) = setup();
        let mut w = Weights::default();
        w.role_multiplier.insert(Role::Regulator, r(2, 1));
        let p = pass_weights(&mut g, &mut t, w.clone(), &mut sink);
        assert!(matches!(
            g.adjust_weights(p, 0, &mut sink),
            Err(GovernanceError::NotAuthorized { .. })
        ));
        g.tally(p, &mut sink).unwrap();
        g.adjust_weights(p, 0, &mut sink).unwrap();
        assert_eq!(g.weights(), &Weights::default());
        g.begin_epoch(1, &mut sink);
        assert_eq!(g.weights().multiplier(Role::Regulator), r(2, 1));
    }

    #[test]
    fn invalid_or_rejected_weights_are_refused() {
        let (mut g, mut t, mut sink) = setup();
        let mut w = Weights::default();
        w.cap_fraction = Rational::zero();
        let p = pass_weights(&mut g, &mut t, w, &mut sink);
        g.tally(p, &mut sink).unwrap();
        assert!(matches!(
            g.adjust_weights(p, 0, &mut sink),
            Err(GovernanceError::InvalidWeights(_))
        ));

        let q = g
            .submit_proposal(
                "A",
                ProposalKind::WeightAdjustment,
                VoteMode::Linear,
                ProposalPayload::Weights(Weights::default()),
                0,
                &mut sink,
            )
            .unwrap();
        g.cast_vote("A", q, Direction::Against, 1, &mut t, 0, &mut sink).unwrap();
        g.tally(q, &mut sink).unwrap();
        let before = g.weights().clone();
        assert!(g.adjust_weights(q, 0, &mut sink).is_err());
        g.begin_epoch(1, &mut sink);
        assert_eq!(g.weights(), &before);
    }

    #[test]
    fn collusion_penalty_and_expiry() {
        let (mut g, mut t, mut sink) = setup();
        for _ in 0..10 {
            let p = g
                .submit_proposal("A", ProposalKind::Routine, VoteMode::Linear, text(), 1, &mut sink)
                .unwrap();
            g.cast_vote("A", p, Direction::For, 1, &mut t, 1, &mut sink).unwrap();
            g.cast_vote("B", p, Direction::For, 1, &mut t, 1, &mut sink).unwrap();
            g.tally(p, &mut sink).unwrap();
        }
        sink.clear();
        let flagged = g.respond_to_collusion(1, &mut sink);
        assert_eq!(flagged.len(), 1);
        assert_eq!((flagged[0].first.as_str(), flagged[0].second.as_str()), ("A", "B"));
        assert_eq!(
            sink.iter().map(|(_, b)| b.kind()).collect::<Vec<_>>(),
            vec![EventKind::CollusionFlagged, EventKind::WeightsAdjusted]
        );
        assert_eq!(g.penalty("A", 2), r(9, 10));
        assert!(g.respond_to_collusion(2, &mut sink).len() == 0);
        sink.clear();
        g.begin_epoch(5, &mut sink);
        assert_eq!(g.penalty("A", 5), Rational::one());
        assert_eq!(sink.len(), 1);
        assert!(!g.is_flagged("A"));
    }

    #[test]
    fn payload_must_match_kind() {
        let (mut g, _, mut sink) = setup();
        assert_eq!(
            g.submit_proposal("A", ProposalKind::RuleUpdate, VoteMode::Linear, text(), 0, &mut sink),
            Err(GovernanceError::PayloadMismatch(ProposalKind::RuleUpdate))
        );
    }
}
