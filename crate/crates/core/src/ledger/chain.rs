use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{verify_signature, Digest, KeyPair, SignatureScheme};
use crate::ledger::block::{compute_block_hash, Block};
use crate::ledger::event::{EventKind, GovernanceEvent};

pub const DEFAULT_BLOCK_CAPACITY: usize = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("event id {got} out of order, expected {expected}")]
    OrderingViolation { expected: u64, got: u64 },
    #[error("payload of event {event_id} ({kind}) is not canonically encoded")]
    EncodingError { event_id: u64, kind: EventKind },
    #[error("{distinct} distinct valid signers, quorum is {quorum}")]
    QuorumNotMet { distinct: usize, quorum: usize },
    #[error("unknown authority {0:?}")]
    UnknownAuthority(String),
    #[error("invalid signature from {0:?}")]
    SignatureInvalid(String),
    #[error("no pending events to seal")]
    NothingToSeal,
}

/// The registered sealing authorities and their quorum.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthoritySet {
    pub scheme: SignatureScheme,
    pub members: BTreeMap<String, Vec<u8>>,
    pub quorum: usize,
}

/// `ceil(2n/3)` distinct signers.
pub fn default_quorum(authorities: usize) -> usize {
    (2 * authorities).div_ceil(3)
}

impl AuthoritySet {
    pub fn new(scheme: SignatureScheme, members: BTreeMap<String, Vec<u8>>) -> Self {
        let quorum = default_quorum(members.len()).max(1);
        AuthoritySet {
            scheme,
            members,
            quorum,
        }
    }

    pub fn with_quorum(mut self, quorum: usize) -> Self {
        self.quorum = quorum;
        self
    }

    pub fn from_keys<'a>(keys: impl IntoIterator<Item = (&'a str, &'a KeyPair)>) -> Self {
        let mut scheme = SignatureScheme::default();
        let members = keys
            .into_iter()
            .map(|(id, kp)| {
                scheme = kp.scheme();
                (id.to_string(), kp.public_key().to_vec())
            })
            .collect();
        AuthoritySet::new(scheme, members)
    }

    /// Checks a signature list over `hash`. Returns the canonical (sorted,
    /// de-duplicated) list on success.
    pub fn check_signatures(
        &self,
        hash: &Digest,
        signatures: &[(String, Vec<u8>)],
    ) -> Result<Vec<(String, Vec<u8>)>, LedgerError> {
        let mut distinct: BTreeMap<&str, &[u8]> = BTreeMap::new();
        for (id, sig) in signatures {
            let pk = self
                .members
                .get(id)
                .ok_or_else(|| LedgerError::UnknownAuthority(id.clone()))?;
            if !verify_signature(self.scheme, pk, hash.as_bytes(), sig) {
                return Err(LedgerError::SignatureInvalid(id.clone()));
            }
            distinct.entry(id.as_str()).or_insert(sig.as_slice());
        }
        if distinct.len() < self.quorum {
            return Err(LedgerError::QuorumNotMet {
                distinct: distinct.len(),
                quorum: self.quorum,
            });
        }
        Ok(distinct
            .into_iter()
            .map(|(id, sig)| (id.to_string(), sig.to_vec()))
            .collect())
    }
}

/// Where an appended event landed: pending block height and index within it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Position {
    pub height: u64,
    pub index: usize,
}

/// Append-only chain with a queue of not-yet-sealed blocks.
#[derive(Clone, Debug)]
pub struct Ledger {
    authorities: AuthoritySet,
    capacity: usize,
    blocks: Vec<Block>,
    pending: VecDeque<Vec<GovernanceEvent>>,
    last_event_id: u64,
}

impl Ledger {
    pub fn new(authorities: AuthoritySet, capacity: usize) -> Self {
        assert!(capacity > 0, "block capacity must be positive");
        Ledger {
            authorities,
            capacity,
            blocks: Vec::new(),
            pending: VecDeque::new(),
            last_event_id: 0,
        }
    }

    pub fn authorities(&self) -> &AuthoritySet {
        &self.authorities
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Block> {
        self.blocks
    }

    pub fn last_event_id(&self) -> u64 {
        self.last_event_id
    }

    pub fn pending_blocks(&self) -> usize {
        self.pending.len()
    }

    pub fn pending_events(&self) -> impl Iterator<Item = &GovernanceEvent> {
        self.pending.iter().flatten()
    }

    pub fn head_hash(&self) -> Digest {
        self.blocks.last().map_or(Digest::ZERO, |b| b.block_hash)
    }

    pub fn append_event(&mut self, event: GovernanceEvent) -> Result<Position, LedgerError> {
        let expected = self.last_event_id + 1;
        if event.event_id != expected {
            return Err(LedgerError::OrderingViolation {
                expected,
                got: event.event_id,
            });
        }
        if !event.is_canonical() {
            return Err(LedgerError::EncodingError {
                event_id: event.event_id,
                kind: event.kind,
            });
        }
        if self.pending.back().is_none_or(|b| b.len() >= self.capacity) {
            self.pending.push_back(Vec::with_capacity(self.capacity));
        }
        let slot = self.pending.len() - 1;
        let block = self.pending.back_mut().expect("just ensured");
        block.push(event);
        self.last_event_id = expected;
        Ok(Position {
            height: self.blocks.len() as u64 + 1 + slot as u64,
            index: block.len() - 1,
        })
    }

    /// Height and hash of the next block to be sealed (the oldest pending one).
    pub fn candidate(&self) -> Option<(u64, Digest)> {
        let events = self.pending.front()?;
        let height = self.blocks.len() as u64 + 1;
        Some((height, compute_block_hash(height, &self.head_hash(), events)))
    }

    pub fn seal_block(&mut self, signatures: &[(String, Vec<u8>)]) -> Result<&Block, LedgerError> {
        let (height, hash) = self.candidate().ok_or(LedgerError::NothingToSeal)?;
        let sealer_signatures = self.authorities.check_signatures(&hash, signatures)?;
        let events = self.pending.pop_front().expect("candidate exists");
        self.blocks.push(Block {
            height,
            prev_hash: self.head_hash(),
            events,
            sealer_signatures,
            block_hash: hash,
        });
        Ok(self.blocks.last().expect("just pushed"))
    }

    /// Seals every pending block, signing each with all supplied keys.
    pub fn seal_all(&mut self, keys: &[(String, KeyPair)]) -> Result<usize, LedgerError> {
        let mut sealed = 0;
        while let Some((_, hash)) = self.candidate() {
            let sigs: Vec<_> = keys
                .iter()
                .map(|(id, kp)| (id.clone(), kp.sign(hash.as_bytes())))
                .collect();
            self.seal_block(&sigs)?;
            sealed += 1;
        }
        Ok(sealed)
    }

    pub fn query_events(&self, filter: &EventFilter) -> Vec<&GovernanceEvent> {
        query_events(&self.blocks, filter)
    }
}

/// Conjunctive filter over sealed events; `None` fields match anything.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventFilter {
    pub kind: Option<EventKind>,
    pub epoch: Option<u64>,
    pub actor: Option<String>,
}

impl EventFilter {
    pub fn kind(kind: EventKind) -> Self {
        EventFilter {
            kind: Some(kind),
            ..Default::default()
        }
    }

    pub fn epoch(epoch: u64) -> Self {
        EventFilter {
            epoch: Some(epoch),
            ..Default::default()
        }
    }

    pub fn actor(actor: impl Into<String>) -> Self {
        EventFilter {
            actor: Some(actor.into()),
            ..Default::default()
        }
    }

    pub fn matches(&self, e: &GovernanceEvent) -> bool {
        self.kind.is_none_or(|k| k == e.kind)
            && self.epoch.is_none_or(|ep| ep == e.epoch)
            && self.actor.as_deref().is_none_or(|a| a == e.actor)
    }
}

/// Matching events in event-id order.
pub fn query_events<'a>(blocks: &'a [Block], filter: &EventFilter) -> Vec<&'a GovernanceEvent> {
    let mut out: Vec<&GovernanceEvent> = blocks
        .iter()
        .flat_map(|b| b.events.iter())
        .filter(|e| filter.matches(e))
        .collect();
    // Sealed chains are already ordered; this keeps the contract for any input.
    out.sort_by_key(|e| e.event_id);
    out
}
