use std::fmt;

use serde::Serialize;

use crate::crypto::Digest;
use crate::ledger::block::Block;
use crate::ledger::chain::{AuthoritySet, LedgerError};
use crate::ledger::event::{EventBody, EventKind};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum FailureReason {
    HeightMismatch { found: u64 },
    BrokenLink,
    HashMismatch,
    EventOrdering { expected: u64, found: u64 },
    NonCanonicalPayload { event_id: u64 },
    EmptyBlock,
    Signatures { detail: String },
    MissingGenesis,
    Unreadable { detail: String },
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::HeightMismatch { found } => write!(f, "block claims height {found}"),
            FailureReason::BrokenLink => f.write_str("prev_hash does not match previous block"),
            FailureReason::HashMismatch => f.write_str("block hash does not match contents"),
            FailureReason::EventOrdering { expected, found } => {
                write!(f, "event id {found} where {expected} was expected")
            }
            FailureReason::NonCanonicalPayload { event_id } => {
                write!(f, "event {event_id} payload is not canonical")
            }
            FailureReason::EmptyBlock => f.write_str("block has no events"),
            FailureReason::Signatures { detail } => write!(f, "sealing signatures: {detail}"),
            FailureReason::MissingGenesis => f.write_str("first block does not open with GENESIS"),
            FailureReason::Unreadable { detail } => write!(f, "unreadable: {detail}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum VerificationReport {
    Ok {
        blocks: u64,
        events: u64,
        root: Digest,
    },
    Failed {
        height: u64,
        #[serde(flatten)]
        reason: FailureReason,
    },
}

impl VerificationReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, VerificationReport::Ok { .. })
    }

    pub fn failed_height(&self) -> Option<u64> {
        match self {
            VerificationReport::Ok { .. } => None,
            VerificationReport::Failed { height, .. } => Some(*height),
        }
    }
}

/// Checks height sequence, hash linkage, content hashes, event-id
/// continuity, payload canonicality and sealing quorum, reporting the first
/// failing height.
pub fn verify_chain(blocks: &[Block], authorities: &AuthoritySet) -> VerificationReport {
    let mut prev = Digest::ZERO;
    let mut next_event = 1u64;
    for (i, block) in blocks.iter().enumerate() {
        let height = i as u64 + 1;
        let fail = |reason| VerificationReport::Failed { height, reason };
        if block.height != height {
            return fail(FailureReason::HeightMismatch {
                found: block.height,
            });
        }
        if block.prev_hash != prev {
            return fail(FailureReason::BrokenLink);
        }
        if block.recompute_hash() != block.block_hash {
            return fail(FailureReason::HashMismatch);
        }
        if block.events.is_empty() {
            return fail(FailureReason::EmptyBlock);
        }
        for ev in &block.events {
            if ev.event_id != next_event {
                return fail(FailureReason::EventOrdering {
                    expected: next_event,
                    found: ev.event_id,
                });
            }
            if !ev.is_canonical() {
                return fail(FailureReason::NonCanonicalPayload {
                    event_id: ev.event_id,
                });
            }
            next_event += 1;
        }
        if let Err(detail) = check_seal(block, authorities) {
            return fail(FailureReason::Signatures { detail });
        }
        prev = block.block_hash;
    }
    VerificationReport::Ok {
        blocks: blocks.len() as u64,
        events: next_event - 1,
        root: prev,
    }
}

fn check_seal(block: &Block, authorities: &AuthoritySet) -> Result<(), String> {
    // Stored signatures must be in canonical form: strictly ascending ids.
    if block
        .sealer_signatures
        .windows(2)
        .any(|w| w[0].0 >= w[1].0)
    {
        return Err("signer list not strictly ordered".into());
    }
    authorities
        .check_signatures(&block.block_hash, &block.sealer_signatures)
        .map(|_| ())
        .map_err(|e: LedgerError| e.to_string())
}

/// Reads the authority set recorded by the GENESIS event that opens block 1.
pub fn authorities_from_genesis(blocks: &[Block]) -> Option<AuthoritySet> {
    let first = blocks.first()?.events.first()?;
    if first.kind != EventKind::Genesis {
        return None;
    }
    let EventBody::Genesis(g) = first.body().ok()? else {
        return None;
    };
    Some(AuthoritySet {
        scheme: g.scheme,
        members: g.authorities.into_iter().collect(),
        quorum: g.quorum as usize,
    })
}

/// Verifies a self-describing chain whose first event is GENESIS.
pub fn verify_self_describing(blocks: &[Block]) -> VerificationReport {
    match authorities_from_genesis(blocks) {
        Some(auth) => verify_chain(blocks, &auth),
        None => VerificationReport::Failed {
            height: 1,
            reason: FailureReason::MissingGenesis,
        },
    }
}
