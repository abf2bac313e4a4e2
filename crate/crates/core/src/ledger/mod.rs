//! Append-only, hash-chained, authority-sealed event log.

mod block;
mod chain;
mod event;
pub mod file;
mod verify;

pub use block::{compute_block_hash, encode_events, Block};
pub use chain::{
    default_quorum, query_events, AuthoritySet, EventFilter, Ledger, LedgerError, Position,
    DEFAULT_BLOCK_CAPACITY,
};
pub use event::*;
pub use verify::{
    authorities_from_genesis, verify_chain, verify_self_describing, FailureReason,
    VerificationReport,
};
