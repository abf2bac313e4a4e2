//! Coordinated-voting detection over the recorded vote matrix.

use std::collections::{BTreeMap, BTreeSet};

use crate::types::Direction;
use crate::Rational;

/// Recorded vote directions: voter -> proposal -> direction.
pub type VoteHistory = BTreeMap<String, BTreeMap<u64, Direction>>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct FlaggedPair {
    pub first: String,
    pub second: String,
    pub shared: u32,
    pub agreeing: u32,
}

/// Flags every unordered voter pair that shares at least `min_common`
/// proposals and votes identically on at least `agreement` of them.
///
/// Each voter's history is packed into two bitsets over a dense proposal
/// index (participated, voted FOR); shared and agreeing counts are popcounts.
pub fn detect_collusion(
    history: &VoteHistory,
    min_common: u32,
    agreement: Rational,
) -> Vec<FlaggedPair> {
    let proposals: BTreeSet<u64> = history.values().flat_map(|v| v.keys().copied()).collect();
    let index: BTreeMap<u64, usize> = proposals.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    let words = proposals.len().div_ceil(64);

    let packed: Vec<(&String, Vec<u64>, Vec<u64>)> = history
        .iter()
        .map(|(voter, votes)| {
            let mut cast = vec![0u64; words];
            let mut yes = vec![0u64; words];
            for (p, d) in votes {
                let i = index[p];
                cast[i / 64] |= 1 << (i % 64);
                if *d == Direction::For {
                    yes[i / 64] |= 1 << (i % 64);
                }
            }
            (voter, cast, yes)
        })
        .collect();

    let mut flagged = Vec::new();
    for (i, (a, cast_a, yes_a)) in packed.iter().enumerate() {
        for (b, cast_b, yes_b) in &packed[i + 1..] {
            let mut shared = 0u32;
            let mut agreeing = 0u32;
            for w in 0..words {
                let both = cast_a[w] & cast_b[w];
                shared += both.count_ones();
                agreeing += (both & !(yes_a[w] ^ yes_b[w])).count_ones();
            }
            if shared == 0 || shared < min_common {
                continue;
            }
            if Rational::from_integer(agreeing as i128)
                >= agreement * Rational::from_integer(shared as i128)
            {
                flagged.push(FlaggedPair {
                    first: (*a).clone(),
                    second: (*b).clone(),
                    shared,
                    agreeing,
                });
            }
        }
    }
    flagged
}
