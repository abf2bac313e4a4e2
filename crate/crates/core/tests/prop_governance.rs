mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::world;
use govsim_core::governance::{detect_collusion, VoteHistory};
use govsim_core::ledger::{EventBody, ProposalPayload};
use govsim_core::types::{Direction, Pool, ProposalKind, Role, VoteMode};
use govsim_core::Rational;
use proptest::prelude::*;

fn members() -> impl Strategy<Value = Vec<(String, Role, u64)>> {
    prop::collection::vec((0..Role::ALL.len(), 1..10_000_000u64), 2..12).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (r, s))| (format!("m{i:02}"), Role::ALL[r], s))
            .collect()
    })
}

fn dir(b: bool) -> Direction {
    if b {
        Direction::For
    } else {
        Direction::Against
    }
}

/// Each member's share of the total raw power after capping.
fn shares(ms: &[(String, Role, u64)]) -> Vec<Rational> {
    let w = world(ms);
    let total: Rational = w.gov.raw_powers(0).iter().map(|(_, p)| *p).sum();
    ms.iter().map(|(id, _, _)| w.gov.effective_power_of(id, 0).unwrap() / total).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn no_member_exceeds_the_cap(ms in members()) {
        let w = world(&ms);
        let total: Rational = w.gov.raw_powers(0).iter().map(|(_, p)| *p).sum();
        let cap = w.gov.weights().cap_fraction * total;
        for (id, _, _) in &ms {
            prop_assert!(w.gov.effective_power_of(id, 0).unwrap() <= cap);
        }
    }

    #[test]
    fn scaling_every_stake_keeps_shares_and_delegates(ms in members(), k in 2..20u64) {
        let scaled: Vec<_> = ms.iter().map(|(i, r, s)| (i.clone(), *r, s * k)).collect();
        prop_assert_eq!(shares(&ms), shares(&scaled));
        let elected = |m: &[(String, Role, u64)]| {
            let mut w = world(m);
            let mut ids: Vec<String> = w.gov.elect(0, None, &mut w.sink).unwrap().into_iter().map(|(id, _)| id).collect();
            ids.sort();
            ids
        };
        prop_assert_eq!(elected(&ms), elected(&scaled));
    }

    #[test]
    fn quadratic_votes_cost_m_squared_paid_into_governance(m in 1..200u64, affordable in any::<bool>()) {
        let stake = if affordable { m * m } else { m * m - 1 };
        let mut w = world(&[("v".to_string(), Role::Bank, 1), ("p".to_string(), Role::Bank, 1)]);
        // Leave exactly `stake` unstaked tokens with the voter.
        let spare = w.tokens.balance("v") - stake;
        w.tokens.stake("v", spare, 1, 0, &mut w.sink).unwrap();
        let pid = w.gov
            .submit_proposal("p", ProposalKind::Routine, VoteMode::Quadratic, ProposalPayload::Text("q".into()), 0, &mut w.sink)
            .unwrap();
        let (bal, pool) = (w.tokens.balance("v"), w.tokens.pool(Pool::Governance));
        let res = w.gov.cast_vote("v", pid, Direction::For, m, &mut w.tokens, 0, &mut w.sink);
        prop_assert_eq!(res.is_ok(), affordable);
        let paid = if affordable { m * m } else { 0 };
        prop_assert_eq!(bal - w.tokens.balance("v"), paid);
        prop_assert_eq!(w.tokens.pool(Pool::Governance) - pool, paid);
    }

    #[test]
    fn one_vote_per_member_per_proposal(
        ms in members(),
        casts in prop::collection::vec((any::<prop::sample::Index>(), any::<bool>()), 1..40),
    ) {
        let mut w = world(&ms);
        let pid = w.gov
            .submit_proposal(&ms[0].0, ProposalKind::Routine, VoteMode::Linear, ProposalPayload::Text("x".into()), 0, &mut w.sink)
            .unwrap();
        w.sink.clear();
        let mut voted = BTreeSet::new();
        for (who, d) in &casts {
            let id = &ms[who.index(ms.len())].0;
            let ok = w.gov.cast_vote(id, pid, dir(*d), 1, &mut w.tokens, 0, &mut w.sink).is_ok();
            prop_assert_eq!(ok, voted.insert(id.clone()));
        }
        let cast: Vec<_> = w.sink
            .iter()
            .filter_map(|(_, b)| match b {
                EventBody::VoteCast(v) => Some((v.voter.clone(), v.proposal_id)),
                _ => None,
            })
            .collect();
        let distinct: BTreeSet<_> = cast.iter().cloned().collect();
        prop_assert_eq!(cast.len(), distinct.len());
        prop_assert_eq!(distinct.len(), voted.len());
    }

    #[test]
    fn collusion_flags_match_the_pairwise_definition(
        rows in prop::collection::vec(prop::collection::btree_map(0..25u64, any::<bool>(), 0..25), 2..8),
        min_common in 1..12u32,
        (num, den) in (1..=10i128).prop_flat_map(|d| (1..=d, Just(d))),
    ) {
        let history: VoteHistory = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_empty())
            .map(|(i, r)| (format!("v{i}"), r.iter().map(|(p, d)| (*p, dir(*d))).collect()))
            .collect();
        let got: BTreeSet<(String, String)> = detect_collusion(&history, min_common, Rational::new(num, den))
            .into_iter()
            .map(|p| (p.first, p.second))
            .collect();
        let mut want = BTreeSet::new();
        let ids: Vec<&String> = history.keys().collect();
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                let (x, y): (&BTreeMap<u64, Direction>, _) = (&history[*a], &history[*b]);
                let shared: Vec<u64> = x.keys().filter(|p| y.contains_key(p)).copied().collect();
                let agree = shared.iter().filter(|p| x[p] == y[p]).count() as i128;
                let n = shared.len() as i128;
                if n > 0 && n >= min_common as i128 && agree * den >= num * n {
                    want.insert(((*a).clone(), (*b).clone()));
                }
            }
        }
        prop_assert_eq!(got, want);
    }
}
