use std::collections::BTreeMap;

use govsim_core::ledger::{Account, EventBody, TransferReason};
use govsim_core::tokens::{PoolFractions, TokenError, TokenLedger};
use govsim_core::types::{Pool, SlashReason};
use govsim_core::Rational;
use proptest::prelude::*;

type Sink = Vec<(String, EventBody)>;

const HOLDERS: [&str; 4] = ["a", "b", "c", "d"];

#[derive(Clone, Debug)]
enum Op {
    Transfer(usize, usize, u64),
    FromPool(usize, usize, u64),
    Stake(usize, u64, u64),
    Unstake(usize),
    Slash(usize, i128),
    Rewards,
    Tick,
}

fn op() -> impl Strategy<Value = Op> {
    // Amounts reach past every balance so overdrafts are common.
    let amount = prop_oneof![0..1_000u64, 0..200_000u64, Just(u64::MAX)];
    prop_oneof![
        (0..4usize, 0..4usize, amount.clone()).prop_map(|(f, t, a)| Op::Transfer(f, t, a)),
        (0..3usize, 0..4usize, amount.clone()).prop_map(|(p, t, a)| Op::FromPool(p, t, a)),
        (0..4usize, amount, 0..6u64).prop_map(|(h, a, l)| Op::Stake(h, a, l)),
        (0..4usize).prop_map(Op::Unstake),
        (0..4usize, -2..12i128).prop_map(|(h, n)| Op::Slash(h, n)),
        Just(Op::Rewards),
        Just(Op::Tick),
    ]
}

fn fresh(supply: u64) -> TokenLedger {
    let mut t = TokenLedger::mint_genesis(supply, &PoolFractions::default()).unwrap();
    for h in HOLDERS {
        t.open_account(h);
    }
    t
}

fn snapshot(t: &TokenLedger) -> (Vec<u64>, Vec<u64>, Vec<u64>) {
    (
        HOLDERS.iter().map(|h| t.balance(h)).collect(),
        HOLDERS.iter().map(|h| t.staked(h)).collect(),
        Pool::ALL.iter().map(|p| t.pool(*p)).collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn adversarial_sequences_conserve_and_reject_atomically(ops in prop::collection::vec(op(), 1..80)) {
        let mut t = fresh(10_000_000);
        let mut sink = Sink::new();
        let mut epoch = 0;
        for op in &ops {
            let before = snapshot(&t);
            let events = sink.len();
            let res: Result<(), TokenError> = match op {
                Op::Transfer(f, to, a) => t
                    .transfer(&Account::Holder(HOLDERS[*f].into()), &Account::Holder(HOLDERS[*to].into()), *a, TransferReason::Transfer, HOLDERS[*f], &mut sink)
                    .map(|_| ()),
                Op::FromPool(p, to, a) => t
                    .transfer(&Account::Pool(Pool::ALL[*p]), &Account::Holder(HOLDERS[*to].into()), *a, TransferReason::Grant, "test", &mut sink)
                    .map(|_| ()),
                Op::Stake(h, a, l) => t.stake(HOLDERS[*h], *a, *l, epoch, &mut sink).map(|_| ()),
                Op::Unstake(h) => t.unstake(HOLDERS[*h], epoch, &mut sink).map(|_| ()),
                Op::Slash(h, n) => t.slash(HOLDERS[*h], SlashReason::AuditFail, Rational::new(*n, 10), None, &mut sink).map(|_| ()),
                Op::Rewards => t.distribute_rewards(epoch, &BTreeMap::new(), &mut sink).map(|_| ()),
                Op::Tick => {
                    epoch += 1;
                    Ok(())
                }
            };
            let c = t.conservation();
            prop_assert!(c.ok, "{op:?}: {}", c.checksum_line());
            if let Err(e) = res {
                prop_assert_eq!(&snapshot(&t), &before, "{:?} failed with {} but changed state", op, e);
                prop_assert_eq!(sink.len(), events, "{:?} failed but emitted", op);
            }
            if let Op::Transfer(f, _, a) = op {
                let had = before.0[*f];
                if *a > had {
                    prop_assert!(t.balance(HOLDERS[*f]) == had, "overdraft of {} accepted", HOLDERS[*f]);
                }
            }
        }
    }

    #[test]
    fn higher_reward_factor_never_earns_less(
        stake in 1..1_000_000u64,
        lock in 1..10u64,
        elapsed in 1..20u64,
        (lo, hi) in (0..=20i128).prop_flat_map(|lo| (Just(lo), lo..=20)),
        others in prop::collection::vec((1..1_000_000u64, 0..=20i128), 0..4),
    ) {
        let mut t = fresh(1_000_000_000);
        let mut sink = Sink::new();
        let mut factors = BTreeMap::new();
        for (i, h) in ["low", "high"].into_iter().enumerate() {
            t.open_account(h);
            t.transfer(&Account::Pool(Pool::Development), &Account::Holder(h.into()), stake, TransferReason::Grant, "test", &mut sink).unwrap();
            t.stake(h, stake, lock, 0, &mut sink).unwrap();
            factors.insert(h.to_string(), Rational::new([lo, hi][i], 10));
        }
        for (i, (s, c)) in others.iter().enumerate() {
            let h = format!("o{i}");
            t.open_account(&h);
            t.transfer(&Account::Pool(Pool::Development), &Account::Holder(h.clone()), *s, TransferReason::Grant, "test", &mut sink).unwrap();
            t.stake(&h, *s, lock, 0, &mut sink).unwrap();
            factors.insert(h, Rational::new(*c, 10));
        }
        let (wl, wh) = (
            t.reward_weight("low", elapsed, factors["low"]),
            t.reward_weight("high", elapsed, factors["high"]),
        );
        prop_assert!(wl <= wh);
        let paid: BTreeMap<String, u64> = t.distribute_rewards(elapsed, &factors, &mut sink).unwrap().into_iter().collect();
        let get = |h: &str| paid.get(h).copied().unwrap_or(0);
        prop_assert!(get("low") <= get("high"), "c={lo}/10 got {}, c={hi}/10 got {}", get("low"), get("high"));
        prop_assert!(t.conservation().ok);
    }
}
