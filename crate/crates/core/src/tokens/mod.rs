//! Finite-supply token accounting with exact conservation.
//!
//! Every unit of the fixed supply is always in exactly one place: a pool,
//! an unstaked balance, a stake entry, or the burned counter.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{
    Account, EventBody, EventSink, GenesisBody, SlashAppliedBody, StakeAction, StakeChangedBody,
    TokensTransferredBody, TransferReason,
};
use crate::scalar::floor_u64;
use crate::types::{Pool, SlashReason};
use crate::Rational;

pub const DEFAULT_TOTAL_SUPPLY: u64 = 1_000_000_000;
/// Per-epoch emission is the initial REWARDS pool divided by this.
pub const EMISSION_DIVISOR: u64 = 1000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TokenError {
    #[error("pool fractions must be non-negative and sum to exactly 1")]
    InvalidAllocation,
    #[error("{account} holds {available}, needs {needed}")]
    InsufficientTokens {
        account: String,
        needed: u64,
        available: u64,
    },
    #[error("stake of {stakeholder} locked until epoch {unlock_epoch}")]
    StillLocked {
        stakeholder: String,
        unlock_epoch: u64,
    },
    #[error("{0} has nothing staked")]
    NothingStaked(String),
    #[error("amount must be positive")]
    ZeroAmount,
    #[error("lock must be at least one epoch")]
    InvalidLock,
    #[error("slash fraction must lie in (0, 1]")]
    InvalidFraction,
    #[error("REWARDS pool holds {available}, emission needs {needed}")]
    PoolExhausted { needed: u64, available: u64 },
    #[error("unknown account {0}")]
    UnknownAccount(String),
    #[error("replayed event disagrees with ledger state: {0}")]
    ReplayMismatch(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolFractions {
    #[serde(with = "crate::scalar::serde_rational")]
    pub rewards: Rational,
    #[serde(with = "crate::scalar::serde_rational")]
    pub governance: Rational,
    #[serde(with = "crate::scalar::serde_rational")]
    pub development: Rational,
}

impl Default for PoolFractions {
    fn default() -> Self {
        PoolFractions {
            rewards: Rational::new(2, 5),
            governance: Rational::new(3, 10),
            development: Rational::new(3, 10),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StakeEntry {
    pub amount: u64,
    pub lock_start: u64,
    pub lock_epochs: u64,
}

impl StakeEntry {
    pub fn unlock_epoch(&self) -> u64 {
        self.lock_start + self.lock_epochs
    }

    /// Elapsed lock epochs at `epoch`, at least 1 and at most the lock length.
    pub fn elapsed(&self, epoch: u64) -> u64 {
        epoch
            .saturating_sub(self.lock_start)
            .clamp(1, self.lock_epochs.max(1))
    }
}

/// Sums of each holding class; `ok` iff they add up to the supply.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conservation {
    pub total_supply: u64,
    pub pools: u64,
    pub balances: u64,
    pub stakes: u64,
    pub burned: u64,
    pub ok: bool,
}

impl Conservation {
    pub fn checksum_line(&self) -> String {
        format!(
            "conservation pools={} balances={} stakes={} burned={} sum={} supply={} {}",
            self.pools,
            self.balances,
            self.stakes,
            self.burned,
            self.pools as u128 + self.balances as u128 + self.stakes as u128 + self.burned as u128,
            self.total_supply,
            if self.ok { "OK" } else { "MISMATCH" }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    pub total_supply: u64,
    pub pools: BTreeMap<Pool, u64>,
    pub balances: BTreeMap<String, u64>,
    pub stakes: BTreeMap<String, Vec<StakeEntry>>,
    pub burned: u64,
    /// Fixed per-epoch reward emission.
    pub emission: u64,
}

impl TokenLedger {
    pub fn mint_genesis(total_supply: u64, fractions: &PoolFractions) -> Result<Self, TokenError> {
        let parts = [fractions.rewards, fractions.governance, fractions.development];
        if parts.iter().any(|f| *f < Rational::zero())
            || parts.iter().fold(Rational::zero(), |a, f| a + f) != Rational::one()
        {
            return Err(TokenError::InvalidAllocation);
        }
        let supply = Rational::from_integer(total_supply as i128);
        let governance = floor_u64(&(fractions.governance * supply));
        let development = floor_u64(&(fractions.development * supply));
        // Rounding remainder lands in REWARDS so the supply is fully allocated.
        let rewards = total_supply - governance - development;
        Ok(Self::from_pools(total_supply, rewards, governance, development))
    }

    fn from_pools(total_supply: u64, rewards: u64, governance: u64, development: u64) -> Self {
        TokenLedger {
            total_supply,
            pools: [
                (Pool::Rewards, rewards),
                (Pool::Governance, governance),
                (Pool::Development, development),
            ]
            .into_iter()
            .collect(),
            balances: BTreeMap::new(),
            stakes: BTreeMap::new(),
            burned: 0,
            emission: rewards / EMISSION_DIVISOR,
        }
    }

    pub fn genesis_pools(&self) -> Vec<(Pool, u64)> {
        self.pools.iter().map(|(p, v)| (*p, *v)).collect()
    }

    pub fn open_account(&mut self, id: &str) {
        self.balances.entry(id.to_string()).or_insert(0);
    }

    pub fn has_account(&self, id: &str) -> bool {
        self.balances.contains_key(id)
    }

    pub fn pool(&self, pool: Pool) -> u64 {
        self.pools.get(&pool).copied().unwrap_or(0)
    }

    pub fn balance(&self, id: &str) -> u64 {
        self.balances.get(id).copied().unwrap_or(0)
    }

    pub fn staked(&self, id: &str) -> u64 {
        self.stakes
            .get(id)
            .map_or(0, |es| es.iter().map(|e| e.amount).sum())
    }

    pub fn stake_entries(&self, id: &str) -> &[StakeEntry] {
        self.stakes.get(id).map_or(&[], Vec::as_slice)
    }

    pub fn conservation(&self) -> Conservation {
        let pools: u64 = self.pools.values().sum();
        let balances: u64 = self.balances.values().sum();
        let stakes: u64 = self.stakes.values().flatten().map(|e| e.amount).sum();
        let sum = pools as u128 + balances as u128 + stakes as u128 + self.burned as u128;
        Conservation {
            total_supply: self.total_supply,
            pools,
            balances,
            stakes,
            burned: self.burned,
            ok: sum == self.total_supply as u128,
        }
    }

    fn slot(&mut self, account: &Account) -> Result<&mut u64, TokenError> {
        match account {
            Account::Pool(p) => Ok(self.pools.entry(*p).or_insert(0)),
            Account::Holder(h) => self
                .balances
                .get_mut(h)
                .ok_or_else(|| TokenError::UnknownAccount(h.clone())),
        }
    }

    pub fn transfer(
        &mut self,
        from: &Account,
        to: &Account,
        amount: u64,
        reason: TransferReason,
        actor: &str,
        sink: &mut dyn EventSink,
    ) -> Result<(), TokenError> {
        if amount == 0 {
            return Err(TokenError::ZeroAmount);
        }
        self.slot(to)?;
        let src = self.slot(from)?;
        if *src < amount {
            return Err(TokenError::InsufficientTokens {
                account: from.to_string(),
                needed: amount,
                available: *src,
            });
        }
        *src -= amount;
        *self.slot(to)? += amount;
        sink.emit(
            actor,
            EventBody::from(TokensTransferredBody {
                from: from.clone(),
                to: to.clone(),
                amount,
                reason,
            }),
        );
        Ok(())
    }

    pub fn stake(
        &mut self,
        id: &str,
        amount: u64,
        lock_epochs: u64,
        epoch: u64,
        sink: &mut dyn EventSink,
    ) -> Result<StakeEntry, TokenError> {
        if amount == 0 {
            return Err(TokenError::ZeroAmount);
        }
        if lock_epochs == 0 {
            return Err(TokenError::InvalidLock);
        }
        let bal = self
            .balances
            .get_mut(id)
            .ok_or_else(|| TokenError::UnknownAccount(id.to_string()))?;
        if *bal < amount {
            return Err(TokenError::InsufficientTokens {
                account: id.to_string(),
                needed: amount,
                available: *bal,
            });
        }
        *bal -= amount;
        let entry = StakeEntry {
            amount,
            lock_start: epoch,
            lock_epochs,
        };
        self.stakes.entry(id.to_string()).or_default().push(entry);
        sink.emit(
            id,
            EventBody::from(StakeChangedBody {
                stakeholder: id.to_string(),
                action: StakeAction::Stake,
                amount,
                lock_start: epoch,
                lock_epochs,
            }),
        );
        Ok(entry)
    }

    /// Releases every matured stake entry back to the unstaked balance.
    pub fn unstake(
        &mut self,
        id: &str,
        epoch: u64,
        sink: &mut dyn EventSink,
    ) -> Result<u64, TokenError> {
        let entries = self
            .stakes
            .get_mut(id)
            .filter(|es| !es.is_empty())
            .ok_or_else(|| TokenError::NothingStaked(id.to_string()))?;
        let (matured, locked): (Vec<StakeEntry>, Vec<StakeEntry>) =
            entries.iter().partition(|e| epoch >= e.unlock_epoch());
        if matured.is_empty() {
            let unlock_epoch = locked.iter().map(StakeEntry::unlock_epoch).min().unwrap_or(epoch);
            return Err(TokenError::StillLocked {
                stakeholder: id.to_string(),
                unlock_epoch,
            });
        }
        *entries = locked;
        let amount: u64 = matured.iter().map(|e| e.amount).sum();
        *self.balances.entry(id.to_string()).or_insert(0) += amount;
        sink.emit(
            id,
            EventBody::from(StakeChangedBody {
                stakeholder: id.to_string(),
                action: StakeAction::Unstake,
                amount,
                lock_start: epoch,
                lock_epochs: 0,
            }),
        );
        Ok(amount)
    }

    /// Reward weight `c * sum(amount * elapsed)` of one stakeholder.
    pub fn reward_weight(&self, id: &str, epoch: u64, factor: Rational) -> Rational {
        let base: u128 = self
            .stake_entries(id)
            .iter()
            .map(|e| e.amount as u128 * e.elapsed(epoch) as u128)
            .sum();
        factor * Rational::from_integer(base as i128)
    }

    /// Pays `floor(E * w_i / sum w)` from REWARDS to each staker. Stakeholders
    /// missing from `factors` count with factor 1. A zero total weight defers
    /// the emission.
    pub fn distribute_rewards(
        &mut self,
        epoch: u64,
        factors: &BTreeMap<String, Rational>,
        sink: &mut dyn EventSink,
    ) -> Result<Vec<(String, u64)>, TokenError> {
        let weights: Vec<(String, Rational)> = self
            .stakes
            .iter()
            .filter(|(_, es)| !es.is_empty())
            .map(|(id, _)| {
                let c = factors.get(id).copied().unwrap_or_else(Rational::one);
                (id.clone(), self.reward_weight(id, epoch, c))
            })
            .collect();
        let total = weights.iter().fold(Rational::zero(), |a, (_, w)| a + w);
        if total.is_zero() {
            return Ok(Vec::new());
        }
        let emission = self.emission;
        let available = self.pool(Pool::Rewards);
        if available < emission {
            return Err(TokenError::PoolExhausted {
                needed: emission,
                available,
            });
        }
        let e = Rational::from_integer(emission as i128);
        let mut paid = Vec::new();
        for (id, w) in weights {
            let amount = floor_u64(&(e * w / total));
            if amount > 0 {
                self.transfer(
                    &Account::Pool(Pool::Rewards),
                    &Account::Holder(id.clone()),
                    amount,
                    TransferReason::Reward,
                    "protocol:tokens",
                    sink,
                )?;
                paid.push((id, amount));
            }
        }
        Ok(paid)
    }

    /// Burns `floor(fraction * staked)`, consuming the oldest entries first.
    pub fn slash(
        &mut self,
        id: &str,
        reason: SlashReason,
        fraction: Rational,
        did: Option<String>,
        sink: &mut dyn EventSink,
    ) -> Result<u64, TokenError> {
        if fraction <= Rational::zero() || fraction > Rational::one() {
            return Err(TokenError::InvalidFraction);
        }
        let staked_before = self.staked(id);
        let burned = floor_u64(&(fraction * Rational::from_integer(staked_before as i128)));
        if burned > 0 {
            let entries = self.stakes.get_mut(id).expect("staked > 0 implies entries");
            let mut remaining = burned;
            for e in entries.iter_mut() {
                let take = e.amount.min(remaining);
                e.amount -= take;
                remaining -= take;
                if remaining == 0 {
                    break;
                }
            }
            entries.retain(|e| e.amount > 0);
            self.burned += burned;
        } else {
            log::info!("slash of {id} for {reason} burned nothing (staked {staked_before})");
        }
        sink.emit(
            "protocol:tokens",
            EventBody::from(SlashAppliedBody {
                stakeholder: id.to_string(),
                reason,
                fraction,
                staked_before,
                burned,
                did,
            }),
        );
        Ok(burned)
    }

    /// Rebuilds token state by re-applying ledger events in order.
    pub fn replay<'a>(
        events: impl IntoIterator<Item = (u64, &'a EventBody)>,
    ) -> Result<Option<TokenLedger>, TokenError> {
        let mut ledger: Option<TokenLedger> = None;
        let mut sink: Vec<(String, EventBody)> = Vec::new();
        for (epoch, body) in events {
            match body {
                EventBody::Genesis(g) => ledger = Some(Self::from_genesis(g)?),
                EventBody::TokensTransferred(t) => {
                    let l = ledger.as_mut().ok_or(missing_genesis())?;
                    if let Account::Holder(h) = &t.to {
                        l.open_account(h);
                    }
                    l.transfer(&t.from, &t.to, t.amount, t.reason, "", &mut sink)?;
                }
                EventBody::StakeChanged(s) => {
                    let l = ledger.as_mut().ok_or(missing_genesis())?;
                    match s.action {
                        StakeAction::Stake => {
                            l.stake(&s.stakeholder, s.amount, s.lock_epochs, s.lock_start, &mut sink)?;
                        }
                        StakeAction::Unstake => {
                            let got = l.unstake(&s.stakeholder, epoch, &mut sink)?;
                            if got != s.amount {
                                return Err(TokenError::ReplayMismatch(format!(
                                    "unstake of {} released {got}, ledger says {}",
                                    s.stakeholder, s.amount
                                )));
                            }
                        }
                    }
                }
                EventBody::SlashApplied(s) => {
                    let l = ledger.as_mut().ok_or(missing_genesis())?;
                    let got = l.slash(&s.stakeholder, s.reason, s.fraction, None, &mut sink)?;
                    if got != s.burned {
                        return Err(TokenError::ReplayMismatch(format!(
                            "slash of {} burned {got}, ledger says {}",
                            s.stakeholder, s.burned
                        )));
                    }
                }
                _ => {}
            }
            sink.clear();
        }
        Ok(ledger)
    }

    fn from_genesis(g: &GenesisBody) -> Result<TokenLedger, TokenError> {
        let get = |p: Pool| g.pools.iter().find(|(q, _)| *q == p).map_or(0, |(_, v)| *v);
        let l = Self::from_pools(
            g.total_supply,
            get(Pool::Rewards),
            get(Pool::Governance),
            get(Pool::Development),
        );
        if !l.conservation().ok {
            return Err(TokenError::ReplayMismatch("genesis pools do not sum to supply".into()));
        }
        Ok(l)
    }
}

fn missing_genesis() -> TokenError {
    TokenError::ReplayMismatch("token event before GENESIS".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    type Sink = Vec<(String, EventBody)>;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    fn funded(holders: &[(&str, u64)]) -> TokenLedger {
        let mut l = TokenLedger::mint_genesis(DEFAULT_TOTAL_SUPPLY, &PoolFractions::default()).unwrap();
        let mut sink = Sink::new();
        for (id, amt) in holders {
            l.open_account(id);
            l.transfer(
                &Account::Pool(Pool::Development),
                &Account::Holder(id.to_string()),
                *amt,
                TransferReason::Grant,
                "genesis",
                &mut sink,
            )
            .unwrap();
        }
        l
    }

    #[test]
    fn default_genesis_split() {
        let l = TokenLedger::mint_genesis(DEFAULT_TOTAL_SUPPLY, &PoolFractions::default()).unwrap();
        // 0.4 / 0.3 / 0.3 of 10^9.
        assert_eq!(l.pool(Pool::Rewards), 400_000_000);
        assert_eq!(l.pool(Pool::Governance), 300_000_000);
        assert_eq!(l.pool(Pool::Development), 300_000_000);
        assert_eq!(l.emission, 400_000);
        assert!(l.conservation().ok);
    }

    #[test]
    fn genesis_allocation_edge_cases() {
        let all_rewards = PoolFractions {
            rewards: r(1, 1),
            governance: r(0, 1),
            development: r(0, 1),
        };
        let l = TokenLedger::mint_genesis(1000, &all_rewards).unwrap();
        assert_eq!(l.pool(Pool::Rewards), 1000);
        let short = PoolFractions {
            rewards: r(39, 100),
            ..PoolFractions::default()
        };
        assert_eq!(
            TokenLedger::mint_genesis(1000, &short),
            Err(TokenError::InvalidAllocation)
        );
        let thirds = PoolFractions {
            rewards: r(1, 3),
            governance: r(1, 3),
            development: r(1, 3),
        };
        let l = TokenLedger::mint_genesis(1000, &thirds).unwrap();
        assert_eq!(l.pool(Pool::Rewards), 334);
        assert!(l.conservation().ok);
    }

    #[test]
    fn stake_and_lock() {
        let mut l = funded(&[("a", 100)]);
        let mut sink = Sink::new();
        l.stake("a", 60, 4, 10, &mut sink).unwrap();
        assert_eq!((l.balance("a"), l.staked("a")), (40, 60));
        assert_eq!(
            l.unstake("a", 13, &mut sink),
            Err(TokenError::StillLocked {
                stakeholder: "a".into(),
                unlock_epoch: 14
            })
        );
        assert_eq!(l.unstake("a", 14, &mut sink), Ok(60));
        assert_eq!(l.balance("a"), 100);
        assert_eq!(l.stake("a", 0, 4, 0, &mut sink), Err(TokenError::ZeroAmount));
        assert!(matches!(
            l.stake("a", 101, 4, 0, &mut sink),
            Err(TokenError::InsufficientTokens { .. })
        ));
        assert!(l.conservation().ok);
    }

    #[test]
    fn reward_split_example() {
        let mut l = funded(&[("a", 100), ("b", 100)]);
        let mut sink = Sink::new();
        l.stake("a", 100, 10, 0, &mut sink).unwrap();
        l.stake("b", 100, 10, 0, &mut sink).unwrap();
        l.emission = 30;
        let factors = [("a".to_string(), r(1, 1)), ("b".to_string(), r(1, 2))]
            .into_iter()
            .collect();
        // Epoch 1: elapsed 1 for both. Shares 100 : 50 of 150 -> 20, 10.
        let paid = l.distribute_rewards(1, &factors, &mut sink).unwrap();
        assert_eq!(paid, vec![("a".into(), 20), ("b".into(), 10)]);
        assert!(l.conservation().ok);
    }

    #[test]
    fn sole_staker_takes_whole_emission() {
        let mut l = funded(&[("a", 7)]);
        let mut sink = Sink::new();
        l.stake("a", 7, 3, 0, &mut sink).unwrap();
        l.emission = 30;
        let factors = [("a".to_string(), r(1, 3))].into_iter().collect();
        assert_eq!(
            l.distribute_rewards(2, &factors, &mut sink).unwrap(),
            vec![("a".into(), 30)]
        );
    }

    #[test]
    fn zero_factors_defer_emission() {
        let mut l = funded(&[("a", 10)]);
        let mut sink = Sink::new();
        l.stake("a", 10, 3, 0, &mut sink).unwrap();
        let before = l.clone();
        let factors = [("a".to_string(), r(0, 1))].into_iter().collect();
        assert!(l.distribute_rewards(1, &factors, &mut sink).unwrap().is_empty());
        assert_eq!(l, before);
    }

    #[test]
    fn slash_examples() {
        let mut l = funded(&[("a", 500)]);
        let mut sink = Sink::new();
        l.stake("a", 120, 2, 0, &mut sink).unwrap();
        l.stake("a", 80, 2, 1, &mut sink).unwrap();
        let burned = l
            .slash("a", SlashReason::EvidenceForged, r(1, 5), None, &mut sink)
            .unwrap();
        assert_eq!(burned, 40);
        assert_eq!(l.staked("a"), 160);
        // Oldest entry absorbed the whole cut.
        assert_eq!(l.stake_entries("a")[0].amount, 80);
        assert_eq!(
            l.slash("a", SlashReason::AuditFail, r(1, 1), None, &mut sink)
                .unwrap(),
            160
        );
        assert_eq!(l.staked("a"), 0);
        assert_eq!(
            l.slash("a", SlashReason::AuditFail, r(1, 20), None, &mut sink)
                .unwrap(),
            0
        );
        assert_eq!(sink.last().unwrap().1.kind(), crate::ledger::EventKind::SlashApplied);
        assert_eq!(
            l.slash("a", SlashReason::AuditFail, r(0, 1), None, &mut sink),
            Err(TokenError::InvalidFraction)
        );
        assert!(l.conservation().ok);
        assert_eq!(l.burned, 200);
    }

    #[test]
    fn replay_reproduces_state() {
        let mut l = TokenLedger::mint_genesis(10_000, &PoolFractions::default()).unwrap();
        let mut sink = Sink::new();
        let genesis = EventBody::from(GenesisBody {
            scenario_digest: crate::crypto::Digest::ZERO,
            seed: 0,
            scheme: Default::default(),
            authorities: vec![],
            quorum: 0,
            block_capacity: 100,
            total_supply: 10_000,
            pools: l.genesis_pools(),
        });
        l.open_account("a");
        l.transfer(
            &Account::Pool(Pool::Development),
            &Account::Holder("a".into()),
            1000,
            TransferReason::Grant,
            "g",
            &mut sink,
        )
        .unwrap();
        l.stake("a", 500, 2, 0, &mut sink).unwrap();
        l.slash("a", SlashReason::AuditFail, r(1, 20), None, &mut sink)
            .unwrap();
        l.unstake("a", 3, &mut sink).unwrap();
        let mut events = vec![(0u64, genesis)];
        events.extend(sink.into_iter().map(|(_, b)| (3u64, b)));
        let rebuilt = TokenLedger::replay(events.iter().map(|(e, b)| (*e, b)))
            .unwrap()
            .unwrap();
        assert_eq!(rebuilt, l);
    }
}
