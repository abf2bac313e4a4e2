//! Scalar-generic vote-power kernels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::governance::GovernanceError;
use crate::scalar::Scalar;
use crate::types::{ProposalKind, ProposalStatus, Role};

/// Role multipliers, per-entity cap and pass thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoteWeights<T> {
    pub role_multiplier: BTreeMap<Role, T>,
    /// Maximum effective power of any one voter as a fraction of total raw power.
    pub cap_fraction: T,
    pub threshold_routine: T,
    pub threshold_critical: T,
}

impl<T: Scalar> Default for VoteWeights<T> {
    /// Regulators 1.5, everyone else 1; cap 0.20; thresholds 1/2 and 2/3.
    fn default() -> Self {
        let role_multiplier = Role::ALL
            .iter()
            .map(|&r| {
                let m = if r == Role::Regulator {
                    T::ratio(3, 2)
                } else {
                    T::one()
                };
                (r, m)
            })
            .collect();
        VoteWeights {
            role_multiplier,
            cap_fraction: T::ratio(1, 5),
            threshold_routine: T::ratio(1, 2),
            threshold_critical: T::ratio(2, 3),
        }
    }
}

impl<T: Scalar> VoteWeights<T> {
    pub fn multiplier(&self, role: Role) -> T {
        self.role_multiplier.get(&role).copied().unwrap_or_else(T::one)
    }

    pub fn threshold(&self, kind: ProposalKind) -> T {
        match kind {
            ProposalKind::Critical => self.threshold_critical,
            _ => self.threshold_routine,
        }
    }

    pub fn validate(&self) -> Result<(), GovernanceError> {
        let unit = |v: T| v > T::zero() && v <= T::one();
        if !unit(self.cap_fraction) {
            return Err(GovernanceError::InvalidWeights(format!(
                "cap_fraction {:?} outside (0, 1]",
                self.cap_fraction
            )));
        }
        for (name, t) in [
            ("threshold_routine", self.threshold_routine),
            ("threshold_critical", self.threshold_critical),
        ] {
            if !unit(t) {
                return Err(GovernanceError::InvalidWeights(format!(
                    "{name} {t:?} outside (0, 1]"
                )));
            }
        }
        if let Some((r, m)) = self.role_multiplier.iter().find(|(_, m)| **m <= T::zero()) {
            return Err(GovernanceError::InvalidWeights(format!(
                "multiplier for {r} must be positive, got {m:?}"
            )));
        }
        Ok(())
    }
}

/// `stake * role_multiplier * penalty`.
pub fn raw_power<T: Scalar>(stake: u64, role: Role, weights: &VoteWeights<T>, penalty: T) -> T {
    T::from_count(stake) * weights.multiplier(role) * penalty
}

/// `min(raw, cap_fraction * total_raw)`.
pub fn effective_power<T: Scalar>(
    raw: T,
    weights: &VoteWeights<T>,
    total_raw: T,
) -> Result<T, GovernanceError> {
    if total_raw <= T::zero() {
        return Err(GovernanceError::NoVotingPower);
    }
    Ok(T::min_of(raw, weights.cap_fraction * total_raw))
}

/// Effective power for each `(id, raw)` entry, in input order.
pub fn effective_powers<T: Scalar>(
    raws: &[(String, T)],
    weights: &VoteWeights<T>,
) -> Result<Vec<(String, T)>, GovernanceError> {
    let total = raws.iter().fold(T::zero(), |acc, (_, r)| acc + *r);
    raws.iter()
        .map(|(id, r)| Ok((id.clone(), effective_power(*r, weights, total)?)))
        .collect()
}

/// Top `seats` candidates by effective power, ties broken by ascending id.
pub fn elect_delegates<T: Scalar>(
    raws: &[(String, T)],
    weights: &VoteWeights<T>,
    seats: usize,
) -> Result<Vec<(String, T)>, GovernanceError> {
    if seats == 0 {
        return Err(GovernanceError::InsufficientCandidates {
            eligible: 0,
            seats,
        });
    }
    let mut eligible: Vec<(String, T)> = effective_powers(raws, weights)?
        .into_iter()
        .filter(|(_, p)| *p > T::zero())
        .collect();
    if eligible.len() < seats {
        return Err(GovernanceError::InsufficientCandidates {
            eligible: eligible.len(),
            seats,
        });
    }
    eligible.sort_by(|(ia, pa), (ib, pb)| {
        pb.partial_cmp(pa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| ia.cmp(ib))
    });
    eligible.truncate(seats);
    Ok(eligible)
}

/// Passes iff `for / (for + against) > threshold`; no votes means rejection.
pub fn tally_outcome<T: Scalar>(for_power: T, against_power: T, threshold: T) -> ProposalStatus {
    let total = for_power + against_power;
    if total.is_zero() {
        return ProposalStatus::Rejected;
    }
    if for_power > threshold * total {
        ProposalStatus::Passed
    } else {
        ProposalStatus::Rejected
    }
}

/// Token cost of a quadratic vote of the given magnitude.
pub fn quadratic_cost(magnitude: u64) -> Option<u64> {
    magnitude.checked_mul(magnitude)
}
