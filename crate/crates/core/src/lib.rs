//! Permissioned governance ledger for AI-system oversight.
//!
//! Every state transition (identity registration, compliance assessment,
//! audit, token movement, governance vote) is recorded as a typed event in
//! an append-only, hash-chained, authority-sealed ledger. The [`sim`] module
//! drives all subsystems through a fixed per-epoch phase order from a seeded
//! scenario, so a `(scenario, seed)` pair always produces the same chain.
//!
//! The arithmetic kernels (vote power, tallies, risk scores, forecasting) are
//! generic over the scalar type. The stateful engine instantiates them with
//! the aliases below: exact [`Rational`] wherever a threshold comparison must
//! be decided without rounding, and `f64` for smoothing series.

pub mod audit;
pub mod codec;
pub mod compliance;
pub mod crypto;
pub mod governance;
pub mod identity;
pub mod interop;
pub mod ledger;
pub mod risk;
pub mod scalar;
pub mod sim;
pub mod tokens;
pub mod types;

/// Exact rational used for voting power, thresholds, compliance scores and
/// risk scores.
pub type Rational = num_rational::Ratio<i128>;

/// Vote weights instantiated over exact rationals.
pub type Weights = governance::VoteWeights<Rational>;

/// Risk-score weights instantiated over exact rationals.
pub type RiskWeights = risk::ScoreWeights<Rational>;

/// Floating-point type used by the compliance forecaster.
pub type Forecast = f64;

pub use crypto::Digest;
pub use ledger::{Block, EventKind, GovernanceEvent, Ledger};
pub use scalar::Scalar;
pub use types::{ComplianceStatus, Role, RiskTier};
