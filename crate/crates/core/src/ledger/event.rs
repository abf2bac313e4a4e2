use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::{decode_body, encode_body, DecodeError, Encoder};
use crate::compliance::ComplianceRuleModule;
use crate::crypto::{Digest, SignatureScheme};
use crate::governance::VoteWeights;
use crate::types::*;
use crate::Rational;

macro_rules! event_kinds {
    ($($variant:ident = $code:literal => $text:literal),+ $(,)?) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "SCREAMING_SNAKE_CASE")]
        pub enum EventKind { $($variant),+ }

        impl EventKind {
            pub const ALL: &'static [EventKind] = &[$(EventKind::$variant),+];

            pub fn code(self) -> u8 {
                match self { $(EventKind::$variant => $code),+ }
            }

            pub fn from_code(code: u8) -> Option<EventKind> {
                match code { $($code => Some(EventKind::$variant),)+ _ => None }
            }

            pub fn as_str(self) -> &'static str {
                match self { $(EventKind::$variant => $text),+ }
            }
        }

        impl std::str::FromStr for EventKind {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok(EventKind::$variant),)+
                    other => Err(format!("unknown event kind {other:?}")),
                }
            }
        }
    };
}

event_kinds! {
    DidRegistered = 1 => "DID_REGISTERED",
    DidUpdated = 2 => "DID_UPDATED",
    DelegateElected = 3 => "DELEGATE_ELECTED",
    ProposalSubmitted = 4 => "PROPOSAL_SUBMITTED",
    VoteCast = 5 => "VOTE_CAST",
    ProposalResolved = 6 => "PROPOSAL_RESOLVED",
    AssessmentRecorded = 7 => "ASSESSMENT_RECORDED",
    AuditRecorded = 8 => "AUDIT_RECORDED",
    AuditorAccredited = 9 => "AUDITOR_ACCREDITED",
    TokensTransferred = 10 => "TOKENS_TRANSFERRED",
    StakeChanged = 11 => "STAKE_CHANGED",
    SlashApplied = 12 => "SLASH_APPLIED",
    IncidentRaised = 13 => "INCIDENT_RAISED",
    IncidentAdvanced = 14 => "INCIDENT_ADVANCED",
    RiskReclassified = 15 => "RISK_RECLASSIFIED",
    OracleUpdate = 16 => "ORACLE_UPDATE",
    AccessLogged = 17 => "ACCESS_LOGGED",
    WeightsAdjusted = 18 => "WEIGHTS_ADJUSTED",
    Genesis = 19 => "GENESIS",
    RuleRegistered = 20 => "RULE_REGISTERED",
    MitigationTriggered = 21 => "MITIGATION_TRIGGERED",
    CollusionFlagged = 22 => "COLLUSION_FLAGGED",
    DisputeOpened = 23 => "DISPUTE_OPENED",
    RiskAssessed = 24 => "RISK_ASSESSED",
    EpochSealed = 25 => "EPOCH_SEALED",
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One ledger entry. `payload` is the canonical encoding of the typed body
/// for `kind`; use [`GovernanceEvent::body`] to decode it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GovernanceEvent {
    pub event_id: u64,
    pub kind: EventKind,
    pub epoch: u64,
    pub payload: Vec<u8>,
    pub actor: String,
}

impl GovernanceEvent {
    pub fn new(event_id: u64, epoch: u64, actor: impl Into<String>, body: &EventBody) -> Self {
        GovernanceEvent {
            event_id,
            kind: body.kind(),
            epoch,
            payload: body.encode(),
            actor: actor.into(),
        }
    }

    pub fn body(&self) -> Result<EventBody, DecodeError> {
        EventBody::decode(self.kind, &self.payload)
    }

    /// True when `payload` is exactly the canonical encoding of its decoded body.
    pub fn is_canonical(&self) -> bool {
        matches!(self.body(), Ok(b) if b.encode() == self.payload)
    }

    pub(crate) fn encode_into(&self, e: &mut Encoder) {
        e.u64(self.event_id)
            .u8(self.kind.code())
            .u64(self.epoch)
            .str(&self.actor)
            .bytes(&self.payload);
    }
}

// ---------------------------------------------------------------------------
// Event bodies

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenesisBody {
    pub scenario_digest: Digest,
    pub seed: u64,
    pub scheme: SignatureScheme,
    pub authorities: Vec<(String, Vec<u8>)>,
    pub quorum: u32,
    pub block_capacity: u32,
    pub total_supply: u64,
    pub pools: Vec<(Pool, u64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DidRegisteredBody {
    pub did: String,
    pub key_digest: Digest,
    pub purpose: String,
    pub risk_tier: RiskTier,
    pub owner: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DidChange {
    Status(ComplianceStatus),
    MetadataRef(Digest),
    Purpose(String),
    RiskTier(RiskTier),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DidUpdatedBody {
    pub did: String,
    pub version: u64,
    pub change: DidChange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelegateElectedBody {
    pub delegates: Vec<(String, Rational)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ProposalPayload {
    Text(String),
    Weights(VoteWeights<Rational>),
    Rule(ComplianceRuleModule),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalSubmittedBody {
    pub proposal_id: u64,
    pub kind: ProposalKind,
    pub mode: VoteMode,
    pub payload: ProposalPayload,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoteCastBody {
    pub proposal_id: u64,
    pub voter: String,
    pub direction: Direction,
    pub mode: VoteMode,
    pub magnitude: u64,
    pub power: Rational,
    pub cost: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalResolvedBody {
    pub proposal_id: u64,
    pub status: ProposalStatus,
    pub for_power: Rational,
    pub against_power: Rational,
    pub threshold: Rational,
}

/// Per-rule verdict as recorded on the ledger: `(rule_id, version, passed)`.
pub type RuleVerdict = (String, u32, bool);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRecordedBody {
    pub did: String,
    pub tier: RiskTier,
    pub results: Vec<RuleVerdict>,
    pub score: Rational,
    pub compliant: bool,
    /// Commitment to the evaluated metric vector; the values never reach the ledger.
    pub commitment: Digest,
    /// Set when a dispute panel overturned the original assessment.
    pub corrected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecordedBody {
    pub audit_id: u64,
    pub did: String,
    pub auditor: String,
    pub trigger: AuditTrigger,
    pub findings: Vec<RuleVerdict>,
    pub outcome: AuditOutcome,
    pub evidence_commitment: Digest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditorAccreditedBody {
    pub auditor: String,
    pub body: String,
    pub issued_epoch: u64,
    pub expiry_epoch: u64,
    pub scopes: Vec<RuleDomain>,
}

/// A token account: a pool or a stakeholder's unstaked balance.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Account {
    Pool(Pool),
    Holder(String),
}

impl fmt::Display for Account {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Account::Pool(p) => write!(f, "pool:{p}"),
            Account::Holder(h) => f.write_str(h),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransferReason {
    Grant,
    Transfer,
    QuadraticVote,
    Reward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokensTransferredBody {
    pub from: Account,
    pub to: Account,
    pub amount: u64,
    pub reason: TransferReason,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StakeAction {
    Stake,
    Unstake,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StakeChangedBody {
    pub stakeholder: String,
    pub action: StakeAction,
    pub amount: u64,
    pub lock_start: u64,
    pub lock_epochs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlashAppliedBody {
    pub stakeholder: String,
    pub reason: SlashReason,
    pub fraction: Rational,
    pub staked_before: u64,
    pub burned: u64,
    /// System whose audit triggered the penalty, if any.
    pub did: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidentRaisedBody {
    pub incident_id: u64,
    pub did: String,
    pub severity: Severity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidentAdvancedBody {
    pub incident_id: u64,
    pub did: String,
    pub from: IncidentState,
    pub to: IncidentState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReclassifiedBody {
    pub did: String,
    pub from: RiskTier,
    pub to: RiskTier,
    pub score: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskAssessedBody {
    pub did: String,
    pub score: Rational,
    pub forecast: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleUpdateBody {
    pub feed_id: String,
    pub signer: String,
    pub values: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccessLoggedBody {
    pub actor: String,
    pub role: Option<Role>,
    pub action: Action,
    pub did: String,
    pub granted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum WeightChange {
    /// A passed WEIGHT_ADJUSTMENT proposal replaced the global weights.
    Replace {
        proposal_id: u64,
        weights: VoteWeights<Rational>,
    },
    /// Temporary reduction of individual stakeholders' raw power.
    Penalty {
        stakeholders: Vec<String>,
        factor: Rational,
    },
    PenaltyLifted { stakeholders: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightsAdjustedBody {
    pub effective_epoch: u64,
    pub change: WeightChange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleRegisteredBody {
    pub rule: ComplianceRuleModule,
    /// Passed RULE_UPDATE proposal; `None` for the genesis rule pack.
    pub authorization: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MitigationSource {
    Assessment,
    Forecast,
    Collusion,
    Regulation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationTriggeredBody {
    pub did: String,
    pub source: MitigationSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollusionFlaggedBody {
    pub first: String,
    pub second: String,
    pub shared: u32,
    pub agreeing: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisputeOpenedBody {
    pub did: String,
    pub assessment_epoch: u64,
    pub challenger: String,
    pub panel: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochSealedBody {
    pub epoch: u64,
    pub events_in_epoch: u64,
}

macro_rules! bodies {
    ($($variant:ident($body:ty)),+ $(,)?) => {
        /// Typed content of a ledger event, one variant per [`EventKind`].
        #[derive(Clone, Debug, PartialEq)]
        pub enum EventBody { $($variant($body)),+ }

        impl EventBody {
            pub fn kind(&self) -> EventKind {
                match self { $(EventBody::$variant(_) => EventKind::$variant),+ }
            }

            pub fn encode(&self) -> Vec<u8> {
                match self { $(EventBody::$variant(b) => encode_body(b)),+ }
            }

            pub fn decode(kind: EventKind, payload: &[u8]) -> Result<EventBody, DecodeError> {
                Ok(match kind { $(EventKind::$variant => EventBody::$variant(decode_body(payload)?)),+ })
            }
        }

        $(
            impl From<$body> for EventBody {
                fn from(b: $body) -> Self { EventBody::$variant(b) }
            }
        )+
    };
}

bodies! {
    DidRegistered(DidRegisteredBody),
    DidUpdated(DidUpdatedBody),
    DelegateElected(DelegateElectedBody),
    ProposalSubmitted(ProposalSubmittedBody),
    VoteCast(VoteCastBody),
    ProposalResolved(ProposalResolvedBody),
    AssessmentRecorded(AssessmentRecordedBody),
    AuditRecorded(AuditRecordedBody),
    AuditorAccredited(AuditorAccreditedBody),
    TokensTransferred(TokensTransferredBody),
    StakeChanged(StakeChangedBody),
    SlashApplied(SlashAppliedBody),
    IncidentRaised(IncidentRaisedBody),
    IncidentAdvanced(IncidentAdvancedBody),
    RiskReclassified(RiskReclassifiedBody),
    OracleUpdate(OracleUpdateBody),
    AccessLogged(AccessLoggedBody),
    WeightsAdjusted(WeightsAdjustedBody),
    Genesis(GenesisBody),
    RuleRegistered(RuleRegisteredBody),
    MitigationTriggered(MitigationTriggeredBody),
    CollusionFlagged(CollusionFlaggedBody),
    DisputeOpened(DisputeOpenedBody),
    RiskAssessed(RiskAssessedBody),
    EpochSealed(EpochSealedBody),
}

/// Destination for events emitted by subsystem operations.
///
/// Subsystems never touch the ledger directly; the simulator's journal
/// assigns ids and epochs, while tests can collect bodies in a `Vec`.
pub trait EventSink {
    fn emit(&mut self, actor: &str, body: EventBody);
}

impl EventSink for Vec<(String, EventBody)> {
    fn emit(&mut self, actor: &str, body: EventBody) {
        self.push((actor.to_string(), body));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_codes_are_unique_and_round_trip() {
        let mut codes: Vec<u8> = EventKind::ALL.iter().map(|k| k.code()).collect();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), EventKind::ALL.len());
        for k in EventKind::ALL {
            assert_eq!(EventKind::from_code(k.code()), Some(*k));
            assert_eq!(k.as_str().parse::<EventKind>().unwrap(), *k);
        }
        assert_eq!(EventKind::from_code(0), None);
    }

    #[test]
    fn payload_encoding_is_canonical() {
        let body = EventBody::from(DidUpdatedBody {
            did: "did:govsim:00".into(),
            version: 4,
            change: DidChange::Status(ComplianceStatus::Noncompliant),
        });
        let a = GovernanceEvent::new(1, 0, "reg", &body);
        let b = GovernanceEvent::new(1, 0, "reg", &body);
        assert_eq!(a.payload, b.payload);
        assert!(a.is_canonical());
        assert_eq!(a.body().unwrap(), body);

        let mut padded = a.clone();
        padded.payload.push(0);
        assert!(!padded.is_canonical());
        let mut wrong_kind = a;
        wrong_kind.kind = EventKind::VoteCast;
        assert!(!wrong_kind.is_canonical());
    }
}
