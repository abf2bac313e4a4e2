//! Vocabulary shared across subsystems and embedded in ledger payloads.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "SCREAMING_SNAKE_CASE")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl std::str::FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!("unknown {} {:?}", stringify!($name), other)),
                }
            }
        }
    };
}

named_enum!(
    /// Stakeholder role.
    Role {
        Regulator => "REGULATOR",
        Bank => "BANK",
        Fintech => "FINTECH",
        Auditor => "AUDITOR",
        Developer => "DEVELOPER",
    }
);

named_enum!(
    /// Action an actor may attempt against an identity record.
    Action {
        View => "VIEW",
        Modify => "MODIFY",
        Audit => "AUDIT",
        Reclassify => "RECLASSIFY",
    }
);

named_enum!(
    /// Canonical interchange message type.
    MsgType {
        ComplianceReport => "COMPLIANCE_REPORT",
        RiskAssessment => "RISK_ASSESSMENT",
        TransactionData => "TRANSACTION_DATA",
        AuditRequest => "AUDIT_REQUEST",
    }
);

named_enum!(
    /// Risk classification, ordered from most to least severe.
    RiskTier {
        Unacceptable => "UNACCEPTABLE",
        High => "HIGH",
        Limited => "LIMITED",
        Minimal => "MINIMAL",
    }
);

impl RiskTier {
    /// Larger is riskier.
    pub fn severity(self) -> u8 {
        match self {
            RiskTier::Minimal => 0,
            RiskTier::Limited => 1,
            RiskTier::High => 2,
            RiskTier::Unacceptable => 3,
        }
    }

    pub fn riskier(a: RiskTier, b: RiskTier) -> RiskTier {
        if a.severity() >= b.severity() {
            a
        } else {
            b
        }
    }
}

named_enum!(
    ComplianceStatus {
        Compliant => "COMPLIANT",
        Noncompliant => "NONCOMPLIANT",
        UnderReview => "UNDER_REVIEW",
        Suspended => "SUSPENDED",
    }
);

named_enum!(
    /// Regulatory area a compliance rule belongs to.
    RuleDomain {
        DataPrivacy => "DATA_PRIVACY",
        RiskAssessment => "RISK_ASSESSMENT",
        CapitalAdequacy => "CAPITAL_ADEQUACY",
        Transparency => "TRANSPARENCY",
    }
);

named_enum!(
    ProposalKind {
        Routine => "ROUTINE",
        Critical => "CRITICAL",
        WeightAdjustment => "WEIGHT_ADJUSTMENT",
        RuleUpdate => "RULE_UPDATE",
    }
);

named_enum!(
    ProposalStatus {
        Open => "OPEN",
        Passed => "PASSED",
        Rejected => "REJECTED",
    }
);

named_enum!(
    VoteMode {
        Linear => "LINEAR",
        Quadratic => "QUADRATIC",
    }
);

named_enum!(
    Direction {
        For => "FOR",
        Against => "AGAINST",
    }
);

named_enum!(
    AuditOutcome {
        Pass => "PASS",
        Fail => "FAIL",
        Inconclusive => "INCONCLUSIVE",
    }
);

named_enum!(
    /// Why an audit was scheduled.
    AuditTrigger {
        Cadence => "CADENCE",
        Mitigation => "MITIGATION",
        Forecast => "FORECAST",
        Collusion => "COLLUSION",
        Regulation => "REGULATION",
    }
);

named_enum!(
    SlashReason {
        AuditFail => "AUDIT_FAIL",
        EvidenceForged => "EVIDENCE_FORGED",
        CollusionConfirmed => "COLLUSION_CONFIRMED",
    }
);

named_enum!(
    Pool {
        Rewards => "REWARDS",
        Governance => "GOVERNANCE",
        Development => "DEVELOPMENT",
    }
);

named_enum!(
    Severity {
        Low => "LOW",
        Medium => "MEDIUM",
        Critical => "CRITICAL",
    }
);

named_enum!(
    IncidentState {
        Raised => "RAISED",
        Contained => "CONTAINED",
        Resolved => "RESOLVED",
        PostmortemFiled => "POSTMORTEM_FILED",
    }
);

impl IncidentState {
    pub fn next(self) -> Option<IncidentState> {
        match self {
            IncidentState::Raised => Some(IncidentState::Contained),
            IncidentState::Contained => Some(IncidentState::Resolved),
            IncidentState::Resolved => Some(IncidentState::PostmortemFiled),
            IncidentState::PostmortemFiled => None,
        }
    }
}

/// Who is acting on an identity record: a registered stakeholder or one of
/// the protocol's own automated processes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Principal {
    Stakeholder { id: String, role: Role },
    Protocol(&'static str),
}

impl Principal {
    pub fn stakeholder(id: impl Into<String>, role: Role) -> Self {
        Principal::Stakeholder {
            id: id.into(),
            role,
        }
    }

    pub fn id(&self) -> String {
        match self {
            Principal::Stakeholder { id, .. } => id.clone(),
            Principal::Protocol(name) => format!("protocol:{name}"),
        }
    }

    pub fn role(&self) -> Option<Role> {
        match self {
            Principal::Stakeholder { role, .. } => Some(*role),
            Principal::Protocol(_) => None,
        }
    }
}
