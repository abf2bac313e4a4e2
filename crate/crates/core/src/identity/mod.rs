//! DID registry for AI systems: derivation, permissioned registration,
//! role-based access and content-addressed metadata references.

mod access;
mod store;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use access::{AccessPolicy, Grant};
pub use store::{ContentStore, DirStore, MemoryStore, StoreError, DEFAULT_MAX_BLOB};

use crate::crypto::Digest;
use crate::ledger::{
    AccessLoggedBody, DidChange, DidRegisteredBody, DidUpdatedBody, EventBody, EventSink,
};
use crate::types::{Action, ComplianceStatus, Principal, RiskTier};

pub const DID_PREFIX: &str = "did:govsim:";
pub const MAX_PURPOSE_LEN: usize = 64;

#[derive(Debug, Error)]
pub enum IdentityError {
    #[error("public key already registered as {0}")]
    DuplicateIdentity(String),
    #[error("systems classified UNACCEPTABLE may not be registered")]
    ProhibitedSystem,
    #[error("unknown stakeholder {0:?}")]
    UnknownStakeholder(String),
    #[error("unknown identity {0:?}")]
    UnknownIdentity(String),
    #[error("{actor} may not {action} {did}")]
    AccessDenied {
        actor: String,
        action: Action,
        did: String,
    },
    #[error("malformed change: {0}")]
    InvalidChange(String),
}

/// `did:govsim:` followed by the first 32 hex characters of SHA-256(key).
pub fn derive_did(public_key: &[u8]) -> String {
    let h = Digest::of(public_key).to_hex();
    format!("{DID_PREFIX}{}", &h[..32])
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AISystemRecord {
    pub did: String,
    pub risk_tier: RiskTier,
    pub compliance_status: ComplianceStatus,
    pub purpose: String,
    pub metadata_refs: Vec<Digest>,
    pub version: u64,
    pub owner: String,
}

impl AISystemRecord {
    pub fn apply(&mut self, change: &DidChange) {
        match change {
            DidChange::Status(s) => self.compliance_status = *s,
            DidChange::MetadataRef(d) => self.metadata_refs.push(*d),
            DidChange::Purpose(p) => self.purpose = p.clone(),
            DidChange::RiskTier(t) => self.risk_tier = *t,
        }
        self.version += 1;
    }
}

pub fn required_action(change: &DidChange) -> Action {
    match change {
        DidChange::RiskTier(_) => Action::Reclassify,
        _ => Action::Modify,
    }
}

#[derive(Clone, Debug, Default)]
pub struct IdentityRegistry {
    records: BTreeMap<String, AISystemRecord>,
    key_digests: BTreeSet<Digest>,
    policy: AccessPolicy,
}

impl IdentityRegistry {
    pub fn new(policy: AccessPolicy) -> Self {
        IdentityRegistry {
            policy,
            ..Default::default()
        }
    }

    pub fn policy(&self) -> &AccessPolicy {
        &self.policy
    }

    pub fn get(&self, did: &str) -> Option<&AISystemRecord> {
        self.records.get(did)
    }

    /// Records in ascending DID order.
    pub fn records(&self) -> impl Iterator<Item = &AISystemRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn register_did(
        &mut self,
        public_key: &[u8],
        purpose: &str,
        risk_tier: RiskTier,
        owner: &str,
        owner_exists: bool,
        sink: &mut dyn EventSink,
    ) -> Result<String, IdentityError> {
        let key_digest = Digest::of(public_key);
        let did = derive_did(public_key);
        if self.key_digests.contains(&key_digest) || self.records.contains_key(&did) {
            return Err(IdentityError::DuplicateIdentity(did));
        }
        if risk_tier == RiskTier::Unacceptable {
            return Err(IdentityError::ProhibitedSystem);
        }
        if !owner_exists {
            return Err(IdentityError::UnknownStakeholder(owner.to_string()));
        }
        check_purpose(purpose)?;
        let record = AISystemRecord {
            did: did.clone(),
            risk_tier,
            compliance_status: ComplianceStatus::UnderReview,
            purpose: purpose.to_string(),
            metadata_refs: Vec::new(),
            version: 1,
            owner: owner.to_string(),
        };
        self.key_digests.insert(key_digest);
        self.records.insert(did.clone(), record);
        sink.emit(
            owner,
            EventBody::from(DidRegisteredBody {
                did: did.clone(),
                key_digest,
                purpose: purpose.to_string(),
                risk_tier,
                owner: owner.to_string(),
            }),
        );
        Ok(did)
    }

    /// Checks `actor` may perform `action` on `did` and logs the attempt.
    pub fn authorize(
        &self,
        actor: &Principal,
        action: Action,
        did: &str,
        sink: &mut dyn EventSink,
    ) -> Result<(), IdentityError> {
        let record = self
            .records
            .get(did)
            .ok_or_else(|| IdentityError::UnknownIdentity(did.to_string()))?;
        let granted = match actor {
            Principal::Protocol(_) => true,
            Principal::Stakeholder { id, role } => {
                self.policy
                    .check_access_on(*role, action, *id == record.owner)
            }
        };
        let actor_id = actor.id();
        sink.emit(
            &actor_id,
            EventBody::from(AccessLoggedBody {
                actor: actor_id.clone(),
                role: actor.role(),
                action,
                did: did.to_string(),
                granted,
            }),
        );
        if granted {
            Ok(())
        } else {
            Err(IdentityError::AccessDenied {
                actor: actor_id,
                action,
                did: did.to_string(),
            })
        }
    }

    /// Applies `change` to `did`, returning the new version.
    ///
    /// Metadata references are checked against `store` when one is given.
    pub fn update_did(
        &mut self,
        did: &str,
        change: DidChange,
        actor: &Principal,
        store: Option<&dyn ContentStore>,
        sink: &mut dyn EventSink,
    ) -> Result<u64, IdentityError> {
        self.authorize(actor, required_action(&change), did, sink)?;
        let record = self.records.get_mut(did).expect("authorize checked existence");
        match &change {
            DidChange::Purpose(p) => check_purpose(p)?,
            DidChange::MetadataRef(d) => {
                if record.metadata_refs.contains(d) {
                    return Err(IdentityError::InvalidChange(format!(
                        "metadata ref {d} already attached"
                    )));
                }
                if let Some(s) = store {
                    if !s.contains(d) {
                        return Err(IdentityError::InvalidChange(format!(
                            "metadata ref {d} does not resolve"
                        )));
                    }
                }
            }
            DidChange::RiskTier(RiskTier::Unacceptable) => {
                // Kept as a tier so the record documents why it is suspended.
            }
            DidChange::Status(_) | DidChange::RiskTier(_) => {}
        }
        record.apply(&change);
        let version = record.version;
        sink.emit(
            &actor.id(),
            EventBody::from(DidUpdatedBody {
                did: did.to_string(),
                version,
                change,
            }),
        );
        Ok(version)
    }
}

fn check_purpose(p: &str) -> Result<(), IdentityError> {
    if p.trim().is_empty() || p.len() > MAX_PURPOSE_LEN {
        return Err(IdentityError::InvalidChange(format!(
            "purpose must be 1..={MAX_PURPOSE_LEN} bytes"
        )));
    }
    Ok(())
}
