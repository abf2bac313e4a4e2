use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::types::{Action, Role};

/// What a role may do with a given action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Grant {
    Allow,
    /// Allowed only on records the actor owns.
    OwnerOnly,
    Deny,
}

/// Total `(role, action) -> grant` table.
///
/// Default table:
///
/// | role      | VIEW  | MODIFY | AUDIT | RECLASSIFY |
/// |-----------|-------|--------|-------|------------|
/// | REGULATOR | allow | allow  | allow | allow      |
/// | AUDITOR   | allow | deny   | allow | deny       |
/// | BANK      | allow | own    | deny  | deny       |
/// | FINTECH   | allow | own    | deny  | deny       |
/// | DEVELOPER | own   | deny   | deny  | deny       |
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessPolicy {
    table: BTreeMap<(Role, Action), Grant>,
}

impl Default for AccessPolicy {
    fn default() -> Self {
        use Action::*;
        use Grant::*;
        let row = |role: Role, grants: [Grant; 4]| {
            [View, Modify, Audit, Reclassify]
                .into_iter()
                .zip(grants)
                .map(move |(a, g)| ((role, a), g))
        };
        let table = row(Role::Regulator, [Allow, Allow, Allow, Allow])
            .chain(row(Role::Auditor, [Allow, Deny, Allow, Deny]))
            .chain(row(Role::Bank, [Allow, OwnerOnly, Deny, Deny]))
            .chain(row(Role::Fintech, [Allow, OwnerOnly, Deny, Deny]))
            .chain(row(Role::Developer, [OwnerOnly, Deny, Deny, Deny]))
            .collect();
        AccessPolicy { table }
    }
}

impl AccessPolicy {
    /// Builds a policy from explicit entries; fails unless every
    /// `(role, action)` pair appears exactly once.
    pub fn from_entries(
        entries: impl IntoIterator<Item = (Role, Action, Grant)>,
    ) -> Result<Self, String> {
        let mut table = BTreeMap::new();
        for (r, a, g) in entries {
            if table.insert((r, a), g).is_some() {
                return Err(format!("duplicate policy entry for ({r}, {a})"));
            }
        }
        for r in Role::ALL {
            for a in Action::ALL {
                if !table.contains_key(&(*r, *a)) {
                    return Err(format!("missing policy entry for ({r}, {a})"));
                }
            }
        }
        Ok(AccessPolicy { table })
    }

    pub fn grant(&self, role: Role, action: Action) -> Grant {
        self.table[&(role, action)]
    }

    /// Decision for an actor acting on someone else's record.
    pub fn check_access(&self, role: Role, action: Action) -> bool {
        self.check_access_on(role, action, false)
    }

    pub fn check_access_on(&self, role: Role, action: Action, is_owner: bool) -> bool {
        match self.grant(role, action) {
            Grant::Allow => true,
            Grant::OwnerOnly => is_owner,
            Grant::Deny => false,
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (Role, Action, Grant)> + '_ {
        self.table.iter().map(|(&(r, a), &g)| (r, a, g))
    }
}
