//! Feature role registry.
//!
//! Normalized feature map cells hold small integer codes: 0 for an empty
//! cell, or a registry id describing which catalog roles the cell's column
//! type plays in that row. Plain ids stand for a single role; virtual ids
//! stand for a set of two or more roles that landed in the same cell, either
//! through a genuine collision or through a reflexive instance binding both
//! roles of a relation to one type.
//!
//! Ids are handed out in first-encounter order from a single counter, so the
//! mapping is injective by construction and only grows. A registry must be
//! persisted alongside anything that encodes feature vectors with it (models,
//! datasets); decoding with a registry that assigns the ids differently would
//! silently scramble the features. The fingerprint and the prefix check below
//! exist to catch exactly that.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stable_hash;

/// Allocates and remembers role codes. See the module docs for the contract.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoleRegistry {
    next_id: u32,
    roles: BTreeMap<(usize, String), u32>,
    virtuals: BTreeMap<(usize, Vec<String>), u32>,
}

impl RoleRegistry {
    pub fn new() -> Self {
        RoleRegistry {
            next_id: 1,
            roles: BTreeMap::new(),
            virtuals: BTreeMap::new(),
        }
    }

    /// Code for a single role of one catalog row, allocating on first use.
    pub fn role_id(&mut self, ms_id: usize, role: &str) -> u32 {
        let key = (ms_id, role.to_string());
        if let Some(id) = self.roles.get(&key) {
            return *id;
        }
        let id = self.next_id;
        self.next_id += 1;
        self.roles.insert(key, id);
        id
    }

    /// Code for a set of roles of one catalog row sharing a cell.
    ///
    /// Only sets of two or more roles get virtual ids; a singleton set is a
    /// plain role and calling this with one is a programming error. Sets of
    /// three or more are legitimate but rare enough to be worth a log line.
    pub fn virtual_role_id(&mut self, ms_id: usize, roles: &BTreeSet<String>) -> u32 {
        assert!(
            roles.len() >= 2,
            "virtual role ids require at least two roles, got {roles:?}"
        );
        let key = (ms_id, roles.iter().cloned().collect::<Vec<_>>());
        if let Some(id) = self.virtuals.get(&key) {
            return *id;
        }
        if roles.len() >= 3 {
            log::warn!(
                "cell of catalog row {ms_id} collapses {} roles ({:?}); \
                 the virtual code preserves the set but this is unusual",
                roles.len(),
                key.1
            );
        }
        let id = self.next_id;
        self.next_id += 1;
        self.virtuals.insert(key, id);
        id
    }

    /// Number of ids allocated so far.
    pub fn len(&self) -> usize {
        self.roles.len() + self.virtuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest id handed out, or 0 when empty.
    pub fn max_id(&self) -> u32 {
        self.next_id - 1
    }

    /// Looks up a plain role code without allocating.
    pub fn lookup_role(&self, ms_id: usize, role: &str) -> Option<u32> {
        self.roles.get(&(ms_id, role.to_string())).copied()
    }

    /// Reverse lookup: what does this code mean? Returns the catalog row and
    /// the sorted role set (singleton for plain ids).
    pub fn describe(&self, id: u32) -> Option<(usize, Vec<String>)> {
        if let Some(((ms, role), _)) = self.roles.iter().find(|(_, v)| **v == id) {
            return Some((*ms, vec![role.clone()]));
        }
        self.virtuals
            .iter()
            .find(|(_, v)| **v == id)
            .map(|((ms, roles), _)| (*ms, roles.clone()))
    }

    /// Order-sensitive digest of the id assignment. Two registries with the
    /// same fingerprint decode feature vectors identically.
    pub fn fingerprint(&self) -> u64 {
        let mut entries: Vec<(u32, String)> = self
            .roles
            .iter()
            .map(|((ms, role), id)| (*id, format!("{ms}:{role}")))
            .chain(
                self.virtuals
                    .iter()
                    .map(|((ms, roles), id)| (*id, format!("{ms}:{}", roles.join("+")))),
            )
            .collect();
        entries.sort();
        let parts: Vec<String> = entries
            .into_iter()
            .map(|(id, key)| format!("{id}={key}"))
            .collect();
        let refs: Vec<&str> = parts.iter().map(String::as_str).collect();
        stable_hash(&refs)
    }

    /// True when `self` assigns every id exactly as `base` does and only adds
    /// ids beyond `base`'s range. Feature vectors encoded with `base` stay
    /// valid under such an extension.
    pub fn is_extension_of(&self, base: &RoleRegistry) -> bool {
        if self.next_id < base.next_id {
            return false;
        }
        for (key, id) in &base.roles {
            if self.roles.get(key) != Some(id) {
                return false;
            }
        }
        for (key, id) in &base.virtuals {
            if self.virtuals.get(key) != Some(id) {
                return false;
            }
        }
        // Nothing in self's copy of the shared id range may be new.
        let shared_plain = self.roles.values().filter(|id| **id < base.next_id).count();
        let shared_virtual = self
            .virtuals
            .values()
            .filter(|id| **id < base.next_id)
            .count();
        shared_plain == base.roles.len() && shared_virtual == base.virtuals.len()
    }

    pub fn to_snapshot(&self) -> RegistrySnapshot {
        RegistrySnapshot {
            next_id: self.next_id,
            max_id: self.max_id(),
            fingerprint: self.fingerprint(),
            roles: self
                .roles
                .iter()
                .map(|((ms_id, role), id)| RoleEntry {
                    ms_id: *ms_id,
                    role: role.clone(),
                    id: *id,
                })
                .collect(),
            virtual_roles: self
                .virtuals
                .iter()
                .map(|((ms_id, roles), id)| VirtualEntry {
                    ms_id: *ms_id,
                    roles: roles.clone(),
                    id: *id,
                })
                .collect(),
        }
    }

    pub fn from_snapshot(snapshot: &RegistrySnapshot) -> Result<Self> {
        let mut reg = RoleRegistry::new();
        let mut seen = BTreeSet::new();
        for entry in &snapshot.roles {
            if entry.id == 0 {
                return Err(Error::Registry("id 0 is reserved for empty cells".into()));
            }
            if !seen.insert(entry.id) {
                return Err(Error::Registry(format!("id {} assigned twice", entry.id)));
            }
            reg.roles
                .insert((entry.ms_id, entry.role.clone()), entry.id);
        }
        for entry in &snapshot.virtual_roles {
            if entry.id == 0 {
                return Err(Error::Registry("id 0 is reserved for empty cells".into()));
            }
            if !seen.insert(entry.id) {
                return Err(Error::Registry(format!("id {} assigned twice", entry.id)));
            }
            if entry.roles.len() < 2 {
                return Err(Error::Registry(format!(
                    "virtual id {} lists fewer than two roles",
                    entry.id
                )));
            }
            let mut sorted = entry.roles.clone();
            sorted.sort();
            if sorted != entry.roles {
                return Err(Error::Registry(format!(
                    "virtual id {} roles are not sorted",
                    entry.id
                )));
            }
            reg.virtuals.insert((entry.ms_id, sorted), entry.id);
        }
        reg.next_id = seen.iter().next_back().map_or(1, |m| m + 1);
        if reg.next_id != snapshot.next_id {
            return Err(Error::Registry(format!(
                "snapshot claims next_id {} but entries end at {}",
                snapshot.next_id,
                reg.next_id - 1
            )));
        }
        if reg.fingerprint() != snapshot.fingerprint {
            return Err(Error::Registry(
                "snapshot fingerprint does not match its entries".into(),
            ));
        }
        Ok(reg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.to_snapshot())?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let snapshot: RegistrySnapshot = serde_json::from_str(&text)
            .map_err(|e| Error::Registry(format!("{}: {e}", path.display())))?;
        Self::from_snapshot(&snapshot)
    }
}

/// Serialized registry contents, stable across load/save cycles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistrySnapshot {
    pub next_id: u32,
    pub max_id: u32,
    pub fingerprint: u64,
    pub roles: Vec<RoleEntry>,
    pub virtual_roles: Vec<VirtualEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleEntry {
    pub ms_id: usize,
    pub role: String,
    pub id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirtualEntry {
    pub ms_id: usize,
    pub roles: Vec<String>,
    pub id: u32,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(roles: &[&str]) -> BTreeSet<String> {
        roles.iter().map(|r| r.to_string()).collect()
    }

    #[test]
    fn ids_follow_first_encounter_order() {
        let mut reg = RoleRegistry::new();
        assert_eq!(reg.role_id(1, "Superclass"), 1);
        assert_eq!(reg.role_id(1, "Subclass"), 2);
        assert_eq!(reg.role_id(1, "Superclass"), 1);
        assert_eq!(reg.virtual_role_id(7, &set(&["FieldType", "Holder"])), 3);
        assert_eq!(reg.virtual_role_id(7, &set(&["Holder", "FieldType"])), 3);
        assert_eq!(reg.role_id(7, "Holder"), 4);
        assert_eq!(reg.max_id(), 4);
        assert_eq!(reg.len(), 4);
    }

    #[test]
    fn same_role_name_differs_across_rows() {
        let mut reg = RoleRegistry::new();
        let a = reg.role_id(0, "Type");
        let b = reg.role_id(16, "Type");
        assert_ne!(a, b);
    }

    #[test]
    fn snapshot_round_trips() {
        let mut reg = RoleRegistry::new();
        reg.role_id(4, "Delegator");
        reg.virtual_role_id(4, &set(&["Delegatee", "Delegator"]));
        reg.role_id(4, "Delegatee");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("registry.json");
        reg.save(&path).unwrap();
        let back = RoleRegistry::load(&path).unwrap();
        assert_eq!(reg, back);
        assert_eq!(reg.fingerprint(), back.fingerprint());
    }

    #[test]
    fn snapshot_validation_rejects_duplicates_and_zero() {
        let mut snapshot = RoleRegistry::new().to_snapshot();
        snapshot.roles.push(RoleEntry {
            ms_id: 0,
            role: "Type".into(),
            id: 0,
        });
        assert!(RoleRegistry::from_snapshot(&snapshot).is_err());

        let mut reg = RoleRegistry::new();
        reg.role_id(0, "Type");
        let mut snapshot = reg.to_snapshot();
        snapshot.roles.push(RoleEntry {
            ms_id: 1,
            role: "Subclass".into(),
            id: 1,
        });
        assert!(RoleRegistry::from_snapshot(&snapshot).is_err());
    }

    #[test]
    fn extension_check() {
        let mut base = RoleRegistry::new();
        base.role_id(1, "Superclass");
        base.role_id(1, "Subclass");

        let mut grown = base.clone();
        grown.role_id(3, "Aggregator");
        assert!(grown.is_extension_of(&base));
        assert!(!base.is_extension_of(&grown));
        assert!(base.is_extension_of(&base));

        // Same size, different assignment order.
        let mut other = RoleRegistry::new();
        other.role_id(1, "Subclass");
        other.role_id(1, "Superclass");
        assert!(!other.is_extension_of(&base));
        assert_ne!(other.fingerprint(), base.fingerprint());
    }

    #[test]
    fn describe_inverts_allocation() {
        let mut reg = RoleRegistry::new();
        let a = reg.role_id(6, "CreationSite");
        let v = reg.virtual_role_id(6, &set(&["CreationSite", "TypeToCreate"]));
        assert_eq!(reg.describe(a), Some((6, vec!["CreationSite".to_string()])));
        assert_eq!(
            reg.describe(v),
            Some((
                6,
                vec!["CreationSite".to_string(), "TypeToCreate".to_string()]
            ))
        );
        assert_eq!(reg.describe(99), None);
    }

    proptest! {
        /// Any interleaving of allocations stays injective: distinct keys get
        /// distinct nonzero ids, repeats return the original id.
        #[test]
        fn allocation_is_injective(calls in proptest::collection::vec((0usize..17, 0u8..6), 1..60)) {
            let mut reg = RoleRegistry::new();
            let mut by_key: BTreeMap<(usize, u8), u32> = BTreeMap::new();
            for (ms, which) in calls {
                let id = if which < 4 {
                    reg.role_id(ms, ["A", "B", "C", "D"][which as usize])
                } else if which == 4 {
                    reg.virtual_role_id(ms, &set(&["A", "B"]))
                } else {
                    reg.virtual_role_id(ms, &set(&["B", "C", "D"]))
                };
                prop_assert!(id > 0);
                if let Some(prev) = by_key.insert((ms, which), id) {
                    prop_assert_eq!(prev, id);
                }
            }
            let distinct: BTreeSet<u32> = by_key.values().copied().collect();
            prop_assert_eq!(distinct.len(), by_key.len());
            prop_assert_eq!(reg.len(), by_key.len());
        }
    }
}
