use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::WindowedDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRole {
    Train,
    Validation,
    Test,
    UnseenTest,
}

impl SplitRole {
    pub fn file_stem(self) -> &'static str {
        match self {
            SplitRole::Train => "train",
            SplitRole::Validation => "validation",
            SplitRole::Test => "test",
            SplitRole::UnseenTest => "unseen_test",
        }
    }
}

/// Assignment of subject ids to roles. A subject belongs to at most one role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub roles: BTreeMap<SplitRole, Vec<i32>>,
}

impl SplitSpec {
    pub fn new(roles: BTreeMap<SplitRole, Vec<i32>>) -> Result<Self> {
        let spec = Self { roles };
        spec.validate()?;
        Ok(spec)
    }

    /// Participant split used for MM-Fit.
    pub fn mmfit() -> Self {
        let roles = BTreeMap::from([
            (SplitRole::Train, vec![1, 2, 3, 4, 6, 7, 8, 16, 17, 18]),
            (SplitRole::Validation, vec![14, 15, 19]),
            (SplitRole::Test, vec![9, 10, 11]),
            (SplitRole::UnseenTest, vec![0, 5, 12, 13, 20]),
        ]);
        Self { roles }
    }

    pub fn validate(&self) -> Result<()> {
        let mut owner: BTreeMap<i32, SplitRole> = BTreeMap::new();
        for (&role, subjects) in &self.roles {
            for &s in subjects {
                if let Some(prev) = owner.insert(s, role) {
                    if prev != role {
                        return Err(Error::Config(format!(
                            "subject {s} assigned to both {prev:?} and {role:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn role_of(&self, subject: i32) -> Option<SplitRole> {
        self.roles
            .iter()
            .find(|(_, s)| s.contains(&subject))
            .map(|(&r, _)| r)
    }

    pub fn all_subjects(&self) -> Vec<i32> {
        let mut v: Vec<i32> = self.roles.values().flatten().copied().collect();
        v.sort_unstable();
        v
    }

    /// Partition a dataset by subject. Subjects not in the spec are dropped.
    pub fn apply(&self, ds: &WindowedDataset) -> BTreeMap<SplitRole, WindowedDataset> {
        self.roles
            .iter()
            .map(|(&role, subjects)| (role, ds.filter(|p| subjects.contains(&p.subject))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mmfit_split_is_disjoint_and_complete() {
        let s = SplitSpec::mmfit();
        s.validate().unwrap();
        assert_eq!(s.all_subjects(), (0..=20).collect::<Vec<_>>());
        assert_eq!(s.role_of(14), Some(SplitRole::Validation));
        assert_eq!(s.role_of(0), Some(SplitRole::UnseenTest));
    }

    #[test]
    fn overlapping_roles_are_rejected() {
        let roles = BTreeMap::from([(SplitRole::Train, vec![1, 2]), (SplitRole::Test, vec![2])]);
        assert!(SplitSpec::new(roles).is_err());
    }
}
