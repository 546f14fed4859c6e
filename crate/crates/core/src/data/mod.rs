//! Datasets: the released user/playlist file format, synthetic worlds for
//! desk-scale experiments, and k-means user segmentation.

mod io;
mod kmeans;
mod synthetic;

pub use io::{format_float, load_arms, load_users, write_arms, write_users};
pub use kmeans::{kmeans_segment, KMeansResult};
pub use synthetic::{generate_synthetic, SyntheticParams};

use crate::domain::{ArmParameters, UserProfile};
use crate::error::{Error, Result};

/// Users, arms and the number of segments the users are split into.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub users: Vec<UserProfile>,
    pub arms: Vec<ArmParameters>,
    pub q: usize,
}

impl Dataset {
    /// Builds a dataset, inferring `q` from the largest segment id.
    pub fn new(users: Vec<UserProfile>, arms: Vec<ArmParameters>) -> Result<Self> {
        let q = users.iter().map(|u| u.segment + 1).max().unwrap_or(0);
        let ds = Dataset { users, arms, q };
        ds.validate()?;
        Ok(ds)
    }

    pub fn dim(&self) -> usize {
        self.arms.first().map_or(0, |a| a.theta.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() || self.arms.is_empty() {
            return Err(Error::Config("dataset needs users and arms".into()));
        }
        let d = self.dim();
        if let Some(a) = self.arms.iter().find(|a| a.theta.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: a.theta.len(),
            });
        }
        if let Some(u) = self.users.iter().find(|u| u.features.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: u.features.len(),
            });
        }
        if let Some(u) = self.users.iter().find(|u| u.segment >= self.q) {
            return Err(Error::Config(format!(
                "user {} has segment {} but q = {}",
                u.user_id, u.segment, self.q
            )));
        }
        for (i, a) in self.arms.iter().enumerate() {
            if a.arm_id != i {
                return Err(Error::Config(format!(
                    "arm ids must be 0..{} in order, found {} at position {i}",
                    self.arms.len(),
                    a.arm_id
                )));
            }
        }
        Ok(())
    }
}
