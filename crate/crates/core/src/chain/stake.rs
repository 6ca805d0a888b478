use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::PartyId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("active-slot coefficient f={0} outside (0, 1]")]
    F(f64),
    #[error("relative stake alpha={0} outside [0, 1]")]
    Alpha(f64),
}

/// Leader probability for relative stake `alpha`: `1 - (1 - f)^alpha`.
pub fn phi(f: f64, alpha: f64) -> Result<f64, ParamError> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(ParamError::F(f));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(ParamError::Alpha(alpha));
    }
    Ok(1.0 - (1.0 - f).powf(alpha))
}

/// Leadership threshold `floor(2^l_vrf * phi(f, alpha))`; a VRF output `y`
/// wins the slot iff `y < threshold`.
pub fn threshold(f: f64, alpha: f64, l_vrf: u32) -> Result<u128, ParamError> {
    let p = phi(f, alpha)?;
    let scale = 2f64.powi(l_vrf as i32);
    let t = (scale * p).floor();
    Ok((t as u128).min(1u128 << l_vrf))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StakeDistribution {
    stakes: BTreeMap<PartyId, u64>,
    total: u64,
}

impl StakeDistribution {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (PartyId, u64)>) -> Self {
        let stakes: BTreeMap<PartyId, u64> = pairs.into_iter().collect();
        let total = stakes.values().sum();
        Self { stakes, total }
    }

    pub fn stake(&self, p: PartyId) -> u64 {
        self.stakes.get(&p).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn relative(&self, p: PartyId) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.stake(p) as f64 / self.total as f64
        }
    }

    pub fn parties(&self) -> impl Iterator<Item = (PartyId, u64)> + '_ {
        self.stakes.iter().map(|(p, s)| (*p, *s))
    }

    pub fn as_map(&self) -> &BTreeMap<PartyId, u64> {
        &self.stakes
    }
}
