//! Registration with unknown correspondence, plus the classical baselines.

mod align_match;
mod hungarian;
mod icp;
mod kabsch;
mod nn;

pub use align_match::{align_and_match, p_icp_refined, AlignMatchOptions, MatchMode, WitnessBudget};
pub use hungarian::{hungarian_match, Assignment};
pub use icp::{icp, IcpOptions, IcpOutcome};
pub use kabsch::kabsch_ssd;
pub use nn::{nearest_neighbor_match, SpatialIndex};

use crate::geom::Alignment;
use crate::{Error, Result};

/// A correspondence `i ↦ m(i)` from P-indices to Q-indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    map: Vec<usize>,
    bijective: bool,
}

impl Matching {
    /// Validates every entry against `q_len`.
    pub fn new(map: Vec<usize>, q_len: usize) -> Result<Self> {
        if let Some(&bad) = map.iter().find(|&&j| j >= q_len) {
            return Err(Error::invalid(format!(
                "matching entry {bad} out of range for {q_len} points"
            )));
        }
        let bijective = map.len() == q_len && is_permutation(&map);
        Ok(Self { map, bijective })
    }

    pub(crate) fn new_unchecked(map: Vec<usize>) -> Self {
        let bijective = is_permutation(&map);
        Self { map, bijective }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
            bijective: true,
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.map
    }

    pub fn is_bijective(&self) -> bool {
        self.bijective
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &j)| i == j)
    }
}

fn is_permutation(map: &[usize]) -> bool {
    let mut seen = vec![false; map.len()];
    for &j in map {
        if j >= map.len() || seen[j] {
            return false;
        }
        seen[j] = true;
    }
    true
}

/// Alignment and correspondence returned by a registration algorithm.
#[derive(Clone, Debug, PartialEq)]
pub struct RegistrationResult {
    pub alignment: Alignment,
    pub matching: Matching,
    /// `eval_matched_cost(P, Q, matching, alignment, spec)`.
    pub cost: f64,
    pub candidates_evaluated: u64,
    pub wall_time: f64,
    /// False when the run carries no approximation guarantee (for example a
    /// trimmed aggregator).
    pub guaranteed: bool,
}
