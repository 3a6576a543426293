//! JSON run reports and ground-truth records.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{GeneratedInstance, InstanceSpec};
use crate::geom::{Alignment, RotationMatrix, Vector};
use crate::registration::Matching;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Rotation (row-major rows) and translation of an alignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub rotation: Vec<Vec<f64>>,
    pub translation: Vec<f64>,
}

impl From<&Alignment> for AlignmentRecord {
    fn from(a: &Alignment) -> Self {
        Self {
            rotation: a.rotation.to_rows(),
            translation: a.translation.iter().copied().collect(),
        }
    }
}

impl AlignmentRecord {
    pub fn to_alignment(&self) -> Result<Alignment> {
        let d = self.translation.len();
        if self.rotation.len() != d || self.rotation.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("alignment record has inconsistent shape"));
        }
        let entries: Vec<f64> = self.rotation.iter().flatten().copied().collect();
        let rotation = RotationMatrix::from_row_slice(d, &entries)?;
        Alignment::new(rotation, Vector::from_column_slice(&self.translation))
    }
}

/// A correspondence: either the literal string `"identity"` or an index
/// array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatchingRecord {
    Identity(IdentityTag),
    Map(Vec<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentityTag {
    Identity,
}

impl From<&Matching> for MatchingRecord {
    fn from(m: &Matching) -> Self {
        if m.is_identity() {
            MatchingRecord::Identity(IdentityTag::Identity)
        } else {
            MatchingRecord::Map(m.as_slice().to_vec())
        }
    }
}

impl MatchingRecord {
    pub fn to_matching(&self, n: usize, q_len: usize) -> Result<Matching> {
        match self {
            MatchingRecord::Identity(_) => {
                if n > q_len {
                    return Err(Error::invalid("identity matching longer than Q"));
                }
                Ok(Matching::identity(n))
            }
            MatchingRecord::Map(v) => Matching::new(v.clone(), q_len),
        }
    }
}

/// One solver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub algorithm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceSpec>,
    pub cost_spec: String,
    pub alignment: AlignmentRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matching: Option<MatchingRecord>,
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimal_ssd_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation_recovery: Option<f64>,
    pub guaranteed: bool,
    pub candidates_evaluated: u64,
    pub wall_time_seconds: f64,
    pub seed: u64,
}

impl RunReport {
    pub fn new(algorithm: impl Into<String>, cost_spec: impl Into<String>, alignment: &Alignment, cost: f64, seed: u64) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            algorithm: algorithm.into(),
            instance: None,
            cost_spec: cost_spec.into(),
            alignment: alignment.into(),
            matching: None,
            cost,
            optimal_ssd_cost: None,
            ratio: None,
            permutation_recovery: None,
            guaranteed: false,
            candidates_evaluated: 0,
            wall_time_seconds: 0.0,
            seed,
        }
    }

    /// Records the optimum; the ratio is kept only for a positive optimum.
    pub fn set_optimal(&mut self, optimal: f64) {
        self.optimal_ssd_cost = Some(optimal);
        self.ratio = (optimal > 0.0).then(|| self.cost / optimal);
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        save_json(self, path)
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let report: Self = load_json(path)?;
        if report.schema != SCHEMA_VERSION {
            return Err(Error::Unsupported(format!("report schema {}", report.schema)));
        }
        Ok(report)
    }
}

/// Ground truth written next to a generated instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub schema: u32,
    pub instance: InstanceSpec,
    /// Maps Q onto P (before noise).
    pub true_alignment: AlignmentRecord,
    /// `true_matching[i]` is the index in Q that `P[i]` came from.
    pub true_matching: Vec<usize>,
    pub outlier_indices: Vec<usize>,
}

impl TruthRecord {
    pub fn new(spec: &InstanceSpec, inst: &GeneratedInstance) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            instance: spec.clone(),
            true_alignment: (&inst.true_alignment).into(),
            true_matching: inst.true_matching.as_slice().to_vec(),
            outlier_indices: inst.outlier_indices.clone(),
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        save_json(self, path)
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        load_json(path)
    }
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_instance;

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = Alignment::new(RotationMatrix::planar(0.3), Vector::from_column_slice(&[0.1, -1.0 / 3.0])).unwrap();
        let mut r = RunReport::new("kabsch", "z=2,loss=power:2,agg=sum", &a, 0.5, 7);
        r.set_optimal(0.25);
        assert_eq!(r.ratio, Some(2.0));
        r.matching = Some((&Matching::new(vec![1, 0], 2).unwrap()).into());
        let path = dir.path().join("r.json");
        r.save_json(&path).unwrap();
        let back = RunReport::load_json(&path).unwrap();
        assert_eq!(back, r);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"schema\": 1"));
        assert_eq!(back.alignment.to_alignment().unwrap(), a);

        r.set_optimal(0.0);
        assert_eq!(r.ratio, None);
        r.matching = Some((&Matching::identity(2)).into());
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"matching\":\"identity\""));
        let back: RunReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.matching.unwrap().to_matching(2, 2).unwrap(), Matching::identity(2));
    }

    #[test]
    fn truth_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = InstanceSpec::synthetic(3, 12, 2);
        spec.shuffle = true;
        let inst = generate_instance(&spec).unwrap();
        let t = TruthRecord::new(&spec, &inst);
        let path = dir.path().join("truth.json");
        t.save_json(&path).unwrap();
        assert_eq!(TruthRecord::load_json(&path).unwrap(), t);
    }
}
