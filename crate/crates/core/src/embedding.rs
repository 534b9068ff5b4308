//! In-memory embedding dataset model.
//!
//! Vectors are held at 32-bit precision (the on-disk width) and widened to
//! `f64` wherever arithmetic happens.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source name reserved for real images.
pub const REAL_SOURCE: &str = "real";

/// Tolerance on vector norms for sets flagged as normalized.
pub const NORM_TOLERANCE: f64 = 1e-5;

const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub fn to_byte(self) -> u8 {
        match self {
            Label::Real => 0,
            Label::Fake => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Label::Real),
            1 => Some(Label::Fake),
            _ => None,
        }
    }

    /// Class index in a logit pair: 0 = real, 1 = fake.
    pub fn index(self) -> usize {
        self.to_byte() as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Fake => "fake",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" | "0" => Ok(Label::Real),
            "fake" | "1" => Ok(Label::Fake),
            other => Err(Error::InvalidConfig(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    /// Generator name, or [`REAL_SOURCE`] for real images.
    pub source: String,
    pub label: Label,
    pub vector: Vec<f32>,
}

impl EmbeddingRecord {
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        label: Label,
        vector: Vec<f32>,
    ) -> Self {
        Self {
            id: id.into(),
            source: source.into(),
            label,
            vector,
        }
    }

    pub fn real(id: impl Into<String>, vector: Vec<f32>) -> Self {
        Self::new(id, REAL_SOURCE, Label::Real, vector)
    }

    pub fn fake(id: impl Into<String>, source: impl Into<String>, vector: Vec<f32>) -> Self {
        Self::new(id, source, Label::Fake, vector)
    }

    pub fn vector_f64(&self) -> Vec<f64> {
        self.vector.iter().map(|&x| x as f64).collect()
    }

    /// Checks the per-record invariants against a declared dimension.
    pub fn check(&self, dimension: usize, normalized: bool) -> std::result::Result<(), String> {
        if self.vector.len() != dimension {
            return Err(format!(
                "vector length {} does not match dimension {dimension}",
                self.vector.len()
            ));
        }
        if let Some(pos) = self.vector.iter().position(|x| !x.is_finite()) {
            return Err(format!("component {pos} is not finite"));
        }
        match self.label {
            Label::Real if self.source != REAL_SOURCE => {
                return Err(format!("real record has source {:?}", self.source))
            }
            Label::Fake if self.source == REAL_SOURCE => {
                return Err("fake record uses the reserved source \"real\"".to_string())
            }
            _ => {}
        }
        if normalized {
            let norm = norm_f32(&self.vector);
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(format!("norm {norm} in a normalized set"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub dimension: usize,
    pub backbone: String,
    pub layer: i64,
    pub normalized: bool,
    pub records: Vec<EmbeddingRecord>,
}

impl EmbeddingSet {
    pub fn new(
        dimension: usize,
        backbone: impl Into<String>,
        layer: i64,
        normalized: bool,
    ) -> Self {
        Self {
            dimension,
            backbone: backbone.into(),
            layer,
            normalized,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidHeader("dimension must be positive".into()));
        }
        let mut seen = HashSet::with_capacity(self.records.len());
        for r in &self.records {
            r.check(self.dimension, self.normalized)
                .map_err(|reason| Error::InvalidRecord {
                    id: r.id.clone(),
                    reason,
                })?;
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(())
    }

    /// Returns a copy with every vector L2-normalized (computed in `f64`).
    pub fn normalized_copy(&self) -> Result<EmbeddingSet> {
        let records = self
            .records
            .iter()
            .map(|r| {
                let unit = l2_normalize(&r.vector_f64())?;
                Ok(EmbeddingRecord {
                    vector: unit.iter().map(|&x| x as f32).collect(),
                    ..r.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EmbeddingSet {
            normalized: true,
            records,
            ..self.metadata_only()
        })
    }

    /// Same metadata, no records.
    pub fn metadata_only(&self) -> EmbeddingSet {
        EmbeddingSet::new(
            self.dimension,
            self.backbone.clone(),
            self.layer,
            self.normalized,
        )
    }

    /// Record count per source, sorted by source name.
    pub fn source_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.source.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// Distinct fake source names in lexicographic order.
    pub fn fake_sources(&self) -> Vec<String> {
        let mut sources: Vec<String> = self
            .records
            .iter()
            .filter(|r| r.label == Label::Fake)
            .map(|r| r.source.clone())
            .collect();
        sources.sort();
        sources.dedup();
        sources
    }

    /// Records whose ids satisfy `keep`, same metadata.
    pub fn filter(&self, mut keep: impl FnMut(&EmbeddingRecord) -> bool) -> EmbeddingSet {
        EmbeddingSet {
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
            ..self.metadata_only()
        }
    }
}

fn norm_f32(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| (x as f64) * (x as f64))
        .sum::<f64>()
        .sqrt()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales `vector` to unit Euclidean norm.
pub fn l2_normalize(vector: &[f64]) -> Result<Vec<f64>> {
    if vector.iter().any(|x| !x.is_finite()) {
        return Err(Error::non_finite("vector to normalize"));
    }
    let norm = l2_norm(vector);
    if norm < ZERO_NORM {
        return Err(Error::ZeroVector { norm });
    }
    Ok(vector.iter().map(|x| x / norm).collect())
}

/// Concatenates sets sharing dimension, backbone and layer.
pub fn merge(sets: &[EmbeddingSet]) -> Result<EmbeddingSet> {
    let first = sets.first().ok_or(Error::EmptyInput)?;
    let mut out = first.metadata_only();
    out.normalized = sets.iter().all(|s| s.normalized);
    let mut seen = HashSet::new();
    for set in sets {
        if set.dimension != first.dimension {
            return Err(Error::MetadataMismatch(format!(
                "dimension {} vs {}",
                first.dimension, set.dimension
            )));
        }
        if set.backbone != first.backbone {
            return Err(Error::MetadataMismatch(format!(
                "backbone {:?} vs {:?}",
                first.backbone, set.backbone
            )));
        }
        if set.layer != first.layer {
            return Err(Error::MetadataMismatch(format!(
                "layer {} vs {}",
                first.layer, set.layer
            )));
        }
        for r in &set.records {
            if !seen.insert(r.id.clone()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
            out.records.push(r.clone());
        }
    }
    Ok(out)
}
