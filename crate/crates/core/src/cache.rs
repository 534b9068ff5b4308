//! Key-value cache construction from a k-shot support sample.
//!
//! Sampling draws from one [`SplitMix64`] stream seeded with the caller's
//! seed, in this fixed order:
//!
//! 1. shuffle the indices of all real records (corpus order, then Fisher–Yates);
//! 2. for each fake source in lexicographic order, shuffle that source's
//!    indices and keep the first `min(k, available)`.
//!
//! Real shots are then dealt from the shuffled real pool, `k` per fake
//! source in the same lexicographic order, without replacement. The support
//! lists each source's fakes followed by the reals dealt to it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{l2_normalize, EmbeddingRecord, EmbeddingSet, Label, REAL_SOURCE};
use crate::error::{Error, Result};
use crate::format::{self, CacheHeader};
use crate::matrix::Matrix;
use crate::rng::{shuffle, SplitMix64};

/// Activation sharpness used unless overridden.
pub const DEFAULT_ALPHA: f64 = 15.0;

pub fn one_hot(label: Label) -> [f64; 2] {
    match label {
        Label::Real => [1.0, 0.0],
        Label::Fake => [0.0, 1.0],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    pub records: Vec<EmbeddingRecord>,
    pub shots_per_source: usize,
    pub seed: u64,
    /// Fake sources included, lexicographic.
    pub sources: Vec<String>,
    /// Sources (including `"real"`) that supplied fewer than `k` per draw,
    /// mapped to the number actually taken.
    pub shortfall: BTreeMap<String, usize>,
    pub dimension: usize,
    pub backbone: String,
    pub layer: i64,
}

impl SupportSet {
    pub fn ids(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.id.as_str()).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    pub fn to_embedding_set(&self, normalized: bool) -> EmbeddingSet {
        EmbeddingSet {
            dimension: self.dimension,
            backbone: self.backbone.clone(),
            layer: self.layer,
            normalized,
            records: self.records.clone(),
        }
    }

    /// Wraps an existing set (e.g. a support file written earlier).
    pub fn from_embedding_set(set: &EmbeddingSet, k: usize, seed: u64) -> Self {
        SupportSet {
            records: set.records.clone(),
            shots_per_source: k,
            seed,
            sources: set.fake_sources(),
            shortfall: BTreeMap::new(),
            dimension: set.dimension,
            backbone: set.backbone.clone(),
            layer: set.layer,
        }
    }
}

pub fn sample_support(corpus: &EmbeddingSet, k: usize, seed: u64) -> Result<SupportSet> {
    if k == 0 {
        return Err(Error::ZeroShots);
    }
    let mut real_pool: Vec<usize> = Vec::new();
    let mut by_source: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in corpus.records.iter().enumerate() {
        match r.label {
            Label::Real => real_pool.push(i),
            Label::Fake => by_source.entry(r.source.as_str()).or_default().push(i),
        }
    }
    if real_pool.is_empty() {
        return Err(Error::NoRealRecords);
    }
    if by_source.is_empty() {
        return Err(Error::NoFakeRecords);
    }

    let mut rng = SplitMix64::new(seed);
    shuffle(&mut real_pool, &mut rng);
    let mut fake_picks: Vec<(&str, Vec<usize>)> = Vec::with_capacity(by_source.len());
    for (source, mut idx) in by_source {
        shuffle(&mut idx, &mut rng);
        idx.truncate(k);
        fake_picks.push((source, idx));
    }

    let mut shortfall = BTreeMap::new();
    let mut records = Vec::new();
    let mut reals = real_pool.into_iter();
    let mut real_taken = 0usize;
    for (source, picks) in &fake_picks {
        if picks.len() < k {
            shortfall.insert(source.to_string(), picks.len());
        }
        records.extend(picks.iter().map(|&i| corpus.records[i].clone()));
        for i in reals.by_ref().take(k) {
            records.push(corpus.records[i].clone());
            real_taken += 1;
        }
    }
    if real_taken < k * fake_picks.len() {
        shortfall.insert(REAL_SOURCE.to_string(), real_taken);
    }

    Ok(SupportSet {
        records,
        shots_per_source: k,
        seed,
        sources: fake_picks.iter().map(|(s, _)| s.to_string()).collect(),
        shortfall,
        dimension: corpus.dimension,
        backbone: corpus.backbone.clone(),
        layer: corpus.layer,
    })
}

/// How cache keys relate to the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyMode {
    /// Unit-norm keys; similarities are cosines and get clamped to [-1, 1].
    Normalized,
    /// Keys learned by fine-tuning; raw dot products, no clamping.
    Learned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildMetadata {
    pub seed: u64,
    pub k: usize,
    pub backbone: String,
    pub layer: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheModel {
    /// Feature bank, one key per row (N × D).
    pub keys: Matrix,
    /// Label bank, one one-hot row per key (N × 2).
    pub values: Vec<[f64; 2]>,
    pub entry_ids: Vec<String>,
    pub entry_sources: Vec<String>,
    pub alpha: f64,
    pub key_mode: KeyMode,
    pub metadata: BuildMetadata,
}

impl CacheModel {
    pub fn len(&self) -> usize {
        self.keys.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.rows() == 0
    }

    pub fn dimension(&self) -> usize {
        self.keys.cols()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.values
            .iter()
            .map(|v| {
                if v[1] == 1.0 {
                    Label::Fake
                } else {
                    Label::Real
                }
            })
            .collect()
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        self.alpha = alpha;
        Ok(self)
    }

    /// Serializable view: keys become record vectors (rounded to f32).
    pub fn to_embedding_set(&self) -> EmbeddingSet {
        let records = self
            .labels()
            .into_iter()
            .enumerate()
            .map(|(i, label)| EmbeddingRecord {
                id: self.entry_ids[i].clone(),
                source: self.entry_sources[i].clone(),
                label,
                vector: self.keys.row(i).iter().map(|&x| x as f32).collect(),
            })
            .collect();
        EmbeddingSet {
            dimension: self.dimension(),
            backbone: self.metadata.backbone.clone(),
            layer: self.metadata.layer,
            normalized: self.key_mode == KeyMode::Normalized,
            records,
        }
    }

    pub fn header(&self) -> CacheHeader {
        CacheHeader {
            alpha: self.alpha,
            k: self.metadata.k,
            seed: self.metadata.seed,
        }
    }

    /// Rebuilds a cache from a persisted container. Keys are taken as stored.
    pub fn from_embedding_set(set: &EmbeddingSet, header: CacheHeader) -> Result<Self> {
        check_alpha(header.alpha)?;
        if set.is_empty() {
            return Err(Error::EmptyCache);
        }
        let mut keys = Matrix::zeros(set.len(), set.dimension);
        for (i, r) in set.records.iter().enumerate() {
            for (dst, &x) in keys.row_mut(i).iter_mut().zip(&r.vector) {
                *dst = x as f64;
            }
        }
        Ok(CacheModel {
            keys,
            values: set.records.iter().map(|r| one_hot(r.label)).collect(),
            entry_ids: set.records.iter().map(|r| r.id.clone()).collect(),
            entry_sources: set.records.iter().map(|r| r.source.clone()).collect(),
            alpha: header.alpha,
            key_mode: if set.normalized {
                KeyMode::Normalized
            } else {
                KeyMode::Learned
            },
            metadata: BuildMetadata {
                seed: header.seed,
                k: header.k,
                backbone: set.backbone.clone(),
                layer: set.layer,
            },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        format::write_with_cache_header(&self.to_embedding_set(), Some(self.header()), path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (set, header) = format::read_with_cache_header(path)?;
        let header = header
            .ok_or_else(|| Error::InvalidHeader("file has no \"cache\" header field".into()))?;
        Self::from_embedding_set(&set, header)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveAlpha(alpha))
    }
}

pub fn build_cache(support: &SupportSet, alpha: f64) -> Result<CacheModel> {
    check_alpha(alpha)?;
    if support.records.is_empty() {
        return Err(Error::EmptySupport);
    }
    let mut keys = Matrix::zeros(support.records.len(), support.dimension);
    for (i, r) in support.records.iter().enumerate() {
        if r.vector.len() != support.dimension {
            return Err(Error::DimensionMismatch {
                expected: support.dimension,
                found: r.vector.len(),
            });
        }
        keys.row_mut(i)
            .copy_from_slice(&l2_normalize(&r.vector_f64())?);
    }
    Ok(CacheModel {
        keys,
        values: support.records.iter().map(|r| one_hot(r.label)).collect(),
        entry_ids: support.records.iter().map(|r| r.id.clone()).collect(),
        entry_sources: support.records.iter().map(|r| r.source.clone()).collect(),
        alpha,
        key_mode: KeyMode::Normalized,
        metadata: BuildMetadata {
            seed: support.seed,
            k: support.shots_per_source,
            backbone: support.backbone.clone(),
            layer: support.layer,
        },
    })
}
