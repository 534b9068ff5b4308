//! Synthetic embedding worlds and brute-force reference classifiers.
//!
//! Each cluster draws vectors `normalize(mean + noise / concentration)` with
//! `noise ~ N(0, I)` from the crate's [`SplitMix64`] stream. Clusters are
//! generated in order (real first, then fake sources as listed), each
//! emitting its support pool followed by its query pool, one gaussian per
//! component. Record ids are `pool/<source>/<i>` and `query/<source>/<i>`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cache::{CacheModel, KeyMode};
use crate::embedding::{
    l2_normalize, EmbeddingRecord, EmbeddingSet, Label, NORM_TOLERANCE, REAL_SOURCE,
};
use crate::error::{Error, Result};
use crate::inference::{AffinityStats, Logits};
use crate::rng::SplitMix64;

pub const POOL_PREFIX: &str = "pool/";
pub const QUERY_PREFIX: &str = "query/";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub name: String,
    pub cluster_mean: Vec<f64>,
    pub concentration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub support_pool: usize,
    pub query_pool: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dimension: usize,
    pub sources: Vec<ClusterSpec>,
    pub real_cluster: ClusterSpec,
    pub counts: Counts,
    pub seed: u64,
}

/// Generator names used by the six-source preset.
pub const GENIMAGE6_SOURCES: [&str; 6] = ["adm", "biggan", "glide", "midjourney", "sdv14", "vqdm"];

impl SyntheticSpec {
    /// Real cluster plus one cluster per fake source, all means at pairwise
    /// cosine `similarity`: `mean_i = sqrt(s)·e_0 + sqrt(1 - s)·e_(i+1)`.
    pub fn equicorrelated(
        dimension: usize,
        fake_sources: &[&str],
        similarity: f64,
        concentration: f64,
        counts: Counts,
        seed: u64,
    ) -> Result<Self> {
        if fake_sources.len() + 2 > dimension {
            return Err(Error::InvalidSpec(format!(
                "dimension {dimension} too small for {} clusters",
                fake_sources.len() + 1
            )));
        }
        if !(0.0..=1.0).contains(&similarity) {
            return Err(Error::InvalidSpec(format!(
                "similarity {similarity} outside [0, 1]"
            )));
        }
        let mean = |axis: usize| {
            let mut m = vec![0.0; dimension];
            m[0] = similarity.sqrt();
            m[axis] = (1.0 - similarity).sqrt();
            m
        };
        let spec = SyntheticSpec {
            dimension,
            real_cluster: ClusterSpec {
                name: REAL_SOURCE.to_string(),
                cluster_mean: mean(1),
                concentration,
            },
            sources: fake_sources
                .iter()
                .enumerate()
                .map(|(i, name)| ClusterSpec {
                    name: name.to_string(),
                    cluster_mean: mean(i + 2),
                    concentration,
                })
                .collect(),
            counts,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Six fake sources plus real, D = 64, mean similarity 0.5, concentration 10.
    pub fn genimage6(seed: u64) -> Self {
        Self::equicorrelated(
            64,
            &GENIMAGE6_SOURCES,
            0.5,
            10.0,
            Counts {
                support_pool: 64,
                query_pool: 150,
            },
            seed,
        )
        .expect("preset is valid")
    }

    /// Well separated orthogonal clusters (two fake sources).
    pub fn separable(seed: u64) -> Self {
        Self::equicorrelated(
            16,
            &["gan", "diffusion"],
            0.0,
            50.0,
            Counts {
                support_pool: 16,
                query_pool: 100,
            },
            seed,
        )
        .expect("preset is valid")
    }

    /// The six-source geometry with heavily overlapping clusters (mean similarity 0.8).
    pub fn overlapping(seed: u64) -> Self {
        Self::equicorrelated(
            64,
            &GENIMAGE6_SOURCES,
            0.8,
            10.0,
            Counts {
                support_pool: 64,
                query_pool: 150,
            },
            seed,
        )
        .expect("preset is valid")
    }

    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        match name {
            "genimage6" => Ok(Self::genimage6(seed)),
            "separable" => Ok(Self::separable(seed)),
            "overlapping" => Ok(Self::overlapping(seed)),
            other => Err(Error::InvalidSpec(format!(
                "unknown preset {other:?} (expected genimage6, separable or overlapping)"
            ))),
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let spec: SyntheticSpec =
            serde_json::from_str(&text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidSpec("dimension must be positive".into()));
        }
        if self.sources.is_empty() {
            return Err(Error::InvalidSpec(
                "at least one fake source required".into(),
            ));
        }
        if self.counts.support_pool == 0 || self.counts.query_pool == 0 {
            return Err(Error::InvalidSpec("counts must be at least 1".into()));
        }
        if self.real_cluster.name != REAL_SOURCE {
            return Err(Error::InvalidSpec(
                "real cluster must be named \"real\"".into(),
            ));
        }
        let mut names = std::collections::HashSet::new();
        for c in std::iter::once(&self.real_cluster).chain(&self.sources) {
            if c.name.is_empty() || c.name.contains('/') {
                return Err(Error::InvalidSpec(format!("bad cluster name {:?}", c.name)));
            }
            if !names.insert(c.name.as_str()) {
                return Err(Error::InvalidSpec(format!(
                    "duplicate cluster {:?}",
                    c.name
                )));
            }
            if c.cluster_mean.len() != self.dimension {
                return Err(Error::InvalidSpec(format!(
                    "cluster {:?} mean has length {}",
                    c.name,
                    c.cluster_mean.len()
                )));
            }
            let norm = c.cluster_mean.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::InvalidSpec(format!(
                    "cluster {:?} mean has norm {norm}",
                    c.name
                )));
            }
            if c.concentration.is_nan() || c.concentration <= 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "cluster {:?} concentration must be positive",
                    c.name
                )));
            }
        }
        Ok(())
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<EmbeddingSet> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let mut set = EmbeddingSet::new(spec.dimension, "synthetic", 0, true);
    let clusters = std::iter::once((&spec.real_cluster, Label::Real))
        .chain(spec.sources.iter().map(|c| (c, Label::Fake)));
    for (cluster, label) in clusters {
        for (prefix, n) in [
            (POOL_PREFIX, spec.counts.support_pool),
            (QUERY_PREFIX, spec.counts.query_pool),
        ] {
            for i in 0..n {
                let raw: Vec<f64> = cluster
                    .cluster_mean
                    .iter()
                    .map(|&m| m + rng.next_gaussian() / cluster.concentration)
                    .collect();
                let v = l2_normalize(&raw)?;
                set.records.push(EmbeddingRecord::new(
                    format!("{prefix}{}/{i}", cluster.name),
                    cluster.name.clone(),
                    label,
                    v.iter().map(|&x| x as f32).collect(),
                ));
            }
        }
    }
    Ok(set)
}

/// Splits a generated world into its support pool and query pool.
pub fn split_pools(set: &EmbeddingSet) -> (EmbeddingSet, EmbeddingSet) {
    (
        set.filter(|r| r.id.starts_with(POOL_PREFIX)),
        set.filter(|r| r.id.starts_with(QUERY_PREFIX)),
    )
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

fn compensated_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = CompensatedSum::default();
    for i in 0..a.len() {
        acc.add(a[i] * b[i]);
    }
    acc.value()
}

/// Majority label among the `k` most cosine-similar support records for each
/// query. Exhaustive scan; equal similarities keep support order.
pub fn knn_oracle(support: &EmbeddingSet, queries: &EmbeddingSet, k: usize) -> Result<Vec<Label>> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "k must be odd and positive, got {k}"
        )));
    }
    if support.dimension != queries.dimension {
        return Err(Error::DimensionMismatch {
            expected: support.dimension,
            found: queries.dimension,
        });
    }
    let keys: Vec<(Vec<f64>, f64, Label)> = support
        .records
        .iter()
        .map(|r| {
            let v = r.vector_f64();
            let n = compensated_dot(&v, &v).sqrt();
            (v, n, r.label)
        })
        .collect();
    let mut out = Vec::with_capacity(queries.len());
    for q in &queries.records {
        let qv = q.vector_f64();
        let qn = compensated_dot(&qv, &qv).sqrt();
        let mut scored: Vec<(f64, usize)> = keys
            .iter()
            .enumerate()
            .map(|(i, (v, n, _))| (compensated_dot(&qv, v) / (qn * n), i))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let fakes = scored
            .iter()
            .take(k.min(scored.len()))
            .filter(|(_, i)| keys[*i].2 == Label::Fake)
            .count();
        let taken = k.min(scored.len());
        out.push(if 2 * fakes > taken {
            Label::Fake
        } else {
            Label::Real
        });
    }
    Ok(out)
}

/// Scalar-loop recomputation of the cache classifier's logits with
/// compensated sums and explicit cosine normalization.
pub fn exact_logits_oracle(query: &[f64], cache: &CacheModel) -> Result<Logits> {
    if cache.is_empty() {
        return Err(Error::EmptyCache);
    }
    if query.len() != cache.dimension() {
        return Err(Error::DimensionMismatch {
            expected: cache.dimension(),
            found: query.len(),
        });
    }
    if cache.alpha.is_nan() || cache.alpha <= 0.0 {
        return Err(Error::NonPositiveAlpha(cache.alpha));
    }
    let qn = compensated_dot(query, query).sqrt();
    if (qn - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NotNormalized { norm: qn });
    }
    let mut real = CompensatedSum::default();
    let mut fake = CompensatedSum::default();
    let mut best = AffinityStats {
        max_similarity: f64::NEG_INFINITY,
        argmax_entry_index: 0,
    };
    for i in 0..cache.len() {
        let key = cache.keys.row(i);
        let s = match cache.key_mode {
            KeyMode::Normalized => {
                let kn = compensated_dot(key, key).sqrt();
                let cos = compensated_dot(query, key) / (qn * kn);
                cos.clamp(-1.0, 1.0)
            }
            KeyMode::Learned => compensated_dot(query, key),
        };
        if s > best.max_similarity {
            best = AffinityStats {
                max_similarity: s,
                argmax_entry_index: i,
            };
        }
        let w = (-cache.alpha * (1.0 - s)).exp();
        real.add(w * cache.values[i][0]);
        fake.add(w * cache.values[i][1]);
    }
    let values = [real.value(), fake.value()];
    if !values.iter().all(|x| x.is_finite()) {
        return Err(Error::non_finite("oracle logits"));
    }
    Ok(Logits {
        values,
        affinity_stats: best,
    })
}
