//! Training-free classification against a [`CacheModel`].
//!
//! A query is scored by its similarity to every cached key, each similarity
//! is turned into a positive weight `exp(-alpha * (1 - s))`, and the weights
//! are summed per class through the one-hot label bank.

use rayon::prelude::*;
use serde::Serialize;

use crate::cache::{check_alpha, CacheModel, KeyMode};
use crate::embedding::{l2_norm, l2_normalize, EmbeddingSet, Label, NORM_TOLERANCE};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffinityStats {
    pub max_similarity: f64,
    pub argmax_entry_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Logits {
    /// `[real, fake]`.
    pub values: [f64; 2],
    pub affinity_stats: AffinityStats,
}

impl Logits {
    pub fn real(&self) -> f64 {
        self.values[0]
    }

    pub fn fake(&self) -> f64 {
        self.values[1]
    }

    /// Ranking score for AP: fake logit minus real logit.
    pub fn margin(&self) -> f64 {
        self.values[1] - self.values[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub logits: Logits,
    pub tie_broken: bool,
}

impl Prediction {
    /// Argmax over the two logits; an exact tie resolves to real.
    pub fn from_logits(logits: Logits) -> Self {
        let [real, fake] = logits.values;
        Prediction {
            label: if fake > real {
                Label::Fake
            } else {
                Label::Real
            },
            logits,
            tie_broken: fake == real,
        }
    }
}

fn check_unit(f: &[f64]) -> Result<()> {
    let norm = l2_norm(f);
    if (norm - 1.0).abs() > NORM_TOLERANCE || !norm.is_finite() {
        return Err(Error::NotNormalized { norm });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity of a unit query against every unit-norm row of `keys`,
/// clamped to `[-1, 1]`.
pub fn affinity(f_test: &[f64], keys: &Matrix) -> Result<Vec<f64>> {
    if f_test.len() != keys.cols() {
        return Err(Error::DimensionMismatch {
            expected: keys.cols(),
            found: f_test.len(),
        });
    }
    check_unit(f_test)?;
    Ok((0..keys.rows())
        .map(|i| dot(f_test, keys.row(i)).clamp(-1.0, 1.0))
        .collect())
}

/// Raw dot products against learned keys (no clamping).
fn learned_affinity(f_test: &[f64], keys: &Matrix) -> Result<Vec<f64>> {
    if f_test.len() != keys.cols() {
        return Err(Error::DimensionMismatch {
            expected: keys.cols(),
            found: f_test.len(),
        });
    }
    check_unit(f_test)?;
    Ok((0..keys.rows()).map(|i| dot(f_test, keys.row(i))).collect())
}

pub fn activate(similarities: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    Ok(similarities
        .iter()
        .map(|&s| (-alpha * (1.0 - s)).exp())
        .collect())
}

/// `weightsᵀ · values`, with affinity stats left for the caller to fill.
pub fn aggregate(weights: &[f64], values: &[[f64; 2]]) -> Result<[f64; 2]> {
    if weights.len() != values.len() {
        return Err(Error::LengthMismatch {
            expected: values.len(),
            found: weights.len(),
        });
    }
    let mut out = [0.0; 2];
    for (w, v) in weights.iter().zip(values) {
        out[0] += w * v[0];
        out[1] += w * v[1];
    }
    Ok(out)
}

fn stats(similarities: &[f64]) -> AffinityStats {
    let mut best = AffinityStats {
        max_similarity: f64::NEG_INFINITY,
        argmax_entry_index: 0,
    };
    for (i, &s) in similarities.iter().enumerate() {
        if s > best.max_similarity {
            best = AffinityStats {
                max_similarity: s,
                argmax_entry_index: i,
            };
        }
    }
    best
}

/// Activation plus aggregation over precomputed similarities.
pub fn logits_from_similarities(
    similarities: &[f64],
    values: &[[f64; 2]],
    alpha: f64,
) -> Result<Logits> {
    let weights = activate(similarities, alpha)?;
    let values = aggregate(&weights, values)?;
    if !values.iter().all(|x| x.is_finite()) {
        return Err(Error::non_finite("logits"));
    }
    Ok(Logits {
        values,
        affinity_stats: stats(similarities),
    })
}

/// Similarities of a unit query to every cache key, per the cache's key mode.
pub fn cache_affinity(f_test: &[f64], cache: &CacheModel) -> Result<Vec<f64>> {
    match cache.key_mode {
        KeyMode::Normalized => affinity(f_test, &cache.keys),
        KeyMode::Learned => learned_affinity(f_test, &cache.keys),
    }
}

pub fn logits(f_test: &[f64], cache: &CacheModel) -> Result<Logits> {
    if cache.is_empty() {
        return Err(Error::EmptyCache);
    }
    let sims = cache_affinity(f_test, cache)?;
    logits_from_similarities(&sims, &cache.values, cache.alpha)
}

pub fn predict(f_test: &[f64], cache: &CacheModel) -> Result<Prediction> {
    logits(f_test, cache).map(Prediction::from_logits)
}

/// Predicts every query in order. Query vectors are re-normalized in `f64`.
pub fn batch_predict(queries: &EmbeddingSet, cache: &CacheModel) -> Result<Vec<Prediction>> {
    if cache.is_empty() {
        return Err(Error::EmptyCache);
    }
    if queries.dimension != cache.dimension() {
        return Err(Error::DimensionMismatch {
            expected: cache.dimension(),
            found: queries.dimension,
        });
    }
    queries
        .records
        .par_iter()
        .map(|r| predict(&l2_normalize(&r.vector_f64())?, cache))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::{build_cache, SupportSet};
    use crate::embedding::EmbeddingRecord;
    use crate::rng::SplitMix64;

    fn unit(rng: &mut SplitMix64, d: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..d).map(|_| rng.next_gaussian()).collect();
        l2_normalize(&v).unwrap()
    }

    fn cache_of(rows: &[(Vec<f32>, Label)], alpha: f64) -> CacheModel {
        let d = rows[0].0.len();
        let mut set = EmbeddingSet::new(d, "t", 0, false);
        for (i, (v, l)) in rows.iter().enumerate() {
            set.records.push(match l {
                Label::Real => EmbeddingRecord::real(format!("e{i}"), v.clone()),
                Label::Fake => EmbeddingRecord::fake(format!("e{i}"), "gan", v.clone()),
            });
        }
        build_cache(&SupportSet::from_embedding_set(&set, 1, 0), alpha).unwrap()
    }

    #[test]
    fn affinity_self_and_orthogonal() {
        let keys = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        assert_eq!(affinity(&[0.0, 1.0, 0.0], &keys).unwrap(), vec![0.0, 1.0]);
        assert_eq!(affinity(&[0.0, 0.0, 1.0], &keys).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn affinity_matches_scalar_loop() {
        let mut rng = SplitMix64::new(11);
        let rows: Vec<Vec<f64>> = (0..8).map(|_| unit(&mut rng, 16)).collect();
        let keys = Matrix::from_rows(&rows);
        let q = unit(&mut rng, 16);
        let got = affinity(&q, &keys).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let mut s = 0.0;
            for d in 0..16 {
                s += q[d] * row[d];
            }
            assert!((got[i] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn affinity_errors() {
        let keys = Matrix::from_rows(&[vec![1.0, 0.0]]);
        assert!(matches!(
            affinity(&[1.0, 0.0, 0.0], &keys),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 3
            })
        ));
        assert!(matches!(
            affinity(&[2.0, 0.0], &keys),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn activation_values() {
        assert_eq!(activate(&[1.0], 15.0).unwrap(), vec![1.0]);
        // exp(-15) from a 40-digit reference evaluation
        let w = activate(&[0.0], 15.0).unwrap()[0];
        assert!((w - 3.059_023_205_018_258e-7).abs() < 1e-20);
        let w = activate(&[0.5, 1.0], 3.7).unwrap();
        assert!(w[0] < w[1]);
        assert!(matches!(
            activate(&[0.5], 0.0),
            Err(Error::NonPositiveAlpha(_))
        ));
        assert!(matches!(
            activate(&[0.5], -1.0),
            Err(Error::NonPositiveAlpha(_))
        ));
    }

    #[test]
    fn aggregate_examples() {
        let eye = [[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(aggregate(&[1.0, 1.0], &eye).unwrap(), [1.0, 1.0]);
        let fakes = [[0.0, 1.0], [0.0, 1.0]];
        assert_eq!(aggregate(&[0.25, 0.75], &fakes).unwrap(), [0.0, 1.0]);
        assert!(matches!(
            aggregate(&[1.0], &eye),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn aggregate_matches_scalar_loop() {
        let mut rng = SplitMix64::new(5);
        let weights: Vec<f64> = (0..32).map(|_| rng.next_f64()).collect();
        let values: Vec<[f64; 2]> = (0..32)
            .map(|_| {
                if rng.below(2) == 0 {
                    [1.0, 0.0]
                } else {
                    [0.0, 1.0]
                }
            })
            .collect();
        let got = aggregate(&weights, &values).unwrap();
        let (mut real, mut fake) = (0.0, 0.0);
        for i in 0..32 {
            if values[i][1] == 1.0 {
                fake += weights[i];
            } else {
                real += weights[i];
            }
        }
        assert!((got[0] - real).abs() < 1e-12 && (got[1] - fake).abs() < 1e-12);
    }

    #[test]
    fn exact_match_with_fake_entry_dominates() {
        // One fake key equal to the query, up to 999 real keys at similarity <= 0.
        for n in [2usize, 10, 100, 1000] {
            let d = n;
            let mut rows = Vec::new();
            let mut q = vec![0f32; d];
            q[0] = 1.0;
            rows.push((q.clone(), Label::Fake));
            for i in 1..n {
                let mut v = vec![0f32; d];
                v[i] = 1.0;
                rows.push((v, Label::Real));
            }
            let cache = cache_of(&rows, 15.0);
            let qf: Vec<f64> = q.iter().map(|&x| x as f64).collect();
            let p = predict(&qf, &cache).unwrap();
            assert_eq!(p.label, Label::Fake);
            assert!(p.logits.real() <= (n - 1) as f64 * (-15f64).exp() + 1e-15);
            assert_eq!(p.logits.fake(), 1.0);
            assert_eq!(p.logits.affinity_stats.argmax_entry_index, 0);
        }
    }

    #[test]
    fn symmetric_tie_goes_to_real() {
        let (c, s) = (0.6f32, 0.8f32);
        let cache = cache_of(
            &[(vec![c, s], Label::Real), (vec![c, -s], Label::Fake)],
            15.0,
        );
        let p = predict(&[1.0, 0.0], &cache).unwrap();
        assert_eq!(p.logits.real(), p.logits.fake());
        assert_eq!(p.label, Label::Real);
        assert!(p.tie_broken);

        let p = predict(&[0.0, 1.0], &cache).unwrap();
        assert_eq!(p.label, Label::Real);
        assert!(!p.tie_broken);
    }

    #[test]
    fn predict_errors() {
        let cache = cache_of(&[(vec![1.0, 0.0], Label::Real)], 15.0);
        assert!(matches!(
            predict(&[1.0, 0.0, 0.0], &cache),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut empty = cache.clone();
        empty.keys = Matrix::zeros(0, 2);
        empty.values.clear();
        assert!(matches!(
            predict(&[1.0, 0.0], &empty),
            Err(Error::EmptyCache)
        ));

        let q = EmbeddingSet::new(3, "t", 0, true);
        assert!(matches!(
            batch_predict(&q, &cache),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 3
            })
        ));
    }

    #[test]
    fn learned_keys_are_not_clamped() {
        let mut cache = cache_of(&[(vec![1.0, 0.0], Label::Fake)], 1.0);
        cache.key_mode = KeyMode::Learned;
        cache.keys.set(0, 0, 2.0);
        let l = logits(&[1.0, 0.0], &cache).unwrap();
        assert_eq!(l.affinity_stats.max_similarity, 2.0);
        assert!((l.fake() - 1f64.exp()).abs() < 1e-15);

        cache.keys.set(0, 0, 1e4);
        assert!(matches!(
            logits(&[1.0, 0.0], &cache),
            Err(Error::NonFinite { .. })
        ));
    }
}
