//! Metrics and evaluation reports.
//!
//! Per-source accuracy pairs one generator's fakes with a real pool. By
//! default every real query joins every source's pool ([`RealPool::Shared`]).
//! With [`RealPool::ByIdPrefix`], a real record whose id starts with
//! `"<source>/"` is counted only for that source, which lets a single file
//! carry generator-specific real partitions.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{build_cache, sample_support, CacheModel, KeyMode};
use crate::embedding::{EmbeddingSet, Label};
use crate::error::{Error, Result};
use crate::finetune::{finetune, AdamWConfig};
use crate::inference::{batch_predict, Prediction};

fn check_lengths(preds: usize, truths: usize) -> Result<()> {
    if preds == 0 {
        return Err(Error::EmptyInput);
    }
    if preds != truths {
        return Err(Error::LengthMismatch {
            expected: truths,
            found: preds,
        });
    }
    Ok(())
}

pub fn accuracy(preds: &[Label], truths: &[Label]) -> Result<f64> {
    check_lengths(preds.len(), truths.len())?;
    let hits = preds.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// F1 of the fake class; 0 when precision and recall are both 0.
pub fn f1_score(preds: &[Label], truths: &[Label]) -> Result<f64> {
    check_lengths(preds.len(), truths.len())?;
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (p, t) in preds.iter().zip(truths) {
        match (p, t) {
            (Label::Fake, Label::Fake) => tp += 1,
            (Label::Fake, Label::Real) => fp += 1,
            (Label::Real, Label::Fake) => fnn += 1,
            (Label::Real, Label::Real) => {}
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fnn == 0 {
        0.0
    } else {
        tp as f64 / (tp + fnn) as f64
    };
    if precision + recall == 0.0 {
        Ok(0.0)
    } else {
        Ok(2.0 * precision * recall / (precision + recall))
    }
}

/// Non-interpolated AP of the fake class: mean precision at each positive's
/// rank, ranking by descending score with ties kept in input order.
pub fn average_precision(scores: &[f64], truths: &[Label]) -> Result<f64> {
    check_lengths(scores.len(), truths.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::non_finite("ranking scores"));
    }
    let positives = truths.iter().filter(|&&t| t == Label::Fake).count();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if truths[i] == Label::Fake {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "ftnet")]
    Ftnet,
    #[serde(rename = "ftnet-t")]
    FtnetT,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Ftnet => "ftnet",
            Variant::FtnetT => "ftnet-t",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ftnet" => Ok(Variant::Ftnet),
            "ftnet-t" | "ftnet_t" | "ftnett" => Ok(Variant::FtnetT),
            other => Err(Error::InvalidConfig(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RealPool {
    #[default]
    Shared,
    ByIdPrefix,
}

impl FromStr for RealPool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(RealPool::Shared),
            "by-id-prefix" => Ok(RealPool::ByIdPrefix),
            other => Err(Error::InvalidConfig(format!(
                "unknown real pool mode {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceScore {
    pub accuracy: f64,
    pub count: usize,
    pub fake_count: usize,
    pub real_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallScore {
    pub accuracy: f64,
    pub f1: f64,
    /// Absent when the query pool holds no fakes.
    pub average_precision: Option<f64>,
    /// Unweighted mean of per-source accuracies; absent without fake sources.
    #[serde(rename = "mAcc")]
    pub macc: Option<f64>,
    pub real_accuracy: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfigSummary {
    pub variant: Variant,
    pub k: usize,
    pub seed: u64,
    pub alpha: f64,
    pub backbone: String,
    pub layer: i64,
    pub cache_size: usize,
    pub real_pool: RealPool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finetune: Option<AdamWConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: RunConfigSummary,
    pub per_source: BTreeMap<String, SourceScore>,
    pub overall: OverallScore,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_unix_secs: Option<u64>,
}

impl EvalReport {
    /// mAcc recomputed from the per-source map.
    pub fn macc_from_sources(&self) -> Option<f64> {
        if self.per_source.is_empty() {
            return None;
        }
        let sum: f64 = self.per_source.values().map(|s| s.accuracy).sum();
        Some(sum / self.per_source.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalOptions {
    pub real_pool: RealPool,
    pub finetune: Option<AdamWConfig>,
}

pub fn evaluate(
    cache: &CacheModel,
    queries: &EmbeddingSet,
    variant: Variant,
) -> Result<EvalReport> {
    evaluate_with(cache, queries, variant, EvalOptions::default())
}

pub fn evaluate_with(
    cache: &CacheModel,
    queries: &EmbeddingSet,
    variant: Variant,
    options: EvalOptions,
) -> Result<EvalReport> {
    if queries.is_empty() {
        return Err(Error::EmptyInput);
    }
    let expected_mode = match variant {
        Variant::Ftnet => KeyMode::Normalized,
        Variant::FtnetT => KeyMode::Learned,
    };
    if cache.key_mode != expected_mode {
        return Err(Error::VariantMismatch {
            variant: variant.to_string(),
            keys: format!("{:?}", cache.key_mode).to_lowercase(),
        });
    }
    let preds = batch_predict(queries, cache)?;
    Ok(report_from_predictions(
        cache, queries, &preds, variant, options,
    ))
}

fn report_from_predictions(
    cache: &CacheModel,
    queries: &EmbeddingSet,
    preds: &[Prediction],
    variant: Variant,
    options: EvalOptions,
) -> EvalReport {
    let predicted: Vec<Label> = preds.iter().map(|p| p.label).collect();
    let truths: Vec<Label> = queries.records.iter().map(|r| r.label).collect();
    let scores: Vec<f64> = preds.iter().map(|p| p.logits.margin()).collect();

    let sources = queries.fake_sources();
    let mut per_source = BTreeMap::new();
    for source in &sources {
        let prefix = format!("{source}/");
        let (mut hits, mut fakes, mut reals) = (0usize, 0usize, 0usize);
        for (r, p) in queries.records.iter().zip(&predicted) {
            let member = match r.label {
                Label::Fake => &r.source == source,
                Label::Real => match options.real_pool {
                    RealPool::Shared => true,
                    RealPool::ByIdPrefix => r.id.starts_with(&prefix),
                },
            };
            if member {
                match r.label {
                    Label::Fake => fakes += 1,
                    Label::Real => reals += 1,
                }
                if *p == r.label {
                    hits += 1;
                }
            }
        }
        per_source.insert(
            source.clone(),
            SourceScore {
                accuracy: hits as f64 / (fakes + reals) as f64,
                count: fakes + reals,
                fake_count: fakes,
                real_count: reals,
            },
        );
    }

    let real_idx: Vec<usize> = (0..truths.len())
        .filter(|&i| truths[i] == Label::Real)
        .collect();
    let real_accuracy = (!real_idx.is_empty()).then(|| {
        real_idx
            .iter()
            .filter(|&&i| predicted[i] == Label::Real)
            .count() as f64
            / real_idx.len() as f64
    });

    let mut report = EvalReport {
        config: RunConfigSummary {
            variant,
            k: cache.metadata.k,
            seed: cache.metadata.seed,
            alpha: cache.alpha,
            backbone: cache.metadata.backbone.clone(),
            layer: cache.metadata.layer,
            cache_size: cache.len(),
            real_pool: options.real_pool,
            finetune: options.finetune,
        },
        per_source,
        overall: OverallScore {
            accuracy: accuracy(&predicted, &truths).unwrap_or(0.0),
            f1: f1_score(&predicted, &truths).unwrap_or(0.0),
            average_precision: average_precision(&scores, &truths).ok(),
            macc: None,
            real_accuracy,
            count: truths.len(),
        },
        generated_unix_secs: None,
    };
    report.overall.macc = report.macc_from_sources();
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub shots: Vec<usize>,
    pub alphas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
    pub finetune: AdamWConfig,
    pub real_pool: RealPool,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            shots: vec![1, 2, 4, 8, 16],
            alphas: vec![crate::cache::DEFAULT_ALPHA],
            seeds: (0..5).collect(),
            variants: vec![Variant::Ftnet],
            finetune: AdamWConfig::default(),
            real_pool: RealPool::Shared,
        }
    }
}

/// One report per (k, seed, alpha, variant), in that nesting order.
///
/// Without explicit `queries`, each grid point evaluates on the corpus
/// records not drawn into its support.
pub fn sweep(
    corpus: &EmbeddingSet,
    queries: Option<&EmbeddingSet>,
    grid: &SweepGrid,
) -> Result<Vec<EvalReport>> {
    if grid.shots.is_empty()
        || grid.alphas.is_empty()
        || grid.seeds.is_empty()
        || grid.variants.is_empty()
    {
        return Err(Error::InvalidConfig("sweep grid has an empty axis".into()));
    }
    let points: Vec<(usize, u64)> = grid
        .shots
        .iter()
        .flat_map(|&k| grid.seeds.iter().map(move |&s| (k, s)))
        .collect();
    let nested: Vec<Vec<EvalReport>> = points
        .par_iter()
        .map(|&(k, seed)| {
            let support = sample_support(corpus, k, seed)?;
            let held_out;
            let queries = match queries {
                Some(q) => q,
                None => {
                    let drawn: HashSet<&str> = support.ids().into_iter().collect();
                    held_out = corpus.filter(|r| !drawn.contains(r.id.as_str()));
                    &held_out
                }
            };
            let mut out = Vec::with_capacity(grid.alphas.len() * grid.variants.len());
            for &alpha in &grid.alphas {
                let cache = build_cache(&support, alpha)?;
                for &variant in &grid.variants {
                    let report = match variant {
                        Variant::Ftnet => evaluate_with(
                            &cache,
                            queries,
                            variant,
                            EvalOptions {
                                real_pool: grid.real_pool,
                                finetune: None,
                            },
                        )?,
                        Variant::FtnetT => {
                            let (tuned, _) = finetune(&cache, &support, grid.finetune)?;
                            evaluate_with(
                                &tuned,
                                queries,
                                variant,
                                EvalOptions {
                                    real_pool: grid.real_pool,
                                    finetune: Some(grid.finetune),
                                },
                            )?
                        }
                    };
                    out.push(report);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Flat CSV: one row per (report, source) plus one `all` row per report.
pub fn write_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record([
        "variant", "backbone", "layer", "k", "seed", "alpha", "source", "accuracy", "count", "f1",
        "ap", "macc",
    ])
    .map_err(io)?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in reports {
        let c = &r.config;
        let prefix = [
            c.variant.to_string(),
            c.backbone.clone(),
            c.layer.to_string(),
            c.k.to_string(),
            c.seed.to_string(),
            c.alpha.to_string(),
        ];
        for (source, s) in &r.per_source {
            let mut row = prefix.to_vec();
            row.extend([
                source.clone(),
                s.accuracy.to_string(),
                s.count.to_string(),
                String::new(),
                String::new(),
                String::new(),
            ]);
            w.write_record(&row).map_err(io)?;
        }
        let mut row = prefix.to_vec();
        row.extend([
            "all".to_string(),
            r.overall.accuracy.to_string(),
            r.overall.count.to_string(),
            r.overall.f1.to_string(),
            opt(r.overall.average_precision),
            opt(r.overall.macc),
        ]);
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Fake as F, Real as R};

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[F, R, F], &[F, R, F]).unwrap(), 1.0);
        assert_eq!(accuracy(&[F, R], &[R, R]).unwrap(), 0.5);
        assert!(matches!(accuracy(&[], &[]), Err(Error::EmptyInput)));
        assert!(matches!(
            accuracy(&[F], &[F, R]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_score(&[F, R], &[F, R]).unwrap(), 1.0);
        // TP, FP, FN one each
        assert_eq!(f1_score(&[F, F, R], &[F, R, F]).unwrap(), 0.5);
        assert_eq!(f1_score(&[R, R], &[R, R]).unwrap(), 0.0);
        assert_eq!(f1_score(&[R, R], &[F, F]).unwrap(), 0.0);
    }

    #[test]
    fn ap_examples() {
        assert_eq!(
            average_precision(&[0.9, 0.8, 0.1, 0.0], &[F, F, R, R]).unwrap(),
            1.0
        );
        let ap = average_precision(&[0.9, 0.8, 0.7], &[F, R, F]).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
        assert!(matches!(
            average_precision(&[0.1], &[R]),
            Err(Error::NoPositives)
        ));
        // ties keep input order
        assert_eq!(average_precision(&[0.5, 0.5], &[F, R]).unwrap(), 1.0);
        assert_eq!(average_precision(&[0.5, 0.5], &[R, F]).unwrap(), 0.5);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("ftnet".parse::<Variant>().unwrap(), Variant::Ftnet);
        assert_eq!("FTNet-T".parse::<Variant>().unwrap(), Variant::FtnetT);
        assert!("nope".parse::<Variant>().is_err());
        assert_eq!(
            serde_json::to_string(&Variant::FtnetT).unwrap(),
            "\"ftnet-t\""
        );
    }
}
