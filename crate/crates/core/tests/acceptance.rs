//! Exit criteria for the cache classifier. Every criterion runs on synthetic
//! inputs and prints one PASS/FAIL line; the test fails if any criterion does.

use std::collections::HashSet;
use std::path::PathBuf;
use std::time::Instant;

use fscache::eval::{accuracy, average_precision, f1_score};
use fscache::format::{decode, encode};
use fscache::synthetic::split_pools;
use fscache::{
    batch_predict, build_cache, evaluate, exact_logits_oracle, finetune, generate, init_adapter,
    knn_oracle, l2_normalize, loss_and_grad, sample_support, sweep, AdamWConfig, CacheModel,
    EmbeddingRecord, EmbeddingSet, Error, Label, SplitMix64, SupportSet, SweepGrid, SyntheticSpec,
    Variant,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn unit(rng: &mut SplitMix64, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.next_gaussian()).collect();
        if let Ok(u) = l2_normalize(&v) {
            return u;
        }
    }
}

fn random_cache(rng: &mut SplitMix64, n: usize, d: usize, alpha: f64) -> CacheModel {
    let mut set = EmbeddingSet::new(d, "random", 0, false);
    for i in 0..n {
        let v: Vec<f32> = unit(rng, d).iter().map(|&x| x as f32).collect();
        set.records.push(if rng.below(2) == 0 {
            EmbeddingRecord::real(format!("e{i}"), v)
        } else {
            EmbeddingRecord::fake(format!("e{i}"), "gen", v)
        });
    }
    build_cache(&SupportSet::from_embedding_set(&set, 1, 0), alpha).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0xACCE_0001);
    let mut worst = 0.0f64;
    for case in 0..10_000 {
        let n = 1 + rng.below(256) as usize;
        let d = 2 + rng.below(63) as usize;
        let alpha = 1.0 + 99.0 * rng.next_f64();
        let cache = random_cache(&mut rng, n, d, alpha);
        // half the queries sit near a cached key so logits are not all tiny
        let query = if case % 2 == 0 {
            unit(&mut rng, d)
        } else {
            let j = rng.below(n as u64) as usize;
            let noisy: Vec<f64> = cache
                .keys
                .row(j)
                .iter()
                .map(|&x| x + 0.1 * rng.next_gaussian())
                .collect();
            l2_normalize(&noisy).unwrap()
        };
        let got = fscache::inference::logits(&query, &cache).map_err(|e| e.to_string())?;
        let want = exact_logits_oracle(&query, &cache).map_err(|e| e.to_string())?;
        for c in 0..2 {
            worst = worst.max(rel_err(got.values[c], want.values[c]));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("10000 cases, max rel diff {worst:.3e}, {secs:.2}s");
    if worst < 1e-9 && secs < 30.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn alpha_limit_knn() -> Outcome {
    let world = generate(&SyntheticSpec::genimage6(0)).unwrap();
    let (pool, queries) = split_pools(&world);
    let mut order: Vec<usize> = (0..queries.len()).collect();
    fscache::rng::shuffle(&mut order, &mut SplitMix64::new(1));
    order.truncate(1000);
    order.sort_unstable();
    let queries = EmbeddingSet {
        records: order.iter().map(|&i| queries.records[i].clone()).collect(),
        ..queries.metadata_only()
    };

    let support = sample_support(&pool, 4, 0).unwrap();
    let cache = build_cache(&support, 100.0).unwrap();
    let preds = batch_predict(&queries, &cache).unwrap();
    let nn = knn_oracle(&support.to_embedding_set(true), &queries, 1).unwrap();
    let agree = preds
        .iter()
        .zip(&nn)
        .filter(|(p, l)| p.label == **l)
        .count();
    let rate = agree as f64 / queries.len() as f64;
    let detail = format!(
        "{agree}/{} agree with 1-NN ({:.2}%)",
        queries.len(),
        100.0 * rate
    );
    if queries.len() == 1000 && rate >= 0.99 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradient_check() -> Outcome {
    let mut rng = SplitMix64::new(0xACCE_0003);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let instances = 25;
    for _ in 0..instances {
        let d = 2 + rng.below(15) as usize;
        let n = 1 + rng.below(8) as usize;
        let b = 1 + rng.below(8) as usize;
        let alpha = 1.0 + 14.0 * rng.next_f64();
        let cache = random_cache(&mut rng, n, d, alpha);
        let mut w = cache.keys.transpose();
        w.as_mut_slice()
            .iter_mut()
            .for_each(|x| *x += 0.3 * rng.next_gaussian());
        let batch: Vec<(Vec<f64>, Label)> = (0..b)
            .map(|_| {
                (
                    unit(&mut rng, d),
                    if rng.below(2) == 0 {
                        Label::Real
                    } else {
                        Label::Fake
                    },
                )
            })
            .collect();
        let (_, grad) = loss_and_grad(&batch, &w, &cache.values, alpha).unwrap();
        for i in 0..w.as_slice().len() {
            let mut plus = w.clone();
            plus.as_mut_slice()[i] += h;
            let mut minus = w.clone();
            minus.as_mut_slice()[i] -= h;
            let lp = loss_and_grad(&batch, &plus, &cache.values, alpha)
                .unwrap()
                .0;
            let lm = loss_and_grad(&batch, &minus, &cache.values, alpha)
                .unwrap()
                .0;
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = grad.as_slice()[i];
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    let detail = format!("{instances} instances, max rel err {worst:.3e}");
    if worst < 1e-4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn initialization_equivalence() -> Outcome {
    let world = generate(&SyntheticSpec::genimage6(2)).unwrap();
    let (pool, _) = split_pools(&world);
    let cache = build_cache(&sample_support(&pool, 4, 2).unwrap(), 15.0).unwrap();
    let state = init_adapter(&cache, AdamWConfig::default()).unwrap();
    let mut rng = SplitMix64::new(0xACCE_0004);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let q = if i % 2 == 0 {
            unit(&mut rng, 64)
        } else {
            pool.records[i % pool.len()].vector_f64()
        };
        let q = l2_normalize(&q).unwrap();
        let a = fscache::inference::logits(&q, &cache).unwrap();
        let b = state.logits(&q, &cache.values).unwrap();
        for c in 0..2 {
            worst = worst.max((a.values[c] - b.values[c]).abs() / a.values[c].abs().max(1.0));
        }
    }
    let detail = format!("1000 queries, max diff {worst:.3e}");
    if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn finetune_efficacy() -> Outcome {
    let hyper = AdamWConfig::default();
    let mut notes = Vec::new();
    let mut ok = true;

    let world = generate(&SyntheticSpec::separable(0)).unwrap();
    let (pool, _) = split_pools(&world);
    let support = sample_support(&pool, 4, 0).unwrap();
    let cache = build_cache(&support, 15.0).unwrap();
    let (_, log) = finetune(&cache, &support, hyper).unwrap();
    ok &= log.epochs.len() == 20
        && log.final_support_accuracy == 1.0
        && log.final_loss < log.initial_loss();
    notes.push(format!(
        "separable: support acc {:.3}, loss {:.5} -> {:.5}",
        log.final_support_accuracy,
        log.initial_loss(),
        log.final_loss
    ));

    let (mut base, mut tuned) = (0.0, 0.0);
    for seed in 0..5u64 {
        let world = generate(&SyntheticSpec::overlapping(seed)).unwrap();
        let (pool, queries) = split_pools(&world);
        let support = sample_support(&pool, 4, seed).unwrap();
        let cache = build_cache(&support, 15.0).unwrap();
        let (t, _) = finetune(&cache, &support, hyper).unwrap();
        base += evaluate(&cache, &queries, Variant::Ftnet)
            .unwrap()
            .overall
            .accuracy
            / 5.0;
        tuned += evaluate(&t, &queries, Variant::FtnetT)
            .unwrap()
            .overall
            .accuracy
            / 5.0;
    }
    ok &= tuned >= base - 0.005;
    notes.push(format!(
        "overlapping: FTNet {:.4}, FTNet-T {:.4}",
        base, tuned
    ));
    let detail = notes.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_labels(rng: &mut SplitMix64, n: usize, p_fake: f64) -> Vec<Label> {
    (0..n)
        .map(|_| {
            if rng.next_f64() < p_fake {
                Label::Fake
            } else {
                Label::Real
            }
        })
        .collect()
}

fn brute_ap(scores: &[f64], truths: &[Label]) -> f64 {
    // precision at each positive, counting items ranked at or above it
    let positives = truths.iter().filter(|&&t| t == Label::Fake).count() as f64;
    let mut total = 0.0;
    for i in 0..scores.len() {
        if truths[i] != Label::Fake {
            continue;
        }
        let above = |j: usize| scores[j] > scores[i] || (scores[j] == scores[i] && j <= i);
        let rank = (0..scores.len()).filter(|&j| above(j)).count();
        let hits = (0..scores.len())
            .filter(|&j| above(j) && truths[j] == Label::Fake)
            .count();
        total += hits as f64 / rank as f64;
    }
    total / positives
}

fn metric_oracles() -> Outcome {
    let mut rng = SplitMix64::new(0xACCE_0006);
    let mut worst_ap = 0.0f64;
    for _ in 0..100 {
        let n = 1 + rng.below(300) as usize;
        let truths = random_labels(&mut rng, n, 0.5);
        let preds = random_labels(&mut rng, n, 0.5);
        let mut cm = [[0usize; 2]; 2];
        for (p, t) in preds.iter().zip(&truths) {
            cm[t.index()][p.index()] += 1;
        }
        let acc = (cm[0][0] + cm[1][1]) as f64 / n as f64;
        if accuracy(&preds, &truths).unwrap() != acc {
            return Err("accuracy disagrees with confusion matrix".into());
        }
        let (tp, fp, fnn) = (cm[1][1] as f64, cm[0][1] as f64, cm[1][0] as f64);
        let f1 = if tp == 0.0 {
            0.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fnn)
        };
        let got = f1_score(&preds, &truths).unwrap();
        if (got - f1).abs() > 4.0 * f64::EPSILON {
            return Err(format!("f1 {got} vs confusion-matrix {f1}"));
        }

        let mut truths = random_labels(&mut rng, n.max(2), 0.4);
        truths[0] = Label::Fake;
        // coarse scores so ties occur
        let scores: Vec<f64> = truths
            .iter()
            .map(|_| (rng.below(20) as f64) / 10.0 - 1.0)
            .collect();
        let ap = average_precision(&scores, &truths).unwrap();
        worst_ap = worst_ap.max((ap - brute_ap(&scores, &truths)).abs());
    }
    let hand =
        average_precision(&[0.9, 0.8, 0.7], &[Label::Fake, Label::Real, Label::Fake]).unwrap();
    let detail =
        format!("accuracy/F1 exact on 100 instances, AP max diff {worst_ap:.1e}, hand AP {hand}");
    if worst_ap <= 1e-12 && hand == (1.0 + 2.0 / 3.0) / 2.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sampling_protocol() -> Outcome {
    let mut corpus = EmbeddingSet::new(2, "t", 12, false);
    for i in 0..20 {
        corpus.records.push(EmbeddingRecord::fake(
            format!("a{i}"),
            "A",
            vec![1.0, i as f32],
        ));
        corpus.records.push(EmbeddingRecord::fake(
            format!("b{i}"),
            "B",
            vec![-1.0, i as f32],
        ));
    }
    for i in 0..100 {
        corpus
            .records
            .push(EmbeddingRecord::real(format!("r{i}"), vec![i as f32, 1.0]));
    }
    let first = sample_support(&corpus, 4, 11).unwrap();
    let second = sample_support(&corpus, 4, 11).unwrap();
    let fakes = first.count(Label::Fake);
    let reals = first.count(Label::Real);
    let per_source_max = ["A", "B"]
        .iter()
        .map(|s| first.records.iter().filter(|r| r.source == *s).count())
        .max()
        .unwrap();
    let distinct: HashSet<&str> = first.ids().into_iter().collect();
    let detail = format!("{fakes} fake + {reals} real, max per source {per_source_max}");
    if fakes == 8
        && reals == 8
        && reals > per_source_max
        && distinct.len() == 16
        && first.ids() == second.ids()
    {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn golden_file() -> Outcome {
    let bytes = std::fs::read(data("golden3.fseb")).map_err(|e| e.to_string())?;
    let (set, cache) = decode(&bytes).map_err(|e| e.to_string())?;
    let rewritten = encode(&set, cache).map_err(|e| e.to_string())?;
    if rewritten != bytes || set.len() != 3 {
        return Err("golden file does not round-trip byte-identically".into());
    }
    let corrupt = std::fs::read(data("golden3_corrupt.fseb")).map_err(|e| e.to_string())?;
    match decode(&corrupt) {
        Err(Error::CorruptRecord { index: 2, reason }) => Ok(format!(
            "{} bytes round-trip; corrupt variant -> record 2 ({reason})",
            bytes.len()
        )),
        other => Err(format!("corrupt variant gave {other:?}")),
    }
}

fn shot_sweep_trend() -> Outcome {
    let world = generate(&SyntheticSpec::genimage6(0)).unwrap();
    let (pool, queries) = split_pools(&world);
    let grid = SweepGrid {
        shots: vec![1, 8],
        seeds: (0..5).collect(),
        ..SweepGrid::default()
    };
    let reports = sweep(&pool, Some(&queries), &grid).unwrap();
    let mean = |k: usize| {
        let r: Vec<f64> = reports
            .iter()
            .filter(|r| r.config.k == k)
            .map(|r| r.overall.accuracy)
            .collect();
        r.iter().sum::<f64>() / r.len() as f64
    };
    let (k1, k8) = (mean(1), mean(8));
    let detail = format!("mean acc k=1 {k1:.4}, k=8 {k8:.4}");
    if reports.len() == 10 && k8 >= k1 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("oracle equivalence (inference)", oracle_equivalence),
        ("alpha-limit / 1-NN agreement", alpha_limit_knn),
        ("gradient check", gradient_check),
        ("initialization equivalence", initialization_equivalence),
        ("fine-tuning efficacy", finetune_efficacy),
        ("metric oracles", metric_oracles),
        ("sampling protocol", sampling_protocol),
        ("file-format golden test", golden_file),
        ("shot-sweep trend", shot_sweep_trend),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                println!("FAIL  {name}: {detail}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
