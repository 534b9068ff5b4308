//! Training-free prediction: logits and nearest cache entry for a few queries.

use fscache::{batch_predict, build_cache, generate, sample_support, split_pools, SyntheticSpec};

fn main() -> fscache::Result<()> {
    let (pool, queries) = split_pools(&generate(&SyntheticSpec::genimage6(1))?);
    let cache = build_cache(&sample_support(&pool, 4, 0)?, 15.0)?;
    let sample = queries.filter(|r| r.id.ends_with("/0"));

    let preds = batch_predict(&sample, &cache)?;
    println!(
        "{:18} {:5} {:>10} {:>10} {:>7}  nearest",
        "query", "label", "real", "fake", "sim"
    );
    for (r, p) in sample.records.iter().zip(&preds) {
        let stats = p.logits.affinity_stats;
        println!(
            "{:18} {:5} {:10.4e} {:10.4e} {:7.4}  {}",
            r.id,
            p.label,
            p.logits.real(),
            p.logits.fake(),
            stats.max_similarity,
            cache.entry_sources[stats.argmax_entry_index]
        );
    }
    Ok(())
}
