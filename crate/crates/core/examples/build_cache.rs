//! Samples a 4-shot support set from a synthetic corpus and builds the cache.

use fscache::{
    build_cache, generate, sample_support, split_pools, Label, SyntheticSpec, DEFAULT_ALPHA,
};

fn main() -> fscache::Result<()> {
    let (pool, _) = split_pools(&generate(&SyntheticSpec::genimage6(0))?);
    let support = sample_support(&pool, 4, 42)?;
    println!(
        "support: {} fake + {} real from sources {:?}",
        support.count(Label::Fake),
        support.count(Label::Real),
        support.sources
    );
    if !support.shortfall.is_empty() {
        println!("shortfall: {:?}", support.shortfall);
    }

    let cache = build_cache(&support, DEFAULT_ALPHA)?;
    println!(
        "cache: {} entries x {} dims, alpha {}",
        cache.len(),
        cache.dimension(),
        cache.alpha
    );
    for (id, v) in cache.entry_ids.iter().zip(&cache.values).take(6) {
        println!("  {id:24} -> {v:?}");
    }
    Ok(())
}
