//! Fine-tunes the cache keys on their own support set and compares both variants.

use fscache::{
    build_cache, evaluate, finetune, generate, sample_support, split_pools, AdamWConfig,
    SyntheticSpec, Variant,
};

fn main() -> fscache::Result<()> {
    let (pool, queries) = split_pools(&generate(&SyntheticSpec::genimage6(2))?);
    let support = sample_support(&pool, 8, 3)?;
    let cache = build_cache(&support, 15.0)?;

    let (tuned, log) = finetune(&cache, &support, AdamWConfig::default())?;
    for e in log.epochs.iter().step_by(5) {
        println!(
            "epoch {:2}  loss {:.5}  support acc {:.3}",
            e.epoch, e.loss, e.support_accuracy
        );
    }
    println!("final loss {:.5}", log.final_loss);

    let base = evaluate(&cache, &queries, Variant::Ftnet)?;
    let adapted = evaluate(&tuned, &queries, Variant::FtnetT)?;
    println!("ftnet   acc {:.4}", base.overall.accuracy);
    println!("ftnet-t acc {:.4}", adapted.overall.accuracy);
    Ok(())
}
