//! Per-source evaluation report, printed as JSON and CSV.

use fscache::eval::write_csv;
use fscache::{
    build_cache, evaluate, generate, sample_support, split_pools, SyntheticSpec, Variant,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (pool, queries) = split_pools(&generate(&SyntheticSpec::overlapping(0))?);
    let cache = build_cache(&sample_support(&pool, 4, 0)?, 15.0)?;
    let report = evaluate(&cache, &queries, Variant::Ftnet)?;

    println!("{}", serde_json::to_string_pretty(&report.overall)?);
    for (source, score) in &report.per_source {
        println!(
            "{source:12} {:.4} ({} queries)",
            score.accuracy, score.count
        );
    }
    write_csv(std::slice::from_ref(&report), std::io::stdout())?;
    Ok(())
}
