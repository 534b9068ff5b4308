//! Generates each preset world and checks a k-NN baseline against it.

use fscache::{generate, knn_oracle, split_pools, SyntheticSpec};

fn main() -> fscache::Result<()> {
    for name in ["genimage6", "separable", "overlapping"] {
        let spec = SyntheticSpec::preset(name, 0)?;
        let world = generate(&spec)?;
        let (pool, queries) = split_pools(&world);
        let preds = knn_oracle(&pool, &queries, 1)?;
        let hits = preds
            .iter()
            .zip(&queries.records)
            .filter(|(p, r)| **p == r.label)
            .count();
        println!(
            "{name:12} dim {:3}  pool {:4}  queries {:5}  1-NN acc {:.4}",
            spec.dimension,
            pool.len(),
            queries.len(),
            hits as f64 / queries.len() as f64
        );
    }
    Ok(())
}
