//! Accuracy as a function of shots per source, averaged over seeds.

use std::collections::BTreeMap;

use fscache::{generate, split_pools, sweep, SweepGrid, SyntheticSpec};

fn main() -> fscache::Result<()> {
    let (pool, queries) = split_pools(&generate(&SyntheticSpec::genimage6(0))?);
    let grid = SweepGrid {
        shots: vec![1, 2, 4, 8, 16],
        seeds: (0..5).collect(),
        ..SweepGrid::default()
    };
    let reports = sweep(&pool, Some(&queries), &grid)?;

    let mut by_k: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in &reports {
        by_k.entry(r.config.k)
            .or_default()
            .push(r.overall.macc.unwrap_or(f64::NAN));
    }
    for (k, accs) in by_k {
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        println!("k={k:2}  mAcc {mean:.4}  ({} seeds)", accs.len());
    }
    Ok(())
}
