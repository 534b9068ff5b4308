//! Few-shot, training-free detection of AI-generated images over
//! precomputed image embeddings.
//!
//! A handful of labeled exemplars per generator are cached as key-value
//! pairs (unit-norm feature keys, one-hot real/fake values). A query is
//! classified by weighting every cached label with `exp(-alpha * (1 - cos))`
//! and taking the larger of the two summed logits. Optionally the keys are
//! fine-tuned as a linear adapter with cross-entropy and AdamW.
//!
//! ```no_run
//! use fscache::{build_cache, evaluate, generate, sample_support, split_pools, SyntheticSpec, Variant};
//!
//! let world = generate(&SyntheticSpec::genimage6(0))?;
//! let (pool, queries) = split_pools(&world);
//! let support = sample_support(&pool, 4, 0)?;
//! let cache = build_cache(&support, 15.0)?;
//! let report = evaluate(&cache, &queries, Variant::Ftnet)?;
//! println!("mAcc {:?}", report.overall.macc);
//! # Ok::<(), fscache::Error>(())
//! ```

pub mod cache;
pub mod cli;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod finetune;
pub mod format;
pub mod inference;
pub mod matrix;
pub mod rng;
pub mod synthetic;

pub use cache::{
    build_cache, one_hot, sample_support, CacheModel, KeyMode, SupportSet, DEFAULT_ALPHA,
};
pub use embedding::{l2_normalize, merge, EmbeddingRecord, EmbeddingSet, Label, REAL_SOURCE};
pub use error::{Error, Result};
pub use eval::{
    accuracy, average_precision, evaluate, evaluate_with, f1_score, sweep, EvalOptions, EvalReport,
    RealPool, SweepGrid, Variant,
};
pub use finetune::{
    adamw_step, adapter_forward, finetune, init_adapter, loss_and_grad, AdamWConfig, AdapterState,
    TrainLog,
};
pub use format::{read_embedding_file, write_embedding_file};
pub use inference::{activate, affinity, aggregate, batch_predict, predict, Logits, Prediction};
pub use matrix::Matrix;
pub use rng::SplitMix64;
pub use synthetic::{exact_logits_oracle, generate, knn_oracle, split_pools, SyntheticSpec};
