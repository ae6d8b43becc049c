//! Multi-view entity retrieval.
//!
//! An entity description is split into sentences and every sentence becomes
//! a *view*. A dual encoder scores a mention against each view; the entity's
//! score is its best view's score. Training uses an NCE objective over
//! in-batch (and optionally mined) negatives, and at indexing time a
//! distant-pair search unites complementary views into larger ones.
//!
//! | module | role |
//! |---|---|
//! | [`corpus`] | records, JSONL loaders, tokenizer, sentence splitter, view construction, synthetic data |
//! | [`encoder`] | mean-pooled dual encoder and its checkpoint format |
//! | [`matcher`] | view scores, best-view selection, subset oracle, cached index, exact top-k |
//! | [`merger`] | iterative view merging |
//! | [`trainer`] | NCE loss, analytic gradients, gradient check, hard negatives |
//! | [`evaluator`] | recall@k, length-binned errors, comparison tables |
//! | [`pipeline`] | file-based stages behind the `muver` binary |
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! ```bash
//! cargo run --release --example synthetic_pipeline
//! ```

pub mod corpus;
pub mod encoder;
mod error;
pub mod evaluator;
pub mod matcher;
pub mod merger;
pub mod pipeline;
pub mod trainer;

pub use error::{Error, Result};
