//! Category-aware, counterfactually fair re-ranking for top-k recommendation.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! pieces: the dataset model, k-core filtering and temporal splitting, two
//! baseline factor models (biased MF trained with SGD and implicit-feedback
//! WMF trained with ALS), the fairness distributions and greedy re-ranker,
//! and the bias/accuracy metrics. File formats, reports and the command-line
//! harness live in the `fairrank` crate.
//!
//! Enable the `rayon` feature to parallelise ALS row solves, candidate
//! scoring and per-user re-ranking. Results do not depend on the number of
//! worker threads.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod domain;
pub mod error;
pub mod fairness;
pub mod metrics;
pub mod preprocess;
pub mod recommenders;

mod math;
mod par;

pub use domain::{
    item_category_fractions, partition_by_attribute, Attribute, Candidate, CategoryCatalog,
    CategoryId, Dataset, IdIndex, Interaction, ItemId, Partition, RankedList, ScoreSet, Split,
    UserAttributes, UserId,
};
pub use error::{Error, Result};
