//! Gradient-boosted regression trees with exact greedy split finding,
//! row and column subsampling, shrinkage, early stopping and
//! forward-chaining random search.

pub mod boost;
pub mod dump;
pub mod error;
pub mod matrix;
pub mod objective;
pub mod split;
pub mod tree;
pub mod tune;

pub use boost::{boost, BoostConfig, BoostOutcome, Ensemble};
pub use error::{GbrtError, Result};
pub use matrix::{FeatureMatrix, SortedColumns};
pub use objective::{grad_hess_squared_loss, leaf_weight, leaf_weight_and_score, split_gain, structure_score, GradHess};
pub use split::{best_split, Split, SplitParams};
pub use tree::{grow_tree, Node, Tree, TreeParams};
pub use tune::{forward_chaining_folds, tune_random_search, Fold, SearchSpace, TuneReport};
