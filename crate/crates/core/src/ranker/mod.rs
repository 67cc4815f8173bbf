//! Pairwise tree-ensemble ranker: loss, training and the persisted model.

mod loss;
mod model;
mod train;

pub use loss::{neg_log_sigmoid, pair_logit_gradients, pair_logit_loss, sigmoid, PairGradients};
pub use model::{load_model, save_model, RankerModel, TrainingSummary, Tree, TreeNode, MODEL_VERSION};
pub use train::{train, train_with_progress, HyperParams, IterationLog};
