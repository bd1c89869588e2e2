//! Sub-score aggregation: sigmoid input transform, a small MLP, and its
//! training loop with early stopping on validation Kendall tau-b.

pub mod model;
pub mod model_file;
pub mod train;

pub use model::{gradient_check, sigmoid_transform, AggregatorModel, Gradients, DEFAULT_LAYER_DIMS, INPUT_DIM};
pub use model_file::{load_model, model_from_json, model_to_json, save_model};
pub use train::{train, Optimizer, TrainConfig, TrainRecord, MIN_TRAIN_ROWS};
