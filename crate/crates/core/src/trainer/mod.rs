//! Pre-training, fine-tuning and checkpoints.

mod checkpoint;
mod config;
mod finetune;
mod head;
mod optim;
mod pretrain;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{config_hash, TrainConfig};
pub use finetune::{finetune, fit_head, head_scores, representations, HeadTraining};
pub use head::{bce_with_logits, ClassifierHead, HeadCache};
pub use optim::{clip_factor, learning_rate, Adam};
pub use pretrain::{
    initial_params, pretrain, pretrain_from, training_pieces, write_metrics_csv, Piece, PretrainData, PretrainReport,
    StepMetric, REDUCE_CHUNK,
};
