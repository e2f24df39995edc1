//! Feed-forward window encoder and its training loop.

mod bank;
mod checkpoint;
mod model;
mod optim;
mod trainer;

pub use bank::{BankEntry, MemoryBank};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use model::{EncoderParams, EncoderShape, Forward};
pub use optim::{Adam, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use trainer::{
    embed, effective_lambda_phys, history_csv, resume, train, write_history_csv, EmbeddingMatrix, EpochRecord,
    SplitRows, TrainConfig, TrainOutcome, TrainingData, Variant,
};
