//! Losses, configuration, data ingestion, the two-phase training loop,
//! voicing-predictor training and the inference/evaluation entry points.

mod config;
mod data;
mod infer;
mod loss;
mod run;
mod step;
mod uv_train;

pub use config::{ModelConfig, ModelSize, TrainConfig};
pub use data::{crop, sample_batch, synth_corpus, synth_utterance, DatasetEntry, DatasetIndex, Segment, Utterance, TRAIN_PEAK};
pub use infer::{copysyn, evaluate, EvalReport, PairMetrics, Vocoder};
pub use loss::{discriminator_loss, generator_adv_loss, generator_adv_loss_grad, lsgan_term, DiscriminatorLoss, LossReport, CSV_HEADER};
pub use run::{checkpoint_path, latest_checkpoint, read_loss_csv, train, train_with, LOSS_CSV};
pub use step::{eval_fullband, step_rng, train_step, Phase, StepObjective, TrainState};
pub use uv_train::{frame_accuracy, train_uv_predictor, UvTrainConfig, UvTrainReport};
