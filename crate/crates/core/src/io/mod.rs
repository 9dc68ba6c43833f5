//! File formats: RMTN tensors, RMCK checkpoints and WAV audio.

mod checkpoint;
mod tensor_file;
mod wav;

pub use checkpoint::{config_digest, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use tensor_file::{load_tensor, read_tensor, save_tensor, write_tensor, TENSOR_MAGIC, TENSOR_VERSION};
pub use wav::{read_wav, read_wav_resampled, write_wav, write_wav_pcm16};
