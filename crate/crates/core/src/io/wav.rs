use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::dsp::{resample, Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};

/// Reads the first channel of a PCM (8/16/24/32-bit) or float32 WAV file at its native rate.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let reader = WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(Error::invalid("only 32-bit float WAV is supported"));
            }
            reader
                .into_samples::<f32>()
                .collect::<std::result::Result<Vec<_>, _>>()?
                .into_iter()
                .map(f64::from)
                .collect()
        }
        SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .collect::<std::result::Result<Vec<_>, _>>()?
                .into_iter()
                .map(|v| v as f64 / scale)
                .collect()
        }
    };
    let samples = interleaved.into_iter().step_by(channels).collect();
    Waveform::new(samples, spec.sample_rate)
}

/// Reads a WAV and brings it to the model rate.
pub fn read_wav_resampled(path: impl AsRef<Path>) -> Result<Waveform> {
    Ok(resample(&read_wav(path)?, SAMPLE_RATE))
}

/// Writes mono float32 WAV.
pub fn write_wav(path: impl AsRef<Path>, x: &Waveform) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: x.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut w = WavWriter::create(path.as_ref(), spec)?;
    for &v in &x.samples {
        w.write_sample(v as f32)?;
    }
    w.finalize()?;
    Ok(())
}

/// Writes mono 16-bit PCM WAV, clipping to [-1, 1].
pub fn write_wav_pcm16(path: impl AsRef<Path>, x: &Waveform) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: x.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::create(path.as_ref(), spec)?;
    for &v in &x.samples {
        w.write_sample((v.clamp(-1.0, 1.0) * 32767.0).round() as i16)?;
    }
    w.finalize()?;
    Ok(())
}
