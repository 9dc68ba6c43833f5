use crate::dsp::{MelSpectrogram, LOG_FLOOR};
use crate::error::{Error, Result};
use crate::pitch::UvMask;

/// Value written into cells a stream does not own: the log floor, i.e.
/// silence in log-mel space.
pub fn neutral_fill() -> f64 {
    LOG_FLOOR.ln()
}

/// The two generator inputs, each `n_mels` × `frames`, band-major like
/// [`MelSpectrogram`].
#[derive(Debug, Clone, PartialEq)]
pub struct StreamPair {
    pub periodic: Vec<f64>,
    pub aperiodic: Vec<f64>,
    pub n_mels: usize,
    pub frames: usize,
}

impl StreamPair {
    /// Cell `(band, frame)` goes to the periodic stream when the frame is
    /// voiced and the band is below `low_bands`; everything else is aperiodic.
    pub fn owner_is_periodic(voiced: bool, band: usize, low_bands: usize) -> bool {
        voiced && band < low_bands
    }

    /// Reassembles the mel by taking each cell from the stream that owns it.
    pub fn merge(&self, uv: &UvMask, low_bands: usize) -> Vec<f64> {
        let mut out = self.aperiodic.clone();
        for b in 0..self.n_mels {
            for t in 0..self.frames {
                if Self::owner_is_periodic(uv.flags[t], b, low_bands) {
                    out[b * self.frames + t] = self.periodic[b * self.frames + t];
                }
            }
        }
        out
    }
}

/// Splits a log-mel into the periodic stream (low bands of voiced frames) and
/// the aperiodic stream (high bands everywhere plus all bands of unvoiced
/// frames). Cells a stream does not own hold [`neutral_fill`].
pub fn over_smooth_split(mel: &MelSpectrogram, uv: &UvMask, low_bands: usize) -> Result<StreamPair> {
    split_raw(&mel.data, mel.n_mels, mel.frames, uv, low_bands)
}

pub(crate) fn split_raw(data: &[f64], n_mels: usize, frames: usize, uv: &UvMask, low_bands: usize) -> Result<StreamPair> {
    if uv.len() != frames {
        return Err(Error::invalid(format!("uv mask has {} frames, mel has {frames}", uv.len())));
    }
    if low_bands > n_mels {
        return Err(Error::invalid(format!("{low_bands} low bands exceed {n_mels} mel bands")));
    }
    let fill = neutral_fill();
    let mut periodic = vec![fill; data.len()];
    let mut aperiodic = vec![fill; data.len()];
    for b in 0..n_mels {
        for t in 0..frames {
            let i = b * frames + t;
            if StreamPair::owner_is_periodic(uv.flags[t], b, low_bands) {
                periodic[i] = data[i];
            } else {
                aperiodic[i] = data[i];
            }
        }
    }
    Ok(StreamPair { periodic, aperiodic, n_mels, frames })
}
