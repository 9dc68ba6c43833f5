use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor};

/// Per-step losses. During pretraining the adversarial terms are zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossReport {
    pub step: u64,
    pub d_real: f64,
    pub d_fake_gen: f64,
    pub d_fake_aug: f64,
    pub d_total: f64,
    pub g_adv: f64,
    pub stft_fullband: f64,
    pub stft_subband: f64,
    pub g_total: f64,
    /// Augmented fakes shown to the discriminator per real sample.
    pub augmented_per_sample: usize,
}

pub const CSV_HEADER: &str = "step,d_real,d_fake_gen,d_fake_aug,d_total,g_adv,stft_fullband,stft_subband,g_total";

impl LossReport {
    pub fn values(&self) -> [f64; 8] {
        [
            self.d_real,
            self.d_fake_gen,
            self.d_fake_aug,
            self.d_total,
            self.g_adv,
            self.stft_fullband,
            self.stft_subband,
            self.g_total,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    /// Values use Rust's shortest round-trip float formatting.
    pub fn csv_row(&self) -> String {
        let vals: Vec<String> = self.values().iter().map(|v| v.to_string()).collect();
        format!("{},{}", self.step, vals.join(","))
    }

    pub fn parse_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 9 {
            return Err(Error::invalid(format!("loss row needs 9 fields, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::invalid(format!("bad number '{s}' in loss row")));
        Ok(Self {
            step: f[0].parse().map_err(|_| Error::invalid(format!("bad step '{}'", f[0])))?,
            d_real: num(f[1])?,
            d_fake_gen: num(f[2])?,
            d_fake_aug: num(f[3])?,
            d_total: num(f[4])?,
            g_adv: num(f[5])?,
            stft_fullband: num(f[6])?,
            stft_subband: num(f[7])?,
            g_total: num(f[8])?,
            augmented_per_sample: 0,
        })
    }
}

/// Least-squares distance of every score to `target`: the mean over each
/// map's elements, averaged over maps, plus the gradient w.r.t. each map.
pub fn lsgan_term<S: Scalar>(maps: &[Tensor<S>], target: f64) -> (f64, Vec<Tensor<S>>) {
    if maps.is_empty() {
        return (0.0, Vec::new());
    }
    let r = maps.len() as f64;
    let mut loss = 0.0;
    let grads = maps
        .iter()
        .map(|m| {
            let n = m.len() as f64;
            loss += m.data().iter().map(|v| (v.to_f64_lossy() - target).powi(2)).sum::<f64>() / n / r;
            m.map(|v| S::from_f64_lossy(2.0 * (v.to_f64_lossy() - target) / (n * r)))
        })
        .collect();
    (loss, grads)
}

/// Discriminator objective with its score gradients.
#[derive(Debug, Clone)]
pub struct DiscriminatorLoss<S> {
    pub d_real: f64,
    pub d_fake_gen: f64,
    pub d_fake_aug: f64,
    pub d_total: f64,
    pub grad_real: Vec<Tensor<S>>,
    pub grad_gen: Vec<Tensor<S>>,
    pub grad_aug: Vec<Vec<Tensor<S>>>,
}

/// `(D(x)-1)^2 + D(x̂)^2 + w · mean_k D(x'_k)^2`, each averaged over score
/// elements and resolutions. `scores_aug` may be empty.
pub fn discriminator_loss<S: Scalar>(
    scores_real: &[Tensor<S>],
    scores_gen: &[Tensor<S>],
    scores_aug: &[Vec<Tensor<S>>],
    aug_weight: f64,
) -> Result<DiscriminatorLoss<S>> {
    let n = scores_real.len();
    if scores_gen.len() != n || scores_aug.iter().any(|a| a.len() != n) {
        return Err(Error::invalid("score lists come from discriminators with different resolution counts"));
    }
    for (i, r) in scores_real.iter().enumerate() {
        if scores_gen[i].dims() != r.dims() || scores_aug.iter().any(|a| a[i].dims() != r.dims()) {
            return Err(Error::invalid(format!("score maps at resolution {i} differ in shape")));
        }
    }
    let (d_real, grad_real) = lsgan_term(scores_real, 1.0);
    let (d_fake_gen, grad_gen) = lsgan_term(scores_gen, 0.0);
    let k = scores_aug.len() as f64;
    let mut d_fake_aug = 0.0;
    let mut grad_aug = Vec::with_capacity(scores_aug.len());
    for a in scores_aug {
        let (l, mut g) = lsgan_term(a, 0.0);
        d_fake_aug += aug_weight * l / k;
        let scale = S::from_f64_lossy(aug_weight / k);
        g.iter_mut().for_each(|t| t.scale(scale));
        grad_aug.push(g);
    }
    Ok(DiscriminatorLoss { d_real, d_fake_gen, d_fake_aug, d_total: d_real + d_fake_gen + d_fake_aug, grad_real, grad_gen, grad_aug })
}

/// Generator adversarial objective `mean (D(x̂) - 1)^2`.
pub fn generator_adv_loss<S: Scalar>(scores_gen: &[Tensor<S>]) -> f64 {
    lsgan_term(scores_gen, 1.0).0
}

/// [`generator_adv_loss`] with its score gradients.
pub fn generator_adv_loss_grad<S: Scalar>(scores_gen: &[Tensor<S>]) -> (f64, Vec<Tensor<S>>) {
    lsgan_term(scores_gen, 1.0)
}
