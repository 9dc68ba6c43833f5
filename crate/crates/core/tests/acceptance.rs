//! End-to-end acceptance checks, one line per criterion. Runs with its own
//! harness so the report is printed without `--nocapture`.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rvk_core::augment::*;
use rvk_core::dsp::*;
use rvk_core::model::*;
use rvk_core::nn::gradcheck::{check_module, dot, grad_check_with, probe, GradCheckOptions};
use rvk_core::nn::*;
use rvk_core::pitch::{estimate_f0, F0Config, UvMask};
use rvk_core::pqmf::{analysis, synthesis, PqmfBank};
use rvk_core::trainer::*;

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn dsp_round_trips() -> Outcome {
    let cfg = StftConfig::default();
    let x = common::white_noise(1.0, 1.0, 5);
    let y = istft(&stft(&x, &cfg).map_err(|e| e.to_string())?, &cfg, SAMPLE_RATE).map_err(|e| e.to_string())?;
    let h = cfg.win_length / 2;
    let err = common::max_abs_diff(&x.samples[h..x.len() - h], &y.samples[h..y.len() - h]);
    check(err < 1e-6, format!("istft(stft) interior error {err:.2e}"))?;

    let bank = PqmfBank::default();
    let x = common::white_noise(1.0, 0.5, 21);
    let y = synthesis(&analysis(&x, &bank), &bank).map_err(|e| e.to_string())?;
    let (d, m, n) = (bank.taps, bank.taps, x.len());
    let (r, t) = (&x.samples[m..n - d - m], &y.samples[m + d..n - m]);
    let sig: f64 = r.iter().map(|v| v * v).sum();
    let noise: f64 = r.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum();
    let snr = 10.0 * (sig / noise).log10();
    check(snr >= 30.0, format!("PQMF SNR {snr:.1} dB"))?;
    Ok(format!("stft error {err:.1e}, PQMF SNR {snr:.1} dB"))
}

fn augmentation_degeneracy() -> Outcome {
    let x = common::sawtooth(200.0, 0.5);
    let plain = synthesize_harmonics(&analyze_harmonics(&x).unwrap()).unwrap();
    for alpha in HN_ALPHA_GRID {
        check(harmonic_noise(&x, alpha, 0.0, &mut rng(1)).unwrap() == plain, format!("harmonic_noise beta=0 alpha={alpha} differs"))?;
    }
    let d = analyze_harmonics(&common::sawtooth(220.0, 0.5)).unwrap();
    let mut touched = 0;
    for alpha in HN_ALPHA_GRID {
        let p = perturb_envelope(&d, alpha, 8e-5, &mut rng(7));
        for (a, b) in d.sp.iter().zip(&p.sp) {
            check((*a >= alpha) == (a != b), format!("cell {a} modified outside sp >= {alpha}"))?;
            touched += usize::from(a != b);
        }
    }
    check(touched > 0, "no cell modified")?;

    let n = common::white_noise(0.5, 0.5, 4);
    check(phase_noise(&n, 0.0, &mut rng(3)).unwrap() == polar_resynthesis(&n).unwrap(), "phase_noise alpha=0 differs")?;
    let polar = stft(&common::sine(330.0, 0.5, 0.7), &StftConfig::default()).unwrap().to_polar();
    for alpha in PN_ALPHA_GRID {
        check(perturb_phase(&polar, alpha, &mut rng(5)).magnitude == polar.magnitude, format!("magnitude changed at alpha={alpha}"))?;
    }
    Ok(format!("{touched} envelope cells modified, all with sp >= alpha"))
}

fn harmonic_shift_contract() -> Outcome {
    let x = common::formant_tone(140.0, 1.0, 2000.0, 400.0);
    let source = common::envelope_centroid(&x, 1000.0, 4400.0);
    let mut r = rng(3);
    let (mut worst_f0, mut worst_formant) = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let p = sample_params(AugmentPolicy::Single(AugmentMethod::HarmonicShift), &mut r)[0];
        let y = apply(&x, &p).map_err(|e| e.to_string())?;
        let f0 = estimate_f0(&y, &F0Config::default()).unwrap().voiced_median().ok_or("output unvoiced")?;
        let ratio = common::envelope_centroid(&y, 1000.0, 4400.0) / source;
        worst_f0 = worst_f0.max((f0 / p.hs.pitch_median - 1.0).abs());
        worst_formant = worst_formant.max((ratio / p.hs.formant_ratio - 1.0).abs());
    }
    let detail = format!("worst F0 error {:.2}%, worst formant error {:.2}%", 100.0 * worst_f0, 100.0 * worst_formant);
    check(worst_f0 < 0.05 && worst_formant < 0.05, detail.clone())?;
    Ok(detail)
}

fn random_tensor(dims: &[usize], r: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = dims.iter().product();
    Tensor::from_vec(dims, (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn layer_case(kind: LayerKind, seed: u64) -> (Layer<f64>, Tensor<f64>) {
    let mut r = rng(seed);
    let (c_in, c_out, t) = (r.gen_range(1..5), r.gen_range(1..5), r.gen_range(6..14));
    match kind {
        LayerKind::Conv1d => {
            let (k, s, d, p) = (r.gen_range(1..6), r.gen_range(1..3), r.gen_range(1..3), r.gen_range(0..3));
            (Layer::Conv1d(Conv1d::new(c_in, c_out, k, s, d, p, &mut r).unwrap()), random_tensor(&[c_in, t], &mut r))
        }
        LayerKind::ConvTranspose1d => {
            let s = r.gen_range(1..5);
            (Layer::ConvTranspose1d(ConvTranspose1d::new(c_in, c_out, s, &mut r).unwrap()), random_tensor(&[c_in, t], &mut r))
        }
        LayerKind::Conv2d => {
            let l = Conv2d::new(c_in, c_out, (3, 3), (1, 2), (1, 1), &mut r).unwrap();
            (Layer::Conv2d(l), random_tensor(&[c_in, r.gen_range(5..9), r.gen_range(5..9)], &mut r))
        }
        LayerKind::LeakyRelu => (Layer::LeakyRelu(LeakyRelu::new(0.2)), random_tensor(&[c_in, t], &mut r)),
        LayerKind::Tanh => (Layer::Tanh(Tanh::default()), random_tensor(&[c_in, t], &mut r)),
        LayerKind::Dropout => (Layer::Dropout(Dropout::new(0.5).unwrap()), random_tensor(&[c_in, t], &mut r)),
        LayerKind::ResidualStack => {
            let l = ResidualStack::new(c_in + 1, &[1, 3, 9], 0.2, &mut r).unwrap();
            (Layer::ResidualStack(l), random_tensor(&[c_in + 1, t + 8], &mut r))
        }
    }
}

fn gradient_suite() -> Outcome {
    let kinds = [
        LayerKind::Conv1d,
        LayerKind::ConvTranspose1d,
        LayerKind::Conv2d,
        LayerKind::LeakyRelu,
        LayerKind::Tanh,
        LayerKind::Dropout,
        LayerKind::ResidualStack,
    ];
    let mut worst_layer = 0.0f64;
    for kind in kinds {
        for seed in 0..10 {
            let (mut layer, x) = layer_case(kind, seed);
            let opts = GradCheckOptions { seed, ..GradCheckOptions::default() };
            let err = grad_check_with(&mut layer, &x, &opts).map_err(|e| e.to_string())?.max_rel_err;
            check(err < 1e-4, format!("{kind:?} seed {seed}: {err:.2e}"))?;
            worst_layer = worst_layer.max(err);
        }
    }
    let mut worst_gen = 0.0f64;
    for seed in 0..10 {
        let mut g = Generator::<f64>::new(GeneratorConfig::tiny(), &mut rng(seed)).unwrap();
        // away from the small-normal init, where activations sit on the leaky-ReLU kinks
        let mut r = rng(seed ^ 0x5eed);
        g.visit_mut("", &mut |_, p| p.value_mut().data_mut().iter_mut().for_each(|v| *v = r.gen_range(-0.1..0.1)));
        let mut mr = rng(seed ^ 0xabcd);
        let uv = UvMask { flags: (0..4).map(|_| mr.gen_bool(0.5)).collect(), hop: 256 };
        let mut xr = rng(seed);
        let mel = Tensor::from_vec(&[80, 4], (0..320).map(|_| xr.gen_range(-4.0..1.0)).collect()).unwrap();
        let (rw, rs) = (probe(&[1, 1024], seed), probe(&[4, 256], seed + 100));
        let opts = GradCheckOptions { seed, subset: 128, ..GradCheckOptions::default() };
        let err = check_module(&mut g, &mel, &opts, |g, x, want| {
            let (out, cache) = g.forward_tensor(x, &uv, Mode::Train, &mut rng(seed + 1000))?;
            let w = Tensor::from_vec(&[1, 1024], out.waveform.clone())?;
            let s = Tensor::from_vec(&[4, 256], out.subbands.concat())?;
            let loss = dot(&rw, &w) + dot(&rs, &s);
            if !want {
                return Ok((loss, None));
            }
            let gs: Vec<Vec<f64>> = (0..4).map(|b| rs.row(b).to_vec()).collect();
            Ok((loss, Some(g.backward(&cache, Some(rw.data()), Some(&gs))?)))
        })
        .map_err(|e| e.to_string())?
        .max_rel_err;
        check(err < 1e-3, format!("tiny generator seed {seed}: {err:.2e}"))?;
        worst_gen = worst_gen.max(err);
    }
    Ok(format!("worst layer {worst_layer:.1e}, worst generator {worst_gen:.1e}"))
}

fn full(value: f64) -> Vec<Tensor<f64>> {
    [[1, 5, 33], [1, 3, 65], [1, 2, 129]].iter().map(|d| Tensor::full(d, value)).collect()
}

fn closed_forms(history: &[LossReport]) -> Outcome {
    let l = discriminator_loss(&full(1.0), &full(0.0), &[full(0.0)], 1.0).unwrap();
    check(l.d_total.abs() < 1e-12, format!("perfect discriminator loss {}", l.d_total))?;
    let l = discriminator_loss(&full(0.5), &full(0.5), &[full(0.5)], 1.0).unwrap();
    check((l.d_total - 0.75).abs() < 1e-12, format!("constant 0.5 loss {}", l.d_total))?;
    let l = discriminator_loss(&full(0.5), &full(0.5), &[], 1.0).unwrap();
    check((l.d_total - 0.5).abs() < 1e-12, format!("no-augmentation constant 0.5 loss {}", l.d_total))?;
    check(generator_adv_loss(&full(1.0)).abs() < 1e-12 && (generator_adv_loss(&full(0.0)) - 1.0).abs() < 1e-12, "generator closed form")?;
    check(!history.is_empty(), "no logged steps to check")?;
    for r in history {
        let sum = r.d_real + r.d_fake_gen + r.d_fake_aug;
        check((r.d_total - sum).abs() <= 1e-12 * sum.abs().max(1.0), format!("step {}: d_total {} != {sum}", r.step, r.d_total))?;
    }
    Ok(format!("decomposition holds on {} logged steps", history.len()))
}

struct ToyRun {
    detail: Result<String, String>,
    history: Vec<LossReport>,
}

fn toy_training(root: &Path) -> ToyRun {
    let data = root.join("corpus");
    let out = root.join("run");
    let mut history = Vec::new();
    let detail = (|| {
        synth_corpus(&data, 5, 2.0, 7).map_err(|e| e.to_string())?;
        let mut cfg = TrainConfig::toy(&data, &out);
        cfg.seed = 0;
        let mut counts = Vec::new();
        train_with(&cfg, |r| counts.push((r.step, r.augmented_per_sample))).map_err(|e| e.to_string())?;
        history = read_loss_csv(&out.join(LOSS_CSV)).map_err(|e| e.to_string())?;
        check(history.len() == 500, format!("{} logged steps", history.len()))?;
        check(history.iter().all(|r| [r.d_total, r.g_total, r.stft_fullband].iter().all(|v| v.is_finite())), "non-finite loss")?;
        let adv: Vec<usize> = counts.iter().filter(|(s, _)| *s > 200).map(|&(_, c)| c).collect();
        check(adv.len() == 300 && adv.iter().all(|&c| c == 3), "augmented fakes per sample differ from 3")?;

        let utts = DatasetIndex::build(&data, &cfg.cache_dir(), &FeatureConfig::default())
            .and_then(|i| i.load_all())
            .map_err(|e| e.to_string())?;
        let segments = sample_batch(&utts, 16, 16, &mut step_rng(99, 0)).map_err(|e| e.to_string())?;
        let loss = MultiResStftLoss::new(&default_resolutions()).map_err(|e| e.to_string())?;
        let eval = |step: u64| -> Result<f64, String> {
            let v = Vocoder::load(checkpoint_path(&out, step)).map_err(|e| e.to_string())?;
            eval_fullband(&v.gen, &segments, &loss).map_err(|e| e.to_string())
        };
        let (initial, pretrained) = (eval(0)?, eval(200)?);
        let ratio = pretrained / initial;
        let first = history[0].stft_fullband;
        let detail = format!(
            "stft_fullband {initial:.3} -> {pretrained:.3} (ratio {ratio:.3}; batch log {first:.3} -> {:.3}), 300 adversarial steps with 3 fakes each",
            history[199].stft_fullband
        );
        check(ratio <= 0.5, detail.clone())?;
        Ok(detail)
    })();
    ToyRun { detail, history }
}

fn uv_stack(root: &Path) -> Outcome {
    let sine = estimate_f0(&common::sine(220.0, 1.0, 0.8), &F0Config::default()).unwrap().voiced_fraction();
    check(sine >= 0.95, format!("sine voiced fraction {sine:.3}"))?;
    let noise = 1.0 - estimate_f0(&common::white_noise(1.0, 0.5, 0), &F0Config::default()).unwrap().voiced_fraction();
    check(noise >= 0.95, format!("noise unvoiced fraction {noise:.3}"))?;

    let dir = root.join("uv_corpus");
    synth_corpus(&dir, 30, 2.0, 11).map_err(|e| e.to_string())?;
    let utts = DatasetIndex::build(&dir, &dir.join("cache"), &FeatureConfig::default())
        .and_then(|i| i.load_all())
        .map_err(|e| e.to_string())?;
    let (_, rep) = train_uv_predictor(&utts, &UvPredictorConfig::default(), &UvTrainConfig::default()).map_err(|e| e.to_string())?;
    let detail = format!(
        "sine {:.1}% voiced, noise {:.1}% unvoiced, predictor {:.1}% on {} held-out frames",
        100.0 * sine,
        100.0 * noise,
        100.0 * rep.heldout_accuracy,
        rep.heldout_frames
    );
    check(rep.heldout_accuracy >= 0.9, detail.clone())?;
    Ok(detail)
}

fn shape_contracts() -> Outcome {
    let g = Generator::<f32>::new(GeneratorConfig::tiny(), &mut rng(0)).unwrap();
    for frames in 1..=512 {
        let mel = MelSpectrogram::new(vec![-3.0; 80 * frames], 80, frames, StftConfig::default()).unwrap();
        let uv = UvMask::all(frames, frames % 2 == 0, 256);
        let y = g.infer(&mel, &uv, &mut rng(0)).map_err(|e| e.to_string())?;
        check(y.len() == 256 * frames, format!("{frames} frames gave {} samples", y.len()))?;
    }
    for trial in 0..1000u64 {
        let mut r = rng(trial);
        let frames = r.gen_range(1..40);
        let data = (0..80 * frames).map(|_| r.gen_range(-11.5..2.0)).collect();
        let mel = MelSpectrogram::new(data, 80, frames, StftConfig::default()).unwrap();
        let uv = UvMask { flags: (0..frames).map(|_| r.gen_bool(0.5)).collect(), hop: 256 };
        let s = over_smooth_split(&mel, &uv, 50).map_err(|e| e.to_string())?;
        check(s.merge(&uv, 50) == mel.data, format!("trial {trial} does not reassemble"))?;
    }
    Ok("lengths for 1..=512 frames, 1000 partitions reassembled".into())
}

fn determinism(root: &Path) -> Outcome {
    let data = root.join("det_corpus");
    synth_corpus(&data, 2, 1.0, 5).map_err(|e| e.to_string())?;
    let run = |name: &str| -> Result<Vec<(String, Vec<u8>)>, String> {
        let out = root.join(name);
        let mut cfg = TrainConfig::toy(&data, &out);
        cfg.pretrain_steps = 3;
        cfg.total_steps = 6;
        cfg.checkpoint_interval = 3;
        cfg.uv_steps = 10;
        cfg.cache_dir = Some(root.join(format!("{name}_cache")));
        train(&cfg).map_err(|e| e.to_string())?;
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out)
            .map_err(|e| e.to_string())?
            .map(|e| {
                let p = e.unwrap().path();
                (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
            })
            .collect();
        files.sort();
        Ok(files)
    };
    let (a, b) = (run("det_a")?, run("det_b")?);
    check(a.len() == 4, format!("expected 3 checkpoints and a CSV, found {}", a.len()))?;
    check(a == b, "runs differ")?;
    Ok(format!("{} files byte-identical", a.len()))
}

fn main() {
    let root = tempfile::tempdir().expect("temporary directory");
    let root = root.path();
    let mut lines = Vec::new();
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        let line = match &res {
            Ok(d) => format!("criterion {n}: PASS  {name}: {d} ({secs:.1} s)"),
            Err(e) => format!("criterion {n}: FAIL  {name}: {e} ({secs:.1} s)"),
        };
        eprintln!("{line}");
        lines.push((n, res.is_ok(), line));
    };
    report(1, "DSP round trips", &mut dsp_round_trips);
    report(2, "augmentation degeneracy", &mut augmentation_degeneracy);
    report(3, "harmonic shift contract", &mut harmonic_shift_contract);
    report(4, "gradient suite", &mut gradient_suite);
    let mut toy = None;
    report(6, "toy training descent", &mut || {
        let run = toy_training(root);
        let d = run.detail.clone();
        toy = Some(run);
        d
    });
    let history = toy.map(|t| t.history).unwrap_or_default();
    report(5, "LSGAN closed forms", &mut || closed_forms(&history));
    report(7, "UV/V stack", &mut || uv_stack(root));
    report(8, "shape contracts", &mut shape_contracts);
    report(9, "determinism", &mut || determinism(root));
    lines.sort_by_key(|l| l.0);
    for (_, _, line) in &lines {
        println!("{line}");
    }
    let failed = lines.iter().filter(|l| !l.1).count();
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
