mod common;

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rvk_core::augment::{AugmentMethod, AugmentPolicy};
use rvk_core::dsp::{FeatureConfig, Waveform, SAMPLE_RATE};
use rvk_core::io::{read_wav_resampled, save_tensor, write_wav, Checkpoint};
use rvk_core::model::UvPredictorConfig;
use rvk_core::nn::{Module, Tensor};
use rvk_core::pitch::UvMask;
use rvk_core::trainer::*;
use rvk_core::Error;

fn maps(values: &[f64], dims: &[[usize; 3]]) -> Vec<Tensor<f64>> {
    dims.iter()
        .zip(values)
        .map(|(d, &v)| Tensor::full(d, v))
        .collect()
}

const DIMS: [[usize; 3]; 3] = [[1, 5, 33], [1, 3, 65], [1, 2, 129]];

fn seeded_maps(seed: u64) -> Vec<Tensor<f64>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    DIMS.iter()
        .map(|d| {
            let n = d.iter().product();
            Tensor::from_vec(d, (0..n).map(|_| r.gen_range(-1.5..1.5)).collect()).unwrap()
        })
        .collect()
}

/// Per-map mean of (s - target)², averaged over maps, summed in plain loops.
fn reference_term(ms: &[Tensor<f64>], target: f64) -> f64 {
    let mut total = 0.0;
    for m in ms {
        let mut s = 0.0;
        for &v in m.data() {
            s += (v - target) * (v - target);
        }
        total += s / m.len() as f64;
    }
    total / ms.len() as f64
}

#[test]
fn perfect_discriminator_has_zero_loss() {
    let l = discriminator_loss(&maps(&[1.0; 3], &DIMS), &maps(&[0.0; 3], &DIMS), &[maps(&[0.0; 3], &DIMS)], 1.0).unwrap();
    assert_eq!(l.d_total, 0.0);
}

#[test]
fn constant_half_scores_give_three_quarters() {
    let half = maps(&[0.5; 3], &DIMS);
    let l = discriminator_loss(&half, &half, std::slice::from_ref(&half), 1.0).unwrap();
    assert!((l.d_total - 0.75).abs() < 1e-12);
    assert!((l.d_real - 0.25).abs() < 1e-12 && (l.d_fake_gen - 0.25).abs() < 1e-12 && (l.d_fake_aug - 0.25).abs() < 1e-12);
}

#[test]
fn without_augmentation_the_loss_is_two_term_lsgan() {
    for seed in 0..5 {
        let (real, gen) = (seeded_maps(seed), seeded_maps(seed + 100));
        let l = discriminator_loss(&real, &gen, &[], 1.0).unwrap();
        let expected = reference_term(&real, 1.0) + reference_term(&gen, 0.0);
        assert!((l.d_total - expected).abs() < 1e-12);
        assert_eq!(l.d_fake_aug, 0.0);
    }
}

#[test]
fn augmented_term_is_the_mean_over_fakes() {
    let (real, gen) = (seeded_maps(1), seeded_maps(2));
    let aug = vec![seeded_maps(3), seeded_maps(4), seeded_maps(5)];
    let l = discriminator_loss(&real, &gen, &aug, 1.0).unwrap();
    let expected: f64 = aug.iter().map(|a| reference_term(a, 0.0)).sum::<f64>() / 3.0;
    assert!((l.d_fake_aug - expected).abs() < 1e-12);
    assert_eq!(l.d_total, l.d_real + l.d_fake_gen + l.d_fake_aug);
}

#[test]
fn discriminator_loss_rejects_mismatched_resolutions() {
    let real = seeded_maps(1);
    let gen = seeded_maps(2)[..2].to_vec();
    assert!(matches!(discriminator_loss(&real, &gen, &[], 1.0), Err(Error::InvalidInput(_))));
    let aug = vec![seeded_maps(3)[..1].to_vec()];
    assert!(matches!(discriminator_loss(&real, &real, &aug, 1.0), Err(Error::InvalidInput(_))));
}

#[test]
fn generator_adversarial_loss_closed_forms() {
    assert_eq!(generator_adv_loss(&maps(&[1.0; 3], &DIMS)), 0.0);
    assert!((generator_adv_loss(&maps(&[0.0; 3], &DIMS)) - 1.0).abs() < 1e-12);
    for seed in 0..5 {
        let s = seeded_maps(seed);
        assert!((generator_adv_loss(&s) - reference_term(&s, 1.0)).abs() < 1e-12);
    }
}

#[test]
fn lsgan_gradient_matches_finite_differences() {
    let s = seeded_maps(9);
    let (_, grads) = lsgan_term(&s, 1.0);
    let eps = 1e-6;
    for (m, i) in [(0, 3), (1, 100), (2, 257)] {
        let mut p = s.clone();
        p[m].data_mut()[i] += eps;
        let mut q = s.clone();
        q[m].data_mut()[i] -= eps;
        let num = (lsgan_term(&p, 1.0).0 - lsgan_term(&q, 1.0).0) / (2.0 * eps);
        assert!((num - grads[m].data()[i]).abs() < 1e-8);
    }
}

#[test]
fn loss_rows_round_trip_through_csv() {
    let r = LossReport {
        step: 12,
        d_real: 0.1,
        d_fake_gen: 0.2,
        d_fake_aug: 0.3,
        d_total: 0.6,
        g_adv: 0.9,
        stft_fullband: 2.5,
        stft_subband: 3.25,
        g_total: 5.125,
        augmented_per_sample: 0,
    };
    assert_eq!(LossReport::parse_csv_row(&r.csv_row()).unwrap(), r);
    assert_eq!(CSV_HEADER, "step,d_real,d_fake_gen,d_fake_aug,d_total,g_adv,stft_fullband,stft_subband,g_total");
    assert!(LossReport::parse_csv_row("1,2,3").is_err());
}

#[test]
fn config_text_round_trips() {
    let mut c = TrainConfig::toy("corpus", "runs/a");
    c.augment = AugmentPolicy::Single(AugmentMethod::PhaseNoise);
    c.seed = 17;
    c.cache_dir = Some("cache".into());
    assert_eq!(TrainConfig::parse(&c.to_text()).unwrap(), c);
}

#[test]
fn config_parsing_errors() {
    let err = |t: &str| TrainConfig::parse(t).unwrap_err();
    assert!(matches!(err("data_dir = x\nlearning_rate = 1\n"), Error::InvalidInput(_)));
    assert!(matches!(err("seed = 1\nseed = 2\n"), Error::InvalidInput(_)));
    assert!(matches!(err("pretrain_steps = 20\ntotal_steps = 10\n"), Error::InvalidInput(_)));
    assert!(matches!(err("segment_frames = 7\n"), Error::InvalidInput(_)));
    assert!(matches!(err("batch_size = many\n"), Error::InvalidInput(_)));
    assert!(matches!(err("augment = everything\n"), Error::InvalidInput(_)));
    let ok = TrainConfig::parse("# comment\n\nmodel = toy  # trailing\nseed = 3\n").unwrap();
    assert_eq!((ok.model, ok.seed, ok.batch_size), (ModelSize::Toy, 3, 4));
}

#[test]
fn default_config_follows_the_desk_scale_plan() {
    let c = TrainConfig::default();
    assert_eq!((c.sample_rate, c.segment_frames, c.batch_size), (24_000, 32, 4));
    assert_eq!((c.lr_g, c.lr_d, c.augment), (1e-4, 1e-4, AugmentPolicy::UseAll));
    assert!(c.validate().is_ok());
}

fn corpus(dir: &Path, files: usize, secs: f64, seed: u64) -> Vec<Utterance> {
    synth_corpus(dir, files, secs, seed).unwrap();
    DatasetIndex::build(dir, &dir.join("cache"), &FeatureConfig::default()).unwrap().load_all().unwrap()
}

fn toy_state(seed: u64) -> TrainState {
    TrainState::new(ModelConfig::new(ModelSize::Toy), 1e-3, 1e-4, seed).unwrap()
}

fn objective(policy: AugmentPolicy) -> StepObjective {
    let mut c = TrainConfig::toy("d", "o");
    c.augment = policy;
    StepObjective::from_config(&c).unwrap()
}

#[test]
fn pretraining_descends_on_a_frozen_batch() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), 1, 1.0, 3);
    let batch = sample_batch(&data, 16, 1, &mut step_rng(5, 0)).unwrap();
    let mut st = toy_state(0);
    let obj = objective(AugmentPolicy::UseAll);
    let mut history = Vec::new();
    for step in 1..=50 {
        let r = train_step(&mut st, &batch, &obj, Phase::Pretrain, step, &mut step_rng(0, step)).unwrap();
        history.push((r.stft_fullband, r.stft_subband));
    }
    let mean = |v: &[(f64, f64)], f: fn(&(f64, f64)) -> f64| v.iter().map(f).sum::<f64>() / v.len() as f64;
    let (first, last) = (&history[..10], &history[40..]);
    assert!(history[49].0 < history[0].0 && history[49].1 < history[0].1, "{:?} -> {:?}", history[0], history[49]);
    assert!(mean(last, |p| p.0) < mean(first, |p| p.0));
    assert!(mean(last, |p| p.1) < mean(first, |p| p.1));
}

fn params_of<M: Module<f32>>(m: &M) -> Vec<(String, Tensor<f32>)> {
    m.named_values()
}

#[test]
fn pretraining_leaves_the_discriminator_alone() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), 1, 1.0, 4);
    let mut st = toy_state(1);
    let before = params_of(&st.disc);
    let gen_before = params_of(&st.gen);
    let obj = objective(AugmentPolicy::UseAll);
    for step in 1..=3 {
        let mut rng = step_rng(1, step);
        let batch = sample_batch(&data, 16, 2, &mut rng).unwrap();
        let r = train_step(&mut st, &batch, &obj, Phase::Pretrain, step, &mut rng).unwrap();
        assert_eq!((r.d_total, r.g_adv, r.augmented_per_sample), (0.0, 0.0, 0));
    }
    assert_eq!(params_of(&st.disc), before);
    assert_ne!(params_of(&st.gen), gen_before);
    assert_eq!(st.opt_d.step, 0);
}

#[test]
fn augmentation_counts_follow_the_policy() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), 1, 1.0, 5);
    for (policy, count) in [
        (AugmentPolicy::UseAll, 3),
        (AugmentPolicy::RandomPick, 1),
        (AugmentPolicy::Single(AugmentMethod::HarmonicNoise), 1),
        (AugmentPolicy::Disabled, 0),
    ] {
        let mut st = toy_state(2);
        let disc_before = params_of(&st.disc);
        let mut rng = step_rng(2, 1);
        let batch = sample_batch(&data, 16, 1, &mut rng).unwrap();
        let r = train_step(&mut st, &batch, &objective(policy), Phase::Adversarial, 1, &mut rng).unwrap();
        assert_eq!(r.augmented_per_sample, count, "{policy}");
        assert_eq!(r.d_total, r.d_real + r.d_fake_gen + r.d_fake_aug);
        assert_eq!(r.d_fake_aug == 0.0, count == 0);
        assert!(r.g_adv > 0.0);
        assert_ne!(params_of(&st.disc), disc_before);
    }
}

#[test]
fn seeded_steps_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), 2, 1.0, 6);
    let run = || {
        let mut st = toy_state(3);
        let obj = objective(AugmentPolicy::UseAll);
        let mut out = Vec::new();
        for (step, phase) in [(1, Phase::Pretrain), (2, Phase::Adversarial), (3, Phase::Adversarial)] {
            let mut rng = step_rng(3, step);
            let batch = sample_batch(&data, 16, 1, &mut rng).unwrap();
            out.push(train_step(&mut st, &batch, &obj, phase, step, &mut rng).unwrap());
        }
        (out, st.to_checkpoint())
    };
    let (a, ca) = run();
    let (b, cb) = run();
    assert_eq!(a, b);
    let (mut ba, mut bb) = (Vec::new(), Vec::new());
    ca.write(&mut ba).unwrap();
    cb.write(&mut bb).unwrap();
    assert_eq!(ba, bb);
}

#[test]
fn nan_loss_reports_divergence_with_the_step() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), 1, 1.0, 7);
    let mut st = toy_state(4);
    st.gen.visit_mut("", &mut |name, p| {
        if name == "output.bias" {
            p.value_mut().data_mut()[0] = f32::NAN;
        }
    });
    let batch = sample_batch(&data, 16, 1, &mut step_rng(4, 9)).unwrap();
    let err = train_step(&mut st, &batch, &objective(AugmentPolicy::Disabled), Phase::Pretrain, 9, &mut step_rng(4, 9)).unwrap_err();
    assert!(matches!(err, Error::TrainingDiverged { step: 9, .. }), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn uv_predictor_starts_uninformative() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), 4, 1.5, 8);
    let cfg = UvTrainConfig { steps: 1, ..UvTrainConfig::default() };
    let (_, rep) = train_uv_predictor(&data, &UvPredictorConfig::toy(), &cfg).unwrap();
    assert!((rep.initial_loss - 2f64.ln()).abs() < 0.2, "{}", rep.initial_loss);
}

#[test]
fn uv_predictor_learns_an_all_voiced_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let mut data = corpus(dir.path(), 3, 1.0, 9);
    for u in &mut data {
        u.uv = UvMask::all(u.uv.len(), true, 256);
    }
    let cfg = UvTrainConfig { steps: 60, ..UvTrainConfig::default() };
    let (model, rep) = train_uv_predictor(&data, &UvPredictorConfig::toy(), &cfg).unwrap();
    assert!(rep.heldout_accuracy >= 0.99, "{rep:?}");
    assert!(frame_accuracy(&model, &data).unwrap().0 >= 0.99);
}

#[test]
fn uv_training_needs_data() {
    assert!(matches!(
        train_uv_predictor(&[], &UvPredictorConfig::toy(), &UvTrainConfig::default()),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn dataset_index_caches_features_and_skips_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    synth_corpus(dir.path(), 2, 0.5, 10).unwrap();
    fs::write(dir.path().join("broken.wav"), b"not a wav file").unwrap();
    let cache = dir.path().join("cache");
    let idx = DatasetIndex::build(dir.path(), &cache, &FeatureConfig::default()).unwrap();
    assert_eq!(idx.entries.len(), 2);
    for e in &idx.entries {
        assert!(e.mel_path.exists() && e.f0_path.exists() && e.uv_path.exists());
        assert!((e.duration_secs - 0.5).abs() < 1e-9);
    }
    let u = idx.load(0).unwrap();
    assert_eq!(u.mel.frames, u.uv.len());
    assert!((u.wave.peak() - TRAIN_PEAK).abs() < 1e-3);
    // a second build reuses the cache
    let again = DatasetIndex::build(dir.path(), &cache, &FeatureConfig::default()).unwrap();
    assert_eq!(again.load(0).unwrap(), u);
}

#[test]
fn dataset_without_readable_audio_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.wav"), b"junk").unwrap();
    let err = DatasetIndex::build(dir.path(), &dir.path().join("c"), &FeatureConfig::default()).unwrap_err();
    assert!(matches!(err, Error::InvalidInput(_)));
    assert_eq!(err.exit_code(), 2);
}

fn tiny_run(data: &Path, out: &Path, pretrain: u64, total: u64) -> TrainConfig {
    let mut c = TrainConfig::toy(data, out);
    c.pretrain_steps = pretrain;
    c.total_steps = total;
    c.checkpoint_interval = 2;
    c.uv_steps = 5;
    c.seed = 21;
    c
}

fn bytes(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap()
}

#[test]
fn interrupted_runs_resume_with_continuous_steps() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_corpus(&data, 2, 1.0, 11).unwrap();
    let full_out = dir.path().join("full");
    let full = train(&tiny_run(&data, &full_out, 2, 4)).unwrap();
    assert_eq!(full, checkpoint_path(&full_out, 4));

    let part_out = dir.path().join("part");
    train(&tiny_run(&data, &part_out, 2, 2)).unwrap();
    // a stale row past the checkpoint, as left by a crash mid-interval
    let csv = part_out.join(LOSS_CSV);
    let mut text = fs::read_to_string(&csv).unwrap();
    text += "3,0,0,0,0,0,9,9,9\n";
    fs::write(&csv, text).unwrap();
    let resumed = train(&tiny_run(&data, &part_out, 2, 4)).unwrap();

    let steps: Vec<u64> = read_loss_csv(&csv).unwrap().iter().map(|r| r.step).collect();
    assert_eq!(steps, vec![1, 2, 3, 4]);
    assert_eq!(bytes(&csv), bytes(&full_out.join(LOSS_CSV)));
    assert_eq!(bytes(&resumed), bytes(&full));
    assert_eq!(latest_checkpoint(&part_out).unwrap().unwrap(), resumed);
}

#[test]
fn resume_refuses_a_different_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_corpus(&data, 1, 1.0, 12).unwrap();
    let out = dir.path().join("out");
    train(&tiny_run(&data, &out, 0, 0)).unwrap();
    let mut c = tiny_run(&data, &out, 0, 1);
    c.model = ModelSize::Full;
    assert!(matches!(train(&c), Err(Error::InvalidInput(_))));
}

#[test]
fn checkpoints_restore_the_exact_state() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), 1, 1.0, 13);
    let mut st = toy_state(5);
    let obj = objective(AugmentPolicy::UseAll);
    for (step, phase) in [(1, Phase::Pretrain), (2, Phase::Adversarial)] {
        let mut rng = step_rng(5, step);
        let batch = sample_batch(&data, 16, 1, &mut rng).unwrap();
        train_step(&mut st, &batch, &obj, phase, step, &mut rng).unwrap();
    }
    let path = dir.path().join("s.rmck");
    st.to_checkpoint().save(&path).unwrap();
    let back = TrainState::from_checkpoint(&Checkpoint::load(&path).unwrap(), 1e-3, 1e-4).unwrap();
    assert_eq!(back.step, 2);
    assert_eq!(params_of(&back.gen), params_of(&st.gen));
    assert_eq!(params_of(&back.disc), params_of(&st.disc));
    assert_eq!(params_of(&back.uv), params_of(&st.uv));
    assert_eq!((back.opt_g.m.clone(), back.opt_g.v.clone(), back.opt_g.step), (st.opt_g.m.clone(), st.opt_g.v.clone(), st.opt_g.step));
    assert_eq!((back.opt_d.m.clone(), back.opt_d.step), (st.opt_d.m.clone(), st.opt_d.step));
}

#[test]
fn copysyn_is_deterministic_and_survives_a_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let st = toy_state(6);
    let ck = dir.path().join("m.rmck");
    st.to_checkpoint().save(&ck).unwrap();
    let input = dir.path().join("in.wav");
    write_wav(&input, &common::sine(220.0, 0.5, 0.5)).unwrap();
    let voc = Vocoder::load(&ck).unwrap();
    let a = voc.copysyn(&input).unwrap();
    let b = copysyn(&ck, &input, &dir.path().join("out.wav")).unwrap();
    assert_eq!(a, b);
    let frames = FeatureConfig::default().log_mel(&common::sine(220.0, 0.5, 0.5)).unwrap().frames;
    assert_eq!(a.len(), 256 * frames);
    assert_eq!(a.sample_rate, SAMPLE_RATE);

    // loading again from disk gives the same model and output
    let reloaded = Vocoder::load(&ck).unwrap();
    assert_eq!(reloaded.copysyn(&input).unwrap(), a);
    // same network as the in-memory state
    let mel = FeatureConfig::default().log_mel(&read_wav_resampled(&input).unwrap().peak_normalized(TRAIN_PEAK)).unwrap();
    let uv = st.uv.predict_mask(&mel).unwrap();
    assert_eq!(st.gen.infer(&mel, &uv, &mut step_rng(0, 0)).unwrap(), a.samples);
}

#[test]
fn copysyn_accepts_mel_tensors() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("m.rmck");
    toy_state(7).to_checkpoint().save(&ck).unwrap();
    let voc = Vocoder::load(&ck).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let mel = Tensor::from_vec(&[80, 9], (0..720).map(|_| r.gen_range(-8.0f32..1.0)).collect()).unwrap();
    let path = dir.path().join("mel.rmtn");
    save_tensor(&path, &mel).unwrap();
    assert_eq!(voc.copysyn(&path).unwrap().len(), 256 * 9);
    let bad = dir.path().join("bad.rmtn");
    save_tensor(&bad, &Tensor::<f32>::zeros(&[64, 9])).unwrap();
    assert!(matches!(voc.copysyn(&bad), Err(Error::InvalidInput(_))));
}

#[test]
fn copysyn_rejects_a_foreign_feature_configuration() {
    let st = toy_state(8);
    let ck = st.to_checkpoint();
    let other = FeatureConfig { fmax: 8000.0, ..FeatureConfig::default() };
    assert!(matches!(Vocoder::from_checkpoint(&ck, &other), Err(Error::InvalidInput(_))));
    assert!(Vocoder::from_checkpoint(&ck, &FeatureConfig::default()).is_ok());
}

fn write_tones(dir: &Path, f0: f64, names: &[&str]) {
    fs::create_dir_all(dir).unwrap();
    for n in names {
        write_wav(dir.join(n), &common::sine(f0, 1.0, 0.6)).unwrap();
    }
}

#[test]
fn identical_directories_score_zero() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("ref");
    write_tones(&r, 180.0, &["a.wav", "b.wav"]);
    let rep = evaluate(&r, &r).unwrap();
    assert_eq!(rep.pairs.len(), 2);
    assert!(rep.pairs.iter().all(|p| p.f0_rmse_hz == 0.0 && p.stft_loss == 0.0 && p.common_voiced > 0));
    assert_eq!(rep.mean_f0_rmse_hz, 0.0);
    assert_eq!(rep.to_csv().lines().count(), 3);
}

#[test]
fn ten_hertz_offset_is_measured() {
    let dir = tempfile::tempdir().unwrap();
    let (r, t) = (dir.path().join("ref"), dir.path().join("test"));
    write_tones(&r, 200.0, &["a.wav", "b.wav", "only_ref.wav"]);
    write_tones(&t, 210.0, &["a.wav", "b.wav", "only_test.wav"]);
    let rep = evaluate(&r, &t).unwrap();
    assert_eq!(rep.pairs.len(), 2);
    assert!((rep.mean_f0_rmse_hz - 10.0).abs() <= 1.0, "{}", rep.mean_f0_rmse_hz);
    assert!(rep.mean_stft_loss > 0.0);
    assert_eq!(rep.unpaired, vec!["only_ref.wav".to_string(), "only_test.wav".to_string()]);
}

#[test]
fn unreadable_pairs_are_listed_and_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let (r, t) = (dir.path().join("ref"), dir.path().join("test"));
    write_tones(&r, 200.0, &["a.wav", "b.wav"]);
    write_tones(&t, 200.0, &["a.wav"]);
    fs::write(t.join("b.wav"), b"junk").unwrap();
    let rep = evaluate(&r, &t).unwrap();
    assert_eq!(rep.pairs.len(), 1);
    assert_eq!(rep.unpaired, vec!["b.wav".to_string()]);
}

#[test]
fn synthetic_utterances_have_both_voicing_classes() {
    let w: Waveform = synth_utterance(3.0, SAMPLE_RATE, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(w.len(), 72_000);
    let u = Utterance::from_wave("s", &w, &FeatureConfig::default()).unwrap();
    let voiced = u.uv.flags.iter().filter(|&&v| v).count() as f64 / u.uv.len() as f64;
    assert!(voiced > 0.2 && voiced < 0.8, "{voiced}");
}
