use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rvk_core::augment::{apply, sample_params, AugmentPolicy};
use rvk_core::dsp::FeatureConfig;
use rvk_core::io::{read_wav_resampled, save_tensor, write_wav};
use rvk_core::model::{Generator, GeneratorConfig};
use rvk_core::nn::gradcheck::{check_module, dot, grad_check_with, probe, seeded_layer, GradCheckOptions};
use rvk_core::nn::{LayerKind, Mode, Module, Tensor};
use rvk_core::pitch::{estimate_f0, uv_mask, F0Config, UvMask};
use rvk_core::pqmf::{analysis, synthesis, PqmfBank};
use rvk_core::trainer::{copysyn, evaluate, synth_corpus, train, TrainConfig};
use rvk_core::{Error, Result};

#[derive(Parser)]
#[command(name = "rvk", version, about = "Multi-band MelGAN vocoder toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the log-mel spectrogram and F0 contour of a WAV.
    Analyze {
        input: PathBuf,
        /// Writes PREFIX.mel.rmtn, PREFIX.f0.rmtn and PREFIX.f0.csv.
        out_prefix: PathBuf,
    },
    /// Produce augmented fakes of a WAV.
    Augment {
        /// hs, hn, pn or all
        #[arg(long, default_value = "all")]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overrides the sampled alpha of harmonic noise or phase noise.
        #[arg(long)]
        alpha: Option<f64>,
        /// Overrides the sampled beta of harmonic noise.
        #[arg(long)]
        beta: Option<f64>,
        input: PathBuf,
        out_prefix: PathBuf,
    },
    /// Print the PQMF analysis/synthesis round-trip SNR of a WAV.
    PqmfCheck { input: PathBuf },
    /// Train (or resume) a vocoder from a key=value config file.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Resynthesize a WAV or an RMTN mel tensor with a trained checkpoint.
    Copysyn {
        #[arg(long)]
        ckpt: PathBuf,
        input: PathBuf,
        output: PathBuf,
    },
    /// Score same-named WAVs of two directories (F0 RMSE, STFT loss).
    Eval {
        ref_dir: PathBuf,
        test_dir: PathBuf,
        /// Write the per-pair CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the gradient-check sweep over every layer kind and the tiny generator.
    Gradcheck {
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },
    /// Write a synthetic voiced/unvoiced training corpus.
    SynthCorpus {
        dir: PathBuf,
        #[arg(long, default_value_t = 5)]
        files: usize,
        #[arg(long, default_value_t = 2.0)]
        seconds: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn analyze(input: &Path, prefix: &Path) -> Result<()> {
    let wave = read_wav_resampled(input)?;
    let mel = FeatureConfig::default().log_mel(&wave)?;
    let mel_t = Tensor::from_vec(&[mel.n_mels, mel.frames], mel.data.iter().map(|&v| v as f32).collect())?;
    save_tensor(with_suffix(prefix, ".mel.rmtn"), &mel_t)?;
    let f0 = estimate_f0(&wave, &F0Config::default())?;
    let f0_t = Tensor::from_vec(&[f0.values.len()], f0.values.iter().map(|&v| v as f32).collect())?;
    save_tensor(with_suffix(prefix, ".f0.rmtn"), &f0_t)?;
    let mut csv = String::from("frame_index,f0_hz\n");
    for (i, v) in f0.values.iter().enumerate() {
        csv += &format!("{i},{v}\n");
    }
    fs::write(with_suffix(prefix, ".f0.csv"), csv)?;
    let uv = uv_mask(&f0);
    println!("{} frames, {:.1}% voiced", mel.frames, 100.0 * uv.flags.iter().filter(|&&v| v).count() as f64 / uv.len().max(1) as f64);
    Ok(())
}

fn augment(method: &str, seed: u64, alpha: Option<f64>, beta: Option<f64>, input: &Path, prefix: &Path) -> Result<()> {
    let policy: AugmentPolicy = method.parse()?;
    if matches!(policy, AugmentPolicy::Disabled | AugmentPolicy::RandomPick) {
        return Err(Error::InvalidInput("method must be hs, hn, pn or all".into()));
    }
    let wave = read_wav_resampled(input)?;
    let mut record = String::new();
    for (i, mut p) in sample_params(policy, &mut ChaCha8Rng::seed_from_u64(seed)).into_iter().enumerate() {
        if let Some(a) = alpha {
            p.hn.alpha = a;
            p.pn.alpha = a;
        }
        if let Some(b) = beta {
            p.hn.beta = b;
        }
        let out = with_suffix(prefix, &format!("_{i}_{}.wav", p.method.tag()));
        write_wav(&out, &apply(&wave, &p)?)?;
        record += &format!("{} {p}\n", out.display());
    }
    fs::write(with_suffix(prefix, ".params.txt"), &record)?;
    print!("{record}");
    Ok(())
}

fn pqmf_check(input: &Path) -> Result<()> {
    let bank = PqmfBank::default();
    let x = read_wav_resampled(input)?;
    let y = synthesis(&analysis(&x, &bank), &bank)?;
    let (d, m) = (bank.taps, bank.taps);
    if x.len() <= d + 2 * m {
        return Err(Error::InvalidInput(format!("input needs more than {} samples", d + 2 * m)));
    }
    let n = x.len();
    let (r, t) = (&x.samples[m..n - d - m], &y.samples[m + d..n - m]);
    let sig: f64 = r.iter().map(|v| v * v).sum();
    let err: f64 = r.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum();
    println!("round-trip SNR {:.2} dB (delay {d} samples)", 10.0 * (sig / err).log10());
    Ok(())
}

fn generator_check(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Generator::<f64>::new(GeneratorConfig::tiny(), &mut rng)?;
    // evaluated away from the small-normal init, whose activations sit on the leaky-ReLU kinks
    g.visit_mut("", &mut |_, p| p.value_mut().data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.1..0.1)));
    let uv = UvMask { flags: (0..4).map(|_| rng.gen_bool(0.5)).collect(), hop: 256 };
    let mel = Tensor::from_vec(&[80, 4], (0..320).map(|_| rng.gen_range(-4.0..1.0)).collect())?;
    let (rw, rs) = (probe(&[1, 1024], seed), probe(&[4, 256], seed + 100));
    let opts = GradCheckOptions { seed, subset: 128, ..GradCheckOptions::default() };
    let rep = check_module(&mut g, &mel, &opts, |g, x, want| {
        let (out, cache) = g.forward_tensor(x, &uv, Mode::Train, &mut ChaCha8Rng::seed_from_u64(seed + 1000))?;
        let w = Tensor::from_vec(&[1, 1024], out.waveform.clone())?;
        let s = Tensor::from_vec(&[4, 256], out.subbands.concat())?;
        let loss = dot(&rw, &w) + dot(&rs, &s);
        if !want {
            return Ok((loss, None));
        }
        let gs: Vec<Vec<f64>> = (0..4).map(|b| rs.row(b).to_vec()).collect();
        Ok((loss, Some(g.backward(&cache, Some(rw.data()), Some(&gs))?)))
    })?;
    Ok(rep.max_rel_err)
}

fn gradcheck(seeds: u64) -> Result<bool> {
    let mut ok = true;
    for kind in LayerKind::ALL {
        let mut worst = 0.0f64;
        for seed in 0..seeds {
            let (mut layer, x) = seeded_layer(kind, seed)?;
            worst = worst.max(grad_check_with(&mut layer, &x, &GradCheckOptions { seed, ..GradCheckOptions::default() })?.max_rel_err);
        }
        ok &= worst < 1e-4;
        println!("{:<16} max rel err {worst:.2e} {}", format!("{kind:?}"), if worst < 1e-4 { "ok" } else { "FAIL" });
    }
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        worst = worst.max(generator_check(seed)?);
    }
    ok &= worst < 1e-3;
    println!("{:<16} max rel err {worst:.2e} {}", "TinyGenerator", if worst < 1e-3 { "ok" } else { "FAIL" });
    Ok(ok)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analyze { input, out_prefix } => analyze(&input, &out_prefix)?,
        Command::Augment { method, seed, alpha, beta, input, out_prefix } => augment(&method, seed, alpha, beta, &input, &out_prefix)?,
        Command::PqmfCheck { input } => pqmf_check(&input)?,
        Command::Train { config } => {
            let last = train(&TrainConfig::load(&config)?)?;
            println!("{}", last.display());
        }
        Command::Copysyn { ckpt, input, output } => {
            let w = copysyn(&ckpt, &input, &output)?;
            println!("wrote {} ({} samples)", output.display(), w.len());
        }
        Command::Eval { ref_dir, test_dir, csv } => {
            let rep = evaluate(&ref_dir, &test_dir)?;
            match csv {
                Some(p) => fs::write(p, rep.to_csv())?,
                None => print!("{}", rep.to_csv()),
            }
            println!("pairs {}, mean f0_rmse_hz {:.3}, mean stft_loss {:.4}", rep.pairs.len(), rep.mean_f0_rmse_hz, rep.mean_stft_loss);
            for name in &rep.unpaired {
                println!("unpaired {name}");
            }
        }
        Command::Gradcheck { seeds } => {
            if !gradcheck(seeds)? {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::SynthCorpus { dir, files, seconds, seed } => {
            for p in synth_corpus(&dir, files, seconds, seed)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
