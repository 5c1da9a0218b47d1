#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use c3d_core::codec::Codec;
use c3d_core::format::{read_weights, write_weights};
use c3d_core::model::{ModelConfig, ToyModelWeights};
use c3d_core::ppm;
use c3d_core::train::{self, TrainConfig, TrainData};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "c3d", version, about = "Toy learned image codec")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compress a binary PPM into a bitstream.
    Encode {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Write bpp / estimated_bpp / msssim / psnr as key=value lines.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Reconstruct a PPM from a bitstream.
    Decode {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Encode and decode in memory, check the round trip and print metrics.
    Eval {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write seed-initialized weights.
    GenWeights {
        #[arg(long)]
        seed: u64,
        /// A key=value config file, or `defaults`.
        #[arg(long, default_value = "defaults")]
        config: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train a toy model from seed-initialized weights.
    TrainToy {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = train::DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, value_enum, default_value_t = OnOff::On)]
        pad_strategy: OnOff,
        #[arg(long)]
        output: PathBuf,
        /// `synthetic` or a directory of PPM files.
        #[arg(long, default_value = "synthetic")]
        data: String,
        /// Training log destination; stdout when absent.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        batch_size: usize,
        #[arg(long, default_value_t = train::DEFAULT_PATCH)]
        patch: usize,
    },
    /// Run the embedded invariant suite.
    Selftest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Encode { weights, input, output, report } => encode(&weights, &input, &output, report.as_deref()),
        Command::Decode { weights, input, output } => decode(&weights, &input, &output),
        Command::Eval { weights, input, report } => eval(&weights, &input, report.as_deref()),
        Command::GenWeights { seed, config, output } => gen_weights(seed, &config, &output),
        Command::TrainToy {
            seed,
            steps,
            lambda,
            pad_strategy,
            output,
            data,
            log,
            batch_size,
            patch,
        } => {
            let cfg = TrainConfig {
                pad_strategy: pad_strategy == OnOff::On,
                batch_size,
                patch,
                ..TrainConfig::default()
            };
            train_toy(seed, steps, lambda, &cfg, &output, &data, log.as_deref())
        }
        Command::Selftest => selftest(),
    }
}

fn load_weights(path: &Path) -> Result<ToyModelWeights, Failure> {
    let bytes = fs::read(path).with_context(|| format!("reading weights {}", path.display()))?;
    Ok(read_weights(&bytes).with_context(|| format!("loading weights {}", path.display()))?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn report_text(bpp: f64, estimated_bpp: f64, msssim: f64, psnr: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "bpp={bpp}");
    let _ = writeln!(s, "estimated_bpp={estimated_bpp}");
    let _ = writeln!(s, "msssim={msssim}");
    let _ = writeln!(s, "psnr={psnr}");
    s
}

fn encode_report(weights: &Path, input: &Path) -> Result<(Vec<u8>, String, c3d_core::codec::EncodeResult), Failure> {
    let w = load_weights(weights)?;
    let image = ppm::read_ppm(input).with_context(|| format!("reading {}", input.display()))?;
    let (_, h, wd) = image.chw()?;
    let codec = Codec::new(&w)?;
    let enc = codec.encode(&image)?;
    let m = &enc.metrics;
    let text = report_text(m.bpp, enc.estimated_bits / (h * wd) as f64, m.msssim, m.psnr);
    Ok((enc.bitstream.clone(), text, enc))
}

fn encode(weights: &Path, input: &Path, output: &Path, report: Option<&Path>) -> Outcome {
    let (bitstream, text, enc) = encode_report(weights, input)?;
    write_file(output, &bitstream)?;
    log::info!(
        "{} bytes ({} payload bits, {:.1} estimated)",
        bitstream.len(),
        enc.actual_bits,
        enc.estimated_bits
    );
    if let Some(r) = report {
        write_file(r, text.as_bytes())?;
    }
    Ok(())
}

fn decode(weights: &Path, input: &Path, output: &Path) -> Outcome {
    let w = load_weights(weights)?;
    let bytes = fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let dec = Codec::new(&w)?
        .decode(&bytes)
        .with_context(|| format!("decoding {}", input.display()))?;
    write_file(output, &ppm::encode_ppm(&dec.image)?)
}

fn eval(weights: &Path, input: &Path, report: Option<&Path>) -> Outcome {
    let (bitstream, text, enc) = encode_report(weights, input)?;
    let w = load_weights(weights)?;
    let dec = Codec::new(&w)?.decode(&bitstream)?;
    if !dec.y_hat.bit_eq(&enc.y_hat) || !dec.image.bit_eq(&enc.reconstruction) {
        return Err(Failure::Data(anyhow!("decoder output differs from the encoder's reconstruction")));
    }
    print!("{text}");
    if let Some(r) = report {
        write_file(r, text.as_bytes())?;
    }
    Ok(())
}

fn gen_weights(seed: u64, config: &str, output: &Path) -> Outcome {
    let cfg = if config == "defaults" {
        ModelConfig::default()
    } else {
        let text = fs::read_to_string(config)
            .with_context(|| format!("reading config {config}"))
            .map_err(Failure::Usage)?;
        ModelConfig::parse(&text)
            .with_context(|| format!("config {config}"))
            .map_err(Failure::Usage)?
    };
    let w = ToyModelWeights::generate(cfg, seed)?;
    write_file(output, &write_weights(&w))
}

fn load_dir(dir: &Path) -> Result<Vec<c3d_core::Tensor<f32>>, Failure> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("ppm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Data(anyhow!("no .ppm files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| ppm::read_ppm(p).with_context(|| format!("reading {}", p.display())).map_err(Failure::from))
        .collect()
}

fn train_toy(
    seed: u64,
    steps: usize,
    lambda: f64,
    cfg: &TrainConfig,
    output: &Path,
    data: &str,
    log_path: Option<&Path>,
) -> Outcome {
    if !(lambda >= 0.0) {
        return Err(Failure::Usage(anyhow!("--lambda must be non-negative")));
    }
    if cfg.batch_size == 0 {
        return Err(Failure::Usage(anyhow!("--batch-size must be at least 1")));
    }
    let data = if data == "synthetic" {
        TrainData::Synthetic
    } else {
        TrainData::Images(load_dir(Path::new(data))?)
    };
    let init = ToyModelWeights::generate(ModelConfig::default(), seed)?;
    let mut lines = String::new();
    let result = train::train(init, &data, cfg, lambda, steps, seed, |step, rep| {
        let _ = writeln!(
            lines,
            "step={step} rate_bpp={} distortion={} total={} h_pad={} w_pad={}",
            rep.rate_bpp, rep.distortion, rep.total, rep.h_pad, rep.w_pad
        );
        log::debug!("step {step}: total {:.4}", rep.total);
    });
    // the log is written even when training stops early
    match log_path {
        Some(p) => write_file(p, lines.as_bytes())?,
        None => print!("{lines}"),
    }
    let weights = result?;
    write_file(output, &write_weights(&weights))
}

fn selftest() -> Outcome {
    let results = c3d_core::selftest::run();
    let mut failed = 0;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", r.name, r.detail);
        failed += usize::from(!r.passed);
    }
    println!("{} properties, {failed} failed", results.len());
    if failed > 0 {
        return Err(Failure::Data(anyhow!("{failed} selftest properties failed")));
    }
    Ok(())
}
