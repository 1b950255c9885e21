//! `granule`: synthesize data, measure ball noise, train, and compare.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical failure.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use granule::ball::Dataset;
use granule::experiment::{noise_report, run_compare, run_train, ExperimentConfig};
use granule::noise::{read_csv, synthesize, write_csv, NoiseKind, NoiseSpec, SynthSpec};
use granule::seed::{self, Stream};
use granule::trainer::{write_checkpoint, Mode};
use granule::{Error, Result, SplitConfig};

const SEED_ENV: &str = "GRANULE_SEED";

#[derive(Parser)]
#[command(name = "granule", version, about = "Granular-ball training on noisy labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic Gaussian-mixture dataset as CSV.
    Synth(SynthArgs),
    /// Inject label noise into a CSV dataset, build balls, and report noise rates.
    NoiseReport(NoiseReportArgs),
    /// Train one model from a config file.
    Train(TrainArgs),
    /// Train both modes over a noise grid and several seeds.
    Compare(CompareArgs),
    /// Print the default experiment config.
    Config,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(2..))]
    classes: u32,
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u32).range(1..))]
    per_class: u32,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..))]
    dim: u32,
    #[arg(long, default_value_t = SynthSpec::default().separation)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    std: f64,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Symmetric,
    Asymmetric,
}

#[derive(clap::Args)]
struct NoiseReportArgs {
    /// CSV dataset. Without a `clean_label` column its labels are taken as clean.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    purity: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_rate: f64,
    #[arg(long, value_enum, default_value_t = KindArg::Symmetric)]
    noise_kind: KindArg,
    /// Pairs for asymmetric noise, e.g. `3:5,1:9`.
    #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
    flip_pairs: Vec<(usize, usize)>,
    /// Class count; defaults to one more than the largest label.
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Individual,
    Gbc,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Individual => Mode::Individual,
            ModeArg::Gbc => Mode::Gbc,
        }
    }
}

#[derive(clap::Args)]
struct TrainArgs {
    /// JSON config; defaults apply if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's `output_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CompareArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4")]
    noise_grid: Vec<f64>,
    /// Seeds `s, s+1, ...` starting from the resolved global seed.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(3..))]
    seeds: u32,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected A:B, got {s:?}"))?;
    let p = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

/// `--seed` beats `GRANULE_SEED`, which beats the config value.
fn resolve_seed(flag: Option<u64>, config: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV}={v:?} is not a u64"))),
        Err(_) => Ok(config),
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_json(&fs::read_to_string(p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn output_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("granule-out"))
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let global = resolve_seed(a.seed, 0)?;
    let spec = SynthSpec {
        classes: a.classes as usize,
        per_class: a.per_class as usize,
        dim: a.dim as usize,
        separation: a.separation,
        std: a.std,
        seed: seed::sub_seed(global, Stream::Synth),
        ..SynthSpec::default()
    };
    let data = synthesize(&spec)?;
    write_csv(&a.out, &data)?;
    println!(
        "wrote {} samples ({} classes, dim {}) to {}",
        data.len(),
        data.num_classes(),
        data.dim(),
        a.out.display()
    );
    Ok(())
}

fn cmd_noise_report(a: NoiseReportArgs) -> Result<()> {
    let global = resolve_seed(a.seed, 0)?;
    let raw = read_csv(&a.data, a.classes)?;
    let classes = raw.num_classes();
    let samples = raw
        .into_samples()
        .into_iter()
        .map(|mut s| {
            s.clean_label = s.clean_label.or(Some(s.observed_label));
            s
        })
        .collect();
    let data = Dataset::new(samples, classes)?;
    let noise = NoiseSpec {
        kind: match a.noise_kind {
            KindArg::Symmetric => NoiseKind::Symmetric,
            KindArg::Asymmetric => NoiseKind::Asymmetric,
        },
        rate: a.noise_rate,
        flip_pairs: a.flip_pairs,
        seed: seed::sub_seed(global, Stream::Noise),
    };
    let split = SplitConfig {
        restarts: a.restarts,
        seed: seed::sub_seed(global, Stream::Split),
        ..SplitConfig::with_purity(a.purity)
    };
    split.validate()?;
    let report = noise_report(&data, &noise, &split)?;
    match a.out {
        Some(p) => write_json(&p, &report),
        None => {
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    cfg.seed = resolve_seed(a.seed, cfg.seed)?;
    if let Some(m) = a.mode {
        cfg.train.mode = m.into();
    }
    cfg.validate()?;
    let dir = output_dir(a.out_dir, &cfg);
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("config.json"), &cfg)?;

    let mut metrics = BufWriter::new(fs::File::create(dir.join("metrics.jsonl"))?);
    let outcome = run_train(&cfg, |m| {
        serde_json::to_writer(&mut metrics, m)?;
        metrics.write_all(b"\n")?;
        Ok(())
    });
    metrics.flush()?;
    let outcome = outcome?;

    write_checkpoint(BufWriter::new(fs::File::create(dir.join("model.gbck"))?), &outcome.params)?;
    fs::write(dir.join("pool.json"), &outcome.pool_json)?;
    write_json(&dir.join("eval.json"), &outcome.report)?;
    println!(
        "{} mode, seed {}: test accuracy {:.4}; outputs in {}",
        outcome.report.mode,
        cfg.seed,
        outcome.report.test_accuracy,
        dir.display()
    );
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    cfg.seed = resolve_seed(a.seed, cfg.seed)?;
    cfg.validate()?;
    for &r in &a.noise_grid {
        NoiseSpec { rate: r, ..cfg.noise.clone() }.validate(cfg.synth.classes)?;
    }
    let seeds: Vec<u64> = (0..a.seeds as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    let table = run_compare(&cfg, &a.noise_grid, &seeds)?;
    let dir = output_dir(a.out_dir, &cfg);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("compare.csv"), table.to_csv())?;
    write_json(&dir.join("compare.json"), &table)?;
    for r in &table.rows {
        println!(
            "noise {:.2} {:>10}: {:.4} ± {:.4}",
            r.noise_rate, r.mode, r.accuracy_mean, r.accuracy_std
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::NoiseReport(a) => cmd_noise_report(a),
        Command::Train(a) => cmd_train(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Config => ExperimentConfig::default().to_json().map(|s| println!("{s}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
