//! Experiment configs and the runs behind the `granule` CLI.
//!
//! An [`ExperimentConfig`] is one JSON document. Its single `seed` fans out
//! into a named sub-seed per stage (see [`crate::seed`]), so any run is
//! reproducible from the config alone.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ball::Dataset;
use crate::ballgen::{generate, generate_par, partition_stats, SplitConfig};
use crate::error::{Error, Result};
use crate::noise::{inject, noise_rates, synthesize, NoiseReport, NoiseSpec, SynthSpec};
use crate::replay::ReplayConfig;
use crate::seed::{self, Stream};
use crate::trainer::{evaluate, Mode, ModelParams, StepMetrics, TrainConfig, TrainData, Trainer};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Global seed. Every stage's own `seed` field is ignored and replaced
    /// by a sub-seed derived from this one.
    pub seed: u64,
    pub synth: SynthSpec,
    /// Test samples per class, drawn from the same class means.
    pub test_per_class: usize,
    pub noise: NoiseSpec,
    pub split: SplitConfig,
    pub replay: ReplayConfig,
    pub train: TrainConfig,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            synth: SynthSpec::default(),
            test_per_class: 200,
            noise: NoiseSpec::default(),
            // Looser purity and a wider, longer-trained net than the library
            // defaults: tuned so balls help under heavy noise on this data.
            split: SplitConfig::with_purity(0.6),
            replay: ReplayConfig::default(),
            train: TrainConfig {
                hidden: vec![128],
                steps: 2000,
                ..TrainConfig::default()
            },
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// A copy with every stage seed derived from the global seed.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        let g = self.seed;
        c.synth.seed = seed::sub_seed(g, Stream::Synth);
        c.noise.seed = seed::sub_seed(g, Stream::Noise);
        c.split.seed = seed::sub_seed(g, Stream::Split);
        c.replay.seed = seed::sub_seed(g, Stream::Replay);
        c.train.seed = g;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.noise.validate(self.synth.classes)?;
        self.split.validate()?;
        self.replay.validate()?;
        self.train.validate()?;
        if self.test_per_class == 0 {
            return Err(Error::InvalidConfig("test_per_class must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// The noisy training set, its injection summary, and a clean test set.
pub struct ExperimentData {
    pub train: Dataset,
    pub rate_realized: f64,
    pub test: Dataset,
}

pub fn build_data(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    let cfg = cfg.resolved();
    cfg.validate()?;
    let clean = synthesize(&cfg.synth)?;
    let (train, summary) = inject(&clean, &cfg.noise)?;
    let test = synthesize(&SynthSpec {
        per_class: cfg.test_per_class,
        seed: seed::sub_seed(cfg.seed, Stream::TestSet),
        ..cfg.synth.clone()
    })?;
    Ok(ExperimentData {
        train,
        rate_realized: summary.realized_rate,
        test,
    })
}

/// Inject noise into `dataset`, build balls over all of it, and measure.
pub fn noise_report(dataset: &Dataset, noise: &NoiseSpec, split: &SplitConfig) -> Result<NoiseReport> {
    let (noisy, summary) = inject(dataset, noise)?;
    let partition = if noisy.len() >= 1024 {
        generate_par(noisy.samples(), split)?
    } else {
        generate(noisy.samples(), split)?
    };
    let rates = noise_rates(noisy.samples(), &partition)?;
    let stats = partition_stats(&partition);
    Ok(NoiseReport {
        rate_requested: noise.rate,
        rate_realized: summary.realized_rate,
        before: rates.before,
        after_sample_weighted: rates.after_sample_weighted,
        after_ball_level: rates.after_ball_level,
        m: stats.ball_count,
        mean_ball_size: stats.mean_size,
    })
}

/// Final summary of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub mode: Mode,
    pub seed: u64,
    pub steps: usize,
    pub noise_rate_requested: f64,
    pub noise_rate_realized: f64,
    pub final_loss: f64,
    pub test_accuracy: f64,
    pub mean_ball_count: f64,
    pub pool_size: usize,
    /// Per-step noise rates averaged over the whole run.
    pub mean_noise_before: Option<f64>,
    pub mean_noise_after_sample: Option<f64>,
    pub mean_noise_after_ball: Option<f64>,
    /// The same averages over the final epoch only.
    pub final_epoch_noise_after_sample: Option<f64>,
    pub final_epoch_noise_after_ball: Option<f64>,
}

pub struct TrainOutcome {
    pub report: EvalReport,
    pub params: ModelParams,
    pub pool_json: String,
}

/// Train per the config, passing each step's metrics to `sink`.
pub fn run_train(cfg: &ExperimentConfig, mut sink: impl FnMut(&StepMetrics) -> Result<()>) -> Result<TrainOutcome> {
    let data = build_data(cfg)?;
    let resolved = cfg.resolved();
    let train = TrainData::from_dataset(&data.train);
    let mut trainer = Trainer::new(
        data.train.dim(),
        data.train.num_classes(),
        resolved.train.clone(),
        resolved.split.clone(),
        resolved.replay.clone(),
    )?;

    let mut history: Vec<StepMetrics> = Vec::with_capacity(resolved.train.steps);
    trainer.run(&train, |m| {
        sink(m)?;
        history.push(m.clone());
        Ok(())
    })?;

    let test_accuracy = evaluate(trainer.params(), &data.test.features(), &data.test.observed_labels())?;
    let epoch = data.train.len().div_ceil(resolved.train.batch_size).max(1);
    let last_epoch = &history[history.len().saturating_sub(epoch)..];
    let mean = |xs: &[StepMetrics], f: fn(&StepMetrics) -> Option<f64>| -> Option<f64> {
        let vals: Option<Vec<f64>> = xs.iter().map(f).collect();
        vals.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
    };
    let report = EvalReport {
        schema_version: SCHEMA_VERSION,
        mode: resolved.train.mode,
        seed: cfg.seed,
        steps: history.len(),
        noise_rate_requested: cfg.noise.rate,
        noise_rate_realized: data.rate_realized,
        final_loss: history.last().map_or(f64::NAN, |m| m.loss),
        test_accuracy,
        mean_ball_count: if history.is_empty() {
            0.0
        } else {
            history.iter().map(|m| m.ball_count as f64).sum::<f64>() / history.len() as f64
        },
        pool_size: trainer.pool().len(),
        mean_noise_before: mean(&history, |m| m.noise_before),
        mean_noise_after_sample: mean(&history, |m| m.noise_after_sample),
        mean_noise_after_ball: mean(&history, |m| m.noise_after_ball),
        final_epoch_noise_after_sample: mean(last_epoch, |m| m.noise_after_sample),
        final_epoch_noise_after_ball: mean(last_epoch, |m| m.noise_after_ball),
    };
    Ok(TrainOutcome {
        report,
        params: trainer.params().clone(),
        pool_json: trainer.pool().to_json()?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub noise_rate: f64,
    pub mode: Mode,
    pub accuracy_mean: f64,
    /// Sample standard deviation (zero for a single seed).
    pub accuracy_std: f64,
    pub accuracy_median: f64,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareTable {
    pub schema_version: u32,
    pub rows: Vec<CompareRow>,
}

impl CompareTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("noise_rate,mode,accuracy_mean,accuracy_std,accuracy_median,n_seeds\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:?},{},{:?},{:?},{:?},{}\n",
                r.noise_rate,
                r.mode,
                r.accuracy_mean,
                r.accuracy_std,
                r.accuracy_median,
                r.seeds.len()
            ));
        }
        out
    }

    pub fn row(&self, noise_rate: f64, mode: Mode) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.noise_rate == noise_rate && r.mode == mode)
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Train both modes at every noise rate for each seed. Cells run in
/// parallel; each cell is deterministic on its own, so the table is too.
pub fn run_compare(cfg: &ExperimentConfig, noise_grid: &[f64], seeds: &[u64]) -> Result<CompareTable> {
    if seeds.is_empty() || noise_grid.is_empty() {
        return Err(Error::InvalidConfig("compare needs at least one seed and one noise rate".into()));
    }
    let modes = [Mode::Individual, Mode::Gbc];
    let cells: Vec<(f64, Mode, u64)> = noise_grid
        .iter()
        .flat_map(|&r| modes.iter().flat_map(move |&m| seeds.iter().map(move |&s| (r, m, s))))
        .collect();
    let accuracies: Vec<f64> = cells
        .par_iter()
        .map(|&(rate, mode, s)| {
            let mut c = cfg.with_seed(s);
            c.noise.rate = rate;
            c.train.mode = mode;
            run_train(&c, |_| Ok(())).map(|o| o.report.test_accuracy)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (chunk, cell) in accuracies.chunks(seeds.len()).zip(cells.chunks(seeds.len())) {
        let n = chunk.len() as f64;
        let mean = chunk.iter().sum::<f64>() / n;
        let var = if chunk.len() > 1 {
            chunk.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        rows.push(CompareRow {
            noise_rate: cell[0].0,
            mode: cell[0].1,
            accuracy_mean: mean,
            accuracy_std: var.sqrt(),
            accuracy_median: median(chunk),
            seeds: seeds.to_vec(),
            accuracies: chunk.to_vec(),
        });
    }
    Ok(CompareTable {
        schema_version: SCHEMA_VERSION,
        rows,
    })
}
