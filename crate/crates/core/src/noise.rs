//! Synthetic data, label-noise injection, CSV I/O, and noise measurement.

use std::path::Path;

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ball::{purity, ClassId, Dataset, LabeledSample, Partition};
use crate::error::{Error, Result};
use crate::seed;

/// Where the class means go.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Placement {
    /// Scaled unit vectors: class `k` sits at `separation / sqrt(2) * e_k`,
    /// so every pair of means is exactly `separation` apart. Needs
    /// `classes <= dim`.
    #[default]
    Simplex,
    /// Random Gaussian directions scaled to length `separation / sqrt(2)`.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    /// Distance between class means.
    pub separation: f64,
    /// Per-coordinate standard deviation inside each class.
    pub std: f64,
    pub placement: Placement,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            per_class: 500,
            dim: 16,
            separation: 4.0,
            std: 1.0,
            placement: Placement::Simplex,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 classes, got {}", self.classes)));
        }
        if self.per_class == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig("per_class and dim must be positive".into()));
        }
        if !(self.std > 0.0 && self.std.is_finite()) || !self.separation.is_finite() || self.separation < 0.0 {
            return Err(Error::InvalidConfig("std must be positive and separation non-negative".into()));
        }
        if self.placement == Placement::Simplex && self.classes > self.dim {
            return Err(Error::InvalidConfig(format!(
                "simplex placement needs classes ({}) <= dim ({})",
                self.classes, self.dim
            )));
        }
        Ok(())
    }

    /// The class means implied by the placement.
    pub fn class_means(&self) -> Vec<Vec<f64>> {
        let radius = self.separation / std::f64::consts::SQRT_2;
        match self.placement {
            Placement::Simplex => (0..self.classes)
                .map(|k| {
                    let mut m = vec![0.0; self.dim];
                    m[k] = radius;
                    m
                })
                .collect(),
            Placement::Random { seed } => {
                let mut rng = seed::rng(seed);
                (0..self.classes)
                    .map(|_| {
                        let v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                        v.into_iter().map(|x| x * radius / norm).collect()
                    })
                    .collect()
            }
        }
    }
}

/// Gaussian blobs, one per class, ordered class by class. Clean labels equal
/// observed labels.
pub fn synthesize(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let means = spec.class_means();
    let mut rng = seed::rng(spec.seed);
    let mut samples = Vec::with_capacity(spec.classes * spec.per_class);
    for (label, mean) in means.iter().enumerate() {
        for _ in 0..spec.per_class {
            let features = mean
                .iter()
                .map(|m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + spec.std * z
                })
                .collect();
            samples.push(LabeledSample {
                index: samples.len(),
                features,
                observed_label: label,
                clean_label: Some(label),
            });
        }
    }
    Dataset::new(samples, spec.classes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Symmetric,
    Asymmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Fraction of each affected class to relabel, in `[0, 1)`.
    pub rate: f64,
    /// Class pairs swapped under asymmetric noise.
    pub flip_pairs: Vec<(ClassId, ClassId)>,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            kind: NoiseKind::Symmetric,
            rate: 0.0,
            flip_pairs: Vec::new(),
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn symmetric(rate: f64, seed: u64) -> Self {
        Self {
            rate,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.rate) {
            return Err(Error::InvalidConfig(format!("noise rate {} outside [0, 1)", self.rate)));
        }
        if self.kind == NoiseKind::Asymmetric {
            if self.flip_pairs.is_empty() {
                return Err(Error::InvalidConfig("asymmetric noise needs flip pairs".into()));
            }
            let mut used = vec![false; classes];
            for &(a, b) in &self.flip_pairs {
                if a == b {
                    return Err(Error::InvalidConfig(format!("flip pair ({a}, {b}) repeats a class")));
                }
                for c in [a, b] {
                    let slot = used
                        .get_mut(c)
                        .ok_or(Error::LabelOutOfRange { label: c, classes })?;
                    if *slot {
                        return Err(Error::InvalidConfig(format!("class {c} appears in two flip pairs")));
                    }
                    *slot = true;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectSummary {
    pub flipped: usize,
    /// Fraction of samples whose observed label differs from the clean one.
    pub realized_rate: f64,
}

/// Relabel a fixed number of samples per clean class.
///
/// Symmetric noise picks exactly `floor(rate * class count)` members of each
/// class and gives each a uniformly random different label. Asymmetric noise
/// moves the same number of members of each class in a flip pair to its
/// partner. Untouched samples keep their observed label.
pub fn inject(dataset: &Dataset, spec: &NoiseSpec) -> Result<(Dataset, InjectSummary)> {
    let classes = dataset.num_classes();
    spec.validate(classes)?;
    let clean = dataset.clean_labels()?;
    let mut samples = dataset.samples().to_vec();
    let mut rng = seed::rng(spec.seed);

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (pos, &c) in clean.iter().enumerate() {
        by_class[c].push(pos);
    }

    let mut targets: Vec<(ClassId, Option<ClassId>)> = Vec::new();
    match spec.kind {
        NoiseKind::Symmetric => targets.extend((0..classes).map(|c| (c, None))),
        NoiseKind::Asymmetric => {
            for &(a, b) in &spec.flip_pairs {
                targets.push((a, Some(b)));
                targets.push((b, Some(a)));
            }
        }
    }

    let mut flipped = 0;
    for (class, partner) in targets {
        let members = &by_class[class];
        let n = (spec.rate * members.len() as f64).floor() as usize;
        if n == 0 {
            continue;
        }
        let mut chosen: Vec<usize> = index::sample(&mut rng, members.len(), n).into_vec();
        chosen.sort_unstable();
        for k in chosen {
            let new_label = match partner {
                Some(p) => p,
                None => {
                    let r = rng.random_range(0..classes - 1);
                    if r >= class {
                        r + 1
                    } else {
                        r
                    }
                }
            };
            samples[members[k]].observed_label = new_label;
            flipped += 1;
        }
    }

    let noisy = Dataset::new(samples, classes)?;
    let realized_rate = sample_noise_rate(noisy.samples())?;
    Ok((noisy, InjectSummary { flipped, realized_rate }))
}

/// Fraction of samples whose observed label differs from the clean label.
pub fn sample_noise_rate(samples: &[LabeledSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("noise rate of no samples"));
    }
    let mut wrong = 0usize;
    for s in samples {
        let clean = s.clean_label.ok_or(Error::MissingCleanLabel(s.index))?;
        wrong += usize::from(clean != s.observed_label);
    }
    Ok(wrong as f64 / samples.len() as f64)
}

/// Label noise before and after grouping into balls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRates {
    /// Samples whose observed label is wrong.
    pub before: f64,
    /// Samples whose ball label is wrong: the noise a classifier trained on
    /// ball labels actually sees.
    pub after_sample_weighted: f64,
    /// Balls whose label differs from the majority clean label of their members.
    pub after_ball_level: f64,
}

/// Measure noise for a partition whose members are positions in `samples`.
pub fn noise_rates(samples: &[LabeledSample], partition: &Partition) -> Result<NoiseRates> {
    let clean: Vec<ClassId> = samples
        .iter()
        .map(|s| s.clean_label.ok_or(Error::MissingCleanLabel(s.index)))
        .collect::<Result<_>>()?;
    let observed: Vec<ClassId> = samples.iter().map(|s| s.observed_label).collect();
    noise_rates_by_labels(&observed, &clean, partition)
}

pub fn noise_rates_by_labels(observed: &[ClassId], clean: &[ClassId], partition: &Partition) -> Result<NoiseRates> {
    if observed.is_empty() || partition.balls.is_empty() {
        return Err(Error::Empty("noise rates of an empty partition"));
    }
    if observed.len() != clean.len() || partition.source_size != observed.len() {
        return Err(Error::DimensionMismatch {
            expected: observed.len(),
            found: partition.source_size,
        });
    }
    let wrong_before = observed.iter().zip(clean).filter(|(o, c)| o != c).count();
    let mut wrong_samples = 0usize;
    let mut wrong_balls = 0usize;
    let mut covered = 0usize;
    for ball in &partition.balls {
        let mut member_clean = Vec::with_capacity(ball.members.len());
        for &m in &ball.members {
            let c = *clean.get(m).ok_or(Error::MissingIndex(m))?;
            member_clean.push(c);
            wrong_samples += usize::from(c != ball.label);
        }
        covered += ball.members.len();
        let (clean_majority, _) = purity(&member_clean)?;
        wrong_balls += usize::from(clean_majority != ball.label);
    }
    Ok(NoiseRates {
        before: wrong_before as f64 / observed.len() as f64,
        after_sample_weighted: wrong_samples as f64 / covered as f64,
        after_ball_level: wrong_balls as f64 / partition.balls.len() as f64,
    })
}

/// The JSON report written by `granule noise-report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub rate_requested: f64,
    pub rate_realized: f64,
    pub before: f64,
    pub after_sample_weighted: f64,
    pub after_ball_level: f64,
    pub m: usize,
    pub mean_ball_size: f64,
}

/// Read a dataset from CSV with header `f0,...,f{d-1},label[,clean_label]`.
///
/// The class count is `num_classes` if given, otherwise one more than the
/// largest label seen.
pub fn read_csv(path: &Path, num_classes: Option<usize>) -> Result<Dataset> {
    let csv_err = |line: u64, message: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(0, e.to_string()))?;
    let header = reader.headers().map_err(|e| csv_err(1, e.to_string()))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let has_clean = cols.last() == Some(&"clean_label");
    let label_col = if has_clean { cols.len().saturating_sub(2) } else { cols.len().saturating_sub(1) };
    if cols.get(label_col) != Some(&"label") || label_col == 0 {
        return Err(csv_err(1, "header must be f0,...,f{d-1},label[,clean_label]".into()));
    }
    for (j, name) in cols[..label_col].iter().enumerate() {
        if *name != format!("f{j}") {
            return Err(csv_err(1, format!("expected column f{j}, found {name:?}")));
        }
    }

    let mut samples = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k as u64 + 2;
        let record = record.map_err(|e| csv_err(line, e.to_string()))?;
        let mut features = Vec::with_capacity(label_col);
        for field in record.iter().take(label_col) {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| csv_err(line, format!("bad feature value {field:?}")))?;
            if !x.is_finite() {
                return Err(csv_err(line, format!("non-finite feature value {field:?}")));
            }
            features.push(x);
        }
        let parse_label = |s: &str| -> Result<ClassId> {
            s.trim().parse().map_err(|_| csv_err(line, format!("bad label {s:?}")))
        };
        let observed_label = parse_label(&record[label_col])?;
        let clean_label = match has_clean {
            true if !record[label_col + 1].trim().is_empty() => Some(parse_label(&record[label_col + 1])?),
            _ => None,
        };
        samples.push(LabeledSample {
            index: k,
            features,
            observed_label,
            clean_label,
        });
    }
    if samples.is_empty() {
        return Err(csv_err(2, "no data rows".into()));
    }
    let classes = num_classes.unwrap_or_else(|| {
        samples
            .iter()
            .flat_map(|s| std::iter::once(s.observed_label).chain(s.clean_label))
            .max()
            .unwrap_or(0)
            + 1
    });
    Dataset::new(samples, classes).map_err(|e| csv_err(0, e.to_string()))
}

/// Write a dataset in the format [`read_csv`] accepts. The `clean_label`
/// column is written when any sample has one.
pub fn write_csv(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    write_records(&mut w, dataset)?;
    w.flush()?;
    Ok(())
}

pub fn write_csv_to<W: std::io::Write>(writer: W, dataset: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    write_records(&mut w, dataset)?;
    w.flush()?;
    Ok(())
}

fn write_records<W: std::io::Write>(w: &mut csv::Writer<W>, dataset: &Dataset) -> Result<()> {
    let with_clean = dataset.samples().iter().any(|s| s.clean_label.is_some());
    let io = |e: csv::Error| Error::Io(e.into());
    let mut header: Vec<String> = (0..dataset.dim()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    if with_clean {
        header.push("clean_label".into());
    }
    w.write_record(&header).map_err(io)?;
    for s in dataset.samples() {
        let mut row: Vec<String> = s.features.iter().map(|x| format!("{x:?}")).collect();
        row.push(s.observed_label.to_string());
        if with_clean {
            row.push(s.clean_label.map(|c| c.to_string()).unwrap_or_default());
        }
        w.write_record(&row).map_err(io)?;
    }
    Ok(())
}
