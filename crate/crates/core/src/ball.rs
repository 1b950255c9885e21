//! Domain types: labeled samples, granular-balls, partitions, and the two
//! closed-form quantities everything else builds on (purity and center).

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Class identifier in `[0, C)`.
pub type ClassId = usize;

/// A feature vector with an observed (possibly noisy) label.
///
/// `clean_label` is only ever used for measuring noise; training never reads it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub index: usize,
    pub features: Vec<f64>,
    pub observed_label: ClassId,
    pub clean_label: Option<ClassId>,
}

/// A validated collection of samples sharing one dimension and class count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    num_classes: usize,
    dim: usize,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>, num_classes: usize) -> Result<Self> {
        let first = samples.first().ok_or(Error::Empty("dataset"))?;
        let dim = first.features.len();
        if dim == 0 {
            return Err(Error::InvalidConfig("feature dimension must be >= 1".into()));
        }
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if s.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.features.len(),
                });
            }
            if let Some(x) = s.features.iter().find(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("feature {x} in sample {}", s.index)));
            }
            for label in std::iter::once(s.observed_label).chain(s.clean_label) {
                if label >= num_classes {
                    return Err(Error::LabelOutOfRange {
                        label,
                        classes: num_classes,
                    });
                }
            }
            if !seen.insert(s.index) {
                return Err(Error::InvalidConfig(format!("duplicate sample index {}", s.index)));
            }
        }
        Ok(Self {
            samples,
            num_classes,
            dim,
        })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<LabeledSample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.len() * self.dim);
        for s in &self.samples {
            data.extend_from_slice(&s.features);
        }
        Matrix::from_vec(self.len(), self.dim, data).expect("validated dimensions")
    }

    pub fn observed_labels(&self) -> Vec<ClassId> {
        self.samples.iter().map(|s| s.observed_label).collect()
    }

    /// Clean labels, or an error naming the first sample without one.
    pub fn clean_labels(&self) -> Result<Vec<ClassId>> {
        self.samples
            .iter()
            .map(|s| s.clean_label.ok_or(Error::MissingCleanLabel(s.index)))
            .collect()
    }

    pub fn has_clean_labels(&self) -> bool {
        self.samples.iter().all(|s| s.clean_label.is_some())
    }
}

/// A set of samples treated as one training unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GranularBall {
    /// Member indices, sorted ascending.
    pub members: Vec<usize>,
    pub center: Vec<f64>,
    pub label: ClassId,
    pub purity: f64,
}

impl GranularBall {
    /// Build a ball from member row indices into `features`/`labels`.
    pub fn from_rows(mut members: Vec<usize>, features: &Matrix, labels: &[ClassId]) -> Result<Self> {
        members.sort_unstable();
        let member_labels: Vec<ClassId> = members.iter().map(|&i| labels[i]).collect();
        let (label, purity) = purity(&member_labels)?;
        let center = center_of_rows(features, &members)?;
        Ok(Self {
            members,
            center,
            label,
            purity,
        })
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Granular-balls that disjointly cover a set of `source_size` inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub balls: Vec<GranularBall>,
    pub source_size: usize,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// Check that the balls cover `0..source_size` exactly once.
    pub fn check_cover(&self) -> Result<()> {
        let mut seen = vec![false; self.source_size];
        let mut total = 0;
        for ball in &self.balls {
            if ball.members.is_empty() {
                return Err(Error::Empty("granular-ball"));
            }
            for &m in &ball.members {
                let slot = seen.get_mut(m).ok_or(Error::MissingIndex(m))?;
                if *slot {
                    return Err(Error::InvalidConfig(format!("index {m} appears in two balls")));
                }
                *slot = true;
                total += 1;
            }
        }
        if total != self.source_size {
            return Err(Error::DimensionMismatch {
                expected: self.source_size,
                found: total,
            });
        }
        Ok(())
    }

    /// Ball id for every covered row.
    pub fn owner_of_rows(&self) -> Vec<usize> {
        let mut owner = vec![usize::MAX; self.source_size];
        for (b, ball) in self.balls.iter().enumerate() {
            for &m in &ball.members {
                owner[m] = b;
            }
        }
        owner
    }

    /// Put balls in canonical order: ascending by smallest member.
    pub fn canonicalize(&mut self) {
        for b in &mut self.balls {
            b.members.sort_unstable();
        }
        self.balls.sort_by_key(|b| b.members[0]);
    }
}

/// Majority label and purity of a list of member labels.
///
/// Ties go to the smallest class id.
pub fn purity(labels: &[ClassId]) -> Result<(ClassId, f64)> {
    if labels.is_empty() {
        return Err(Error::Empty("purity of an empty ball"));
    }
    let classes = labels.iter().max().copied().unwrap_or(0) + 1;
    let mut counts = vec![0usize; classes];
    for &l in labels {
        counts[l] += 1;
    }
    let (mut best, mut best_count) = (0, 0);
    for (label, &c) in counts.iter().enumerate() {
        if c > best_count {
            best = label;
            best_count = c;
        }
    }
    Ok((best, best_count as f64 / labels.len() as f64))
}

/// Coordinate-wise mean of equally sized vectors.
pub fn center<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Vec<f64>> {
    let first = vectors.first().ok_or(Error::Empty("center of no vectors"))?;
    let dim = first.as_ref().len();
    let mut sum = vec![0.0; dim];
    for v in vectors {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let n = vectors.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

/// Mean of the selected rows of a matrix.
pub fn center_of_rows(features: &Matrix, rows: &[usize]) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::Empty("center of no vectors"));
    }
    let mut sum = vec![0.0; features.cols()];
    for &r in rows {
        for (s, x) in sum.iter_mut().zip(features.row(r)) {
            *s += x;
        }
    }
    let n = rows.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}
