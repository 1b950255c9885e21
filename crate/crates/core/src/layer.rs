//! The ball layer as a batch transform.
//!
//! Forward maps `[N_b, d]` features to `[N_gb, d]` ball centers with one
//! label per ball. Backward routes each ball's gradient to its members. The
//! partition is a routing decision made in the forward pass and is held
//! constant during backward, the same way pooling indices are.

use serde::{Deserialize, Serialize};

use crate::ball::{ClassId, GranularBall, Partition};
use crate::ballgen::{generate_rows, SplitConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// How a ball's gradient reaches its members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackwardMode {
    /// Every member receives the ball gradient unchanged.
    Replicate,
    /// Every member receives the ball gradient divided by the ball size.
    /// This is the exact adjoint of taking the mean.
    #[default]
    MeanScaled,
}

/// What backward needs to know about a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardRecord {
    pub partition: Partition,
    pub input_dim: usize,
    pub backward_mode: BackwardMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub centers: Matrix,
    pub labels: Vec<ClassId>,
    pub record: ForwardRecord,
}

/// Group the batch into balls and emit one row per ball.
pub fn forward(
    features: &Matrix,
    labels: &[ClassId],
    cfg: &SplitConfig,
    backward_mode: BackwardMode,
) -> Result<ForwardOutput> {
    let partition = generate_rows(features, labels, cfg)?;
    Ok(forward_with(features, partition, backward_mode))
}

/// Forward pass through a partition computed elsewhere.
pub fn forward_with(features: &Matrix, partition: Partition, backward_mode: BackwardMode) -> ForwardOutput {
    let centers = centers_of(features, &partition.balls);
    let labels = partition.balls.iter().map(|b| b.label).collect();
    ForwardOutput {
        centers,
        labels,
        record: ForwardRecord {
            partition,
            input_dim: features.cols(),
            backward_mode,
        },
    }
}

/// Mean of each ball's member rows, one output row per ball.
pub fn centers_of(features: &Matrix, balls: &[GranularBall]) -> Matrix {
    let d = features.cols();
    let mut out = Matrix::zeros(balls.len(), d);
    for (i, ball) in balls.iter().enumerate() {
        let row = out.row_mut(i);
        for &m in &ball.members {
            for (o, x) in row.iter_mut().zip(features.row(m)) {
                *o += x;
            }
        }
        let n = ball.members.len() as f64;
        row.iter_mut().for_each(|o| *o /= n);
    }
    out
}

pub fn backward(grad_centers: &Matrix, record: &ForwardRecord) -> Result<Matrix> {
    backward_balls(
        grad_centers,
        &record.partition.balls,
        record.partition.source_size,
        record.input_dim,
        record.backward_mode,
    )
}

/// Route per-ball gradients back to `rows` input rows.
///
/// Balls may overlap (replayed balls can share samples); a row's gradient is
/// the sum over every ball containing it.
pub fn backward_balls(
    grad_centers: &Matrix,
    balls: &[GranularBall],
    rows: usize,
    dim: usize,
    mode: BackwardMode,
) -> Result<Matrix> {
    if grad_centers.rows() != balls.len() {
        return Err(Error::DimensionMismatch {
            expected: balls.len(),
            found: grad_centers.rows(),
        });
    }
    if grad_centers.cols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: grad_centers.cols(),
        });
    }
    let mut out = Matrix::zeros(rows, dim);
    for (i, ball) in balls.iter().enumerate() {
        let g = grad_centers.row(i);
        let scale = match mode {
            BackwardMode::Replicate => 1.0,
            BackwardMode::MeanScaled => ball.members.len() as f64,
        };
        for &m in &ball.members {
            if m >= rows {
                return Err(Error::MissingIndex(m));
            }
            for (o, x) in out.row_mut(m).iter_mut().zip(g) {
                *o += x / scale;
            }
        }
    }
    Ok(out)
}

/// Inference path: every sample is its own ball, so features pass through.
pub fn inference_forward(features: &Matrix) -> Result<Matrix> {
    if features.rows() == 0 {
        return Err(Error::Empty("inference batch"));
    }
    Ok(features.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn ball(members: Vec<usize>) -> GranularBall {
        GranularBall {
            members,
            center: vec![],
            label: 0,
            purity: 1.0,
        }
    }

    #[test]
    fn tight_same_label_cluster_is_one_row() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [1.1, 2.0], [0.9, 2.1], [1.0, 1.9]]).unwrap();
        let out = forward(&x, &[3; 4], &SplitConfig::with_purity(0.9), BackwardMode::MeanScaled).unwrap();
        assert_eq!(out.centers.rows(), 1);
        assert_eq!(out.labels, vec![3]);
        let mean = x.column_sums().iter().map(|s| s / 4.0).collect::<Vec<_>>();
        for (a, b) in out.centers.row(0).iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn all_distinct_labels_give_identity() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0], [0.5, 0.25], [7.0, 7.0]]).unwrap();
        let out = forward(&x, &[0, 1, 2, 3], &SplitConfig::with_purity(1.0), BackwardMode::MeanScaled).unwrap();
        assert_eq!(out.centers, x);
        assert_eq!(out.labels, vec![0, 1, 2, 3]);
        let g = Matrix::from_rows(&[[1.0, 1.0], [2.0, 0.0], [0.0, 3.0], [4.0, 4.0]]).unwrap();
        assert_eq!(backward(&g, &out.record).unwrap(), g);
        let mut rec = out.record.clone();
        rec.backward_mode = BackwardMode::Replicate;
        assert_eq!(backward(&g, &rec).unwrap(), g);
    }

    #[test]
    fn backward_modes_on_single_ball() {
        let g = Matrix::from_rows(&[[3.0, 3.0]]).unwrap();
        let balls = [ball(vec![0, 1, 2])];
        let mean = backward_balls(&g, &balls, 3, 2, BackwardMode::MeanScaled).unwrap();
        assert_eq!(mean.as_slice(), &[1.0; 6]);
        let rep = backward_balls(&g, &balls, 3, 2, BackwardMode::Replicate).unwrap();
        assert_eq!(rep.as_slice(), &[3.0; 6]);
    }

    #[test]
    fn replicate_is_mean_scaled_times_size() {
        let mut rng = seed::rng(12);
        let balls = [ball(vec![0, 3]), ball(vec![1, 2, 4, 5, 6]), ball(vec![7])];
        let data: Vec<f64> = (0..9).map(|_| rng.random_range(-2.0..2.0)).collect();
        let g = Matrix::from_vec(3, 3, data).unwrap();
        let mean = backward_balls(&g, &balls, 8, 3, BackwardMode::MeanScaled).unwrap();
        let rep = backward_balls(&g, &balls, 8, 3, BackwardMode::Replicate).unwrap();
        for b in &balls {
            let k = b.members.len() as f64;
            for &m in &b.members {
                for (r, s) in rep.row(m).iter().zip(mean.row(m)) {
                    assert!((r - s * k).abs() <= 1e-15 * r.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn shape_errors() {
        let g = Matrix::zeros(2, 2);
        assert!(backward_balls(&g, &[ball(vec![0])], 1, 2, BackwardMode::MeanScaled).is_err());
        let g = Matrix::zeros(1, 3);
        assert!(backward_balls(&g, &[ball(vec![0])], 1, 2, BackwardMode::MeanScaled).is_err());
        let x = Matrix::zeros(2, 2);
        assert!(forward(&x, &[0], &SplitConfig::default(), BackwardMode::MeanScaled).is_err());
    }

    #[test]
    fn inference_is_identity() {
        let x = Matrix::from_rows(&[[1.0, -4.0]]).unwrap();
        assert_eq!(inference_forward(&x).unwrap(), x);
        assert!(inference_forward(&Matrix::zeros(0, 2)).is_err());
    }
}
