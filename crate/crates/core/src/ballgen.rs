//! Adaptive granular-ball generation.
//!
//! A FIFO queue starts with the whole input as one candidate ball. Each
//! dequeued candidate either meets the purity threshold and is finalized, or
//! is split in two by 2-means on its features and both halves are enqueued.
//!
//! Every candidate carries its own seed, derived from its parent's, so the
//! result does not depend on the order candidates are processed in. That is
//! what lets [`generate_par`] return exactly what [`generate`] returns.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ball::{purity, ClassId, GranularBall, LabeledSample, Partition};
use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::seed::{self, Rng};

/// How 2-means picks its starting centroids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// One point uniformly, the second with probability proportional to its
    /// squared distance from the first. Repeated `restarts` times.
    #[default]
    PlusPlus,
    /// Every pair of distinct points, once each. Ignores `restarts`.
    ExhaustivePairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Balls with purity below this are split. Must lie in `(0.5, 1.0]`.
    pub purity_threshold: f64,
    pub max_lloyd_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Balls of this size or smaller are never split.
    pub min_ball_size: usize,
    pub init: Init,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            purity_threshold: 0.9,
            max_lloyd_iters: 50,
            restarts: 4,
            seed: 0,
            min_ball_size: 1,
            init: Init::PlusPlus,
        }
    }
}

impl SplitConfig {
    pub fn with_purity(purity_threshold: f64) -> Self {
        Self {
            purity_threshold,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.purity_threshold;
        if !(p > 0.5 && p <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "purity threshold {p} outside (0.5, 1.0]"
            )));
        }
        if self.max_lloyd_iters == 0 || self.restarts == 0 || self.min_ball_size == 0 {
            return Err(Error::InvalidConfig(
                "max_lloyd_iters, restarts and min_ball_size must be positive".into(),
            ));
        }
        Ok(())
    }

    fn should_split(&self, purity: f64, size: usize) -> bool {
        purity < self.purity_threshold && size > self.min_ball_size.max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoMeansResult {
    /// Cluster (0 or 1) of each input point, in input order.
    pub assignment: Vec<u8>,
    pub centroids: [Vec<f64>; 2],
    pub sse: f64,
}

impl TwoMeansResult {
    pub fn cluster_sizes(&self) -> [usize; 2] {
        let ones = self.assignment.iter().filter(|&&a| a == 1).count();
        [self.assignment.len() - ones, ones]
    }
}

/// One Lloyd run together with its SSE after every assign/update round.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub result: TwoMeansResult,
    pub sse_trace: Vec<f64>,
}

/// Run Lloyd's algorithm with two clusters from the given starting centroids.
///
/// Stops at an assignment fixed point or after `max_iters` rounds. A point
/// equidistant from both centroids keeps its current cluster. If a cluster
/// empties, the point farthest from its centroid is moved into it.
pub fn lloyd(points: &Matrix, init: [&[f64]; 2], max_iters: usize) -> Result<LloydRun> {
    let rows: Vec<usize> = (0..points.rows()).collect();
    lloyd_rows(points, &rows, [init[0].to_vec(), init[1].to_vec()], max_iters)
}

fn lloyd_rows(
    features: &Matrix,
    rows: &[usize],
    init: [Vec<f64>; 2],
    max_iters: usize,
) -> Result<LloydRun> {
    if rows.len() < 2 {
        return Err(Error::InvalidConfig("2-means needs at least 2 points".into()));
    }
    for c in &init {
        if c.len() != features.cols() {
            return Err(Error::DimensionMismatch {
                expected: features.cols(),
                found: c.len(),
            });
        }
    }

    let mut centroids = init;
    let mut assignment: Vec<u8> = rows
        .iter()
        .map(|&r| {
            let x = features.row(r);
            u8::from(squared_distance(x, &centroids[1]) < squared_distance(x, &centroids[0]))
        })
        .collect();
    repair_empty(features, rows, &mut assignment, &centroids);
    centroids = cluster_means(features, rows, &assignment);
    let mut sse = total_sse(features, rows, &assignment, &centroids);
    let mut trace = vec![sse];

    for _ in 1..max_iters.max(1) {
        let mut changed = false;
        for (a, &r) in assignment.iter_mut().zip(rows) {
            let x = features.row(r);
            let d0 = squared_distance(x, &centroids[0]);
            let d1 = squared_distance(x, &centroids[1]);
            let next = if d1 < d0 {
                1
            } else if d0 < d1 {
                0
            } else {
                *a
            };
            changed |= next != *a;
            *a = next;
        }
        if !changed {
            break;
        }
        repair_empty(features, rows, &mut assignment, &centroids);
        centroids = cluster_means(features, rows, &assignment);
        sse = total_sse(features, rows, &assignment, &centroids);
        trace.push(sse);
    }

    Ok(LloydRun {
        result: TwoMeansResult {
            assignment,
            centroids,
            sse,
        },
        sse_trace: trace,
    })
}

fn repair_empty(features: &Matrix, rows: &[usize], assignment: &mut [u8], centroids: &[Vec<f64>; 2]) {
    let ones = assignment.iter().filter(|&&a| a == 1).count();
    let empty = if ones == 0 {
        1
    } else if ones == assignment.len() {
        0
    } else {
        return;
    };
    let full = 1 - empty;
    let mut far = 0;
    let mut far_d = f64::NEG_INFINITY;
    for (k, &r) in rows.iter().enumerate() {
        let d = squared_distance(features.row(r), &centroids[full as usize]);
        if d > far_d {
            far = k;
            far_d = d;
        }
    }
    assignment[far] = empty;
}

fn cluster_means(features: &Matrix, rows: &[usize], assignment: &[u8]) -> [Vec<f64>; 2] {
    let d = features.cols();
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    let mut counts = [0usize; 2];
    for (&a, &r) in assignment.iter().zip(rows) {
        counts[a as usize] += 1;
        for (s, x) in sums[a as usize].iter_mut().zip(features.row(r)) {
            *s += x;
        }
    }
    for (sum, &n) in sums.iter_mut().zip(&counts) {
        let n = n.max(1) as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    sums
}

fn total_sse(features: &Matrix, rows: &[usize], assignment: &[u8], centroids: &[Vec<f64>; 2]) -> f64 {
    assignment
        .iter()
        .zip(rows)
        .map(|(&a, &r)| squared_distance(features.row(r), &centroids[a as usize]))
        .sum()
}

fn all_identical(features: &Matrix, rows: &[usize]) -> bool {
    let first = features.row(rows[0]);
    rows[1..].iter().all(|&r| features.row(r) == first)
}

/// Split `points` into two non-empty clusters.
///
/// Keeps the restart with the lowest SSE (earliest on ties). If every point
/// is identical, the first half of the list goes to cluster 0 and the rest to
/// cluster 1.
pub fn two_means(points: &Matrix, cfg: &SplitConfig, rng: &mut Rng) -> Result<TwoMeansResult> {
    let rows: Vec<usize> = (0..points.rows()).collect();
    two_means_rows(points, &rows, cfg, rng)
}

fn two_means_rows(
    features: &Matrix,
    rows: &[usize],
    cfg: &SplitConfig,
    rng: &mut Rng,
) -> Result<TwoMeansResult> {
    if rows.len() < 2 {
        return Err(Error::InvalidConfig("2-means needs at least 2 points".into()));
    }
    if all_identical(features, rows) {
        let half = rows.len() / 2;
        let assignment: Vec<u8> = (0..rows.len()).map(|k| u8::from(k >= half)).collect();
        let centroids = cluster_means(features, rows, &assignment);
        return Ok(TwoMeansResult {
            assignment,
            centroids,
            sse: 0.0,
        });
    }

    let mut best: Option<TwoMeansResult> = None;
    let mut consider = |run: LloydRun| {
        if best.as_ref().is_none_or(|b| run.result.sse < b.sse) {
            best = Some(run.result);
        }
    };
    match cfg.init {
        Init::PlusPlus => {
            for _ in 0..cfg.restarts {
                let init = plus_plus_init(features, rows, rng);
                consider(lloyd_rows(features, rows, init, cfg.max_lloyd_iters)?);
            }
        }
        Init::ExhaustivePairs => {
            for (i, &a) in rows.iter().enumerate() {
                for &b in &rows[i + 1..] {
                    if features.row(a) == features.row(b) {
                        continue;
                    }
                    let init = [features.row(a).to_vec(), features.row(b).to_vec()];
                    consider(lloyd_rows(features, rows, init, cfg.max_lloyd_iters)?);
                }
            }
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus_init(features: &Matrix, rows: &[usize], rng: &mut Rng) -> [Vec<f64>; 2] {
    let first = features.row(rows[rng.random_range(0..rows.len())]);
    let weights: Vec<f64> = rows
        .iter()
        .map(|&r| squared_distance(features.row(r), first))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    let mut second = rows[rows.len() - 1];
    for (&w, &r) in weights.iter().zip(rows) {
        if w > 0.0 && target < w {
            second = r;
            break;
        }
        target -= w;
    }
    if features.row(second) == first {
        // rounding walked off the end onto a duplicate of the first pick
        second = *rows
            .iter()
            .zip(&weights)
            .rev()
            .find(|(_, &w)| w > 0.0)
            .map(|(r, _)| r)
            .expect("points are not all identical");
    }
    [first.to_vec(), features.row(second).to_vec()]
}

struct Candidate {
    rows: Vec<usize>,
    seed: u64,
}

enum Outcome {
    Final(GranularBall),
    Split(Candidate, Candidate),
}

fn process(features: &Matrix, labels: &[ClassId], cfg: &SplitConfig, cand: Candidate) -> Result<Outcome> {
    let member_labels: Vec<ClassId> = cand.rows.iter().map(|&r| labels[r]).collect();
    let (majority, p) = purity(&member_labels)?;
    if !cfg.should_split(p, cand.rows.len()) {
        return GranularBall::from_rows(cand.rows, features, labels).map(Outcome::Final);
    }

    let assignment: Vec<u8> = if all_identical(features, &cand.rows) {
        member_labels.iter().map(|&l| u8::from(l != majority)).collect()
    } else {
        let mut rng = seed::rng(cand.seed);
        two_means_rows(features, &cand.rows, cfg, &mut rng)?.assignment
    };
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (&r, &a) in cand.rows.iter().zip(&assignment) {
        if a == 0 {
            left.push(r);
        } else {
            right.push(r);
        }
    }
    debug_assert!(!left.is_empty() && !right.is_empty());
    Ok(Outcome::Split(
        Candidate {
            rows: left,
            seed: seed::derive(cand.seed, 0),
        },
        Candidate {
            rows: right,
            seed: seed::derive(cand.seed, 1),
        },
    ))
}

fn check_inputs(features: &Matrix, labels: &[ClassId], cfg: &SplitConfig) -> Result<()> {
    cfg.validate()?;
    if features.rows() == 0 {
        return Err(Error::Empty("ball generation input"));
    }
    if features.cols() == 0 {
        return Err(Error::InvalidConfig("feature dimension must be >= 1".into()));
    }
    if labels.len() != features.rows() {
        return Err(Error::DimensionMismatch {
            expected: features.rows(),
            found: labels.len(),
        });
    }
    if !features.is_finite() {
        return Err(Error::NonFinite("ball generation input features".into()));
    }
    Ok(())
}

/// Partition the rows of `features` into granular-balls.
///
/// Ball members are row positions. Every ball has purity at least
/// `cfg.purity_threshold`, or is too small to split further. Balls are
/// returned ordered by their smallest member.
pub fn generate_rows(features: &Matrix, labels: &[ClassId], cfg: &SplitConfig) -> Result<Partition> {
    check_inputs(features, labels, cfg)?;
    let mut queue = VecDeque::new();
    queue.push_back(Candidate {
        rows: (0..features.rows()).collect(),
        seed: cfg.seed,
    });
    let mut balls = Vec::new();
    while let Some(cand) = queue.pop_front() {
        match process(features, labels, cfg, cand)? {
            Outcome::Final(ball) => balls.push(ball),
            Outcome::Split(a, b) => {
                queue.push_back(a);
                queue.push_back(b);
            }
        }
    }
    let mut partition = Partition {
        balls,
        source_size: features.rows(),
    };
    partition.canonicalize();
    Ok(partition)
}

/// Same output as [`generate_rows`], processing each queue generation in
/// parallel.
pub fn generate_rows_par(features: &Matrix, labels: &[ClassId], cfg: &SplitConfig) -> Result<Partition> {
    check_inputs(features, labels, cfg)?;
    let mut level = vec![Candidate {
        rows: (0..features.rows()).collect(),
        seed: cfg.seed,
    }];
    let mut balls = Vec::new();
    while !level.is_empty() {
        let outcomes: Vec<Outcome> = level
            .into_par_iter()
            .map(|cand| process(features, labels, cfg, cand))
            .collect::<Result<_>>()?;
        level = Vec::new();
        for o in outcomes {
            match o {
                Outcome::Final(ball) => balls.push(ball),
                Outcome::Split(a, b) => {
                    level.push(a);
                    level.push(b);
                }
            }
        }
    }
    let mut partition = Partition {
        balls,
        source_size: features.rows(),
    };
    partition.canonicalize();
    Ok(partition)
}

/// Partition labeled samples by their observed labels. Ball members are
/// positions in `samples`.
pub fn generate(samples: &[LabeledSample], cfg: &SplitConfig) -> Result<Partition> {
    let (features, labels) = unpack(samples)?;
    generate_rows(&features, &labels, cfg)
}

/// Parallel counterpart of [`generate`].
pub fn generate_par(samples: &[LabeledSample], cfg: &SplitConfig) -> Result<Partition> {
    let (features, labels) = unpack(samples)?;
    generate_rows_par(&features, &labels, cfg)
}

fn unpack(samples: &[LabeledSample]) -> Result<(Matrix, Vec<ClassId>)> {
    if samples.is_empty() {
        return Err(Error::Empty("ball generation input"));
    }
    let rows: Vec<&[f64]> = samples.iter().map(|s| s.features.as_slice()).collect();
    let features = Matrix::from_rows(&rows)?;
    Ok((features, samples.iter().map(|s| s.observed_label).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurityBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionStats {
    pub ball_count: usize,
    pub mean_size: f64,
    /// `(size, number of balls of that size)`, ascending by size.
    pub size_histogram: Vec<(usize, usize)>,
    /// Ten equal-width bins over `[0, 1]`; the last bin is closed.
    pub purity_histogram: Vec<PurityBin>,
}

pub fn partition_stats(partition: &Partition) -> PartitionStats {
    let ball_count = partition.balls.len();
    let total: usize = partition.balls.iter().map(GranularBall::size).sum();
    let mut sizes = BTreeMap::new();
    let mut bins = vec![0usize; 10];
    for b in &partition.balls {
        *sizes.entry(b.size()).or_insert(0) += 1;
        let k = ((b.purity * 10.0).floor() as usize).min(9);
        bins[k] += 1;
    }
    PartitionStats {
        ball_count,
        mean_size: if ball_count == 0 {
            0.0
        } else {
            total as f64 / ball_count as f64
        },
        size_histogram: sizes.into_iter().collect(),
        purity_histogram: bins
            .into_iter()
            .enumerate()
            .map(|(k, count)| PurityBin {
                lower: k as f64 / 10.0,
                upper: (k + 1) as f64 / 10.0,
                count,
            })
            .collect(),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::ball::center;
    use rand_distr::{Distribution, StandardNormal};

    /// Lowest SSE over every non-trivial bipartition, clusters at their means.
    pub(crate) fn brute_force_sse(points: &[Vec<f64>]) -> f64 {
        let n = points.len();
        let cost = |cluster: &[&Vec<f64>]| -> f64 {
            let c = center(cluster).unwrap();
            cluster.iter().map(|p| squared_distance(p, &c)).sum()
        };
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) - 1 {
            let (a, b): (Vec<_>, Vec<_>) =
                points.iter().enumerate().partition(|(i, _)| mask & (1 << i) != 0);
            let a: Vec<&Vec<f64>> = a.into_iter().map(|(_, p)| p).collect();
            let b: Vec<&Vec<f64>> = b.into_iter().map(|(_, p)| p).collect();
            best = best.min(cost(&a) + cost(&b));
        }
        best
    }

    fn gaussian_points(n: usize, d: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect())
            .collect()
    }

    fn samples(rows: &[Vec<f64>], labels: &[usize]) -> Vec<LabeledSample> {
        rows.iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (f, &l))| LabeledSample {
                index: i,
                features: f.clone(),
                observed_label: l,
                clean_label: Some(l),
            })
            .collect()
    }

    #[test]
    fn two_means_separates_pairs() {
        let m = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]]).unwrap();
        let r = two_means(&m, &SplitConfig::default(), &mut seed::rng(1)).unwrap();
        assert_eq!(r.assignment[0], r.assignment[1]);
        assert_eq!(r.assignment[2], r.assignment[3]);
        assert_ne!(r.assignment[0], r.assignment[2]);
        assert_eq!(r.sse, 1.0);
    }

    #[test]
    fn two_means_two_points() {
        let m = Matrix::from_rows(&[[3.0, -1.0], [0.5, 2.0]]).unwrap();
        let r = two_means(&m, &SplitConfig::default(), &mut seed::rng(9)).unwrap();
        assert_ne!(r.assignment[0], r.assignment[1]);
        assert_eq!(r.sse, 0.0);
    }

    #[test]
    fn two_means_rejects_single_point() {
        let m = Matrix::from_rows(&[[1.0]]).unwrap();
        assert!(two_means(&m, &SplitConfig::default(), &mut seed::rng(0)).is_err());
    }

    #[test]
    fn two_means_identical_points_split_in_half() {
        let m = Matrix::from_rows(&[[2.0, 2.0]; 5]).unwrap();
        let r = two_means(&m, &SplitConfig::default(), &mut seed::rng(0)).unwrap();
        assert_eq!(r.assignment, vec![0, 0, 1, 1, 1]);
        assert_eq!(r.sse, 0.0);
    }

    #[test]
    fn two_means_matches_brute_force_on_eight_points() {
        // Optimum over all 127 bipartitions, computed in exact rationals:
        // {1, 3, 6} against the rest.
        const ORACLE: f64 = 20.053333333333335;
        let pts = [
            [0.3, -1.2],
            [1.7, 0.4],
            [-0.8, 2.1],
            [2.9, -0.6],
            [-1.5, -0.3],
            [0.6, 1.1],
            [3.3, 2.4],
            [-0.2, -2.0],
        ];
        let cfg = SplitConfig {
            init: Init::ExhaustivePairs,
            ..SplitConfig::default()
        };
        let m = Matrix::from_rows(&pts).unwrap();
        let r = two_means(&m, &cfg, &mut seed::rng(0)).unwrap();
        assert!((r.sse - ORACLE).abs() <= 1e-9 * ORACLE, "{} vs {ORACLE}", r.sse);
        let rows: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
        assert!((brute_force_sse(&rows) - ORACLE).abs() <= 1e-12 * ORACLE);
        let side = r.assignment[1];
        let group: Vec<usize> = (0..8).filter(|&i| r.assignment[i] == side).collect();
        assert_eq!(group, vec![1, 3, 6]);
    }

    #[test]
    fn lloyd_trace_non_increasing() {
        let mut rng = seed::rng(5);
        for _ in 0..50 {
            let pts = gaussian_points(40, 3, &mut rng);
            let m = Matrix::from_rows(&pts).unwrap();
            let run = lloyd(&m, [&pts[0], &pts[1]], 50).unwrap();
            for w in run.sse_trace.windows(2) {
                assert!(w[1] <= w[0], "{:?}", run.sse_trace);
            }
            let [a, b] = run.result.cluster_sizes();
            assert!(a > 0 && b > 0);
        }
    }

    #[test]
    fn lloyd_repairs_empty_cluster() {
        let m = Matrix::from_rows(&[[0.0], [1.0], [5.0]]).unwrap();
        // Both starting centroids far to the left: everything lands in cluster 0.
        let run = lloyd(&m, [&[-10.0], &[-20.0]], 50).unwrap();
        let [a, b] = run.result.cluster_sizes();
        assert!(a > 0 && b > 0);
        assert!((run.result.sse - 0.5).abs() < 1e-12);
    }

    #[test]
    fn all_same_label_is_one_ball() {
        let pts = gaussian_points(10, 3, &mut seed::rng(3));
        let p = generate(&samples(&pts, &[0; 10]), &SplitConfig::with_purity(0.9)).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.balls[0].size(), 10);
        assert_eq!(p.balls[0].purity, 1.0);
        let stats = partition_stats(&p);
        assert_eq!(stats.ball_count, 1);
        assert_eq!(stats.mean_size, 10.0);
    }

    #[test]
    fn two_blobs_give_two_pure_balls() {
        let mut rng = seed::rng(11);
        let std = 0.1;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (label, offset) in [(0usize, 0.0), (1, 100.0 * std)] {
            for _ in 0..50 {
                let z: f64 = StandardNormal.sample(&mut rng);
                let w: f64 = StandardNormal.sample(&mut rng);
                rows.push(vec![offset + std * z, std * w]);
                labels.push(label);
            }
        }
        let p = generate(&samples(&rows, &labels), &SplitConfig::with_purity(0.9)).unwrap();
        assert_eq!(p.len(), 2);
        for ball in &p.balls {
            assert_eq!(ball.purity, 1.0);
            assert_eq!(ball.size(), 50);
            // brute-force purity recount
            assert!(ball.members.iter().all(|&m| labels[m] == ball.label));
        }
        assert_eq!(p.balls[0].label, 0);
        assert_eq!(p.balls[1].label, 1);
        let stats = partition_stats(&p);
        assert_eq!((stats.ball_count, stats.mean_size), (2, 50.0));
    }

    #[test]
    fn identical_features_terminate_via_label_split() {
        let rows = vec![vec![1.0, 1.0]; 3];
        let p = generate(&samples(&rows, &[0, 0, 1]), &SplitConfig::with_purity(0.9)).unwrap();
        p.check_cover().unwrap();
        assert!(p.balls.iter().all(|b| b.purity >= 0.9 || b.size() == 1));
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn purity_one_terminates() {
        let pts = gaussian_points(64, 4, &mut seed::rng(8));
        let labels: Vec<usize> = (0..64).map(|i| i % 5).collect();
        let p = generate(&samples(&pts, &labels), &SplitConfig::with_purity(1.0)).unwrap();
        p.check_cover().unwrap();
        assert!(p.balls.iter().all(|b| b.purity == 1.0));
    }

    #[test]
    fn min_ball_size_stops_splitting() {
        let pts = gaussian_points(40, 2, &mut seed::rng(4));
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let cfg = SplitConfig {
            min_ball_size: 8,
            ..SplitConfig::with_purity(1.0)
        };
        let p = generate(&samples(&pts, &labels), &cfg).unwrap();
        p.check_cover().unwrap();
        assert!(p.balls.iter().all(|b| b.purity == 1.0 || b.size() <= 8));
    }

    #[test]
    fn singletons_stats() {
        let labels: Vec<usize> = (0..10).collect();
        let pts = gaussian_points(10, 2, &mut seed::rng(1));
        let p = generate(&samples(&pts, &labels), &SplitConfig::with_purity(1.0)).unwrap();
        let s = partition_stats(&p);
        assert_eq!((s.ball_count, s.mean_size), (10, 1.0));
        assert_eq!(s.size_histogram, vec![(1, 10)]);
        assert_eq!(s.purity_histogram[9].count, 10);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(
            generate(&[], &SplitConfig::default()),
            Err(Error::Empty(_))
        ));
        let pts = vec![vec![0.0]];
        assert!(generate(&samples(&pts, &[0]), &SplitConfig::with_purity(0.5)).is_err());
        assert!(generate(&samples(&pts, &[0]), &SplitConfig::with_purity(1.01)).is_err());
    }

    #[test]
    fn parallel_matches_serial() {
        let mut rng = seed::rng(77);
        for p in [0.6, 0.9, 1.0] {
            let pts = gaussian_points(500, 6, &mut rng);
            let labels: Vec<usize> = (0..500).map(|i| (i * 7 + i / 3) % 4).collect();
            let s = samples(&pts, &labels);
            let cfg = SplitConfig {
                seed: 3,
                ..SplitConfig::with_purity(p)
            };
            let serial = generate(&s, &cfg).unwrap();
            let parallel = generate_par(&s, &cfg).unwrap();
            assert_eq!(serial, parallel);
            assert_eq!(serial, generate(&s, &cfg).unwrap());
        }
    }
}
