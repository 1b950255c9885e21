//! Experience pool of high-purity granular-balls.
//!
//! Each training step may admit some of its freshly generated balls. Later
//! steps draw a few of them back, pull their member samples into the batch,
//! and recompute each drawn ball's center from the members' current
//! features. Membership and label stay as they were at admission.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::seq::index;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::ball::{ClassId, GranularBall};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayConfig {
    /// Maximum number of balls held.
    pub capacity: usize,
    /// Minimum purity for admission, in `(0.5, 1.0]`.
    pub admit_purity: f64,
    /// Smallest ball admitted. Singletons are trivially pure, so the default
    /// keeps them out.
    pub min_admit_size: usize,
    /// Fraction of each batch filled from replayed balls, in `[0, 1)`.
    pub replay_fraction: f64,
    pub seed: u64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            capacity: 512,
            admit_purity: 1.0,
            min_admit_size: 2,
            replay_fraction: 0.25,
            seed: 0,
        }
    }
}

impl ReplayConfig {
    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(Error::InvalidConfig("replay capacity must be positive".into()));
        }
        if !(self.admit_purity > 0.5 && self.admit_purity <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "admit_purity {} outside (0.5, 1.0]",
                self.admit_purity
            )));
        }
        if !(0.0..1.0).contains(&self.replay_fraction) {
            return Err(Error::InvalidConfig(format!(
                "replay_fraction {} outside [0, 1)",
                self.replay_fraction
            )));
        }
        Ok(())
    }
}

/// A ball stored in the pool. Members are dataset-level sample indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalBall {
    pub members: Vec<usize>,
    pub label: ClassId,
    pub center: Vec<f64>,
    pub purity_at_admission: f64,
    pub admitted_step: u64,
}

#[derive(Debug, Clone)]
pub struct ReplayPool {
    cfg: ReplayConfig,
    balls: VecDeque<EmpiricalBall>,
    rng: Rng,
}

/// Serialized pool contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolCheckpoint {
    pub schema_version: u32,
    pub config: ReplayConfig,
    /// Position of the sampling stream, so a restored pool continues the
    /// same draws.
    pub rng_word_pos: u128,
    pub balls: Vec<EmpiricalBall>,
}

impl ReplayPool {
    pub fn new(cfg: ReplayConfig) -> Result<Self> {
        cfg.validate()?;
        let rng = seed::rng(cfg.seed);
        Ok(Self {
            cfg,
            balls: VecDeque::new(),
            rng,
        })
    }

    pub fn config(&self) -> &ReplayConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn balls(&self) -> impl ExactSizeIterator<Item = &EmpiricalBall> {
        self.balls.iter()
    }

    /// Admit balls whose members are already dataset-level indices.
    pub fn admit(&mut self, balls: &[GranularBall], step: u64) -> usize {
        self.admit_mapped(balls, step, |m| m)
    }

    /// Admit balls whose members are translated through `to_index` (for
    /// example batch row to dataset index). Returns how many were admitted.
    pub fn admit_mapped(&mut self, balls: &[GranularBall], step: u64, to_index: impl Fn(usize) -> usize) -> usize {
        let mut admitted = 0;
        for b in balls {
            if b.purity < self.cfg.admit_purity || b.members.len() < self.cfg.min_admit_size {
                continue;
            }
            let mut members: Vec<usize> = b.members.iter().map(|&m| to_index(m)).collect();
            members.sort_unstable();
            self.balls.push_back(EmpiricalBall {
                members,
                label: b.label,
                center: b.center.clone(),
                purity_at_admission: b.purity,
                admitted_step: step,
            });
            admitted += 1;
        }
        while self.balls.len() > self.cfg.capacity {
            self.evict_oldest();
        }
        admitted
    }

    fn evict_oldest(&mut self) {
        let oldest = self
            .balls
            .iter()
            .enumerate()
            .min_by_key(|(i, b)| (b.admitted_step, *i))
            .map(|(i, _)| i);
        if let Some(i) = oldest {
            self.balls.remove(i);
        }
    }

    /// Draw `min(k, len)` distinct balls uniformly. Also returns the union of
    /// their members, in first-seen order.
    pub fn sample_empirical(&mut self, k: usize) -> (Vec<EmpiricalBall>, Vec<usize>) {
        let k = k.min(self.balls.len());
        if k == 0 {
            return (Vec::new(), Vec::new());
        }
        let picks = index::sample(&mut self.rng, self.balls.len(), k);
        let drawn: Vec<EmpiricalBall> = picks.iter().map(|i| self.balls[i].clone()).collect();
        let members = union_of_members(&drawn);
        (drawn, members)
    }

    /// Draw balls in uniformly random order, keeping each one whose members
    /// fit within `max_samples` distinct samples in total.
    pub fn sample_within_budget(&mut self, max_samples: usize) -> (Vec<EmpiricalBall>, Vec<usize>) {
        if max_samples == 0 || self.balls.is_empty() {
            return (Vec::new(), Vec::new());
        }
        let order = index::sample(&mut self.rng, self.balls.len(), self.balls.len());
        let mut seen = HashSet::new();
        let mut drawn = Vec::new();
        let mut members = Vec::new();
        for i in order.iter() {
            let ball = &self.balls[i];
            let fresh = ball.members.iter().filter(|m| !seen.contains(*m)).count();
            if members.len() + fresh > max_samples {
                continue;
            }
            for &m in &ball.members {
                if seen.insert(m) {
                    members.push(m);
                }
            }
            drawn.push(ball.clone());
            if members.len() == max_samples {
                break;
            }
        }
        (drawn, members)
    }

    pub fn checkpoint(&self) -> PoolCheckpoint {
        PoolCheckpoint {
            schema_version: 1,
            config: self.cfg.clone(),
            rng_word_pos: self.rng.get_word_pos(),
            balls: self.balls.iter().cloned().collect(),
        }
    }

    pub fn restore(ckpt: PoolCheckpoint) -> Result<Self> {
        let mut pool = Self::new(ckpt.config)?;
        if ckpt.balls.len() > pool.cfg.capacity {
            return Err(Error::InvalidConfig("checkpoint holds more balls than capacity".into()));
        }
        pool.rng = Rng::seed_from_u64(pool.cfg.seed);
        pool.rng.set_word_pos(ckpt.rng_word_pos);
        pool.balls = ckpt.balls.into();
        Ok(pool)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.checkpoint())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::restore(serde_json::from_str(s)?)
    }
}

fn union_of_members(balls: &[EmpiricalBall]) -> Vec<usize> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for b in balls {
        for &m in &b.members {
            if seen.insert(m) {
                out.push(m);
            }
        }
    }
    out
}

/// Recompute each ball's center from its members' current features.
pub fn refresh_centers(drawn: &[EmpiricalBall], current: &HashMap<usize, Vec<f64>>) -> Result<Vec<EmpiricalBall>> {
    refresh_centers_with(drawn, |i| current.get(&i).map(Vec::as_slice))
}

/// Like [`refresh_centers`], looking features up through a closure.
pub fn refresh_centers_with<'a>(
    drawn: &[EmpiricalBall],
    lookup: impl Fn(usize) -> Option<&'a [f64]>,
) -> Result<Vec<EmpiricalBall>> {
    drawn
        .iter()
        .map(|b| {
            let first = b.members.first().ok_or(Error::Empty("empirical ball"))?;
            let dim = lookup(*first).ok_or(Error::MissingIndex(*first))?.len();
            let mut sum = vec![0.0; dim];
            for &m in &b.members {
                let f = lookup(m).ok_or(Error::MissingIndex(m))?;
                if f.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: f.len(),
                    });
                }
                for (s, x) in sum.iter_mut().zip(f) {
                    *s += x;
                }
            }
            let n = b.members.len() as f64;
            sum.iter_mut().for_each(|s| *s /= n);
            Ok(EmpiricalBall {
                center: sum,
                ..b.clone()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gb(members: Vec<usize>, purity: f64) -> GranularBall {
        GranularBall {
            center: vec![0.0; 2],
            members,
            label: 1,
            purity,
        }
    }

    fn pool(capacity: usize, admit_purity: f64) -> ReplayPool {
        ReplayPool::new(ReplayConfig {
            capacity,
            admit_purity,
            ..ReplayConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn purity_gate() {
        let mut p = pool(10, 1.0);
        let n = p.admit(&[gb(vec![0, 1], 1.0), gb(vec![2, 3], 0.8), gb(vec![4, 5], 1.0)], 0);
        assert_eq!(n, 2);
        let mut p = pool(10, 0.9);
        assert_eq!(p.admit(&[gb(vec![0, 1], 0.95), gb(vec![2, 3], 0.85)], 0), 1);
    }

    #[test]
    fn singletons_excluded_by_default() {
        let mut p = pool(10, 1.0);
        assert_eq!(p.admit(&[gb(vec![7], 1.0)], 0), 0);
    }

    #[test]
    fn fifo_eviction() {
        let mut p = pool(1, 1.0);
        p.admit(&[gb(vec![0, 1], 1.0)], 0);
        p.admit(&[gb(vec![2, 3], 1.0)], 1);
        assert_eq!(p.len(), 1);
        assert_eq!(p.balls().next().unwrap().members, vec![2, 3]);
    }

    #[test]
    fn sampling() {
        let mut p = pool(10, 1.0);
        let balls: Vec<_> = (0..5).map(|i| gb(vec![2 * i, 2 * i + 1], 1.0)).collect();
        p.admit(&balls, 0);
        let (drawn, idx) = p.sample_empirical(2);
        assert_eq!(drawn.len(), 2);
        assert_ne!(drawn[0].members, drawn[1].members);
        assert_eq!(idx.len(), 4);

        let mut empty = pool(10, 1.0);
        let (d, i) = empty.sample_empirical(3);
        assert!(d.is_empty() && i.is_empty());

        let mut a = pool(10, 1.0);
        let mut b = pool(10, 1.0);
        a.admit(&balls, 0);
        b.admit(&balls, 0);
        assert_eq!(a.sample_empirical(3), b.sample_empirical(3));
    }

    #[test]
    fn budgeted_sampling_respects_budget() {
        let mut p = pool(20, 1.0);
        let balls: Vec<_> = (0..10).map(|i| gb((3 * i..3 * i + 3).collect(), 1.0)).collect();
        p.admit(&balls, 0);
        let (drawn, idx) = p.sample_within_budget(7);
        assert_eq!(drawn.len(), 2);
        assert_eq!(idx.len(), 6);
        assert!(p.sample_within_budget(0).0.is_empty());
    }

    #[test]
    fn refresh() {
        let ball = EmpiricalBall {
            members: vec![4, 9],
            label: 0,
            center: vec![5.0, 5.0],
            purity_at_admission: 1.0,
            admitted_step: 0,
        };
        let feats: HashMap<usize, Vec<f64>> = [(4, vec![0.0, 0.0]), (9, vec![2.0, 2.0])].into();
        let out = refresh_centers(std::slice::from_ref(&ball), &feats).unwrap();
        assert_eq!(out[0].center, vec![1.0, 1.0]);
        assert_eq!(out[0].members, ball.members);
        let missing: HashMap<usize, Vec<f64>> = [(4, vec![0.0, 0.0])].into();
        assert!(matches!(refresh_centers(&[ball], &missing), Err(Error::MissingIndex(9))));
    }

    #[test]
    fn checkpoint_resumes_draws() {
        let mut p = pool(10, 1.0);
        let balls: Vec<_> = (0..6).map(|i| gb(vec![2 * i, 2 * i + 1], 1.0)).collect();
        p.admit(&balls, 3);
        p.sample_empirical(2);
        let mut restored = ReplayPool::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(restored.sample_empirical(3), p.sample_empirical(3));
    }

    #[test]
    fn config_validation() {
        let bad = |c: ReplayConfig| ReplayPool::new(c).is_err();
        assert!(bad(ReplayConfig { capacity: 0, ..Default::default() }));
        assert!(bad(ReplayConfig { replay_fraction: 1.0, ..Default::default() }));
        assert!(bad(ReplayConfig { admit_purity: 0.5, ..Default::default() }));
    }
}
