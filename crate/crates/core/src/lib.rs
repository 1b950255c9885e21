//! Granular-ball computing for learning with noisy labels.
//!
//! A batch of labeled feature vectors is partitioned into *granular-balls*:
//! groups of nearby samples whose labels mostly agree. A classifier is then
//! trained on one example per ball (the ball's center and majority label)
//! instead of one per sample. Isolated label flips get outvoted inside their
//! ball, so the effective training labels are cleaner than the raw ones.
//!
//! The crate is organized as:
//!
//! - [`ball`]: samples, balls, partitions, purity and centers.
//! - [`ballgen`]: purity-constrained recursive 2-means ball generation.
//! - [`layer`]: the ball layer as a differentiable batch transform.
//! - [`replay`]: the experience pool of high-purity balls.
//! - [`trainer`]: a small MLP trained with SGD on ball or sample labels.
//! - [`noise`]: synthetic data, label-noise injection, CSV I/O and noise rates.
//! - [`experiment`]: configs and the runs behind the `granule` CLI.
//!
//! The guide in `book/` walks through each piece; its code samples are
//! compiled and run as doctests.

pub mod ball;
pub mod ballgen;
pub mod error;
pub mod experiment;
pub mod layer;
pub mod matrix;
pub mod noise;
pub mod replay;
pub mod seed;
pub mod trainer;

pub use ball::{center, purity, ClassId, Dataset, GranularBall, LabeledSample, Partition};
pub use ballgen::{generate, generate_rows, partition_stats, two_means, SplitConfig};
pub use error::{Error, Result};
pub use matrix::Matrix;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/purity-and-centers.md")]
    mod purity_and_centers {}
    #[doc = include_str!("../../../book/src/ball-generation.md")]
    mod ball_generation {}
    #[doc = include_str!("../../../book/src/gbc-layer.md")]
    mod gbc_layer {}
    #[doc = include_str!("../../../book/src/experience-replay.md")]
    mod experience_replay {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/label-noise.md")]
    mod label_noise {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/file-formats.md")]
    mod file_formats {}
}
