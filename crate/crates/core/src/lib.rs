//! Physics-regularized contrastive representation learning for fall-motion
//! windows.
//!
//! The pipeline has four stages:
//!
//! 1. [`data`] loads and stores trajectories, windows and contact descriptors.
//! 2. [`labeling`] turns contact descriptors into one denoised contact label
//!    per window (`Supported`, `Trunk`, `Head`).
//! 3. [`relations`], [`loss`] and [`encoder`] train a small feed-forward
//!    encoder with a masked trajectory-contrastive loss, an exact-class
//!    physics attraction term and a variance regularizer.
//! 4. [`eval`] measures how well the embedding geometry lines up with the
//!    contact labels (severity axis, rank correlations, probes, retrieval).
//!
//! [`synth`] generates seeded datasets with planted labels so every stage can
//! be checked end to end, and [`experiment`] wires the stages together for the
//! vanilla control and the ablation grid.

pub mod config;
pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod labeling;
pub mod loss;
pub mod matrix;
pub mod relations;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::Matrix;
