//! Attention baselines, gaze-correlation metrics, task metrics, a toy
//! differentiable attentive classifier, FGSM robustness evaluation, and the
//! comparison protocols that tie them together.
//!
//! The library is organized around a small set of dense map types
//! ([`tensor`]), five attention baselines ([`attention`]), center-bias
//! resistant gaze metrics ([`gaze`]), task metrics ([`task`]), a desk-scale
//! attentive classifier with hand-derived gradients ([`model`]), FGSM
//! perturbation and robustness scoring ([`adversarial`]), experiment
//! protocols ([`protocols`]), and file formats plus report emission ([`io`]
//! and [`report`]). Everything is deterministic under a fixed seed.

pub mod adversarial;
pub mod attention;
pub mod error;
pub mod gaze;
pub mod io;
pub mod model;
pub mod protocols;
pub mod report;
pub mod task;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{apply_attention, AttentionMap, DensityMap, FeatureMap, Grid, ScalarMap, SignificanceMap};
