//! Evidential radiance fields on synthetic scenes.
//!
//! A small neural field predicts, for every sample point, a mean color, an
//! aleatoric and an epistemic uncertainty, a shape score and a density.
//! Volume rendering carries these to a normal-inverse-gamma prediction per
//! pixel, trained with its Student-t marginal likelihood. Built on top: scene
//! cleaning by aleatoric thresholding, active view selection by epistemic
//! uncertainty, metrics, and self-checks against independent numerical routes.
//!
//! The `evnerf` binary in `src/bin` wraps [`cli`].

pub mod apps;
pub mod autodiff;
pub mod baselines;
pub mod checks;
pub mod cli;
pub mod evidential;
pub mod field;
pub mod image;
pub mod io;
pub mod math;
pub mod metrics;
pub mod render;
pub mod scene;
pub mod train;
