#![cfg_attr(not(feature = "std"), no_std)]

//! Distance-based open-set recognition with class-inclusion background
//! regularization.
//!
//! Everything in this crate is pure computation over in-memory data and
//! builds with `default-features = false` (only `alloc` is required). File
//! formats, configuration and the command line live in the `openset` crate.
//!
//! Module map:
//! - [`special`]: log-gamma, regularized upper incomplete gamma, chi-square
//!   probability of inclusion and its derivative.
//! - [`autodiff`]: a tape-based reverse-mode differentiation engine over
//!   dense `f64` tensors.
//! - [`model`]: MLP feature extractor, distance and softmax heads, open-set
//!   decision rules.
//! - [`losses`]: closed-set cross-entropy, class-inclusion loss and the
//!   baseline regularizers.
//! - [`data`]: synthetic known/unknown class generator and mini-batching.
//! - [`metrics`]: accuracy, AUROC, AUPR, FPR@TPR, OSCR and macro-F1.
//! - [`trainer`]: SGD with momentum, warm-up and cosine learning-rate decay.

extern crate alloc;

pub mod autodiff;
pub mod data;
mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod special;
pub mod trainer;

pub use autodiff::{Graph, Tensor, Var};
pub use error::{Error, Result};
pub use model::{DistanceHead, Head, Mlp, Model, OpenSetDecision, OpenSetLabel, SoftmaxHead};
