//! Phytoplankton species identification from multichannel flow-cytometry
//! pulse signals.
//!
//! The pipeline turns raw per-particle traces ([`signal`]) into one of three
//! feature families ([`features`], [`dtw`]), classifies them with K-NN
//! ([`knn`]), an SMO-trained SVM ([`svm`]) or a random-forest variant
//! ([`forest`]), and scores everything with stratified repeated
//! cross-validation ([`eval`]). [`synth`] generates deterministic benchmark
//! datasets.

pub mod dtw;
pub mod error;
pub mod eval;
pub mod features;
pub mod forest;
pub mod knn;
pub mod rng;
pub mod signal;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
