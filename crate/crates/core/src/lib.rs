//! Time series imputation engine and benchmark harness.
//!
//! The crate turns a fully observed matrix of aligned series into a test
//! bed for missing-value recovery: simulate realistic gaps
//! ([`gengap`]), fill them with one of six algorithm families
//! ([`impute`]), score the fill against the hidden truth ([`metrics`]),
//! search the algorithm's parameter space ([`optimize`]), attribute its
//! error to dataset characteristics ([`explain`]), measure the effect on
//! forecasting ([`downstream`]), and sweep whole grids of such experiments
//! ([`bench`]). [`pipeline`] drives all of it from one JSON config.
//!
//! ```
//! use gapfill::gengap::ContaminationSpec;
//! use gapfill::impute::{impute, ParamMap};
//! use gapfill::metrics::score;
//! use gapfill::synthetic::{generate_synthetic, SyntheticKind};
//!
//! let truth = generate_synthetic(SyntheticKind::CorrelatedLowrank, 8, 200, 0.05, 7)?;
//! let (holed, delta) = gapfill::gengap::contaminate(&truth, &ContaminationSpec::mono(0.2, 7))?;
//! let run = impute(&holed, "cdrec", &ParamMap::new(), 7)?;
//! let scores = score(&truth, &run.imputed, &delta)?;
//! assert!(scores.rmse < 0.5);
//! # Ok::<(), gapfill::Error>(())
//! ```

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctest;

pub mod bench;
pub mod dataset;
pub mod downstream;
pub mod error;
pub mod explain;
pub mod gengap;
pub mod guide;
pub mod impute;
pub mod metrics;
pub mod optimize;
pub mod pipeline;
pub mod seed;
pub mod synthetic;

pub use dataset::{Dataset, DeltaSource, MaskDelta, Normalization, Orientation};
pub use error::{Error, Result};
