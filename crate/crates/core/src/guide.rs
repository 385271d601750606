//! The long-form guide, one chapter per submodule.
//!
//! The text lives in `book/src/` and renders with `mdbook build book`;
//! embedding it here makes every example compile and run under
//! `cargo test`, so the guide cannot drift from the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/datasets.md")]
pub mod datasets {}

#[doc = include_str!("../../../book/src/contamination.md")]
pub mod contamination {}

#[doc = include_str!("../../../book/src/algorithms.md")]
pub mod algorithms {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/optimization.md")]
pub mod optimization {}

#[doc = include_str!("../../../book/src/explanation.md")]
pub mod explanation {}

#[doc = include_str!("../../../book/src/downstream.md")]
pub mod downstream {}

#[doc = include_str!("../../../book/src/benchmarking.md")]
pub mod benchmarking {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
