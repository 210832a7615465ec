//! Online anomaly detection with false discovery rate control.
//!
//! Observations are turned into empirical p-values against a calibration set
//! of normal scores, and a step-up rule on windows of `m` p-values sets each
//! detection threshold. Choosing the calibration size as
//! `n = ceil(l m / alpha) - 1` makes the step-up rule on empirical p-values
//! keep its false discovery rate at `m0 alpha / m`, and running it at the
//! deflated level `alpha' = alpha / (1 + (1 - alpha) / (m pi))` carries the
//! guarantee over to the whole stream.
//!
//! ```
//! use online_fdr::{generator, detector, Level};
//!
//! let series = generator::generate_mixture(&generator::MixtureConfig {
//!     pi: 0.01,
//!     reference: generator::Reference::GaussianStd,
//!     anomaly_shift: 4.0,
//!     length: 5_000,
//!     seed: 7,
//! })?;
//! let cfg = detector::DetectorConfig::default();
//! let records = detector::run_stream(&series.values, Some(&series.labels), &cfg)?;
//! let counts = detector::counts_from_records(&records, false)?;
//! assert!(online_fdr::metrics::fdp(&counts) <= 1.0);
//! # Ok::<(), online_fdr::Error>(())
//! ```

pub mod detector;
pub mod error;
pub mod experiments;
pub mod generator;
pub mod io;
pub mod level;
pub mod metrics;
pub mod multiple_testing;
pub mod permutation;
pub mod prds;
pub mod pvalues;
pub mod rng;
pub mod scoring;
pub mod sim;
pub mod theory;

pub use error::{Error, Result};
pub use level::Level;
pub use pvalues::PValue;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/pvalues.md")]
    mod pvalues {}
    #[doc = include_str!("../../../book/src/step-up.md")]
    mod step_up {}
    #[doc = include_str!("../../../book/src/streams.md")]
    mod streams {}
    #[doc = include_str!("../../../book/src/lord.md")]
    mod lord {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
