//! Real-time detection of changes in the mean of weakly dependent
//! time-series.
//!
//! The crate combines a retrospective CUSUM test with a sequential
//! monitoring procedure:
//!
//! - [`offline`]: max-type CUSUM test for a single historical mean change,
//!   normalised by a Bartlett long-run covariance estimate ([`covariance`]).
//! - [`segmentation`]: recursive binary segmentation for multiple changes,
//!   plus a validated variant that re-tests each candidate between its
//!   neighbours and prunes the unconfirmed ones.
//! - [`online`]: open-ended monitoring with a standard (covariance
//!   normalised) or ratio-type (self-normalised) CUSUM stopping rule.
//! - [`critical_values`]: Monte Carlo simulation of the Brownian-functional
//!   critical values for all three tests, with a persistent cache.
//! - [`trend`]: direction-of-change indicators (detector sign and an
//!   EMA/MACD filter).
//! - [`detector`]: the full pipeline — train on history, monitor, label the
//!   direction, keep a quiet distance, retrain — emitting detection events
//!   over a stream.
//! - [`synthetic`]: an ARMA(1,1) generator with planted mean shifts and the
//!   benchmark experiments built on it.
//! - [`eval`]: dynamic time warping, a Hurst exponent estimator,
//!   autocorrelation summaries and direction/magnitude baselines.
//!
//! # Quick start
//!
//! ```
//! use rcpd::critical_values::FixedCv;
//! use rcpd::segmentation::modified_binary_segmentation;
//! use rcpd::series::TimeSeries;
//!
//! // A step from 0 to 3 half-way through the sample.
//! let mut values = vec![0.0; 60];
//! values.extend(vec![3.0; 60]);
//! let series = TimeSeries::from_values(values).unwrap();
//!
//! // Asymptotic 5% critical value of the retrospective test at r = 1.
//! let cv = FixedCv::offline_only(1.844);
//! let cps = modified_binary_segmentation(&series, series.full_segment(), &cv, 0.05).unwrap();
//! assert_eq!(cps, vec![60]);
//! ```

pub mod covariance;
pub mod critical_values;
pub mod detector;
pub mod error;
pub mod eval;
pub mod offline;
pub mod online;
pub mod segmentation;
pub mod series;
pub mod synthetic;
pub mod trend;

pub use error::{Error, Result};
pub use series::{ChangePoint, Direction, Phase, RcpdConfig, Segment, TimeSeries, TrendIndicator, Variant};

// The book chapters double as doc-tests so their snippets stay compilable.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(time_series, "../../../book/src/time-series.md");
    chapter!(offline_detection, "../../../book/src/offline-detection.md");
    chapter!(segmentation, "../../../book/src/segmentation.md");
    chapter!(critical_values, "../../../book/src/critical-values.md");
    chapter!(online_monitoring, "../../../book/src/online-monitoring.md");
    chapter!(trend_indicators, "../../../book/src/trend-indicators.md");
    chapter!(detector, "../../../book/src/detector.md");
    chapter!(synthetic_benchmarks, "../../../book/src/synthetic-benchmarks.md");
    chapter!(evaluation, "../../../book/src/evaluation.md");
}
