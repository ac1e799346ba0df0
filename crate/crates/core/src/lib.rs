//! Peak-bloom forecasting as multi-class classification.
//!
//! Daily temperatures are cut into sliding windows; each window is labeled
//! with how many days remain until full flowering (`1..=k`), or `0` when the
//! bloom is further away than the horizon `k`. Two classifiers are
//! provided:
//!
//! * [`svm`]: one-vs-one soft-margin SVMs with an RBF kernel, trained by
//!   SMO, under three imbalance regimes (ordinary, class-weighted penalties,
//!   SMOTE oversampling, see [`imbalance`]).
//! * [`lstm`]: a many-to-one stacked LSTM with a dense softmax head, trained
//!   by backpropagation through time.
//!
//! [`metrics`] computes accuracy, macro precision/recall/F1, confusion
//! matrices and PR curves.
//!
//! ```
//! use bloomcast::data::{build_windows, BloomEvent, DailyRecord, WindowConfig};
//!
//! let records: Vec<DailyRecord> = (1..=60)
//!     .map(|doy| DailyRecord { year: 2020, doy, tmax: None, tmin: None, tavg: Some(doy as f64 / 10.0) })
//!     .collect();
//! let events = [BloomEvent { year: 2020, bloom_doy: 50 }];
//! let ds = build_windows(&records, &events, &WindowConfig::default())?.dataset;
//! assert_eq!(ds.len(), 40); // anchors 10..=49
//! assert_eq!(ds.class_counts[&0], 30);
//! # Ok::<(), bloomcast::Error>(())
//! ```

pub mod data;
mod error;
pub mod imbalance;
pub mod lstm;
pub mod metrics;
mod persist;
pub mod svm;

pub use error::{Error, ErrorKind, Result};
pub use persist::model_format;

// The guide's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/imbalance.md")]
    mod imbalance {}
    #[doc = include_str!("../../../book/src/svm.md")]
    mod svm {}
    #[doc = include_str!("../../../book/src/lstm.md")]
    mod lstm {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
