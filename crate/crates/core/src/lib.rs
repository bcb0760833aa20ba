//! Exact online changepoint detection for one-parameter exponential families.
//!
//! A [`Detector`] keeps, for each monitored direction, the candidate change
//! times whose likelihood-ratio curves can still be maximal, pruned by
//! comparing segment means of the sufficient statistic. A prefix bound on the
//! retained curves lets the threshold check stop after about one curve
//! evaluation per observation.
//!
//! ```
//! use focus_core::{Detector, DetectorConfig, Directions, FamilySpec, Prechange};
//!
//! let config = DetectorConfig::new(
//!     FamilySpec::poisson(),
//!     Prechange::Known(1.0),
//!     Directions::Both,
//!     12.0,
//! );
//! let mut detector = Detector::new(config)?;
//! let mut alarm = None;
//! for x in [1.0, 0.0, 2.0, 1.0, 5.0, 6.0, 4.0, 7.0] {
//!     if let Some(d) = detector.step(x)?.detection {
//!         alarm = Some(d);
//!         break;
//!     }
//! }
//! assert_eq!(alarm.map(|d| d.tau_low), Some(4));
//! # Ok::<(), focus_core::Error>(())
//! ```

pub mod bench;
pub mod cli;
pub mod counters;
pub mod detector;
pub mod error;
pub mod family;
pub mod format;
pub mod maxcheck;
pub mod oracle;
pub mod qstruct;

pub use counters::CounterSet;
pub use detector::{Detection, Detector, DetectorConfig, Directions, StepResult};
pub use error::{Error, Result};
pub use family::{Direction, FamilyKind, FamilySpec, SuffStat};
pub use maxcheck::{check, CheckOutcome, Decision};
pub use oracle::{naive_q, OracleResult};
pub use qstruct::{Prechange, PruneState, RootPruneState};

/// Snippets from the guide in `book/`, compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/families.md")]
    mod families {}
    #[doc = include_str!("../../../book/src/pruning.md")]
    mod pruning {}
    #[doc = include_str!("../../../book/src/unknown.md")]
    mod unknown {}
    #[doc = include_str!("../../../book/src/maxcheck.md")]
    mod maxcheck {}
    #[doc = include_str!("../../../book/src/detector.md")]
    mod detector {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
