//! Minimax testing of smoothness in the Gaussian wavelet sequence model.
//!
//! A signal is represented by its wavelet coefficients `a[l][k]` on dyadic
//! levels `J0..=L_max`. Observations add independent `N(0, 1/n)` noise to
//! every coefficient. Given a signal known to lie in the Besov ball
//! `Σ(t, B)`, the level-wise test in [`smooth_test`] decides whether it lies
//! in the smaller ball `Σ(s, B)` (`s > t`) or is separated from it in `L2`.
//!
//! Modules:
//!
//! * [`besov`]: coefficient trees, Besov norms, projections and the exact
//!   distance to a ball.
//! * [`noise`]: seeded Gaussian observations (plain, split-sample and
//!   heteroscedastic).
//! * [`signal`]: null members, Rademacher alternatives and separated
//!   alternatives.
//! * [`smooth_test`]: level statistics, thresholds and the decision rule.
//! * [`lower_bound`]: the chi-square quantity behind the non-testability floor.
//! * [`harness`]: Monte Carlo error estimates, rate sweeps and detection
//!   boundaries.
//! * [`ingest`]: Haar coefficient estimates from regression or density
//!   samples.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod besov;
pub mod error;
pub mod format;
pub mod harness;
pub mod ingest;
pub mod lower_bound;
pub mod noise;
pub mod signal;
pub mod smooth_test;
mod sum;

pub use besov::{level_size, BesovBall, CoefficientTree, Layout};
pub use error::{Error, Result};
pub use harness::{
    detection_boundary, estimate_error, rate_sweep, wilson_interval, AmplitudePolicy, BoundaryPoint, ExperimentMode, ExperimentSpec,
    MCResult, SweepResult, SweepSettings, TestVariant,
};
pub use ingest::{estimate_coefficients, test_from_samples, IngestMode, SampleKind, SampleSet};
pub use lower_bound::LowerBoundInstance;
pub use noise::{derive_seed, observe, observe_hetero, observe_split, Observation, SplitTag};
pub use signal::SignalSpec;
pub use smooth_test::{
    compute_j, run_split_test, run_test, LevelStat, SplitCalibration, TestParams, TestReport,
};
