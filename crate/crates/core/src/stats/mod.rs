//! Monte Carlo estimators and fits for flight tails, moments, neutral runs,
//! correlations and mean-square displacement.

pub mod accum;
pub mod correlation;
pub mod ctime;
pub mod fit;
pub mod msd;
pub mod neutral;
pub mod tail;

pub use accum::{map_reduce, unit_rng, FixedSum, Mergeable, Moments};
pub use correlation::{correlation, fit_partial_sums, CorrCurve, SymmetryTest};
pub use ctime::{ctime_rescale, CtimeResult};
pub use fit::{FitParam, FitResult};
pub use msd::{fit_msd_models, msd, MsdCurve, MsdFits, MsdModel};
pub use neutral::{neutral_run_stats, NeutralRunStats};
pub use tail::{
    fit_powerlaw_ccdf, flight_sample_run, flight_tail, truncated_second_moment, MomentCurve, TailHistogram,
};
