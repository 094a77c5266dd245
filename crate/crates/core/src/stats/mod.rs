//! Rate fits, tail estimators and expansion diagnostics.

mod interval;
mod lyapunov;
mod rate;
mod tails;

pub use interval::{wilson, TailPoint, Z95};
pub use lyapunov::{
    ad_step, lyapunov_check, q_nonvanishing_check, random_traceless, LyapunovReport, QReport,
    Q_ZERO_TOL,
};
pub use rate::{estimate_rate, fit_log_tail, RateFit, RateOutcome, SeriesPoint, SlopeFit, SIGNAL_SE};
pub use tails::{
    chernoff_bound, chernoff_rate, chernoff_tail, conjugation_growth, expansion_set_mass, TailCurve,
    MAX_ZERO_REDRAWS,
};
