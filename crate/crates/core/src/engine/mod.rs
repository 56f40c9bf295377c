//! The boosting loop, leveraging schemes and per-round trace.

mod fit;
mod scheme;
mod trace;

pub use fit::{
    fbde_fit, fbde_fit_holdout, fbde_fit_with, kl_or_infinite, replay_trace, FitConfig, FitResult,
    KlEval, NegativeSampling, RoundContext, TreeLearner, WeakLearner,
};
pub use scheme::{LeveragingScheme, SchemeKind};
pub use trace::{Trace, TraceRow, TRACE_HEADER};
