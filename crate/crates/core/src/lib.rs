//! Short-term user interest detection for session-based recommenders.
//!
//! Within a browsing session, each item property's empirical value
//! distribution is tested against the global one with Kullback-Leibler
//! divergence. Properties whose divergence exceeds a Monte-Carlo-calibrated,
//! length-dependent threshold form the session's interest set; a base
//! recommender's weights are then rescaled by per-property likelihood
//! ratios and the top-N recomputed.
//!
//! The crate is `no_std`-compatible (`alloc` required); every number it
//! produces is deterministic given inputs and seeds, with or without the
//! `parallel` feature.
//!
//! - [`catalog`]: item universe, property schema, global distributions
//! - [`dist`]: categorical arithmetic, the smoothed estimator, KL
//! - [`detect`]: threshold calibration and the decision rule
//! - [`rerank`]: base scorers, interest coefficients, enhanced top-N
//! - [`session`]: event logs and sessionization
//! - [`sim`]: synthetic catalogs and sessions with planted interests
//! - [`eval`]: leave-last-out evaluation with DCG and hit metrics

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod catalog;
pub mod detect;
pub mod dist;
pub mod error;
pub mod eval;
mod math;
pub mod rerank;
pub mod session;
pub mod sim;

pub use catalog::{fit_global_model, Catalog, GlobalModel, ModelFit, PropertySchema};
pub use detect::{
    calibrate_thresholds, detect_interest, session_divergence, InterestReport, ThresholdTable,
};
pub use dist::{
    empirical_value_distribution, kl_divergence, smoothed_blend, smoothed_session_estimate,
    Categorical,
};
pub use error::Error;
pub use eval::{dcg_at, evaluate, hit_at, leave_last_out, AlgorithmSpec, EvalParams, EvalSummary};
pub use rerank::{
    base_weights, interest_coefficient, recommend, recommend_with_candidates, BaseScorer,
    InterestProfile, RankedList,
};
pub use session::{split_sessions, sort_events, Event, EventType, Session, SessionEnd};
pub use sim::{
    synth_catalog, synth_session, synth_sessions, tilted_item_distribution, PlantedInterest,
    SimConfig, SynthProperty, SynthSchema,
};
