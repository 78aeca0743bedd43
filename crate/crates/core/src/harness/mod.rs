//! Deterministic Monte-Carlo engine.
//!
//! Every trial draws from its own ChaCha streams keyed by
//! `(master seed, point id, trial index, purpose)`, and aggregation walks trials in
//! index order, so results do not depend on the number of worker threads.

mod point;
mod scenario;
mod sweep;
mod trial;

pub use point::{binomial, run_point, trial_rng, Metric, TrialStreams, PointResult, LAST_METRIC, Z99};
pub use scenario::{is_known_key, Scenario, SCENARIO_KEYS};
pub use sweep::{format_rows, run_sweep, SweepPoint, SweepSpec, SweepSummary, CSV_HEADER};
pub use trial::{run_trial, PointContext, TrialRecord};
