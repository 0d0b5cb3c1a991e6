//! Ensemble harnesses: measurement outcomes, decoherence rates, fringe
//! visibility and heating.
//!
//! Every trajectory `i` draws from `RngStream::new(master_seed, i)` and all
//! aggregation runs in index order after the parallel part finishes, so a
//! report depends only on its configuration and seed.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

pub mod born;
pub mod decoherence;
pub mod heating;
pub mod visibility;

pub use born::{born_ensemble, born_trial, MeasurementConfig, Outcome, TrialResult};
pub use decoherence::{decoherence_scan, DecoherenceConfig, DecoherenceResult};
pub use heating::{heating_experiment, HeatingConfig, HeatingResult};
pub use visibility::{visibility_experiment, VisibilityConfig, VisibilityResult};

/// Runs independent indexed tasks and returns their results in index order.
pub trait Executor {
    /// Number of workers.
    fn width(&self) -> usize;

    /// Evaluates `task(&mut workspace, i)` for `i in 0..n`. Each worker builds
    /// its own workspace with `init`. Results must come back ordered by `i`.
    fn map_init<W, T, I, F>(&self, n: usize, init: I, task: F) -> Vec<T>
    where
        T: Send,
        I: Fn() -> W + Sync + Send,
        F: Fn(&mut W, usize) -> T + Sync + Send;
}

/// Single-threaded executor.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn width(&self) -> usize {
        1
    }

    fn map_init<W, T, I, F>(&self, n: usize, init: I, task: F) -> Vec<T>
    where
        T: Send,
        I: Fn() -> W + Sync + Send,
        F: Fn(&mut W, usize) -> T + Sync + Send,
    {
        let mut w = init();
        (0..n).map(|i| task(&mut w, i)).collect()
    }
}

/// Summary of one ensemble.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnsembleReport {
    pub n_trajectories: u64,
    pub outcome_counts: BTreeMap<String, u64>,
    pub estimate: f64,
    pub stderr: f64,
    pub fit_diagnostics: BTreeMap<String, f64>,
    pub seed: u64,
}

/// Number of batches used for batch-means standard errors.
pub const N_BATCHES: usize = 20;

/// Contiguous index ranges splitting `n` items into at most `N_BATCHES` batches.
pub(crate) fn batches(n: usize) -> Vec<core::ops::Range<usize>> {
    let nb = N_BATCHES.min(n).max(1);
    (0..nb).map(|b| (b * n / nb)..((b + 1) * n / nb)).collect()
}
