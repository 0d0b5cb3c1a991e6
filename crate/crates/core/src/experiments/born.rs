//! Measurement model: a spin entangled with a macroscopic pointer.
//!
//! The pointer is one collective coordinate of mass `N·m_N` hit at rate
//! `N·λ`. Spin up pairs with the pointer displaced to `−d/2`, spin down with
//! `+d/2`. Hits act on both branches at once; the trial ends when one
//! branch's weight drops below `decision_epsilon`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use num_complex::Complex64;

use super::{EnsembleReport, Executor};
use crate::collapse::{run_collapse_process, CollapseParams, HitSampler, Schedule};
use crate::error::{Error, Result};
use crate::propagator::{Potential, Propagator};
use crate::qstate::{gaussian_packet, Grid1D, HybridState, UnitSystem};
use crate::rng::RngStream;
use crate::stats;

/// Hits per step must stay below this for snapping hits to step boundaries.
pub const MAX_RATE_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementConfig {
    pub c_up: Complex64,
    pub c_down: Complex64,
    pub pointer_n_nucleons: f64,
    /// Distance between the two pointer positions, internal length units.
    pub pointer_separation: f64,
    pub pointer_sigma: f64,
    pub decision_epsilon: f64,
    pub grid: Grid1D,
    pub dt: f64,
    /// Internal time allowed for a decision.
    pub t_budget: f64,
    pub units: UnitSystem,
}

impl MeasurementConfig {
    /// Real amplitudes `sqrt(p_up)`, `sqrt(1 − p_up)` with the default threshold `1e-6`.
    #[allow(clippy::too_many_arguments)]
    pub fn with_probability(
        p_up: f64,
        pointer_n_nucleons: f64,
        pointer_separation: f64,
        pointer_sigma: f64,
        grid: Grid1D,
        dt: f64,
        t_budget: f64,
        units: UnitSystem,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_up) {
            return Err(Error::Config(format!("|c_up|² must lie in [0, 1], got {p_up}")));
        }
        let cfg = Self {
            c_up: Complex64::new(libm::sqrt(p_up), 0.0),
            c_down: Complex64::new(libm::sqrt(1.0 - p_up), 0.0),
            pointer_n_nucleons,
            pointer_separation,
            pointer_sigma,
            decision_epsilon: 1e-6,
            grid,
            dt,
            t_budget,
            units,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn p_up(&self) -> f64 {
        self.c_up.norm_sqr()
    }

    pub fn validate(&self) -> Result<()> {
        let total = self.c_up.norm_sqr() + self.c_down.norm_sqr();
        if libm::fabs(total - 1.0) > 1e-9 {
            return Err(Error::Config(format!("|c_up|² + |c_down|² = {total}, expected 1")));
        }
        if !(self.pointer_sigma > 0.0 && self.pointer_separation > 4.0 * self.pointer_sigma) {
            return Err(Error::Config(format!(
                "pointer separation {} must exceed 4σ = {}",
                self.pointer_separation,
                4.0 * self.pointer_sigma
            )));
        }
        if !(self.decision_epsilon > 0.0 && self.decision_epsilon < 1.0) {
            return Err(Error::Config(format!("decision_epsilon must lie in (0, 1), got {}", self.decision_epsilon)));
        }
        if !(self.pointer_n_nucleons.is_finite() && self.pointer_n_nucleons >= 1.0) {
            return Err(Error::Config("pointer_n_nucleons must be >= 1".into()));
        }
        if !(self.t_budget > 0.0 && self.dt > 0.0) {
            return Err(Error::Config("t_budget and dt must be positive".into()));
        }
        Ok(())
    }

    /// Collapse parameters with the pointer's amplification folded in.
    pub fn pointer_params(&self, params: &CollapseParams) -> Result<CollapseParams> {
        CollapseParams::new(params.lambda_si, params.r_c, self.pointer_n_nucleons, false)
    }

    /// The entangled spin ⊗ pointer state right after the interaction.
    pub fn initial_state(&self) -> Result<HybridState> {
        let half = self.pointer_separation / 2.0;
        let mass = self.pointer_n_nucleons;
        let left = gaussian_packet(self.grid, -half, 0.0, self.pointer_sigma, mass)?;
        let right = gaussian_packet(self.grid, half, 0.0, self.pointer_sigma, mass)?;
        HybridState::entangle(self.c_up, &left, self.c_down, &right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Outcome {
    Up,
    Down,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Up => "up",
            Outcome::Down => "down",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialResult {
    pub outcome: Outcome,
    /// Internal time at which the outcome was declared.
    pub decision_time: f64,
    pub hits: u32,
}

#[derive(Debug, Clone)]
struct Workspace {
    initial: HybridState,
    prop: Propagator,
    sampler: HitSampler,
    schedule: Schedule,
    epsilon: f64,
}

impl Workspace {
    fn new(cfg: &MeasurementConfig, params: &CollapseParams) -> Result<Self> {
        cfg.validate()?;
        let p = cfg.pointer_params(params)?;
        let initial = cfg.initial_state()?;
        let rate = p.total_rate_internal(initial.mass(), &cfg.units)?;
        if rate * cfg.dt >= MAX_RATE_DT {
            return Err(Error::Config(format!(
                "Λ·dt = {:e} must stay below {MAX_RATE_DT:e}",
                rate * cfg.dt
            )));
        }
        let n_steps = libm::ceil(cfg.t_budget / cfg.dt) as usize;
        Ok(Self {
            prop: Propagator::new(cfg.grid, initial.mass(), &Potential::Free, cfg.dt)?,
            sampler: HitSampler::new(cfg.grid, p.r_c)?,
            schedule: Schedule::new(cfg.t_budget, cfg.dt, n_steps.max(1), rate)?,
            epsilon: cfg.decision_epsilon,
            initial,
        })
    }

    fn run(&mut self, rng: &mut RngStream) -> Result<TrialResult> {
        let mut state = self.initial.clone();
        let epsilon = self.epsilon;
        if let Some(outcome) = decide(&state, epsilon) {
            return Ok(TrialResult {
                outcome,
                decision_time: 0.0,
                hits: 0,
            });
        }
        let mut result = None;
        let mut hits = 0u32;
        let schedule = self.schedule;
        run_collapse_process(
            &mut state,
            &self.prop,
            &mut self.sampler,
            &schedule,
            rng,
            |_, _| Ok(()),
            |event, s| {
                hits += 1;
                if let Some(outcome) = decide(s, epsilon) {
                    result = Some(TrialResult {
                        outcome,
                        decision_time: event.t,
                        hits,
                    });
                    return Ok(ControlFlow::Break(()));
                }
                Ok(ControlFlow::Continue(()))
            },
        )?;
        result.ok_or(Error::Timeout {
            budget: schedule.t_total(),
        })
    }
}

fn decide(state: &HybridState, epsilon: f64) -> Option<Outcome> {
    let (up, down) = state.branch_weights();
    let total = up + down;
    if down < epsilon * total {
        Some(Outcome::Up)
    } else if up < epsilon * total {
        Some(Outcome::Down)
    } else {
        None
    }
}

/// One measurement: evolves the entangled state until one branch dies out.
pub fn born_trial(cfg: &MeasurementConfig, params: &CollapseParams, rng: &mut RngStream) -> Result<TrialResult> {
    Workspace::new(cfg, params)?.run(rng)
}

/// Runs `n_trajectories` independent trials on streams `0..n` of `master_seed`.
///
/// Returns the report and the per-trial results in index order.
pub fn born_ensemble<E: Executor>(
    cfg: &MeasurementConfig,
    params: &CollapseParams,
    n_trajectories: usize,
    master_seed: u64,
    executor: &E,
) -> Result<(EnsembleReport, Vec<TrialResult>)> {
    if n_trajectories == 0 {
        return Err(Error::Config("ensemble needs at least one trajectory".into()));
    }
    let ws = Workspace::new(cfg, params)?;
    let results = executor.map_init(
        n_trajectories,
        || ws.clone(),
        |w, i| w.run(&mut RngStream::new(master_seed, i as u64)),
    );
    let trials = results.into_iter().collect::<Result<Vec<_>>>()?;

    let n = trials.len() as u64;
    let n_up = trials.iter().filter(|t| t.outcome == Outcome::Up).count() as u64;
    let p = cfg.p_up();
    let freq = n_up as f64 / n as f64;
    // Jeffreys-smoothed binomial error, positive even for all-up ensembles.
    let p_s = (n_up as f64 + 0.5) / (n as f64 + 1.0);
    let stderr = libm::sqrt(p_s * (1.0 - p_s) / n as f64);
    let chi2 = stats::binomial_chi2(n_up, n, p);

    let mut counts = BTreeMap::new();
    counts.insert(Outcome::Up.as_str().to_string(), n_up);
    counts.insert(Outcome::Down.as_str().to_string(), n - n_up);
    let mut diag = BTreeMap::new();
    diag.insert("expected_p_up".to_string(), p);
    diag.insert("chi2".to_string(), chi2);
    diag.insert("p_value".to_string(), stats::chi2_sf_1dof(chi2));
    let binom = libm::sqrt(p * (1.0 - p) / n as f64);
    diag.insert(
        "z_score".to_string(),
        if binom > 0.0 { (freq - p) / binom } else if freq == p { 0.0 } else { f64::INFINITY },
    );
    diag.insert(
        "mean_decision_time".to_string(),
        trials.iter().map(|t| t.decision_time).sum::<f64>() / n as f64,
    );
    diag.insert(
        "mean_hits".to_string(),
        trials.iter().map(|t| t.hits as f64).sum::<f64>() / n as f64,
    );
    diag.insert("rate_internal".to_string(), ws.schedule.rate);
    Ok((
        EnsembleReport {
            n_trajectories: n,
            outcome_counts: counts,
            estimate: freq,
            stderr,
            fit_diagnostics: diag,
            seed: master_seed,
        },
        trials,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Sequential;

    fn config(p_up: f64) -> (MeasurementConfig, CollapseParams) {
        let units = UnitSystem::default();
        let grid = Grid1D::centered(256, 0.1).unwrap();
        // Λ = 1e23 · 1e-16 s⁻¹ = 1e7 s⁻¹ ≈ 1.586 per internal time unit
        let cfg = MeasurementConfig::with_probability(p_up, 1e23, 10.0, 1.0, grid, 5e-4, 12.6, units).unwrap();
        (cfg, CollapseParams::nucleon(1e-16, 1.0).unwrap())
    }

    #[test]
    fn certain_spin_is_always_up() {
        let (cfg, params) = config(1.0);
        for i in 0..20 {
            let r = born_trial(&cfg, &params, &mut RngStream::new(1, i)).unwrap();
            assert_eq!(r.outcome, Outcome::Up);
            assert_eq!(r.hits, 0);
        }
    }

    #[test]
    fn validation() {
        let (mut cfg, params) = config(0.5);
        cfg.pointer_separation = 3.0;
        assert!(matches!(born_trial(&cfg, &params, &mut RngStream::new(1, 0)), Err(Error::Config(_))));
        let (mut cfg, _) = config(0.5);
        cfg.c_up = Complex64::new(0.9, 0.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn slow_collapse_times_out() {
        let (cfg, _) = config(0.5);
        let slow = CollapseParams::nucleon(1e-40, 1.0).unwrap();
        assert!(matches!(born_trial(&cfg, &slow, &mut RngStream::new(1, 0)), Err(Error::Timeout { .. })));
    }

    #[test]
    fn small_ensemble_tracks_born_weight() {
        let (cfg, params) = config(0.8);
        let (report, trials) = born_ensemble(&cfg, &params, 2000, 99, &Sequential).unwrap();
        assert_eq!(trials.len(), 2000);
        assert_eq!(report.outcome_counts.values().sum::<u64>(), 2000);
        let sigma = (0.16f64 / 2000.0).sqrt();
        assert!((report.estimate - 0.8).abs() < 4.0 * sigma, "{}", report.estimate);
        assert!(report.stderr > 0.0);
    }
}
