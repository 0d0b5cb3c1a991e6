//! Energy gain and momentum diffusion of a free particle under hits.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use super::born::MAX_RATE_DT;
use super::{batches, EnsembleReport, Executor};
use crate::collapse::{run_collapse_process, CollapseParams, HitSampler, Schedule};
use crate::error::{Error, Result};
use crate::propagator::{Potential, Propagator};
use crate::qstate::{gaussian_packet, Grid1D, ObservableEstimator, Observables, UnitSystem, WaveFunction};
use crate::rates::{heating_rate_internal, momentum_diffusion_rate_internal, Dims};
use crate::rng::RngStream;
use crate::stats;

/// Below this many expected hits per trajectory the slopes are meaningless.
pub const MIN_EXPECTED_HITS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HeatingConfig {
    pub grid: Grid1D,
    pub mass: f64,
    pub sigma0: f64,
    pub dt: f64,
    pub n_samples: usize,
    pub units: UnitSystem,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HeatingResult {
    /// Slopes in internal energy (momentum²) per internal time.
    pub slope_measured: f64,
    pub slope_analytic: f64,
    pub stderr: f64,
    pub var_p_slope: f64,
    pub var_p_slope_analytic: f64,
    pub var_p_stderr: f64,
    pub times: Vec<f64>,
    pub mean_energy: Vec<f64>,
    pub var_p: Vec<f64>,
    pub report: EnsembleReport,
}

#[derive(Debug, Clone)]
struct Workspace {
    initial: WaveFunction,
    prop: Propagator,
    sampler: HitSampler,
    schedule: Schedule,
    est: ObservableEstimator,
}

impl Workspace {
    fn run(&mut self, rng: &mut RngStream) -> Result<(Vec<Observables>, u32)> {
        let mut state = self.initial.clone();
        let mut samples = Vec::new();
        let mut hits = 0u32;
        let schedule = self.schedule;
        let est = &mut self.est;
        run_collapse_process(
            &mut state,
            &self.prop,
            &mut self.sampler,
            &schedule,
            rng,
            |_, s| {
                samples.push(est.evaluate(s)?);
                Ok(())
            },
            |_, _| {
                hits += 1;
                Ok(ControlFlow::Continue(()))
            },
        )?;
        Ok((samples, hits))
    }
}

/// Ensemble means of energy and of `Var(p)` (total spread across the
/// ensemble, `⟨⟨p²⟩⟩ − ⟨⟨p⟩⟩²`) at each sample.
fn moment_curves(runs: &[(Vec<Observables>, u32)]) -> (Vec<f64>, Vec<f64>) {
    let m = runs[0].0.len();
    let mut e = vec![0.0; m];
    let mut p1 = vec![0.0; m];
    let mut p2 = vec![0.0; m];
    for (obs, _) in runs {
        for (j, o) in obs.iter().enumerate() {
            e[j] += o.energy;
            p1[j] += o.mean_p;
            p2[j] += o.mean_p2();
        }
    }
    let n = runs.len() as f64;
    let energy = e.iter().map(|v| v / n).collect();
    let var_p = p1.iter().zip(&p2).map(|(a, b)| b / n - (a / n) * (a / n)).collect();
    (energy, var_p)
}

fn slope(t: &[f64], y: &[f64]) -> f64 {
    stats::linear_fit(t, y).map_or(f64::NAN, |f| f.slope)
}

/// Free-particle ensemble over `t_total` internal time units; fits the
/// growth of mean energy and momentum variance.
pub fn heating_experiment<E: Executor>(
    params: &CollapseParams,
    t_total: f64,
    ensemble_size: usize,
    cfg: &HeatingConfig,
    master_seed: u64,
    executor: &E,
) -> Result<HeatingResult> {
    if ensemble_size < 2 {
        return Err(Error::Config("heating ensembles need at least two trajectories".into()));
    }
    if cfg.n_samples < 2 {
        return Err(Error::Config("need at least two samples for a slope".into()));
    }
    let rate = params.total_rate_internal(cfg.mass, &cfg.units)?;
    let expected_hits = rate * t_total;
    if params.lambda_si > 0.0 && expected_hits < MIN_EXPECTED_HITS {
        return Err(Error::Statistics(format!(
            "{expected_hits:.3} expected hits per trajectory, need at least {MIN_EXPECTED_HITS}"
        )));
    }
    let dt = if rate > 0.0 { cfg.dt.min(0.999 * MAX_RATE_DT / rate) } else { cfg.dt };
    let n_steps = libm::ceil(t_total / dt - 1e-9) as usize;
    let sample_every = (n_steps / cfg.n_samples).max(1);
    let schedule = Schedule::new(sample_every as f64 * cfg.n_samples as f64 * dt, dt, sample_every, rate)?;
    let grid = cfg.grid;
    let ws = Workspace {
        initial: gaussian_packet(grid, 0.0, 0.0, cfg.sigma0, cfg.mass)?,
        prop: Propagator::new(grid, cfg.mass, &Potential::Free, dt)?,
        sampler: HitSampler::new(grid, params.r_c)?,
        est: ObservableEstimator::new(grid, cfg.mass, &Potential::Free)?,
        schedule,
    };
    let runs = executor
        .map_init(ensemble_size, || ws.clone(), |w, i| w.run(&mut RngStream::new(master_seed, i as u64)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let times: Vec<f64> = (0..runs[0].0.len())
        .map(|j| (j * sample_every).min(schedule.n_steps) as f64 * dt)
        .collect();
    let (mean_energy, var_p) = moment_curves(&runs);
    let slope_measured = slope(&times, &mean_energy);
    let var_p_slope = slope(&times, &var_p);
    let mut e_slopes = Vec::new();
    let mut p_slopes = Vec::new();
    for r in batches(runs.len()) {
        let (e, v) = moment_curves(&runs[r]);
        e_slopes.push(slope(&times, &e));
        p_slopes.push(slope(&times, &v));
    }
    let stderr = stats::batch_stderr(&e_slopes);
    let var_p_stderr = stats::batch_stderr(&p_slopes);
    let slope_analytic = heating_rate_internal(rate, cfg.mass, params.r_c, Dims::One);
    let var_p_slope_analytic = momentum_diffusion_rate_internal(rate, params.r_c);

    let total_hits: u64 = runs.iter().map(|r| r.1 as u64).sum();
    let mut counts = BTreeMap::new();
    counts.insert("trajectories".to_string(), runs.len() as u64);
    let mut diag = BTreeMap::new();
    diag.insert("slope_analytic".to_string(), slope_analytic);
    diag.insert("var_p_slope".to_string(), var_p_slope);
    diag.insert("var_p_slope_analytic".to_string(), var_p_slope_analytic);
    diag.insert("var_p_stderr".to_string(), var_p_stderr);
    diag.insert("expected_hits".to_string(), expected_hits);
    diag.insert("mean_hits".to_string(), total_hits as f64 / runs.len() as f64);
    let power_unit = cfg.units.energy_unit_j() / cfg.units.time_unit_s;
    diag.insert("slope_measured_w".to_string(), slope_measured * power_unit);
    diag.insert("slope_analytic_w".to_string(), slope_analytic * power_unit);
    Ok(HeatingResult {
        slope_measured,
        slope_analytic,
        stderr,
        var_p_slope,
        var_p_slope_analytic,
        var_p_stderr,
        times,
        mean_energy,
        var_p,
        report: EnsembleReport {
            n_trajectories: runs.len() as u64,
            outcome_counts: counts,
            estimate: slope_measured,
            stderr,
            fit_diagnostics: diag,
            seed: master_seed,
        },
    })
}
