//! Two-path interference: fringe contrast on a virtual screen.
//!
//! Two narrow packets `d` apart fly freely until they overlap; the ensemble
//! intensity at time `t` shows fringes of wavenumber
//! `k_f = d·τ / (2σ₀²(1 + τ²))`, `τ = t/(2mσ₀²)`. Collapse hits during the
//! flight wash the fringes out.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::ControlFlow;

use super::born::MAX_RATE_DT;
use super::decoherence::SpatialPair;
use super::{batches, EnsembleReport, Executor};
use crate::collapse::{run_collapse_process, separation_factor, CollapseParams, Collapsible, HitSampler, Schedule};
use crate::error::{Error, Result};
use crate::propagator::{spread_analytic, Potential, Propagator};
use crate::qstate::{Grid1D, UnitSystem};
use crate::rng::RngStream;
use crate::stats;

/// Half-width of the analysis window, in fringe periods.
const WINDOW_PERIODS: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VisibilityConfig {
    pub grid: Grid1D,
    pub mass: f64,
    pub sigma0: f64,
    pub dt: f64,
    pub units: UnitSystem,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VisibilityResult {
    pub v_measured: f64,
    /// Contrast of the same setup without collapse.
    pub v_ideal: f64,
    /// `v_measured / v_ideal`.
    pub ratio: f64,
    /// `exp(−Γ(d)·t)`.
    pub v_analytic: f64,
    /// Batch-means standard error of `ratio`.
    pub stderr: f64,
    pub gamma_t: f64,
    pub fringe_period: f64,
    pub report: EnsembleReport,
}

/// Predicted fringe wavenumber at time `t`.
pub fn fringe_wavenumber(d: f64, sigma0: f64, mass: f64, t: f64) -> f64 {
    let tau = t / (2.0 * mass * sigma0 * sigma0);
    d * tau / (2.0 * sigma0 * sigma0 * (1.0 + tau * tau))
}

/// Fringe contrast `(I_max − I_min)/(I_max + I_min)` within `±half_width`
/// of `center`. Interior local extrema are refined by a parabola through
/// neighbours and averaged; without any, the window's global extremes are used.
pub fn fringe_contrast(grid: &Grid1D, intensity: &[f64], center: f64, half_width: f64) -> f64 {
    let lo = libm::ceil((center - half_width - grid.x_min()) / grid.dx()).max(1.0) as usize;
    let hi = (libm::floor((center + half_width - grid.x_min()) / grid.dx()) as usize).min(grid.n_points() - 2);
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    for i in lo..=hi {
        let (a, b, c) = (intensity[i - 1], intensity[i], intensity[i + 1]);
        let curv = a - 2.0 * b + c;
        let peak = || if curv != 0.0 { b - (a - c) * (a - c) / (8.0 * curv) } else { b };
        if b > a && b >= c {
            maxima.push(peak());
        } else if b < a && b <= c {
            minima.push(peak());
        }
    }
    let (imax, imin) = if maxima.is_empty() || minima.is_empty() {
        let w = &intensity[lo..=hi];
        (
            w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            w.iter().copied().fold(f64::INFINITY, f64::min),
        )
    } else {
        (stats::mean(&maxima), stats::mean(&minima))
    };
    if imax + imin <= 0.0 {
        return 0.0;
    }
    ((imax - imin) / (imax + imin)).max(0.0)
}

#[derive(Debug, Clone)]
struct Workspace {
    initial: SpatialPair,
    prop: Propagator,
    sampler: HitSampler,
    schedule: Schedule,
    density: Vec<f64>,
}

impl Workspace {
    fn run(&mut self, rng: &mut RngStream) -> Result<(Vec<f64>, u32)> {
        let mut state = self.initial.clone();
        let mut hits = 0u32;
        let schedule = self.schedule;
        run_collapse_process(
            &mut state,
            &self.prop,
            &mut self.sampler,
            &schedule,
            rng,
            |_, _| Ok(()),
            |_, _| {
                hits += 1;
                Ok(ControlFlow::Continue(()))
            },
        )?;
        state.position_density(&mut self.density);
        Ok((self.density.clone(), hits))
    }
}

/// Ensemble-averaged screen intensity after a flight of `t_flight` internal
/// time units, with contrast compared against a collapse-free control.
pub fn visibility_experiment<E: Executor>(
    d: f64,
    params: &CollapseParams,
    t_flight: f64,
    ensemble_size: usize,
    cfg: &VisibilityConfig,
    master_seed: u64,
    executor: &E,
) -> Result<VisibilityResult> {
    let grid = cfg.grid;
    if ensemble_size < 2 {
        return Err(Error::Config("visibility ensembles need at least two trajectories".into()));
    }
    if !(t_flight > 0.0) {
        return Err(Error::Config(format!("flight time must be positive, got {t_flight}")));
    }
    let spread = spread_analytic(cfg.sigma0, cfg.mass, t_flight)?;
    if spread < d / 4.0 {
        return Err(Error::Config(format!(
            "packets do not overlap at the screen: width {spread:.3e} < d/4 = {:.3e}",
            d / 4.0
        )));
    }
    let k_f = fringe_wavenumber(d, cfg.sigma0, cfg.mass, t_flight);
    let period = 2.0 * PI / k_f;
    if period < 4.0 * grid.dx() {
        return Err(Error::Config(format!(
            "fringe period {period:.3e} is under-resolved by dx = {:.3e}",
            grid.dx()
        )));
    }
    let rate = params.total_rate_internal(cfg.mass, &cfg.units)?;
    let dt = if rate > 0.0 { cfg.dt.min(0.999 * MAX_RATE_DT / rate) } else { cfg.dt };
    let mut schedule = Schedule::new(t_flight, dt, 1, rate)?;
    schedule.sample_every = schedule.n_steps;
    let ws = Workspace {
        initial: SpatialPair::symmetric(grid, d, cfg.sigma0, cfg.mass)?,
        prop: Propagator::new(grid, cfg.mass, &Potential::Free, dt)?,
        sampler: HitSampler::new(grid, params.r_c)?,
        schedule,
        density: vec![0.0; grid.n_points()],
    };
    let t_end = schedule.t_total();
    let center = 0.0;
    let half_width = WINDOW_PERIODS * period;

    let mut ideal = ws.initial.clone();
    ideal.propagate(&ws.prop, schedule.n_steps);
    let mut ideal_density = vec![0.0; grid.n_points()];
    ideal.position_density(&mut ideal_density);
    let v_ideal = fringe_contrast(&grid, &ideal_density, center, half_width);
    if !(v_ideal > 0.0) {
        return Err(Error::Config("no fringes in the collapse-free control".into()));
    }

    // Densities are summed batch by batch to bound memory.
    let n_points = grid.n_points();
    let mut total = vec![0.0; n_points];
    let mut batch_ratios = Vec::new();
    let mut hit_counts = Vec::with_capacity(ensemble_size);
    for range in batches(ensemble_size) {
        let start = range.start;
        let runs = executor
            .map_init(range.len(), || ws.clone(), |w, i| {
                w.run(&mut RngStream::new(master_seed, (start + i) as u64))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let mut acc = vec![0.0; n_points];
        for (dens, hits) in &runs {
            for (a, v) in acc.iter_mut().zip(dens) {
                *a += v;
            }
            hit_counts.push(*hits);
        }
        for (t, a) in total.iter_mut().zip(&acc) {
            *t += a;
        }
        let n = range.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        batch_ratios.push(fringe_contrast(&grid, &acc, center, half_width) / v_ideal);
    }
    total.iter_mut().for_each(|a| *a /= ensemble_size as f64);
    let v_measured = fringe_contrast(&grid, &total, center, half_width);
    let stderr = stats::batch_stderr(&batch_ratios);

    let gamma = rate * separation_factor(d, params.r_c);
    let gamma_t = gamma * t_end;
    let hit_free = hit_counts.iter().filter(|&&h| h == 0).count() as u64;
    let mut counts = BTreeMap::new();
    counts.insert("no_hit".to_string(), hit_free);
    counts.insert("hit".to_string(), ensemble_size as u64 - hit_free);
    let mut diag = BTreeMap::new();
    diag.insert("v_ideal".to_string(), v_ideal);
    diag.insert("v_measured".to_string(), v_measured);
    diag.insert("v_analytic".to_string(), libm::exp(-gamma_t));
    diag.insert("gamma_t".to_string(), gamma_t);
    diag.insert("fringe_period".to_string(), period);
    diag.insert("t_flight".to_string(), t_end);
    diag.insert(
        "mean_hits".to_string(),
        hit_counts.iter().map(|&h| h as f64).sum::<f64>() / ensemble_size as f64,
    );
    let ratio = v_measured / v_ideal;
    Ok(VisibilityResult {
        v_measured,
        v_ideal,
        ratio,
        v_analytic: libm::exp(-gamma_t),
        stderr,
        gamma_t,
        fringe_period: period,
        report: EnsembleReport {
            n_trajectories: ensemble_size as u64,
            outcome_counts: counts,
            estimate: ratio,
            stderr,
            fit_diagnostics: diag,
            seed: master_seed,
        },
    })
}
