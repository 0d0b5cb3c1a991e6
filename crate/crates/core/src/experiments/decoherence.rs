//! Decay of inter-branch coherence for a particle split into two packets.
//!
//! The two packets are carried as separate branches `ψ = ψ_L + ψ_R` so the
//! coherence `K = Σ_j conj(ψ_L[j]) ψ_R[j + s] dx`, with `s = d/dx`, can be
//! read off each trajectory. Its ensemble mean decays as `exp(−Γ(d)·t)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use num_complex::Complex64;

use super::born::MAX_RATE_DT;
use super::{batches, EnsembleReport, Executor};
use crate::collapse::{
    check_center, localize_amps, run_collapse_process, scale_amps, separation_factor, CollapseParams, Collapsible,
    HitSampler, Schedule, MIN_HIT_WEIGHT,
};
use crate::error::{Error, Result};
use crate::propagator::{Potential, Propagator};
use crate::qstate::{gaussian_packet, Grid1D, UnitSystem, WaveFunction};
use crate::rng::RngStream;
use crate::stats;

/// Fits with `R²` below this are flagged in the diagnostics.
pub const MIN_FIT_R2: f64 = 0.95;

/// Final branches count as localized once the weaker one holds less than this.
const LOCALIZED_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecoherenceConfig {
    pub grid: Grid1D,
    /// Particle mass, internal units. Heavy particles keep the packets from spreading.
    pub mass: f64,
    pub sigma: f64,
    /// Largest time step; shortened further to keep `Λ·dt` below the hit-snapping limit.
    pub dt: f64,
    pub n_samples: usize,
    /// Run length in units of `1/Γ(d)` (or `1/Λ` when `Γ = 0`).
    pub e_foldings: f64,
    pub units: UnitSystem,
}

impl DecoherenceConfig {
    pub fn new(grid: Grid1D, mass: f64, sigma: f64, units: UnitSystem) -> Self {
        Self {
            grid,
            mass,
            sigma,
            dt: 1e-2,
            n_samples: 20,
            e_foldings: 2.5,
            units,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecoherenceResult {
    pub separation: f64,
    /// Fitted and predicted rates, inverse internal time.
    pub gamma_fit: f64,
    pub gamma_analytic: f64,
    pub times: Vec<f64>,
    /// `|⟨K(t)⟩| / |⟨K(0)⟩|`.
    pub coherence: Vec<f64>,
    pub report: EnsembleReport,
}

/// A single particle in a superposition of two packets, tracked branch by branch.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialPair {
    pub left: WaveFunction,
    pub right: WaveFunction,
}

impl SpatialPair {
    /// `(ψ_L + ψ_R)` for packets at `∓d/2`, jointly normalized.
    pub fn symmetric(grid: Grid1D, d: f64, sigma: f64, mass: f64) -> Result<Self> {
        let left = gaussian_packet(grid, -d / 2.0, 0.0, sigma, mass)?;
        let right = gaussian_packet(grid, d / 2.0, 0.0, sigma, mass)?;
        let mut pair = Self { left, right };
        let n2 = pair.total_norm2();
        if !(n2 > 0.0) {
            return Err(Error::Degenerate);
        }
        let s = 1.0 / libm::sqrt(n2);
        scale_amps(pair.left.amps_mut(), s);
        scale_amps(pair.right.amps_mut(), s);
        Ok(pair)
    }

    pub fn total_norm2(&self) -> f64 {
        let dx = self.left.grid().dx();
        self.left
            .amps()
            .iter()
            .zip(self.right.amps())
            .map(|(l, r)| (l + r).norm_sqr())
            .sum::<f64>()
            * dx
    }

    /// `Σ_j conj(ψ_L[j]) ψ_R[(j + shift) mod n] dx`.
    pub fn coherence(&self, shift: usize) -> Complex64 {
        let l = self.left.amps();
        let r = self.right.amps();
        let n = l.len();
        let mut k = Complex64::new(0.0, 0.0);
        for (j, a) in l.iter().enumerate() {
            k += a.conj() * r[(j + shift) % n];
        }
        k * self.left.grid().dx()
    }

    /// Squared norms of the two branches.
    pub fn branch_weights(&self) -> (f64, f64) {
        (self.left.norm2(), self.right.norm2())
    }
}

impl Collapsible for SpatialPair {
    fn grid(&self) -> &Grid1D {
        self.left.grid()
    }

    fn position_density(&self, out: &mut [f64]) {
        for ((o, l), r) in out.iter_mut().zip(self.left.amps()).zip(self.right.amps()) {
            *o = (l + r).norm_sqr();
        }
    }

    fn localize(&mut self, a: f64, r_c: f64) -> Result<f64> {
        let grid = *self.left.grid();
        check_center(&grid, a)?;
        localize_amps(&grid, self.left.amps_mut(), a, r_c);
        localize_amps(&grid, self.right.amps_mut(), a, r_c);
        let w = self.total_norm2();
        if !(w >= MIN_HIT_WEIGHT) {
            return Err(Error::ZeroSupport { center: a, weight: w });
        }
        let s = 1.0 / libm::sqrt(w);
        scale_amps(self.left.amps_mut(), s);
        scale_amps(self.right.amps_mut(), s);
        Ok(w)
    }

    fn propagate(&mut self, prop: &Propagator, n_steps: usize) {
        prop.advance(self.left.amps_mut(), n_steps);
        prop.advance(self.right.amps_mut(), n_steps);
    }
}

#[derive(Debug, Clone)]
struct Workspace {
    initial: SpatialPair,
    prop: Propagator,
    sampler: HitSampler,
    schedule: Schedule,
    shift: usize,
}

struct Trace {
    coherence: Vec<Complex64>,
    hits: u32,
    final_weights: (f64, f64),
}

impl Workspace {
    fn run(&mut self, rng: &mut RngStream) -> Result<Trace> {
        let mut state = self.initial.clone();
        let mut coherence = Vec::new();
        let mut hits = 0u32;
        let shift = self.shift;
        let schedule = self.schedule;
        run_collapse_process(
            &mut state,
            &self.prop,
            &mut self.sampler,
            &schedule,
            rng,
            |_, s| {
                coherence.push(s.coherence(shift));
                Ok(())
            },
            |_, _| {
                hits += 1;
                Ok(ControlFlow::Continue(()))
            },
        )?;
        Ok(Trace {
            coherence,
            hits,
            final_weights: state.branch_weights(),
        })
    }
}

fn coherence_curve(traces: &[Trace]) -> Vec<f64> {
    let m = traces[0].coherence.len();
    let mut mean = vec![Complex64::new(0.0, 0.0); m];
    for t in traces {
        for (acc, k) in mean.iter_mut().zip(&t.coherence) {
            *acc += k;
        }
    }
    let k0 = mean[0].norm();
    mean.iter().map(|k| if k0 > 0.0 { k.norm() / k0 } else { 0.0 }).collect()
}

/// Runs one ensemble per separation and fits the coherence decay rate.
///
/// Separations are in internal length units. Trajectory `i` of every
/// separation uses stream `i` of `master_seed`.
pub fn decoherence_scan<E: Executor>(
    separations: &[f64],
    params: &CollapseParams,
    ensemble_size: usize,
    cfg: &DecoherenceConfig,
    master_seed: u64,
    executor: &E,
) -> Result<Vec<DecoherenceResult>> {
    if ensemble_size < 2 {
        return Err(Error::Config("decoherence ensembles need at least two trajectories".into()));
    }
    if cfg.n_samples < 3 {
        return Err(Error::Config("need at least three coherence samples".into()));
    }
    if !(cfg.e_foldings >= 2.0) {
        return Err(Error::Config(format!("run must span >= 2 e-foldings, got {}", cfg.e_foldings)));
    }
    let rate = params.total_rate_internal(cfg.mass, &cfg.units)?;
    if !(rate > 0.0) {
        return Err(Error::Config("decoherence scan needs a positive hit rate".into()));
    }
    separations
        .iter()
        .map(|&d| scan_one(d, params, rate, ensemble_size, cfg, master_seed, executor))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn scan_one<E: Executor>(
    d: f64,
    params: &CollapseParams,
    rate: f64,
    ensemble_size: usize,
    cfg: &DecoherenceConfig,
    master_seed: u64,
    executor: &E,
) -> Result<DecoherenceResult> {
    let grid = cfg.grid;
    if !(d.is_finite() && d >= 0.0 && d + 12.0 * cfg.sigma <= grid.extent()) {
        return Err(Error::Config(format!("separation {d} does not fit the grid")));
    }
    let shift = libm::round(d / grid.dx()) as usize;
    let sep = separation_factor(d, params.r_c);
    let gamma_analytic = rate * sep;
    let t_total = cfg.e_foldings / if gamma_analytic > 0.0 { gamma_analytic } else { rate };
    let dt = cfg.dt.min(0.999 * MAX_RATE_DT / rate);
    let n_steps = libm::ceil(t_total / dt - 1e-9) as usize;
    let sample_every = (n_steps / cfg.n_samples).max(1);
    let schedule = Schedule::new(sample_every as f64 * cfg.n_samples as f64 * dt, dt, sample_every, rate)?;

    let initial = SpatialPair::symmetric(grid, d, cfg.sigma, cfg.mass)?;
    let ws = Workspace {
        prop: Propagator::new(grid, cfg.mass, &Potential::Free, dt)?,
        sampler: HitSampler::new(grid, params.r_c)?,
        schedule,
        shift,
        initial,
    };
    let traces = executor
        .map_init(ensemble_size, || ws.clone(), |w, i| w.run(&mut RngStream::new(master_seed, i as u64)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let times: Vec<f64> = (0..traces[0].coherence.len())
        .map(|j| (j * sample_every).min(schedule.n_steps) as f64 * dt)
        .collect();
    let coherence = coherence_curve(&traces);
    let (gamma_fit, r2) = stats::exp_decay_fit(&times, &coherence).unwrap_or((0.0, 0.0));
    let batch_rates: Vec<f64> = batches(traces.len())
        .into_iter()
        .map(|r| {
            let c = coherence_curve(&traces[r]);
            stats::exp_decay_fit(&times, &c).map_or(f64::NAN, |f| f.0)
        })
        .collect();
    let stderr = stats::batch_stderr(&batch_rates);

    let mut counts = BTreeMap::new();
    for key in ["left", "right", "unresolved"] {
        counts.insert(key.to_string(), 0u64);
    }
    for t in &traces {
        let (l, r) = t.final_weights;
        let key = if r < LOCALIZED_FRACTION * (l + r) {
            "left"
        } else if l < LOCALIZED_FRACTION * (l + r) {
            "right"
        } else {
            "unresolved"
        };
        *counts.get_mut(key).expect("key inserted above") += 1;
    }
    let mut diag = BTreeMap::new();
    diag.insert("separation".to_string(), d);
    diag.insert("gamma_analytic".to_string(), gamma_analytic);
    diag.insert("gamma_analytic_si".to_string(), cfg.units.rate_to_si(gamma_analytic));
    diag.insert("r2".to_string(), r2);
    diag.insert("low_r2".to_string(), if r2 < MIN_FIT_R2 { 1.0 } else { 0.0 });
    diag.insert("rate_internal".to_string(), rate);
    diag.insert("t_total".to_string(), schedule.t_total());
    diag.insert(
        "mean_hits".to_string(),
        traces.iter().map(|t| t.hits as f64).sum::<f64>() / traces.len() as f64,
    );
    Ok(DecoherenceResult {
        separation: d,
        gamma_fit,
        gamma_analytic,
        times,
        coherence,
        report: EnsembleReport {
            n_trajectories: traces.len() as u64,
            outcome_counts: counts,
            estimate: gamma_fit,
            stderr,
            fit_diagnostics: diag,
            seed: master_seed,
        },
    })
}
