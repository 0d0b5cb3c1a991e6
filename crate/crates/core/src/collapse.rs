//! Spontaneous localization: Poisson hit times, Born-weighted hit centres,
//! Gaussian localization operators, and full collapse trajectories.
//!
//! The localization operator is the multiplication operator
//! `L(a) = (π r_c²)^(−1/4) exp(−(x−a)²/(2 r_c²))`, normalized so that
//! `∫ da L(a)² = 1`; the hit-centre density `p(a) = ‖L(a)ψ‖²` is then a
//! probability density for any normalized ψ.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::ControlFlow;

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::fft::Fft;
use crate::propagator::{Potential, Propagator};
use crate::qstate::{Grid1D, HybridState, ObservableEstimator, Observables, UnitSystem, WaveFunction, NORM_TOLERANCE};
use crate::rng::RngStream;

/// Hits whose weight falls below this are treated as landing on empty space.
pub const MIN_HIT_WEIGHT: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CollapseParams {
    /// Per-nucleon rate, s⁻¹.
    pub lambda_si: f64,
    /// Localization length, internal length units.
    pub r_c: f64,
    /// Amplification factor `N` of an entangled composite.
    pub n_nucleons: f64,
    /// Use `(m/m_N)·λ` instead of `N·λ`.
    pub mass_scaling: bool,
}

impl CollapseParams {
    pub fn new(lambda_si: f64, r_c: f64, n_nucleons: f64, mass_scaling: bool) -> Result<Self> {
        if !(lambda_si.is_finite() && lambda_si >= 0.0) {
            return Err(domain!("λ must be finite and >= 0, got {lambda_si}"));
        }
        if !(r_c.is_finite() && r_c > 0.0) {
            return Err(domain!("r_c must be positive, got {r_c}"));
        }
        if !(n_nucleons.is_finite() && n_nucleons >= 1.0) {
            return Err(domain!("nucleon count must be >= 1, got {n_nucleons}"));
        }
        let p = Self {
            lambda_si,
            r_c,
            n_nucleons,
            mass_scaling,
        };
        if !p.total_rate_si(1.0).is_finite() {
            return Err(domain!("total collapse rate overflows"));
        }
        Ok(p)
    }

    /// Single nucleon, no mass scaling.
    pub fn nucleon(lambda_si: f64, r_c: f64) -> Result<Self> {
        Self::new(lambda_si, r_c, 1.0, false)
    }

    /// Total hit rate `Λ` in s⁻¹ for a coordinate of the given mass (units of m_N).
    pub fn total_rate_si(&self, mass: f64) -> f64 {
        if self.mass_scaling {
            mass * self.lambda_si
        } else {
            self.n_nucleons * self.lambda_si
        }
    }

    pub fn total_rate_internal(&self, mass: f64, units: &UnitSystem) -> Result<f64> {
        units.rate_to_internal(self.total_rate_si(mass))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CollapseEvent {
    /// Hit time, internal units.
    pub t: f64,
    /// Hit centre `a`, internal length units.
    pub center: f64,
    /// `‖exp(−(x−a)²/(2r_c²))ψ‖²` just before renormalization; lies in (0, 1].
    pub branch_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub events: Vec<CollapseEvent>,
    pub sample_times: Vec<f64>,
    pub observables_at_samples: Vec<Observables>,
    pub final_state: WaveFunction,
    pub seed: u64,
    pub stream: u64,
}

/// Waiting time to the next hit of a Poisson process; `None` at zero rate.
pub fn sample_next_hit_time(rate: f64, rng: &mut RngStream) -> Result<Option<f64>> {
    rng.exponential(rate)
}

/// `1 − exp(−d²/(4 r_c²))`: the fraction of hits that destroy coherence across `d`.
pub fn separation_factor(d: f64, r_c: f64) -> f64 {
    -libm::expm1(-d * d / (4.0 * r_c * r_c))
}

/// Decay rate (s⁻¹) of ensemble coherence between branches `d` apart,
/// `N·λ·(1 − exp(−d²/(4 r_c²)))`. Mass-scaled parameters need the particle
/// mass; see [`effective_reduction_rate_for_mass`].
pub fn effective_reduction_rate(d: f64, params: &CollapseParams) -> Result<f64> {
    if params.mass_scaling {
        return Err(domain!("mass-scaled parameters need the particle mass"));
    }
    effective_reduction_rate_for_mass(d, params, 1.0)
}

/// As [`effective_reduction_rate`], resolving mass scaling with `mass` (units of m_N).
pub fn effective_reduction_rate_for_mass(d: f64, params: &CollapseParams, mass: f64) -> Result<f64> {
    if !(d.is_finite() && d >= 0.0) {
        return Err(domain!("separation must be finite and >= 0, got {d}"));
    }
    Ok(params.total_rate_si(mass) * separation_factor(d, params.r_c))
}

/// Hit-centre density tabulated on the state's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

impl DensityTable {
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }
}

/// Convolution of a position density with the hit kernel, plus inverse-CDF sampling.
///
/// Works on the periodic grid; the kernel `(π r_c²)^(−1/2) exp(−u²/r_c²)` is
/// sampled at minimum-image distances.
#[derive(Debug, Clone)]
pub struct HitSampler {
    grid: Grid1D,
    r_c: f64,
    fft: Fft,
    kernel_hat: Vec<Complex64>,
    buf: Vec<Complex64>,
    rho: Vec<f64>,
    p: Vec<f64>,
    cdf: Vec<f64>,
}

impl HitSampler {
    pub fn new(grid: Grid1D, r_c: f64) -> Result<Self> {
        if !(r_c.is_finite() && r_c > 0.0) {
            return Err(domain!("r_c must be positive, got {r_c}"));
        }
        let n = grid.n_points();
        let dx = grid.dx();
        let norm = 1.0 / libm::sqrt(PI * r_c * r_c);
        let mut kernel: Vec<Complex64> = (0..n)
            .map(|m| {
                let j = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
                let u = j * dx;
                Complex64::new(norm * libm::exp(-u * u / (r_c * r_c)) * dx, 0.0)
            })
            .collect();
        let fft = Fft::new(n)?;
        fft.forward(&mut kernel);
        Ok(Self {
            grid,
            r_c,
            fft,
            kernel_hat: kernel,
            buf: vec![Complex64::new(0.0, 0.0); n],
            rho: vec![0.0; n],
            p: vec![0.0; n],
            cdf: vec![0.0; n + 1],
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn r_c(&self) -> f64 {
        self.r_c
    }

    /// Fills the internal table with `p(a_j)` for the given `|ψ(x_i)|²` values.
    fn tabulate_from(&mut self, rho: &[f64]) {
        for (b, &r) in self.buf.iter_mut().zip(rho) {
            *b = Complex64::new(r, 0.0);
        }
        self.fft.forward(&mut self.buf);
        for (b, k) in self.buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.fft.inverse(&mut self.buf);
        for (p, b) in self.p.iter_mut().zip(&self.buf) {
            *p = b.re.max(0.0);
        }
    }

    /// Tabulates `p(a)` for a state.
    pub fn density_of<S: Collapsible + ?Sized>(&mut self, state: &S) -> Vec<f64> {
        let mut rho = core::mem::take(&mut self.rho);
        state.position_density(&mut rho);
        self.tabulate_from(&rho);
        self.rho = rho;
        self.p.clone()
    }

    /// Draws a hit centre for `state`.
    pub fn sample<S: Collapsible + ?Sized>(&mut self, state: &S, rng: &mut RngStream) -> Result<f64> {
        let mut rho = core::mem::take(&mut self.rho);
        state.position_density(&mut rho);
        self.tabulate_from(&rho);
        self.rho = rho;
        self.sample_tabulated(rng)
    }

    /// Inverse-CDF draw from the current table. Cell `j` is `[a_j − dx/2, a_j + dx/2)`
    /// with constant density `p_j`, so the CDF is linear within each cell.
    fn sample_tabulated(&mut self, rng: &mut RngStream) -> Result<f64> {
        let dx = self.grid.dx();
        self.cdf[0] = 0.0;
        for j in 0..self.p.len() {
            self.cdf[j + 1] = self.cdf[j] + self.p[j] * dx;
        }
        let total = self.cdf[self.p.len()];
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Numeric(format!("hit density integrates to {total}")));
        }
        let target = rng.uniform() * total;
        // first index with cdf[idx] > target; cell = idx - 1
        let idx = self.cdf.partition_point(|&c| c <= target);
        let j = idx.saturating_sub(1).min(self.p.len() - 1);
        let frac = if self.p[j] > 0.0 {
            ((target - self.cdf[j]) / (self.p[j] * dx)).clamp(0.0, 1.0)
        } else {
            0.5
        };
        let a = self.grid.x(j) - 0.5 * dx + frac * dx;
        Ok(a.clamp(self.grid.x_min(), self.grid.x_max()))
    }
}

/// `p(a) = ‖L(a)ψ‖²` for every grid point `a`.
pub fn hit_position_density(psi: &WaveFunction, r_c: f64) -> Result<DensityTable> {
    if !psi.is_normalized() {
        return Err(Error::Precondition(format!(
            "hit density needs a normalized state, ‖ψ‖² = {}",
            psi.norm2()
        )));
    }
    let mut sampler = HitSampler::new(*psi.grid(), r_c)?;
    let values = sampler.density_of(psi);
    Ok(DensityTable {
        grid: *psi.grid(),
        values,
    })
}

/// Multiplies `amps` by `L(a)` and returns `Σ|L(a)ψ|² dx`.
pub(crate) fn localize_amps(grid: &Grid1D, amps: &mut [Complex64], a: f64, r_c: f64) -> f64 {
    let pref = libm::pow(PI * r_c * r_c, -0.25);
    let inv = 1.0 / (2.0 * r_c * r_c);
    let mut w = 0.0;
    for (i, z) in amps.iter_mut().enumerate() {
        let u = grid.x(i) - a;
        let g = pref * libm::exp(-u * u * inv);
        *z *= g;
        w += z.norm_sqr();
    }
    w * grid.dx()
}

pub(crate) fn scale_amps(amps: &mut [Complex64], s: f64) {
    for z in amps {
        *z *= s;
    }
}

pub(crate) fn check_center(grid: &Grid1D, a: f64) -> Result<()> {
    if !(a.is_finite() && a >= grid.x_min() && a <= grid.x_max()) {
        return Err(domain!(
            "hit centre {a} outside the grid interior [{}, {}]",
            grid.x_min(),
            grid.x_max()
        ));
    }
    Ok(())
}

/// Applies one hit at `a`: returns `L(a)ψ/‖L(a)ψ‖` and `‖L(a)ψ‖²`.
pub fn apply_hit(psi: &WaveFunction, a: f64, r_c: f64) -> Result<(WaveFunction, f64)> {
    if !psi.is_normalized() {
        return Err(Error::Precondition(format!(
            "apply_hit needs a normalized state, ‖ψ‖² = {}",
            psi.norm2()
        )));
    }
    if !(r_c.is_finite() && r_c > 0.0) {
        return Err(domain!("r_c must be positive, got {r_c}"));
    }
    let mut out = psi.clone();
    let w = out.localize(a, r_c)?;
    Ok((out, w))
}

/// A state the collapse process can act on.
pub trait Collapsible {
    fn grid(&self) -> &Grid1D;
    /// Writes `|ψ(x_i)|²` summed over branches (no `dx` factor).
    fn position_density(&self, out: &mut [f64]);
    /// Applies `L(a)` to every branch, renormalizes jointly, returns `‖L(a)ψ‖²`.
    fn localize(&mut self, a: f64, r_c: f64) -> Result<f64>;
    fn propagate(&mut self, prop: &Propagator, n_steps: usize);
}

impl Collapsible for WaveFunction {
    fn grid(&self) -> &Grid1D {
        WaveFunction::grid(self)
    }

    fn position_density(&self, out: &mut [f64]) {
        for (o, z) in out.iter_mut().zip(self.amps()) {
            *o = z.norm_sqr();
        }
    }

    fn localize(&mut self, a: f64, r_c: f64) -> Result<f64> {
        let grid = *WaveFunction::grid(self);
        check_center(&grid, a)?;
        let w = localize_amps(&grid, self.amps_mut(), a, r_c);
        if !(w >= MIN_HIT_WEIGHT) {
            return Err(Error::ZeroSupport { center: a, weight: w });
        }
        scale_amps(self.amps_mut(), 1.0 / libm::sqrt(w));
        Ok(w)
    }

    fn propagate(&mut self, prop: &Propagator, n_steps: usize) {
        prop.advance(self.amps_mut(), n_steps);
    }
}

impl Collapsible for HybridState {
    fn grid(&self) -> &Grid1D {
        HybridState::grid(self)
    }

    fn position_density(&self, out: &mut [f64]) {
        for ((o, u), d) in out.iter_mut().zip(self.branch_up.amps()).zip(self.branch_down.amps()) {
            *o = u.norm_sqr() + d.norm_sqr();
        }
    }

    fn localize(&mut self, a: f64, r_c: f64) -> Result<f64> {
        let grid = *HybridState::grid(self);
        check_center(&grid, a)?;
        let w = localize_amps(&grid, self.branch_up.amps_mut(), a, r_c)
            + localize_amps(&grid, self.branch_down.amps_mut(), a, r_c);
        if !(w >= MIN_HIT_WEIGHT) {
            return Err(Error::ZeroSupport { center: a, weight: w });
        }
        let s = 1.0 / libm::sqrt(w);
        scale_amps(self.branch_up.amps_mut(), s);
        scale_amps(self.branch_down.amps_mut(), s);
        Ok(w)
    }

    fn propagate(&mut self, prop: &Propagator, n_steps: usize) {
        prop.advance(self.branch_up.amps_mut(), n_steps);
        prop.advance(self.branch_down.amps_mut(), n_steps);
    }
}

/// Time grid and rate of one collapse run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub dt: f64,
    pub n_steps: usize,
    pub sample_every: usize,
    /// Total hit rate, inverse internal time.
    pub rate: f64,
}

impl Schedule {
    pub fn new(t_total: f64, dt: f64, sample_every: usize, rate: f64) -> Result<Self> {
        if !(t_total.is_finite() && t_total > 0.0) {
            return Err(domain!("total time must be positive, got {t_total}"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(domain!("time step must be positive, got {dt}"));
        }
        if sample_every == 0 {
            return Err(domain!("sample_every must be >= 1"));
        }
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(domain!("rate must be finite and >= 0, got {rate}"));
        }
        let n = libm::ceil(t_total / dt - 1e-9);
        if n > 1e12 {
            return Err(domain!("{n} steps requested"));
        }
        Ok(Self {
            dt,
            n_steps: (n as usize).max(1),
            sample_every,
            rate,
        })
    }

    pub fn t_total(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }
}

/// Runs Schrödinger evolution interrupted by Poisson hits.
///
/// Hit times are drawn on a continuous clock and applied at the nearest step
/// boundary. Propagation is chunked at hit and sample boundaries only, so a
/// zero-rate run follows exactly the chunk schedule of
/// [`crate::propagator::evolve_sampled`]. `on_sample(step, state)` fires at
/// step 0, every `sample_every` steps and at the last step (after any hit
/// snapped to the same step). `on_event` may stop the run early by returning
/// `ControlFlow::Break`.
pub fn run_collapse_process<S, FS, FE>(
    state: &mut S,
    prop: &Propagator,
    sampler: &mut HitSampler,
    schedule: &Schedule,
    rng: &mut RngStream,
    mut on_sample: FS,
    mut on_event: FE,
) -> Result<()>
where
    S: Collapsible + ?Sized,
    FS: FnMut(usize, &S) -> Result<()>,
    FE: FnMut(&CollapseEvent, &S) -> Result<ControlFlow<()>>,
{
    if state.grid() != prop.grid() || state.grid() != sampler.grid() {
        return Err(Error::Shape("state, propagator and sampler grids differ".into()));
    }
    let dt = schedule.dt;
    let n_total = schedule.n_steps;
    let t_end = schedule.t_total();
    let r_c = sampler.r_c();
    let peak_norm = libm::sqrt(PI) * r_c;

    let mut step = 0usize;
    let mut next_hit = sample_next_hit_time(schedule.rate, rng)?;
    let mut next_sample = schedule.sample_every.min(n_total);
    on_sample(0, state)?;
    loop {
        let hit_step = match next_hit {
            Some(t) if t <= t_end => Some((libm::round(t / dt) as usize).min(n_total)),
            _ => None,
        };
        match hit_step {
            Some(h) if h <= next_sample => {
                state.propagate(prop, h - step);
                step = h;
                let t = next_hit.unwrap_or_default();
                let a = sampler.sample(state, rng)?;
                let w = state.localize(a, r_c)?;
                let event = CollapseEvent {
                    t,
                    center: a,
                    branch_weight: (w * peak_norm).min(1.0),
                };
                next_hit = sample_next_hit_time(schedule.rate, rng)?.map(|wait| t + wait);
                if on_event(&event, state)?.is_break() {
                    return Ok(());
                }
            }
            _ => {
                state.propagate(prop, next_sample - step);
                step = next_sample;
                on_sample(step, state)?;
                if step >= n_total {
                    return Ok(());
                }
                next_sample = (step + schedule.sample_every).min(n_total);
            }
        }
    }
}

/// One full collapse trajectory from `psi0` with observables every `sample_every` steps.
#[allow(clippy::too_many_arguments)]
pub fn grw_trajectory(
    psi0: &WaveFunction,
    v: &Potential,
    params: &CollapseParams,
    units: &UnitSystem,
    t_total: f64,
    dt: f64,
    sample_every: usize,
    rng: &mut RngStream,
) -> Result<TrajectoryRecord> {
    if libm::fabs(psi0.norm2() - 1.0) > NORM_TOLERANCE {
        return Err(Error::Precondition(format!(
            "trajectory needs a normalized initial state, ‖ψ‖² = {}",
            psi0.norm2()
        )));
    }
    let rate = params.total_rate_internal(psi0.mass(), units)?;
    let schedule = Schedule::new(t_total, dt, sample_every, rate)?;
    let prop = Propagator::new(*psi0.grid(), psi0.mass(), v, dt)?;
    let mut sampler = HitSampler::new(*psi0.grid(), params.r_c)?;
    let mut est = ObservableEstimator::new(*psi0.grid(), psi0.mass(), v)?;

    let mut state = psi0.clone();
    let mut events = Vec::new();
    let mut sample_times = Vec::new();
    let mut observables_at_samples = Vec::new();
    run_collapse_process(
        &mut state,
        &prop,
        &mut sampler,
        &schedule,
        rng,
        |step, s| {
            sample_times.push(step as f64 * dt);
            observables_at_samples.push(est.evaluate(s)?);
            Ok(())
        },
        |event, _| {
            events.push(*event);
            Ok(ControlFlow::Continue(()))
        },
    )?;
    Ok(TrajectoryRecord {
        events,
        sample_times,
        observables_at_samples,
        final_state: state,
        seed: rng.master_seed(),
        stream: rng.index(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::evolve_sampled;
    use crate::qstate::{gaussian_packet, superpose};

    fn grid() -> Grid1D {
        Grid1D::centered(1024, 0.05).unwrap()
    }

    fn two_packets(g: Grid1D, d: f64, sigma: f64) -> WaveFunction {
        let l = gaussian_packet(g, -d / 2.0, 0.0, sigma, 1.0).unwrap();
        let r = gaussian_packet(g, d / 2.0, 0.0, sigma, 1.0).unwrap();
        let c = Complex64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
        superpose(&l, &r, c, c).unwrap()
    }

    #[test]
    fn params_validation_and_rates() {
        assert!(CollapseParams::new(-1.0, 1.0, 1.0, false).is_err());
        assert!(CollapseParams::new(1.0, 0.0, 1.0, false).is_err());
        assert!(CollapseParams::new(1.0, 1.0, 0.5, false).is_err());
        let p = CollapseParams::new(1e-16, 1.0, 2.0, false).unwrap();
        assert_eq!(p.total_rate_si(7.0), 2e-16);
        let m = CollapseParams::new(1e-16, 1.0, 1.0, true).unwrap();
        assert_eq!(m.total_rate_si(2.0), 2e-16);
    }

    #[test]
    fn reduction_rate_limits() {
        let p = CollapseParams::new(1e-16, 1.0, 2.0, false).unwrap();
        let far = effective_reduction_rate(100.0, &p).unwrap();
        assert_eq!(far, 2e-16);
        assert_eq!(effective_reduction_rate(0.0, &p).unwrap(), 0.0);
        let p1 = CollapseParams::nucleon(1.0, 1.0).unwrap();
        let mid = effective_reduction_rate(2.0, &p1).unwrap();
        assert!((mid - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((mid - 0.6321).abs() < 1e-4);
        assert!(effective_reduction_rate(-1.0, &p1).is_err());
    }

    #[test]
    fn zero_rate_draws_nothing() {
        let mut rng = RngStream::new(3, 0);
        assert_eq!(sample_next_hit_time(0.0, &mut rng).unwrap(), None);
        assert!(sample_next_hit_time(-2.0, &mut rng).is_err());
    }

    #[test]
    fn narrow_packet_density_is_gaussian_with_half_rc2_variance() {
        let g = grid();
        let r_c = 1.0;
        let psi = gaussian_packet(g, 1.5, 0.0, 0.05 * r_c, 1.0).unwrap();
        let p = hit_position_density(&psi, r_c).unwrap();
        assert!((p.integral() - 1.0).abs() < 1e-9);
        let dx = g.dx();
        let mean: f64 = p.values.iter().enumerate().map(|(i, v)| v * g.x(i)).sum::<f64>() * dx;
        let var: f64 = p.values.iter().enumerate().map(|(i, v)| v * (g.x(i) - mean).powi(2)).sum::<f64>() * dx;
        assert!((mean - 1.5).abs() < 1e-6);
        // Gaussian convolution: r_c²/2 + σ² = 0.5 + 0.0025
        assert!((var / (0.5 * r_c * r_c) - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn symmetric_pair_density_splits_evenly() {
        let g = grid();
        let psi = two_packets(g, 20.0, 0.5);
        let p = hit_position_density(&psi, 1.0).unwrap();
        let left: f64 = p.values.iter().enumerate().filter(|(i, _)| g.x(*i) < 0.0).map(|(_, v)| v).sum::<f64>() * g.dx();
        assert!((left - 0.5).abs() < 1e-6, "{left}");
    }

    #[test]
    fn unnormalized_density_rejected() {
        let psi = gaussian_packet(grid(), 0.0, 0.0, 1.0, 1.0).unwrap().scaled(Complex64::new(1.1, 0.0));
        assert!(matches!(hit_position_density(&psi, 1.0), Err(Error::Precondition(_))));
        assert!(matches!(apply_hit(&psi, 0.0, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn hit_suppresses_far_packet() {
        let g = Grid1D::centered(2048, 0.025).unwrap();
        let r_c = 1.0;
        let d = 10.0 * r_c;
        let psi = two_packets(g, d, 0.2);
        let il = ((-d / 2.0 - g.x_min()) / g.dx()).round() as usize;
        let ir = ((d / 2.0 - g.x_min()) / g.dx()).round() as usize;
        let before = psi.amps()[ir].norm() / psi.amps()[il].norm();
        let (out, w) = apply_hit(&psi, -d / 2.0, r_c).unwrap();
        assert!(w > 0.0);
        assert!((out.norm2() - 1.0).abs() < 1e-9);
        let after = out.amps()[ir].norm() / out.amps()[il].norm();
        let ratio = after / before;
        let expected = (-d * d / (2.0 * r_c * r_c)).exp();
        assert!((ratio / expected - 1.0).abs() < 1e-9, "{ratio:e} vs {expected:e}");
        let left_mass: f64 = out.amps().iter().enumerate().filter(|(i, _)| g.x(*i) < 0.0).map(|(_, z)| z.norm_sqr()).sum::<f64>() * g.dx();
        assert!(left_mass >= 1.0 - 1e-12);
    }

    #[test]
    fn repeated_hits_contract_toward_centre() {
        let g = grid();
        let psi = gaussian_packet(g, 0.0, 0.0, 3.0, 1.0).unwrap();
        let mx = |w: &WaveFunction| crate::qstate::observables(w, &Potential::Free).unwrap().mean_x;
        let (once, _) = apply_hit(&psi, 2.0, 1.0).unwrap();
        let (twice, _) = apply_hit(&once, 2.0, 1.0).unwrap();
        let d1 = (mx(&once) - mx(&psi)).abs();
        let d2 = (mx(&twice) - mx(&once)).abs();
        assert!(d2 < d1, "{d1} {d2}");
        assert!((twice.norm2() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hit_on_empty_region_is_zero_support() {
        let g = Grid1D::centered(1024, 0.05).unwrap();
        let psi = gaussian_packet(g, -20.0, 0.0, 0.1, 1.0).unwrap();
        assert!(matches!(apply_hit(&psi, 20.0, 0.1), Err(Error::ZeroSupport { .. })));
        assert!(apply_hit(&psi, 1e3, 1.0).is_err());
    }

    #[test]
    fn symmetric_pair_survival_frequencies() {
        let g = grid();
        let psi = two_packets(g, 12.0, 0.5);
        let mut sampler = HitSampler::new(g, 1.0).unwrap();
        let mut rng = RngStream::new(11, 0);
        let n = 10_000;
        let mut left = 0;
        for _ in 0..n {
            let a = sampler.sample(&psi, &mut rng).unwrap();
            let (out, _) = apply_hit(&psi, a, 1.0).unwrap();
            let lm: f64 = out.amps()[..g.n_points() / 2].iter().map(|z| z.norm_sqr()).sum::<f64>() * g.dx();
            if lm > 0.5 {
                left += 1;
            }
        }
        let f = left as f64 / n as f64;
        assert!((f - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt(), "{f}");
    }

    #[test]
    fn hit_centres_have_half_rc2_variance() {
        let g = grid();
        let psi = gaussian_packet(g, 0.0, 0.0, 0.05, 1.0).unwrap();
        let mut sampler = HitSampler::new(g, 1.0).unwrap();
        let mut rng = RngStream::new(5, 0);
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|_| sampler.sample(&psi, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var / 0.5 - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn zero_rate_trajectory_equals_schrodinger() {
        let g = Grid1D::centered(512, 0.1).unwrap();
        let psi = gaussian_packet(g, 0.0, 1.0, 1.0, 1.0).unwrap();
        let params = CollapseParams::nucleon(0.0, 1.0).unwrap();
        let units = UnitSystem::default();
        let mut rng = RngStream::new(9, 0);
        let rec = grw_trajectory(&psi, &Potential::Free, &params, &units, 2.0, 1e-3, 250, &mut rng).unwrap();
        let (fin, samples) = evolve_sampled(&psi, &Potential::Free, 1e-3, 2000, 250).unwrap();
        assert!(rec.events.is_empty());
        assert_eq!(rec.final_state, fin);
        assert_eq!(rec.observables_at_samples.len(), samples.len());
        for (a, (t, b)) in rec.observables_at_samples.iter().zip(&samples) {
            assert_eq!(a, b);
            let _ = t;
        }
    }

    #[test]
    fn trajectory_is_deterministic_and_ordered() {
        let g = Grid1D::centered(512, 0.05).unwrap();
        let psi = two_packets(g, 8.0, 0.5);
        let units = UnitSystem::default();
        let params = CollapseParams::nucleon(units.rate_to_si(5.0), 1.0).unwrap();
        let run = || {
            let mut rng = RngStream::new(77, 3);
            grw_trajectory(&psi, &Potential::Free, &params, &units, 2.0, 1e-4, 2000, &mut rng).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert!(!a.events.is_empty());
        for w in a.events.windows(2) {
            assert!(w[0].t < w[1].t);
        }
        for e in &a.events {
            assert!(e.branch_weight > 0.0 && e.branch_weight <= 1.0);
        }
        assert_eq!(a.seed, 77);
        assert_eq!(a.stream, 3);
    }
}
