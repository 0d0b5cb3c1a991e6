//! Split-step spectral integration of the Schrödinger equation (ħ = 1).
//!
//! One Strang step is `e^{-iV dt/2} · e^{-iT dt} · e^{-iV dt/2}` with the
//! kinetic factor applied in momentum space. Adjacent half kicks are merged,
//! and for a free particle all drifts of a call collapse into a single exact
//! momentum-space phase.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::fft::Fft;
use crate::qstate::{Grid1D, ObservableEstimator, Observables, WaveFunction};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Potential {
    Free,
    /// `V(x) = m ω² x² / 2`.
    Harmonic { omega: f64 },
    /// One value per grid point, internal energy units.
    Tabulated(Vec<f64>),
}

impl Potential {
    pub fn values(&self, grid: &Grid1D, mass: f64) -> Result<Vec<f64>> {
        match self {
            Potential::Free => Ok(alloc::vec![0.0; grid.n_points()]),
            Potential::Harmonic { omega } => {
                if !(omega.is_finite() && *omega > 0.0) {
                    return Err(domain!("harmonic frequency must be positive, got {omega}"));
                }
                Ok((0..grid.n_points())
                    .map(|i| {
                        let x = grid.x(i);
                        0.5 * mass * omega * omega * x * x
                    })
                    .collect())
            }
            Potential::Tabulated(v) => {
                if v.len() != grid.n_points() {
                    return Err(Error::Shape(format!(
                        "tabulated potential has {} values for {} grid points",
                        v.len(),
                        grid.n_points()
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Numeric("tabulated potential has non-finite values".into()));
                }
                Ok(v.clone())
            }
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, Potential::Free)
    }
}

/// Precomputed split-step operator for one grid, mass, potential and step.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: Grid1D,
    mass: f64,
    dt: f64,
    fft: Fft,
    /// `k²/(2m)` in FFT order.
    kinetic: Vec<f64>,
    drift: Vec<Complex64>,
    kicks: Option<Kicks>,
}

#[derive(Debug, Clone)]
struct Kicks {
    half: Vec<Complex64>,
    full: Vec<Complex64>,
}

fn phase(theta: f64) -> Complex64 {
    Complex64::new(libm::cos(theta), libm::sin(theta))
}

impl Propagator {
    /// Builds the operator, enforcing `|dt|·max|V| < 0.5` and
    /// `|dt|·k_max²/(2m) < π`. A negative `dt` runs time backwards.
    pub fn new(grid: Grid1D, mass: f64, potential: &Potential, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(domain!("time step must be finite and non-zero, got {dt}"));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(domain!("mass must be positive, got {mass}"));
        }
        let adt = libm::fabs(dt);
        let k_max = grid.k_max();
        let spectral = adt * k_max * k_max / (2.0 * mass);
        if spectral >= core::f64::consts::PI {
            return Err(Error::StepSize {
                guard: "spectral phase",
                detail: format!("dt·k_max²/(2m) = {spectral:.4} must be < π"),
            });
        }
        let kicks = if potential.is_free() {
            None
        } else {
            let v = potential.values(&grid, mass)?;
            let vmax = v.iter().fold(0.0f64, |m, x| m.max(libm::fabs(*x)));
            if adt * vmax >= 0.5 {
                return Err(Error::StepSize {
                    guard: "potential stability",
                    detail: format!("dt·max|V| = {:.4} must be < 0.5", adt * vmax),
                });
            }
            Some(Kicks {
                half: v.iter().map(|&x| phase(-0.5 * x * dt)).collect(),
                full: v.iter().map(|&x| phase(-x * dt)).collect(),
            })
        };
        let kinetic: Vec<f64> = grid.wavenumbers().iter().map(|k| k * k / (2.0 * mass)).collect();
        let drift = kinetic.iter().map(|&e| phase(-e * dt)).collect();
        Ok(Self {
            grid,
            mass,
            dt,
            fft: Fft::new(grid.n_points())?,
            kinetic,
            drift,
            kicks,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn fft(&self) -> &Fft {
        &self.fft
    }

    /// Advances raw amplitudes by `n_steps` Strang steps in place.
    pub fn advance(&self, amps: &mut [Complex64], n_steps: usize) {
        if n_steps == 0 {
            return;
        }
        match &self.kicks {
            None => {
                let total = self.dt * n_steps as f64;
                self.fft.forward(amps);
                for (z, &e) in amps.iter_mut().zip(&self.kinetic) {
                    *z *= phase(-e * total);
                }
                self.fft.inverse(amps);
            }
            Some(kicks) => {
                mul_assign(amps, &kicks.half);
                for step in 0..n_steps {
                    self.fft.forward(amps);
                    mul_assign(amps, &self.drift);
                    self.fft.inverse(amps);
                    if step + 1 == n_steps {
                        mul_assign(amps, &kicks.half);
                    } else {
                        mul_assign(amps, &kicks.full);
                    }
                }
            }
        }
    }

    pub fn step(&self, psi: &WaveFunction, n_steps: usize) -> Result<WaveFunction> {
        if psi.grid() != &self.grid || psi.mass() != self.mass {
            return Err(Error::Shape("state does not match the propagator grid or mass".into()));
        }
        let mut out = psi.clone();
        self.advance(out.amps_mut(), n_steps);
        Ok(out)
    }
}

fn mul_assign(amps: &mut [Complex64], factors: &[Complex64]) {
    for (z, f) in amps.iter_mut().zip(factors) {
        *z *= f;
    }
}

/// `n_steps` symmetric split steps of size `dt` starting from a normalized state.
pub fn split_step(psi: &WaveFunction, v: &Potential, dt: f64, n_steps: usize) -> Result<WaveFunction> {
    if !psi.is_normalized() {
        return Err(Error::Precondition(format!(
            "split_step needs a normalized state, ‖ψ‖² = {}",
            psi.norm2()
        )));
    }
    if n_steps == 0 {
        return Ok(psi.clone());
    }
    Propagator::new(*psi.grid(), psi.mass(), v, dt)?.step(psi, n_steps)
}

/// Width of a free Gaussian packet, `σ(t) = sqrt(σ0² + (t/(2mσ0))²)`.
pub fn spread_analytic(sigma0: f64, mass: f64, t: f64) -> Result<f64> {
    if !(sigma0 > 0.0 && mass > 0.0 && t >= 0.0) {
        return Err(domain!("spread_analytic needs σ0 > 0, m > 0, t >= 0"));
    }
    let s = t / (2.0 * mass * sigma0);
    Ok(libm::sqrt(sigma0 * sigma0 + s * s))
}

/// Pure Schrödinger evolution over `n_steps`, propagated in chunks of
/// `sample_every` steps. Returns the final state and the observables at
/// step 0, every `sample_every` steps, and the final step.
///
/// The chunk schedule is the same one a collapse trajectory uses when no hit
/// occurs, so a zero-rate trajectory reproduces this output exactly.
pub fn evolve_sampled(
    psi: &WaveFunction,
    v: &Potential,
    dt: f64,
    n_steps: usize,
    sample_every: usize,
) -> Result<(WaveFunction, Vec<(f64, Observables)>)> {
    if sample_every == 0 {
        return Err(domain!("sample_every must be >= 1"));
    }
    let prop = Propagator::new(*psi.grid(), psi.mass(), v, dt)?;
    let mut est = ObservableEstimator::new(*psi.grid(), psi.mass(), v)?;
    let mut state = psi.clone();
    let mut samples = Vec::new();
    samples.push((0.0, est.evaluate(&state)?));
    let mut step = 0;
    while step < n_steps {
        let next = (step + sample_every).min(n_steps);
        prop.advance(state.amps_mut(), next - step);
        step = next;
        samples.push((step as f64 * dt, est.evaluate(&state)?));
    }
    Ok((state, samples))
}
