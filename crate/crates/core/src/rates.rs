//! Closed-form rates and energies implied by the hit process.
//!
//! Rates are in s⁻¹ unless a function says otherwise. These are the analytic
//! references the Monte Carlo experiments are checked against.

use crate::collapse::{separation_factor, CollapseParams};
use crate::{HBAR_SI, NUCLEON_MASS_KG};

/// Number of spatial dimensions a heating formula is summed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Dims {
    One,
    Three,
}

impl Dims {
    pub fn count(self) -> f64 {
        match self {
            Dims::One => 1.0,
            Dims::Three => 3.0,
        }
    }

    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            1 => Some(Dims::One),
            3 => Some(Dims::Three),
            _ => None,
        }
    }
}

/// `N·λ` for an entangled composite of `N` nucleons.
pub fn amplified_rate(n_nucleons: f64, lambda_si: f64) -> f64 {
    n_nucleons * lambda_si
}

/// `(m/m_N)·λ`.
pub fn mass_rate(mass_in_mn: f64, lambda_si: f64) -> f64 {
    mass_in_mn * lambda_si
}

/// Reduction rate of each factor of an unentangled product state: `λ`,
/// whatever the number of factors.
pub fn product_state_rate(lambda_si: f64, _n_subsystems: u32) -> f64 {
    lambda_si
}

/// Probability of no hit by time `t`.
pub fn survival_probability(rate_total: f64, t: f64) -> f64 {
    libm::exp(-rate_total * t)
}

/// Mean waiting time to the first hit.
pub fn mean_collapse_time(rate_total: f64) -> f64 {
    1.0 / rate_total
}

/// Heating power per particle in watts, `dims·λ·ħ²/(4·m·r_c²)`.
pub fn heating_rate(lambda_si: f64, mass_in_mn: f64, r_c_m: f64, dims: Dims) -> f64 {
    let m = mass_in_mn * NUCLEON_MASS_KG;
    dims.count() * lambda_si * HBAR_SI * HBAR_SI / (4.0 * m * r_c_m * r_c_m)
}

/// Heating rate in internal units (ħ = 1): `dims·λ/(4·m·r_c²)`.
pub fn heating_rate_internal(lambda: f64, mass: f64, r_c: f64, dims: Dims) -> f64 {
    dims.count() * lambda / (4.0 * mass * r_c * r_c)
}

/// Growth of `⟨p²⟩` per dimension in SI units (kg² m² s⁻³), `λ·ħ²/(2·r_c²)`.
pub fn momentum_diffusion_rate(lambda_si: f64, r_c_m: f64) -> f64 {
    lambda_si * HBAR_SI * HBAR_SI / (2.0 * r_c_m * r_c_m)
}

/// Growth of `⟨p²⟩` per dimension in internal units, `λ/(2·r_c²)`.
pub fn momentum_diffusion_rate_internal(lambda: f64, r_c: f64) -> f64 {
    lambda / (2.0 * r_c * r_c)
}

/// Fringe-contrast attenuation `exp(−Γ(d)·t_flight)` for branches `d` apart
/// (same length unit as `params.r_c`) after `t_flight` seconds. Mass scaling
/// is resolved with unit mass.
pub fn visibility_analytic(d: f64, params: &CollapseParams, t_flight_s: f64) -> f64 {
    let gamma = params.total_rate_si(1.0) * separation_factor(d, params.r_c);
    libm::exp(-gamma * t_flight_s)
}

/// `1 − visibility_analytic`, accurate when the loss is tiny.
pub fn visibility_loss(d: f64, params: &CollapseParams, t_flight_s: f64) -> f64 {
    let gamma = params.total_rate_si(1.0) * separation_factor(d, params.r_c);
    -libm::expm1(-gamma * t_flight_s)
}
