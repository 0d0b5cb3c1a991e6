//! Grid wavefunctions, the unit system and observables.
//!
//! Internal units set ħ = 1, measure mass in nucleon masses and length in
//! `1e-7 m` by default, which fixes the internal time unit to
//! `m_N · (1e-7 m)² / ħ ≈ 1.586e-7 s`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::fft::Fft;
use crate::propagator::Potential;
use crate::{HBAR_SI, NUCLEON_MASS_KG};

/// Tolerance on `|‖ψ‖² − 1|` for a state to count as normalized.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Scales translating between SI and internal units (ħ = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UnitSystem {
    pub length_unit_m: f64,
    pub mass_unit_kg: f64,
    pub time_unit_s: f64,
    pub hbar_internal: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self::new(1e-7, NUCLEON_MASS_KG).expect("default units are valid")
    }
}

impl UnitSystem {
    pub fn new(length_unit_m: f64, mass_unit_kg: f64) -> Result<Self> {
        if !(length_unit_m.is_finite() && length_unit_m > 0.0) {
            return Err(domain!("length unit must be positive, got {length_unit_m}"));
        }
        if !(mass_unit_kg.is_finite() && mass_unit_kg > 0.0) {
            return Err(domain!("mass unit must be positive, got {mass_unit_kg}"));
        }
        let time_unit_s = mass_unit_kg * length_unit_m * length_unit_m / HBAR_SI;
        Ok(Self {
            length_unit_m,
            mass_unit_kg,
            time_unit_s,
            hbar_internal: 1.0,
        })
    }

    /// Rate in s⁻¹ to inverse internal time.
    pub fn rate_to_internal(&self, rate_si: f64) -> Result<f64> {
        if !rate_si.is_finite() || rate_si < 0.0 {
            return Err(domain!("rate must be finite and >= 0, got {rate_si}"));
        }
        Ok(rate_si * self.time_unit_s)
    }

    pub fn rate_to_si(&self, rate_internal: f64) -> f64 {
        rate_internal / self.time_unit_s
    }

    pub fn length_to_internal(&self, meters: f64) -> f64 {
        meters / self.length_unit_m
    }

    pub fn length_to_si(&self, length: f64) -> f64 {
        length * self.length_unit_m
    }

    pub fn mass_to_internal(&self, kg: f64) -> f64 {
        kg / self.mass_unit_kg
    }

    pub fn mass_to_si(&self, mass: f64) -> f64 {
        mass * self.mass_unit_kg
    }

    pub fn time_to_internal(&self, seconds: f64) -> f64 {
        seconds / self.time_unit_s
    }

    pub fn time_to_si(&self, time: f64) -> f64 {
        time * self.time_unit_s
    }

    /// Joules per internal energy unit (ħ / time unit).
    pub fn energy_unit_j(&self) -> f64 {
        HBAR_SI / self.time_unit_s
    }
}

/// `lambda_si · time_unit_s`; the user-facing rate is always SI.
pub fn convert_rate(lambda_si: f64, units: &UnitSystem) -> Result<f64> {
    units.rate_to_internal(lambda_si)
}

/// Uniform periodic grid with a power-of-two number of points.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid1D {
    n_points: usize,
    x_min: f64,
    dx: f64,
}

impl Grid1D {
    pub fn new(n_points: usize, x_min: f64, dx: f64) -> Result<Self> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(domain!("grid size {n_points} is not a power of two >= 2"));
        }
        if !x_min.is_finite() {
            return Err(domain!("grid origin must be finite"));
        }
        if !(dx.is_finite() && dx > 0.0) {
            return Err(domain!("grid spacing must be positive, got {dx}"));
        }
        let extent = n_points as f64 * dx;
        if !extent.is_finite() {
            return Err(domain!("grid extent overflows"));
        }
        Ok(Self { n_points, x_min, dx })
    }

    /// Grid of `n_points` centred on the origin.
    pub fn centered(n_points: usize, dx: f64) -> Result<Self> {
        Self::new(n_points, -(n_points as f64) * dx / 2.0, dx)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Periodic length `n · dx`.
    pub fn extent(&self) -> f64 {
        self.n_points as f64 * self.dx
    }

    /// Last grid point.
    pub fn x_max(&self) -> f64 {
        self.x_min + (self.n_points - 1) as f64 * self.dx
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.extent()
    }

    /// Nyquist wavenumber `π / dx`.
    pub fn k_max(&self) -> f64 {
        PI / self.dx
    }

    /// Wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points as i64;
        let dk = self.dk();
        (0..n)
            .map(|j| if j < n / 2 { j } else { j - n } as f64 * dk)
            .collect()
    }

    fn ensure_same(&self, other: &Grid1D) -> Result<()> {
        if self != other {
            return Err(Error::Shape(format!("grids differ: {self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Complex amplitudes on a grid for a particle of the given mass (units of m_N).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid1D,
    amps: Vec<Complex64>,
    mass: f64,
}

impl WaveFunction {
    pub fn from_parts(grid: Grid1D, amps: Vec<Complex64>, mass: f64) -> Result<Self> {
        if amps.len() != grid.n_points() {
            return Err(Error::Shape(format!(
                "{} amplitudes for a grid of {} points",
                amps.len(),
                grid.n_points()
            )));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(domain!("mass must be positive, got {mass}"));
        }
        if amps.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Numeric("non-finite amplitude".into()));
        }
        Ok(Self { grid, amps, mass })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn norm2(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    pub fn is_normalized(&self) -> bool {
        libm::fabs(self.norm2() - 1.0) <= NORM_TOLERANCE
    }

    pub fn density(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n2 = self.norm2();
        if !(n2.is_finite() && n2 > 0.0) {
            return Err(Error::Degenerate);
        }
        let s = 1.0 / libm::sqrt(n2);
        for z in &mut self.amps {
            *z *= s;
        }
        Ok(self)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            amps: self.amps.iter().map(|&z| z * c).collect(),
            mass: self.mass,
        }
    }

    /// `⟨self|other⟩ = Σ conj(ψ) φ dx`.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        self.grid.ensure_same(&other.grid)?;
        let s: Complex64 = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.dx)
    }

    /// `|⟨self|other⟩|²` for normalized states.
    pub fn fidelity(&self, other: &WaveFunction) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Momentum-space amplitudes `φ(k_j)`, normalized so that
    /// `Σ|φ|² dk = Σ|ψ|² dx`. Entries are in FFT order.
    pub fn momentum_amplitudes(&self, fft: &Fft) -> Vec<Complex64> {
        let mut buf = self.amps.clone();
        fft.forward(&mut buf);
        let s = self.grid.dx / libm::sqrt(2.0 * PI);
        for z in &mut buf {
            *z *= s;
        }
        buf
    }
}

/// Minimum-uncertainty packet `∝ exp(−(x−x0)²/(4σ²) + i p0 x)`, normalized on the grid.
pub fn gaussian_packet(grid: Grid1D, x0: f64, p0: f64, sigma: f64, mass: f64) -> Result<WaveFunction> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(domain!("packet width must be positive, got {sigma}"));
    }
    if !(x0.is_finite() && p0.is_finite()) {
        return Err(domain!("packet centre and momentum must be finite"));
    }
    let lo = grid.x_min();
    let hi = grid.x_min() + grid.extent();
    if x0 - 6.0 * sigma < lo {
        return Err(domain!(
            "packet overflows the left edge: x0 - 6σ = {} < x_min = {lo}",
            x0 - 6.0 * sigma
        ));
    }
    if x0 + 6.0 * sigma > hi {
        return Err(domain!(
            "packet overflows the right edge: x0 + 6σ = {} > {hi}",
            x0 + 6.0 * sigma
        ));
    }
    let amp0 = libm::pow(2.0 * PI * sigma * sigma, -0.25);
    let amps = (0..grid.n_points())
        .map(|i| {
            let x = grid.x(i);
            let u = x - x0;
            let mag = amp0 * libm::exp(-u * u / (4.0 * sigma * sigma));
            let phase = p0 * x;
            Complex64::new(mag * libm::cos(phase), mag * libm::sin(phase))
        })
        .collect();
    WaveFunction::from_parts(grid, amps, mass)?.normalized()
}

/// Normalized `ca·a + cb·b`.
pub fn superpose(a: &WaveFunction, b: &WaveFunction, ca: Complex64, cb: Complex64) -> Result<WaveFunction> {
    a.grid.ensure_same(&b.grid)?;
    if a.mass != b.mass {
        return Err(Error::Shape(format!("masses differ: {} vs {}", a.mass, b.mass)));
    }
    let amps: Vec<Complex64> = a.amps.iter().zip(&b.amps).map(|(&x, &y)| ca * x + cb * y).collect();
    let combined = WaveFunction::from_parts(a.grid, amps, a.mass)?;
    let scale = ca.norm_sqr() * a.norm2() + cb.norm_sqr() * b.norm2();
    let n2 = combined.norm2();
    if n2 == 0.0 || n2 <= 1e-28 * scale {
        return Err(Error::Degenerate);
    }
    combined.normalized()
}

/// Spin-up and spin-down branches of the pointer wavefunction.
///
/// The spin labels are orthogonal, so the total norm is the sum of the branch norms.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    pub branch_up: WaveFunction,
    pub branch_down: WaveFunction,
}

impl HybridState {
    pub fn new(branch_up: WaveFunction, branch_down: WaveFunction) -> Result<Self> {
        branch_up.grid.ensure_same(&branch_down.grid)?;
        if branch_up.mass != branch_down.mass {
            return Err(Error::Shape(format!(
                "branch masses differ: {} vs {}",
                branch_up.mass, branch_down.mass
            )));
        }
        Ok(Self {
            branch_up,
            branch_down,
        })
    }

    /// `c_up |↑⟩⊗φ_up + c_down |↓⟩⊗φ_down` with normalized pointer states.
    pub fn entangle(c_up: Complex64, pointer_up: &WaveFunction, c_down: Complex64, pointer_down: &WaveFunction) -> Result<Self> {
        let s = Self::new(pointer_up.scaled(c_up), pointer_down.scaled(c_down))?;
        let n2 = s.total_norm2();
        if n2 == 0.0 {
            return Err(Error::Degenerate);
        }
        let r = Complex64::new(1.0 / libm::sqrt(n2), 0.0);
        Ok(Self {
            branch_up: s.branch_up.scaled(r),
            branch_down: s.branch_down.scaled(r),
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.branch_up.grid
    }

    pub fn mass(&self) -> f64 {
        self.branch_up.mass
    }

    pub fn total_norm2(&self) -> f64 {
        self.branch_up.norm2() + self.branch_down.norm2()
    }

    pub fn is_normalized(&self) -> bool {
        libm::fabs(self.total_norm2() - 1.0) <= NORM_TOLERANCE
    }

    /// `(‖up‖², ‖down‖²)`.
    pub fn branch_weights(&self) -> (f64, f64) {
        (self.branch_up.norm2(), self.branch_down.norm2())
    }
}

/// Expectation values in internal units, normalized by `norm2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Observables {
    pub norm2: f64,
    pub mean_x: f64,
    pub var_x: f64,
    pub mean_p: f64,
    pub var_p: f64,
    pub energy: f64,
}

impl Observables {
    pub fn mean_p2(&self) -> f64 {
        self.var_p + self.mean_p * self.mean_p
    }
}

/// Reusable evaluator holding the FFT plan and tabulated potential for one grid.
#[derive(Debug, Clone)]
pub struct ObservableEstimator {
    grid: Grid1D,
    mass: f64,
    fft: Fft,
    k: Vec<f64>,
    potential: Option<Vec<f64>>,
    scratch: Vec<Complex64>,
}

impl ObservableEstimator {
    pub fn new(grid: Grid1D, mass: f64, potential: &Potential) -> Result<Self> {
        let fft = Fft::new(grid.n_points())?;
        let potential = match potential {
            Potential::Free => None,
            other => Some(other.values(&grid, mass)?),
        };
        Ok(Self {
            grid,
            mass,
            fft,
            k: grid.wavenumbers(),
            potential,
            scratch: alloc::vec![Complex64::new(0.0, 0.0); grid.n_points()],
        })
    }

    pub fn evaluate(&mut self, psi: &WaveFunction) -> Result<Observables> {
        self.grid.ensure_same(&psi.grid)?;
        let dx = self.grid.dx;
        let mut n2 = 0.0;
        let mut sx = 0.0;
        let mut sxx = 0.0;
        let mut sv = 0.0;
        for (i, z) in psi.amps.iter().enumerate() {
            let w = z.norm_sqr();
            let x = self.grid.x(i);
            n2 += w;
            sx += w * x;
            sxx += w * x * x;
            if let Some(v) = &self.potential {
                sv += w * v[i];
            }
        }
        if !n2.is_finite() || !sxx.is_finite() {
            return Err(Error::Numeric("non-finite amplitudes".into()));
        }
        if n2 == 0.0 {
            return Err(Error::Degenerate);
        }
        let mean_x = sx / n2;
        let var_x = (sxx / n2 - mean_x * mean_x).max(0.0);
        let mean_v = sv / n2;

        self.scratch.copy_from_slice(&psi.amps);
        self.fft.forward(&mut self.scratch);
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (z, &k) in self.scratch.iter().zip(&self.k) {
            let w = z.norm_sqr();
            m0 += w;
            m1 += w * k;
            m2 += w * k * k;
        }
        let mean_p = m1 / m0;
        let mean_p2 = m2 / m0;
        let var_p = (mean_p2 - mean_p * mean_p).max(0.0);
        Ok(Observables {
            norm2: n2 * dx,
            mean_x,
            var_x,
            mean_p,
            var_p,
            energy: mean_p2 / (2.0 * self.mass) + mean_v,
        })
    }
}

/// Spectral estimates of position, momentum and energy moments.
pub fn observables(psi: &WaveFunction, potential: &Potential) -> Result<Observables> {
    ObservableEstimator::new(psi.grid, psi.mass, potential)?.evaluate(psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid1D {
        Grid1D::centered(1024, 0.05).unwrap()
    }

    #[test]
    fn centred_packet_is_normalized_and_symmetric() {
        let psi = gaussian_packet(grid(), 0.0, 0.0, 1.0, 1.0).unwrap();
        assert!((psi.norm2() - 1.0).abs() < 1e-9);
        let o = observables(&psi, &Potential::Free).unwrap();
        assert!(o.mean_x.abs() < 1e-9);
        assert!((o.var_x - 1.0).abs() < 1e-9);
    }

    #[test]
    fn boosted_packet_mean_momentum() {
        let psi = gaussian_packet(grid(), 0.0, 5.0, 1.0, 1.0).unwrap();
        let o = observables(&psi, &Potential::Free).unwrap();
        assert!((o.mean_p - 5.0).abs() < 1e-6, "{}", o.mean_p);
        // minimum uncertainty: Var(p) = 1/(4σ²)
        assert!((o.var_p - 0.25).abs() < 1e-6);
    }

    #[test]
    fn packet_at_grid_edge_is_rejected() {
        let g = grid();
        match gaussian_packet(g, g.x_min(), 0.0, 1.0, 1.0) {
            Err(Error::Domain(msg)) => assert!(msg.contains("left"), "{msg}"),
            other => panic!("expected domain error, got {other:?}"),
        }
        match gaussian_packet(g, g.x_max(), 0.0, 1.0, 1.0) {
            Err(Error::Domain(msg)) => assert!(msg.contains("right"), "{msg}"),
            other => panic!("expected domain error, got {other:?}"),
        }
        assert!(gaussian_packet(g, 0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn gaussian_kinetic_energy() {
        let psi = gaussian_packet(grid(), 0.0, 0.0, 1.0, 1.0).unwrap();
        let o = observables(&psi, &Potential::Free).unwrap();
        // ⟨p²⟩ = 1/(4σ²), so E = 1/(8mσ²)
        assert!((o.energy - 0.125).abs() < 1e-6, "{}", o.energy);
    }

    #[test]
    fn superpose_identity_and_degeneracy() {
        let psi = gaussian_packet(grid(), 1.0, 0.5, 1.0, 1.0).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let same = superpose(&psi, &psi, one, zero).unwrap();
        for (a, b) in same.amps().iter().zip(psi.amps()) {
            assert!((a - b).norm() < 1e-12);
        }
        let neg = psi.scaled(-one);
        assert_eq!(superpose(&psi, &neg, one, one), Err(Error::Degenerate));
    }

    #[test]
    fn two_hump_superposition_masses() {
        let g = grid();
        let left = gaussian_packet(g, -6.0, 0.0, 0.5, 1.0).unwrap();
        let right = gaussian_packet(g, 6.0, 0.0, 0.5, 1.0).unwrap();
        let c = Complex64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
        let psi = superpose(&left, &right, c, c).unwrap();
        let mut left_mass = 0.0;
        for (i, z) in psi.amps().iter().enumerate() {
            if g.x(i) < 0.0 {
                left_mass += z.norm_sqr() * g.dx();
            }
        }
        assert!((left_mass - 0.5).abs() < 1e-6);
        let o = observables(&psi, &Potential::Free).unwrap();
        assert!(o.mean_x.abs() < 1e-9);
    }

    #[test]
    fn superpose_rejects_mismatched_grids() {
        let a = gaussian_packet(grid(), 0.0, 0.0, 1.0, 1.0).unwrap();
        let g2 = Grid1D::centered(512, 0.05).unwrap();
        let b = gaussian_packet(g2, 0.0, 0.0, 1.0, 1.0).unwrap();
        let one = Complex64::new(1.0, 0.0);
        assert!(matches!(superpose(&a, &b, one, one), Err(Error::Shape(_))));
        let c = gaussian_packet(grid(), 0.0, 0.0, 1.0, 2.0).unwrap();
        assert!(matches!(superpose(&a, &c, one, one), Err(Error::Shape(_))));
    }

    #[test]
    fn default_time_unit() {
        let u = UnitSystem::default();
        let expected = NUCLEON_MASS_KG * 1e-14 / HBAR_SI;
        assert!((u.time_unit_s / expected - 1.0).abs() < 1e-12);
        assert!((u.time_unit_s - 1.586e-7).abs() < 1e-9);
        assert_eq!(u.hbar_internal, 1.0);
        assert!(UnitSystem::new(0.0, 1.0).is_err());
        assert!(UnitSystem::new(1.0, -1.0).is_err());
    }

    #[test]
    fn rate_conversion() {
        let u = UnitSystem::default();
        let r = convert_rate(1e-16, &u).unwrap();
        // time unit recomputed from CODATA: 1.67262192e-27 * 1e-14 / 1.054571817e-34
        assert!((r / 1.586_067_343_197_357e-23 - 1.0).abs() < 1e-8, "{r:e}");
        assert_eq!(convert_rate(0.0, &u).unwrap(), 0.0);
        assert!(convert_rate(-1.0, &u).is_err());
        for &l in &[1e-16, 3.7e-8, 1e7] {
            let back = u.rate_to_si(convert_rate(l, &u).unwrap());
            assert!((back / l - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hybrid_requires_matching_branches() {
        let a = gaussian_packet(grid(), -3.0, 0.0, 0.5, 1.0).unwrap();
        let b = gaussian_packet(grid(), 3.0, 0.0, 0.5, 2.0).unwrap();
        assert!(HybridState::new(a.clone(), b).is_err());
        let b = gaussian_packet(grid(), 3.0, 0.0, 0.5, 1.0).unwrap();
        let h = HybridState::entangle(Complex64::new(0.6, 0.0), &a, Complex64::new(0.0, 0.8), &b).unwrap();
        assert!(h.is_normalized());
        let (wu, wd) = h.branch_weights();
        assert!((wu - 0.36).abs() < 1e-9 && (wd - 0.64).abs() < 1e-9);
    }
}
