//! Exclusion diagram in the (log₁₀ r_c, log₁₀ λ) plane.
//!
//! Bound curves are polylines in log-log space with constant extrapolation
//! beyond their end points. A cell is allowed when its λ lies on or below
//! every upper bound and on or above every lower bound at its r_c.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::collapse::separation_factor;
use crate::error::{domain, Error, Result};
use crate::rates::Dims;
use crate::{HBAR_SI, NUCLEON_MASS_KG};

/// Slack on comparisons in log₁₀ space, so points exactly on a bound count as allowed.
const LOG_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BoundKind {
    UpperOnLambda,
    LowerOnLambda,
}

impl BoundKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "UpperOnLambda" => Some(Self::UpperOnLambda),
            "LowerOnLambda" => Some(Self::LowerOnLambda),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::UpperOnLambda => "UpperOnLambda",
            Self::LowerOnLambda => "LowerOnLambda",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundCurve {
    pub name: String,
    pub kind: BoundKind,
    /// `(r_c in m, λ in s⁻¹)`, r_c strictly increasing.
    pub points: Vec<(f64, f64)>,
    pub source: String,
}

impl BoundCurve {
    pub fn new(name: impl Into<String>, kind: BoundKind, points: Vec<(f64, f64)>, source: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if points.len() < 2 {
            return Err(domain!("bound '{name}' needs at least 2 points, got {}", points.len()));
        }
        for (i, &(rc, l)) in points.iter().enumerate() {
            if !(rc.is_finite() && rc > 0.0 && l.is_finite() && l > 0.0) {
                return Err(domain!("bound '{name}' point {i} is not strictly positive and finite"));
            }
            if i > 0 && rc <= points[i - 1].0 {
                return Err(domain!("bound '{name}' r_c is not strictly increasing at point {i}"));
            }
        }
        Ok(Self {
            name,
            kind,
            points,
            source: source.into(),
        })
    }

    /// Flat bound at `lambda` between two r_c values.
    pub fn flat(name: impl Into<String>, kind: BoundKind, lambda: f64, rc_lo: f64, rc_hi: f64, source: impl Into<String>) -> Result<Self> {
        Self::new(name, kind, alloc::vec![(rc_lo, lambda), (rc_hi, lambda)], source)
    }

    /// λ on the curve at `rc_m`.
    pub fn eval(&self, rc_m: f64) -> f64 {
        let pts = &self.points;
        if rc_m <= pts[0].0 {
            return pts[0].1;
        }
        let last = pts[pts.len() - 1];
        if rc_m >= last.0 {
            return last.1;
        }
        let i = pts.partition_point(|p| p.0 <= rc_m);
        let (r0, l0) = pts[i - 1];
        if r0 == rc_m {
            return l0;
        }
        let (r1, l1) = pts[i];
        let f = (libm::log10(rc_m) - libm::log10(r0)) / (libm::log10(r1) - libm::log10(r0));
        libm::pow(10.0, libm::log10(l0) + f * (libm::log10(l1) - libm::log10(l0)))
    }

    fn admits_log(&self, log_rc: f64, log_lambda: f64) -> bool {
        let bound = libm::log10(self.eval(libm::pow(10.0, log_rc)));
        match self.kind {
            BoundKind::UpperOnLambda => log_lambda <= bound + LOG_SLACK,
            BoundKind::LowerOnLambda => log_lambda >= bound - LOG_SLACK,
        }
    }

    pub fn admits(&self, lambda_s: f64, rc_m: f64) -> bool {
        self.admits_log(libm::log10(rc_m), libm::log10(lambda_s))
    }
}

/// True when `(λ, r_c)` satisfies every bound.
pub fn is_allowed(bounds: &[BoundCurve], lambda_s: f64, rc_m: f64) -> bool {
    bounds.iter().all(|b| b.admits(lambda_s, rc_m))
}

/// Largest λ (s⁻¹) compatible with fringe visibility ≥ `v_min` after `t_flight` seconds
/// for `N` nucleons split across `d` (same length unit as `r_c`).
/// Returns `+∞` when `d = 0`: such an experiment constrains nothing.
pub fn interference_bound(n_nucleons: f64, t_flight_s: f64, v_min: f64, d: f64, r_c: f64) -> Result<f64> {
    if !(n_nucleons > 0.0 && t_flight_s > 0.0 && r_c > 0.0 && d >= 0.0) {
        return Err(domain!("interference bound needs N, t_flight, r_c > 0 and d >= 0"));
    }
    if !(v_min > 0.0 && v_min < 1.0) {
        return Err(domain!("v_min must lie in (0, 1), got {v_min}"));
    }
    let factor = separation_factor(d, r_c);
    if factor == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-libm::log(v_min) / (n_nucleons * t_flight_s * factor))
}

/// Largest λ (s⁻¹) whose heating power per nucleon stays below `p_max_w` watts.
pub fn heating_bound(p_max_w: f64, r_c_m: f64, dims: Dims) -> Result<f64> {
    if !(p_max_w > 0.0 && r_c_m > 0.0) {
        return Err(domain!("heating bound needs positive power and r_c"));
    }
    Ok(p_max_w * 4.0 * NUCLEON_MASS_KG * r_c_m * r_c_m / (dims.count() * HBAR_SI * HBAR_SI))
}

/// Internal-unit inverse of [`crate::rates::heating_rate_internal`].
pub fn heating_bound_internal(p_max: f64, mass: f64, r_c: f64, dims: Dims) -> Result<f64> {
    if !(p_max > 0.0 && mass > 0.0 && r_c > 0.0) {
        return Err(domain!("heating bound needs positive power, mass and r_c"));
    }
    Ok(p_max * 4.0 * mass * r_c * r_c / dims.count())
}

/// Upper-bound curve from an interference experiment sampled at `rc_points_m`.
/// Points with an infinite bound are dropped; `None` if fewer than two remain.
pub fn interference_bound_curve(
    name: &str,
    n_nucleons: f64,
    t_flight_s: f64,
    v_min: f64,
    d_m: f64,
    rc_points_m: &[f64],
) -> Result<Option<BoundCurve>> {
    let mut pts = Vec::new();
    for &rc in rc_points_m {
        let l = interference_bound(n_nucleons, t_flight_s, v_min, d_m, rc)?;
        if l.is_finite() && l > 0.0 {
            pts.push((rc, l));
        }
    }
    if pts.len() < 2 {
        return Ok(None);
    }
    let source = format!("interference: N={n_nucleons:e}, t={t_flight_s} s, V_min={v_min}, d={d_m:e} m");
    BoundCurve::new(name, BoundKind::UpperOnLambda, pts, source).map(Some)
}

pub fn heating_bound_curve(name: &str, p_max_w: f64, dims: Dims, rc_points_m: &[f64]) -> Result<BoundCurve> {
    let pts = rc_points_m
        .iter()
        .map(|&rc| heating_bound(p_max_w, rc, dims).map(|l| (rc, l)))
        .collect::<Result<Vec<_>>>()?;
    BoundCurve::new(name, BoundKind::UpperOnLambda, pts, format!("heating: P_max={p_max_w:e} W/nucleon"))
}

/// Which raster edges still contain allowed cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OpenFlags {
    /// Region touches the smallest λ on the axis.
    pub lower: bool,
    /// Region touches the largest λ on the axis.
    pub upper: bool,
    pub rc_low: bool,
    pub rc_high: bool,
}

impl OpenFlags {
    pub fn any(&self) -> bool {
        self.lower || self.upper || self.rc_low || self.rc_high
    }
}

/// Allowed λ interval in one r_c column.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundaryPoint {
    pub log10_rc: f64,
    pub log10_lambda_min: f64,
    pub log10_lambda_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExclusionRaster {
    pub log10_lambda_axis: Vec<f64>,
    pub log10_rc_axis: Vec<f64>,
    /// Row-major by λ: `allowed[i_lambda * n_rc + i_rc]`.
    pub allowed: Vec<bool>,
    pub span_lambda_decades: f64,
    pub span_rc_decades: f64,
    pub open: OpenFlags,
    pub closed: bool,
    pub empty: bool,
    pub boundary: Vec<BoundaryPoint>,
}

impl ExclusionRaster {
    pub fn is_allowed(&self, i_rc: usize, i_lambda: usize) -> bool {
        self.allowed[i_lambda * self.log10_rc_axis.len() + i_rc]
    }

    pub fn allowed_count(&self) -> usize {
        self.allowed.iter().filter(|&&a| a).count()
    }
}

fn axis(range: (f64, f64), per_decade: usize) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(domain!("axis range ({lo}, {hi}) is empty"));
    }
    let n = libm::round((hi - lo) * per_decade as f64) as usize + 1;
    if !(2..=100_000).contains(&n) {
        return Err(domain!("axis would have {n} points"));
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

/// Rasterizes the allowed region on a log-log grid.
///
/// Ranges are `(lo, hi)` in decades (`log₁₀ s⁻¹` for λ, `log₁₀ m` for r_c);
/// `per_decade` is the number of cells per decade on both axes.
pub fn allowed_region(
    bounds: &[BoundCurve],
    lambda_range_decades: (f64, f64),
    rc_range_decades: (f64, f64),
    per_decade: usize,
) -> Result<ExclusionRaster> {
    if per_decade == 0 {
        return Err(Error::Domain("resolution must be >= 1 cell per decade".into()));
    }
    let lam = axis(lambda_range_decades, per_decade)?;
    let rc = axis(rc_range_decades, per_decade)?;
    let (nl, nr) = (lam.len(), rc.len());
    let mut allowed = alloc::vec![true; nl * nr];
    for (ir, &lr) in rc.iter().enumerate() {
        for b in bounds {
            for (il, &ll) in lam.iter().enumerate() {
                let cell = &mut allowed[il * nr + ir];
                if *cell && !b.admits_log(lr, ll) {
                    *cell = false;
                }
            }
        }
    }

    let at = |il: usize, ir: usize| allowed[il * nr + ir];
    let mut boundary = Vec::new();
    let (mut lmin, mut lmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut rmin, mut rmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for ir in 0..nr {
        let rows: Vec<usize> = (0..nl).filter(|&il| at(il, ir)).collect();
        if let (Some(&first), Some(&last)) = (rows.first(), rows.last()) {
            boundary.push(BoundaryPoint {
                log10_rc: rc[ir],
                log10_lambda_min: lam[first],
                log10_lambda_max: lam[last],
            });
            lmin = lmin.min(lam[first]);
            lmax = lmax.max(lam[last]);
            rmin = rmin.min(rc[ir]);
            rmax = rmax.max(rc[ir]);
        }
    }
    let empty = boundary.is_empty();
    let open = OpenFlags {
        lower: (0..nr).any(|ir| at(0, ir)),
        upper: (0..nr).any(|ir| at(nl - 1, ir)),
        rc_low: (0..nl).any(|il| at(il, 0)),
        rc_high: (0..nl).any(|il| at(il, nr - 1)),
    };
    Ok(ExclusionRaster {
        log10_lambda_axis: lam,
        log10_rc_axis: rc,
        closed: !empty && !open.any(),
        empty,
        span_lambda_decades: if empty { 0.0 } else { lmax - lmin },
        span_rc_decades: if empty { 0.0 } else { rmax - rmin },
        open,
        allowed,
        boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn flat(name: &str, kind: BoundKind, l: f64) -> BoundCurve {
        BoundCurve::flat(name, kind, l, 1e-9, 1e-5, "test").unwrap()
    }

    #[test]
    fn curve_validation() {
        assert!(BoundCurve::new("x", BoundKind::UpperOnLambda, vec![(1e-7, 1e-8)], "").is_err());
        assert!(BoundCurve::new("x", BoundKind::UpperOnLambda, vec![(1e-7, 1e-8), (1e-7, 1e-9)], "").is_err());
        assert!(BoundCurve::new("x", BoundKind::UpperOnLambda, vec![(1e-7, 0.0), (1e-6, 1e-9)], "").is_err());
    }

    #[test]
    fn loglog_interpolation_and_extrapolation() {
        let c = BoundCurve::new("c", BoundKind::UpperOnLambda, vec![(1e-8, 1e-10), (1e-6, 1e-6)], "").unwrap();
        assert_eq!(c.eval(1e-8), 1e-10);
        assert_eq!(c.eval(1e-6), 1e-6);
        assert!((c.eval(1e-7) / 1e-8 - 1.0).abs() < 1e-12);
        assert_eq!(c.eval(1e-12), 1e-10);
        assert_eq!(c.eval(1.0), 1e-6);
    }

    #[test]
    fn interference_bound_values() {
        let e_inv = (-1.0f64).exp();
        let b = interference_bound(1e4, 10.0, e_inv, 1e3, 1.0).unwrap();
        assert!((b / 1e-5 - 1.0).abs() < 1e-12, "{b:e}");
        assert!(interference_bound(1e4, 10.0, 1.0 - 1e-12, 1e3, 1.0).unwrap() < 1e-15);
        assert_eq!(interference_bound(1e4, 10.0, 0.5, 0.0, 1.0).unwrap(), f64::INFINITY);
        let near = interference_bound(1e4, 10.0, 0.5, 1.0, 1.0).unwrap();
        let far = interference_bound(1e4, 10.0, 0.5, 2.0, 1.0).unwrap();
        let expected = (1.0 - (-1.0f64).exp()) / (1.0 - (-0.25f64).exp());
        assert!((near / far - expected).abs() < 1e-12);
        assert!((near / far - 2.86).abs() < 0.01);
        assert!(interference_bound(1e4, 10.0, 1.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn heating_bound_scaling_and_inverse() {
        let a = heating_bound(1e-30, 1e-7, Dims::One).unwrap();
        let b = heating_bound(1e-30, 2e-7, Dims::One).unwrap();
        assert!((b / a - 4.0).abs() < 1e-12);
        let p = crate::rates::heating_rate(3e-12, 1.0, 1e-7, Dims::Three);
        let back = heating_bound(p, 1e-7, Dims::Three).unwrap();
        assert!((back / 3e-12 - 1.0).abs() < 1e-12);
        assert_eq!(heating_bound_internal(0.25, 1.0, 1.0, Dims::One).unwrap(), 1.0);
    }

    #[test]
    fn single_upper_bound_is_open_below() {
        let r = allowed_region(&[flat("u", BoundKind::UpperOnLambda, 1e-8)], (-20.0, -2.0), (-10.0, -4.0), 10).unwrap();
        assert!(r.open.lower);
        assert!(!r.open.upper);
        assert!(!r.closed);
    }

    #[test]
    fn bracket_spans_eight_decades() {
        let b = [
            flat("lo", BoundKind::LowerOnLambda, 1e-16),
            flat("hi", BoundKind::UpperOnLambda, 1e-8),
        ];
        let r = allowed_region(&b, (-20.0, -2.0), (-10.0, -4.0), 20).unwrap();
        assert!((r.span_lambda_decades - 8.0).abs() < 1e-9);
        assert!(is_allowed(&b, 1e-12, 1e-7));
        assert!(!is_allowed(&b, 1e-6, 1e-7));
        assert!(!is_allowed(&b, 1e-17, 1e-7));
    }

    #[test]
    fn empty_region_reported() {
        let b = [
            flat("lo", BoundKind::LowerOnLambda, 1e-6),
            flat("hi", BoundKind::UpperOnLambda, 1e-8),
        ];
        let r = allowed_region(&b, (-20.0, -2.0), (-10.0, -4.0), 5).unwrap();
        assert!(r.empty);
        assert!(!r.closed);
        assert_eq!(r.span_lambda_decades, 0.0);
    }
}
