use grwlab_core::collapse::{grw_trajectory, hit_position_density, CollapseParams};
use grwlab_core::exclusion::{allowed_region, BoundCurve, BoundKind};
use grwlab_core::fft::Fft;
use grwlab_core::propagator::Propagator;
use grwlab_core::qstate::{gaussian_packet, observables, superpose};
use grwlab_core::rates::{amplified_rate, mass_rate, survival_probability};
use grwlab_core::{Complex64, Grid1D, Potential, RngStream, UnitSystem, WaveFunction};
use proptest::prelude::*;

fn random_state(grid: Grid1D, parts: &[(f64, f64)]) -> WaveFunction {
    let amps: Vec<Complex64> = parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
    WaveFunction::from_parts(grid, amps, 1.0).unwrap().normalized().unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constructed_states_are_normalized(
        x0 in -3.0f64..3.0,
        p0 in -4.0f64..4.0,
        sigma in 0.3f64..1.5,
        mass in 0.1f64..10.0,
        theta in 0.0f64..std::f64::consts::TAU,
    ) {
        let grid = Grid1D::centered(512, 0.05).unwrap();
        let a = gaussian_packet(grid, x0, p0, sigma, mass).unwrap();
        prop_assert!((a.norm2() - 1.0).abs() < 1e-9);
        let b = gaussian_packet(grid, -x0, -p0, sigma, mass).unwrap();
        let s = superpose(&a, &b, Complex64::new(0.6, 0.0), Complex64::from_polar(0.8, theta));
        if let Ok(s) = s {
            prop_assert!((s.norm2() - 1.0).abs() < 1e-9);
            prop_assert!(s.norm2().is_finite());
        }
    }

    #[test]
    fn observables_ignore_global_phase(x0 in -2.0f64..2.0, p0 in -3.0f64..3.0, sigma in 0.4f64..1.2) {
        let grid = Grid1D::centered(256, 0.08).unwrap();
        let psi = gaussian_packet(grid, x0, p0, sigma, 1.0).unwrap();
        let v = Potential::Harmonic { omega: 0.8 };
        let base = observables(&psi, &v).unwrap();
        for theta in [0.1, 1.0, 3.0] {
            let o = observables(&psi.scaled(Complex64::from_polar(1.0, theta)), &v).unwrap();
            for (a, b) in [
                (o.norm2, base.norm2),
                (o.mean_x, base.mean_x),
                (o.var_x, base.var_x),
                (o.mean_p, base.mean_p),
                (o.var_p, base.var_p),
                (o.energy, base.energy),
            ] {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn parseval(parts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 128)) {
        let grid = Grid1D::centered(128, 0.2).unwrap();
        let psi = random_state(grid, &parts);
        let fft = Fft::new(128).unwrap();
        let k_norm: f64 = psi.momentum_amplitudes(&fft).iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dk();
        prop_assert!(rel(k_norm, psi.norm2()) < 1e-9);
    }

    #[test]
    fn unit_round_trips(
        length in 1e-12f64..1e-3,
        mass in 1e-30f64..1e-20,
        value in 1e-20f64..1e20,
    ) {
        let u = UnitSystem::new(length, mass).unwrap();
        prop_assert!(rel(u.rate_to_si(u.rate_to_internal(value).unwrap()), value) < 1e-12);
        prop_assert!(rel(u.length_to_si(u.length_to_internal(value)), value) < 1e-12);
        prop_assert!(rel(u.mass_to_si(u.mass_to_internal(value)), value) < 1e-12);
        prop_assert!(rel(u.time_to_si(u.time_to_internal(value)), value) < 1e-12);
    }

    #[test]
    fn hit_density_is_a_probability_density(
        parts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 128),
        r_c in 0.5f64..2.0,
    ) {
        let grid = Grid1D::centered(128, 0.25).unwrap();
        let psi = random_state(grid, &parts);
        let table = hit_position_density(&psi, r_c).unwrap();
        prop_assert!((table.integral() - 1.0).abs() < 1e-9, "{}", table.integral());
        prop_assert!(table.values.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn amplification_is_linear(n in 1.0f64..1e30, lambda in 1e-20f64..1e-2) {
        prop_assert_eq!(amplified_rate(n, lambda), n * amplified_rate(1.0, lambda));
        prop_assert_eq!(mass_rate(n, lambda), amplified_rate(n, lambda));
    }

    #[test]
    fn survival_decreases(rate in 0.0f64..1e3, t in 0.0f64..1e2, dr in 1e-3f64..10.0, dt in 1e-3f64..10.0) {
        prop_assert_eq!(survival_probability(rate, 0.0), 1.0);
        let s = survival_probability(rate, t);
        prop_assert!(survival_probability(rate + dr, t) <= s);
        prop_assert!(survival_probability(rate, t + dt) <= s);
    }

    #[test]
    fn interpolation_hits_listed_points(
        steps in prop::collection::vec((0.1f64..2.0, -3.0f64..3.0), 2..8),
        rc0 in -10.0f64..-8.0,
        l0 in -18.0f64..-6.0,
    ) {
        let mut points = Vec::new();
        let (mut lrc, mut ll) = (rc0, l0);
        for (drc, dl) in steps {
            points.push((10f64.powf(lrc), 10f64.powf(ll)));
            lrc += drc;
            ll += dl;
        }
        let c = BoundCurve::new("c", BoundKind::UpperOnLambda, points.clone(), "").unwrap();
        for (rc, l) in points {
            prop_assert!(rel(c.eval(rc), l) < 1e-12, "{} vs {l}", c.eval(rc));
        }
    }

    #[test]
    fn extra_bounds_never_grow_the_region(
        upper in -12.0f64..-4.0,
        lower in -20.0f64..-12.0,
        extra_rc in prop::collection::vec(-10.0f64..-4.0, 2),
        extra_l in prop::collection::vec(-20.0f64..-2.0, 2),
        extra_is_upper in any::<bool>(),
    ) {
        let base = vec![
            BoundCurve::flat("u", BoundKind::UpperOnLambda, 10f64.powf(upper), 1e-10, 1e-4, "").unwrap(),
            BoundCurve::flat("l", BoundKind::LowerOnLambda, 10f64.powf(lower), 1e-10, 1e-4, "").unwrap(),
        ];
        let (a, b) = (extra_rc[0].min(extra_rc[1]), extra_rc[0].max(extra_rc[1]));
        prop_assume!(b - a > 1e-3);
        let kind = if extra_is_upper { BoundKind::UpperOnLambda } else { BoundKind::LowerOnLambda };
        let extra = BoundCurve::new(
            "x",
            kind,
            vec![(10f64.powf(a), 10f64.powf(extra_l[0])), (10f64.powf(b), 10f64.powf(extra_l[1]))],
            "",
        )
        .unwrap();
        let before = allowed_region(&base, (-20.0, -2.0), (-10.0, -4.0), 5).unwrap();
        let mut more = base.clone();
        more.push(extra);
        let after = allowed_region(&more, (-20.0, -2.0), (-10.0, -4.0), 5).unwrap();
        for (x, y) in after.allowed.iter().zip(&before.allowed) {
            prop_assert!(!*x || *y);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn propagation_is_unitary(
        bumps in prop::collection::vec(-1.0f64..1.0, 128),
        which in 0usize..3,
    ) {
        let grid = Grid1D::centered(128, 0.2).unwrap();
        let v = match which {
            0 => Potential::Free,
            1 => Potential::Harmonic { omega: 0.05 },
            _ => Potential::Tabulated(bumps),
        };
        let psi = gaussian_packet(grid, 0.0, 1.0, 1.0, 1.0).unwrap();
        let out = Propagator::new(grid, 1.0, &v, 0.01).unwrap().step(&psi, 10_000).unwrap();
        prop_assert!((out.norm2() - psi.norm2()).abs() < 1e-10, "{}", out.norm2() - psi.norm2());
    }

    #[test]
    fn propagation_reverses(bumps in prop::collection::vec(-1.0f64..1.0, 128), p0 in -2.0f64..2.0) {
        let grid = Grid1D::centered(128, 0.2).unwrap();
        let v = Potential::Tabulated(bumps);
        let psi = gaussian_packet(grid, 0.0, p0, 1.0, 1.0).unwrap();
        let there = Propagator::new(grid, 1.0, &v, 0.01).unwrap().step(&psi, 1000).unwrap();
        let back = Propagator::new(grid, 1.0, &v, -0.01).unwrap().step(&there, 1000).unwrap();
        prop_assert!(back.fidelity(&psi).unwrap() >= 1.0 - 1e-8);
    }

    #[test]
    fn trajectories_are_deterministic(seed in any::<u64>(), index in 0u64..1000) {
        let units = UnitSystem::default();
        let grid = Grid1D::centered(128, 0.2).unwrap();
        let psi = gaussian_packet(grid, 0.0, 0.0, 1.0, 1.0).unwrap();
        let params = CollapseParams::nucleon(units.rate_to_si(5.0), 1.0).unwrap();
        let run = || {
            grw_trajectory(&psi, &Potential::Free, &params, &units, 1.0, 0.01, 10, &mut RngStream::new(seed, index))
                .unwrap()
        };
        prop_assert_eq!(run(), run());
    }
}
