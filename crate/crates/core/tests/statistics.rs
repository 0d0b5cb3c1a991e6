//! Monte Carlo checks of the hit process against closed-form statistics.

use std::ops::ControlFlow;

use grwlab_core::collapse::{grw_trajectory, run_collapse_process, sample_next_hit_time, CollapseParams, HitSampler, Schedule};
use grwlab_core::experiments::{born_ensemble, MeasurementConfig, Sequential};
use grwlab_core::propagator::Propagator;
use grwlab_core::qstate::{gaussian_packet, superpose};
use grwlab_core::stats::{linear_fit, two_proportion_z};
use grwlab_core::{Complex64, Grid1D, Potential, RngStream, UnitSystem, WaveFunction};

#[test]
fn exponential_waiting_times() {
    let mut rng = RngStream::new(3, 0);
    let draws: Vec<f64> = (0..100_000)
        .map(|_| sample_next_hit_time(2.0, &mut rng).unwrap().unwrap())
        .collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - 0.5).abs() < 0.005, "{mean}");
    assert!((var.sqrt() / mean - 1.0).abs() < 0.02);
}

#[test]
fn macroscopic_first_hit_within_a_microsecond() {
    let units = UnitSystem::default();
    let grid = Grid1D::centered(64, 0.5).unwrap();
    let params = CollapseParams::new(1e-16, 1.0, 1e23, false).unwrap();
    let rate = params.total_rate_internal(1.0, &units).unwrap();
    let prop = Propagator::new(grid, 1.0, &Potential::Free, 1e-4).unwrap();
    let schedule = Schedule::new(50.0 / rate, 1e-4, usize::MAX / 2, rate).unwrap();
    let mut sampler = HitSampler::new(grid, 1.0).unwrap();
    let psi = gaussian_packet(grid, 0.0, 0.0, 1.0, 1.0).unwrap();
    let n = 10_000;
    let mut total = 0.0;
    for i in 0..n {
        let mut state = psi.clone();
        let mut first = None;
        run_collapse_process(
            &mut state,
            &prop,
            &mut sampler,
            &schedule,
            &mut RngStream::new(8, i),
            |_, _| Ok(()),
            |e, _| {
                first = Some(e.t);
                Ok(ControlFlow::Break(()))
            },
        )
        .unwrap();
        total += first.expect("a hit within 50 mean lifetimes");
    }
    let mean_s = units.time_to_si(total / n as f64);
    assert!((mean_s / 1e-7 - 1.0).abs() < 0.03, "{mean_s}");
}

#[test]
fn superposition_localizes_after_five_lifetimes() {
    let units = UnitSystem::default();
    let grid = Grid1D::centered(256, 0.1).unwrap();
    let mass = 1e3;
    let left = gaussian_packet(grid, -5.0, 0.0, 0.5, mass).unwrap();
    let right = gaussian_packet(grid, 5.0, 0.0, 0.5, mass).unwrap();
    let cat = superpose(&left, &right, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)).unwrap();
    let params = CollapseParams::new(units.rate_to_si(1e-3), 1.0, 1.0, true).unwrap();
    assert!((params.total_rate_internal(mass, &units).unwrap() - 1.0).abs() < 1e-12);
    let n = 10_000;
    let mut localized = 0;
    for i in 0..n {
        let rec = grw_trajectory(&cat, &Potential::Free, &params, &units, 5.0, 0.01, 500, &mut RngStream::new(21, i)).unwrap();
        let dens = rec.final_state.density();
        let dx = grid.dx();
        let l: f64 = dens[..128].iter().sum::<f64>() * dx;
        let r: f64 = dens[128..].iter().sum::<f64>() * dx;
        if l.max(r) > 0.99 * (l + r) {
            localized += 1;
        }
    }
    assert!(localized as f64 >= 0.99 * n as f64, "{localized} of {n}");
}

fn bin_masses(psi: &WaveFunction, bins: usize, lo: usize, hi: usize) -> Vec<f64> {
    let dens = psi.density();
    let width = (hi - lo) / bins;
    (0..bins)
        .map(|b| dens[lo + b * width..lo + (b + 1) * width].iter().sum::<f64>() * psi.grid().dx())
        .collect()
}

#[test]
fn short_time_collapse_does_not_move_probability() {
    let units = UnitSystem::default();
    let grid = Grid1D::centered(128, 0.2).unwrap();
    let mass = 100.0;
    let psi = superpose(
        &gaussian_packet(grid, -3.0, 0.0, 1.0, mass).unwrap(),
        &gaussian_packet(grid, 3.0, 0.0, 1.0, mass).unwrap(),
        Complex64::new(0.8, 0.0),
        Complex64::new(0.6, 0.0),
    )
    .unwrap();
    let t = 0.5;
    let params = CollapseParams::new(units.rate_to_si(0.1 / t / mass), 1.0, 1.0, true).unwrap();
    let (bins, lo, hi) = (10, 39, 89);
    let reference = bin_masses(
        &Propagator::new(grid, mass, &Potential::Free, 0.01).unwrap().step(&psi, 50).unwrap(),
        bins,
        lo,
        hi,
    );
    let n = 10_000;
    let mut sum = vec![0.0; bins];
    let mut sum2 = vec![0.0; bins];
    for i in 0..n {
        let rec = grw_trajectory(&psi, &Potential::Free, &params, &units, t, 0.01, 50, &mut RngStream::new(5, i)).unwrap();
        for (b, m) in bin_masses(&rec.final_state, bins, lo, hi).into_iter().enumerate() {
            sum[b] += m;
            sum2[b] += m * m;
        }
    }
    let nf = n as f64;
    let mut chi2 = 0.0;
    for b in 0..bins {
        let mean = sum[b] / nf;
        let var = (sum2[b] / nf - mean * mean) * nf / (nf - 1.0);
        let se2 = (var / nf).max(1e-30);
        chi2 += (mean - reference[b]).powi(2) / se2;
    }
    let k = bins as f64;
    assert!(chi2 <= k + 3.0 * (2.0 * k).sqrt(), "χ² = {chi2} over {bins} bins");
}

#[test]
fn doubling_the_pointer_keeps_born_frequencies() {
    let units = UnitSystem::default();
    let grid = Grid1D::centered(1024, 0.05).unwrap();
    let params = CollapseParams::nucleon(1e-16, 1.0).unwrap();
    let n = 3000;
    let run = |nucleons: f64, dt: f64| {
        let cfg = MeasurementConfig::with_probability(0.3, nucleons, 10.0, 0.5, grid, dt, 12.6, units).unwrap();
        let (report, _) = born_ensemble(&cfg, &params, n, 99, &Sequential).unwrap();
        report.outcome_counts["up"]
    };
    let base = run(1e23, 6e-4);
    let doubled = run(2e23, 3e-4);
    let z = two_proportion_z(base, n as u64, doubled, n as u64);
    assert!(z.abs() < 3.0, "z = {z} ({base} vs {doubled})");
}

#[test]
fn strang_splitting_is_second_order() {
    let grid = Grid1D::centered(256, 0.6).unwrap();
    let well = Potential::Tabulated(grid.positions().iter().map(|x| -(-x * x / 8.0).exp()).collect());
    let psi = gaussian_packet(grid, -3.0, 1.0, 1.0, 1.0).unwrap();
    let t = 4.0;
    let reference = Propagator::new(grid, 1.0, &well, 1e-3).unwrap().step(&psi, 4000).unwrap();
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    let mut last = f64::INFINITY;
    for dt in [0.2f64, 0.1, 0.05, 0.02] {
        let out = Propagator::new(grid, 1.0, &well, dt).unwrap().step(&psi, (t / dt).round() as usize).unwrap();
        let err = out
            .amps()
            .iter()
            .zip(reference.amps())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
            * grid.dx().sqrt();
        assert!(err < last);
        last = err;
        lx.push(dt.ln());
        ly.push(err.ln());
    }
    let order = linear_fit(&lx, &ly).unwrap().slope;
    assert!((order - 2.0).abs() <= 0.2, "{order}");
}
