use std::f64::consts::PI;

use num_complex::Complex64;
use qkr_core::analytics::{bessel_j, correction_term, perturbative_density, resonant_state};
use qkr_core::observables::{l1_distance, mean_energy, momentum_density, position_density, sigma_x};
use qkr_core::propagator::{apply_free, evolve, kick_matrix, FreePhaseSpec};
use qkr_core::scanner::{auto_range, resonance_width, scan_epsilon, ScanMode, ScanParams};
use qkr_core::wavepacket::{to_position, MomentumWavefunction, SimConfig};

const PHI: f64 = 0.485;

fn density_at(cfg: &SimConfig) -> Vec<f64> {
    let wf = evolve(cfg).unwrap();
    position_density(&to_position(&wf, cfg.grid()).unwrap())
        .values()
        .to_vec()
}

#[test]
fn resonant_evolution_is_bessel() {
    for n in [1usize, 5, 10, 40] {
        let cfg = SimConfig::new(n, PHI, 0.0).unwrap();
        let wf = evolve(&cfg).unwrap();
        let mut worst = 0.0f64;
        for m in wf.orders() {
            let rot = match m.rem_euclid(4) {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, -1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, 1.0),
            };
            let want = rot * bessel_j(m, n as f64 * PHI).unwrap();
            worst = worst.max((wf.amp(m) - want).norm());
        }
        assert!(worst < 1e-10, "N={n}: {worst}");
        let closed = resonant_state(n, PHI, wf.half_width()).unwrap();
        assert!(wf.max_abs_diff(&closed) < 1e-10);
    }
}

#[test]
fn resonance_keeps_position_density_flat() {
    for n in [0usize, 1, 17, 40] {
        let d = density_at(&SimConfig::new(n, PHI, 0.0).unwrap());
        let worst = d.iter().map(|v| (v - 1.0 / (2.0 * PI)).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10, "N={n}: {worst}");
    }
}

#[test]
fn antiresonance_recurs_every_two_periods() {
    let start = MomentumWavefunction::zero_momentum(SimConfig::default_half_width(20, PHI)).unwrap();
    for k in 1..=10usize {
        let cfg = SimConfig::new(2 * k, PHI, 0.0)
            .unwrap()
            .with_general_hbar(2.0 * PI)
            .unwrap();
        let wf = evolve(&cfg).unwrap();
        let overlap = start.inner(&wf).norm();
        assert!(overlap > 1.0 - 1e-10, "k={k}: {overlap}");
    }
}

#[test]
fn resonant_energy_grows_quadratically() {
    let hbar = 4.0 * PI;
    for n in [1usize, 2, 5, 10, 20, 40] {
        let wf = evolve(&SimConfig::new(n, PHI, 0.0).unwrap()).unwrap();
        let want = hbar * hbar * (n as f64 * PHI).powi(2) / 4.0;
        let got = mean_energy(&wf, hbar);
        assert!(((got - want) / want).abs() < 1e-8, "N={n}: {got} vs {want}");
    }
}

#[test]
fn momentum_insensitive_at_tiny_detuning() {
    let a = evolve(&SimConfig::new(40, PHI, 0.0).unwrap()).unwrap();
    let b = evolve(&SimConfig::new(40, PHI, 1e-8).unwrap()).unwrap();
    let dist = l1_distance(&momentum_density(&a), &momentum_density(&b)).unwrap();
    assert!(dist < 1e-3, "{dist}");
}

#[test]
fn correction_tracks_one_detuned_segment() {
    // Exact density change from swapping one resonant free flight for a
    // detuned one, after the k-th kick, compared with the first-order field.
    let k = 6;
    let eps = 1e-6;
    let m = SimConfig::default_half_width(k, PHI);
    let grid = SimConfig::new(k, PHI, 0.0).unwrap().grid();
    let psi = resonant_state(k, PHI, m).unwrap();
    let detuned = apply_free(&psi, FreePhaseSpec::ResonantRelative { l: 1, epsilon: eps });
    let d0 = position_density(&to_position(&psi, grid).unwrap());
    let d1 = position_density(&to_position(&detuned, grid).unwrap());
    let c = correction_term(k, PHI, eps, grid, m).unwrap();
    let (j, peak) = c
        .values
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |b, (i, v)| if v.abs() > b.1.abs() { (i, *v) } else { b });
    let exact = d1.values()[j] - d0.values()[j];
    assert!(((exact - peak) / peak).abs() < 0.02, "{exact} vs {peak}");

    // The resonant state the field is built on, by dense matrix products.
    let u = kick_matrix(PHI, m).unwrap();
    assert!(u.truncation_warning().is_none());
    let mut v = nalgebra::DVector::from_vec(MomentumWavefunction::zero_momentum(m).unwrap().into_amps());
    for _ in 0..k {
        v = &u.matrix * v;
    }
    let dense = MomentumWavefunction::new(m, v.iter().copied().collect()).unwrap();
    assert!(dense.max_abs_diff(&psi) < 1e-12);
}

#[test]
fn perturbative_density_is_first_order() {
    let n = 5;
    let error_at = |eps: f64| {
        let cfg = SimConfig::new(n, PHI, eps).unwrap();
        let full = density_at(&cfg);
        let pert = perturbative_density(n, PHI, eps, cfg.grid(), cfg.half_width()).unwrap();
        let err = full
            .iter()
            .zip(&pert.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        (full, pert, err)
    };
    let (full, pert, e1) = error_at(1e-7);
    let (_, _, e2) = error_at(5e-8);
    let ratio = e1 / e2;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio} ({e1}, {e2})");

    let cfg = SimConfig::new(n, PHI, 1e-7).unwrap();
    let grid = cfg.grid();
    let s_full = sigma_x(&qkr_core::Density::position(grid, full.clone()).unwrap()).unwrap();
    let s_pert = sigma_x(&qkr_core::Density::position(grid, pert.values.clone()).unwrap()).unwrap();
    assert!(((s_full - s_pert) / s_full).abs() < 0.02);

    let modulation = full.iter().map(|v| (v - 1.0 / (2.0 * PI)).abs()).fold(0.0, f64::max);
    assert!(e1 < 1e-2 * modulation, "{e1} vs {modulation}");
}

#[test]
fn profiles_peak_at_resonance_and_narrow() {
    let p = ScanParams::default();
    let mut widths = Vec::new();
    for n in 5..=10usize {
        let (scan, w) = resonance_width(n, &p, ScanMode::Position).unwrap();
        let centre = scan.values.len() / 2;
        let top = scan
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
            .0;
        assert_eq!(top, centre);
        assert!((scan.center() - PI / 3f64.sqrt()).abs() < 1e-6);
        widths.push(w);
    }
    assert!(widths.windows(2).all(|w| w[1] < w[0]), "{widths:?}");
}

#[test]
fn auto_range_shrinks_with_kicks() {
    let p = ScanParams::default();
    for mode in [ScanMode::Position, ScanMode::Fidelity] {
        let a = auto_range(5, &p, mode).unwrap();
        let b = auto_range(10, &p, mode).unwrap();
        assert!(b < a, "{mode:?}: {a} -> {b}");
    }
    let range = auto_range(5, &p, ScanMode::Position).unwrap();
    assert!(scan_epsilon(5, &p, ScanMode::Position, range)
        .unwrap()
        .width()
        .is_ok());
}

#[test]
fn scans_bitwise_identical_across_thread_counts() {
    let p = ScanParams {
        points: 33,
        ..ScanParams::default()
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| scan_epsilon(7, &p, ScanMode::Fidelity, 2e-2).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
    assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
}
