use hyperop_constructions::burgers::{sine_input, PRE_SHOCK_WARNING};
use hyperop_constructions::report::{phase_draws, PROFILE_LATTICE};
use hyperop_constructions::*;
use hyperop_core::exact_pde::burgers_exact_at;
use hyperop_core::grid::Grid;
use hyperop_core::measures::substream;
use hyperop_core::stats;
use proptest::prelude::*;
use rand::Rng;
use std::f64::consts::{PI, TAU};

#[test]
fn three_sensor_phase_is_exact() {
    let a = phase_matrix([0.0, TAU / 3.0, 2.0 * TAU / 3.0]).unwrap();
    let mut rng = substream(1, 0);
    for _ in 0..1000 {
        let xi: f64 = rng.random_range(0.0..TAU);
        let u: Vec<f64> = [0.0, TAU / 3.0, 2.0 * TAU / 3.0].iter().map(|x| -(x - xi).sin()).collect();
        let c: f64 = (0..3).map(|k| a[0][k] * u[k]).sum();
        let s: f64 = (0..3).map(|k| a[1][k] * u[k]).sum();
        assert!((c - xi.cos()).abs() < 1e-12 && (s - xi.sin()).abs() < 1e-12, "ξ {xi}: ({c}, {s})");
    }
}

#[test]
fn sdon_uses_three_sensors_and_one_term() {
    let net = build_burg_sdon(1e-2, 1.5).unwrap();
    assert_eq!(net.model.sensors.len(), 3);
    assert_eq!(net.model.p(), 1);
    assert!(net.warnings.is_empty());
    let e = net.phase_net.eval(&net.input(1.0)).unwrap();
    assert!((e[0] - 1f64.cos()).abs() < 1e-12 && (e[1] - 1f64.sin()).abs() < 1e-12);
}

#[test]
fn profile_matches_the_exact_solution() {
    for t in [0.5, 1.5, 3.5] {
        let prof = BurgersProfile::new(t).unwrap();
        let mut rng = substream(2, 0);
        for _ in 0..2000 {
            let z: f64 = rng.random_range(-TAU..TAU);
            let exact = burgers_exact_at(z.rem_euclid(TAU), 0.0, t);
            assert!((prof.value(z) - exact).abs() < 1e-12, "t {t}, z {z}");
        }
    }
}

#[test]
fn profile_net_is_within_eps_off_the_shock() {
    let eps = 1e-2;
    let prof = BurgersProfile::new(1.5).unwrap();
    let phi = build_profile_net(&prof, eps).unwrap();
    let zs: Vec<f64> = (0..4000).map(|i| -TAU + (i as f64 + 0.5) * 2.0 * TAU / 4000.0).collect();
    let out = phi.eval_batch(&zs, zs.len()).unwrap();
    for (z, o) in zs.iter().zip(&out) {
        if z.abs() > eps / 8.0 && (z.abs() - TAU).abs() > eps / 8.0 {
            assert!((o - prof.value(*z)).abs() <= eps, "z {z}: {o} vs {}", prof.value(*z));
        }
    }
}

#[test]
fn sdon_vanishes_at_the_symmetry_point() {
    let eps = 1e-2;
    let net = build_burg_sdon(eps, 1.5).unwrap();
    let out = net.model.forward(&net.grid, &net.input(0.0), &[PI]).unwrap();
    assert!(out[0].abs() <= eps, "{}", out[0]);
}

#[test]
fn lattice_error_matches_direct_quadrature() {
    let net = build_burg_sdon(3e-2, 1.5).unwrap();
    let lattice = net.lattice(PROFILE_LATTICE).unwrap();
    for xi in [0.3, 2.0, 5.9] {
        let k = 100_000;
        let ys: Vec<f64> = (0..k).map(|i| (i as f64 + 0.5) * TAU / k as f64).collect();
        let out = net.model.forward(&net.grid, &net.input(xi), &ys).unwrap();
        let direct: f64 =
            ys.iter().zip(&out).map(|(y, o)| (o - burgers_exact_at(*y, xi, 1.5)).abs()).sum::<f64>() * TAU / k as f64;
        let fast = net.l1_error(xi, &lattice).unwrap();
        assert!((direct - fast).abs() < 1e-3 * 3e-2 + 4.0 * TAU / PROFILE_LATTICE as f64, "{direct} vs {fast}");
    }
}

#[test]
fn sdon_error_decreases_when_eps_halves() {
    let xi = phase_draws(256, 3);
    let errs: Vec<f64> = [1e-2, 5e-3]
        .iter()
        .map(|&eps| {
            let net = build_burg_sdon(eps, 1.5).unwrap();
            let lat = net.lattice(PROFILE_LATTICE).unwrap();
            stats::mean(&xi.iter().map(|&x| net.l1_error(x, &lat).unwrap()).collect::<Vec<_>>())
        })
        .collect();
    assert!(errs[1] < errs[0], "{errs:?}");
    assert!(errs[0] <= 1e-2, "{errs:?}");
}

#[test]
fn pre_shock_times_are_flagged() {
    let net = build_burg_sdon(0.1, 0.8).unwrap();
    assert!(net.warnings.iter().any(|w| w.contains(PRE_SHOCK_WARNING)));
    assert!(build_burg_fno(0.1, 0.9, 8).unwrap().warnings.iter().any(|w| w.contains(PRE_SHOCK_WARNING)));
    assert!(matches!(build_burg_sdon(0.1, 0.0), Err(ConstructionError::Precondition(_))));
    // at t = 1 the profile has a cube-root cusp and no analytic fit meets the tolerance
    assert!(matches!(build_burg_sdon(0.1, 1.0), Err(ConstructionError::Net(_))));
    assert!(build_burg_sdon(0.0, 1.5).is_err());
}

#[test]
fn fno_needs_three_nodes() {
    assert!(matches!(build_burg_fno(0.1, 1.5, 2), Err(ConstructionError::Precondition(m)) if m.contains("N < 3")));
    assert!(matches!(build_burg_fno_phase(2), Err(ConstructionError::Precondition(m)) if m.contains("N < 3")));
}

#[test]
fn fno_phase_is_exact_on_the_minimal_grid() {
    for n in [3usize, 4, 5, 7, 64] {
        let model = build_burg_fno_phase(n).unwrap();
        assert_eq!(model.k_max, 1);
        let grid = Grid::new(n, TAU).unwrap();
        let mut rng = substream(4, n as u64);
        for i in 0..200 {
            let xi = if i < n { TAU * i as f64 / n as f64 } else { rng.random_range(0.0..TAU) };
            let out = model.forward(&grid, &sine_input(xi, &grid)).unwrap();
            for j in 0..n {
                assert!((out[j] - xi.cos()).abs() < 1e-10, "N {n}, ξ {xi}: cos {}", out[j]);
                assert!((out[n + j] - xi.sin()).abs() < 1e-10, "N {n}, ξ {xi}: sin {}", out[n + j]);
            }
        }
    }
}

#[test]
fn fno_output_is_the_shifted_profile() {
    let eps = 1e-2;
    let net = build_burg_fno(eps, 1.5, 64).unwrap();
    assert_eq!(net.model.k_max, 1);
    let lattice = net.lattice(PROFILE_LATTICE).unwrap();
    for xi in [0.0, 1.3, 4.0] {
        let u = net.input(xi);
        let big_xi = net.phase(&u).unwrap();
        assert!(((big_xi - xi + PI).rem_euclid(TAU) - PI).abs() < eps * eps, "{big_xi} vs {xi}");
        let out = net.predict(&u).unwrap();
        for (x, o) in net.grid.points().iter().zip(&out) {
            let direct = net.profile_net.eval(&[x - big_xi]).unwrap()[0];
            assert!((o - direct).abs() < 1e-9);
        }
        let lattice_err: f64 = net
            .grid
            .points()
            .iter()
            .zip(&out)
            .map(|(x, o)| (o - burgers_exact_at(*x, xi, 1.5)).abs())
            .sum::<f64>()
            * net.grid.dx();
        // one node may sit next to the shock
        assert!(lattice_err <= 2.0 * eps + 2.0 * net.grid.dx(), "{lattice_err}");
        assert!(net.l1_error(xi, &lattice).unwrap() <= 2.0 * eps);
    }
}

proptest! {
    #[test]
    fn any_three_distinct_nodes_determine_the_phase(a in 0.0f64..TAU, gap1 in 0.3f64..2.5, gap2 in 0.3f64..2.5, xi in 0.0f64..TAU) {
        let pts = [a, a + gap1, a + gap1 + gap2];
        let m = phase_matrix(pts).unwrap();
        let u: Vec<f64> = pts.iter().map(|x| -(x - xi).sin()).collect();
        let c: f64 = (0..3).map(|k| m[0][k] * u[k]).sum();
        let s: f64 = (0..3).map(|k| m[1][k] * u[k]).sum();
        prop_assert!((c - xi.cos()).abs() < 1e-9 && (s - xi.sin()).abs() < 1e-9);
    }
}
