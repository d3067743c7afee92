use hyperop_constructions::mc::{abs_linear_integral, par_map, periodic_overlap};
use hyperop_constructions::report::box_draws;
use hyperop_constructions::*;
use hyperop_core::exact_pde::{box_value, BoxWaveParams};
use hyperop_core::stats;
use hyperop_nets::operator_nets::Trunk;
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

fn mean_error(f: impl Fn(&BoxWaveParams) -> f64, n: usize, seed: u64) -> f64 {
    let draws = box_draws(n, seed).unwrap();
    stats::mean(&draws.iter().map(f).collect::<Vec<_>>())
}

#[test]
fn sdon_has_six_terms_and_exact_height() {
    let net = build_adv_sdon(1e-3, 256).unwrap();
    assert_eq!(net.model.p(), 6);
    assert!(matches!(&net.model.trunk, Trunk::PerTerm(t) if t.len() == 6));
    assert_eq!(net.operator_model().size().p, Some(6));
    for p in box_draws(512, 3).unwrap() {
        let u = net.input(&p);
        assert_eq!(net.height(&u).unwrap(), p.h, "{p:?}");
        let [beta, _, _] = net.model.coefficients(&net.grid, &u).unwrap();
        assert_eq!(beta, vec![p.h, p.h, p.h, -p.h, -p.h, -p.h]);
    }
}

#[test]
fn sdon_width_within_grid_spacing() {
    for (m, eps) in [(128, 1e-2), (512, 1e-3)] {
        let net = build_adv_sdon(eps, m).unwrap();
        for p in box_draws(512, 4).unwrap() {
            let (w, _) = net.width_and_centre(&net.input(&p)).unwrap();
            assert!((w - p.w).abs() <= TAU / m as f64 + eps, "m {m}: w {} vs {w}", p.w);
        }
    }
}

#[test]
fn sdon_centre_within_half_a_cell() {
    let m = 512;
    let net = build_adv_sdon(1e-3, m).unwrap();
    for p in box_draws(256, 5).unwrap() {
        // away from the angle net's wrap-around at 0
        if p.xi < 0.05 || p.xi > TAU - 0.05 {
            continue;
        }
        let (_, c) = net.width_and_centre(&net.input(&p)).unwrap();
        let d = (c - p.xi + PI).rem_euclid(TAU) - PI;
        assert!(d.abs() <= 0.5 * TAU / m as f64 + 1e-3, "{p:?}: centre {c}");
    }
}

#[test]
fn sdon_exact_error_matches_quadrature() {
    let net = build_adv_sdon(1e-2, 128).unwrap();
    for p in box_draws(4, 6).unwrap() {
        let u = net.input(&p);
        let k = 200_000;
        let ys: Vec<f64> = (0..k).map(|i| (i as f64 + 0.5) * TAU / k as f64).collect();
        let out = net.model.forward(&net.grid, &u, &ys).unwrap();
        let sol = net.setup.solution(&p);
        let quad: f64 = ys.iter().zip(&out).map(|(y, o)| (o - box_value(&sol, *y, TAU)).abs()).sum::<f64>() * TAU / k as f64;
        let exact = net.l1_error(&p).unwrap();
        assert!((quad - exact).abs() < 1e-4, "{quad} vs {exact}");
    }
}

#[test]
fn sdon_error_halves_with_twice_the_sensors() {
    let n256 = build_adv_sdon(1e-4, 256).unwrap();
    let n512 = build_adv_sdon(1e-4, 512).unwrap();
    let a = mean_error(|p| n256.l1_error(p).unwrap(), 512, 7);
    let b = mean_error(|p| n512.l1_error(p).unwrap(), 512, 7);
    let ratio = a / b;
    assert!((1.5..=2.5).contains(&ratio), "{a} / {b} = {ratio}");
}

#[test]
fn sdon_preconditions() {
    // 0.1π · 39 < 4π ≤ 0.1π · 40
    assert!(matches!(build_adv_sdon(0.1, 39), Err(ConstructionError::Precondition(m)) if m.contains("insufficient sensors")));
    assert!(build_adv_sdon(0.1, 40).is_ok());
    assert!(build_adv_sdon(0.0, 128).is_err());
    assert!(build_adv_sdon(0.6, 128).is_err());
}

#[test]
fn fno_has_one_mode_and_four_channels() {
    let net = build_adv_fno(64).unwrap();
    let size = net.operator_model().size();
    assert_eq!((size.k_max, size.d_v), (Some(1), Some(4)));
    assert_eq!(net.model.layers.len(), 1);
}

#[test]
fn fno_phase_channel_error_is_order_one_over_n() {
    for n in [64, 100, 256] {
        let net = build_adv_fno(n).unwrap();
        let mut worst: f64 = 0.0;
        for p in box_draws(128, 8).unwrap() {
            let c = net.phase_channel(&net.input(&p)).unwrap();
            for (x, v) in net.grid.points().iter().zip(&c) {
                let target = (0.5 * p.w).sin() * (x - p.xi - net.setup.shift).cos();
                worst = worst.max((v - target).abs());
            }
        }
        // half a cell from the width and half a cell from the centre
        assert!(worst * n as f64 <= TAU, "N = {n}: sup error {worst}");
    }
}

#[test]
fn fno_classifies_nodes_away_from_the_edges() {
    for n in [64, 100, 333] {
        let net = build_adv_fno(n).unwrap();
        let dx = net.grid.dx();
        for p in box_draws(128, 9).unwrap() {
            let out = net.predict(&net.input(&p)).unwrap();
            let sol = net.setup.solution(&p);
            for (x, o) in net.grid.points().iter().zip(&out) {
                let d = hyperop_core::exact_pde::wrap_centered(x - sol.xi, TAU).abs() - 0.5 * sol.w;
                if d.abs() > 2.0 * dx {
                    let truth = box_value(&sol, *x, TAU);
                    assert!((o - truth).abs() < 1e-3, "N {n}, x {x}: {o} vs {truth}");
                }
            }
        }
    }
}

#[test]
fn fno_error_times_n_stays_bounded() {
    let scaled: Vec<f64> = [64usize, 128, 256]
        .iter()
        .map(|&n| {
            let net = build_adv_fno(n).unwrap();
            n as f64 * mean_error(|p| net.l1_error(p).unwrap(), 256, 10)
        })
        .collect();
    let (lo, hi) = scaled.iter().fold((f64::MAX, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(hi / lo <= 4.0, "{scaled:?}");
}

#[test]
fn fno_full_period_transport_returns_the_initial_box() {
    let n = 128;
    let still = build_adv_fno_with(&AdvectionSetup { shift: 0.0, ..Default::default() }, n).unwrap();
    let around = build_adv_fno_with(&AdvectionSetup { shift: TAU, ..Default::default() }, n).unwrap();
    let moving = build_adv_fno(n).unwrap();
    let bound = 2.0 * n as f64 * mean_error(|p| moving.l1_error(p).unwrap(), 128, 11);
    for net in [&still, &around] {
        let e = mean_error(|p| net.l1_error(p).unwrap(), 128, 11);
        assert!(e * n as f64 <= bound, "{e}");
    }
    for p in box_draws(16, 12).unwrap() {
        let a = still.predict(&still.input(&p)).unwrap();
        let b = around.predict(&around.input(&p)).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));
    }
}

#[test]
fn fno_preconditions() {
    assert!(matches!(build_adv_fno(3), Err(ConstructionError::Precondition(_))));
    // 2π/16 > 0.1π
    assert!(matches!(build_adv_fno(16), Err(ConstructionError::Precondition(m)) if m.contains("minimal width")));
    assert!(build_adv_fno(20).is_ok());
}

#[test]
fn par_map_keeps_index_order() {
    let a: Vec<usize> = par_map(37, 4, |i| Ok::<_, ()>(i * i)).unwrap();
    assert_eq!(a, (0..37).map(|i| i * i).collect::<Vec<_>>());
    assert_eq!(par_map(3, 1, |i| if i == 1 { Err(i) } else { Ok(i) }), Err(1));
}

proptest! {
    #[test]
    fn periodic_overlap_matches_sampling(a in -10.0f64..10.0, len in 0.0f64..6.0, lo in -10.0f64..10.0, span in 0.0f64..6.0) {
        let b = a + len;
        let hi = lo + span;
        let k = 20_000;
        let hits = (0..k)
            .filter(|i| {
                let x = lo + (*i as f64 + 0.5) * span / k as f64;
                let r = (x - a).rem_euclid(TAU);
                r <= len
            })
            .count();
        let sampled = hits as f64 * span / k as f64;
        prop_assert!((periodic_overlap(a, b, lo, hi) - sampled).abs() <= 2.0 * span / k as f64 + 1e-12);
    }

    #[test]
    fn abs_linear_integral_matches_sampling(pa in -3.0f64..3.0, pb in -3.0f64..3.0, c in -3.0f64..3.0) {
        let k = 20_000;
        let s: f64 = (0..k).map(|i| {
            let t = (i as f64 + 0.5) / k as f64;
            (pa + t * (pb - pa) - c).abs()
        }).sum::<f64>() / k as f64;
        prop_assert!((abs_linear_integral(pa, pb, c, 1.0) - s).abs() < 1e-6);
    }
}
