use hyperop_nets::relu_lib::*;
use hyperop_nets::NetError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;

fn eval1(net: &Mlp, x: f64) -> f64 {
    net.eval(&[x]).unwrap()[0]
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn affine_identity_and_single_relu() {
    let id = Mlp::identity(3);
    assert_eq!(id.eval(&[1.5, -2.0, 0.25]).unwrap(), vec![1.5, -2.0, 0.25]);
    let relu = Mlp::one_hidden(Matrix::dense(1, 1, vec![1.0]), vec![-1.0], Matrix::identity(1), vec![0.0]).unwrap();
    assert_eq!(eval1(&relu, 3.0), 2.0);
    assert_eq!(eval1(&relu, 0.5), 0.0);
    assert!(matches!(id.eval(&[1.0]), Err(NetError::Dimension(_))));
}

#[test]
fn step_values_and_shape() {
    let s = build_step(0.0, 1.0, 0.1).unwrap();
    assert_eq!((s.depth(), s.width()), (1, 2));
    let got: Vec<f64> = [-1.0, 0.05, 1.0].iter().map(|&x| eval1(&s, x)).collect();
    assert!((got[0]).abs() < 1e-15 && (got[1] - 0.5).abs() < 1e-15 && (got[2] - 1.0).abs() < 1e-15);

    let (xi, h, d) = (0.3, -2.0, 0.05);
    let s = build_step(xi, h, d).unwrap();
    assert_eq!(eval1(&s, xi - 1.0), 0.0);
    assert!((eval1(&s, xi + d + 1.0) - h).abs() < 1e-14);
    assert!((eval1(&s, xi + d / 2.0) - h / 2.0).abs() < 1e-14);
    // L1 distance to the jump: midpoint rule is exact on each linear piece
    let n = 20000;
    let (a, b) = (-1.0, 1.0);
    let dx = (b - a) / n as f64;
    let l1: f64 = (0..n)
        .map(|i| {
            let x = a + (i as f64 + 0.5) * dx;
            let exact = if x > xi { h } else { 0.0 };
            (eval1(&s, x) - exact).abs()
        })
        .sum::<f64>()
        * dx;
    assert!((l1 - h.abs() * d / 2.0).abs() < 1e-9, "{l1}");
}

#[test]
fn indicator_shape_and_error() {
    let (a, b, d) = (0.2, 0.7, 0.05);
    let ind = build_indicator(a, b, d).unwrap();
    assert_eq!((ind.depth(), ind.width()), (1, 4));
    for x in linspace(a + d, b, 50) {
        assert!((eval1(&ind, x) - 1.0).abs() < 1e-12);
    }
    for x in [a - 0.3, a, b + d, b + 1.0] {
        assert!(eval1(&ind, x).abs() < 1e-12);
    }
    let n = 40000;
    let dx = 2.0 / n as f64;
    let l1: f64 = (0..n)
        .map(|i| {
            let x = -0.5 + (i as f64 + 0.5) * dx;
            let exact = if (a..=b).contains(&x) { 1.0 } else { 0.0 };
            (eval1(&ind, x) - exact).abs()
        })
        .sum::<f64>()
        * dx;
    assert!((l1 - d).abs() < 1e-9, "{l1}");
    assert!(build_indicator(0.0, 0.1, 0.2).is_err());
}

#[test]
fn partition_of_unity() {
    let (a, b) = (-1.0, 2.0);
    for j in [1usize, 3, 5, 16] {
        let eps = (b - a) / j as f64 / 4.0;
        let p = build_partition(a, b, j, eps).unwrap();
        assert_eq!((p.depth(), p.width(), p.out_dim()), (1, 4 * j, j));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(j as u64);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.random_range(a..=b)).collect();
        let out = p.eval_batch(&xs, xs.len()).unwrap();
        for (i, _) in xs.iter().enumerate() {
            let total: f64 = (0..j).map(|k| out[k * xs.len() + i]).sum();
            assert!((total - 1.0).abs() < 1e-12);
            // ramps cancel on their plateaus up to one rounding
            let low = (0..j).map(|k| out[k * xs.len() + i]).fold(f64::MAX, f64::min);
            assert!(low >= -1e-14, "{low} at {}", xs[i]);
        }
        let dx = (b - a) / j as f64;
        for k in 0..j {
            let lo = a + k as f64 * dx - eps;
            let hi = a + (k + 1) as f64 * dx + eps;
            for x in linspace(a - 1.0, b + 1.0, 3001) {
                if x < lo - 1e-12 || x > hi + 1e-12 {
                    assert!(p.eval(&[x]).unwrap()[k].abs() < 1e-14, "member {k} at {x}");
                }
            }
        }
    }
    // J = 5 on [0, 1]: each member is a plateau of height 1 between ramps
    let p = build_partition(0.0, 1.0, 5, 0.05).unwrap();
    for k in 0..5 {
        let centre = 0.1 + 0.2 * k as f64;
        assert!((p.eval(&[centre]).unwrap()[k] - 1.0).abs() < 1e-14);
        assert!((p.eval(&[0.2 * k as f64 + 0.2]).unwrap()[k] - if k == 4 { 1.0 } else { 0.5 }).abs() < 1e-12);
    }
    assert!(build_partition(0.0, 1.0, 4, 0.2).is_err());
}

fn grid_sup_error(net: &Mlp, m: f64, n: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    let pts = linspace(-m, m, n);
    let mut xs = Vec::with_capacity(2 * n * n);
    let mut ys = Vec::with_capacity(n * n);
    for &x in &pts {
        for &y in &pts {
            ys.push((x, y));
        }
    }
    xs.extend(ys.iter().map(|p| p.0));
    xs.extend(ys.iter().map(|p| p.1));
    let out = net.eval_batch(&xs, ys.len()).unwrap();
    ys.iter().zip(&out).map(|(&(x, y), z)| (z - f(x, y)).abs()).fold(0.0, f64::max)
}

#[test]
fn multiply_meets_target_on_grid() {
    let (m, eps) = (2.0, 1e-3);
    let net = build_multiply(m, eps).unwrap();
    let err = grid_sup_error(&net, m, 201, |x, y| x * y);
    assert!(err <= eps, "sup error {err}");
    assert_eq!(net.depth(), multiply_levels(m, eps) + 1);
    assert_eq!(net.width(), 6);
    // a zero factor cancels up to rounding
    for y in linspace(-m, m, 101) {
        assert!(net.eval(&[0.0, y]).unwrap()[0].abs() < 1e-14);
        assert!(net.eval(&[y, 0.0]).unwrap()[0].abs() < 1e-14);
    }
    assert!((net.eval(&[m, m]).unwrap()[0] - m * m).abs() <= eps);
}

#[test]
fn multiply_error_halves_per_level() {
    let m = 3.0;
    let errs: Vec<f64> =
        (0..8).map(|s| grid_sup_error(&build_multiply_levels(m, s).unwrap(), m, 121, |x, y| x * y)).collect();
    for w in errs.windows(2) {
        assert!(w[1] <= 0.5 * w[0] + 1e-15, "{errs:?}");
    }
}

#[test]
fn divide_meets_target_on_grid() {
    let (a, b, eps) = (0.5, 2.0, 1e-4);
    let net = build_divide(a, b, eps).unwrap();
    let pts = linspace(a, b, 201);
    let mut xs = Vec::new();
    let mut pairs = Vec::new();
    for &x in &pts {
        for &y in &pts {
            pairs.push((x, y));
        }
    }
    xs.extend(pairs.iter().map(|p| p.0));
    xs.extend(pairs.iter().map(|p| p.1));
    let out = net.eval_batch(&xs, pairs.len()).unwrap();
    let err = pairs.iter().zip(&out).map(|(&(x, y), z)| (z - x / y).abs()).fold(0.0, f64::max);
    assert!(err <= eps, "sup error {err}");
    assert!((net.eval(&[1.3, 1.3]).unwrap()[0] - 1.0).abs() <= eps);
}

#[test]
fn maxpool_shapes() {
    let two = build_maxpool(2).unwrap();
    assert_eq!(two.eval(&[3.0, 5.0]).unwrap()[0], 5.0);
    assert_eq!(two.eval(&[-1.0, -2.0]).unwrap()[0], -1.0);
    let one = build_maxpool(1).unwrap();
    assert_eq!(one.eval(&[-4.25]).unwrap()[0], -4.25);
    assert_eq!(one.depth(), 0);
    for k in [2usize, 3, 7, 8, 33] {
        let net = build_maxpool(k).unwrap();
        assert_eq!(net.depth(), (k as f64).log2().ceil() as usize);
        assert!(net.width() <= 3 * k);
    }
}

#[test]
fn maxpool_is_exact_on_dyadic_inputs() {
    // inputs on a dyadic lattice keep every intermediate sum representable
    let net = build_maxpool(7).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let trials = 10_000;
    let mut xs = vec![0.0; 7 * trials];
    for t in 0..trials {
        for i in 0..7 {
            xs[i * trials + t] = rng.random_range(-(1i64 << 20)..(1i64 << 20)) as f64 / 1024.0;
        }
    }
    let out = net.eval_batch(&xs, trials).unwrap();
    for t in 0..trials {
        let truth = (0..7).map(|i| xs[i * trials + t]).fold(f64::MIN, f64::max);
        assert_eq!(out[t], truth);
    }
}

#[test]
fn compile_identity_is_exact() {
    let (net, rep) = compile_analytic(&|x| x, [-3.0, 3.0], 1e-12, CompileStrategy::Chebyshev).unwrap();
    assert_eq!(rep.depth, 0);
    for x in linspace(-3.0, 3.0, 77) {
        assert_eq!(eval1(&net, x), x);
    }
}

#[test]
fn compile_sine_to_one_in_a_million() {
    let eps = 1e-6;
    let (net, rep) = compile_analytic(&f64::sin, [0.0, 2.0 * PI], eps, CompileStrategy::Chebyshev).unwrap();
    assert!(rep.degrees.iter().all(|&d| d <= 20), "{:?}", rep.degrees);
    assert_eq!(rep.subintervals, 4);
    let xs = linspace(0.0, 2.0 * PI, 1000);
    let ys = net.eval_batch(&xs, xs.len()).unwrap();
    let err = xs.iter().zip(&ys).map(|(x, y)| (x.sin() - y).abs()).fold(0.0, f64::max);
    assert!(err <= eps, "{err}");
    assert_eq!(rep.sup_error, err);
    assert_eq!((rep.depth, rep.width), (net.depth(), net.width()));
}

#[test]
fn compile_reciprocal_and_piecewise_linear() {
    let eps = 1e-4;
    for strategy in [CompileStrategy::Chebyshev, CompileStrategy::PiecewiseLinear] {
        let (net, rep) = compile_analytic(&|x| 1.0 / x, [0.5, 2.0], eps, strategy).unwrap();
        let xs = linspace(0.5, 2.0, 1000);
        let ys = net.eval_batch(&xs, xs.len()).unwrap();
        let err = xs.iter().zip(&ys).map(|(x, y)| (1.0 / x - y).abs()).fold(0.0, f64::max);
        assert!(err <= eps, "{strategy:?}: {err}");
        if strategy == CompileStrategy::PiecewiseLinear {
            assert_eq!(rep.depth, 1);
        }
        // inputs beyond the interval are clamped
        assert!((eval1(&net, 5.0) - 0.5).abs() <= eps);
    }
}

#[test]
fn compile_rejects_non_finite_values() {
    let r = compile_analytic(&|x| 1.0 / x, [-1.0, 1.0], 1e-3, CompileStrategy::Chebyshev);
    assert!(matches!(r, Err(NetError::NonFinite(_))) || matches!(r, Err(NetError::Tolerance { .. })));
    let r = compile_analytic(&|x| x.ln(), [-1.0, 1.0], 1e-3, CompileStrategy::PiecewiseLinear);
    assert!(matches!(r, Err(NetError::NonFinite(_))));
}

#[test]
fn angle_recovery_sweep() {
    let eps = 1e-3;
    let net = build_angle_recovery(eps).unwrap();
    let n = 10_000;
    let thetas = linspace(0.0, 2.0 * PI - eps, n);
    let mut xs: Vec<f64> = thetas.iter().map(|t| t.cos()).collect();
    xs.extend(thetas.iter().map(|t| t.sin()));
    let out = net.eval_batch(&xs, n).unwrap();
    let err = thetas.iter().zip(&out).map(|(t, y)| (t - y).abs()).fold(0.0, f64::max);
    assert!(err <= eps, "sweep error {err}");
    assert!((net.eval(&[-1.0, 0.0]).unwrap()[0] - PI).abs() <= eps);
    assert!(net.eval(&[1.0, 0.0]).unwrap()[0].abs() <= eps);
    // output stays in [0, 2π] in the wrap-around gap
    for t in linspace(2.0 * PI - eps, 2.0 * PI, 50) {
        let y = net.eval(&[t.cos(), t.sin()]).unwrap()[0];
        assert!((0.0..=2.0 * PI).contains(&y));
    }
}

#[test]
fn size_accounting() {
    let net = Mlp::new(vec![
        Layer::new(Matrix::zeros(8, 4), vec![0.0; 8], true),
        Layer::new(Matrix::zeros(8, 8), vec![0.0; 8], true),
        Layer::new(Matrix::zeros(8, 8), vec![0.0; 8], true),
        Layer::new(Matrix::zeros(2, 8), vec![0.0; 2], false),
    ])
    .unwrap();
    assert_eq!(account_size(&net), NetSize { depth: 3, width: 8, size: 240 });
    let affine = Mlp::affine(Matrix::zeros(3, 5), vec![0.0; 3]);
    assert_eq!(account_size(&affine).size, 18);
}

#[test]
fn serialisation_round_trips_bit_exactly() {
    let net = build_angle_recovery(1e-2).unwrap();
    let json = net.to_json().unwrap();
    let back = Mlp::from_json(&json).unwrap();
    assert_eq!(back, net);
    let mut blob = Vec::new();
    net.write_blob(&mut blob).unwrap();
    let back = Mlp::read_blob(&blob[..]).unwrap();
    for (a, b) in back.params().iter().zip(net.params()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(back, net);
    blob[0] = b'X';
    assert!(matches!(Mlp::read_blob(&blob[..]), Err(NetError::Format(_))));
}

fn random_net(seed: u64, n_in: usize, n_out: usize, depth: usize) -> Mlp {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut prev = n_in;
    for l in 0..=depth {
        let rows = if l == depth { n_out } else { rng.random_range(1..6) };
        let w: Vec<f64> = (0..rows * prev).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = if l % 2 == 0 { Matrix::dense(rows, prev, w) } else { Matrix::dense(rows, prev, w).to_sparse() };
        layers.push(Layer::new(m, b, l < depth));
        prev = rows;
    }
    Mlp::new(layers).unwrap()
}

proptest! {
    #[test]
    fn composition_rules_match_pointwise_evaluation(
        seed in any::<u64>(), d1 in 0usize..4, d2 in 0usize..4, x in prop::array::uniform2(-2.0..2.0f64)
    ) {
        let f = random_net(seed, 2, 3, d1);
        let g = random_net(seed ^ 1, 3, 2, d2);
        let h = random_net(seed ^ 2, 2, 1, d2);
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(p, q)| (p - q).abs() < 1e-10);

        let fx = f.eval(&x).unwrap();
        prop_assert!(close(&f.then(&g).unwrap().eval(&x).unwrap(), &g.eval(&fx).unwrap()));
        prop_assert_eq!(f.then(&g).unwrap().depth(), d1 + d2);

        let par = Mlp::parallel(&[&f, &h]).unwrap();
        let mut want = fx.clone();
        want.extend(h.eval(&x).unwrap());
        prop_assert!(close(&par.eval(&x).unwrap(), &want));
        prop_assert_eq!(par.depth(), d1.max(d2));

        let st = Mlp::stack(&[&f, &g]).unwrap();
        let mut input = x.to_vec();
        input.extend([0.3, -0.7, 1.1]);
        let mut want = fx.clone();
        want.extend(g.eval(&[0.3, -0.7, 1.1]).unwrap());
        prop_assert!(close(&st.eval(&input).unwrap(), &want));

        let padded = f.pad_to_depth(d1 + 2);
        prop_assert_eq!(padded.depth(), d1 + 2);
        prop_assert!(close(&padded.eval(&x).unwrap(), &fx));
    }

    #[test]
    fn batched_and_single_evaluation_agree(seed in any::<u64>(), depth in 0usize..4) {
        let f = random_net(seed, 3, 2, depth);
        let pts: Vec<[f64; 3]> = (0..5).map(|i| [i as f64 * 0.3 - 0.6, 0.1 * i as f64, -0.2]).collect();
        let mut xs = vec![0.0; 15];
        for (b, p) in pts.iter().enumerate() {
            for i in 0..3 {
                xs[i * 5 + b] = p[i];
            }
        }
        let out = f.eval_batch(&xs, 5).unwrap();
        for (b, p) in pts.iter().enumerate() {
            let single = f.eval(p).unwrap();
            for o in 0..2 {
                prop_assert!((single[o] - out[o * 5 + b]).abs() < 1e-12);
            }
        }
    }
}
