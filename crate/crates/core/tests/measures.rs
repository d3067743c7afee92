use hyperop_core::exact_pde::GAMMA;
use hyperop_core::grid::{dft_values, Grid};
use hyperop_core::measures::*;
use proptest::prelude::*;

fn desk_box_request(n_samples: usize, seed: u64) -> DatasetRequest {
    DatasetRequest {
        measure: MeasureSpec::desk_box(),
        n_samples,
        grid_n: 64,
        seed,
        first_index: 0,
        solver: SolverSettings::desk_advection(),
    }
}

#[test]
fn same_seed_gives_identical_datasets() {
    let a = generate_dataset(&desk_box_request(20, 9)).unwrap();
    let b = generate_dataset(&desk_box_request(20, 9)).unwrap();
    assert_eq!(a, b);
    let c = generate_dataset(&desk_box_request(20, 10)).unwrap();
    assert_ne!(a.inputs, c.inputs);
}

#[test]
fn substreams_do_not_depend_on_batch_layout() {
    let whole = generate_dataset(&desk_box_request(10, 3)).unwrap();
    let mut req = desk_box_request(4, 3);
    req.first_index = 6;
    let tail = generate_dataset(&req).unwrap();
    assert_eq!(&whole.inputs[6..], &tail.inputs[..]);
}

#[test]
fn dataset_round_trip_is_bit_exact() {
    let ds = generate_dataset(&DatasetRequest {
        measure: MeasureSpec::desk_grf(),
        n_samples: 5,
        grid_n: 32,
        seed: 1,
        first_index: 0,
        solver: SolverSettings::desk_burgers_grf(),
    })
    .unwrap();
    let mut bytes = Vec::new();
    write_dataset(&ds, &mut bytes).unwrap();
    let back = read_dataset(&bytes[..]).unwrap();
    for (a, b) in ds.inputs.iter().flatten().zip(back.inputs.iter().flatten()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    for (a, b) in ds.outputs.iter().flatten().zip(back.outputs.iter().flatten()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(ds.manifest, back.manifest);
    assert_eq!(&bytes[..4], b"DPL1");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.bin");
    save_dataset(&ds, &path).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), back);
}

#[test]
fn corrupted_header_is_rejected() {
    let ds = generate_dataset(&desk_box_request(2, 0)).unwrap();
    let mut bytes = Vec::new();
    write_dataset(&ds, &mut bytes).unwrap();
    bytes[0] = b'X';
    assert!(matches!(read_dataset(&bytes[..]), Err(DatasetError::BadMagic)));
    let mut short = Vec::new();
    write_dataset(&ds, &mut short).unwrap();
    short.truncate(40);
    assert!(matches!(read_dataset(&short[..]), Err(DatasetError::Io(_))));
}

#[test]
fn grf_marginal_variance_and_covariance() {
    let n = 1024;
    let grid = Grid::new(n, 1.0).unwrap();
    let ell = 0.06;
    let sampler = GrfSampler::new(ell, grid).unwrap();
    let lag = 16;
    let (mut var, mut cov) = (0.0, 0.0);
    let m = 400usize;
    for i in 0..m {
        let f = sampler.sample(&mut substream(17, i as u64));
        for j in 0..n {
            var += f.values[j] * f.values[j];
            cov += f.values[j] * f.values[(j + lag) % n];
        }
    }
    var /= (m * n) as f64;
    cov /= (m * n) as f64;
    // periodised kernel by direct image sum
    let kernel = |d: f64| -> f64 {
        (-20..=20).map(|k| {
            let z = d + k as f64;
            (-z * z / (2.0 * ell * ell)).exp()
        }).sum()
    };
    let expected_cov = kernel(lag as f64 / n as f64) / kernel(0.0);
    assert!((var - 1.0).abs() < 0.05, "variance {var}");
    assert!((cov - expected_cov).abs() / expected_cov < 0.05, "covariance {cov} vs {expected_cov}");
}

#[test]
fn long_correlation_collapses_to_constants() {
    let grid = Grid::new(256, 1.0).unwrap();
    let sampler = GrfSampler::new(1e3, grid).unwrap();
    let mut power = 0.0;
    for i in 0..50 {
        let f = sampler.sample(&mut substream(5, i));
        let s = dft_values(&f.values);
        power += s.coeffs.iter().skip(1).map(|c| c.norm_sqr()).sum::<f64>();
    }
    assert!(power / 50.0 < 1e-8, "non-constant power {power}");
}

#[test]
fn grf_needs_power_of_two() {
    let grid = Grid::new(100, 1.0).unwrap();
    assert!(matches!(GrfSampler::new(0.06, grid), Err(MeasureError::Invalid(_))));
}

#[test]
fn grf_dataset_conserves_mass() {
    let ds = generate_dataset(&DatasetRequest {
        measure: MeasureSpec::desk_grf(),
        n_samples: 3,
        grid_n: 64,
        seed: 4,
        first_index: 0,
        solver: SolverSettings::desk_burgers_grf(),
    })
    .unwrap();
    let sampler = GrfSampler::new(0.06, Grid::new(256, 1.0).unwrap()).unwrap();
    for (i, out) in ds.outputs.iter().enumerate() {
        let fine = sampler.sample(&mut substream(4, i as u64));
        let m0 = fine.values.iter().sum::<f64>() / 256.0;
        let m1 = out.iter().sum::<f64>() / 64.0;
        assert!((m0 - m1).abs() < 1e-12);
    }
    assert_eq!(ds.manifest.notes.normalisation, "zero mean, unit marginal variance");
}

#[test]
fn shock_tube_dataset_has_three_channels() {
    let ds = generate_dataset(&DatasetRequest {
        measure: MeasureSpec::shock_tube(),
        n_samples: 2,
        grid_n: 128,
        seed: 2,
        first_index: 0,
        solver: SolverSettings::shock_tube(),
    })
    .unwrap();
    assert_eq!(ds.n_input_channels, 3);
    assert_eq!(ds.inputs[0].len(), 3 * 128);
    let g = ds.grid;
    assert!((g.point(0) + 5.0 - 0.5 * g.dx()).abs() < 1e-12);
}

proptest! {
    #[test]
    fn box_draws_stay_in_range(seed in any::<u64>(), idx in any::<u64>()) {
        let spec = MeasureSpec::desk_box();
        let p = sample_box(&spec, &mut substream(seed, idx)).unwrap();
        prop_assert!((0.2..=0.8).contains(&p.h));
        prop_assert!((0.05..=0.3).contains(&p.w));
        prop_assert!((0.0..=0.5).contains(&p.xi));
    }

    #[test]
    fn shock_tube_energy_identity(z in prop::array::uniform6(0.0..=1.0f64)) {
        let p = shocktube_from_z(&z);
        for s in [p.left, p.right] {
            let u = s.velocity();
            let e = 0.5 * s.rho * u * u + s.pressure() / (GAMMA - 1.0);
            prop_assert!((e - s.e).abs() < 1e-12);
            prop_assert!(s.rho > 0.0 && s.pressure() > 0.0);
        }
        prop_assert_eq!(p.right.m, 0.0);
    }
}
