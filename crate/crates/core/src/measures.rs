//! Input measures, reproducible sampling, dataset generation and the binary
//! dataset format.

use crate::exact_pde::{
    advect_exact, box_value, burgers_exact, burgers_fvm, euler_fvm, Boundary, BoxWaveParams,
    EulerField, EulerState1D, PdeError,
};
use crate::grid::{fft_radix2, Grid, GridError, GridFunction};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("invalid measure: {0}")]
    Invalid(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Pde(#[from] PdeError),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a dataset file (bad magic)")]
    BadMagic,
    #[error("unsupported dataset version {0}")]
    UnsupportedVersion(u32),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
}

/// Closed interval `[lo, hi]` for a uniform draw.
pub type Range = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// `h·1[-w/2, w/2](x - ξ)` with independent uniform `h`, `w`, `ξ`.
    BoxWave { h: Range, w: Range, xi: Range, period: f64 },
    /// `-sin(x - ξ)` on `[0, 2π)` with uniform `ξ`.
    ShiftedSine { xi: Range },
    /// Zero-mean periodic Gaussian field with squared-exponential kernel,
    /// normalised to unit marginal variance.
    PeriodicGrf { length_scale: f64, period: f64 },
    /// Two-state Euler Riemann data on `[-5, 5]` driven by `z ∈ Π ranges`.
    ShockTube { z: [Range; 6] },
}

impl MeasureSpec {
    /// Box waves on `[0, 1]` as used for the desk advection runs.
    pub fn desk_box() -> Self {
        MeasureSpec::BoxWave { h: [0.2, 0.8], w: [0.05, 0.3], xi: [0.0, 0.5], period: 1.0 }
    }

    pub fn desk_grf() -> Self {
        MeasureSpec::PeriodicGrf { length_scale: 0.06, period: 1.0 }
    }

    pub fn shock_tube() -> Self {
        MeasureSpec::ShockTube { z: [[0.0, 1.0]; 6] }
    }

    pub fn shifted_sine() -> Self {
        MeasureSpec::ShiftedSine { xi: [0.0, 2.0 * PI] }
    }

    pub fn n_input_channels(&self) -> usize {
        match self {
            MeasureSpec::ShockTube { .. } => 3,
            _ => 1,
        }
    }

    /// Grid carrying samples of this measure.
    pub fn grid(&self, n: usize) -> Result<Grid, GridError> {
        match self {
            MeasureSpec::BoxWave { period, .. } | MeasureSpec::PeriodicGrf { period, .. } => {
                Grid::new(n, *period)
            }
            MeasureSpec::ShiftedSine { .. } => Grid::periodic(n),
            MeasureSpec::ShockTube { .. } => {
                let g = Grid::new(n, SHOCK_TUBE_LENGTH)?;
                let dx = g.dx();
                Ok(g.with_origin(-0.5 * SHOCK_TUBE_LENGTH + 0.5 * dx))
            }
        }
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        let check = |name: &str, r: &Range| {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                Err(MeasureError::Invalid(format!("{name} range {r:?}")))
            } else {
                Ok(())
            }
        };
        match self {
            MeasureSpec::BoxWave { h, w, xi, period } => {
                check("h", h)?;
                check("w", w)?;
                check("xi", xi)?;
                if !(*period > 0.0) || w[0] < 0.0 || w[1] > *period {
                    return Err(MeasureError::Invalid(format!("w {w:?} on period {period}")));
                }
                Ok(())
            }
            MeasureSpec::ShiftedSine { xi } => check("xi", xi),
            MeasureSpec::PeriodicGrf { length_scale, period } => {
                if !(*length_scale > 0.0 && *period > 0.0) {
                    return Err(MeasureError::Invalid("length scale and period must be positive".into()));
                }
                Ok(())
            }
            MeasureSpec::ShockTube { z } => {
                for r in z {
                    check("z", r)?;
                    if r[0] < 0.0 || r[1] > 1.0 {
                        return Err(MeasureError::Invalid(format!("z range {r:?} outside [0, 1]")));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Domain length for the shock-tube measure.
pub const SHOCK_TUBE_LENGTH: f64 = 10.0;

/// Solver settings attached to a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    pub final_time: f64,
    /// Advection speed (box waves only).
    #[serde(default)]
    pub speed: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Finite-volume runs use `refinement × n` cells and are averaged down.
    #[serde(default = "default_refinement")]
    pub refinement: usize,
}

fn default_cfl() -> f64 {
    0.45
}

fn default_refinement() -> usize {
    1
}

impl SolverSettings {
    pub fn desk_advection() -> Self {
        Self { final_time: 0.25, speed: 0.5, cfl: 0.45, refinement: 1 }
    }

    pub fn desk_burgers_grf() -> Self {
        Self { final_time: 0.1, speed: 0.0, cfl: 0.45, refinement: 4 }
    }

    pub fn shock_tube() -> Self {
        Self { final_time: 1.5, speed: 0.0, cfl: 0.45, refinement: 1 }
    }
}

/// Independent generator for sample `index`: ChaCha8 keyed by `seed`, with the
/// sample index selecting the stream.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn uniform(rng: &mut impl Rng, r: &Range) -> f64 {
    r[0] + (r[1] - r[0]) * rng.random::<f64>()
}

pub fn sample_box(spec: &MeasureSpec, rng: &mut impl Rng) -> Result<BoxWaveParams, MeasureError> {
    match spec {
        MeasureSpec::BoxWave { h, w, xi, .. } => {
            Ok(BoxWaveParams { h: uniform(rng, h), w: uniform(rng, w), xi: uniform(rng, xi) })
        }
        other => Err(MeasureError::Invalid(format!("sample_box on {other:?}"))),
    }
}

/// Box wave evaluated on a grid.
pub fn box_on_grid(params: &BoxWaveParams, grid: &Grid) -> GridFunction {
    GridFunction::from_fn(*grid, |x| box_value(params, x, grid.period))
}

/// Spectral sampler for the periodic squared-exponential Gaussian field.
#[derive(Debug, Clone)]
pub struct GrfSampler {
    grid: Grid,
    /// `sqrt(λ_k / n)` in FFT order, already normalised to unit variance.
    amplitudes: Vec<f64>,
    /// Circulant eigenvalues after clamping, normalised.
    pub eigenvalues: Vec<f64>,
    pub clamped: usize,
    /// Largest magnitude among clamped negative eigenvalues.
    pub clamped_magnitude: f64,
}

impl GrfSampler {
    pub fn new(length_scale: f64, grid: Grid) -> Result<Self, MeasureError> {
        if !grid.n.is_power_of_two() {
            return Err(MeasureError::Invalid(format!("GRF grid size {} is not a power of two", grid.n)));
        }
        if !(length_scale > 0.0) {
            return Err(MeasureError::Invalid("length scale must be positive".into()));
        }
        let n = grid.n;
        let p = grid.period;
        // periodised kernel row c_j = Σ_m k(x_j + m p)
        let images = (12.0 * length_scale / p).ceil() as i64 + 1;
        let row: Vec<f64> = (0..n)
            .map(|j| {
                let x = grid.dx() * j as f64;
                (-images..=images)
                    .map(|m| {
                        let d = x + m as f64 * p;
                        (-d * d / (2.0 * length_scale * length_scale)).exp()
                    })
                    .sum()
            })
            .collect();
        let c0 = row[0];
        let mut data: Vec<Complex64> = row.iter().map(|&c| Complex64::new(c / c0, 0.0)).collect();
        fft_radix2(&mut data, -1.0);
        let mut clamped = 0;
        let mut clamped_magnitude: f64 = 0.0;
        let eigenvalues: Vec<f64> = data
            .iter()
            .map(|z| {
                if z.re < 0.0 {
                    clamped += 1;
                    clamped_magnitude = clamped_magnitude.max(-z.re);
                    0.0
                } else {
                    z.re
                }
            })
            .collect();
        let amplitudes = eigenvalues.iter().map(|l| (l / n as f64).sqrt()).collect();
        Ok(Self { grid, amplitudes, eigenvalues, clamped, clamped_magnitude })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn sample(&self, rng: &mut impl Rng) -> GridFunction {
        let mut data: Vec<Complex64> = self
            .amplitudes
            .iter()
            .map(|a| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(a * re, a * im)
            })
            .collect();
        fft_radix2(&mut data, 1.0);
        GridFunction { grid: self.grid, values: data.iter().map(|z| z.re).collect() }
    }
}

/// One draw from the periodic GRF on `grid`.
pub fn sample_grf(length_scale: f64, grid: Grid, rng: &mut impl Rng) -> Result<GridFunction, MeasureError> {
    Ok(GrfSampler::new(length_scale, grid)?.sample(rng))
}

/// Riemann data drawn from the shock-tube measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockTubeParams {
    pub left: EulerState1D,
    pub right: EulerState1D,
    pub x0: f64,
}

/// Map `z ∈ [0, 1]^6` to shock-tube parameters.
pub fn shocktube_from_z(z: &[f64; 6]) -> ShockTubeParams {
    let g = |v: f64| 2.0 * v - 1.0;
    let rho_l = 0.75 + 0.45 * g(z[0]);
    let rho_r = 0.4 + 0.3 * g(z[1]);
    let u_l = 0.5 + 0.5 * g(z[2]);
    let p_l = 2.5 + 1.6 * g(z[3]);
    let p_r = 0.375 + 0.325 * g(z[4]);
    let x0 = 0.5 * g(z[5]);
    ShockTubeParams {
        left: EulerState1D::from_primitive(rho_l, u_l, p_l),
        right: EulerState1D::from_primitive(rho_r, 0.0, p_r),
        x0,
    }
}

pub fn sample_shocktube(spec: &MeasureSpec, rng: &mut impl Rng) -> Result<ShockTubeParams, MeasureError> {
    match spec {
        MeasureSpec::ShockTube { z } => {
            let mut draw = [0.0; 6];
            for (d, r) in draw.iter_mut().zip(z) {
                *d = uniform(rng, r);
            }
            Ok(shocktube_from_z(&draw))
        }
        other => Err(MeasureError::Invalid(format!("sample_shocktube on {other:?}"))),
    }
}

/// Conservative average of node-centred cells from a grid refined `r` times.
pub fn average_down_centered(fine: &[f64], r: usize) -> Vec<f64> {
    let nf = fine.len();
    let n = nf / r;
    let half = r / 2;
    (0..n)
        .map(|j| {
            let centre = (j * r) as i64;
            let mut acc = 0.0;
            if r % 2 == 1 {
                for q in -(half as i64)..=(half as i64) {
                    acc += fine[(centre + q).rem_euclid(nf as i64) as usize];
                }
            } else {
                for q in -(half as i64)..=(half as i64) {
                    let wgt = if q.unsigned_abs() as usize == half { 0.5 } else { 1.0 };
                    acc += wgt * fine[(centre + q).rem_euclid(nf as i64) as usize];
                }
            }
            acc / r as f64
        })
        .collect()
}

/// Average of `r` consecutive fine cells that tile each coarse cell.
pub fn average_down_tiled(fine: &[f64], r: usize) -> Vec<f64> {
    fine.chunks(r).map(|c| c.iter().sum::<f64>() / r as f64).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationNotes {
    /// Negative kernel eigenvalues set to zero by the GRF sampler.
    #[serde(default)]
    pub clamped_eigenvalues: usize,
    #[serde(default)]
    pub clamped_magnitude: f64,
    /// Shock-tube samples whose waves reached a boundary cell.
    #[serde(default)]
    pub boundary_disturbed: usize,
    #[serde(default)]
    pub normalisation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub measure: MeasureSpec,
    pub seed: u64,
    /// Substream index of the first sample.
    #[serde(default)]
    pub first_index: u64,
    pub solver: SolverSettings,
    pub grid: Grid,
    pub n_samples: usize,
    #[serde(default)]
    pub notes: GenerationNotes,
    #[serde(default)]
    pub config_hash: Option<String>,
}

/// Input/output pairs; inputs are channel-major (`channel * n + j`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub grid: Grid,
    pub n_input_channels: usize,
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Samples `range` as a new dataset sharing the manifest.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Dataset {
        let mut manifest = self.manifest.clone();
        manifest.first_index += range.start as u64;
        manifest.n_samples = range.len();
        Dataset {
            grid: self.grid,
            n_input_channels: self.n_input_channels,
            inputs: self.inputs[range.clone()].to_vec(),
            outputs: self.outputs[range].to_vec(),
            manifest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRequest {
    pub measure: MeasureSpec,
    pub n_samples: usize,
    pub grid_n: usize,
    pub seed: u64,
    #[serde(default)]
    pub first_index: u64,
    pub solver: SolverSettings,
}

/// Draw inputs from the measure and compute the matching solution outputs.
pub fn generate_dataset(req: &DatasetRequest) -> Result<Dataset, MeasureError> {
    req.measure.validate()?;
    if req.grid_n < 2 {
        return Err(MeasureError::Invalid("grid_n must be at least 2".into()));
    }
    if req.solver.refinement == 0 {
        return Err(MeasureError::Invalid("refinement must be at least 1".into()));
    }
    let grid = req.measure.grid(req.grid_n)?;
    let mut notes = GenerationNotes::default();
    let mut inputs = Vec::with_capacity(req.n_samples);
    let mut outputs = Vec::with_capacity(req.n_samples);
    let settings = &req.solver;
    let grf = match &req.measure {
        MeasureSpec::PeriodicGrf { length_scale, period } => {
            let fine = Grid::new(req.grid_n * settings.refinement, *period)?;
            let s = GrfSampler::new(*length_scale, fine)?;
            notes.clamped_eigenvalues = s.clamped;
            notes.clamped_magnitude = s.clamped_magnitude;
            notes.normalisation = "zero mean, unit marginal variance".into();
            Some(s)
        }
        _ => None,
    };
    for i in 0..req.n_samples {
        let mut rng = substream(req.seed, req.first_index + i as u64);
        match &req.measure {
            MeasureSpec::BoxWave { .. } => {
                let p = sample_box(&req.measure, &mut rng)?;
                inputs.push(box_on_grid(&p, &grid).values);
                outputs.push(advect_exact(&p, settings.speed, settings.final_time, &grid).values);
            }
            MeasureSpec::ShiftedSine { xi } => {
                let xi = uniform(&mut rng, xi);
                inputs.push(GridFunction::from_fn(grid, |x| -(x - xi).sin()).values);
                outputs.push(burgers_exact(xi, settings.final_time, &grid).values);
            }
            MeasureSpec::PeriodicGrf { .. } => {
                let sampler = grf.as_ref().expect("sampler built above");
                let fine = sampler.sample(&mut rng);
                let r = settings.refinement;
                let input: Vec<f64> = fine.values.iter().step_by(r).copied().collect();
                let solved = burgers_fvm(&fine, settings.final_time, settings.cfl)?;
                inputs.push(input);
                outputs.push(average_down_centered(&solved.values, r));
            }
            MeasureSpec::ShockTube { .. } => {
                let p = sample_shocktube(&req.measure, &mut rng)?;
                let r = settings.refinement;
                let fine_grid = req.measure.grid(req.grid_n * r)?;
                let init = EulerField::riemann(fine_grid, p.left, p.right, p.x0);
                let run = euler_fvm(&init, settings.final_time, settings.cfl, Boundary::Transmissive)?;
                if run.boundary_disturbed {
                    notes.boundary_disturbed += 1;
                }
                let mut input = average_down_tiled(&init.rho, r);
                input.extend(average_down_tiled(&init.m, r));
                input.extend(average_down_tiled(&init.e, r));
                inputs.push(input);
                outputs.push(average_down_tiled(&run.field.e, r));
            }
        }
    }
    let manifest = Manifest {
        measure: req.measure.clone(),
        seed: req.seed,
        first_index: req.first_index,
        solver: req.solver,
        grid,
        n_samples: req.n_samples,
        notes,
        config_hash: None,
    };
    Ok(Dataset { grid, n_input_channels: req.measure.n_input_channels(), inputs, outputs, manifest })
}

const MAGIC: &[u8; 4] = b"DPL1";
pub const DATASET_VERSION: u32 = 1;

pub fn write_dataset(ds: &Dataset, mut w: impl Write) -> Result<(), DatasetError> {
    let n = ds.grid.n;
    for (x, y) in ds.inputs.iter().zip(&ds.outputs) {
        if x.len() != ds.n_input_channels * n || y.len() != n {
            return Err(DatasetError::Inconsistent("sample length does not match grid".into()));
        }
    }
    if ds.inputs.len() != ds.outputs.len() {
        return Err(DatasetError::Inconsistent("input/output count mismatch".into()));
    }
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| DatasetError::Inconsistent(format!("{what} exceeds u32")))
    };
    w.write_all(MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    w.write_all(&to_u32(ds.inputs.len(), "sample count")?.to_le_bytes())?;
    w.write_all(&to_u32(ds.n_input_channels, "channel count")?.to_le_bytes())?;
    w.write_all(&to_u32(n, "grid size")?.to_le_bytes())?;
    w.write_all(&ds.grid.period.to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * (ds.n_input_channels + 1) * n);
    for (x, y) in ds.inputs.iter().zip(&ds.outputs) {
        buf.clear();
        for v in x.iter().chain(y) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    let json = serde_json::to_vec(&ds.manifest)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, DatasetError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s(r: &mut impl Read, count: usize) -> Result<Vec<f64>, DatasetError> {
    let mut bytes = vec![0u8; 8 * count];
    r.read_exact(&mut bytes)?;
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn read_dataset(mut r: impl Read) -> Result<Dataset, DatasetError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(DatasetError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != DATASET_VERSION {
        return Err(DatasetError::UnsupportedVersion(version));
    }
    let n_samples = read_u32(&mut r)? as usize;
    let channels = read_u32(&mut r)? as usize;
    let n = read_u32(&mut r)? as usize;
    let period = read_f64s(&mut r, 1)?[0];
    let mut inputs = Vec::with_capacity(n_samples);
    let mut outputs = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        inputs.push(read_f64s(&mut r, channels * n)?);
        outputs.push(read_f64s(&mut r, n)?);
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut json)?;
    let manifest: Manifest = serde_json::from_slice(&json)?;
    if manifest.grid.n != n || manifest.grid.period.to_bits() != period.to_bits() {
        return Err(DatasetError::Inconsistent("manifest grid disagrees with header".into()));
    }
    Ok(Dataset { grid: manifest.grid, n_input_channels: channels, inputs, outputs, manifest })
}

pub fn save_dataset(ds: &Dataset, path: &std::path::Path) -> Result<(), DatasetError> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_dataset(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &std::path::Path) -> Result<Dataset, DatasetError> {
    let f = std::fs::File::open(path)?;
    read_dataset(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_corner_of_shock_tube() {
        let p = shocktube_from_z(&[1.0; 6]);
        assert!((p.left.rho - 1.2).abs() < 1e-15);
        assert!((p.right.rho - 0.7).abs() < 1e-15);
        assert!((p.left.velocity() - 1.0).abs() < 1e-15);
        assert!((p.left.pressure() - 4.1).abs() < 1e-12);
        assert!((p.right.pressure() - 0.7).abs() < 1e-12);
        assert!((p.x0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn averaging_preserves_mean() {
        let fine: Vec<f64> = (0..64).map(|i| ((i * 7) % 11) as f64).collect();
        let m: f64 = fine.iter().sum::<f64>() / 64.0;
        for r in [2, 4, 8] {
            let c = average_down_centered(&fine, r);
            let mc: f64 = c.iter().sum::<f64>() / c.len() as f64;
            assert!((m - mc).abs() < 1e-12);
        }
    }
}
