//! Forward passes of DeepONet, shift-DeepONet and FNO models, sensor
//! encoding, size accounting and checkpoints.

mod checkpoint;
mod deeponet;
mod fno;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, read_checkpoint_tagged, save_checkpoint, write_checkpoint, write_checkpoint_tagged,
};
pub use deeponet::{DeepOnetModel, ShiftDeepOnetModel, Trunk};
pub use fno::{Activation, FnoLayer, FnoModel, ModeTables};

use crate::relu_lib::{account_size, Mlp};
use crate::NetError;
use hyperop_core::grid::Grid;
use hyperop_core::measures::substream;
use serde::{Deserialize, Serialize};

/// Sensor locations; each is read at the nearest grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensors {
    pub points: Vec<f64>,
}

impl Sensors {
    pub fn new(points: Vec<f64>) -> Self {
        Self { points }
    }

    /// `m` sensors at equispaced nodes `j·n/m` (rounded down).
    pub fn equispaced(grid: &Grid, m: usize) -> Self {
        Self::new((0..m).map(|i| grid.point(i * grid.n / m)).collect())
    }

    /// `m` distinct nodes drawn uniformly, in increasing order.
    pub fn random(grid: &Grid, m: usize, seed: u64) -> Result<Self, NetError> {
        if m > grid.n {
            return Err(NetError::Invalid(format!("{m} sensors on {} nodes", grid.n)));
        }
        let mut idx = rand::seq::index::sample(&mut substream(seed, 0), grid.n, m).into_vec();
        idx.sort_unstable();
        Ok(Self::new(idx.into_iter().map(|j| grid.point(j)).collect()))
    }

    pub fn all_nodes(grid: &Grid) -> Self {
        Self::new(grid.points())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest node index for each sensor, with periodic wrap.
    pub fn indices(&self, grid: &Grid) -> Vec<usize> {
        let n = grid.n as f64;
        self.points
            .iter()
            .map(|x| {
                let r = ((x - grid.origin) / grid.dx()).round().rem_euclid(n);
                (r as usize).min(grid.n - 1)
            })
            .collect()
    }
}

/// Values of each channel at the sensors, channel-major (`C·m` entries).
pub fn encode_sensors(grid: &Grid, u: &[f64], channels: usize, sensors: &Sensors) -> Result<Vec<f64>, NetError> {
    if u.len() != channels * grid.n {
        return Err(NetError::Dimension(format!(
            "input of length {} for {channels} channels on {} nodes",
            u.len(),
            grid.n
        )));
    }
    let idx = sensors.indices(grid);
    Ok((0..channels).flat_map(|c| idx.iter().map(move |&j| u[c * grid.n + j])).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "architecture", rename_all = "snake_case")]
pub enum OperatorModel {
    DeepOnet(DeepOnetModel),
    ShiftDeepOnet(ShiftDeepOnetModel),
    Fno(FnoModel),
}

impl OperatorModel {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorModel::DeepOnet(_) => "deeponet",
            OperatorModel::ShiftDeepOnet(_) => "shift_deeponet",
            OperatorModel::Fno(_) => "fno",
        }
    }

    /// Prediction at the grid nodes, channel-major.
    pub fn predict(&self, grid: &Grid, u: &[f64]) -> Result<Vec<f64>, NetError> {
        match self {
            OperatorModel::DeepOnet(m) => m.forward(grid, u, &grid.points()),
            OperatorModel::ShiftDeepOnet(m) => m.forward(grid, u, &grid.points()),
            OperatorModel::Fno(m) => m.forward(grid, u),
        }
    }

    pub fn size(&self) -> ModelSize {
        model_size(self)
    }
}

/// Complexity summary of an operator model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSize {
    pub depth: usize,
    pub width: usize,
    pub size: usize,
    /// Number of basis terms (DeepONet variants).
    pub p: Option<usize>,
    pub k_max: Option<usize>,
    pub d_v: Option<usize>,
}

fn combined(nets: &[&Mlp]) -> (usize, usize) {
    let depth = nets.iter().map(|n| n.depth()).max().unwrap_or(0);
    let width = nets.iter().map(|n| n.width()).max().unwrap_or(0);
    (depth, width)
}

/// Sizes in the fully connected convention. DeepONet variants use
/// `(m + p)·width + width²·depth` with depth and width the largest over the
/// component nets; FNO counts `W`, the `2k_max + 1` real degrees of freedom
/// per entry of `P` and of `b̂`, plus lifting and projection.
pub fn model_size(model: &OperatorModel) -> ModelSize {
    match model {
        OperatorModel::DeepOnet(m) => {
            let (depth, width) = combined(&[&m.branch, &m.trunk]);
            let (inputs, p) = (m.branch.in_dim(), m.p());
            ModelSize { depth, width, size: (inputs + p) * width + width * width * depth, p: Some(p), k_max: None, d_v: None }
        }
        OperatorModel::ShiftDeepOnet(m) => {
            let mut nets = vec![&m.branch, &m.scale_net, &m.shift_net];
            match &m.trunk {
                Trunk::Shared(t) => nets.push(t),
                Trunk::PerTerm(ts) => nets.extend(ts.iter()),
            }
            let (depth, width) = combined(&nets);
            let (inputs, p) = (m.branch.in_dim(), m.p());
            ModelSize { depth, width, size: (inputs + p) * width + width * width * depth, p: Some(p), k_max: None, d_v: None }
        }
        OperatorModel::Fno(m) => {
            let (d, k) = (m.d_v, m.k_max);
            let per_layer = d * d + (2 * k + 1) * d * d + (2 * k + 1) * d;
            let lift = account_size(&m.lifting);
            let proj = account_size(&m.projection);
            ModelSize {
                depth: m.layers.len() + lift.depth + proj.depth,
                width: d.max(lift.width).max(proj.width),
                size: per_layer * m.layers.len() + lift.size + proj.size,
                p: None,
                k_max: Some(k),
                d_v: Some(d),
            }
        }
    }
}
