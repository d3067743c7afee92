use super::{encode_sensors, Sensors};
use crate::relu_lib::Mlp;
use crate::NetError;
use hyperop_core::grid::Grid;
use serde::{Deserialize, Serialize};

/// `Σ_k β_k(E u) τ_k(y)` with branch `β: R^{C·m} → R^p` and trunk `τ: R → R^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepOnetModel {
    pub branch: Mlp,
    pub trunk: Mlp,
    pub sensors: Sensors,
    /// Input channels read at every sensor.
    pub channels: usize,
}

impl DeepOnetModel {
    pub fn new(branch: Mlp, trunk: Mlp, sensors: Sensors, channels: usize) -> Result<Self, NetError> {
        let m = sensors.len() * channels;
        if branch.in_dim() != m {
            return Err(NetError::Dimension(format!("branch takes {} inputs, sensors give {m}", branch.in_dim())));
        }
        if trunk.in_dim() != 1 || trunk.out_dim() != branch.out_dim() {
            return Err(NetError::Dimension(format!(
                "trunk {}→{} does not match branch output {}",
                trunk.in_dim(),
                trunk.out_dim(),
                branch.out_dim()
            )));
        }
        Ok(Self { branch, trunk, sensors, channels })
    }

    pub fn p(&self) -> usize {
        self.branch.out_dim()
    }

    /// Output at the query points `ys` for input `u` (channel-major on `grid`).
    pub fn forward(&self, grid: &Grid, u: &[f64], ys: &[f64]) -> Result<Vec<f64>, NetError> {
        let e = encode_sensors(grid, u, self.channels, &self.sensors)?;
        let beta = self.branch.eval(&e)?;
        let tau = self.trunk.eval_batch(ys, ys.len())?;
        let n = ys.len();
        Ok((0..n).map(|j| beta.iter().enumerate().map(|(k, b)| b * tau[k * n + j]).sum()).collect())
    }
}

/// Trunk of a shift-DeepONet: one net with `p` outputs, or one scalar net per term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "nets", rename_all = "snake_case")]
pub enum Trunk {
    Shared(Mlp),
    PerTerm(Vec<Mlp>),
}

/// `Σ_k β_k(E u) τ_k(A_k(E u) y + γ_k(E u))` in one space dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftDeepOnetModel {
    pub branch: Mlp,
    pub trunk: Trunk,
    pub scale_net: Mlp,
    pub shift_net: Mlp,
    pub sensors: Sensors,
    pub channels: usize,
}

impl ShiftDeepOnetModel {
    pub fn new(
        branch: Mlp,
        trunk: Trunk,
        scale_net: Mlp,
        shift_net: Mlp,
        sensors: Sensors,
        channels: usize,
    ) -> Result<Self, NetError> {
        let m = sensors.len() * channels;
        let p = branch.out_dim();
        for (name, net) in [("branch", &branch), ("scale", &scale_net), ("shift", &shift_net)] {
            if net.in_dim() != m || net.out_dim() != p {
                return Err(NetError::Dimension(format!(
                    "{name} net is {}→{}, expected {m}→{p}",
                    net.in_dim(),
                    net.out_dim()
                )));
            }
        }
        let ok = match &trunk {
            Trunk::Shared(t) => t.in_dim() == 1 && t.out_dim() == p,
            Trunk::PerTerm(ts) => ts.len() == p && ts.iter().all(|t| t.in_dim() == 1 && t.out_dim() == 1),
        };
        if !ok {
            return Err(NetError::Dimension(format!("trunk does not provide {p} scalar terms")));
        }
        Ok(Self { branch, trunk, scale_net, shift_net, sensors, channels })
    }

    pub fn p(&self) -> usize {
        self.branch.out_dim()
    }

    /// `(β, A, γ)` for input `u`.
    pub fn coefficients(&self, grid: &Grid, u: &[f64]) -> Result<[Vec<f64>; 3], NetError> {
        let e = encode_sensors(grid, u, self.channels, &self.sensors)?;
        Ok([self.branch.eval(&e)?, self.scale_net.eval(&e)?, self.shift_net.eval(&e)?])
    }

    /// Term `k` of the trunk evaluated at the points `zs`.
    pub fn trunk_term(&self, k: usize, zs: &[f64]) -> Result<Vec<f64>, NetError> {
        let n = zs.len();
        match &self.trunk {
            Trunk::Shared(t) => Ok(t.eval_batch(zs, n)?[k * n..(k + 1) * n].to_vec()),
            Trunk::PerTerm(ts) => ts[k].eval_batch(zs, n),
        }
    }

    pub fn forward(&self, grid: &Grid, u: &[f64], ys: &[f64]) -> Result<Vec<f64>, NetError> {
        let [beta, a, gamma] = self.coefficients(grid, u)?;
        let mut out = vec![0.0; ys.len()];
        for k in 0..self.p() {
            if beta[k] == 0.0 {
                continue;
            }
            let zs: Vec<f64> = ys.iter().map(|y| a[k] * y + gamma[k]).collect();
            for (o, t) in out.iter_mut().zip(self.trunk_term(k, &zs)?) {
                *o += beta[k] * t;
            }
        }
        Ok(out)
    }
}
