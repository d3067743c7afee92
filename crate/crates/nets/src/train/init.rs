use crate::operator_nets::{
    Activation, DeepOnetModel, FnoLayer, FnoModel, OperatorModel, Sensors, ShiftDeepOnetModel, Trunk,
};
use crate::relu_lib::{Layer, Matrix, Mlp};
use crate::NetError;
use hyperop_core::grid::Grid;
use hyperop_core::measures::substream;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepOnetArch {
    pub sensors: usize,
    pub p: usize,
    pub branch_hidden: Vec<usize>,
    pub trunk_hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftDeepOnetArch {
    pub sensors: usize,
    pub p: usize,
    pub branch_hidden: Vec<usize>,
    /// Hidden widths of the scale and shift nets.
    pub coeff_hidden: Vec<usize>,
    /// Hidden widths of each scalar trunk term.
    pub trunk_hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FnoArch {
    pub d_v: usize,
    pub k_max: usize,
    pub layers: usize,
    pub activation: Activation,
    /// Hidden width of the projection; 0 for an affine projection.
    #[serde(default)]
    pub projection_hidden: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    DeepOnet(DeepOnetArch),
    ShiftDeepOnet(ShiftDeepOnetArch),
    Fno(FnoArch),
}

impl Architecture {
    pub fn desk_deeponet() -> Self {
        Architecture::DeepOnet(DeepOnetArch { sensors: 64, p: 32, branch_hidden: vec![64, 64], trunk_hidden: vec![64, 64] })
    }

    pub fn desk_shift_deeponet() -> Self {
        Architecture::ShiftDeepOnet(ShiftDeepOnetArch {
            sensors: 64,
            p: 8,
            branch_hidden: vec![64, 64],
            coeff_hidden: vec![64],
            trunk_hidden: vec![32],
        })
    }

    pub fn desk_fno() -> Self {
        Architecture::Fno(FnoArch { d_v: 12, k_max: 8, layers: 3, activation: Activation::Gelu, projection_hidden: 0 })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Architecture::DeepOnet(_) => "deeponet",
            Architecture::ShiftDeepOnet(_) => "shift_deeponet",
            Architecture::Fno(_) => "fno",
        }
    }
}

/// Fully connected ReLU net with He-style uniform weights `U(±√(6/fan_in))`
/// on hidden layers, `U(±√(3/fan_in))` on the output layer, and zero biases.
pub fn random_mlp(rng: &mut ChaCha8Rng, n_in: usize, hidden: &[usize], n_out: usize) -> Mlp {
    let mut dims = vec![n_in];
    dims.extend_from_slice(hidden);
    dims.push(n_out);
    let last = dims.len() - 2;
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(i, d)| {
            let bound = if i == last { (3.0 / d[0] as f64).sqrt() } else { (6.0 / d[0] as f64).sqrt() };
            let w = (0..d[0] * d[1]).map(|_| rng.random_range(-bound..bound)).collect();
            Layer::new(Matrix::dense(d[1], d[0], w), vec![0.0; d[1]], i != last)
        })
        .collect();
    Mlp::new(layers).expect("consistent shapes")
}

fn set_output_bias(net: &mut Mlp, value: f64) {
    let last = net.layers_mut().last_mut().unwrap();
    last.bias.iter_mut().for_each(|b| *b = value);
}

/// Fresh model for `channels` input channels and `out_channels` outputs on
/// `grid`. Sensors are drawn from `seed`, weights from an independent stream.
pub fn init_model(
    arch: &Architecture,
    grid: &Grid,
    channels: usize,
    out_channels: usize,
    seed: u64,
) -> Result<OperatorModel, NetError> {
    let mut rng = substream(seed, 1);
    match arch {
        Architecture::DeepOnet(a) => {
            if out_channels != 1 {
                return Err(NetError::Invalid("DeepONet models have one output channel".into()));
            }
            let sensors = Sensors::random(grid, a.sensors, seed)?;
            let branch = random_mlp(&mut rng, a.sensors * channels, &a.branch_hidden, a.p);
            let trunk = random_mlp(&mut rng, 1, &a.trunk_hidden, a.p);
            Ok(OperatorModel::DeepOnet(DeepOnetModel::new(branch, trunk, sensors, channels)?))
        }
        Architecture::ShiftDeepOnet(a) => {
            if out_channels != 1 {
                return Err(NetError::Invalid("shift-DeepONet models have one output channel".into()));
            }
            let sensors = Sensors::random(grid, a.sensors, seed)?;
            let m = a.sensors * channels;
            let branch = random_mlp(&mut rng, m, &a.branch_hidden, a.p);
            let trunks = (0..a.p).map(|_| random_mlp(&mut rng, 1, &a.trunk_hidden, 1)).collect();
            let mut scale = random_mlp(&mut rng, m, &a.coeff_hidden, a.p);
            // start close to the unshifted DeepONet: A ≈ 1, γ ≈ 0
            scale.layers_mut().last_mut().unwrap().weights.values_mut().iter_mut().for_each(|w| *w *= 0.1);
            set_output_bias(&mut scale, 1.0);
            let mut shift = random_mlp(&mut rng, m, &a.coeff_hidden, a.p);
            shift.layers_mut().last_mut().unwrap().weights.values_mut().iter_mut().for_each(|w| *w *= 0.1);
            Ok(OperatorModel::ShiftDeepOnet(ShiftDeepOnetModel::new(
                branch,
                Trunk::PerTerm(trunks),
                scale,
                shift,
                sensors,
                channels,
            )?))
        }
        Architecture::Fno(a) => {
            let d = a.d_v;
            let lifting = random_mlp(&mut rng, channels + 1, &[], d);
            let hidden: Vec<usize> = if a.projection_hidden > 0 { vec![a.projection_hidden] } else { vec![] };
            let projection = random_mlp(&mut rng, d, &hidden, out_channels);
            // complex entries with E|P|² = 1/(d_v (2 k_max + 1))
            let var = 1.0 / (d * (2 * a.k_max + 1)) as f64;
            let cb = (1.5 * var).sqrt();
            let wb = (3.0 / d as f64).sqrt();
            let layers = (0..a.layers)
                .map(|_| {
                    let mut l = FnoLayer::zeros(d, a.k_max);
                    l.w = Matrix::dense(d, d, (0..d * d).map(|_| rng.random_range(-wb..wb)).collect());
                    for p in l.p.iter_mut() {
                        *p = Complex64::new(rng.random_range(-cb..cb), rng.random_range(-cb..cb));
                    }
                    l
                })
                .collect();
            Ok(OperatorModel::Fno(FnoModel::new(lifting, layers, projection, a.k_max, a.activation)?))
        }
    }
}
