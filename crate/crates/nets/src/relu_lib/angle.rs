use super::analytic::{compile_analytic, CompileStrategy};
use super::blocks::{build_blend, build_clamp, build_ramp};
use super::mlp::Mlp;
use crate::NetError;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

const BRANCH_LIMIT: f64 = 0.8;

/// Net `(cos θ, sin θ) ↦ θ ∈ [0, 2π]`.
///
/// Uses `asin` where `|sin θ|` is small and `acos` elsewhere, each compiled on
/// `[-0.8, 0.8]`; the quadrant is picked by ReLU gates. Within `eps` of the
/// wrap-around at `θ = 0` the output moves from `2π` down to `0`; elsewhere the
/// sup error is below `eps` for exact inputs.
pub fn build_angle_recovery(eps: f64) -> Result<Mlp, NetError> {
    if !(eps > 0.0 && eps < 0.1) {
        return Err(NetError::Invalid(format!("angle tolerance {eps} outside (0, 0.1)")));
    }
    let range = [-BRANCH_LIMIT, BRANCH_LIMIT];
    let clamp = build_clamp(-BRANCH_LIMIT, BRANCH_LIMIT)?;
    let (asin, _) = compile_analytic(&f64::asin, range, eps / 4.0, CompileStrategy::Chebyshev)?;
    let (acos, _) = compile_analytic(&f64::acos, range, eps / 4.0, CompileStrategy::Chebyshev)?;
    let c = Mlp::select(2, &[0]);
    let s = Mlp::select(2, &[1]);
    let abs_s = Mlp::one_hidden(
        super::Matrix::dense(2, 2, vec![0.0, 1.0, 0.0, -1.0]),
        vec![0.0, 0.0],
        super::Matrix::dense(1, 2, vec![1.0, 1.0]),
        vec![0.0],
    )?;

    // stage 1: (A, C, α, βc, βs, β5)
    let a = s.then(&clamp)?.then(&asin)?;
    let cc = c.then(&clamp)?.then(&acos)?;
    let alpha = abs_s.then(&build_ramp(FRAC_1_SQRT_2 - eps / 4.0, FRAC_1_SQRT_2)?)?;
    let beta_c = c.then(&build_ramp(-0.5, 0.5)?)?;
    let beta_s = s.then(&build_ramp(-0.5, 0.5)?)?;
    let beta_5 = Mlp::linear(2, &[(vec![(1, -1.0)], 0.0)]).then(&build_ramp(0.0, eps.sin())?)?;
    let stage1 = Mlp::parallel(&[&a, &cc, &alpha, &beta_c, &beta_s, &beta_5])?;

    // stage 2: S = blend(βc; π - A, A + 2πβ5), Cv = blend(βs; 2π - C, C), carry α
    let blend = build_blend();
    let s_in = Mlp::linear(6, &[(vec![(3, 1.0)], 0.0), (vec![(0, -1.0)], PI), (vec![(0, 1.0), (5, 2.0 * PI)], 0.0)]);
    let c_in = Mlp::linear(6, &[(vec![(4, 1.0)], 0.0), (vec![(1, -1.0)], 2.0 * PI), (vec![(1, 1.0)], 0.0)]);
    let s_branch = s_in.then(&blend)?;
    let c_branch = c_in.then(&blend)?;
    let carry_alpha = Mlp::select(6, &[2]);
    let stage2 = Mlp::parallel(&[&carry_alpha, &s_branch, &c_branch])?;

    // stage 3: blend(α; S, Cv) clamped to [0, 2π]
    stage1.then(&stage2)?.then(&blend)?.then(&build_clamp(0.0, 2.0 * PI)?)
}
