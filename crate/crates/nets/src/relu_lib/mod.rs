//! Hand-built ReLU networks: elementary blocks, an analytic function
//! compiler, and composition utilities.

mod analytic;
mod angle;
mod blocks;
mod matrix;
mod mlp;

pub use analytic::{build_divide, build_divide_ranges, compile_analytic, CompileReport, CompileStrategy};
pub use angle::build_angle_recovery;
pub use blocks::*;
pub use matrix::Matrix;
pub use mlp::{account_size, Layer, Mlp, NetSize};
