//! Explicit operator networks for linear advection and Burgers, and
//! Monte-Carlo error-versus-size studies of them.

pub mod advection;
pub mod burgers;
pub mod mc;
pub mod report;

pub use advection::{build_adv_fno, build_adv_fno_with, build_adv_sdon, build_adv_sdon_with, AdvFno, AdvSdon, AdvectionSetup};
pub use burgers::{
    build_burg_fno, build_burg_fno_phase, build_burg_sdon, build_profile_net, phase_matrix, BurgFno, BurgSdon,
    BurgersProfile, ProfileLattice,
};
pub use report::{scaling_report, Builder, ConstructionReport, Fit, ReportRow};

use hyperop_core::exact_pde::PdeError;
use hyperop_core::grid::GridError;
use hyperop_core::measures::MeasureError;
use hyperop_nets::NetError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

pub type Result<T> = std::result::Result<T, ConstructionError>;
