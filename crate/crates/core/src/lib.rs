//! Numerical core: periodic grids and transforms, reference PDE solvers,
//! input measures with dataset I/O, and covariance spectra.

pub mod exact_pde;
pub mod grid;
pub mod measures;
pub mod spectra;
pub mod stats;
