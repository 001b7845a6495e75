//! Spectral Monte Carlo toolkit for linear and nonlinear SPDEs driven by
//! Q-Wiener noise on an interval with Dirichlet boundary conditions.

pub mod burgers;
pub mod error;
pub mod experiment;
pub mod heat;
pub mod hilbert;
pub mod lyapunov;
pub mod montecarlo;
pub mod wave;
pub mod wiener;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
pub use hilbert::{CovarianceSpectrum, DecayLaw, DirichletBasis, HilbertVector, SpectrumSpec};
pub use montecarlo::{ClosedFormReport, EnsembleStats, RandomStream, ReportRow, SeriesTable};
pub use wiener::{sample_path, TimeGrid, WienerPath};
