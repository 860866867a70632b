//! The end boundary of tree walks: first passage, hitting measures on
//! cylinders, Green and Martin kernels, spectral radius.

pub mod cylinder;
pub mod first_passage;
pub mod green;
pub mod hitting;
pub mod solver;
pub mod spectral;

pub use cylinder::{anchors_at, BoundaryMeasureTable, Cylinder, TestFunction};
pub use first_passage::FirstPassage;
pub use green::{green_oracle, Green, GreenMartin};
pub use hitting::Boundary;
pub use solver::TreeProblem;
pub use spectral::{spectral_radius, SpectralEstimate};
