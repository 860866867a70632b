//! Offspring laws, branching laws and the Laplace-transform toolkit.

pub mod heavy_tail;
pub mod laplace;
pub mod law;
pub mod offspring;

pub use heavy_tail::HeavyTail;
pub use laplace::{psi, LaplaceToolkit, RemainderSuite};
pub use law::{BranchingLaw, MeanMeasures, Mode, Overrides};
pub use offspring::{envelope, Llogl, Moments, OffspringPmf, DEFAULT_PARTIAL_SUM_BOUND};
