//! Double coupled canonical polyadic decomposition (DC-CPD) of grids of
//! third-order complex tensors, with an algebraic solver, an ALS solver and
//! a joint blind source separation front end.
//!
//! Every numerical routine is generic over the real scalar type; the
//! aliases at the crate root fix it to `f64` or `f32`.

pub mod algebraic;
pub mod als;
pub mod assign;
pub mod error;
pub mod io;
pub mod jbss;
pub mod linalg;
pub mod model;
pub mod random;
pub mod scalar;
pub mod tensor;
pub mod uniqueness;

pub use algebraic::{solve_algebraic, AlgebraicPath, AlgebraicReport};
pub use als::{random_init, solve_als, AlsTrace, StopReason};
pub use error::{DcCpdError, Result, Warning};
pub use jbss::{
    coupled_mean_relative_error, covariance_tensorize, mean_relative_error, synth_mixtures,
    synth_sources, FrameSpec, MultiSetSignals, SourceModel,
};
pub use model::{cost_eta, symmetrize, DcCpdProblem, DcCpdSolution, SolverOptions};
pub use scalar::{ComplexMatrix, Real};
pub use tensor::{ComplexTensor3, Mode};
pub use uniqueness::{generic_rmax, UniquenessReport};

pub type Problem = DcCpdProblem<f64>;
pub type Solution = DcCpdSolution<f64>;
pub type Tensor = ComplexTensor3<f64>;
pub type Matrix = ComplexMatrix<f64>;

pub type Problem32 = DcCpdProblem<f32>;
pub type Solution32 = DcCpdSolution<f32>;
pub type Tensor32 = ComplexTensor3<f32>;
pub type Matrix32 = ComplexMatrix<f32>;
