//! Sparse polynomial-chaos approximation of stochastic functions.
//!
//! Multivariate Legendre chaos coefficients are recovered from a small number
//! of random samples by greedy ℓ0 (orthogonal matching pursuit) or convex ℓ1
//! (basis pursuit denoising) solvers. The residual tolerance is estimated by
//! cross-validation. Around the solvers sit the pieces needed to run an
//! elliptic stochastic-PDE study end to end: a Karhunen–Loève random field, a
//! quadratic finite-element forward model, and quadrature / Monte Carlo
//! reference coefficients.
//!
//! ```
//! use sparsepc::{pcbasis, sampling, solvers};
//!
//! let basis = pcbasis::BasisSpec::total_order(2, 3).unwrap();
//! let samples = sampling::draw_samples(3, 40, 7);
//! let m = sampling::assemble_measurement(&basis, &samples).unwrap();
//! // u(y) = 1 + 0.5 * psi_(1,0,0)(y)
//! let u: Vec<f64> = (0..40).map(|i| m.get(i, 0) + 0.5 * m.get(i, 1)).collect();
//! let res = solvers::omp(&m, &u, 1e-10, None).unwrap();
//! assert_eq!(res.support, vec![0, 1]);
//! ```

// `!(x > 0.0)` rejects NaN along with non-positive values; index loops read
// better than iterator chains in the dense kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod crossval;
mod error;
pub mod experiment;
pub mod femsolver;
pub mod klfield;
pub mod linalg;
pub mod oracle;
pub mod pcbasis;
pub mod quadrature;
pub mod sampling;
pub mod solvers;

pub use crossval::{CrossValPlan, CrossValResult, DeltaGrid};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ExperimentReport};
pub use femsolver::{FemSolution, Mesh1D};
pub use klfield::{CovarianceSpec, KLExpansion};
pub use linalg::DenseMatrix;
pub use oracle::CoefficientVector;
pub use pcbasis::{BasisSpec, MultiIndex, MultiIndexSet};
pub use sampling::{MeasurementMatrix, SampleSet};
pub use solvers::{RecoveryResult, SolverKind};
