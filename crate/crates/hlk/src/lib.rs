//! Heat kernels of the Dirichlet Laplacian on the half-line, perturbed by
//! potentials with `∫ x|V(x)| dx < 1`, and numerical checks of the Gaussian
//! and boundary-weighted bounds they satisfy.
//!
//! ```
//! use hlk::closed_form::dirichlet_kernel;
//!
//! let k = dirichlet_kernel(1.0, 1.0, 1.0).unwrap();
//! assert!((k - 0.178317917418729).abs() < 1e-14);
//! ```

pub mod closed_form;
pub mod config;
pub mod engine;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod oracle;
pub mod potential;
pub mod suite;
pub mod tolerance;
mod tridiag;
pub mod verify;

pub use config::{RunConfig, Suite};
pub use error::{Error, Result};
pub use grid::{Grid1D, QuadratureRule, WeightSpec};
pub use kernel::{KernelMatrix, Method};
pub use suite::run;
pub use verify::{InequalityCheck, VerificationReport};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    struct Overview;
    #[doc = include_str!("../../../book/src/closed-forms.md")]
    struct ClosedForms;
    #[doc = include_str!("../../../book/src/solvers.md")]
    struct Solvers;
    #[doc = include_str!("../../../book/src/verification.md")]
    struct Verification;
    #[doc = include_str!("../../../book/src/oracle.md")]
    struct Oracle;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
    #[doc = include_str!("../../../book/src/counterexample.md")]
    struct Counterexample;
}
