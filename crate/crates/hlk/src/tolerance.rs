//! Tolerances shared by checks, tests and the CLI.

/// Pointwise identities between closed forms.
pub const CLOSED_FORM: f64 = 1e-12;
/// Sandwich bound, evaluated in closed form.
pub const SANDWICH: f64 = 1e-12;
/// Weighted ultracontractivity, closed form.
pub const ULTRACONTRACTIVITY: f64 = 1e-10;
/// Identities that need a spatial or temporal quadrature.
pub const QUADRATURE: f64 = 1e-6;
/// Chapman–Kolmogorov through the grid quadrature.
pub const CHAPMAN_KOLMOGOROV: f64 = 1e-6;
/// Miyadera ratio slack: ratio <= alpha * (1 + MIYADERA).
pub const MIYADERA: f64 = 1e-6;
/// Checks backed by a numerical solver.
pub const SOLVER: f64 = 1e-3;
/// Relative sup-norm between two deterministic solvers.
pub const CROSS_METHOD: f64 = 1e-3;
/// Entries below this fraction of the max are left out of relative comparisons.
pub const CROSS_METHOD_FLOOR: f64 = 1e-4;
/// Monte Carlo agreement, in standard errors.
pub const MC_SIGMAS: f64 = 3.0;
/// Finite-dimensional oracle checks.
pub const ORACLE: f64 = 1e-7;
/// Oracle checks whose both sides are closed-form norms.
pub const ORACLE_TIGHT: f64 = 1e-9;
/// Matrix exponential, relative.
pub const EXPM: f64 = 1e-12;
/// Kernel positivity floor, relative to the kernel scale.
pub const POSITIVITY: f64 = 1e-8;
/// Symmetry of deterministic kernels, relative.
pub const SYMMETRY: f64 = 1e-8;
/// Stopping rule for power iteration.
pub const POWER_ITERATION: f64 = 1e-8;
pub const POWER_ITERATION_CAP: usize = 10_000;
