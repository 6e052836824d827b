//! Numerical constants shared across modules.

/// Relative off-diagonal threshold for one-sided Jacobi rotations.
pub const SVD_OFFDIAG_TOL: f64 = 1e-12;
/// Jacobi sweeps allowed per unit of matrix dimension.
pub const SVD_SWEEPS_PER_DIM: usize = 100;

/// Power iteration for the spectral norm.
pub const POWER_ITERS: usize = 50;
pub const POWER_TOL: f64 = 1e-8;

/// Relative slack in the adaptive smoothness test.
pub const SMOOTHNESS_SLACK: f64 = 1e-12;
/// Any estimate of M or A beyond this is treated as divergence.
pub const OVERFLOW_GUARD: f64 = 1e300;
/// Default relative tolerance for the implicit step equation.
pub const BISECTION_TOL: f64 = 1e-12;
/// Bracket expansions before the step equation gives up.
pub const BRACKET_EXPANSIONS: usize = 200;

/// Objective stall rule: relative change below this over the window.
pub const STALL_REL: f64 = 1e-14;
pub const STALL_WINDOW: usize = 50;

/// Finite differences use `FD_STEP * (1 + |x|_inf)`.
pub const FD_STEP: f64 = 1e-5;

/// Projected subgradient steps for the numerical smoothing operator.
pub const SMOOTHING_STEPS: usize = 500;

/// Brute-force grid: box radius factor, refinement rounds, shrink factor.
pub const GRID_RADIUS_FACTOR: f64 = 4.0;
pub const GRID_ROUNDS: usize = 3;
pub const GRID_SHRINK: f64 = 10.0;
