//! Deterministic operators and equations: the nonlocal double-average
//! generators, the fractional operator truncated below `delta`, forward
//! solvers for the centering and limiting equations, backward test
//! functions, and the semigroup of the compound-Poisson walk.

mod ops;
mod pde;
mod reference;
mod semigroup;

pub use ops::{
    f_delta, laplacian, op_d_alpha_delta, op_l_r, product_trapezoid, radial_integral, NonlocalKernel, NonlocalResult,
    RadialOperator, RadialQuadrature, DEFAULT_NODES_PER_DECADE,
};
pub use pde::{
    linearized_step, solve_backward_testfn, solve_centering, solve_centering_brownian, solve_limit_pde,
    Equation, PdeSolution, SolveOptions, RANGE_TOLERANCE,
};
pub use reference::Gaussian1d;
pub use semigroup::{f_of_t, levy_semigroup_apply, POISSON_TAIL};
