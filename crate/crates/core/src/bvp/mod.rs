//! Two-point boundary-value collocation, slow-manifold sweeps with
//! secondary-canard detection, and pseudo-arclength continuation of
//! periodic orbits.

pub mod branch;
pub mod collocation;
pub mod manifold;

pub use branch::{continue_branch, solve_periodic, Branch, BranchOptions, BranchPoint};
pub use collocation::{
    solution_from_samples, solve_segment, CollocOptions, CollocationSolution, GaussBasis,
};
pub use manifold::{
    canard_analysis, detect_canards, sweep_manifold, CanardIntersection, ManifoldFamily, Side,
    SweepOptions,
};
