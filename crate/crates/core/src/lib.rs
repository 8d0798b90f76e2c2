//! Numerical toolkit for a three-time-scale phantom bursting system.
//!
//! The model couples two planar FitzHugh-Nagumo type oscillators, a fast
//! secretor driven by a slow regulator, and produces mixed-mode oscillations:
//! pulsatile episodes, a quasi-steady surge and a pause of small oscillations
//! organized by a folded singularity.  The crate provides:
//!
//! * the model, its fold geometry, and structural hypothesis checks;
//! * every reduced vector field used in the analysis, with blow-up charts;
//! * folded-singularity classification, the way-in/way-out function and
//!   rotation-sector prediction, and the global contraction/expansion
//!   constants;
//! * a stiff adaptive implicit integrator with dense output and section
//!   event detection;
//! * trajectory segmentation into pulse/surge/pause phases and return-map
//!   based periodic orbit location;
//! * a Gauss-collocation BVP solver used for slow-manifold sweeps, secondary
//!   canard detection and pseudo-arclength continuation of periodic orbits.

#![allow(
    clippy::needless_range_loop,
    clippy::excessive_precision,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::type_complexity,
    clippy::single_match,
    clippy::too_many_arguments
)]

pub mod bvp;
pub mod charts;
pub mod cubics;
pub mod error;
pub mod folded;
pub mod geometry;
pub mod hypotheses;
pub mod integrate;
pub mod linalg;
pub mod mmo;
pub mod params;
pub mod quad;
pub mod reductions;
pub mod sections;

pub use error::{Error, Result};
pub use geometry::{geometry, FoldGeometry};
pub use hypotheses::{check_hypotheses, HypothesisReport};
pub use params::{eval_full_rhs, ParameterSet, State4};
pub use reductions::{build_field, Field, FieldExtras, FieldTag, VectorField};
