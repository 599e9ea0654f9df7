//! Discrete minimization of the Alt-Phillips energy on the unit ball and
//! diagnostics of the computed minimizers.
pub mod boundary;
pub mod diagnostics;
pub mod grid;
pub mod minimize;

pub use boundary::{BoundarySpec, ResolvedBoundary};
pub use diagnostics::{
    contact_fraction, default_threshold, el_residual, green_identity_check, green_identity_estimate,
    homogeneity_defect, linf_distance_to_cone, quadratic_fit, symmetric_distance, transform_field,
    transformed_residual, ConeFunction, FieldInterpolator, GreenIdentity, SymmetricDistance,
};
pub use grid::{Grid, GridField, NodeKind};
pub use minimize::{discrete_energy, minimize, Relaxation, SolveDiagnostics, Solution, SolverConfig};
