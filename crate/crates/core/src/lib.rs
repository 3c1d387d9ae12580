//! Real phaseless least squares: `min_x ‖|Ax| − b‖²`.
//!
//! The objective is piecewise quadratic over the `2^{m−1}` sign patterns up to
//! global sign, so the global minimum is found by projecting `b` onto each cone
//! of the phaseless surface `K_A = {|Ax|}` and keeping the nearest points.

pub mod certificates;
mod cone;
pub mod error;
pub mod geometry;
pub mod io;
mod linalg;
pub mod problem;
mod serde_util;
pub mod solver;
pub mod stability;

pub use certificates::{
    certify_unique, complement_property, gaussian_scp_bound, near_surface_uniqueness, poly_screen,
    poly_screen_value, scp_sigma, Certificate, CertificateKind, Verdict,
};
pub use error::{Error, Result};
pub use geometry::{
    best_approximations, cone_project, membership, nonconvexity_witness, surface_distance,
    BestApproximationSet, ConeProjection, Membership, NonconvexityWitness,
};
pub use linalg::RANK_RTOL;
pub use problem::{
    abs_measure, canonicalize, objective, quotient_distance, whiten, Observation, SenseMatrix, SignClass,
    SignPattern, SolutionSet, ENUMERATION_CAP,
};
pub use solver::{fixed_point_iterate, fixed_point_map, grid_oracle, solve_global, verify_fixed_point};
pub use stability::{
    convex_region_scan, in_unique_region, instability_witness, nonunique_seed_search, segment_max_step,
    solution_set_distance, unique_projection, StabilityReport, WitnessPair,
};
