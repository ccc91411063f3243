//! Metrics on points, pairs and atomic measures; assignment and transport
//! solvers; projections and couplings onto the permutation set of a sample.

mod assignment;
mod bl;
mod metric;
mod ot;
mod symset;

pub use assignment::{
    count_optimal_assignments, sample_optimal_assignment, solve_assignment, AssignmentResult,
    EXACT_TIE_MAX_N,
};
pub use bl::{bl_distance, bl_distance_pairs, bl_program};
pub use metric::{pair_metric, tilde, tilde_metric, BaseMetric, PairGround, PairMode};
pub use ot::{
    transport_program, wasserstein, wasserstein_atoms, wasserstein_pairs, wasserstein_pairs_lp,
    TransportPlan, ASSIGNMENT_MAX_ATOMS, PLAN_TOLERANCE,
};
pub use symset::{
    atoms_from_measure, couple_max, couple_min, has_sample_marginals, project_to_symset,
    representative_permutation, Coupling, Projection, SymElement, SymSet,
    SYMSET_ENUMERATION_MAX_N, TIE_TOLERANCE,
};
