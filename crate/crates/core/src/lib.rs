//! Offline general caching: instances, exact solvers, the independent-set
//! reduction generators and the tools that check them end to end.

pub mod format;
pub mod graph;
pub mod harness;
pub mod model;
pub mod properties;
pub mod reductions;
pub mod solver;

pub use graph::Graph;
pub use model::{savings, validate_service, Gap, Instance, Page, Policy, Request, Service};
pub use reductions::{reduce, Model, ReductionOutput};
pub use solver::{solve_brute_force, solve_exact, solve_exact_with, SolveOptions, SolveResult};
