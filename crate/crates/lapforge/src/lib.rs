//! Linear-assignment toolkit: exact solvers, a doubly-stochastic baseline,
//! and a learnable bipartite-graph solver with dataset generation, training,
//! and benchmarking.

pub mod assignment;
pub mod bench;
pub mod autodiff;
pub mod datagen;
pub mod error;
pub mod graph;
pub mod loss;
pub mod model;
pub mod solvers;
pub mod stream;
pub mod trainer;

pub use assignment::{
    greedy_discretize, precision, total_cost, validate_permutation, AssignmentMatrix, CostMatrix,
    ScoreMatrix,
};
pub use error::{LapError, Result};
