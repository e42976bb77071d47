//! Shape optimization against ray-approximated sound pressure.
//!
//! Starting from a triangulated sphere, the pipeline repeatedly proposes
//! small random displacements for every vertex, scores each local simplex
//! configuration by casting rays from a monopole source and counting
//! microphone-plane hits, folds those scores into a QUBO matrix over
//! one-hot mutation-choice bits, and applies the minimum-energy assignment
//! found by a pluggable solver (exhaustive, simulated annealing, or a
//! remote sampler). See the `optimizer` module for the iteration loop.

pub mod acoustics;
pub mod mesh;
pub mod optimizer;
pub mod qubo;
pub mod rng;
pub mod solver;

pub use acoustics::{Microphone, Monopole, PartialLossTable, Ray, Scene};
pub use mesh::{generate_sphere_mesh, triangulate, Mesh, Simplex, Vertex};
pub use optimizer::{optimize, MutationSet, OptimizerParams, RunHistory, SearchMode};
pub use qubo::{Configuration, IsingInstance, QuboInstance};
pub use solver::{solve, Backend, SolveRequest, SolveResult, SolverSettings};
