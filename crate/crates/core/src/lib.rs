//! Simulated-bifurcation solvers for Ising problems.
//!
//! The crate bundles:
//!
//! - [`ising`]: Ising/QUBO models, energy evaluation, field embedding.
//! - [`encoders`]: max-cut and 0/1-knapsack translation to Ising form.
//! - [`engine`]: the ballistic/discrete (optionally heated) bifurcation
//!   solver with multi-restart orchestration.
//! - [`fixed`]: saturating fixed-point arithmetic and word-format derivation
//!   for the hardware-style backend.
//! - [`oracles`]: exact brute force, simulated annealing, and knapsack DP
//!   references.
//! - [`cost`]: the analytic cycle-count model for row/column/block unrolled
//!   matrix-vector kernels.
//! - [`io`]: instance parsers and model serialization.
//! - [`bench`]: success-probability / time-to-target metrics and the
//!   benchmark harness behind the CLI.

pub mod bench;
pub mod cost;
pub mod encoders;
pub mod engine;
pub mod fixed;
pub mod io;
pub mod ising;
pub mod oracles;

pub use encoders::{Encoding, KnapsackInstance, MaxCutInstance};
pub use engine::{solve, solve_encoding, SbRunner, SolveOutput, SolverConfig, Variant};
pub use ising::{IsingModel, QuboModel, SpinVector};
