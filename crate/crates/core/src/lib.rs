//! Quantum Hamilton-Jacobi dynamics in one dimension.
//!
//! The c-number quantum Hamilton-Jacobi equation is solved as a power series
//! in hbar (classical principal function plus the first-order transport
//! correction), or exactly for quadratic Hamiltonians. The resulting
//! generating functions build propagators, evolve wave functions and
//! transport Wigner/Husimi distributions; every path can be checked against
//! an independent split-step Schrodinger solver.

pub mod classical;
pub mod cli;
pub mod error;
pub mod fourier;
pub mod generating;
pub mod grid;
pub mod heisenberg;
pub mod io;
pub mod potential;
pub mod phase_space;
pub mod propagation;
pub mod series;
pub mod state;

pub use error::{QhjError, Result};
pub use grid::Grid1D;
pub use potential::{integrate_trajectory, is_quadratic, ClassicalTrajectory, PotentialSpec};
pub use state::{l2_distance, make_gaussian, WaveFunction};
