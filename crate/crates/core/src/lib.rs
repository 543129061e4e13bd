//! Numerical analysis of Hamiltonian Hopf bifurcations (1:−1 resonance) in
//! symmetric Hamiltonian families.

pub mod branches;
pub mod canonical;
pub mod dynamics;
pub mod error;
pub mod family;
pub mod linear;
pub mod mat;
pub mod models;
pub mod normalform;
pub mod pipeline;
pub mod poly;
pub mod reduction;
pub mod selftest;
pub mod tol;

pub use error::{HopfError, Result};
pub use tol::Tolerances;
