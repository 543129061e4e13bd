//! Built-in systems: coupled charged oscillators and the SO(3) five-dimensional representation.

pub mod oscillator;
pub mod so3;
