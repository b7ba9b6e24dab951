//! Simulation and numerical verification of the biased adjacent walk on the simplex.

pub mod coupling;
pub mod distributions;
pub mod hydro;
pub mod mixing;
pub mod process;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod spectral;
pub mod stats;
