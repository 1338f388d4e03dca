//! Dimer-model laboratory: Temperleyan regions, exact tiling samplers, height functions,
//! continuum Green's functions and moment formulas, and Gaussian free field checks.

pub mod enumerate;
pub mod experiment;
pub mod gff;
pub mod greens;
pub mod height;
pub mod lattice;
pub mod moments;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod stats;
