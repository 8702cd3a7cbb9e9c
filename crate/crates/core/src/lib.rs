//! Spectral toolkit for a convex-integration construction of weak solutions
//! to stationary KdV, 3(u²)′ − u‴ = 0, on the torus T = [0, 1].
//!
//! Layers, bottom up: [`spectral`] (band-limited functions), [`lp`]
//! (Littlewood–Paley projectors), [`norms`], [`slabs`] (intermittent
//! building blocks), [`scheme`] (the iteration) and [`verify`]
//! (certificates, lemma suites and scaling sweeps). [`io`] handles
//! persistence.

pub mod io;
pub mod lp;
pub mod norms;
pub mod scheme;
pub mod slabs;
pub mod spectral;
pub mod verify;

pub use num_complex::Complex64;
pub use spectral::TorusFunction;
