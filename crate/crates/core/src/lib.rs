//! Numerical laboratory for localized index theory on circle and torus
//! fibers: classical symbol calculus, zeta-regularized traces with
//! meromorphic continuation, fixed-point-localized residues, Toeplitz
//! indices and the trace formulas of foliated dynamical systems, each
//! cross-checked against an independent spectral oracle on truncated
//! Fourier bases.

pub mod error;
pub mod harmonics;
pub mod linalg;
pub mod symbol;
pub mod symbol2d;
pub mod engine;
pub mod zeta;
pub mod equivariant;
pub mod foliated;
pub mod pairing;
pub mod scenario;

pub use error::{Error, Result};
