//! Numerical experiments on the curvature of quantization bundles.
//!
//! The crate covers linear symplectic algebra, the Bargmann–Fock model of
//! `C^n`, Kähler quantization of the round sphere with its Hermitian
//! projector and Toeplitz operators, the quantized Schrödinger flow with its
//! parallel transport, and a symbol identity on a slice of Teichmüller space.

pub mod error;
pub mod numerics;
pub mod poly;
pub mod schrodinger;
pub mod bargmann;
pub mod sphere;
pub mod symplectic;
pub mod teichmuller;

pub use error::{Error, Result};
