//! Fourier-Mukai (Nahm) transform of lattice unitary connections on a flat
//! four-torus, with exact cohomology and K3 lattice arithmetic.

pub mod cohomology;
pub mod config;
pub mod dolbeault;
pub mod eigen;
pub mod error;
pub mod gauge;
pub mod geometry;
pub mod k3;
pub mod linalg;
pub mod oracle;
pub mod pipeline;
pub mod transform;

pub use error::{Error, Result};
