//! Spectral solver for Sturm-Liouville operators in σ-form on metric trees.

pub mod argument;
pub mod boundary_inverse;
pub mod charfn;
pub mod error;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod pipeline;
pub mod potential;
pub mod propagator;
pub mod quadrature;
pub mod sampling;
pub mod scalar;
pub mod transition;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Tree = tree::MetricTree<f64>;
pub type Potential = potential::TreePotential<f64>;
pub type EdgePotential = potential::EdgePotential<f64>;
pub type Complex = num_complex::Complex<f64>;
