//! Split-step spectral solver and diagnostic toolkit for the defocusing
//! nonlinear Schrodinger equation with a potential confining one direction:
//!
//! ```text
//! i du/dt + 1/2 (laplacian u) = V(x) u + |u|^(2 sigma) u,   (x, y) in R x R^(d-1)
//! ```
//!
//! The x direction is expanded in eigenfunctions of -1/2 d2/dx2 + V + C0,
//! the free y directions in Fourier modes; time stepping is Strang splitting.
//! Diagnostics cover conserved quantities, vector-field bounds, scattering
//! behaviour, Morawetz-type monotone quantities, and functional inequalities.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod eigenbasis;
pub mod error;
pub mod field;
pub mod grid;
pub mod inequalities;
pub mod output;
pub mod potential;
pub mod propagator;
pub mod scattering;
mod tridiag;
pub mod vectorfields;

pub use error::{Error, Result, Warning};
