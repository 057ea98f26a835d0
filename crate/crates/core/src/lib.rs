//! Mixed finite element solver for the elliptic Cauchy problem in 2D.
//!
//! The library discretizes the second-order equation
//! `div(A grad u) + mu u = f` on a triangulated polygon where both the
//! trace and the conormal flux of `u` are prescribed on one part of the
//! boundary (the accessible part) and nothing is prescribed on the rest.
//! Such data assignments are ill posed, so the discrete systems are
//! regularized: a saddle-point formulation couples a continuous Lagrange
//! field and a Raviart-Thomas flux through a discontinuous multiplier,
//! and a reduced least-squares formulation eliminates the multiplier.
//! A defect-correction loop connects the two, solving the saddle-point
//! problem through repeated reduced solves.
//!
//! The crate also ships a small experiment harness (and a matching CLI)
//! that reproduces convergence studies on a classical ill-posed model
//! problem on a rectangle, with optional multiplicative data noise.

pub mod error;
pub mod quadrature;
pub(crate) mod linalg;
pub mod mesh;
pub mod spaces;
pub mod assembly;
pub mod solvers;
pub mod metrics;
pub mod experiments;

pub use error::{Error, Result};
