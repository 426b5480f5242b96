//! Desk-scale computational dynamics of automorphisms of compact complex
//! tori: exact spectral algebra for cohomology actions, a Fourier calculus
//! of smooth forms, super-potential evaluation, Green-current iteration and
//! entropy/Lyapunov verification.

pub mod cohomology;
pub mod covector;
pub mod entropy;
pub mod error;
pub mod forms;
pub mod green;
pub mod matrix;
pub mod spectral;
pub mod superpot;
pub mod torus;

pub use error::{Error, Result};
