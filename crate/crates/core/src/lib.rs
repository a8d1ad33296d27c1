//! Flag and Grassmann varieties in several coordinate models, the polynomial
//! systems of optimization problems over them, closed-form critical points,
//! and a total-degree homotopy solver that counts critical points
//! independently.

pub mod combinat;
pub mod critpoints;
pub mod error;
pub mod homotopy;
pub mod numkit;
pub mod polysys;
pub mod random;
pub mod reproduce;
pub mod varieties;

pub use error::{Error, Result};
