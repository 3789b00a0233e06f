//! Higher-order Fourier analysis over `F_p^n` at desk scale.
//!
//! Non-classical polynomials, polynomial factors and their atoms,
//! consistency sets of linear systems, Gowers norms and analytic rank,
//! regularity decompositions, colored patterns and a subspace tester.

pub mod analysis;
pub mod caps;
pub mod consistency;
pub mod error;
pub mod factors;
pub mod field;
pub mod forms;
pub mod io;
pub mod linalg;
pub mod ncpoly;
pub mod par;
pub mod patterns;
pub mod regularity;
pub mod tester;

pub use caps::Caps;
pub use error::{HofaError, Result};
