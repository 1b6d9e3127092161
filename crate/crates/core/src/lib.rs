//! Recursive embeddings of finite ℓ_p point sets: scaled Mazur maps,
//! Lipschitz decompositions built by recursive refinement, a recursive
//! approximate near-neighbor structure, and localized bi-Lipschitz
//! certificates.

pub mod ann;
pub mod error;
pub mod l2embed;
pub mod lipschitz;
pub mod mazur;
pub mod metric;
pub mod par;
pub mod rng;

pub use error::{Error, Result};
