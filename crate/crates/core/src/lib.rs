//! Stability analysis of completely integrable systems through their
//! Hamilton–Poisson realizations.
//!
//! A model is a vector field `X` on `Rⁿ` with `n − 1` first integrals. The
//! first `n − 2` act as Casimirs, the last one as Hamiltonian, and
//! `X = (−ν)⋆(∇C₁∧…∧∇C_{n−1})` for a rescaling function `ν`. The crate finds
//! and classifies equilibria, evaluates the stability invariant 𝓘 and checks
//! it against the linearization, the restricted Hessian, diffeomorphism
//! invariance and the periods of nearby orbits.

pub mod builtin;
pub mod calculus;
pub mod diffeo;
pub mod equilibria;
pub mod error;
pub mod expr;
pub mod invariant;
pub mod linalg;
pub mod model;
pub mod multilinear;
pub mod orbits;
pub mod tolerances;

pub use builtin::{make_builtin, BuiltinId};
pub use equilibria::{classify, Classification, EquilibriumRecord};
pub use error::{Error, Result};
pub use expr::{Expression, Params};
pub use invariant::{analyze, compute_invariant, InvariantReport, Verdict};
pub use model::{build_model, ModelSpec, SystemModel};
pub use tolerances::Tolerances;
