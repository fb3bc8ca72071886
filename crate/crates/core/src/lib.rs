//! Orbit spaces and stratifications of finite-dimensional orthogonal
//! representations, computed exactly over Q(√2, √3).

pub mod example;
pub mod group_rep;
pub mod matrix;
pub mod numfield;
pub mod phase;
pub mod pmatrix;
pub mod poly;
pub mod rewrite;
pub mod strata;

pub use numfield::{FieldElem, Rational};
pub use poly::{Monomial, Poly, PolyError, VarSet};
