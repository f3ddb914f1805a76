//! Pinching superoperators on symmetrically normed matrix spaces.
//!
//! The library works over complex n x n matrices equipped with a unitarily
//! invariant norm induced by a symmetric norming function of the singular
//! values.  Around the pinching operator `P(x) = sum_i p_i x p_i` of a family
//! of mutually orthogonal projections it provides:
//!
//! * exact and certified-lower-bound norms for superoperators,
//! * the isotropy groups of the conjugation action `u . P = L_u P L_{u*}`,
//! * tangent projections, local cross sections and covering fibers of the
//!   unitary orbit of `P`,
//! * quotient Finsler metrics, curve lengths and distance bounds on the orbit,
//! * displacement experiments along orbits of normal operators.

pub mod error;
pub mod finsler;
pub mod linalg;
pub mod normal;
pub mod norms;
pub mod orbit;
pub mod pinching;
pub mod tol;

pub use error::{Error, Result};
