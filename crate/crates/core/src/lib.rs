//! Exact combinatorics of polarized nodal curves.
//!
//! A nodal curve with smooth components is modelled by its dual multigraph,
//! decorated with the genus of each component. On top of that the crate
//! computes:
//!
//! - numerical invariants of the curve and its subcurves ([`curve`]),
//! - polarizations, the λ-vector and the O_C-stability window ([`polarization`]),
//! - the combinatorial data of depth-one sheaves and their Δ-invariant ([`sheaf`]),
//! - stability of O_C and of rank-one sheaves ([`stability`]),
//! - minimal-path systems and the subcurve family used to certify goodness ([`pathsys`]),
//! - goodness verdicts and conjecture probes ([`goodness`]),
//! - balanced line bundles ([`balanced`]),
//! - reproducible search campaigns ([`search`]).
//!
//! All arithmetic is exact: rationals are [`num_rational::BigRational`].

pub mod balanced;
pub mod curve;
pub mod error;
pub mod goodness;
pub mod pathsys;
pub mod polarization;
pub mod rational;
pub mod search;
pub mod sheaf;
pub mod stability;

pub use crate::balanced::MultidegreeBundle;
pub use crate::curve::{CurveClass, CurveGraph, Subcurve};
pub use crate::error::{Error, Result};
pub use crate::goodness::{GoodnessStatus, GoodnessVerdict};
pub use crate::pathsys::{AjFamily, PathSystem};
pub use crate::polarization::{LambdaVector, Polarization, StabilityPolytope};
pub use crate::rational::Rational;
pub use crate::sheaf::SheafDatum;
pub use crate::stability::StabilityVerdict;
