//! Differential invariants of parabolic surfaces and plane curves under
//! affine groups: truncated series, parabolic jets, prolongation, closed-form
//! invariants, power-series normalization, recurrence relations and the
//! cylinder/cone/tangential classification of developable surfaces.

pub mod classify;
pub mod jetpoly;
pub mod invariants;
pub mod jets;
pub mod normalize;
pub mod linalg;
pub mod prolong;
pub mod recurrence;
pub mod sampling;
pub mod scalar;
pub mod series;
pub mod verify;

pub use jetpoly::{JetPolynomial, JetRational, Var};
pub use jets::{Dir, JetError, JetFunction, JetPoint, ParabolicJet};
pub use scalar::{Dual, Scalar, ScalarKind, Q};
pub use series::{AffineTransform2, AffineTransform3, AnySeries, Series, SeriesError, SeriesJson, TruncatedSeries1, TruncatedSeries2};
