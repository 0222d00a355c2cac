//! Desk-scale verification of the width spectrum of the projective
//! plane.
//!
//! Four strands, each checkable against an independent route:
//!
//! * [`combinatorics`] — exact integer arithmetic for the closed-form
//!   width table and the parity-constrained length-spectrum count;
//! * [`poly`] — the antipodally invariant polynomial family, its fixed
//!   monomial bases, and transverse root counting on great circles;
//! * [`integral_geometry`] — Monte-Carlo length and mass estimators
//!   built on the great-circle intersection count, degree-bound audits,
//!   and supremum scans over the sweep-coefficient sphere;
//! * [`curves`] — explicit level-set tracing on a geodesic grid, the
//!   length oracle for the estimator;
//! * [`ellipsoid`] — axial geodesics on triaxial ellipsoids, Newton
//!   calibration to prescribed lengths, and a constrained geodesic
//!   integrator as a cross-check.
//!
//! All floating-point machinery is generic over the scalar via
//! [`Real`]; the aliases below fix `f64` (the width used by the CLI
//! and the test suite) and `f32`.

pub mod combinatorics;
pub mod curves;
pub mod ellipsoid;
pub mod geom;
pub mod integral_geometry;
pub mod poly;
pub mod real;

pub use real::Real;

pub type SweepPolynomialF64 = poly::SweepPolynomial<f64>;
pub type SweepPolynomialF32 = poly::SweepPolynomial<f32>;
pub type TestPolynomialF64 = poly::TestPolynomial<f64>;
pub type TestPolynomialF32 = poly::TestPolynomial<f32>;
pub type CroftonEstimateF64 = integral_geometry::CroftonEstimate<f64>;
pub type CroftonEstimateF32 = integral_geometry::CroftonEstimate<f32>;
pub type BezoutAuditF64 = integral_geometry::BezoutAudit<f64>;
pub type SupMassReportF64 = integral_geometry::SupMassReport<f64>;
pub type TracedCurveF64 = curves::TracedCurve<f64>;
pub type TracedCurveF32 = curves::TracedCurve<f32>;
pub type EllipsoidParamsF64 = ellipsoid::EllipsoidParams<f64>;
pub type EllipsoidParamsF32 = ellipsoid::EllipsoidParams<f32>;
pub type LengthVectorF64 = ellipsoid::LengthVector<f64>;
pub type CalibrationF64 = ellipsoid::Calibration<f64>;
pub type GeodesicStateF64 = ellipsoid::GeodesicState<f64>;
pub type SpectrumEntryF64 = combinatorics::SpectrumEntry<f64>;
