//! Integral-geometry estimators on the unit sphere.
//!
//! The length of a curve on the sphere is one quarter of the integral,
//! over all great circles, of the number of intersections with the
//! curve. Sampling circle normals uniformly turns that into a
//! Monte-Carlo estimator `pi * E[count]`; masses in the projective
//! plane are the antipodal halves. The same counting machinery audits
//! the degree bound `count <= 4d` and scans for the supremum of the
//! mass over the sweep-coefficient sphere.
//!
//! Every sample draws from its own PRNG stream derived from
//! `(seed, sample index)`, so parallel and serial runs produce
//! identical reports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geom::{self, Vec3};
use crate::poly::{
    count_circle_roots, restrict_to_circle, SpherePoly, SweepPolynomial, TangencyPolicy,
};
use crate::real::{r64, rint, Real};

/// Retry cap per sample when the drawn circle is degenerate for the
/// current curve (tangency or a circle inside the zero set).
pub const MAX_REDRAWS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EstimatorError {
    #[error(
        "sample {sample}: {cap} degenerate redraws exhausted; the curve is structurally degenerate"
    )]
    RetriesExhausted { sample: u64, cap: u64 },
    #[error("the zero polynomial has no zero-set curve")]
    ZeroPolynomial,
    #[error("{0} must be positive")]
    ZeroCount(&'static str),
}

/// How circle normals are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum CircleSampling {
    /// Independent uniform draws, one PRNG stream per sample.
    #[default]
    MonteCarlo,
    /// Spherical Fibonacci lattice: deterministic quasi-uniform normals
    /// for reproducible tables. The reported standard error keeps the
    /// i.i.d. formula and is only indicative in this mode.
    FibonacciLattice,
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// PRNG stream for one sample: same seed, per-index stream.
pub(crate) fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform point on the unit sphere (Marsaglia's rejection method).
pub(crate) fn draw_unit_sphere<R: Real>(rng: &mut ChaCha8Rng) -> Vec3<R> {
    loop {
        let x1: f64 = rng.random_range(-1.0..1.0);
        let x2: f64 = rng.random_range(-1.0..1.0);
        let s = x1 * x1 + x2 * x2;
        if s >= 1.0 {
            continue;
        }
        let f = 2.0 * (1.0 - s).sqrt();
        return geom::normalize([r64(x1 * f), r64(x2 * f), r64(1.0 - 2.0 * s)]);
    }
}

fn fibonacci_point<R: Real>(i: u64, n: u64) -> Vec3<R> {
    let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
    let rho = (1.0 - z * z).max(0.0).sqrt();
    let phi = std::f64::consts::TAU * ((i as f64 / golden).fract());
    geom::normalize([r64(rho * phi.cos()), r64(rho * phi.sin()), r64(z)])
}

/// Uniform point on the unit sphere of `R^dim` (normalized Gaussians).
pub(crate) fn draw_unit_coeffs<R: Real>(rng: &mut ChaCha8Rng, dim: usize) -> Vec<R> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| r64(x / n)).collect();
        }
    }
}

/// Intersection count for one sample index, redrawing the circle on
/// degeneracy up to [`MAX_REDRAWS`] times. Returns `(count, redraws)`.
fn sample_count<R: Real, F: SpherePoly<R> + ?Sized>(
    poly: &F,
    seed: u64,
    index: u64,
    n_samples: u64,
    sampling: CircleSampling,
) -> Result<(u32, u64), EstimatorError> {
    let mut rng = stream_rng(seed, index);
    let mut xi: Vec3<R> = match sampling {
        CircleSampling::MonteCarlo => draw_unit_sphere(&mut rng),
        CircleSampling::FibonacciLattice => fibonacci_point(index, n_samples),
    };
    let mut redraws = 0;
    loop {
        let restriction = restrict_to_circle(poly, xi).expect("sampled normals are unit");
        match count_circle_roots(&restriction, TangencyPolicy::Reject) {
            Ok(c) => return Ok((c, redraws)),
            Err(_) if redraws < MAX_REDRAWS => {
                redraws += 1;
                xi = draw_unit_sphere(&mut rng);
            }
            Err(_) => {
                return Err(EstimatorError::RetriesExhausted {
                    sample: index,
                    cap: MAX_REDRAWS,
                })
            }
        }
    }
}

/// Length estimate for the zero set of a polynomial on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CroftonEstimate<R> {
    pub mean_count: R,
    pub n_samples: u64,
    pub degenerate_redraws: u64,
    /// `pi * mean_count` on the sphere; already halved in reports from
    /// [`mass_rp2`].
    pub length_estimate: R,
    pub standard_error: R,
}

/// Estimate the length of `{poly = 0}` on the unit sphere from
/// `n_samples` great circles.
pub fn crofton_length_sphere<R: Real, F: SpherePoly<R> + ?Sized>(
    poly: &F,
    n_samples: u64,
    seed: u64,
) -> Result<CroftonEstimate<R>, EstimatorError> {
    crofton_length_sphere_sampled(poly, n_samples, seed, CircleSampling::MonteCarlo)
}

/// [`crofton_length_sphere`] with an explicit circle-sampling mode.
pub fn crofton_length_sphere_sampled<R: Real, F: SpherePoly<R> + ?Sized>(
    poly: &F,
    n_samples: u64,
    seed: u64,
    sampling: CircleSampling,
) -> Result<CroftonEstimate<R>, EstimatorError> {
    if n_samples == 0 {
        return Err(EstimatorError::ZeroCount("n_samples"));
    }
    if poly.max_coeff() == R::zero() {
        return Err(EstimatorError::ZeroPolynomial);
    }
    let counts: Vec<(u32, u64)> = (0..n_samples)
        .into_par_iter()
        .map(|i| sample_count(poly, seed, i, n_samples, sampling))
        .collect::<Result<_, _>>()?;

    let n = rint::<R>(n_samples);
    let mean = counts.iter().map(|&(c, _)| rint::<R>(c as u64)).fold(R::zero(), |a, b| a + b) / n;
    let var = if n_samples > 1 {
        counts
            .iter()
            .map(|&(c, _)| {
                let d = rint::<R>(c as u64) - mean;
                d * d
            })
            .fold(R::zero(), |a, b| a + b)
            / (n - R::one())
    } else {
        R::zero()
    };
    let redraws = counts.iter().map(|&(_, r)| r).sum();
    Ok(CroftonEstimate {
        mean_count: mean,
        n_samples,
        degenerate_redraws: redraws,
        length_estimate: R::PI() * mean,
        standard_error: R::PI() * (var / n).sqrt(),
    })
}

/// Mass of the descended curve in the projective plane: the sphere
/// estimate with every length field halved (the zero set is antipodally
/// symmetric, so the quotient halves its total length).
pub fn mass_rp2<R: Real>(
    poly: &SweepPolynomial<R>,
    n_samples: u64,
    seed: u64,
) -> Result<CroftonEstimate<R>, EstimatorError> {
    mass_rp2_sampled(poly, n_samples, seed, CircleSampling::MonteCarlo)
}

/// [`mass_rp2`] with an explicit circle-sampling mode.
pub fn mass_rp2_sampled<R: Real>(
    poly: &SweepPolynomial<R>,
    n_samples: u64,
    seed: u64,
    sampling: CircleSampling,
) -> Result<CroftonEstimate<R>, EstimatorError> {
    let est = crofton_length_sphere_sampled(poly, n_samples, seed, sampling)?;
    let half = r64::<R>(0.5);
    Ok(CroftonEstimate {
        length_estimate: est.length_estimate * half,
        standard_error: est.standard_error * half,
        ..est
    })
}

/// One `(polynomial, circle)` pair exceeding the degree bound. Any
/// entry indicates a counting bug, not a mathematical failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BezoutViolation<R> {
    pub poly_index: u64,
    pub circle_index: u64,
    pub count: u32,
    pub coeffs: Vec<R>,
    pub xi: Vec3<R>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AuditSample {
    pub poly_index: u64,
    pub circle_index: u64,
    pub count: u32,
    pub redraws: u64,
}

/// Result of sampling intersection counts over random members and
/// random circles: the observed maximum against the bound `4d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BezoutAudit<R> {
    pub d: u32,
    pub n_polys: u64,
    pub n_circles: u64,
    pub seed: u64,
    pub bound: u32,
    pub max_count: u32,
    pub violations: Vec<BezoutViolation<R>>,
    pub degenerate_redraws: u64,
    /// Samples whose redraw cap ran out and were skipped.
    pub skipped: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<AuditSample>>,
}

/// Sample `n_polys` random unit coefficient vectors and `n_circles`
/// circles each; record the maximum transverse-crossing count and any
/// count exceeding `4d`. Set `collect_samples` to keep the per-pair
/// counts for dumping.
pub fn bezout_audit<R: Real>(
    d: u32,
    n_polys: u64,
    n_circles: u64,
    seed: u64,
    collect_samples: bool,
) -> Result<BezoutAudit<R>, EstimatorError> {
    if n_polys == 0 {
        return Err(EstimatorError::ZeroCount("n_polys"));
    }
    if n_circles == 0 {
        return Err(EstimatorError::ZeroCount("n_circles"));
    }
    let dim = crate::poly::build_basis(d).expect("audit degree in range").dim();
    let bound = 4 * d;

    struct PolyAudit<R> {
        max_count: u32,
        redraws: u64,
        skipped: u64,
        violations: Vec<BezoutViolation<R>>,
        samples: Vec<AuditSample>,
    }

    let per_poly: Vec<PolyAudit<R>> = (0..n_polys)
        .into_par_iter()
        .map(|ip| {
            let coeffs = draw_unit_coeffs::<R>(&mut stream_rng(seed, ip), dim);
            let poly = SweepPolynomial::new(d, coeffs.clone()).expect("dim matches basis");
            let mut out = PolyAudit {
                max_count: 0,
                redraws: 0,
                skipped: 0,
                violations: Vec::new(),
                samples: Vec::new(),
            };
            for ic in 0..n_circles {
                let stream = n_polys + ip * n_circles + ic;
                let mut rng = stream_rng(seed, stream);
                let mut xi: Vec3<R> = draw_unit_sphere(&mut rng);
                let mut redraws = 0u64;
                let count = loop {
                    let restriction =
                        restrict_to_circle(&poly, xi).expect("sampled normals are unit");
                    match count_circle_roots(&restriction, TangencyPolicy::Reject) {
                        Ok(c) => break Some(c),
                        Err(_) if redraws < MAX_REDRAWS => {
                            redraws += 1;
                            xi = draw_unit_sphere(&mut rng);
                        }
                        Err(_) => break None,
                    }
                };
                out.redraws += redraws;
                match count {
                    Some(c) => {
                        out.max_count = out.max_count.max(c);
                        if c > bound {
                            out.violations.push(BezoutViolation {
                                poly_index: ip,
                                circle_index: ic,
                                count: c,
                                coeffs: coeffs.clone(),
                                xi,
                            });
                        }
                        if collect_samples {
                            out.samples.push(AuditSample {
                                poly_index: ip,
                                circle_index: ic,
                                count: c,
                                redraws,
                            });
                        }
                    }
                    None => out.skipped += 1,
                }
            }
            out
        })
        .collect();

    let mut audit = BezoutAudit {
        d,
        n_polys,
        n_circles,
        seed,
        bound,
        max_count: 0,
        violations: Vec::new(),
        degenerate_redraws: 0,
        skipped: 0,
        samples: collect_samples.then(Vec::new),
    };
    for p in per_poly {
        audit.max_count = audit.max_count.max(p.max_count);
        audit.degenerate_redraws += p.redraws;
        audit.skipped += p.skipped;
        audit.violations.extend(p.violations);
        if let Some(all) = audit.samples.as_mut() {
            all.extend(p.samples);
        }
    }
    Ok(audit)
}

/// Empirical supremum of the projective mass over the unit sphere of
/// coefficient vectors for one degree parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupMassReport<R> {
    pub d: u32,
    pub n_params: u64,
    pub n_samples_per: u64,
    pub seed: u64,
    pub refined: bool,
    /// `2 pi d`, the mass bound the scan probes.
    pub bound: R,
    pub sampled_max_mass: R,
    /// Equals `sampled_max_mass` unless refinement found more.
    pub max_mass: R,
    pub argmax_coeffs: Vec<R>,
    pub degenerate_redraws: u64,
}

/// Estimate masses for `n_params` coefficient vectors drawn uniformly
/// on the unit sphere of the coefficient space (antipodal vectors cut
/// out the same curve, so hemispherical double counting is harmless).
/// With `refine`, a steepest-ascent pass over the coordinate axes with
/// step halving tightens the empirical supremum from the best sample,
/// using common random circles so candidate comparisons are exact.
pub fn sup_mass_scan<R: Real>(
    d: u32,
    n_params: u64,
    n_samples_per: u64,
    seed: u64,
    refine: bool,
) -> Result<SupMassReport<R>, EstimatorError> {
    if n_params == 0 {
        return Err(EstimatorError::ZeroCount("n_params"));
    }
    if n_samples_per == 0 {
        return Err(EstimatorError::ZeroCount("n_samples_per"));
    }
    let dim = crate::poly::build_basis(d).expect("scan degree in range").dim();

    let estimates: Vec<(R, Vec<R>, u64)> = (0..n_params)
        .into_par_iter()
        .map(|i| {
            let coeffs = draw_unit_coeffs::<R>(&mut stream_rng(seed, i), dim);
            let poly = SweepPolynomial::new(d, coeffs.clone()).expect("dim matches basis");
            let sub_seed = splitmix64(seed ^ splitmix64(i + 1));
            mass_rp2(&poly, n_samples_per, sub_seed)
                .map(|est| (est.length_estimate, coeffs, est.degenerate_redraws))
        })
        .collect::<Result<_, _>>()?;

    let mut redraws: u64 = estimates.iter().map(|e| e.2).sum();
    let (mut best_mass, mut best_coeffs) = (R::neg_infinity(), Vec::new());
    for (mass, coeffs, _) in &estimates {
        if *mass > best_mass {
            best_mass = *mass;
            best_coeffs = coeffs.clone();
        }
    }
    let sampled_max = best_mass;
    let sampled_argmax = best_coeffs.clone();

    let mut refined_max = sampled_max;
    if refine {
        // common random circles for every candidate
        let crn_seed = splitmix64(!seed);
        let eval = |coeffs: &[R]| -> Result<(R, u64), EstimatorError> {
            let poly = SweepPolynomial::new(d, coeffs.to_vec()).expect("dim matches basis");
            let est = mass_rp2(&poly, n_samples_per, crn_seed)?;
            Ok((est.length_estimate, est.degenerate_redraws))
        };
        let (mut cur_val, r0) = eval(&best_coeffs)?;
        redraws += r0;
        let mut step = r64::<R>(0.25);
        for _ in 0..50 {
            let candidates: Vec<Vec<R>> = (0..2 * dim)
                .map(|k| {
                    let axis = k / 2;
                    let sgn = if k % 2 == 0 { R::one() } else { -R::one() };
                    let mut c = best_coeffs.clone();
                    c[axis] += sgn * step;
                    let n = c.iter().fold(R::zero(), |a, x| a + *x * *x).sqrt();
                    c.iter_mut().for_each(|x| *x /= n);
                    c
                })
                .collect();
            let scored: Vec<(R, u64)> = candidates
                .par_iter()
                .map(|c| eval(c))
                .collect::<Result<_, _>>()?;
            redraws += scored.iter().map(|s| s.1).sum::<u64>();
            let mut best_k = None;
            for (k, (val, _)) in scored.iter().enumerate() {
                if *val > cur_val && best_k.map_or(true, |(_, bv)| *val > bv) {
                    best_k = Some((k, *val));
                }
            }
            match best_k {
                Some((k, val)) => {
                    best_coeffs = candidates[k].clone();
                    cur_val = val;
                }
                None => step *= r64::<R>(0.5),
            }
        }
        refined_max = cur_val;
    }

    let (max_mass, argmax_coeffs) = if refined_max > sampled_max {
        (refined_max, best_coeffs)
    } else {
        (sampled_max, sampled_argmax)
    };
    Ok(SupMassReport {
        d,
        n_params,
        n_samples_per,
        seed,
        refined: refine,
        bound: r64::<R>(2.0) * R::PI() * rint::<R>(d as u64),
        sampled_max_mass: sampled_max,
        max_mass,
        argmax_coeffs,
        degenerate_redraws: redraws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::TestPolynomial;
    use std::f64::consts::PI;

    #[test]
    fn great_circle_length_is_exact() {
        // every generic circle meets another great circle twice, so the
        // estimator has zero variance here
        let equator = TestPolynomial::<f64>::equator();
        let est = crofton_length_sphere(&equator, 2_000, 1).unwrap();
        assert!((est.mean_count - 2.0).abs() < 1e-15);
        assert!((est.length_estimate - 2.0 * PI).abs() < 1e-12);
        assert!(est.standard_error.abs() < 1e-12);
    }

    #[test]
    fn latitude_circle_matches_closed_form() {
        let colat = PI / 3.0;
        let poly = TestPolynomial::<f64>::latitude(colat);
        let est = crofton_length_sphere(&poly, 20_000, 7).unwrap();
        let exact = 2.0 * PI * colat.sin();
        let slack = (3.0 * est.standard_error).max(0.01 * exact);
        assert!(
            (est.length_estimate - exact).abs() <= slack,
            "estimate {} vs exact {exact} (se {})",
            est.length_estimate,
            est.standard_error
        );
    }

    #[test]
    fn rp2_mass_is_exactly_half_the_sphere_length() {
        let mut p = SweepPolynomial::<f64>::zero(1).unwrap();
        p.set_even(0, 0, 1.0);
        p.set_even(2, 0, -2.0);
        let sphere = crofton_length_sphere(&p, 5_000, 11).unwrap();
        let rp2 = mass_rp2(&p, 5_000, 11).unwrap();
        assert_eq!(rp2.length_estimate, sphere.length_estimate / 2.0);
        assert_eq!(rp2.standard_error, sphere.standard_error / 2.0);
        assert_eq!(rp2.mean_count, sphere.mean_count);
    }

    #[test]
    fn circle_pair_mass_matches_closed_form() {
        // {1 - 2x^2 = 0} is two circles of radius 1/sqrt(2); projective
        // mass 2 pi / sqrt(2), safely below the d = 1 bound of 2 pi
        let mut p = SweepPolynomial::<f64>::zero(1).unwrap();
        p.set_even(0, 0, 1.0);
        p.set_even(2, 0, -2.0);
        let est = mass_rp2(&p, 20_000, 3).unwrap();
        let exact = 2.0 * PI / 2.0_f64.sqrt();
        assert!((est.length_estimate - exact).abs() <= 3.0 * est.standard_error + 0.01);
        assert!(est.length_estimate > 0.0 && est.length_estimate < 2.0 * PI);
    }

    #[test]
    fn seed_determinism_bit_for_bit() {
        let mut p = SweepPolynomial::<f64>::zero(1).unwrap();
        p.set_even(0, 0, 0.1);
        p.set_even(1, 1, 0.3);
        p.set_odd(0, 1, -0.9);
        let a = crofton_length_sphere(&p, 3_000, 99).unwrap();
        let b = crofton_length_sphere(&p, 3_000, 99).unwrap();
        assert_eq!(a, b);
        let c = crofton_length_sphere(&p, 3_000, 100).unwrap();
        assert_ne!(a.length_estimate, c.length_estimate);
    }

    #[test]
    fn lattice_mode_is_deterministic_and_consistent() {
        let equator = TestPolynomial::<f64>::equator();
        let a = crofton_length_sphere_sampled(&equator, 2_000, 5, CircleSampling::FibonacciLattice)
            .unwrap();
        let b = crofton_length_sphere_sampled(&equator, 2_000, 5, CircleSampling::FibonacciLattice)
            .unwrap();
        assert_eq!(a, b);
        assert!((a.length_estimate - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn zero_polynomial_is_rejected() {
        let p = SweepPolynomial::<f64>::zero(1).unwrap();
        assert_eq!(
            crofton_length_sphere(&p, 10, 0),
            Err(EstimatorError::ZeroPolynomial)
        );
    }

    #[test]
    fn constant_polynomial_never_crosses() {
        let mut p = SweepPolynomial::<f64>::zero(1).unwrap();
        p.set_even(0, 0, 1.0);
        let est = crofton_length_sphere(&p, 500, 2).unwrap();
        assert_eq!(est.mean_count, 0.0);
        assert_eq!(est.length_estimate, 0.0);
    }

    #[test]
    fn audit_small_grid_has_no_violations() {
        for d in [1u32, 2] {
            let audit = bezout_audit::<f64>(d, 50, 40, 21, false).unwrap();
            assert!(audit.violations.is_empty());
            assert!(audit.max_count <= 4 * d);
            assert_eq!(audit.bound, 4 * d);
            assert_eq!(audit.skipped, 0);
        }
    }

    #[test]
    fn audit_collects_samples_when_asked() {
        let audit = bezout_audit::<f64>(1, 4, 6, 1, true).unwrap();
        let samples = audit.samples.unwrap();
        assert_eq!(samples.len(), 24);
        assert!(samples.iter().all(|s| s.count % 2 == 0));
    }

    #[test]
    fn scan_respects_bound_and_determinism() {
        let a = sup_mass_scan::<f64>(1, 60, 400, 42, false).unwrap();
        let b = sup_mass_scan::<f64>(1, 60, 400, 42, false).unwrap();
        assert_eq!(a, b);
        assert!(a.max_mass <= 2.0 * PI + 0.05);
        assert_eq!(a.max_mass, a.sampled_max_mass);
    }

    #[test]
    fn refinement_never_loses_to_the_scan() {
        let plain = sup_mass_scan::<f64>(1, 20, 200, 7, false).unwrap();
        let refined = sup_mass_scan::<f64>(1, 20, 200, 7, true).unwrap();
        assert_eq!(plain.sampled_max_mass, refined.sampled_max_mass);
        assert!(refined.max_mass >= plain.max_mass);
        assert!(refined.max_mass <= refined.bound + 0.05);
    }

    #[test]
    fn zero_counts_are_usage_errors() {
        assert!(matches!(
            sup_mass_scan::<f64>(1, 0, 10, 0, false),
            Err(EstimatorError::ZeroCount(_))
        ));
        assert!(matches!(
            bezout_audit::<f64>(1, 0, 10, 0, false),
            Err(EstimatorError::ZeroCount(_))
        ));
    }
}
