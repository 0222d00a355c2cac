//! The invariant polynomial family swept over the projective plane.
//!
//! Members have the shape `f(x,y) + z g(x,y)` with `f` even of degree
//! at most `2d` and `g` odd of degree at most `2d - 1`, so every member
//! takes equal values at antipodal points and its zero set descends to
//! the quotient. The module owns the fixed monomial ordering, point
//! evaluation, restriction to great circles, and transverse root
//! counting on those circles.

use serde::Serialize;
use thiserror::Error;

use crate::geom::{self, Vec3};
use crate::real::{r64, rint, Real};

/// Largest supported degree parameter; keeps power tables on the stack.
pub const MAX_DEGREE: u32 = 31;
const POW_TABLE: usize = 2 * MAX_DEGREE as usize + 1;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PolyError {
    #[error("degree parameter {0} outside 1..={MAX_DEGREE}")]
    BadDegree(u32),
    #[error("coefficient vector has length {got}, basis needs {expected}")]
    CoeffLength { expected: usize, got: usize },
    #[error("circle normal must be unit length (|xi| deviates by {0:.2e})")]
    NonUnitNormal(f64),
}

/// Fixed-order monomial basis of the invariant space for one degree
/// parameter: even exponent pairs first, then the odd pairs that get a
/// factor of `z`. Within each part, ordering is by total degree and
/// then by descending `x` exponent, which places the constant in slot
/// one and `x^2` in slot two.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MonomialBasis {
    d: u32,
    even: Vec<(u32, u32)>,
    odd: Vec<(u32, u32)>,
}

fn exponent_pairs(parity: u32, degree_cap: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for deg in 0..=degree_cap {
        if deg % 2 != parity {
            continue;
        }
        for i in (0..=deg).rev() {
            out.push((i, deg - i));
        }
    }
    out
}

/// Build the basis for degree parameter `d >= 1`. The even part has
/// `(d+1)^2` monomials, the odd part `d(d+1)`, totalling `D(d)`.
pub fn build_basis(d: u32) -> Result<MonomialBasis, PolyError> {
    if d == 0 || d > MAX_DEGREE {
        return Err(PolyError::BadDegree(d));
    }
    Ok(MonomialBasis {
        d,
        even: exponent_pairs(0, 2 * d),
        odd: exponent_pairs(1, 2 * d - 1),
    })
}

impl MonomialBasis {
    #[inline]
    pub fn d(&self) -> u32 {
        self.d
    }

    /// Total dimension `D(d) = (d+1)(2d+1)`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.even.len() + self.odd.len()
    }

    pub fn even(&self) -> &[(u32, u32)] {
        &self.even
    }

    pub fn odd(&self) -> &[(u32, u32)] {
        &self.odd
    }

    /// Slot of the even monomial `x^i y^j` in the coefficient vector.
    pub fn even_index(&self, i: u32, j: u32) -> Option<usize> {
        self.even.iter().position(|&e| e == (i, j))
    }

    /// Slot of the odd monomial `z x^i y^j` in the coefficient vector.
    pub fn odd_index(&self, i: u32, j: u32) -> Option<usize> {
        self.odd.iter().position(|&e| e == (i, j)).map(|k| k + self.even.len())
    }
}

/// A member of the invariant family: degree parameter plus a
/// coefficient vector in the fixed basis ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPolynomial<R> {
    basis: MonomialBasis,
    coeffs: Vec<R>,
}

impl<R: Real> SweepPolynomial<R> {
    pub fn new(d: u32, coeffs: Vec<R>) -> Result<Self, PolyError> {
        let basis = build_basis(d)?;
        if coeffs.len() != basis.dim() {
            return Err(PolyError::CoeffLength {
                expected: basis.dim(),
                got: coeffs.len(),
            });
        }
        Ok(Self { basis, coeffs })
    }

    /// Zero polynomial, for incremental construction in tests and the CLI.
    pub fn zero(d: u32) -> Result<Self, PolyError> {
        let basis = build_basis(d)?;
        let coeffs = vec![R::zero(); basis.dim()];
        Ok(Self { basis, coeffs })
    }

    #[inline]
    pub fn d(&self) -> u32 {
        self.basis.d
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[R] {
        &self.coeffs
    }

    /// Set the coefficient of the even monomial `x^i y^j`.
    pub fn set_even(&mut self, i: u32, j: u32, c: R) {
        let k = self.basis.even_index(i, j).expect("even monomial in basis");
        self.coeffs[k] = c;
    }

    /// Set the coefficient of the odd monomial `z x^i y^j`.
    pub fn set_odd(&mut self, i: u32, j: u32, c: R) {
        let k = self.basis.odd_index(i, j).expect("odd monomial in basis");
        self.coeffs[k] = c;
    }
}

/// Polynomial on `R^3` restrictable to great circles of the unit
/// sphere. Implemented by [`SweepPolynomial`] and, for validation
/// against curves with closed-form lengths, by [`TestPolynomial`].
pub trait SpherePoly<R: Real>: Sync {
    fn eval(&self, q: Vec3<R>) -> R;

    /// Euclidean gradient in the ambient space.
    fn grad(&self, q: Vec3<R>) -> Vec3<R>;

    /// Bound for the trigonometric degree of restrictions to great
    /// circles; drives the root-counting sample density.
    fn trig_degree(&self) -> u32;

    /// Largest absolute coefficient; estimators reject the zero polynomial.
    fn max_coeff(&self) -> R;
}

impl<R: Real> SpherePoly<R> for SweepPolynomial<R> {
    fn eval(&self, q: Vec3<R>) -> R {
        let [x, y, z] = q;
        let deg = 2 * self.basis.d as usize;
        // Power tables built by repeated multiplication: negating an
        // input flips signs exactly, which makes eval(q) == eval(-q)
        // bit-for-bit for every member of the family.
        let mut xp = [R::one(); POW_TABLE];
        let mut yp = [R::one(); POW_TABLE];
        for k in 1..=deg {
            xp[k] = xp[k - 1] * x;
            yp[k] = yp[k - 1] * y;
        }
        let ne = self.basis.even.len();
        let mut f = R::zero();
        for (c, &(i, j)) in self.coeffs[..ne].iter().zip(&self.basis.even) {
            f += *c * xp[i as usize] * yp[j as usize];
        }
        let mut g = R::zero();
        for (c, &(i, j)) in self.coeffs[ne..].iter().zip(&self.basis.odd) {
            g += *c * xp[i as usize] * yp[j as usize];
        }
        f + z * g
    }

    fn grad(&self, q: Vec3<R>) -> Vec3<R> {
        let [x, y, z] = q;
        let deg = 2 * self.basis.d as usize;
        let mut xp = [R::one(); POW_TABLE];
        let mut yp = [R::one(); POW_TABLE];
        for k in 1..=deg {
            xp[k] = xp[k - 1] * x;
            yp[k] = yp[k - 1] * y;
        }
        let ne = self.basis.even.len();
        let mut fx = R::zero();
        let mut fy = R::zero();
        for (c, &(i, j)) in self.coeffs[..ne].iter().zip(&self.basis.even) {
            if i > 0 {
                fx += *c * rint::<R>(i as u64) * xp[i as usize - 1] * yp[j as usize];
            }
            if j > 0 {
                fy += *c * rint::<R>(j as u64) * xp[i as usize] * yp[j as usize - 1];
            }
        }
        let mut g = R::zero();
        let mut gx = R::zero();
        let mut gy = R::zero();
        for (c, &(i, j)) in self.coeffs[ne..].iter().zip(&self.basis.odd) {
            g += *c * xp[i as usize] * yp[j as usize];
            if i > 0 {
                gx += *c * rint::<R>(i as u64) * xp[i as usize - 1] * yp[j as usize];
            }
            if j > 0 {
                gy += *c * rint::<R>(j as u64) * xp[i as usize] * yp[j as usize - 1];
            }
        }
        [fx + z * gx, fy + z * gy, g]
    }

    fn trig_degree(&self) -> u32 {
        2 * self.basis.d
    }

    fn max_coeff(&self) -> R {
        self.coeffs.iter().fold(R::zero(), |m, c| m.max(c.abs()))
    }
}

/// General quadratic in `(x, y, z)` for validating the estimators
/// against curves with closed-form lengths (great circles, latitude
/// circles). Not antipodally invariant in general, so it is kept out
/// of the sweepout-parameter APIs, which accept [`SweepPolynomial`]
/// only.
#[derive(Debug, Clone, PartialEq)]
pub struct TestPolynomial<R> {
    /// Coefficients of `[1, x, y, z, x^2, xy, xz, y^2, yz, z^2]`.
    coeffs: [R; 10],
}

impl<R: Real> TestPolynomial<R> {
    pub fn from_coeffs(coeffs: [R; 10]) -> Self {
        Self { coeffs }
    }

    /// The linear form `ax + by + cz + k`.
    pub fn linear(a: R, b: R, c: R, k: R) -> Self {
        let mut coeffs = [R::zero(); 10];
        coeffs[0] = k;
        coeffs[1] = a;
        coeffs[2] = b;
        coeffs[3] = c;
        Self { coeffs }
    }

    /// Zero set on the sphere is the equator `z = 0`.
    pub fn equator() -> Self {
        Self::linear(R::zero(), R::zero(), R::one(), R::zero())
    }

    /// Zero set on the sphere is the latitude circle at colatitude
    /// `colat`, of circumference `2 pi sin(colat)`.
    pub fn latitude(colat: R) -> Self {
        Self::linear(R::zero(), R::zero(), R::one(), -colat.cos())
    }

    pub fn coeffs(&self) -> &[R; 10] {
        &self.coeffs
    }
}

impl<R: Real> SpherePoly<R> for TestPolynomial<R> {
    fn eval(&self, q: Vec3<R>) -> R {
        let [x, y, z] = q;
        let c = &self.coeffs;
        c[0] + c[1] * x
            + c[2] * y
            + c[3] * z
            + c[4] * x * x
            + c[5] * x * y
            + c[6] * x * z
            + c[7] * y * y
            + c[8] * y * z
            + c[9] * z * z
    }

    fn grad(&self, q: Vec3<R>) -> Vec3<R> {
        let [x, y, z] = q;
        let c = &self.coeffs;
        let two = r64::<R>(2.0);
        [
            c[1] + two * c[4] * x + c[5] * y + c[6] * z,
            c[2] + c[5] * x + two * c[7] * y + c[8] * z,
            c[3] + c[6] * x + c[8] * y + two * c[9] * z,
        ]
    }

    fn trig_degree(&self) -> u32 {
        let lin = self.coeffs[1..4].iter().any(|c| *c != R::zero());
        let quad = self.coeffs[4..].iter().any(|c| *c != R::zero());
        match (quad, lin) {
            (true, _) => 2,
            (false, true) => 1,
            (false, false) => 0,
        }
    }

    fn max_coeff(&self) -> R {
        self.coeffs.iter().fold(R::zero(), |m, c| m.max(c.abs()))
    }
}

/// Restriction of a polynomial to the great circle normal to `xi`,
/// parametrized by arc length through the deterministic frame of
/// [`geom::orthonormal_frame`]. A trigonometric polynomial of degree
/// at most [`SpherePoly::trig_degree`].
#[derive(Clone)]
pub struct CircleRestriction<'a, R, F: ?Sized> {
    poly: &'a F,
    xi: Vec3<R>,
    u: Vec3<R>,
    v: Vec3<R>,
}

/// Restrict `poly` to the great circle normal to the unit vector `xi`.
pub fn restrict_to_circle<R: Real, F: SpherePoly<R> + ?Sized>(
    poly: &F,
    xi: Vec3<R>,
) -> Result<CircleRestriction<'_, R, F>, PolyError> {
    let dev = (geom::norm(xi) - R::one()).abs();
    if dev > r64::<R>(1e-12) {
        return Err(PolyError::NonUnitNormal(dev.to_f64().unwrap_or(f64::NAN)));
    }
    let (u, v) = geom::orthonormal_frame(xi);
    Ok(CircleRestriction { poly, xi, u, v })
}

impl<R: Real, F: SpherePoly<R> + ?Sized> CircleRestriction<'_, R, F> {
    #[inline]
    pub fn xi(&self) -> Vec3<R> {
        self.xi
    }

    /// Point `u cos(theta) + v sin(theta)` on the circle.
    #[inline]
    pub fn point(&self, theta: R) -> Vec3<R> {
        let (s, c) = theta.sin_cos();
        self.point_cs(c, s)
    }

    #[inline]
    fn point_cs(&self, c: R, s: R) -> Vec3<R> {
        [
            self.u[0] * c + self.v[0] * s,
            self.u[1] * c + self.v[1] * s,
            self.u[2] * c + self.v[2] * s,
        ]
    }

    #[inline]
    pub fn eval(&self, theta: R) -> R {
        self.poly.eval(self.point(theta))
    }

    #[inline]
    fn eval_cs(&self, c: R, s: R) -> R {
        self.poly.eval(self.point_cs(c, s))
    }

    pub fn trig_degree(&self) -> u32 {
        self.poly.trig_degree()
    }
}

/// How unresolved contact between the curve and the sampling circle
/// is classified: touchings or crossing pairs that cannot be separated
/// above the resolution floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TangencyPolicy {
    /// Report contact as [`Degeneracy::Tangency`]; samplers redraw the
    /// circle. Contact configurations have measure zero, so redraws
    /// terminate almost surely.
    #[default]
    Reject,
    /// Let unresolved contact contribute zero crossings.
    Ignore,
}

/// Degenerate configurations the root counter refuses to classify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum Degeneracy {
    #[error("restriction vanishes identically on the circle")]
    IdenticallyZero,
    #[error("tangential or unresolved contact on the circle")]
    Tangency,
}

/// Cells narrower than this that still cannot be certified
/// crossing-free count as unresolved contact.
const CONTACT_FLOOR: f64 = 1e-6;

/// Count transverse sign changes of the restriction over one full turn.
///
/// Dense sampling at `2 * (32 * trig_degree + 64)` points, then
/// recursive bisection of every cell that cannot be certified
/// crossing-free: a trigonometric polynomial of degree `n` bounded by
/// `M` has derivative bounded by `n M`, so the zero-free intervals
/// around the endpoints cover a cell of width `w` whenever
/// `|f(a)| + |f(b)| >= n M w`. Subdivision therefore isolates every
/// crossing and every crossing pair wider than [`CONTACT_FLOOR`].
/// Floor-width cells that still cannot be certified and do not hug an
/// isolated crossing are unresolved contact (true tangencies,
/// sub-floor pairs) and classified per policy. The count is even: a
/// continuous function on a circle changes sign an even number of
/// times.
pub fn count_circle_roots<R: Real, F: SpherePoly<R> + ?Sized>(
    r: &CircleRestriction<'_, R, F>,
    policy: TangencyPolicy,
) -> Result<u32, Degeneracy> {
    let degree = r.trig_degree().max(1);
    let cells = 2 * (32 * degree + 64) as usize;
    let step = R::TAU() / rint::<R>(cells as u64);

    // cos/sin by rotation recurrence; the drift over a few thousand
    // double-precision rotations is irrelevant at the contact floor
    let (rot_s, rot_c) = step.sin_cos();
    let mut c = R::one();
    let mut s = R::zero();
    let mut values = Vec::with_capacity(cells);
    let mut max_abs = R::zero();
    for _ in 0..cells {
        let val = r.eval_cs(c, s);
        max_abs = max_abs.max(val.abs());
        values.push(val);
        let (nc, ns) = (c * rot_c - s * rot_s, s * rot_c + c * rot_s);
        c = nc;
        s = ns;
    }

    if max_abs < r64::<R>(1e-12) {
        return Err(Degeneracy::IdenticallyZero);
    }
    if values.iter().any(|v| *v == R::zero()) {
        // a sample sitting exactly on the curve cannot be signed
        return Err(Degeneracy::Tangency);
    }

    // sampling at several times the degree keeps the grid maximum
    // within a fraction of a percent of the true sup; 2% covers it
    let slope_bound = rint::<R>(degree as u64) * max_abs * r64::<R>(1.02);

    let mut crossings: Vec<R> = Vec::new();
    let mut suspects: Vec<R> = Vec::new();
    for j in 0..cells {
        let a = step * rint::<R>(j as u64);
        let b = step * rint::<R>(j as u64 + 1);
        scan_cell(
            r,
            a,
            values[j],
            b,
            values[(j + 1) % cells],
            slope_bound,
            48,
            &mut crossings,
            &mut suspects,
        )?;
    }

    // floor cells bordering an isolated crossing inherit one tiny
    // endpoint value from it and are benign; anything else unresolved
    // at the floor is genuine contact
    let near = r64::<R>(2.0 * CONTACT_FLOOR);
    for sus in &suspects {
        let benign = crossings.iter().any(|c| {
            let d = (*c - *sus).abs();
            d.min(R::TAU() - d) <= near
        });
        if !benign {
            match policy {
                TangencyPolicy::Reject => return Err(Degeneracy::Tangency),
                TangencyPolicy::Ignore => {}
            }
        }
    }
    Ok(crossings.len() as u32)
}

/// Recursive subdivision: record floor-width sign-change cells as
/// crossings and uncertified floor-width same-sign cells as suspects.
#[allow(clippy::too_many_arguments)]
fn scan_cell<R: Real, F: SpherePoly<R> + ?Sized>(
    r: &CircleRestriction<'_, R, F>,
    a: R,
    fa: R,
    b: R,
    fb: R,
    slope_bound: R,
    depth: u32,
    crossings: &mut Vec<R>,
    suspects: &mut Vec<R>,
) -> Result<(), Degeneracy> {
    let width = b - a;
    let same_sign = (fa > R::zero()) == (fb > R::zero());
    if same_sign && fa.abs() + fb.abs() >= slope_bound * width {
        return Ok(());
    }
    if width < r64::<R>(CONTACT_FLOOR) || depth == 0 {
        let mid = (a + b) * r64::<R>(0.5);
        if same_sign {
            suspects.push(mid);
        } else {
            crossings.push(mid);
        }
        return Ok(());
    }
    let m = (a + b) * r64::<R>(0.5);
    let fm = r.eval(m);
    if fm == R::zero() {
        return Err(Degeneracy::Tangency);
    }
    scan_cell(r, a, fa, m, fm, slope_bound, depth - 1, crossings, suspects)?;
    scan_cell(r, m, fm, b, fb, slope_bound, depth - 1, crossings, suspects)
}
