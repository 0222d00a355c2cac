//! Small fixed-size vector helpers for points on the unit sphere.

use crate::real::Real;

pub type Vec3<R> = [R; 3];

#[inline]
pub fn dot<R: Real>(a: Vec3<R>, b: Vec3<R>) -> R {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<R: Real>(a: Vec3<R>, b: Vec3<R>) -> Vec3<R> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn add<R: Real>(a: Vec3<R>, b: Vec3<R>) -> Vec3<R> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<R: Real>(a: Vec3<R>, b: Vec3<R>) -> Vec3<R> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<R: Real>(a: Vec3<R>, s: R) -> Vec3<R> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn neg<R: Real>(a: Vec3<R>) -> Vec3<R> {
    [-a[0], -a[1], -a[2]]
}

#[inline]
pub fn norm2<R: Real>(a: Vec3<R>) -> R {
    dot(a, a)
}

#[inline]
pub fn norm<R: Real>(a: Vec3<R>) -> R {
    norm2(a).sqrt()
}

#[inline]
pub fn normalize<R: Real>(a: Vec3<R>) -> Vec3<R> {
    scale(a, norm(a).recip())
}

#[inline]
pub fn dist<R: Real>(a: Vec3<R>, b: Vec3<R>) -> R {
    norm(sub(a, b))
}

/// Angle between two unit vectors, stable for nearly parallel and
/// nearly antipodal inputs.
#[inline]
pub fn arc_angle<R: Real>(a: Vec3<R>, b: Vec3<R>) -> R {
    norm(cross(a, b)).atan2(dot(a, b))
}

/// Point on the great arc from `a` to `b` (both unit), normalized
/// chordal interpolation. Monotone in `t`, so sign bisection along an
/// edge is well defined.
#[inline]
pub fn arc_point<R: Real>(a: Vec3<R>, b: Vec3<R>, t: R) -> Vec3<R> {
    normalize(add(scale(a, R::one() - t), scale(b, t)))
}

/// Deterministic orthonormal frame `(u, v)` spanning the plane normal
/// to the unit vector `xi`: `u` is the Gram-Schmidt projection of the
/// coordinate axis with the smallest `|xi|` component (smallest index
/// on ties), and `v = xi x u`.
pub fn orthonormal_frame<R: Real>(xi: Vec3<R>) -> (Vec3<R>, Vec3<R>) {
    let mut axis = 0;
    for m in 1..3 {
        if xi[m].abs() < xi[axis].abs() {
            axis = m;
        }
    }
    let mut e = [R::zero(); 3];
    e[axis] = R::one();
    let u = normalize(sub(e, scale(xi, dot(e, xi))));
    let v = cross(xi, u);
    (u, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_orthonormal() {
        let xi = normalize([0.3_f64, -0.4, 0.85]);
        let (u, v) = orthonormal_frame(xi);
        assert!(dot(u, xi).abs() < 1e-14);
        assert!(dot(v, xi).abs() < 1e-14);
        assert!(dot(u, v).abs() < 1e-14);
        assert!((norm(u) - 1.0).abs() < 1e-14);
        assert!((norm(v) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn frame_tie_breaks_toward_smaller_index() {
        // |xi_1| = |xi_3| = 0: the first axis wins the tie.
        let (u, _) = orthonormal_frame([0.0_f64, 1.0, 0.0]);
        assert_eq!(u, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn arc_angle_matches_known_values() {
        let a = [1.0_f64, 0.0, 0.0];
        let b = [0.0_f64, 1.0, 0.0];
        assert!((arc_angle(a, b) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((arc_angle(a, neg(a)) - std::f64::consts::PI).abs() < 1e-15);
    }
}
