//! Explicit level-set tracing on a geodesic sphere grid.
//!
//! Marches the zero set of a polynomial over a subdivided icosahedron,
//! locating edge crossings by bisection along great arcs and linking
//! them into closed polylines through triangle adjacency. The summed
//! great-arc length is the independent oracle against the
//! integral-geometry estimator. The base icosahedron is centrally
//! symmetric and subdivision preserves that, so antipodally invariant
//! zero sets trace to antipodally paired components.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geom::{self, Vec3};
use crate::poly::SpherePoly;
use crate::real::{r64, Real};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum TraceError {
    #[error("resolution {0} outside 1..=9")]
    BadResolution(u32),
    #[error("a grid vertex lies exactly on the curve; perturb the coefficients")]
    VertexOnCurve,
    #[error("tangential gradient {0:.3e} below 1e-8 at a crossing; the level is near-singular")]
    SmallGradient(f64),
    #[error("triangle with {0} crossing edges; under-resolved or singular level")]
    AmbiguousTriangle(usize),
    #[error("antipodal pairing is not total or not an involution")]
    InconsistentPairing,
}

/// Geodesic grid: an icosahedron subdivided `resolution` times, with
/// all vertices pushed to the unit sphere. `20 * 4^resolution`
/// triangles.
#[derive(Debug, Clone)]
pub struct SphereGrid<R> {
    pub vertices: Vec<Vec3<R>>,
    pub triangles: Vec<[u32; 3]>,
}

pub fn build_grid<R: Real>(resolution: u32) -> Result<SphereGrid<R>, TraceError> {
    if !(1..=9).contains(&resolution) {
        return Err(TraceError::BadResolution(resolution));
    }
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let raw: [[f64; 3]; 12] = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    // a fixed generic rotation keeps coordinate-plane curves (equator,
    // latitude circles, axis-aligned zero sets) away from grid
    // vertices; negation still maps the vertex set onto itself exactly
    let rot = generic_rotation();
    let mut vertices: Vec<Vec3<R>> = raw
        .iter()
        .map(|v| {
            let w = [
                rot[0][0] * v[0] + rot[0][1] * v[1] + rot[0][2] * v[2],
                rot[1][0] * v[0] + rot[1][1] * v[1] + rot[1][2] * v[2],
                rot[2][0] * v[0] + rot[2][1] * v[1] + rot[2][2] * v[2],
            ];
            geom::normalize([r64(w[0]), r64(w[1]), r64(w[2])])
        })
        .collect();
    let mut triangles: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..resolution {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3<R>>| -> u32 {
            let key = (a.min(b), a.max(b));
            if let Some(&m) = midpoints.get(&key) {
                return m;
            }
            let m = geom::normalize(geom::add(verts[a as usize], verts[b as usize]));
            let idx = verts.len() as u32;
            verts.push(m);
            midpoints.insert(key, idx);
            idx
        };
        for &[a, b, c] in &triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        triangles = next;
    }
    Ok(SphereGrid { vertices, triangles })
}

/// Rodrigues rotation about a fixed skew axis.
fn generic_rotation() -> [[f64; 3]; 3] {
    let axis = {
        let a = [0.21_f64, 0.47, 0.86];
        let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        [a[0] / n, a[1] / n, a[2] / n]
    };
    let angle = 0.37_f64;
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    let [x, y, z] = axis;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

/// How a traced component relates to its image under negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Pairing {
    /// The component maps onto itself.
    SelfAntipodal,
    /// The component maps onto another component (by index).
    With(usize),
    /// No component matches; the zero set is not antipodally symmetric.
    Unpaired,
}

/// The zero set of a polynomial on the sphere as closed polylines of
/// unit vectors, with great-arc lengths and the antipodal pairing of
/// components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracedCurve<R> {
    /// Closed polylines; the segment from the last vertex back to the
    /// first is implicit.
    pub components: Vec<Vec<Vec3<R>>>,
    pub component_lengths: Vec<R>,
    pub total_length_sphere: R,
    pub antipodal_pairing: Vec<Pairing>,
    pub resolution: u32,
}

/// Trace `{poly = 0}` on the sphere at the given grid resolution.
pub fn trace_level_set<R: Real, F: SpherePoly<R> + ?Sized>(
    poly: &F,
    resolution: u32,
) -> Result<TracedCurve<R>, TraceError> {
    let grid = build_grid::<R>(resolution)?;
    let values: Vec<R> = grid.vertices.par_iter().map(|&v| poly.eval(v)).collect();
    if values.iter().any(|v| *v == R::zero()) {
        return Err(TraceError::VertexOnCurve);
    }
    let positive: Vec<bool> = values.iter().map(|v| *v > R::zero()).collect();

    // adjacency: each undirected edge belongs to exactly two triangles
    let mut edge_tris: HashMap<(u32, u32), [u32; 2]> = HashMap::new();
    for (t, tri) in grid.triangles.iter().enumerate() {
        for e in 0..3 {
            let a = tri[e];
            let b = tri[(e + 1) % 3];
            let key = (a.min(b), a.max(b));
            match edge_tris.get_mut(&key) {
                None => {
                    edge_tris.insert(key, [t as u32, u32::MAX]);
                }
                Some(pair) => pair[1] = t as u32,
            }
        }
    }

    // crossings on sign-change edges, located by bisection on the arc
    let crossing_edges: Vec<(u32, u32)> = {
        let mut keys: Vec<(u32, u32)> = edge_tris
            .keys()
            .copied()
            .filter(|&(a, b)| positive[a as usize] != positive[b as usize])
            .collect();
        keys.sort_unstable();
        keys
    };
    let located: Vec<Result<Vec3<R>, TraceError>> = crossing_edges
        .par_iter()
        .map(|&(ia, ib)| {
            let a = grid.vertices[ia as usize];
            let b = grid.vertices[ib as usize];
            let a_pos = positive[ia as usize];
            let (mut lo, mut hi) = (R::zero(), R::one());
            for _ in 0..60 {
                let mid = (lo + hi) * r64::<R>(0.5);
                let v = poly.eval(geom::arc_point(a, b, mid));
                if (v > R::zero()) == a_pos {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let point = geom::arc_point(a, b, (lo + hi) * r64::<R>(0.5));
            let g = poly.grad(point);
            let tangential = geom::sub(g, geom::scale(point, geom::dot(g, point)));
            let gnorm = geom::norm(tangential);
            if gnorm < r64::<R>(1e-8) {
                return Err(TraceError::SmallGradient(gnorm.to_f64().unwrap_or(0.0)));
            }
            Ok(point)
        })
        .collect();
    let mut crossing_points = Vec::with_capacity(located.len());
    for r in located {
        crossing_points.push(r?);
    }
    // each triangle must cut the curve on exactly zero or two edges
    let mut tri_crossings: Vec<Vec<usize>> = vec![Vec::new(); grid.triangles.len()];
    for (i, &edge) in crossing_edges.iter().enumerate() {
        for &t in &edge_tris[&edge] {
            tri_crossings[t as usize].push(i);
        }
    }
    for c in &tri_crossings {
        if c.len() != 0 && c.len() != 2 {
            return Err(TraceError::AmbiguousTriangle(c.len()));
        }
    }

    // link crossings into closed polylines: crossing edges are the
    // nodes, triangles with two crossings the links, so the graph is
    // 2-regular and decomposes into cycles
    let mut visited = vec![false; crossing_edges.len()];
    let mut components: Vec<Vec<Vec3<R>>> = Vec::new();
    for start in 0..crossing_edges.len() {
        if visited[start] {
            continue;
        }
        let mut polyline = Vec::new();
        let mut edge = start;
        let mut tri = edge_tris[&crossing_edges[start]][0];
        loop {
            visited[edge] = true;
            polyline.push(crossing_points[edge]);
            let pair = &tri_crossings[tri as usize];
            let next_edge = if pair[0] == edge { pair[1] } else { pair[0] };
            let tris = edge_tris[&crossing_edges[next_edge]];
            let next_tri = if tris[0] == tri { tris[1] } else { tris[0] };
            edge = next_edge;
            tri = next_tri;
            if edge == start {
                break;
            }
        }
        components.push(polyline);
    }

    let component_lengths: Vec<R> = components
        .iter()
        .map(|c| {
            (0..c.len())
                .map(|i| geom::arc_angle(c[i], c[(i + 1) % c.len()]))
                .fold(R::zero(), |a, b| a + b)
        })
        .collect();
    let total_length_sphere = component_lengths.iter().fold(R::zero(), |a, b| a + *b);

    // pair components with their antipodal images; crossings of a
    // symmetric zero set land on negated edges exactly, so matches are
    // tight relative to the grid spacing
    let tol = r64::<R>(1e-6);
    let nearest_component = |target: Vec3<R>| -> (R, usize) {
        let mut best = (R::infinity(), usize::MAX);
        for (ci, cand) in components.iter().enumerate() {
            for p in cand {
                let dd = geom::dist(*p, target);
                if dd < best.0 {
                    best = (dd, ci);
                }
            }
        }
        best
    };
    let antipodal_pairing: Vec<Pairing> = components
        .iter()
        .enumerate()
        .map(|(k, comp)| {
            let mut partner = usize::MAX;
            for probe in [comp[0], comp[comp.len() / 2]] {
                let (dist, ci) = nearest_component(geom::neg(probe));
                if dist > tol || (partner != usize::MAX && partner != ci) {
                    return Pairing::Unpaired;
                }
                partner = ci;
            }
            if partner == k {
                Pairing::SelfAntipodal
            } else {
                Pairing::With(partner)
            }
        })
        .collect();

    Ok(TracedCurve {
        components,
        component_lengths,
        total_length_sphere,
        antipodal_pairing,
        resolution,
    })
}

/// Projective mass of a traced symmetric curve: half the sphere total.
/// The quotient identifies paired components and halves self-antipodal
/// ones, so both cases divide the total by two.
pub fn rp2_mass_from_trace<R: Real>(curve: &TracedCurve<R>) -> Result<R, TraceError> {
    let pairing = &curve.antipodal_pairing;
    for (k, p) in pairing.iter().enumerate() {
        match *p {
            Pairing::Unpaired => return Err(TraceError::InconsistentPairing),
            Pairing::SelfAntipodal => {}
            Pairing::With(c) => {
                if c >= pairing.len() || pairing[c] != Pairing::With(k) {
                    return Err(TraceError::InconsistentPairing);
                }
            }
        }
    }
    Ok(curve.total_length_sphere * r64::<R>(0.5))
}
