//! Geometry on the unit sphere with antipodal identification.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

/// Uniform random unit vector.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Angle between the axes spanned by `a` and `b`, in `[0, pi/2]`.
pub fn axis_angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let c = (a.dot(b).abs() / (a.norm() * b.norm())).min(1.0);
    c.acos()
}

/// Flips `v` into the canonical hemisphere (first nonzero coordinate
/// positive, scanning z, y, x).
pub fn canonical_axis(v: &Vector3<f64>) -> Vector3<f64> {
    for k in [2, 1, 0] {
        if v[k] > 0.0 {
            return *v;
        }
        if v[k] < 0.0 {
            return -v;
        }
    }
    *v
}

/// Orthonormal pair spanning the tangent plane at unit vector `v`.
pub fn tangent_basis(v: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if v.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = (helper - v * v.dot(&helper)).normalize();
    let e2 = v.cross(&e1);
    (e1, e2)
}

/// Vertices of a geodesic icosphere with `frequency` subdivisions per
/// icosahedron edge: `10 f^2 + 2` points. The set is centrally symmetric.
pub fn geodesic_sphere(frequency: usize) -> Vec<Vector3<f64>> {
    let f = frequency.max(1);
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let verts: Vec<Vector3<f64>> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z))
    .collect();
    let faces: [[usize; 3]; 20] = [
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
    let mut out: Vec<Vector3<f64>> = Vec::with_capacity(10 * f * f + 2);
    let mut push_unique = |p: Vector3<f64>| {
        let p = p.normalize();
        if !out.iter().any(|q| (q - p).norm() < 1e-9) {
            out.push(p);
        }
    };
    for face in faces.iter() {
        let (a, b, c) = (verts[face[0]], verts[face[1]], verts[face[2]]);
        for i in 0..=f {
            for j in 0..=(f - i) {
                let k = f - i - j;
                let p = (a * i as f64 + b * j as f64 + c * k as f64) / f as f64;
                push_unique(p);
            }
        }
    }
    out
}

/// One representative per antipodal pair, canonicalized, in input order.
pub fn unique_axes(points: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let mut out: Vec<Vector3<f64>> = Vec::with_capacity(points.len() / 2 + 1);
    for p in points {
        let c = canonical_axis(p);
        if !out.iter().any(|q| (q - c).norm() < 1e-9) {
            out.push(c);
        }
    }
    out
}
