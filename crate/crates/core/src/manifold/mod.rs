//! Model manifolds with closed-form geometry and spectra.
//!
//! The flat torus and the round sphere carry exact eigenpairs, distances and
//! volumes, so every downstream numerical claim can be checked against them.
//! Triangle meshes are supported for the manifold-level operations only.

mod basis;
mod gauss;
mod mesh;
mod net;

pub use basis::{Eigenbasis, Mode};
pub use gauss::gauss_legendre;
pub use mesh::Mesh;
pub use net::{separated_net, DistanceCoordinates, NetReport, Region};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Symmetric 2x2 tensor stored as `[h11, h12, h22]`.
pub type Sym2 = [f64; 3];

pub fn sym_det(h: &Sym2) -> f64 {
    h[0] * h[2] - h[1] * h[1]
}

pub fn sym_quad(h: &Sym2, v: [f64; 2]) -> f64 {
    h[0] * v[0] * v[0] + 2.0 * h[1] * v[0] * v[1] + h[2] * v[1] * v[1]
}

/// `O h O^T` for a 2x2 matrix `o` given row-major.
pub fn sym_conjugate(h: &Sym2, o: &[[f64; 2]; 2]) -> Sym2 {
    let m = [[h[0], h[1]], [h[1], h[2]]];
    let mut t = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            t[i][j] = o[i][0] * m[0][j] + o[i][1] * m[1][j];
        }
    }
    let mut r = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = t[i][0] * o[j][0] + t[i][1] * o[j][1];
        }
    }
    [r[0][0], 0.5 * (r[0][1] + r[1][0]), r[1][1]]
}

/// Extreme generalized eigenvalues of the pencil `(a, b)`, i.e. the range of
/// `a(x,x)/b(x,x)` over nonzero `x`.
pub fn sym_pencil_range(a: &Sym2, b: &Sym2) -> (f64, f64) {
    // det(a - t b) = 0
    let qa = sym_det(b);
    let qb = -(a[0] * b[2] + a[2] * b[0] - 2.0 * a[1] * b[1]);
    let qc = sym_det(a);
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
    let t1 = (-qb - disc) / (2.0 * qa);
    let t2 = (-qb + disc) / (2.0 * qa);
    (t1.min(t2), t1.max(t2))
}

/// A point given by intrinsic coordinates.
///
/// Torus charts use `(x1, x2)` in `[0, l1) x [0, l2)`; sphere charts use
/// colatitude and longitude `(theta, phi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Point {
    Chart { u: f64, v: f64 },
    Mesh { face: usize, bary: [f64; 3] },
}

impl Point {
    pub fn chart(u: f64, v: f64) -> Self {
        Point::Chart { u, v }
    }

    pub fn uv(&self) -> [f64; 2] {
        match *self {
            Point::Chart { u, v } => [u, v],
            Point::Mesh { .. } => [f64::NAN, f64::NAN],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "kebab-case")]
pub enum ManifoldKind {
    FlatTorus2d { l1: f64, l2: f64 },
    RoundSphere2d { radius: f64 },
    Mesh2d(Mesh),
}

/// Curvature, diameter and injectivity bounds of the bounded-geometry class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryBounds {
    /// Bound on curvature derivatives.
    pub r: f64,
    /// Diameter bound.
    pub d: f64,
    /// Lower bound on the injectivity radius.
    pub i0: f64,
    /// Radius of the data ball.
    pub r0: f64,
    /// Sectional curvature bound.
    pub k: f64,
    pub n: usize,
}

impl GeometryBounds {
    /// Largest admissible data-ball radius, `min(i0/2, pi/(2 sqrt K), 1)`.
    pub fn r0_limit(&self) -> f64 {
        let curv = if self.k > 0.0 { PI / (2.0 * self.k.sqrt()) } else { f64::INFINITY };
        (self.i0 / 2.0).min(curv).min(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return invalid(format!("dimension n = {} must be at least 2", self.n));
        }
        if !(self.r0 > 0.0 && self.r0 < self.r0_limit()) {
            return invalid(format!(
                "r0 = {} violates r0 < min(i0/2, pi/(2 sqrt K), 1) = {}",
                self.r0,
                self.r0_limit()
            ));
        }
        Ok(())
    }
}

/// Quadrature nodes and positive weights for a region.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub region: RegionTag,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RegionTag {
    Whole,
    Ball { center: Point, radius: f64 },
    Cylinder { center: Point, radius: f64, half_width: f64 },
}

impl QuadratureGrid {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Manifold descriptor: geometry kind, base point and default grid resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelManifold {
    #[serde(flatten)]
    pub kind: ManifoldKind,
    pub base_point: Point,
    pub grid_resolution: usize,
}

impl ModelManifold {
    pub fn torus(l1: f64, l2: f64) -> Self {
        ModelManifold {
            kind: ManifoldKind::FlatTorus2d { l1, l2 },
            base_point: Point::chart(0.0, 0.0),
            grid_resolution: 128,
        }
    }

    pub fn sphere(radius: f64) -> Self {
        ModelManifold {
            kind: ManifoldKind::RoundSphere2d { radius },
            base_point: Point::chart(PI / 2.0, 0.0),
            grid_resolution: 64,
        }
    }

    pub fn mesh(mesh: Mesh) -> Self {
        ModelManifold {
            kind: ManifoldKind::Mesh2d(mesh),
            base_point: Point::Mesh { face: 0, bary: [1.0 / 3.0; 3] },
            grid_resolution: 0,
        }
    }

    pub fn with_base_point(mut self, p: Point) -> Self {
        self.base_point = p;
        self
    }

    pub fn dim(&self) -> usize {
        2
    }

    pub fn is_mesh(&self) -> bool {
        matches!(self.kind, ManifoldKind::Mesh2d(_))
    }

    /// Closed-form volume (area) for the analytic kinds; lumped area for meshes.
    pub fn volume(&self) -> f64 {
        match &self.kind {
            ManifoldKind::FlatTorus2d { l1, l2 } => l1 * l2,
            ManifoldKind::RoundSphere2d { radius } => 4.0 * PI * radius * radius,
            ManifoldKind::Mesh2d(m) => m.area(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.kind {
            ManifoldKind::FlatTorus2d { l1, l2 } => 0.5 * (l1 * l1 + l2 * l2).sqrt(),
            ManifoldKind::RoundSphere2d { radius } => PI * radius,
            ManifoldKind::Mesh2d(m) => m.diameter_estimate(),
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        match &self.kind {
            ManifoldKind::FlatTorus2d { l1, l2 } => 0.5 * l1.min(*l2),
            ManifoldKind::RoundSphere2d { radius } => PI * radius,
            ManifoldKind::Mesh2d(m) => m.injectivity_estimate(),
        }
    }

    pub fn curvature_bound(&self) -> f64 {
        match &self.kind {
            ManifoldKind::FlatTorus2d { .. } => 0.0,
            ManifoldKind::RoundSphere2d { radius } => 1.0 / (radius * radius),
            ManifoldKind::Mesh2d(_) => f64::NAN,
        }
    }

    /// Geometry bounds with the given data-ball radius.
    pub fn bounds(&self, r0: f64) -> GeometryBounds {
        GeometryBounds {
            r: 0.0,
            d: self.diameter(),
            i0: self.injectivity_radius(),
            r0,
            k: self.curvature_bound(),
            n: self.dim(),
        }
    }

    pub fn normalize(&self, x: &Point) -> Point {
        match (&self.kind, *x) {
            (ManifoldKind::FlatTorus2d { l1, l2 }, Point::Chart { u, v }) => {
                Point::chart(u.rem_euclid(*l1), v.rem_euclid(*l2))
            }
            (ManifoldKind::RoundSphere2d { .. }, Point::Chart { .. }) => {
                let e = sphere_unit(x);
                sphere_from_unit(e)
            }
            _ => *x,
        }
    }

    /// Exact geodesic distance (torus quotient metric, great circles) or a
    /// graph estimate on meshes.
    pub fn geodesic_distance(&self, x: &Point, y: &Point) -> f64 {
        match &self.kind {
            ManifoldKind::FlatTorus2d { l1, l2 } => {
                let [a, b] = x.uv();
                let [c, d] = y.uv();
                let dx = wrap(a - c, *l1);
                let dy = wrap(b - d, *l2);
                (dx * dx + dy * dy).sqrt()
            }
            ManifoldKind::RoundSphere2d { radius } => {
                let p = sphere_unit(x);
                let q = sphere_unit(y);
                let dot = p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
                let c = cross(p, q);
                let s = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
                radius * s.atan2(dot)
            }
            ManifoldKind::Mesh2d(m) => m.distance(x, y),
        }
    }

    /// Eigenpairs `(lambda_j, phi_j)` for `j = 0..count`.
    pub fn eigenpairs(&self, count: usize) -> Result<Eigenbasis> {
        Eigenbasis::new(self, count)
    }

    /// Whole-manifold quadrature at `resolution` (nodes per unit of the
    /// natural chart direction).
    pub fn quadrature(&self, resolution: usize) -> QuadratureGrid {
        let res = resolution.max(2);
        match &self.kind {
            ManifoldKind::FlatTorus2d { l1, l2 } => {
                let n1 = res;
                let n2 = ((res as f64) * l2 / l1).round().max(2.0) as usize;
                let h1 = l1 / n1 as f64;
                let h2 = l2 / n2 as f64;
                let mut nodes = Vec::with_capacity(n1 * n2);
                for i in 0..n1 {
                    for j in 0..n2 {
                        nodes.push(Point::chart((i as f64 + 0.5) * h1, (j as f64 + 0.5) * h2));
                    }
                }
                let weights = vec![h1 * h2; nodes.len()];
                QuadratureGrid { nodes, weights, region: RegionTag::Whole }
            }
            ManifoldKind::RoundSphere2d { radius } => {
                let (xs, ws) = gauss_legendre(res);
                let nphi = 2 * res;
                let dphi = 2.0 * PI / nphi as f64;
                let mut nodes = Vec::with_capacity(res * nphi);
                let mut weights = Vec::with_capacity(res * nphi);
                for (x, w) in xs.iter().zip(&ws) {
                    let theta = x.acos();
                    for k in 0..nphi {
                        nodes.push(Point::chart(theta, (k as f64 + 0.5) * dphi));
                        weights.push(radius * radius * w * dphi);
                    }
                }
                QuadratureGrid { nodes, weights, region: RegionTag::Whole }
            }
            ManifoldKind::Mesh2d(m) => m.lumped_quadrature(),
        }
    }

    /// Riemannian exponential map at `p` in the orthonormal frame of
    /// [`ModelManifold::frame`].
    pub fn exp_map(&self, p: &Point, v: [f64; 2]) -> Result<Point> {
        match &self.kind {
            ManifoldKind::FlatTorus2d { .. } => {
                let [a, b] = p.uv();
                Ok(self.normalize(&Point::chart(a + v[0], b + v[1])))
            }
            ManifoldKind::RoundSphere2d { radius } => {
                let (e0, e1, e2) = sphere_frame(p);
                let r = (v[0] * v[0] + v[1] * v[1]).sqrt();
                if r == 0.0 {
                    return Ok(*p);
                }
                let ang = r / radius;
                let (s, c) = ang.sin_cos();
                let d = [v[0] / r, v[1] / r];
                let mut q = [0.0; 3];
                for i in 0..3 {
                    q[i] = c * e0[i] + s * (d[0] * e1[i] + d[1] * e2[i]);
                }
                Ok(sphere_from_unit(q))
            }
            ManifoldKind::Mesh2d(_) => Err(crate::Error::Unsupported("exponential map")),
        }
    }

    /// Inverse of [`ModelManifold::exp_map`] inside the injectivity radius.
    pub fn log_map(&self, p: &Point, x: &Point) -> Result<[f64; 2]> {
        match &self.kind {
            ManifoldKind::FlatTorus2d { l1, l2 } => {
                let [a, b] = p.uv();
                let [c, d] = x.uv();
                Ok([wrap(c - a, *l1), wrap(d - b, *l2)])
            }
            ManifoldKind::RoundSphere2d { radius } => {
                let (e0, e1, e2) = sphere_frame(p);
                let q = sphere_unit(x);
                let c = dot3(q, e0).clamp(-1.0, 1.0);
                let t = [dot3(q, e1), dot3(q, e2)];
                let tn = (t[0] * t[0] + t[1] * t[1]).sqrt();
                if tn == 0.0 {
                    return Ok([0.0, 0.0]);
                }
                let ang = tn.atan2(c);
                Ok([radius * ang * t[0] / tn, radius * ang * t[1] / tn])
            }
            ManifoldKind::Mesh2d(_) => Err(crate::Error::Unsupported("logarithm map")),
        }
    }

    /// Metric tensor in Riemannian normal coordinates at `p`, evaluated at `v`.
    pub fn normal_metric(&self, v: [f64; 2]) -> Result<Sym2> {
        match &self.kind {
            ManifoldKind::FlatTorus2d { .. } => Ok([1.0, 0.0, 1.0]),
            ManifoldKind::RoundSphere2d { radius } => {
                let r = (v[0] * v[0] + v[1] * v[1]).sqrt();
                if r < 1e-14 {
                    return Ok([1.0, 0.0, 1.0]);
                }
                let x = r / radius;
                let f = (x.sin() / x).powi(2);
                let (a, b) = (v[0] / r, v[1] / r);
                Ok([a * a + f * b * b, (1.0 - f) * a * b, b * b + f * a * a])
            }
            ManifoldKind::Mesh2d(_) => Err(crate::Error::Unsupported("normal-coordinate metric")),
        }
    }
}

pub(crate) fn wrap(d: f64, l: f64) -> f64 {
    let r = d.rem_euclid(l);
    if r > 0.5 * l {
        r - l
    } else {
        r
    }
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn sphere_unit(x: &Point) -> [f64; 3] {
    let [t, p] = x.uv();
    let (st, ct) = t.sin_cos();
    let (sp, cp) = p.sin_cos();
    [st * cp, st * sp, ct]
}

pub(crate) fn sphere_from_unit(q: [f64; 3]) -> Point {
    let n = dot3(q, q).sqrt();
    let z = (q[2] / n).clamp(-1.0, 1.0);
    let theta = z.acos();
    let phi = q[1].atan2(q[0]).rem_euclid(2.0 * PI);
    Point::chart(theta, phi)
}

/// Position and orthonormal tangent frame (theta, phi directions) at `p`.
fn sphere_frame(p: &Point) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let [t, ph] = p.uv();
    let (st, ct) = t.sin_cos();
    let (sp, cp) = ph.sin_cos();
    ([st * cp, st * sp, ct], [ct * cp, ct * sp, -st], [-sp, cp, 0.0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_half_period() {
        let m = ModelManifold::torus(2.0 * PI, 2.0 * PI);
        let d = m.geodesic_distance(&Point::chart(0.0, 0.0), &Point::chart(PI, 0.0));
        assert!((d - PI).abs() < 1e-14);
    }

    #[test]
    fn sphere_antipodal() {
        let m = ModelManifold::sphere(1.0);
        let d = m.geodesic_distance(&Point::chart(0.3, 1.0), &Point::chart(PI - 0.3, 1.0 + PI));
        assert!((d - PI).abs() < 1e-12);
    }

    #[test]
    fn exp_log_roundtrip() {
        for m in [ModelManifold::torus(2.0 * PI, 2.0 * PI), ModelManifold::sphere(1.3)] {
            let p = Point::chart(1.1, 0.4);
            for v in [[0.3, -0.2], [0.0, 0.7], [-0.5, 0.1]] {
                let x = m.exp_map(&p, v).unwrap();
                let w = m.log_map(&p, &x).unwrap();
                assert!((v[0] - w[0]).abs() < 1e-12 && (v[1] - w[1]).abs() < 1e-12);
                let d = m.geodesic_distance(&p, &x);
                assert!((d - (v[0] * v[0] + v[1] * v[1]).sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pencil_range_identity() {
        let (a, b) = sym_pencil_range(&[2.0, 0.0, 3.0], &[1.0, 0.0, 1.0]);
        assert!((a - 2.0).abs() < 1e-14 && (b - 3.0).abs() < 1e-14);
    }

    #[test]
    fn quadrature_volume() {
        let t = ModelManifold::torus(2.0 * PI, 3.0);
        assert!((t.quadrature(64).total() / t.volume() - 1.0).abs() < 1e-12);
        let s = ModelManifold::sphere(2.0);
        assert!((s.quadrature(32).total() / s.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bounds_check() {
        let t = ModelManifold::torus(2.0 * PI, 2.0 * PI);
        assert!(t.bounds(0.9).validate().is_ok());
        assert!(t.bounds(1.0).validate().is_err());
        let s = ModelManifold::sphere(1.0);
        assert!(s.bounds(0.5).validate().is_ok());
    }
}
