use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Point, QuadratureGrid, RegionTag};
use crate::error::{invalid, Error, Result};

/// Triangulated closed surface embedded in R^3; the metric is the induced one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

#[derive(Copy, Clone, PartialEq)]
struct State {
    cost: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.partial_cmp(&self.cost).unwrap_or(Ordering::Equal).then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross_norm(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])
}

impl Mesh {
    /// Icosahedron refined `subdivisions` times and projected to a sphere.
    pub fn icosphere(radius: f64, subdivisions: usize) -> Mesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut v: Vec<[f64; 3]> = vec![
            [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
            [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
            [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
        ];
        let mut f: Vec<[usize; 3]> = vec![
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut cache = std::collections::HashMap::new();
            let mut mid = |a: usize, b: usize, v: &mut Vec<[f64; 3]>| -> usize {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    let p = v[a];
                    let q = v[b];
                    v.push([(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0]);
                    v.len() - 1
                })
            };
            let mut nf = Vec::with_capacity(f.len() * 4);
            for &[a, b, c] in &f {
                let ab = mid(a, b, &mut v);
                let bc = mid(b, c, &mut v);
                let ca = mid(c, a, &mut v);
                nf.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            f = nf;
        }
        for p in v.iter_mut() {
            let n = norm(*p);
            *p = [radius * p[0] / n, radius * p[1] / n, radius * p[2] / n];
        }
        Mesh { vertices: v, triangles: f }
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                0.5 * cross_norm(sub(self.vertices[b], self.vertices[a]), sub(self.vertices[c], self.vertices[a]))
            })
            .sum()
    }

    fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        let mut seen = std::collections::HashSet::new();
        for &[a, b, c] in &self.triangles {
            for (i, j) in [(a, b), (b, c), (c, a)] {
                if seen.insert((i.min(j), i.max(j))) {
                    let w = norm(sub(self.vertices[i], self.vertices[j]));
                    adj[i].push((j, w));
                    adj[j].push((i, w));
                }
            }
        }
        adj
    }

    /// Edge-graph shortest-path lengths from the given weighted sources.
    fn dijkstra(&self, adj: &[Vec<(usize, f64)>], sources: &[(usize, f64)]) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.vertices.len()];
        let mut heap = BinaryHeap::new();
        for &(s, c) in sources {
            if c < dist[s] {
                dist[s] = c;
                heap.push(State { cost: c, node: s });
            }
        }
        while let Some(State { cost, node }) = heap.pop() {
            if cost > dist[node] {
                continue;
            }
            for &(nb, w) in &adj[node] {
                let nc = cost + w;
                if nc < dist[nb] {
                    dist[nb] = nc;
                    heap.push(State { cost: nc, node: nb });
                }
            }
        }
        dist
    }

    pub fn position(&self, x: &Point) -> [f64; 3] {
        let mut p = [0.0; 3];
        for (i, c) in self.barycentric_weights(x) {
            for k in 0..3 {
                p[k] += c * self.vertices[i][k];
            }
        }
        p
    }

    pub(crate) fn barycentric_weights(&self, x: &Point) -> Vec<(usize, f64)> {
        match *x {
            Point::Mesh { face, bary } => {
                let t = self.triangles[face];
                vec![(t[0], bary[0]), (t[1], bary[1]), (t[2], bary[2])]
            }
            Point::Chart { .. } => Vec::new(),
        }
    }

    /// Graph distance with straight segments from `x` and `y` to the vertices
    /// of their faces.
    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        let (Point::Mesh { face: fx, .. }, Point::Mesh { face: fy, .. }) = (*x, *y) else {
            return f64::NAN;
        };
        let px = self.position(x);
        let py = self.position(y);
        if fx == fy {
            return norm(sub(px, py));
        }
        let adj = self.adjacency();
        let src: Vec<(usize, f64)> =
            self.triangles[fx].iter().map(|&i| (i, norm(sub(px, self.vertices[i])))).collect();
        let dist = self.dijkstra(&adj, &src);
        self.triangles[fy]
            .iter()
            .map(|&j| dist[j] + norm(sub(py, self.vertices[j])))
            .fold(f64::INFINITY, f64::min)
    }

    /// Double-sweep eccentricity estimate of the graph diameter.
    pub fn diameter_estimate(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let adj = self.adjacency();
        let d0 = self.dijkstra(&adj, &[(0, 0.0)]);
        let (far, _) = d0.iter().enumerate().fold((0, 0.0), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        let d1 = self.dijkstra(&adj, &[(far, 0.0)]);
        d1.iter().cloned().fold(0.0, f64::max)
    }

    /// Injectivity radius is not estimated for meshes.
    pub fn injectivity_estimate(&self) -> f64 {
        f64::NAN
    }

    fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.vertices.len()];
        for &[a, b, c] in &self.triangles {
            let ar = 0.5 * cross_norm(sub(self.vertices[b], self.vertices[a]), sub(self.vertices[c], self.vertices[a]));
            for i in [a, b, c] {
                m[i] += ar / 3.0;
            }
        }
        m
    }

    pub(crate) fn lumped_quadrature(&self) -> QuadratureGrid {
        let mass = self.lumped_mass();
        let mut owner = vec![None; self.vertices.len()];
        for (fi, t) in self.triangles.iter().enumerate() {
            for (k, &v) in t.iter().enumerate() {
                if owner[v].is_none() {
                    owner[v] = Some((fi, k));
                }
            }
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (v, o) in owner.iter().enumerate() {
            if let Some((face, k)) = *o {
                let mut bary = [0.0; 3];
                bary[k] = 1.0;
                nodes.push(Point::Mesh { face, bary });
                weights.push(mass[v]);
            }
        }
        QuadratureGrid { nodes, weights, region: RegionTag::Whole }
    }

    /// Cotangent stiffness and lumped mass eigenpairs, with a residual check.
    pub(crate) fn eigenpairs(&self, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = self.vertices.len();
        if count > n {
            return invalid(format!("mesh has {n} vertices, cannot return {count} eigenpairs"));
        }
        let mut k = DMatrix::<f64>::zeros(n, n);
        for &[a, b, c] in &self.triangles {
            for (i, j, o) in [(a, b, c), (b, c, a), (c, a, b)] {
                let u = sub(self.vertices[i], self.vertices[o]);
                let v = sub(self.vertices[j], self.vertices[o]);
                let cot = dot(u, v) / cross_norm(u, v);
                let w = 0.5 * cot;
                k[(i, j)] -= w;
                k[(j, i)] -= w;
                k[(i, i)] += w;
                k[(j, j)] += w;
            }
        }
        let mass = self.lumped_mass();
        let s: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
        let mut a = k.clone();
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] *= s[i] * s[j];
            }
        }
        let eig = SymmetricEigen::try_new(a, 1e-13, 10_000).ok_or(Error::Unconverged { residual: f64::NAN })?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
        let mut lambdas = Vec::with_capacity(count);
        let mut vectors = Vec::with_capacity(count);
        let mut worst: f64 = 0.0;
        for (idx, &c) in order.iter().take(count).enumerate() {
            let lam = if idx == 0 { 0.0 } else { eig.eigenvalues[c].max(0.0) };
            let phi: Vec<f64> = (0..n).map(|i| eig.eigenvectors[(i, c)] * s[i]).collect();
            let kp = &k * nalgebra::DVector::from_vec(phi.clone());
            let num: f64 = (0..n).map(|i| (kp[i] - lam * mass[i] * phi[i]).powi(2)).sum::<f64>().sqrt();
            let den: f64 = 1.0 + (0..n).map(|i| kp[i] * kp[i]).sum::<f64>().sqrt();
            worst = worst.max(num / den);
            lambdas.push(lam);
            vectors.push(phi);
        }
        if worst > 1e-8 {
            return Err(Error::Unconverged { residual: worst });
        }
        Ok((lambdas, vectors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ModelManifold;

    #[test]
    fn icosphere_spectrum_and_distance() {
        let mesh = Mesh::icosphere(1.0, 2);
        let m = ModelManifold::mesh(mesh.clone());
        let b = m.eigenpairs(9).unwrap();
        assert_eq!(b.lambdas[0], 0.0);
        for j in 1..4 {
            assert!((b.lambdas[j] - 2.0).abs() < 0.15, "{}", b.lambdas[j]);
        }
        for j in 4..9 {
            assert!((b.lambdas[j] - 6.0).abs() < 0.6, "{}", b.lambdas[j]);
        }
        assert!((m.volume() - 4.0 * std::f64::consts::PI).abs() < 0.3);
        // graph distance overestimates great-circle distance, but not by much
        let x = Point::Mesh { face: 0, bary: [1.0, 0.0, 0.0] };
        let pos = mesh.position(&x);
        let (far, _) = mesh
            .vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (i, dot(*v, pos)))
            .fold((0, 2.0), |a, b| if b.1 < a.1 { b } else { a });
        let f = mesh.triangles.iter().position(|t| t[0] == far).unwrap();
        let y = Point::Mesh { face: f, bary: [1.0, 0.0, 0.0] };
        let d = m.geodesic_distance(&x, &y);
        assert!(d >= std::f64::consts::PI * 0.98 && d < std::f64::consts::PI * 1.15, "{d}");
    }
}
