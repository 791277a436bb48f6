use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{ManifoldKind, ModelManifold, Point};
use crate::error::{invalid, Result};

/// Label of a single eigenfunction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Constant,
    /// `sqrt(2/V) cos(2 pi (k1 x1 / l1 + k2 x2 / l2))`
    TorusCos { k1: i64, k2: i64 },
    /// `sqrt(2/V) sin(2 pi (k1 x1 / l1 + k2 x2 / l2))`
    TorusSin { k1: i64, k2: i64 },
    /// Real spherical harmonic of degree `l`, order `m` (sine branch for m < 0).
    Harmonic { l: usize, m: i64 },
    /// Column of a mesh eigenvector matrix.
    MeshVector(usize),
}

#[derive(Clone, Debug)]
enum Family {
    Torus { l1: f64, l2: f64, vol: f64 },
    Sphere { radius: f64, lmax: usize },
    Mesh { mesh: super::Mesh, vectors: Vec<Vec<f64>> },
}

/// The first `count` eigenpairs of the Laplace-Beltrami operator, ordered by
/// eigenvalue with ties broken lexicographically in the mode index.
#[derive(Clone, Debug)]
pub struct Eigenbasis {
    pub lambdas: Vec<f64>,
    pub modes: Vec<Mode>,
    family: Family,
}

impl Eigenbasis {
    pub(super) fn new(m: &ModelManifold, count: usize) -> Result<Self> {
        if count < 1 {
            return invalid("eigenpairs: count must be at least 1");
        }
        match &m.kind {
            ManifoldKind::FlatTorus2d { l1, l2 } => Ok(torus_basis(*l1, *l2, count)),
            ManifoldKind::RoundSphere2d { radius } => Ok(sphere_basis(*radius, count)),
            ManifoldKind::Mesh2d(mesh) => {
                let (lambdas, vectors) = mesh.eigenpairs(count)?;
                Ok(Eigenbasis {
                    modes: (0..count).map(Mode::MeshVector).collect(),
                    lambdas,
                    family: Family::Mesh { mesh: mesh.clone(), vectors },
                })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Values of every eigenfunction at `x`.
    pub fn eval_all(&self, x: &Point) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out);
        out
    }

    pub fn eval_into(&self, x: &Point, out: &mut [f64]) {
        match &self.family {
            Family::Torus { l1, l2, vol } => {
                let [a, b] = x.uv();
                let c0 = 1.0 / vol.sqrt();
                let c1 = (2.0 / vol).sqrt();
                for (o, mode) in out.iter_mut().zip(&self.modes) {
                    *o = match *mode {
                        Mode::Constant => c0,
                        Mode::TorusCos { k1, k2 } => {
                            c1 * (2.0 * PI * (k1 as f64 * a / l1 + k2 as f64 * b / l2)).cos()
                        }
                        Mode::TorusSin { k1, k2 } => {
                            c1 * (2.0 * PI * (k1 as f64 * a / l1 + k2 as f64 * b / l2)).sin()
                        }
                        _ => unreachable!(),
                    };
                }
            }
            Family::Sphere { radius, lmax } => {
                let [theta, phi] = x.uv();
                let table = normalized_legendre(*lmax, theta.cos(), theta.sin());
                for (o, mode) in out.iter_mut().zip(&self.modes) {
                    let (l, m) = match *mode {
                        Mode::Constant => (0, 0),
                        Mode::Harmonic { l, m } => (l, m),
                        _ => unreachable!(),
                    };
                    let am = m.unsigned_abs() as usize;
                    let p = table[l * (l + 1) / 2 + am];
                    let v = if m == 0 {
                        p
                    } else if m > 0 {
                        std::f64::consts::SQRT_2 * p * (am as f64 * phi).cos()
                    } else {
                        std::f64::consts::SQRT_2 * p * (am as f64 * phi).sin()
                    };
                    *o = v / radius;
                }
            }
            Family::Mesh { mesh, vectors } => {
                let w = mesh.barycentric_weights(x);
                for (o, vec) in out.iter_mut().zip(vectors) {
                    *o = w.iter().map(|&(i, c)| c * vec[i]).sum();
                }
            }
        }
    }

    pub fn eval(&self, j: usize, x: &Point) -> f64 {
        self.eval_all(x)[j]
    }

    /// Returns a basis restricted to the first `count` modes.
    pub fn truncated(&self, count: usize) -> Eigenbasis {
        let count = count.min(self.len());
        let family = match &self.family {
            Family::Mesh { mesh, vectors } => {
                Family::Mesh { mesh: mesh.clone(), vectors: vectors[..count].to_vec() }
            }
            f => f.clone(),
        };
        Eigenbasis {
            lambdas: self.lambdas[..count].to_vec(),
            modes: self.modes[..count].to_vec(),
            family,
        }
    }

    /// Largest wavenumber appearing in the basis, `sqrt(lambda_max)`.
    pub fn max_wavenumber(&self) -> f64 {
        self.lambdas.last().copied().unwrap_or(0.0).max(0.0).sqrt()
    }
}

fn snap(l: f64) -> i64 {
    (l * 1e9).round() as i64
}

fn torus_basis(l1: f64, l2: f64, count: usize) -> Eigenbasis {
    let c1 = (2.0 * PI / l1).powi(2);
    let c2 = (2.0 * PI / l2).powi(2);
    let mut kmax = ((count as f64).sqrt() as i64) + 2;
    loop {
        let mut items: Vec<(f64, i64, i64, u8)> = Vec::new();
        for k1 in 0..=kmax {
            for k2 in -kmax..=kmax {
                if k1 == 0 && k2 <= 0 {
                    continue;
                }
                let lam = c1 * (k1 * k1) as f64 + c2 * (k2 * k2) as f64;
                items.push((lam, k1, k2, 0));
                items.push((lam, k1, k2, 1));
            }
        }
        items.sort_by(|a, b| {
            snap(a.0).cmp(&snap(b.0)).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3))
        });
        let guard = c1.min(c2) * ((kmax + 1) * (kmax + 1)) as f64;
        let need = count - 1;
        if need == 0 || (items.len() >= need && items[need - 1].0 < guard) {
            let mut lambdas = vec![0.0];
            let mut modes = vec![Mode::Constant];
            for &(lam, k1, k2, kind) in items.iter().take(need) {
                lambdas.push(lam);
                modes.push(if kind == 0 { Mode::TorusCos { k1, k2 } } else { Mode::TorusSin { k1, k2 } });
            }
            return Eigenbasis { lambdas, modes, family: Family::Torus { l1, l2, vol: l1 * l2 } };
        }
        kmax *= 2;
    }
}

fn sphere_basis(radius: f64, count: usize) -> Eigenbasis {
    let mut lambdas = Vec::with_capacity(count);
    let mut modes = Vec::with_capacity(count);
    let mut l = 0usize;
    'outer: loop {
        for m in -(l as i64)..=(l as i64) {
            if lambdas.len() == count {
                break 'outer;
            }
            lambdas.push((l * (l + 1)) as f64 / (radius * radius));
            modes.push(if l == 0 { Mode::Constant } else { Mode::Harmonic { l, m } });
        }
        l += 1;
    }
    let lmax = match modes.last() {
        Some(Mode::Harmonic { l, .. }) => *l,
        _ => 0,
    };
    Eigenbasis { lambdas, modes, family: Family::Sphere { radius, lmax } }
}

/// Orthonormal associated Legendre values `N_lm P_l^m(x)` for `0 <= m <= l <= lmax`,
/// packed as `l(l+1)/2 + m`. Normalized so that the complex harmonics are
/// orthonormal on the unit sphere.
fn normalized_legendre(lmax: usize, x: f64, s: f64) -> Vec<f64> {
    let mut out = vec![0.0; (lmax + 1) * (lmax + 2) / 2];
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            pmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        out[idx(m, m)] = pmm;
        if m < lmax {
            out[idx(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * x * pmm;
        }
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            out[idx(l, m)] = a * (x * out[idx(l - 1, m)] - b * out[idx(l - 2, m)]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_spectrum_start() {
        let m = ModelManifold::torus(2.0 * PI, 2.0 * PI);
        let b = m.eigenpairs(6).unwrap();
        assert_eq!(b.lambdas, vec![0.0, 1.0, 1.0, 1.0, 1.0, 2.0]);
        assert_eq!(b.modes[1], Mode::TorusCos { k1: 0, k2: 1 });
        assert_eq!(b.modes[3], Mode::TorusCos { k1: 1, k2: 0 });
    }

    #[test]
    fn sphere_spectrum_start() {
        let m = ModelManifold::sphere(1.0);
        let b = m.eigenpairs(4).unwrap();
        assert_eq!(b.lambdas, vec![0.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn sphere_orthonormal() {
        let m = ModelManifold::sphere(1.7);
        let b = m.eigenpairs(25).unwrap();
        let q = m.quadrature(16);
        let mut g = vec![0.0; 25 * 25];
        for (x, w) in q.nodes.iter().zip(&q.weights) {
            let v = b.eval_all(x);
            for i in 0..25 {
                for j in 0..25 {
                    g[i * 25 + j] += w * v[i] * v[j];
                }
            }
        }
        for i in 0..25 {
            for j in 0..25 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g[i * 25 + j] - e).abs() < 1e-12, "{i} {j} {}", g[i * 25 + j]);
            }
        }
    }
}
