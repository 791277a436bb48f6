//! Finite interior spectral data on a small ball, its Definition-3 style
//! perturbations, and the closeness checker.

mod check;
mod cluster;
mod grid;
mod paths;
mod perturb;

pub use check::{check_delta_close, ClosenessReport, ClusterMargin};
pub use cluster::{build_clusters, partition_pair, ClusterPartition};
pub use grid::{BallGrid, GridGauge};
pub use paths::AnnulusGraph;
pub use perturb::{apply_certificate, assemble_e, perturb_delta, ClusterMixMatrix, PerturbationCertificate};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::manifold::{sym_det, sym_quad, GeometryBounds, ModelManifold, Point, Sym2};

/// Format version written into serialized data sets.
pub const FISD_VERSION: u32 = 1;

/// One eigenvalue with its eigenfunction sampled on the ball grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSample {
    pub mu: f64,
    pub psi: Vec<f64>,
}

/// Eigenvalues `mu_0..=mu_J` with eigenfunctions restricted to `B(p, r0)`,
/// together with the metric in normal coordinates on the same grid.
#[derive(Clone, Debug, PartialEq)]
pub struct InteriorSpectralData {
    /// Present only for data extracted from a known model (oracle mode).
    pub manifold: Option<ModelManifold>,
    pub center: Point,
    pub grid: BallGrid,
    pub metric: Vec<Sym2>,
    pub eigen: Vec<EigenSample>,
}

#[derive(Serialize, Deserialize)]
struct BallSpec {
    center: Point,
    radius: f64,
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    n_r: usize,
    n_theta: usize,
}

#[derive(Serialize, Deserialize)]
struct FisdFile {
    version: u32,
    manifold_descriptor: Option<ModelManifold>,
    ball: BallSpec,
    grid: GridSpec,
    metric_samples: Vec<Sym2>,
    eigenpairs: Vec<(f64, Vec<f64>)>,
    #[serde(rename = "J")]
    j: usize,
}

impl InteriorSpectralData {
    /// Index of the last eigenpair.
    pub fn j(&self) -> usize {
        self.eigen.len().saturating_sub(1)
    }

    pub fn ball_radius(&self) -> f64 {
        self.grid.radius
    }

    pub fn mus(&self) -> Vec<f64> {
        self.eigen.iter().map(|e| e.mu).collect()
    }

    /// Data restricted to the first `count` eigenpairs.
    pub fn truncated(&self, count: usize) -> InteriorSpectralData {
        let mut out = self.clone();
        out.eigen.truncate(count.max(1));
        out
    }

    /// Quadrature weights of `L^2(B(r0), h)`: `r dr dtheta sqrt(det h)`.
    pub fn weights(&self) -> Vec<f64> {
        metric_weights(&self.grid, &self.metric)
    }

    /// Euclidean (standard) weights `r dr dtheta`.
    pub fn standard_weights(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|i| self.grid.base_weight(i)).collect()
    }

    /// Whether every metric sample equals the identity.
    pub fn is_euclidean(&self) -> bool {
        self.metric.iter().all(|h| h[0] == 1.0 && h[1] == 0.0 && h[2] == 1.0)
    }

    /// Metric at an arbitrary point of the ball by bilinear interpolation.
    pub fn metric_at(&self, v: [f64; 2]) -> Sym2 {
        let mut h = [0.0; 3];
        for (i, w) in self.grid.stencil(v) {
            for k in 0..3 {
                h[k] += w * self.metric[i][k];
            }
        }
        h
    }

    /// Length of the straight coordinate segment from `a` to `b` in the data
    /// metric (composite Simpson rule).
    pub fn segment_length(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d = [b[0] - a[0], b[1] - a[1]];
        if self.is_euclidean() {
            return d[0].hypot(d[1]);
        }
        let panels = 8;
        let n = 2 * panels;
        let mut s = 0.0;
        for k in 0..=n {
            let t = k as f64 / n as f64;
            let p = [a[0] + t * d[0], a[1] + t * d[1]];
            let f = sym_quad(&self.metric_at(p), d).max(0.0).sqrt();
            let c = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += c * f;
        }
        s / (3.0 * n as f64)
    }

    /// Ball distance `d^a` between two points given in data coordinates.
    pub fn distance_a(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        self.segment_length(a, b)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        if self.grid.n_r < 2 || self.grid.n_theta < 4 || !(self.grid.radius > 0.0) {
            return invalid("ball grid needs n_r >= 2, n_theta >= 4 and a positive radius");
        }
        if self.metric.len() != n {
            return invalid(format!("metric has {} samples, grid has {n} nodes", self.metric.len()));
        }
        for (i, h) in self.metric.iter().enumerate() {
            if !(h[0] > 0.0 && sym_det(h) > 0.0) {
                return invalid(format!("metric sample {i} is not positive definite"));
            }
        }
        if self.eigen.is_empty() {
            return invalid("spectral data holds no eigenpairs");
        }
        if self.eigen[0].mu != 0.0 {
            return invalid("first eigenvalue must be 0");
        }
        for w in self.eigen.windows(2) {
            if w[1].mu < w[0].mu {
                return invalid("eigenvalues are not sorted");
            }
        }
        if self.eigen.len() > 1 && !(self.eigen[1].mu > 0.0) {
            return invalid("zero eigenvalue must be simple");
        }
        for (j, e) in self.eigen.iter().enumerate() {
            if e.psi.len() != n {
                return invalid(format!("eigenfunction {j} has {} samples, grid has {n}", e.psi.len()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = FisdFile {
            version: FISD_VERSION,
            manifold_descriptor: self.manifold.clone(),
            ball: BallSpec { center: self.center, radius: self.grid.radius },
            grid: GridSpec { n_r: self.grid.n_r, n_theta: self.grid.n_theta },
            metric_samples: self.metric.clone(),
            eigenpairs: self.eigen.iter().map(|e| (e.mu, e.psi.clone())).collect(),
            j: self.j(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: FisdFile = serde_json::from_str(s)?;
        if f.version != FISD_VERSION {
            return invalid(format!("unsupported spectral data version {}", f.version));
        }
        if f.eigenpairs.len() != f.j + 1 {
            return invalid(format!("J = {} but {} eigenpairs stored", f.j, f.eigenpairs.len()));
        }
        let data = InteriorSpectralData {
            manifold: f.manifold_descriptor,
            center: f.ball.center,
            grid: BallGrid::new(f.ball.radius, f.grid.n_r, f.grid.n_theta),
            metric: f.metric_samples,
            eigen: f.eigenpairs.into_iter().map(|(mu, psi)| EigenSample { mu, psi }).collect(),
        };
        data.validate()?;
        Ok(data)
    }
}

pub(crate) fn metric_weights(grid: &BallGrid, metric: &[Sym2]) -> Vec<f64> {
    (0..grid.len()).map(|i| grid.base_weight(i) * sym_det(&metric[i]).sqrt()).collect()
}

/// Smallest `C` with `lambda_j / j^(2/n)` in `[1/C, C]` for `1 <= j < lambdas.len()`.
pub fn weyl_constant(lambdas: &[f64], n: usize) -> f64 {
    let mut c: f64 = 1.0;
    for (j, &l) in lambdas.iter().enumerate().skip(1) {
        let r = l / (j as f64).powf(2.0 / n as f64);
        c = c.max(r).max(1.0 / r);
    }
    c
}

/// The two-sided window `(C^-1 delta^-1)^(n/2) <= J <= (2 C delta^-1)^(n/2)`.
pub fn j_window(delta: f64, c7: f64, n: usize) -> (f64, f64) {
    let h = n as f64 / 2.0;
    ((1.0 / (c7 * delta)).powf(h), (2.0 * c7 / delta).powf(h))
}

/// Largest `J` whose top wavenumber is resolved by a grid of spacing `h`.
fn nyquist_max_j(lambdas: &[f64], h: f64) -> usize {
    lambdas
        .iter()
        .take_while(|l| l.max(0.0).sqrt() * h < std::f64::consts::PI)
        .count()
        .saturating_sub(1)
}

/// Samples the first `J + 1` eigenpairs of `m` on a polar normal-coordinate
/// grid over `B(p, r0)`.
///
/// When `delta` is given, `J` must lie in the Weyl window for that `delta`,
/// with `C_7` measured on the manifold's own spectrum.
pub fn extract_fisd(
    m: &ModelManifold,
    bounds: &GeometryBounds,
    j: usize,
    n_r: usize,
    n_theta: usize,
    delta: Option<f64>,
) -> Result<InteriorSpectralData> {
    bounds.validate()?;
    if m.is_mesh() {
        return Err(Error::Unsupported("interior spectral data on meshes"));
    }
    let grid = BallGrid::new(bounds.r0, n_r, n_theta);
    if n_r < 2 || n_theta < 4 {
        return invalid("ball grid needs n_r >= 2 and n_theta >= 4");
    }
    let basis = m.eigenpairs(j + 1)?;
    let h = grid.max_spacing();
    let max_safe = nyquist_max_j(&basis.lambdas, h);
    if max_safe < j {
        return Err(Error::Nyquist { requested: j, max_safe });
    }
    if let Some(d) = delta {
        if !(d > 0.0 && d < 1.0) {
            return invalid("delta must lie in (0, 1)");
        }
        let probe = m.eigenpairs((j + 1).max(201))?;
        let c7 = weyl_constant(&probe.lambdas, m.dim());
        let (lo, hi) = j_window(d, c7, m.dim());
        if (j as f64) < lo || (j as f64) > hi {
            return invalid(format!("J = {j} outside the window [{lo:.1}, {hi:.1}] for delta = {d} (C7 = {c7:.3})"));
        }
    }
    let p = m.base_point;
    let count = basis.len();
    let mut eigen: Vec<EigenSample> =
        basis.lambdas.iter().map(|&mu| EigenSample { mu, psi: Vec::with_capacity(grid.len()) }).collect();
    let mut metric = Vec::with_capacity(grid.len());
    let mut vals = vec![0.0; count];
    for i in 0..grid.len() {
        let y = grid.node(i);
        metric.push(m.normal_metric(y)?);
        let x = m.exp_map(&p, y)?;
        basis.eval_into(&x, &mut vals);
        for (e, v) in eigen.iter_mut().zip(&vals) {
            e.psi.push(*v);
        }
    }
    let data = InteriorSpectralData { manifold: Some(m.clone()), center: p, grid, metric, eigen };
    data.validate()?;
    Ok(data)
}
