//! Admissible radius vectors, interior and boundary distance functions, the
//! assembled finite metric space and its comparison with ground truth.

mod assemble;
mod gh;

pub use assemble::{assemble_metric_space, AssemblyReport, BoundaryExtender};
pub use gh::{gh_upper_bound, through_ball_min, torus_obstacle_distance, truth_space, GhBound};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::InteriorSpectralData;
use crate::volumes::{slice_volume, SliceStats, UnionVolumes};

/// `beta in sigma Z_+^{N0}` stored as integer multiples of `sigma`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SliceIndexBeta {
    pub multiples: Vec<u32>,
}

impl SliceIndexBeta {
    pub fn values(&self, sigma: f64) -> Vec<f64> {
        self.multiples.iter().map(|&k| k as f64 * sigma).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionTag {
    FromBeta,
    FromInteriorPoint,
    BoundaryExtended,
}

/// Piecewise-constant function: one value per Voronoi cell of the net, or
/// one value per sample of the small sphere once extended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceFunction {
    pub values: Vec<f64>,
    pub tag: FunctionTag,
    /// Index of the admissible vector or near-field point it came from.
    pub source: usize,
}

impl DistanceFunction {
    pub fn sup_distance(&self, other: &DistanceFunction) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Point sets in data coordinates used by the reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconNets {
    pub sigma: f64,
    /// Net `z_1..z_N0` in `B(p, r0/4)`; the first entry is `p`.
    pub z: Vec<[f64; 2]>,
    /// Maximal `sigma`-net of `B(p, r0/2)` containing the full net of
    /// `B(p, r0/4)`; the first entry is `p`.
    pub near: Vec<[f64; 2]>,
    /// Samples of `partial B(p, r0/4)` used by the boundary extension.
    pub sphere4: Vec<[f64; 2]>,
}

fn greedy_net(data: &InteriorSpectralData, seed: &[[f64; 2]], radius: f64, sigma: f64) -> Vec<[f64; 2]> {
    let mut net: Vec<[f64; 2]> = seed.to_vec();
    let g = &data.grid;
    let mut cand: Vec<[f64; 2]> = (0..g.len()).map(|i| g.node(i)).filter(|p| p[0].hypot(p[1]) <= radius).collect();
    cand.sort_by(|a, b| a[0].hypot(a[1]).total_cmp(&b[0].hypot(b[1])).then(a[1].atan2(a[0]).total_cmp(&b[1].atan2(b[0]))));
    for c in cand {
        if net.iter().all(|q| data.distance_a(*q, c) >= sigma) {
            net.push(c);
        }
    }
    net
}

impl ReconNets {
    /// Greedy `sigma`-separated nets seeded at `p`, ordered by radius. The
    /// net of `B(p, r0/4)` is truncated to its first `n0_cap` points.
    pub fn build(data: &InteriorSpectralData, sigma: f64, n0_cap: usize, n_sphere4: usize) -> Result<Self> {
        if !(sigma > 0.0) || n0_cap == 0 || n_sphere4 == 0 {
            return invalid("sigma, N0 cap and sphere sample count must be positive");
        }
        let r0 = data.ball_radius();
        let full_z = greedy_net(data, &[[0.0, 0.0]], r0 / 4.0, sigma);
        let near = greedy_net(data, &full_z, r0 / 2.0, sigma);
        let z: Vec<[f64; 2]> = full_z.into_iter().take(n0_cap).collect();
        let sphere4 = (0..n_sphere4)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n_sphere4 as f64;
                [r0 / 4.0 * t.cos(), r0 / 4.0 * t.sin()]
            })
            .collect();
        Ok(ReconNets { sigma, z, near, sphere4 })
    }

    /// `d^a(z_l, z_m)`.
    pub fn z_distances(&self, data: &InteriorSpectralData) -> Vec<Vec<f64>> {
        self.z.iter().map(|a| self.z.iter().map(|b| data.distance_a(*a, *b)).collect()).collect()
    }

    /// Voronoi cell (nearest net point in `d^a`, lowest index on ties) of each point.
    pub fn voronoi(&self, data: &InteriorSpectralData, pts: &[[f64; 2]]) -> Vec<usize> {
        pts.iter()
            .map(|p| {
                let mut best = (f64::INFINITY, 0);
                for (l, z) in self.z.iter().enumerate() {
                    let d = data.distance_a(*z, *p);
                    if d < best.0 {
                        best = (d, l);
                    }
                }
                best.1
            })
            .collect()
    }
}

/// Settings of the admissible search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleParams {
    pub sigma: f64,
    /// `L`: the first `L - 1` net points are shared by every slice.
    pub l: usize,
    pub eps4: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    /// Cap on the estimated number of candidate vectors.
    pub budget: f64,
    /// Cap on `L` for the `2^L` inclusion-exclusion.
    pub slice_cap: usize,
    /// Triangle-inequality pruning with `+4 sigma` slack.
    pub prune: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSet {
    pub betas: Vec<SliceIndexBeta>,
    pub candidates_tested: usize,
    pub pruned: usize,
    pub estimate: f64,
    pub stats: SliceStats,
}

/// Estimated number of candidate vectors after pruning.
pub fn search_estimate(zdist: &[Vec<f64>], p: &AdmissibleParams) -> f64 {
    let kmin = (p.beta_min / p.sigma - 1e-9).ceil();
    let kmax = (p.beta_max / p.sigma + 1e-9).floor();
    let span = (kmax - kmin + 1.0).max(0.0);
    let mut est = span;
    for l in 1..zdist.len() {
        let w = if p.prune {
            let reach = (0..l).map(|m| zdist[l][m]).fold(f64::INFINITY, f64::min);
            (2.0 * (reach + 4.0 * p.sigma) / p.sigma + 1.0).min(span)
        } else {
            span
        };
        est *= w;
    }
    est
}

/// Depth-first search over `sigma`-quantized radius vectors in
/// lexicographic order. A vector is admissible iff for every
/// `i in {L, .., N0}` the slice over `K_i = {1, .., L-1, i}` has volume at
/// least `3 eps4`; each slice is tested as soon as its coordinates are set.
pub fn enumerate_admissible(
    vols: &mut dyn UnionVolumes,
    zdist: &[Vec<f64>],
    p: &AdmissibleParams,
) -> Result<AdmissibleSet> {
    let n0 = vols.net_len();
    if zdist.len() != n0 || p.l == 0 || p.l > n0 {
        return invalid(format!("need 1 <= L <= N0 = {n0} and a full distance table"));
    }
    if p.l > p.slice_cap {
        return invalid(format!("L = {} exceeds the slice cap {}", p.l, p.slice_cap));
    }
    if !(p.sigma > 0.0 && p.beta_min <= p.beta_max) {
        return invalid("invalid sigma or beta range");
    }
    let estimate = search_estimate(zdist, p);
    if estimate > p.budget {
        let suggested = p.sigma * (estimate / p.budget).powf(1.0 / n0 as f64);
        return Err(Error::OverBudget { estimate, budget: p.budget, suggested_sigma: suggested });
    }
    let kmin = (p.beta_min / p.sigma - 1e-9).ceil().max(0.0) as u32;
    let kmax = (p.beta_max / p.sigma + 1e-9).floor() as u32;
    let mut out = AdmissibleSet { betas: Vec::new(), candidates_tested: 0, pruned: 0, estimate, stats: SliceStats::default() };
    let mut cur = vec![0u32; n0];
    dfs(0, &mut cur, vols, zdist, p, kmin, kmax, &mut out)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    depth: usize,
    cur: &mut Vec<u32>,
    vols: &mut dyn UnionVolumes,
    zdist: &[Vec<f64>],
    p: &AdmissibleParams,
    kmin: u32,
    kmax: u32,
    out: &mut AdmissibleSet,
) -> Result<()> {
    let n0 = cur.len();
    if depth == n0 {
        out.betas.push(SliceIndexBeta { multiples: cur.clone() });
        return Ok(());
    }
    for k in kmin..=kmax {
        let b = k as f64 * p.sigma;
        if p.prune {
            let ok = (0..depth).all(|m| (b - cur[m] as f64 * p.sigma).abs() <= zdist[depth][m] + 4.0 * p.sigma + 1e-12);
            if !ok {
                out.pruned += 1;
                continue;
            }
        }
        cur[depth] = k;
        if depth + 1 >= p.l {
            // slice K_i with i = depth
            let members: Vec<usize> = (0..p.l - 1).chain(std::iter::once(depth)).collect();
            let mut beta = vec![0.0; n0];
            for &m in &members {
                beta[m] = cur[m] as f64 * p.sigma;
            }
            out.candidates_tested += 1;
            let v = slice_volume(vols, &members, &beta, p.sigma, p.slice_cap, &mut out.stats)?;
            if v.value < 3.0 * p.eps4 {
                continue;
            }
        }
        dfs(depth + 1, cur, vols, zdist, p, kmin, kmax, out)?;
    }
    cur[depth] = 0;
    Ok(())
}

/// `R*_M`: one function per admissible vector (`r_beta = beta_l` on `V_l`)
/// followed by one per near-field point (`r_k = d^a(x_k, z_l)` on `V_l`).
pub fn build_interior_maps(
    data: &InteriorSpectralData,
    nets: &ReconNets,
    admissible: &[SliceIndexBeta],
) -> Vec<DistanceFunction> {
    let mut out: Vec<DistanceFunction> = admissible
        .iter()
        .enumerate()
        .map(|(k, b)| DistanceFunction { values: b.values(nets.sigma), tag: FunctionTag::FromBeta, source: k })
        .collect();
    for (k, x) in nets.near.iter().enumerate() {
        out.push(DistanceFunction {
            values: nets.z.iter().map(|z| data.distance_a(*x, *z)).collect(),
            tag: FunctionTag::FromInteriorPoint,
            source: k,
        });
    }
    out
}

/// Finite metric space with a base point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteMetricSpace {
    pub labels: Vec<String>,
    pub base_index: usize,
    /// Row-major distance matrix.
    pub matrix: Vec<f64>,
}

impl FiniteMetricSpace {
    pub fn new(labels: Vec<String>, base_index: usize, matrix: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if matrix.len() != n * n || (n > 0 && base_index >= n) {
            return invalid("matrix size or base index inconsistent with labels");
        }
        Ok(FiniteMetricSpace { labels, base_index, matrix })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.len() + j]
    }

    pub fn diameter(&self) -> f64 {
        self.matrix.iter().copied().fold(0.0, f64::max)
    }

    /// Symmetrizes by the smaller entry, zeroes the diagonal and takes the
    /// shortest-path closure. Returns the largest entry change.
    pub fn repair(&mut self) -> f64 {
        let n = self.len();
        let orig = self.matrix.clone();
        for i in 0..n {
            self.matrix[i * n + i] = 0.0;
            for j in 0..i {
                let v = self.matrix[i * n + j].min(self.matrix[j * n + i]).max(0.0);
                self.matrix[i * n + j] = v;
                self.matrix[j * n + i] = v;
            }
        }
        for k in 0..n {
            let rowk: Vec<f64> = self.matrix[k * n..(k + 1) * n].to_vec();
            for i in 0..n {
                let dik = self.matrix[i * n + k];
                let row = &mut self.matrix[i * n..(i + 1) * n];
                for (dij, dkj) in row.iter_mut().zip(&rowk) {
                    let v = dik + dkj;
                    if v < *dij {
                        *dij = v;
                    }
                }
            }
        }
        orig.iter().zip(&self.matrix).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Largest violation of the metric axioms.
    pub fn axiom_defect(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            worst = worst.max(self.d(i, i).abs());
            for j in 0..n {
                worst = worst.max((self.d(i, j) - self.d(j, i)).abs()).max(-self.d(i, j));
                for k in 0..n {
                    worst = worst.max(self.d(i, j) - self.d(i, k) - self.d(k, j));
                }
            }
        }
        worst
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: FiniteMetricSpace = serde_json::from_str(s)?;
        FiniteMetricSpace::new(m.labels, m.base_index, m.matrix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repair_closes_triangles() {
        let mut m = FiniteMetricSpace::new(
            vec!["a".into(), "b".into(), "c".into()],
            0,
            vec![0.0, 1.0, 5.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0],
        )
        .unwrap();
        let mass = m.repair();
        assert_eq!(mass, 3.0);
        assert_eq!(m.d(0, 2), 2.0);
        assert!(m.axiom_defect() <= 1e-12);
    }
}
