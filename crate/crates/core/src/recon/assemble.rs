use serde::{Deserialize, Serialize};

use super::{DistanceFunction, FiniteMetricSpace, FunctionTag, ReconNets};
use crate::error::{invalid, Result};
use crate::spectral::{AnnulusGraph, InteriorSpectralData};

/// Shortest-path distances `d^a_N` in `B(p, r0/2) \ B(p, r0/25)` from the
/// samples of `partial N = partial B(p, r0/25)`.
#[derive(Clone, Debug)]
pub struct BoundaryExtender {
    pub r0: f64,
    /// Samples of `partial N` (the inner ring of the annulus graph).
    pub boundary: Vec<[f64; 2]>,
    /// Voronoi cell of each boundary sample.
    pub boundary_cell: Vec<usize>,
    /// `[y][s]`: `d^a_N` from boundary sample `y` to `partial B(p, r0/4)` sample `s`.
    pub to_sphere4: Vec<Vec<f64>>,
    pub sphere4_cell: Vec<usize>,
    /// `[y][k]`: `d^a_N` to near-field point `k`, for `r0/25 < |x_k| <= r0/4`; NaN otherwise.
    pub to_near: Vec<Vec<f64>>,
    /// `d^a` between boundary samples.
    pub boundary_dist: Vec<Vec<f64>>,
}

impl BoundaryExtender {
    pub fn new(data: &InteriorSpectralData, nets: &ReconNets, reach: f64) -> Result<Self> {
        let r0 = data.ball_radius();
        let inner = r0 / 25.0;
        let near_idx: Vec<usize> = (0..nets.near.len())
            .filter(|&k| {
                let r = nets.near[k][0].hypot(nets.near[k][1]);
                r > inner && r <= r0 / 4.0 + 1e-12
            })
            .collect();
        let mut extra = nets.sphere4.clone();
        extra.extend(near_idx.iter().map(|&k| nets.near[k]));
        let g = AnnulusGraph::build(data, inner, r0 / 2.0, &extra, reach)?;
        let nb = data.grid.n_theta;
        let boundary: Vec<[f64; 2]> = g.coords[..nb].to_vec();
        let ns = nets.sphere4.len();
        let mut to_sphere4 = Vec::with_capacity(nb);
        let mut to_near = Vec::with_capacity(nb);
        for y in 0..nb {
            let d = g.dijkstra(y);
            to_sphere4.push((0..ns).map(|s| d[g.extra(s)]).collect());
            let mut row = vec![f64::NAN; nets.near.len()];
            for (q, &k) in near_idx.iter().enumerate() {
                row[k] = d[g.extra(ns + q)];
            }
            to_near.push(row);
        }
        let boundary_dist = boundary.iter().map(|a| boundary.iter().map(|b| data.distance_a(*a, *b)).collect()).collect();
        Ok(BoundaryExtender {
            r0,
            boundary_cell: nets.voronoi(data, &boundary),
            sphere4_cell: nets.voronoi(data, &nets.sphere4),
            boundary,
            to_sphere4,
            to_near,
            boundary_dist,
        })
    }

    /// `min_{z in partial N} r(z)` for an interior function.
    pub fn min_on_boundary(&self, r: &DistanceFunction) -> f64 {
        self.boundary_cell.iter().map(|&c| r.values[c]).fold(f64::INFINITY, f64::min)
    }

    /// `r~(y) = min_{z in partial B(p, r0/4)} (d^a_N(z, y) + r(z))`, or `None`
    /// when `r` fails the `min_{partial N} r >= r0/8` filter.
    pub fn extend(&self, r: &DistanceFunction) -> Option<DistanceFunction> {
        if self.min_on_boundary(r) < self.r0 / 8.0 {
            return None;
        }
        let values = self
            .to_sphere4
            .iter()
            .map(|row| row.iter().zip(&self.sphere4_cell).map(|(d, &c)| d + r.values[c]).fold(f64::INFINITY, f64::min))
            .collect();
        Some(DistanceFunction { values, tag: FunctionTag::BoundaryExtended, source: r.source })
    }

    /// Direct extension `y -> d^a_N(x_k, y)` for a near-field point in
    /// `B(p, r0/4) \ B(p, r0/25)`.
    pub fn extend_near(&self, k: usize) -> Option<DistanceFunction> {
        let values: Vec<f64> = self.to_near.iter().map(|row| row[k]).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(DistanceFunction { values, tag: FunctionTag::BoundaryExtended, source: k })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblyReport {
    pub n_inner: usize,
    pub n_near: usize,
    pub n_far: usize,
    /// Interior functions rejected by the `r0/8` filter.
    pub filtered: usize,
    /// Filtered-in functions whose boundary minimum lies within `sigma` of `r0/8`.
    pub boundary_band: usize,
    /// Elements merged into an earlier one by the thinning step.
    pub thinned: usize,
    pub thin_tolerance: f64,
    pub repair_mass: f64,
}

enum Origin {
    Near(usize),
    Far(usize),
}

/// Builds `(M*, d*_M)` on `R*(N)` and the net points inside `B(p, r0/25)`.
///
/// `d*_N` is the sup distance of boundary functions. Elements of `R*(N)`
/// whose boundary values and inner-ball cross terms agree within `thin`
/// (sup norm) are merged, with `thin` enlarged by 1.5x until at most `cap`
/// elements remain. The result is repaired to a metric by shortest-path
/// closure.
pub fn assemble_metric_space(
    data: &InteriorSpectralData,
    nets: &ReconNets,
    ext: &BoundaryExtender,
    interior: &[DistanceFunction],
    thin: f64,
    cap: usize,
) -> Result<(FiniteMetricSpace, AssemblyReport)> {
    let r0 = data.ball_radius();
    let inner_pts: Vec<usize> = (0..nets.near.len()).filter(|&k| nets.near[k][0].hypot(nets.near[k][1]) < r0 / 25.0).collect();
    if inner_pts.first() != Some(&0) {
        return invalid("the near-field net must start at the base point");
    }
    let inner_cells = nets.voronoi(data, &inner_pts.iter().map(|&k| nets.near[k]).collect::<Vec<_>>());
    let mut report = AssemblyReport {
        n_inner: inner_pts.len(),
        n_near: 0,
        n_far: 0,
        filtered: 0,
        boundary_band: 0,
        thinned: 0,
        thin_tolerance: thin,
        repair_mass: 0.0,
    };

    // candidate elements of R*(N): (origin, boundary values, cross terms with inner points)
    let mut cands: Vec<(Origin, Vec<f64>, Vec<f64>)> = Vec::new();
    for k in 0..nets.near.len() {
        if let Some(rt) = ext.extend_near(k) {
            let cross = inner_pts.iter().map(|&q| data.distance_a(nets.near[k], nets.near[q])).collect();
            cands.push((Origin::Near(k), rt.values, cross));
        }
    }
    for (f, r) in interior.iter().enumerate() {
        match ext.extend(r) {
            Some(rt) => {
                if ext.min_on_boundary(r) < r0 / 8.0 + nets.sigma {
                    report.boundary_band += 1;
                }
                let cross = inner_cells.iter().map(|&c| r.values[c]).collect();
                cands.push((Origin::Far(f), rt.values, cross));
            }
            None => report.filtered += 1,
        }
    }

    let sup = |a: &(Origin, Vec<f64>, Vec<f64>), b: &(Origin, Vec<f64>, Vec<f64>)| -> f64 {
        a.1.iter().zip(&b.1).chain(a.2.iter().zip(&b.2)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    let mut tol = thin;
    let keep: Vec<usize> = loop {
        let mut kept: Vec<usize> = Vec::new();
        for i in 0..cands.len() {
            if tol > 0.0 && kept.iter().any(|&j| sup(&cands[i], &cands[j]) <= tol) {
                continue;
            }
            kept.push(i);
            if kept.len() > cap {
                break;
            }
        }
        if kept.len() <= cap {
            break kept;
        }
        tol = if tol > 0.0 { tol * 1.5 } else { nets.sigma / 8.0 };
    };
    report.thinned = cands.len() - keep.len();
    report.thin_tolerance = tol;

    let mut labels: Vec<String> = inner_pts.iter().map(|k| format!("inner:{k}")).collect();
    for &i in &keep {
        match cands[i].0 {
            Origin::Near(k) => {
                report.n_near += 1;
                labels.push(format!("near:{k}"));
            }
            Origin::Far(f) => {
                report.n_far += 1;
                let tag = match interior[f].tag {
                    FunctionTag::FromBeta => "beta",
                    _ => "point",
                };
                labels.push(format!("{tag}:{}", interior[f].source));
            }
        }
    }
    let ni = inner_pts.len();
    let n = labels.len();
    let nb = ext.boundary.len();
    let mut m = vec![0.0; n * n];
    for a in 0..ni {
        for b in 0..ni {
            m[a * n + b] = data.distance_a(nets.near[inner_pts[a]], nets.near[inner_pts[b]]);
        }
    }
    // A_i(z2) = min_z1 r~_i(z1) + d^a(z1, z2)
    let through: Vec<Vec<f64>> = keep
        .iter()
        .map(|&i| {
            (0..nb)
                .map(|z2| (0..nb).map(|z1| cands[i].1[z1] + ext.boundary_dist[z1][z2]).fold(f64::INFINITY, f64::min))
                .collect()
        })
        .collect();
    for (p, &i) in keep.iter().enumerate() {
        let row = ni + p;
        for a in 0..ni {
            m[row * n + a] = cands[i].2[a];
            m[a * n + row] = cands[i].2[a];
        }
        for (q, &j) in keep.iter().enumerate().skip(p + 1) {
            let col = ni + q;
            let dn = cands[i].1.iter().zip(&cands[j].1).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let via = through[p].iter().zip(&cands[j].1).map(|(a, b)| a + b).fold(f64::INFINITY, f64::min);
            let v = dn.min(via);
            m[row * n + col] = v;
            m[col * n + row] = v;
        }
    }
    let mut space = FiniteMetricSpace::new(labels, 0, m)?;
    report.repair_mass = space.repair();
    Ok((space, report))
}
