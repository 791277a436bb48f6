//! Volumes of unions of balls from spectral data, and volumes of slice
//! intersections by inclusion-exclusion.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::manifold::{ModelManifold, Point};
use crate::solver::{slice_coefficients, solve_min, ConstraintSet, OperatorCache, SliceIndexAlpha, SliceParams};
use crate::spectral::InteriorSpectralData;
use crate::wave::CoefficientVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VolumeMethod {
    Spectral,
    OracleQuadrature,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeReport {
    pub value: f64,
    pub method: VolumeMethod,
    /// Ball radii (union) or slice centres `beta` (slice), per net point.
    pub radii: Vec<f64>,
    pub error_estimate: f64,
    /// The raw value was negative and has been clamped to zero.
    pub clamped: bool,
}

/// `vol^a(M)` from the constant eigenfunction: `(mean |psi_0|)^-2`.
pub fn approx_vol_manifold(data: &InteriorSpectralData) -> Result<f64> {
    let e0 = data.eigen.first().ok_or_else(|| Error::InvalidInput("no eigenpairs".into()))?;
    let w = data.weights();
    let area: f64 = w.iter().sum();
    let mean = e0.psi.iter().zip(&w).map(|(p, w)| p.abs() * w).sum::<f64>() / area;
    if !(mean > 1e-12) || !mean.is_finite() {
        return invalid(format!("psi_0 mean {mean} is too small; data look corrupt"));
    }
    Ok(mean.powi(-2))
}

/// Source of union volumes `vol(union_l B(z_l, rho_l))`.
pub trait UnionVolumes {
    fn net_len(&self) -> usize;
    fn union_volume(&mut self, radii: &[f64]) -> Result<VolumeReport>;
}

/// Spectral union volumes: the slicing solver with `u = phi_0`, then
/// `vol^a(M) * sum d_j^2`.
///
/// A ball of radius `rho` is obtained from the solver's `M(alpha, -2 gamma)`
/// with `alpha = rho + 2 gamma`, raised to the smallest admissible multiple
/// `>= r0/8` if needed; components with `rho <= 0` are dropped.
pub struct SpectralVolumes<'a> {
    pub data: &'a InteriorSpectralData,
    pub centers: Vec<[f64; 2]>,
    pub gamma: f64,
    pub params: SliceParams,
    pub vol_m: f64,
    pub cache: OperatorCache,
    memo: HashMap<Vec<u32>, VolumeReport>,
    pub solves: usize,
    pub unconverged: usize,
    pub raised: usize,
}

impl<'a> SpectralVolumes<'a> {
    pub fn new(data: &'a InteriorSpectralData, centers: Vec<[f64; 2]>, gamma: f64, params: SliceParams) -> Result<Self> {
        let vol_m = approx_vol_manifold(data)?;
        Ok(SpectralVolumes {
            data,
            centers,
            gamma,
            params,
            vol_m,
            cache: OperatorCache::new(),
            memo: HashMap::new(),
            solves: 0,
            unconverged: 0,
            raised: 0,
        })
    }

    /// The solver index for ball radii `rho`.
    pub fn alpha_for(&self, radii: &[f64]) -> Result<SliceIndexAlpha> {
        let g = self.gamma;
        let min_k = (self.data.ball_radius() / 8.0 / g - 1e-9).ceil() as u32;
        let mut ks = Vec::with_capacity(radii.len());
        for &r in radii {
            if r <= 1e-12 {
                ks.push(0);
                continue;
            }
            let k = ((r + 2.0 * g) / g).round();
            if ((r + 2.0 * g) - k * g).abs() > 1e-9 * (1.0 + r) {
                return invalid(format!("radius {r} is not a multiple of gamma = {g}"));
            }
            ks.push((k as u32).max(min_k));
        }
        Ok(SliceIndexAlpha::new(g, ks))
    }

    /// Union volume for a solver index directly.
    pub fn alpha_volume(&mut self, alpha: &SliceIndexAlpha, radii: &[f64]) -> Result<VolumeReport> {
        if let Some(r) = self.memo.get(&alpha.multiples) {
            return Ok(r.clone());
        }
        if alpha.support().is_empty() {
            let rep = VolumeReport { value: 0.0, method: VolumeMethod::Spectral, radii: radii.to_vec(), error_estimate: 0.0, clamped: false };
            self.memo.insert(alpha.multiples.clone(), rep.clone());
            return Ok(rep);
        }
        let a = CoefficientVector::unit(0, self.data.mus(), self.params.s)?;
        let res = slice_coefficients(&a, self.data, &self.centers, alpha, &self.params, Some(&mut self.cache))?;
        self.solves += 1;
        if !res.minimizer.converged {
            self.unconverged += 1;
        }
        let s2: f64 = res.d.iter().map(|x| x * x).sum();
        let rep = VolumeReport {
            value: self.vol_m * s2,
            method: VolumeMethod::Spectral,
            radii: radii.to_vec(),
            error_estimate: self.vol_m * 2.0 * self.params.eps0,
            clamped: false,
        };
        self.memo.insert(alpha.multiples.clone(), rep.clone());
        Ok(rep)
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }
}

impl UnionVolumes for SpectralVolumes<'_> {
    fn net_len(&self) -> usize {
        self.centers.len()
    }

    fn union_volume(&mut self, radii: &[f64]) -> Result<VolumeReport> {
        let alpha = self.alpha_for(radii)?;
        let min_k = (self.data.ball_radius() / 8.0 / self.gamma - 1e-9).ceil() as u32;
        for (&r, &k) in radii.iter().zip(&alpha.multiples) {
            if r > 1e-12 && k == min_k && ((r + 2.0 * self.gamma) / self.gamma).round() as u32 != k {
                self.raised += 1;
            }
        }
        self.alpha_volume(&alpha, radii)
    }
}

/// Area of the data-metric disc `{y : d^a(0, y) < rho}` from the metric
/// samples alone.
pub fn in_ball_disc_area(data: &InteriorSpectralData, rho: f64) -> f64 {
    let w = data.weights();
    (0..data.grid.len())
        .filter(|&i| data.distance_a([0.0, 0.0], data.grid.node(i)) < rho)
        .map(|i| w[i])
        .sum()
}

/// Fixed observation cap `eps*` for which the spectral volume of the disc
/// `B(p, rho_ref)` equals its area from the metric samples. Bisection in
/// `log eps*`; uses no information outside the data.
pub fn calibrate_eps_star(data: &InteriorSpectralData, gamma: f64, rho_ref: f64, params: &SliceParams) -> Result<f64> {
    if rho_ref + 1e-12 >= data.ball_radius() {
        return invalid("reference disc must lie inside the data ball");
    }
    let target = in_ball_disc_area(data, rho_ref);
    let mut p = params.clone();
    p.eps_relative = None;
    let probe = SpectralVolumes::new(data, vec![[0.0, 0.0]], gamma, p.clone())?;
    let alpha = probe.alpha_for(&[rho_ref])?;
    let op = crate::solver::assemble_observation_operator(data, &[[0.0, 0.0]], &alpha, None)?;
    let a = CoefficientVector::unit(0, data.mus(), params.s)?;
    let hi0 = op.norms(&a.entries)[0];
    let vol_m = approx_vol_manifold(data)?;
    let (a1, a2, _) = p.class_radii();
    let vol = |eps: f64| -> Result<f64> {
        let c = ConstraintSet::new(&data.mus(), p.s, a1, a2, eps, op.clone());
        let r = solve_min(&a.entries, &c, p.tol, p.max_iter)?;
        Ok(vol_m * r.b.iter().zip(&a.entries).map(|(b, a)| (a - b) * (a - b)).sum::<f64>())
    };
    let (mut lo, mut hi) = ((hi0 * 1e-4).ln(), hi0.ln());
    if vol(lo.exp())? < target {
        return Ok(lo.exp());
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if vol(mid.exp())? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Oracle union volumes by indicator quadrature on a fixed grid of the
/// whole manifold, with node-to-centre distances tabulated once.
pub struct QuadratureVolumes {
    pub weights: Vec<f64>,
    /// `dist[l][q]`: distance from centre `l` to node `q`.
    pub dist: Vec<Vec<f64>>,
}

impl QuadratureVolumes {
    pub fn new(m: &ModelManifold, centers: &[Point], resolution: usize) -> Self {
        let q = m.quadrature(resolution);
        let dist = centers
            .iter()
            .map(|z| q.nodes.iter().map(|x| m.geodesic_distance(x, z)).collect())
            .collect();
        QuadratureVolumes { weights: q.weights, dist }
    }

    /// Direct quadrature of the slice intersection
    /// `cap_l (B(z_l, beta_l + 2 sigma) \ B(z_l, beta_l - 2 sigma))` over `members`.
    pub fn slice_direct(&self, members: &[usize], beta: &[f64], sigma: f64) -> f64 {
        let mut v = 0.0;
        for (q, w) in self.weights.iter().enumerate() {
            let inside = members.iter().all(|&l| {
                let d = self.dist[l][q];
                d < beta[l] + 2.0 * sigma && d >= beta[l] - 2.0 * sigma
            });
            if inside {
                v += w;
            }
        }
        v
    }
}

impl UnionVolumes for QuadratureVolumes {
    fn net_len(&self) -> usize {
        self.dist.len()
    }

    fn union_volume(&mut self, radii: &[f64]) -> Result<VolumeReport> {
        let mut v = 0.0;
        for (q, w) in self.weights.iter().enumerate() {
            if radii.iter().enumerate().any(|(l, &r)| r > 0.0 && self.dist[l][q] < r) {
                v += w;
            }
        }
        Ok(VolumeReport { value: v, method: VolumeMethod::OracleQuadrature, radii: radii.to_vec(), error_estimate: 0.0, clamped: false })
    }
}

/// Counters of [`slice_volume`] calls.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SliceStats {
    pub evaluated: usize,
    pub clamped: usize,
}

/// Volume of `M*(beta) = cap_{l in members} (B(z_l, beta_l + 2 sigma) \ B(z_l, beta_l - 2 sigma))`
/// by inclusion-exclusion over union volumes.
pub fn slice_volume<V: UnionVolumes + ?Sized>(
    vols: &mut V,
    members: &[usize],
    beta: &[f64],
    sigma: f64,
    cap: usize,
    stats: &mut SliceStats,
) -> Result<VolumeReport> {
    let l = members.len();
    if l == 0 {
        return invalid("slice over an empty index set");
    }
    if l > cap {
        return invalid(format!("slice over L = {l} centres exceeds the cap {cap} (2^L terms)"));
    }
    let n = vols.net_len();
    if beta.len() != n || members.iter().any(|&m| m >= n) {
        return invalid("beta and members must index the net");
    }
    let mut base = vec![0.0; n];
    for &m in members {
        base[m] = (beta[m] - 2.0 * sigma).max(0.0);
    }
    let tilde = vols.union_volume(&base)?;
    let mut total = -tilde.value;
    let mut err = tilde.error_estimate;
    let mut radii = base.clone();
    for mask in 1u32..(1 << l) {
        for (k, &m) in members.iter().enumerate() {
            radii[m] = if mask & (1 << k) != 0 { beta[m] + 2.0 * sigma } else { base[m] };
        }
        let r = vols.union_volume(&radii)?;
        let sign = if mask.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * r.value;
        err += r.error_estimate;
    }
    stats.evaluated += 1;
    let method = tilde.method;
    let clamped = total < 0.0;
    if clamped {
        stats.clamped += 1;
        log::warn!("negative slice volume {total:.3e} clamped to 0");
    }
    Ok(VolumeReport { value: total.max(0.0), method, radii: beta.to_vec(), error_estimate: err, clamped })
}

/// Appends reports to a CSV ledger with columns
/// `radii, value, method, error_estimate, clamped`.
pub fn append_ledger(path: &Path, reports: &[VolumeReport]) -> Result<()> {
    let exists = path.exists();
    let f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(f);
    if !exists {
        w.write_record(["radii", "value", "method", "error_estimate", "clamped"])?;
    }
    for r in reports {
        let radii = r.radii.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(";");
        let method = match r.method {
            VolumeMethod::Spectral => "spectral",
            VolumeMethod::OracleQuadrature => "oracle-quadrature",
        };
        w.write_record([radii, r.value.to_string(), method.to_string(), r.error_estimate.to_string(), r.clamped.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn inclusion_exclusion_matches_direct_on_same_grid() {
        let m = ModelManifold::torus(2.0 * PI, 2.0 * PI);
        let z = [Point::chart(0.0, 0.0), Point::chart(0.2, 0.0), Point::chart(0.0, 0.2)];
        let mut q = QuadratureVolumes::new(&m, &z, 256);
        let beta = [1.0, 0.9, 1.1];
        let mut st = SliceStats::default();
        let ie = slice_volume(&mut q, &[0, 1, 2], &beta, 0.1, 4, &mut st).unwrap().value;
        let direct = q.slice_direct(&[0, 1, 2], &beta, 0.1);
        assert!((ie - direct).abs() < 1e-10, "{ie} vs {direct}");
        assert!(slice_volume(&mut q, &[0, 1, 2], &beta, 0.1, 2, &mut st).is_err());
    }

    #[test]
    fn single_annulus_is_difference_of_discs() {
        let m = ModelManifold::torus(2.0 * PI, 2.0 * PI);
        let mut q = QuadratureVolumes::new(&m, &[Point::chart(1.0, 1.0)], 512);
        let mut st = SliceStats::default();
        let v = slice_volume(&mut q, &[0], &[1.0], 0.1, 4, &mut st).unwrap().value;
        let exact = PI * (1.2f64.powi(2) - 0.8f64.powi(2));
        assert!((v - exact).abs() < 5e-3 * exact);
    }
}
