use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cluster::cluster_values;
use super::{metric_weights, ClusterPartition, EigenSample, GridGauge, InteriorSpectralData};
use crate::error::{invalid, Error, Result};
use crate::manifold::{sym_conjugate, Sym2};

/// Gauge rotations and mixing angles scale like `min(1, GAUGE_SCALE * delta)`.
pub const GAUGE_SCALE: f64 = 100.0;

/// Everything needed to replay a perturbation bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCertificate {
    pub seed: u64,
    pub delta: f64,
    pub gauge: GridGauge,
    pub clusters: Vec<Vec<usize>>,
    /// Row-major `A_p`: `psi2[m_a] = sum_b A_p[a][b] (O_* psi1)[m_b]`.
    pub mixing: Vec<Vec<f64>>,
    /// Eigenvalue shift per index.
    pub shifts: Vec<f64>,
    /// Metric factor `(1 + delta)^kappa` with
    /// `kappa = amplitude * sum cos(k . y + phase) / scale`.
    pub metric_amplitude: f64,
    pub metric_waves: Vec<[f64; 3]>,
    pub metric_scale: f64,
    /// Additive noise per index as `(source, coefficient)` pairs.
    pub noise: Vec<Vec<(usize, f64)>>,
    /// Number of model eigenfunctions the noise draws from; 0 means the
    /// data's own eigenfunctions are the sources.
    pub noise_basis: usize,
}

impl PerturbationCertificate {
    pub fn mixing_matrix(&self, p: usize) -> DMatrix<f64> {
        let n = self.clusters[p].len();
        DMatrix::from_row_slice(n, n, &self.mixing[p])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn kappa(cert: &PerturbationCertificate, y: [f64; 2]) -> f64 {
    let g: f64 = cert.metric_waves.iter().map(|w| (w[0] * y[0] + w[1] * y[1] + w[2]).cos()).sum();
    cert.metric_amplitude * g / cert.metric_scale
}

fn noise_sources(data: &InteriorSpectralData, count: usize) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Ok(data.eigen.iter().map(|e| e.psi.clone()).collect());
    }
    let m = data
        .manifold
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("model eigenfunction noise needs a manifold descriptor".into()))?;
    let basis = m.eigenpairs(count)?;
    let mut out = vec![Vec::with_capacity(data.grid.len()); count];
    let mut vals = vec![0.0; count];
    for i in 0..data.grid.len() {
        let x = m.exp_map(&data.center, data.grid.node(i))?;
        basis.eval_into(&x, &mut vals);
        for (o, v) in out.iter_mut().zip(&vals) {
            o.push(*v);
        }
    }
    Ok(out)
}

fn perturbed_metric(data: &InteriorSpectralData, cert: &PerturbationCertificate) -> Vec<Sym2> {
    let grid = &data.grid;
    let o = cert.gauge.matrix(grid);
    (0..grid.len())
        .map(|i| {
            let h = sym_conjugate(&data.metric[cert.gauge.source(grid, i)], &o);
            let f = (1.0 + cert.delta).powf(kappa(cert, grid.node(i)));
            [f * h[0], f * h[1], f * h[2]]
        })
        .collect()
}

/// Applies a certificate to the data it was sampled from.
pub fn apply_certificate(
    data: &InteriorSpectralData,
    cert: &PerturbationCertificate,
) -> Result<InteriorSpectralData> {
    let grid = &data.grid;
    let jn = data.eigen.len();
    if cert.shifts.len() != jn || cert.noise.len() != jn {
        return invalid("certificate does not match the number of eigenpairs");
    }
    let src = cert.gauge.source_map(grid);
    let push = |f: &[f64]| -> Vec<f64> { src.iter().map(|&s| f[s]).collect() };
    let pushed: Vec<Vec<f64>> = data.eigen.iter().map(|e| push(&e.psi)).collect();
    let sources = noise_sources(data, cert.noise_basis)?;
    let mut psi: Vec<Vec<f64>> = pushed.clone();
    for (p, members) in cert.clusters.iter().enumerate() {
        let n = members.len();
        if cert.mixing[p].len() != n * n {
            return invalid(format!("mixing block {p} is not {n}x{n}"));
        }
        for (a, &ja) in members.iter().enumerate() {
            let mut v = vec![0.0; grid.len()];
            for (b, &jb) in members.iter().enumerate() {
                let c = cert.mixing[p][a * n + b];
                if c != 0.0 {
                    for (vi, x) in v.iter_mut().zip(&pushed[jb]) {
                        *vi += c * x;
                    }
                }
            }
            psi[ja] = v;
        }
    }
    for (j, terms) in cert.noise.iter().enumerate() {
        for &(s, c) in terms {
            let f = sources
                .get(s)
                .ok_or_else(|| Error::InvalidInput(format!("noise source {s} out of range")))?;
            for (vi, &i) in psi[j].iter_mut().zip(&src) {
                *vi += c * f[i];
            }
        }
    }
    let eigen = data
        .eigen
        .iter()
        .zip(psi)
        .zip(&cert.shifts)
        .map(|((e, psi), s)| EigenSample { mu: e.mu + s, psi })
        .collect();
    Ok(InteriorSpectralData {
        manifold: None,
        center: data.center,
        grid: data.grid,
        metric: perturbed_metric(data, cert),
        eigen,
    })
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize, t: f64) -> Vec<f64> {
    let mut a = DMatrix::<f64>::identity(n, n);
    for _ in 0..2 {
        for i in 0..n {
            for k in (i + 1)..n {
                let th = t * rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                let (s, c) = th.sin_cos();
                for col in 0..n {
                    let (x, y) = (a[(i, col)], a[(k, col)]);
                    a[(i, col)] = c * x - s * y;
                    a[(k, col)] = s * x + c * y;
                }
            }
        }
    }
    if t >= 1.0 && rng.gen_bool(0.5) {
        let r = rng.gen_range(0..n);
        for col in 0..n {
            a[(r, col)] = -a[(r, col)];
        }
    }
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for k in 0..n {
            out.push(a[(i, k)]);
        }
    }
    out
}

/// Samples a `delta`-perturbation of `data` and returns it with its
/// certificate.
///
/// Eigenvalues move by less than `delta/2` inside their cluster, cluster
/// blocks are mixed by a random orthogonal matrix, a grid rotation or
/// reflection `O` is applied, the metric is scaled pointwise inside the
/// `(1 + delta)` band, and noise of norm below `delta/2` per cluster is
/// added from the first `4(J + 1)` model eigenfunctions (or from the data
/// itself when no model is attached).
pub fn perturb_delta(
    data: &InteriorSpectralData,
    delta: f64,
    seed: u64,
) -> Result<(InteriorSpectralData, PerturbationCertificate)> {
    data.validate()?;
    // the reconstruction's bound delta < 1/(3 C7) is not needed here, so
    // coarse test perturbations can still be drawn
    let clusters = cluster_values(&data.mus(), delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = &data.grid;
    let t = (GAUGE_SCALE * delta).min(1.0);
    let nt = grid.n_theta as f64;
    let steps = (t * rng.gen_range(-nt / 2.0..nt / 2.0)).round() as i64;
    let gauge = GridGauge {
        steps: steps.rem_euclid(grid.n_theta as i64) as usize,
        reflect: t >= 1.0 && rng.gen_bool(0.5),
    };
    let jn = data.eigen.len();
    let mus = data.mus();

    let mut mixing = Vec::with_capacity(clusters.len());
    let mut shifts = vec![0.0; jn];
    for (p, members) in clusters.members.iter().enumerate() {
        let n = members.len();
        if p == 0 {
            mixing.push(vec![1.0]);
            continue;
        }
        mixing.push(random_orthogonal(&mut rng, n, t));
        let w = mus[*members.last().unwrap()] - mus[members[0]];
        let slack = delta - w;
        let near_top = mus[*members.last().unwrap()] >= 1.0 / delta - delta;
        let sign = if near_top || rng.gen_bool(0.5) { -1.0 } else { 1.0 };
        let c = sign * rng.gen_range(0.25..0.45) * slack;
        let mut jit: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.04..0.04) * slack).collect();
        jit.sort_by(f64::total_cmp);
        for (&j, d) in members.iter().zip(jit) {
            shifts[j] = c + d;
        }
    }

    let mut metric_waves = Vec::with_capacity(3);
    for _ in 0..3 {
        let k = rng.gen_range(1.0..4.0);
        let th = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
        metric_waves.push([k * th.cos(), k * th.sin(), rng.gen_range(0.0..2.0 * std::f64::consts::PI)]);
    }
    let metric_amplitude = rng.gen_range(0.5..0.9);

    let noise_basis = if data.manifold.is_some() { 4 * jn } else { 0 };
    let n_sources = if noise_basis > 0 { noise_basis } else { jn };
    let mut cert = PerturbationCertificate {
        seed,
        delta,
        gauge,
        clusters: clusters.members.clone(),
        mixing,
        shifts,
        metric_amplitude,
        metric_waves,
        metric_scale: 1.0,
        noise: vec![Vec::new(); jn],
        noise_basis,
    };
    let gmax = (0..grid.len())
        .map(|i| {
            let y = grid.node(i);
            cert.metric_waves.iter().map(|w| (w[0] * y[0] + w[1] * y[1] + w[2]).cos()).sum::<f64>().abs()
        })
        .fold(0.0, f64::max);
    cert.metric_scale = if gmax > 0.0 { gmax } else { 1.0 };

    let sources = noise_sources(data, noise_basis)?;
    let src = gauge.source_map(grid);
    let w2 = metric_weights(grid, &perturbed_metric(data, &cert));
    for members in &clusters.members {
        let mut terms = Vec::with_capacity(members.len());
        let mut norm2 = 0.0;
        for _ in members {
            let mut t3 = Vec::with_capacity(3);
            while t3.len() < 3 {
                let s = rng.gen_range(0..n_sources);
                if members.contains(&s) || t3.iter().any(|&(q, _)| q == s) {
                    if n_sources <= members.len() + 3 {
                        break;
                    }
                    continue;
                }
                t3.push((s, rng.gen_range(-1.0..1.0)));
            }
            for (i, &wi) in w2.iter().enumerate() {
                let v: f64 = t3.iter().map(|&(s, c)| c * sources[s][src[i]]).sum();
                norm2 += wi * v * v;
            }
            terms.push(t3);
        }
        let eta = rng.gen_range(0.2..0.45) * delta;
        let scale = if norm2 > 0.0 { eta / norm2.sqrt() } else { 0.0 };
        for (&j, t3) in members.iter().zip(terms) {
            cert.noise[j] = t3.into_iter().map(|(s, c)| (s, c * scale)).collect();
        }
    }
    let out = apply_certificate(data, &cert)?;
    Ok((out, cert))
}

/// Block-diagonal matrix `e_jk = <phi~_k, phi_j>` relating the perturbed
/// eigenbasis to the true one; blocks are indexed by cluster members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterMixMatrix {
    pub size: usize,
    pub blocks: Vec<(Vec<usize>, Vec<f64>)>,
}

impl ClusterMixMatrix {
    pub fn identity(size: usize) -> Self {
        ClusterMixMatrix { size, blocks: (0..size).map(|j| (vec![j], vec![1.0])).collect() }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let mut e = DMatrix::zeros(self.size, self.size);
        for (idx, b) in &self.blocks {
            let n = idx.len();
            for (a, &j) in idx.iter().enumerate() {
                for (c, &k) in idx.iter().enumerate() {
                    e[(j, k)] = b[a * n + c];
                }
            }
        }
        e
    }

    /// `E b`: coefficients in the perturbed basis mapped to the true basis.
    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size];
        for (idx, blk) in &self.blocks {
            let n = idx.len();
            for (a, &j) in idx.iter().enumerate() {
                out[j] = idx.iter().enumerate().map(|(c, &k)| blk[a * n + c] * b.get(k).copied().unwrap_or(0.0)).sum();
            }
        }
        out
    }

    /// `max |E^T E - I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let e = self.dense();
        let d = e.transpose() * &e - DMatrix::identity(self.size, self.size);
        d.amax()
    }
}

/// Oracle assembly of `E` by whole-manifold quadrature of the perturbed
/// eigenfunctions (the certificate's cluster mixtures of the true ones)
/// against the true eigenfunctions.
pub fn assemble_e(
    true_data: &InteriorSpectralData,
    cert: &PerturbationCertificate,
    clusters: &ClusterPartition,
) -> Result<ClusterMixMatrix> {
    let m = true_data
        .manifold
        .as_ref()
        .ok_or(Error::Unsupported("E assembly without a model manifold"))?;
    if clusters.members.len() != cert.clusters.len() {
        return invalid("cluster partition does not match the certificate");
    }
    for (p, (a, b)) in clusters.members.iter().zip(&cert.clusters).enumerate() {
        if a.len() != b.len() || cert.mixing[p].len() != a.len() * a.len() {
            return invalid(format!("cluster {p} block is not square"));
        }
    }
    let size = true_data.eigen.len();
    let basis = m.eigenpairs(size)?;
    let res = ((basis.max_wavenumber() * 8.0) as usize).max(64);
    let q = m.quadrature(res);
    let mut blocks = Vec::with_capacity(clusters.len());
    let mut vals = vec![0.0; size];
    let mut acc: Vec<Vec<f64>> = clusters.members.iter().map(|mm| vec![0.0; mm.len() * mm.len()]).collect();
    for (x, w) in q.nodes.iter().zip(&q.weights) {
        basis.eval_into(x, &mut vals);
        for (p, mm) in clusters.members.iter().enumerate() {
            let n = mm.len();
            let a = &cert.mixing[p];
            for (kk, _) in mm.iter().enumerate() {
                // phi~_k = sum_l A[k][l] phi_l
                let pk: f64 = mm.iter().enumerate().map(|(l, &jl)| a[kk * n + l] * vals[jl]).sum();
                for (jj, &j) in mm.iter().enumerate() {
                    acc[p][jj * n + kk] += w * pk * vals[j];
                }
            }
        }
    }
    let mut covered = vec![false; size];
    for (mm, b) in clusters.members.iter().zip(acc) {
        for &j in mm {
            covered[j] = true;
        }
        blocks.push((mm.clone(), b));
    }
    for (j, c) in covered.into_iter().enumerate() {
        if !c {
            blocks.push((vec![j], vec![1.0]));
        }
    }
    Ok(ClusterMixMatrix { size, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ModelManifold;
    use crate::spectral::extract_fisd;
    use std::f64::consts::PI;

    fn data() -> InteriorSpectralData {
        let m = ModelManifold::torus(2.0 * PI, 2.0 * PI);
        extract_fisd(&m, &m.bounds(0.9), 20, 16, 32, None).unwrap()
    }

    #[test]
    fn tiny_delta_is_identity() {
        let d = data();
        let (p, _) = perturb_delta(&d, 1e-15, 3).unwrap();
        for (a, b) in d.eigen.iter().zip(&p.eigen) {
            assert!((a.mu - b.mu).abs() < 1e-12);
            for (x, y) in a.psi.iter().zip(&b.psi) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        for (a, b) in d.metric.iter().zip(&p.metric) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_and_replayable() {
        let d = data();
        let (p1, c1) = perturb_delta(&d, 1e-2, 11).unwrap();
        let (p2, c2) = perturb_delta(&d, 1e-2, 11).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(p1, p2);
        let c3 = PerturbationCertificate::from_json(&c1.to_json().unwrap()).unwrap();
        assert_eq!(apply_certificate(&d, &c3).unwrap(), p1);
    }

    #[test]
    fn mixing_blocks_are_orthogonal() {
        let d = data();
        let (_, c) = perturb_delta(&d, 1e-2, 5).unwrap();
        for p in 0..c.clusters.len() {
            let a = c.mixing_matrix(p);
            let n = a.nrows();
            assert!((a.transpose() * &a - DMatrix::identity(n, n)).amax() < 1e-12);
        }
        assert!(c.shifts.iter().all(|s| s.abs() < 1e-2 / 2.0));
    }

    #[test]
    fn e_blocks_are_transposed_mixing() {
        let d = data();
        let (_, c) = perturb_delta(&d, 1e-2, 9).unwrap();
        let cl = crate::spectral::build_clusters(&d, 1e-2).unwrap();
        let e = assemble_e(&d, &c, &cl).unwrap();
        assert!(e.orthogonality_defect() < 1e-8);
        let dense = e.dense();
        for (p, mm) in c.clusters.iter().enumerate() {
            let a = c.mixing_matrix(p);
            for (x, &j) in mm.iter().enumerate() {
                for (y, &k) in mm.iter().enumerate() {
                    assert!((dense[(j, k)] - a[(y, x)]).abs() < 1e-8);
                }
            }
        }
    }
}
