use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{partition_pair, ClusterPartition, GridGauge, InteriorSpectralData};
use crate::error::{Error, Result};
use crate::manifold::{sym_conjugate, sym_pencil_range};

/// Residuals of clause (v) for one cluster at the chosen `O` and `A_p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterMargin {
    pub members1: Vec<usize>,
    pub members2: Vec<usize>,
    /// `||A O_* Psi1 - Psi2||` in `L^2(B, h2)`.
    pub forward: f64,
    /// `||A^-1 (O^-1)_* Psi2 - Psi1||` in `L^2(B, h1)`.
    pub inverse: f64,
    /// The same residuals with the Euclidean area element.
    pub forward_standard: f64,
    pub inverse_standard: f64,
    /// Best `A_p`, row-major.
    pub mixing: Vec<f64>,
}

/// Outcome of [`check_delta_close`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosenessReport {
    pub pass: bool,
    pub delta: f64,
    /// Violated clauses, e.g. `"(iv)"`, with a short reason.
    pub violated: Vec<String>,
    pub partitions: Option<(ClusterPartition, ClusterPartition)>,
    pub gauge: Option<GridGauge>,
    pub orthogonal: Option<[[f64; 2]; 2]>,
    /// `max(lambda_max, 1/lambda_min) - 1` over the grid for the pencil
    /// `(O_* h1, h2)`.
    pub metric_margin: f64,
    pub clusters: Vec<ClusterMargin>,
    pub max_forward: f64,
    pub max_inverse: f64,
}

struct Gram {
    xx: DMatrix<f64>,
    xy: DMatrix<f64>,
    yy: DMatrix<f64>,
}

fn gram(rows_x: &[&[f64]], rows_y: &[&[f64]], src: &[usize], w: &[f64]) -> Gram {
    let n = rows_x.len();
    let mut xx = DMatrix::zeros(n, n);
    let mut xy = DMatrix::zeros(n, n);
    let mut yy = DMatrix::zeros(n, n);
    let mut xv = vec![0.0; n];
    let mut yv = vec![0.0; n];
    for (i, &wi) in w.iter().enumerate() {
        let s = src[i];
        for a in 0..n {
            xv[a] = rows_x[a][s];
            yv[a] = rows_y[a][i];
        }
        for a in 0..n {
            let (wx, wy) = (wi * xv[a], wi * yv[a]);
            for b in 0..n {
                xx[(a, b)] += wx * xv[b];
                xy[(a, b)] += wx * yv[b];
                yy[(a, b)] += wy * yv[b];
            }
        }
    }
    Gram { xx, xy, yy }
}

/// Orthogonal `A` maximizing `tr(A M)` where `M = X W Y^T`, so that `A X ~ Y`.
fn procrustes(xy: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = xy.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    vt.transpose() * u.transpose()
}

/// `||A X - Y||^2` from Gram blocks.
fn residual2(a: &DMatrix<f64>, g: &Gram) -> f64 {
    let t1 = (a * &g.xx * a.transpose()).trace();
    let t3 = (a * &g.xy).trace();
    (t1 + g.yy.trace() - 2.0 * t3).max(0.0)
}

fn direct_residual(
    a: &DMatrix<f64>,
    rows_x: &[&[f64]],
    rows_y: &[&[f64]],
    src: &[usize],
    w: &[f64],
) -> f64 {
    let n = rows_x.len();
    let mut s = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        for r in 0..n {
            let mut v = -rows_y[r][i];
            for c in 0..n {
                v += a[(r, c)] * rows_x[c][src[i]];
            }
            s += wi * v * v;
        }
    }
    s.sqrt()
}

/// Decides whether two spectral data sets are `delta`-close.
///
/// Clauses (i)-(iii) are decided exactly by [`partition_pair`]. For (iv)
/// and (v) every rotation and reflection that permutes the polar grid is
/// tried as `O`; for each, `A_p` is the orthogonal Procrustes solution of the
/// forward residual and the inverse residual is evaluated with the same
/// `A_p`. The `O` with the smallest worst margin is reported.
pub fn check_delta_close(
    d1: &InteriorSpectralData,
    d2: &InteriorSpectralData,
    delta: f64,
) -> Result<ClosenessReport> {
    if d1.grid != d2.grid {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", d1.grid, d2.grid)));
    }
    d1.validate()?;
    d2.validate()?;
    let grid = &d1.grid;
    let mut report = ClosenessReport {
        pass: false,
        delta,
        violated: Vec::new(),
        partitions: None,
        gauge: None,
        orthogonal: None,
        metric_margin: f64::INFINITY,
        clusters: Vec::new(),
        max_forward: f64::INFINITY,
        max_inverse: f64::INFINITY,
    };
    let (p1, p2) = match partition_pair(&d1.mus(), &d2.mus(), delta)? {
        Ok(pp) => pp,
        Err(reason) => {
            report.violated.push(reason);
            return Ok(report);
        }
    };
    let w1 = d1.weights();
    let w2 = d2.weights();
    let wstd = d1.standard_weights();
    let rows = |d: &'_ InteriorSpectralData, m: &[usize]| -> Vec<Vec<f64>> {
        m.iter().map(|&j| d.eigen[j].psi.clone()).collect()
    };
    let xs: Vec<Vec<Vec<f64>>> = p1.members.iter().map(|m| rows(d1, m)).collect();
    let ys: Vec<Vec<Vec<f64>>> = p2.members.iter().map(|m| rows(d2, m)).collect();

    let mut best: Option<(f64, GridGauge, f64)> = None;
    for gauge in GridGauge::all(grid) {
        let o = gauge.matrix(grid);
        let src = gauge.source_map(grid);
        let mut metric_margin: f64 = 0.0;
        for i in 0..grid.len() {
            let h1 = sym_conjugate(&d1.metric[src[i]], &o);
            let (lo, hi) = sym_pencil_range(&h1, &d2.metric[i]);
            metric_margin = metric_margin.max(hi.max(1.0 / lo) - 1.0);
        }
        let w1s: Vec<f64> = src.iter().map(|&s| w1[s]).collect();
        let mut worst = metric_margin / delta;
        for (x, y) in xs.iter().zip(&ys) {
            if worst > best.map(|b| b.0).unwrap_or(f64::INFINITY) {
                break;
            }
            let xr: Vec<&[f64]> = x.iter().map(|v| v.as_slice()).collect();
            let yr: Vec<&[f64]> = y.iter().map(|v| v.as_slice()).collect();
            let g2 = gram(&xr, &yr, &src, &w2);
            let a = procrustes(&g2.xy);
            let f = residual2(&a, &g2).sqrt();
            let g1 = gram(&xr, &yr, &src, &w1s);
            let inv = residual2(&a, &g1).sqrt();
            worst = worst.max(f / delta).max(inv / delta);
        }
        if best.map(|b| worst < b.0).unwrap_or(true) {
            best = Some((worst, gauge, metric_margin));
        }
    }
    let (_, gauge, metric_margin) = best.expect("at least one gauge");
    let src = gauge.source_map(grid);
    let w1s: Vec<f64> = src.iter().map(|&s| w1[s]).collect();
    let mut max_f: f64 = 0.0;
    let mut max_i: f64 = 0.0;
    for ((x, y), (m1, m2)) in xs.iter().zip(&ys).zip(p1.members.iter().zip(&p2.members)) {
        let xr: Vec<&[f64]> = x.iter().map(|v| v.as_slice()).collect();
        let yr: Vec<&[f64]> = y.iter().map(|v| v.as_slice()).collect();
        let g2 = gram(&xr, &yr, &src, &w2);
        let a = procrustes(&g2.xy);
        let forward = direct_residual(&a, &xr, &yr, &src, &w2);
        let inverse = direct_residual(&a, &xr, &yr, &src, &w1s);
        let forward_standard = direct_residual(&a, &xr, &yr, &src, &wstd);
        let inverse_standard = forward_standard;
        max_f = max_f.max(forward);
        max_i = max_i.max(inverse);
        report.clusters.push(ClusterMargin {
            members1: m1.clone(),
            members2: m2.clone(),
            forward,
            inverse,
            forward_standard,
            inverse_standard,
            mixing: a.transpose().iter().copied().collect(),
        });
    }
    if metric_margin > delta {
        report.violated.push(format!("(iv): metric ratio deviates by {metric_margin:.3e}"));
    }
    if max_f > delta {
        report.violated.push(format!("(v): forward residual {max_f:.3e}"));
    }
    if max_i > delta {
        report.violated.push(format!("(v): inverse residual {max_i:.3e}"));
    }
    report.pass = report.violated.is_empty();
    report.partitions = Some((p1, p2));
    report.gauge = Some(gauge);
    report.orthogonal = Some(gauge.matrix(grid));
    report.metric_margin = metric_margin;
    report.max_forward = max_f;
    report.max_inverse = max_i;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ModelManifold;
    use crate::spectral::{extract_fisd, perturb_delta};
    use std::f64::consts::PI;

    fn data() -> InteriorSpectralData {
        let m = ModelManifold::torus(2.0 * PI, 2.0 * PI);
        extract_fisd(&m, &m.bounds(0.9), 30, 16, 32, None).unwrap()
    }

    #[test]
    fn identical_data_pass_with_zero_margins() {
        let d = data();
        let r = check_delta_close(&d, &d, 1e-3).unwrap();
        assert!(r.pass, "{:?}", r.violated);
        assert!(r.metric_margin < 1e-12);
        assert!(r.max_forward < 1e-6 && r.max_inverse < 1e-6);
    }

    #[test]
    fn roundtrip_passes_and_ten_delta_fails() {
        let d = data();
        for seed in 0..4 {
            let (p, _) = perturb_delta(&d, 1e-2, seed).unwrap();
            let r = check_delta_close(&d, &p, 1e-2).unwrap();
            assert!(r.pass, "seed {seed}: {:?}", r.violated);
            let (q, _) = perturb_delta(&d, 1e-1 / 4.0, seed + 100).unwrap();
            let r = check_delta_close(&d, &q, 1e-2 / 4.0).unwrap();
            assert!(!r.pass);
        }
    }

    #[test]
    fn mismatched_grids_error() {
        let m = ModelManifold::torus(2.0 * PI, 2.0 * PI);
        let a = extract_fisd(&m, &m.bounds(0.9), 3, 16, 32, None).unwrap();
        let b = extract_fisd(&m, &m.bounds(0.9), 3, 16, 16, None).unwrap();
        assert!(matches!(check_delta_close(&a, &b, 1e-2), Err(Error::GridMismatch(_))));
    }
}
