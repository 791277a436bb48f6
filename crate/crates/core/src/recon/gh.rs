use serde::{Deserialize, Serialize};

use super::FiniteMetricSpace;
use crate::error::{invalid, Result};
use crate::manifold::{separated_net, ModelManifold, Region};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhBound {
    /// Half the distortion of the correspondence.
    pub bound: f64,
    pub distortion: f64,
    pub correspondence_size: usize,
    pub landmarks: usize,
}

fn farthest_landmarks(x: &FiniteMetricSpace, k: usize) -> Vec<usize> {
    let n = x.len();
    let mut marks = vec![x.base_index];
    let mut near: Vec<f64> = (0..n).map(|i| x.d(i, x.base_index)).collect();
    while marks.len() < k.min(n) {
        let (far, _) = near.iter().enumerate().fold((0, -1.0), |b, (i, &d)| if d > b.1 { (i, d) } else { b });
        if near[far] <= 0.0 {
            break;
        }
        marks.push(far);
        for i in 0..n {
            near[i] = near[i].min(x.d(i, far));
        }
    }
    marks
}

fn best_match(x: &FiniteMetricSpace, y: &FiniteMetricSpace, i: usize, ax: &[usize], ay: &[usize]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for j in 0..y.len() {
        let mut dev: f64 = 0.0;
        for (a, b) in ax.iter().zip(ay) {
            dev = dev.max((x.d(i, *a) - y.d(j, *b)).abs());
            if dev >= best.0 {
                break;
            }
        }
        if dev < best.0 {
            best = (dev, j);
        }
    }
    best.1
}

/// Upper bound for the pointed Gromov-Hausdorff distance.
///
/// Base points are matched; farthest-point landmarks of `X` are matched one
/// at a time by their distance profile to the already matched landmarks;
/// then each point of either space is matched to the point of the other
/// with the closest profile. Half the distortion of the resulting
/// correspondence is returned.
pub fn gh_upper_bound(x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> Result<GhBound> {
    if x.is_empty() || y.is_empty() {
        return invalid("GH bound needs nonempty spaces");
    }
    let k = 8;
    let lx = farthest_landmarks(x, k);
    let mut ly = vec![y.base_index];
    for &l in &lx[1..] {
        let j = best_match(x, y, l, &lx[..ly.len()], &ly);
        ly.push(j);
    }
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(x.len() + y.len());
    pairs.push((x.base_index, y.base_index));
    for i in 0..x.len() {
        pairs.push((i, best_match(x, y, i, &lx, &ly)));
    }
    for j in 0..y.len() {
        pairs.push((best_match(y, x, j, &ly, &lx), j));
    }
    pairs.sort_unstable();
    pairs.dedup();
    let mut dist: f64 = 0.0;
    for (a, &(i, j)) in pairs.iter().enumerate() {
        for &(i2, j2) in &pairs[a + 1..] {
            dist = dist.max((x.d(i, i2) - y.d(j, j2)).abs());
        }
    }
    Ok(GhBound { bound: dist / 2.0, distortion: dist, correspondence_size: pairs.len(), landmarks: lx.len() })
}

/// Ground-truth space: the base point followed by a `spacing`-separated net
/// of the whole manifold, with geodesic distances. Returns the space and
/// the net's covering radius.
pub fn truth_space(m: &ModelManifold, spacing: f64, seed: u64) -> Result<(FiniteMetricSpace, f64)> {
    let net = separated_net(m, &Region::Whole, spacing, seed)?;
    let mut pts = vec![m.base_point];
    pts.extend(net.points.into_iter().filter(|q| m.geodesic_distance(q, &m.base_point) >= spacing));
    let n = pts.len();
    let mut mat = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let d = m.geodesic_distance(&pts[i], &pts[j]);
            mat[i * n + j] = d;
            mat[j * n + i] = d;
        }
    }
    let labels = (0..n).map(|i| format!("x{i}")).collect();
    Ok((FiniteMetricSpace::new(labels, 0, mat)?, net.covering_radius.max(spacing)))
}

/// Length of the shortest path from `x` to `y` in the plane avoiding the
/// open disc `B(c, r)`.
fn avoid_disc(x: [f64; 2], y: [f64; 2], c: [f64; 2], r: f64) -> f64 {
    let d = [y[0] - x[0], y[1] - x[1]];
    let dd = d[0] * d[0] + d[1] * d[1];
    let len = dd.sqrt();
    let t = if dd == 0.0 { 0.0 } else { (((c[0] - x[0]) * d[0] + (c[1] - x[1]) * d[1]) / dd).clamp(0.0, 1.0) };
    let clear = (x[0] + t * d[0] - c[0]).hypot(x[1] + t * d[1] - c[1]);
    if clear >= r * (1.0 - 1e-12) {
        return len;
    }
    let (ax, ay) = (x[0] - c[0], x[1] - c[1]);
    let (bx, by) = (y[0] - c[0], y[1] - c[1]);
    let (ra, rb) = (ax.hypot(ay).max(r), bx.hypot(by).max(r));
    let theta = ((ax * bx + ay * by) / (ra * rb)).clamp(-1.0, 1.0).acos();
    let arc = theta - (r / ra).min(1.0).acos() - (r / rb).min(1.0).acos();
    (ra * ra - r * r).max(0.0).sqrt() + (rb * rb - r * r).max(0.0).sqrt() + r * arc.max(0.0)
}

/// Distance in the flat torus `[0, l1) x [0, l2)` with the open disc
/// `B(c, r)` removed, for `r` well below the periods.
pub fn torus_obstacle_distance(l1: f64, l2: f64, c: [f64; 2], r: f64, x: [f64; 2], y: [f64; 2]) -> f64 {
    let mut best = f64::INFINITY;
    for i in -1..=1 {
        for j in -1..=1 {
            let yt = [y[0] + i as f64 * l1, y[1] + j as f64 * l2];
            // the disc translate nearest to the segment midpoint
            let mid = [(x[0] + yt[0]) / 2.0, (x[1] + yt[1]) / 2.0];
            let ct = [
                c[0] + ((mid[0] - c[0]) / l1).round() * l1,
                c[1] + ((mid[1] - c[1]) / l2).round() * l2,
            ];
            // a segment shorter than the period meets at most one translate,
            // which need not be the one nearest the midpoint
            let mut v: f64 = 0.0;
            for di in -1..=1 {
                for dj in -1..=1 {
                    let c2 = [ct[0] + di as f64 * l1, ct[1] + dj as f64 * l2];
                    v = v.max(avoid_disc(x, yt, c2, r));
                }
            }
            best = best.min(v);
        }
    }
    best
}

/// `min(d_xy, min_{z1, z2} [a(z1) + dzz(z1, z2) + b(z2)])`.
pub fn through_ball_min(d_xy: f64, a: &[f64], dzz: &[Vec<f64>], b: &[f64]) -> f64 {
    let mut best = d_xy;
    for (z1, &a1) in a.iter().enumerate() {
        if a1 >= best {
            continue;
        }
        for (z2, &b2) in b.iter().enumerate() {
            best = best.min(a1 + dzz[z1][z2] + b2);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn disc_detour_is_half_circle_for_diametric_points() {
        let v = avoid_disc([-1.0, 0.0], [1.0, 0.0], [0.0, 0.0], 1.0);
        assert!((v - PI).abs() < 1e-12);
        let w = avoid_disc([-2.0, 0.0], [2.0, 0.0], [0.0, 0.0], 1.0);
        let exact = 2.0 * 3f64.sqrt() + 2.0 * (PI / 2.0 - (0.5f64).acos());
        assert!((w - exact).abs() < 1e-12);
    }

    #[test]
    fn obstacle_distance_equals_torus_distance_when_unblocked() {
        let l = 2.0 * PI;
        let d = torus_obstacle_distance(l, l, [0.0, 0.0], 0.05, [1.0, 1.0], [6.0, 1.5]);
        let exact = (l - 5.0f64).hypot(0.5);
        assert!((d - exact).abs() < 1e-12);
    }

    #[test]
    fn identical_spaces_have_zero_bound() {
        let m = ModelManifold::torus(2.0 * PI, 2.0 * PI);
        let (x, _) = truth_space(&m, 0.8, 1).unwrap();
        assert_eq!(gh_upper_bound(&x, &x).unwrap().bound, 0.0);
    }
}
