use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ManifoldKind, ModelManifold, Point};
use crate::error::{invalid, Result};

/// Region in which a net is built.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Whole,
    Ball { center: Point, radius: f64 },
    Annulus { center: Point, inner: f64, outer: f64 },
}

/// Output of [`separated_net`].
#[derive(Clone, Debug)]
pub struct NetReport {
    pub points: Vec<Point>,
    /// Smallest pairwise distance in the net (infinite for one point).
    pub min_separation: f64,
    /// Largest distance from a candidate sample to the net.
    pub covering_radius: f64,
    /// Packing constant `|net| * sigma^n`.
    pub packing_constant: f64,
    /// Spacing of the candidate samples the net was drawn from.
    pub sample_spacing: f64,
}

/// Sample points of a region on a grid of the given spacing.
pub fn region_samples(m: &ModelManifold, region: &Region, spacing: f64) -> Result<Vec<Point>> {
    if !(spacing > 0.0) {
        return invalid("region sampling spacing must be positive");
    }
    match region {
        Region::Whole => {
            let res = match &m.kind {
                ManifoldKind::FlatTorus2d { l1, .. } => (l1 / spacing).ceil() as usize,
                ManifoldKind::RoundSphere2d { radius } => (std::f64::consts::PI * radius / spacing).ceil() as usize,
                ManifoldKind::Mesh2d(_) => 0,
            };
            Ok(m.quadrature(res.clamp(2, 600)).nodes)
        }
        Region::Ball { center, radius } => disk_samples(m, center, 0.0, *radius, spacing),
        Region::Annulus { center, inner, outer } => disk_samples(m, center, *inner, *outer, spacing),
    }
}

fn disk_samples(m: &ModelManifold, c: &Point, inner: f64, outer: f64, h: f64) -> Result<Vec<Point>> {
    if m.is_mesh() {
        let q = m.quadrature(0);
        return Ok(q
            .nodes
            .into_iter()
            .filter(|x| {
                let d = m.geodesic_distance(c, x);
                d >= inner && d < outer
            })
            .collect());
    }
    let n = (outer / h).ceil() as i64;
    let mut out = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            let v = [i as f64 * h, j as f64 * h];
            let r = (v[0] * v[0] + v[1] * v[1]).sqrt();
            if r >= inner && r < outer {
                out.push(m.exp_map(c, v)?);
            }
        }
    }
    Ok(out)
}

/// Maximal `sigma`-separated set of a region by greedy farthest-point
/// insertion; the seed selects the first point.
pub fn separated_net(m: &ModelManifold, region: &Region, sigma: f64, seed: u64) -> Result<NetReport> {
    if !(sigma > 0.0) {
        return invalid("separated_net: sigma must be positive");
    }
    let spacing = match region {
        Region::Whole => sigma / 4.0,
        Region::Ball { radius, .. } => (sigma / 6.0).min(radius / 20.0),
        Region::Annulus { inner, outer, .. } => (sigma / 6.0).min((outer - inner) / 10.0),
    };
    let cand = region_samples(m, region, spacing)?;
    if cand.is_empty() {
        return invalid("separated_net: region contains no sample points");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.gen_range(0..cand.len());
    let mut mind = vec![f64::INFINITY; cand.len()];
    let mut chosen = vec![start];
    let mut min_sep = f64::INFINITY;
    let mut last = start;
    loop {
        for (i, c) in cand.iter().enumerate() {
            let d = m.geodesic_distance(&cand[last], c);
            if d < mind[i] {
                mind[i] = d;
            }
        }
        let (best, bd) = mind
            .iter()
            .enumerate()
            .fold((0usize, -1.0), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        if bd < sigma {
            break;
        }
        for &c in &chosen {
            min_sep = min_sep.min(m.geodesic_distance(&cand[c], &cand[best]));
        }
        chosen.push(best);
        last = best;
    }
    let covering = mind.iter().cloned().fold(0.0, f64::max);
    let points: Vec<Point> = chosen.iter().map(|&i| cand[i]).collect();
    Ok(NetReport {
        packing_constant: points.len() as f64 * sigma.powi(m.dim() as i32),
        points,
        min_separation: min_sep,
        covering_radius: covering,
        sample_spacing: spacing,
    })
}

/// Distance-coordinate map `H(x) = (d(x, z_j))_j`.
#[derive(Clone, Debug)]
pub struct DistanceCoordinates<'a> {
    pub manifold: &'a ModelManifold,
    pub net: Vec<Point>,
}

impl<'a> DistanceCoordinates<'a> {
    pub fn new(manifold: &'a ModelManifold, net: Vec<Point>) -> Result<Self> {
        if net.is_empty() {
            return invalid("distance coordinates need a nonempty net");
        }
        Ok(DistanceCoordinates { manifold, net })
    }

    pub fn eval(&self, x: &Point) -> Vec<f64> {
        self.net.iter().map(|z| self.manifold.geodesic_distance(x, z)).collect()
    }

    /// Extremes of `d(x, y) / |H(x) - H(y)|` over the given pairs; pairs with
    /// coinciding coordinates are skipped (and counted).
    pub fn ratio_bounds(&self, pairs: &[(Point, Point)]) -> (f64, f64, usize) {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        let mut degenerate = 0;
        for (x, y) in pairs {
            let hx = self.eval(x);
            let hy = self.eval(y);
            let e = hx.iter().zip(&hy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let d = self.manifold.geodesic_distance(x, y);
            if e == 0.0 {
                degenerate += 1;
                continue;
            }
            lo = lo.min(d / e);
            hi = hi.max(d / e);
        }
        (lo, hi, degenerate)
    }
}
