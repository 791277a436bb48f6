use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::InteriorSpectralData;
use crate::error::{invalid, Result};

/// Shortest-path graph on the grid nodes of the annulus
/// `inner <= |y| <= outer`, a ring of nodes on the inner circle, and
/// caller-supplied extra points. Edge lengths
/// are straight-segment lengths in the data metric, and no edge enters the
/// inner disk.
#[derive(Clone, Debug)]
pub struct AnnulusGraph {
    pub coords: Vec<[f64; 2]>,
    /// Number of leading entries of `coords` that are grid or inner-ring nodes.
    pub n_grid: usize,
    pub inner: f64,
    pub outer: f64,
    adj: Vec<Vec<(usize, f64)>>,
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

/// Distance from the origin to the segment `[a, b]`.
fn segment_clearance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let dd = d[0] * d[0] + d[1] * d[1];
    let t = if dd == 0.0 { 0.0 } else { (-(a[0] * d[0] + a[1] * d[1]) / dd).clamp(0.0, 1.0) };
    (a[0] + t * d[0]).hypot(a[1] + t * d[1])
}

impl AnnulusGraph {
    /// Builds the graph; `reach` is the edge length cap in units of the
    /// grid's radial step.
    pub fn build(
        data: &InteriorSpectralData,
        inner: f64,
        outer: f64,
        extra: &[[f64; 2]],
        reach: f64,
    ) -> Result<Self> {
        let g = &data.grid;
        if !(inner >= 0.0 && inner < outer && outer <= g.radius) {
            return invalid(format!("annulus [{inner}, {outer}] must lie inside the data ball"));
        }
        // chords of the inner circle itself dip below it by this much
        let tol = inner * (1.0 - (std::f64::consts::PI / g.n_theta as f64).cos()) + 1e-12;
        let mut coords = Vec::new();
        let mut rings: Vec<(f64, usize)> = Vec::new(); // (radius, first coord index)
        if inner > 0.0 {
            rings.push((inner, 0));
            for it in 0..g.n_theta {
                let t = (it as f64 + 0.5) * g.dtheta();
                coords.push([inner * t.cos(), inner * t.sin()]);
            }
        }
        for ir in 0..g.n_r {
            let r = (ir as f64 + 0.5) * g.dr();
            if r > inner && r <= outer {
                rings.push((r, coords.len()));
                for it in 0..g.n_theta {
                    coords.push(g.node(g.index(ir, it)));
                }
            }
        }
        let n_grid = coords.len();
        for p in extra {
            let r = p[0].hypot(p[1]);
            if r < inner - tol || r > outer + tol {
                return invalid(format!("extra point {p:?} lies outside the annulus"));
            }
            coords.push(*p);
        }
        let cap = reach * g.dr();
        let mut adj = vec![Vec::new(); coords.len()];
        let link = |a: usize, b: usize, adj: &mut Vec<Vec<(usize, f64)>>| {
            let (pa, pb) = (coords[a], coords[b]);
            if segment_clearance(pa, pb) < inner - tol {
                return;
            }
            let w = data.segment_length(pa, pb);
            adj[a].push((b, w));
            adj[b].push((a, w));
        };
        // grid-grid edges within `cap`, using the ring structure
        let dth = g.dtheta();
        let nt = g.n_theta as i64;
        for (ka, &(ra, sa)) in rings.iter().enumerate() {
            for (kb, &(rb, sb)) in rings.iter().enumerate().skip(ka) {
                if rb - ra > cap {
                    break;
                }
                let rmin = ra.min(rb).max(1e-300);
                let steps = ((cap / rmin) / dth).ceil().min((nt / 2) as f64) as i64;
                for it in 0..nt {
                    let a = sa + it as usize;
                    let lo = if kb == ka { 1 } else { -steps };
                    for dt in lo..=steps {
                        let jt = (it + dt).rem_euclid(nt) as usize;
                        let b = sb + jt;
                        if kb == ka && dt > nt / 2 {
                            continue;
                        }
                        let (pa, pb) = (coords[a], coords[b]);
                        if (pa[0] - pb[0]).hypot(pa[1] - pb[1]) <= cap {
                            link(a, b, &mut adj);
                        }
                    }
                }
            }
        }
        // extra points connect to everything within `cap`
        for e in n_grid..coords.len() {
            for b in 0..e {
                let (pa, pb) = (coords[e], coords[b]);
                if (pa[0] - pb[0]).hypot(pa[1] - pb[1]) <= cap {
                    link(e, b, &mut adj);
                }
            }
        }
        for list in adj.iter_mut() {
            list.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
            list.dedup_by_key(|x| x.0);
        }
        let graph = AnnulusGraph { coords, n_grid, inner, outer, adj };
        if n_grid + extra.len() > 0 {
            let d = graph.dijkstra(0);
            if let Some(k) = d.iter().position(|x| !x.is_finite()) {
                return invalid(format!(
                    "annulus graph is disconnected at {:?}; refine the grid or enlarge reach",
                    graph.coords[k]
                ));
            }
        }
        Ok(graph)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Coordinate index of the `k`-th extra point.
    pub fn extra(&self, k: usize) -> usize {
        self.n_grid + k
    }

    pub fn dijkstra(&self, src: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(Item(0.0, src));
        while let Some(Item(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adj[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Item(nd, v));
                }
            }
        }
        dist
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ModelManifold;
    use crate::spectral::extract_fisd;
    use std::f64::consts::PI;

    #[test]
    fn flat_annulus_paths_wrap_the_hole() {
        let m = ModelManifold::torus(2.0 * PI, 2.0 * PI);
        let d = extract_fisd(&m, &m.bounds(0.9), 0, 64, 128, None).unwrap();
        let inner = 0.9 / 25.0;
        let a = [inner, 0.0];
        let b = [-inner, 0.0];
        let c = [0.3, 0.1];
        let g = AnnulusGraph::build(&d, inner, 0.45, &[a, b, c], 3.0).unwrap();
        let dist = g.dijkstra(g.extra(0));
        // half circumference around the hole
        let exact = PI * inner;
        assert!((dist[g.extra(1)] - exact).abs() < 0.1 * exact, "{} vs {exact}", dist[g.extra(1)]);
        let straight = (0.3f64 - inner).hypot(0.1);
        assert!((dist[g.extra(2)] - straight).abs() < 0.03 * straight);
    }
}
