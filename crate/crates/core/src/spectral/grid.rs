use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Polar grid on the data ball in Riemannian normal coordinates.
///
/// Nodes sit at radial midpoints `(i + 1/2) dr` and angular midpoints
/// `(k + 1/2) dtheta`, so rotations by multiples of `dtheta` and the
/// reflection `theta -> -theta` permute the nodes exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallGrid {
    pub radius: f64,
    pub n_r: usize,
    pub n_theta: usize,
}

impl BallGrid {
    pub fn new(radius: f64, n_r: usize, n_theta: usize) -> Self {
        BallGrid { radius, n_r, n_theta }
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dr(&self) -> f64 {
        self.radius / self.n_r as f64
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    /// Largest distance between neighbouring nodes (outer arc or radial step).
    pub fn max_spacing(&self) -> f64 {
        self.dr().max(self.radius * self.dtheta())
    }

    pub fn index(&self, ir: usize, it: usize) -> usize {
        ir * self.n_theta + it
    }

    pub fn polar(&self, i: usize) -> (f64, f64) {
        let ir = i / self.n_theta;
        let it = i % self.n_theta;
        ((ir as f64 + 0.5) * self.dr(), (it as f64 + 0.5) * self.dtheta())
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        let (r, t) = self.polar(i);
        [r * t.cos(), r * t.sin()]
    }

    pub fn nodes(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Euclidean area element `r dr dtheta` of node `i` in normal coordinates.
    pub fn base_weight(&self, i: usize) -> f64 {
        let (r, _) = self.polar(i);
        r * self.dr() * self.dtheta()
    }

    /// Bilinear interpolation stencil in `(r, theta)`; radii outside the
    /// node rings are clamped to the nearest ring.
    pub fn stencil(&self, v: [f64; 2]) -> [(usize, f64); 4] {
        let r = (v[0] * v[0] + v[1] * v[1]).sqrt();
        let t = v[1].atan2(v[0]).rem_euclid(2.0 * PI);
        let fr = (r / self.dr() - 0.5).clamp(0.0, (self.n_r - 1) as f64);
        let ir0 = (fr.floor() as usize).min(self.n_r.saturating_sub(2));
        let ir1 = (ir0 + 1).min(self.n_r - 1);
        let ar = if ir1 == ir0 { 0.0 } else { fr - ir0 as f64 };
        let ft = t / self.dtheta() - 0.5;
        let it0 = ft.floor();
        let at = ft - it0;
        let n = self.n_theta as i64;
        let it0 = (it0 as i64).rem_euclid(n) as usize;
        let it1 = (it0 + 1) % self.n_theta;
        [
            (self.index(ir0, it0), (1.0 - ar) * (1.0 - at)),
            (self.index(ir0, it1), (1.0 - ar) * at),
            (self.index(ir1, it0), ar * (1.0 - at)),
            (self.index(ir1, it1), ar * at),
        ]
    }
}

/// Orthogonal map of the grid onto itself: rotation by `steps * dtheta`,
/// composed with the reflection `theta -> -theta` when `reflect` is set
/// (`O = R F`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridGauge {
    pub steps: usize,
    pub reflect: bool,
}

impl GridGauge {
    pub fn identity() -> Self {
        GridGauge { steps: 0, reflect: false }
    }

    pub fn all(grid: &BallGrid) -> Vec<GridGauge> {
        let mut out = Vec::with_capacity(2 * grid.n_theta);
        for reflect in [false, true] {
            for steps in 0..grid.n_theta {
                out.push(GridGauge { steps, reflect });
            }
        }
        out
    }

    pub fn matrix(&self, grid: &BallGrid) -> [[f64; 2]; 2] {
        let phi = self.steps as f64 * grid.dtheta();
        let (s, c) = phi.sin_cos();
        if self.reflect {
            [[c, s], [s, -c]]
        } else {
            [[c, -s], [s, c]]
        }
    }

    pub fn inverse(&self, grid: &BallGrid) -> GridGauge {
        if self.reflect {
            *self
        } else {
            GridGauge { steps: (grid.n_theta - self.steps) % grid.n_theta, reflect: false }
        }
    }

    /// Index of the node `O^T y_i`, so that `(O_* f)(y_i) = f(y_src)`.
    pub fn source(&self, grid: &BallGrid, i: usize) -> usize {
        let ir = i / grid.n_theta;
        let it = (i % grid.n_theta) as i64;
        let n = grid.n_theta as i64;
        let s = self.steps as i64;
        let jt = if self.reflect { (s - it - 1).rem_euclid(n) } else { (it - s).rem_euclid(n) };
        grid.index(ir, jt as usize)
    }

    /// Push-forward `O_* f` of nodal values.
    pub fn push<T: Copy>(&self, grid: &BallGrid, f: &[T]) -> Vec<T> {
        (0..grid.len()).map(|i| f[self.source(grid, i)]).collect()
    }

    pub fn source_map(&self, grid: &BallGrid) -> Vec<usize> {
        (0..grid.len()).map(|i| self.source(grid, i)).collect()
    }
}
