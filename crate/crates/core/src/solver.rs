//! Constrained least-squares minimization producing Fourier coefficients of
//! approximate cut-offs `chi_{M(alpha, -2 gamma)} u`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::manifold::{ModelManifold, Point};
use crate::spectral::InteriorSpectralData;
use crate::wave::{bracket, CoefficientVector, CylinderQuadrature, ObservationCylinder};

/// Radii `alpha_l = A_l gamma` on the net; zero outside `K_i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SliceIndexAlpha {
    pub gamma_bits: u64,
    pub multiples: Vec<u32>,
}

impl SliceIndexAlpha {
    pub fn new(gamma: f64, multiples: Vec<u32>) -> Self {
        SliceIndexAlpha { gamma_bits: gamma.to_bits(), multiples }
    }

    /// Builds an index from radii that must be integral multiples of `gamma`.
    pub fn from_radii(gamma: f64, radii: &[f64]) -> Result<Self> {
        let mut m = Vec::with_capacity(radii.len());
        for &r in radii {
            let k = (r / gamma).round();
            if (r - k * gamma).abs() > 1e-9 * gamma.max(r) || k < 0.0 {
                return invalid(format!("radius {r} is not a multiple of gamma = {gamma}"));
            }
            m.push(k as u32);
        }
        Ok(Self::new(gamma, m))
    }

    pub fn gamma(&self) -> f64 {
        f64::from_bits(self.gamma_bits)
    }

    pub fn radii(&self) -> Vec<f64> {
        self.multiples.iter().map(|&k| k as f64 * self.gamma()).collect()
    }

    /// Indices with a nonzero radius.
    pub fn support(&self) -> Vec<usize> {
        (0..self.multiples.len()).filter(|&l| self.multiples[l] > 0).collect()
    }

    /// Checks `r0/8 <= alpha_l <= 2D` on the support.
    pub fn validate(&self, r0: f64, diameter: f64) -> Result<()> {
        if self.support().is_empty() {
            return invalid("alpha has empty support");
        }
        for l in self.support() {
            let a = self.multiples[l] as f64 * self.gamma();
            if a < r0 / 8.0 - 1e-12 || a > 2.0 * diameter + 1e-12 {
                return invalid(format!("alpha_{l} = {a} outside [r0/8, 2D] = [{}, {}]", r0 / 8.0, 2.0 * diameter));
            }
        }
        Ok(())
    }
}

/// Gram block `G_l^T G_l` of one cylinder with its cached eigensystem.
#[derive(Debug)]
pub struct CylinderBlock {
    pub ell: usize,
    pub cylinder: ObservationCylinder,
    pub quadrature: CylinderQuadrature,
    pub gram: DMatrix<f64>,
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
}

impl CylinderBlock {
    fn build(data: &InteriorSpectralData, ell: usize, cyl: ObservationCylinder) -> Result<Self> {
        let q = CylinderQuadrature::build(data, &cyl)?;
        let n = data.eigen.len();
        let nx = q.nodes.len();
        let nt = q.times.len();
        let psi = DMatrix::from_fn(nx, n, |r, j| q.weights[r].sqrt() * data.eigen[j].psi[q.nodes[r]]);
        let cos = DMatrix::from_fn(nt, n, |r, j| {
            q.time_weights[r].sqrt() * (data.eigen[j].mu.max(0.0).sqrt() * q.times[r]).cos()
        });
        let s = psi.tr_mul(&psi);
        let t = cos.tr_mul(&cos);
        let mut gram = s.component_mul(&t);
        gram = (&gram + gram.transpose()) * 0.5;
        let eig = SymmetricEigen::try_new(gram.clone(), 1e-14, 100_000).ok_or(Error::Unconverged { residual: f64::NAN })?;
        Ok(CylinderBlock { ell, cylinder: cyl, quadrature: q, gram, eigvecs: eig.eigenvectors, eigvals: eig.eigenvalues })
    }

    /// `||G_l b||`.
    pub fn norm(&self, b: &[f64]) -> f64 {
        let v = DVector::from_column_slice(b);
        v.dot(&(&self.gram * &v)).max(0.0).sqrt()
    }

    /// Explicit rows `sqrt(w_x w_t) cos(sqrt(mu_j) t) psi_j(x)`, ordered time-major.
    pub fn dense_rows(&self, data: &InteriorSpectralData) -> DMatrix<f64> {
        let q = &self.quadrature;
        let n = data.eigen.len();
        let rows = q.times.len() * q.nodes.len();
        DMatrix::from_fn(rows, n, |r, j| {
            let (it, ix) = (r / q.nodes.len(), r % q.nodes.len());
            let e = &data.eigen[j];
            (q.time_weights[it] * q.weights[ix]).sqrt() * (e.mu.max(0.0).sqrt() * q.times[it]).cos() * e.psi[q.nodes[ix]]
        })
    }

    /// Euclidean projection onto `{b : ||G_l b|| <= eps}`.
    fn project(&self, c: &[f64], eps: f64) -> Vec<f64> {
        let cv = DVector::from_column_slice(c);
        let hat = self.eigvecs.tr_mul(&cv);
        let lam: Vec<f64> = self.eigvals.iter().map(|&l| l.max(0.0)).collect();
        let h: Vec<f64> = hat.iter().copied().collect();
        let nu = secular_root(&lam, &h, eps * eps);
        if nu == 0.0 {
            return c.to_vec();
        }
        let scaled = DVector::from_iterator(h.len(), h.iter().zip(&lam).map(|(x, l)| x / (1.0 + nu * l)));
        let out = &self.eigvecs * scaled;
        out.iter().copied().collect()
    }
}

/// Smallest `nu >= 0` with `sum_i w_i c_i^2 / (1 + nu w_i)^2 <= r2`.
fn secular_root(w: &[f64], c: &[f64], r2: f64) -> f64 {
    let f = |nu: f64| -> (f64, f64) {
        let mut v = 0.0;
        let mut d = 0.0;
        for (wi, ci) in w.iter().zip(c) {
            let q = 1.0 + nu * wi;
            v += wi * ci * ci / (q * q);
            d += -2.0 * wi * wi * ci * ci / (q * q * q);
        }
        (v - r2, d)
    };
    let (f0, _) = f(0.0);
    if f0 <= 0.0 {
        return 0.0;
    }
    if r2 <= 0.0 {
        return f64::INFINITY;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi).0 > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return hi;
        }
    }
    let mut nu = lo;
    for _ in 0..200 {
        let (v, d) = f(nu);
        if v > 0.0 {
            lo = nu;
        } else {
            hi = nu;
        }
        let mut next = if d < 0.0 { nu - v / d } else { 0.5 * (lo + hi) };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - nu).abs() <= 1e-15 * nu.max(1e-300) || hi - lo <= 1e-15 * hi {
            nu = next;
            break;
        }
        nu = next;
    }
    // return the feasible side
    if f(nu).0 > 0.0 {
        hi
    } else {
        nu
    }
}

/// Stacked observation operator over the cylinders of `alpha`.
#[derive(Clone, Debug)]
pub struct ObservationOperator {
    pub blocks: Vec<Arc<CylinderBlock>>,
}

impl ObservationOperator {
    pub fn norms(&self, b: &[f64]) -> Vec<f64> {
        self.blocks.iter().map(|blk| blk.norm(b)).collect()
    }
}

/// Memo of cylinder blocks for one data set, keyed by cylinder.
#[derive(Default, Debug)]
pub struct OperatorCache {
    map: HashMap<(u64, u64, u32, u64), Arc<CylinderBlock>>,
    pub hits: usize,
    pub misses: usize,
}

impl OperatorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Builds `G` for the cylinders `Gamma~(z_l, alpha_l)`, `l` in the support of
/// `alpha`; `centers` are the net points in data coordinates.
pub fn assemble_observation_operator(
    data: &InteriorSpectralData,
    centers: &[[f64; 2]],
    alpha: &SliceIndexAlpha,
    cache: Option<&mut OperatorCache>,
) -> Result<ObservationOperator> {
    if centers.len() != alpha.multiples.len() {
        return invalid("alpha and net have different lengths");
    }
    let r0 = data.ball_radius();
    let gamma = alpha.gamma();
    let mut local = OperatorCache::new();
    let cache = match cache {
        Some(c) => c,
        None => &mut local,
    };
    let mut blocks = Vec::new();
    for l in alpha.support() {
        let key = (centers[l][0].to_bits(), centers[l][1].to_bits(), alpha.multiples[l], alpha.gamma_bits);
        if let Some(b) = cache.map.get(&key) {
            cache.hits += 1;
            blocks.push(b.clone());
            continue;
        }
        cache.misses += 1;
        let t = alpha.multiples[l] as f64 * gamma;
        let cyl = ObservationCylinder::new(centers[l], t, r0, gamma)?;
        let blk = Arc::new(CylinderBlock::build(data, l, cyl)?);
        cache.map.insert(key, blk.clone());
        blocks.push(blk);
    }
    Ok(ObservationOperator { blocks })
}

/// The feasible set `{||b||_s <= a1, ||b||_2 <= a2, ||G_l b|| <= eps_star}`.
#[derive(Clone, Debug)]
pub struct ConstraintSet {
    pub s: f64,
    pub a1: f64,
    pub a2: f64,
    pub eps_star: f64,
    pub sobolev_weights: Vec<f64>,
    pub operator: ObservationOperator,
}

impl ConstraintSet {
    pub fn new(lambdas: &[f64], s: f64, a1: f64, a2: f64, eps_star: f64, operator: ObservationOperator) -> Self {
        ConstraintSet {
            s,
            a1,
            a2,
            eps_star,
            sobolev_weights: lambdas.iter().map(|&l| bracket(l).powf(s)).collect(),
            operator,
        }
    }

    /// Constraint values minus their caps; nonpositive means satisfied.
    pub fn margins(&self, b: &[f64]) -> Margins {
        let sob = b.iter().zip(&self.sobolev_weights).map(|(x, w)| w * x * x).sum::<f64>().sqrt();
        let l2 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        Margins {
            sobolev: sob - self.a1,
            l2: l2 - self.a2,
            observation: self.operator.norms(b).into_iter().map(|v| v - self.eps_star).collect(),
        }
    }

    fn project_sobolev(&self, c: &[f64]) -> Vec<f64> {
        let nu = secular_root(&self.sobolev_weights, c, self.a1 * self.a1);
        if nu == 0.0 {
            return c.to_vec();
        }
        c.iter().zip(&self.sobolev_weights).map(|(x, w)| x / (1.0 + nu * w)).collect()
    }

    fn project_l2(&self, c: &[f64]) -> Vec<f64> {
        let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n <= self.a2 {
            c.to_vec()
        } else {
            c.iter().map(|x| x * self.a2 / n).collect()
        }
    }

    fn project(&self, k: usize, c: &[f64]) -> Vec<f64> {
        match k {
            0 => self.project_sobolev(c),
            1 => self.project_l2(c),
            _ => self.operator.blocks[k - 2].project(c, self.eps_star),
        }
    }

    fn n_sets(&self) -> usize {
        2 + self.operator.blocks.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub sobolev: f64,
    pub l2: f64,
    pub observation: Vec<f64>,
}

impl Margins {
    pub fn worst(&self) -> f64 {
        self.observation.iter().copied().fold(self.sobolev.max(self.l2), f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizerResult {
    pub b: Vec<f64>,
    pub objective: f64,
    pub margins: Margins,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `||b - a||^2` over the constraint set by Dykstra's cyclic
/// projections, started at `a`. Slow when cylinders overlap strongly; kept
/// as an independent check on [`solve_min`].
pub fn solve_min_dykstra(a: &[f64], c: &ConstraintSet, tol: f64, max_iter: usize) -> Result<MinimizerResult> {
    if a.len() != c.sobolev_weights.len() {
        return invalid("coefficient length does not match the constraint set");
    }
    if !(c.a1 >= 0.0 && c.a2 >= 0.0 && c.eps_star >= 0.0) {
        return invalid("constraint radii must be nonnegative");
    }
    let k = c.n_sets();
    let n = a.len();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let mut x = a.to_vec();
    let mut incr = vec![vec![0.0; n]; k];
    let mut converged = false;
    let mut it = 0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    while it < max_iter {
        it += 1;
        let start = x.clone();
        for (set, p) in incr.iter_mut().enumerate() {
            let z: Vec<f64> = x.iter().zip(p.iter()).map(|(xi, pi)| xi + pi).collect();
            let y = c.project(set, &z);
            for i in 0..n {
                p[i] = z[i] - y[i];
            }
            x = y;
        }
        let moved = x.iter().zip(&start).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        let worst = c.margins(&x).worst();
        if worst <= tol * scale.max(1.0) {
            let obj: f64 = x.iter().zip(a).map(|(u, v)| (u - v) * (u - v)).sum();
            if best.as_ref().map(|b| obj < b.0).unwrap_or(true) {
                best = Some((obj, x.clone()));
            }
            if moved <= tol * scale {
                converged = true;
                break;
            }
        }
    }
    let b = match (converged, best) {
        (true, _) => x,
        (false, Some((_, bx))) => bx,
        (false, None) => x,
    };
    let objective = b.iter().zip(a).map(|(u, v)| (u - v) * (u - v)).sum();
    Ok(MinimizerResult { margins: c.margins(&b), b, objective, iterations: it, converged })
}

/// Minimizes `||b - a||^2` over the constraint set by projected Newton ascent
/// on the Lagrange dual. Each constraint is a quadric `b^T Q_k b <= r_k^2`, so
/// `b(nu) = (I + sum nu_k Q_k)^-1 a` and the dual Hessian is
/// `-2 V^T (I + sum nu_k Q_k)^-1 V` with `V = [Q_k b]`. Stops once `b(nu)`
/// is feasible to `tol` and the duality gap is below `tol * ||a||^2`.
pub fn solve_min(a: &[f64], c: &ConstraintSet, tol: f64, max_iter: usize) -> Result<MinimizerResult> {
    if a.len() != c.sobolev_weights.len() {
        return invalid("coefficient length does not match the constraint set");
    }
    if !(c.a1 >= 0.0 && c.a2 >= 0.0 && c.eps_star >= 0.0) {
        return invalid("constraint radii must be nonnegative");
    }
    let n = a.len();
    let k = c.n_sets();
    let av = DVector::from_column_slice(a);
    let scale = av.norm().max(1e-300);
    let q_mul = |set: usize, b: &DVector<f64>| -> DVector<f64> {
        match set {
            0 => b.component_mul(&DVector::from_column_slice(&c.sobolev_weights)),
            1 => b.clone(),
            _ => &c.operator.blocks[set - 2].gram * b,
        }
    };
    let radius2 = |set: usize| match set {
        0 => c.a1 * c.a1,
        1 => c.a2 * c.a2,
        _ => c.eps_star * c.eps_star,
    };
    // b(nu), the Cholesky factor of I + sum nu Q, and the dual value
    let eval = |nu: &[f64]| -> Option<(DVector<f64>, nalgebra::Cholesky<f64, nalgebra::Dyn>, f64, Vec<f64>)> {
        let mut m = DMatrix::<f64>::identity(n, n);
        for i in 0..n {
            m[(i, i)] += nu[0] * c.sobolev_weights[i] + nu[1];
        }
        for (j, blk) in c.operator.blocks.iter().enumerate() {
            if nu[j + 2] > 0.0 {
                m += &blk.gram * nu[j + 2];
            }
        }
        let ch = m.cholesky()?;
        let b = ch.solve(&av);
        let h: Vec<f64> = (0..k).map(|set| b.dot(&q_mul(set, &b)) - radius2(set)).collect();
        let g = (&b - &av).norm_squared() + nu.iter().zip(&h).map(|(x, y)| x * y).sum::<f64>();
        Some((b, ch, g, h))
    };

    let mut nu = vec![0.0; k];
    let (mut b, mut ch, mut g, mut h) = eval(&nu).ok_or(Error::Unconverged { residual: f64::NAN })?;
    let mut converged = false;
    let mut it = 0;
    while it < max_iter {
        let worst = c.margins(b.as_slice()).worst();
        let gap: f64 = nu.iter().zip(&h).map(|(x, y)| x * y.abs()).sum();
        if worst <= tol * scale.max(1.0) && gap <= tol * scale * scale {
            converged = true;
            break;
        }
        it += 1;
        let free: Vec<usize> = (0..k).filter(|&j| nu[j] > 0.0 || h[j] > 0.0).collect();
        if free.is_empty() {
            converged = true;
            break;
        }
        let v: Vec<DVector<f64>> = free.iter().map(|&j| q_mul(j, &b)).collect();
        let av_inv: Vec<DVector<f64>> = v.iter().map(|x| ch.solve(x)).collect();
        let f = free.len();
        let mut hess = DMatrix::from_fn(f, f, |i, j| 2.0 * v[i].dot(&av_inv[j]));
        let tr = (0..f).map(|i| hess[(i, i)]).sum::<f64>().max(1e-300);
        for i in 0..f {
            hess[(i, i)] += 1e-13 * tr;
        }
        let grad = DVector::from_iterator(f, free.iter().map(|&j| h[j]));
        let step = match hess.clone().cholesky() {
            Some(hc) => hc.solve(&grad),
            None => grad.clone(),
        };
        // backtracking on the projected step
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let mut trial = nu.clone();
            for (i, &j) in free.iter().enumerate() {
                trial[j] = (nu[j] + t * step[i]).max(0.0);
            }
            if let Some((b2, ch2, g2, h2)) = eval(&trial) {
                if g2 >= g - 1e-15 * g.abs().max(1.0) {
                    let stalled = trial == nu;
                    nu = trial;
                    b = b2;
                    ch = ch2;
                    g = g2;
                    h = h2;
                    accepted = !stalled;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let bv: Vec<f64> = b.iter().copied().collect();
    let objective = (&b - &av).norm_squared();
    Ok(MinimizerResult { margins: c.margins(&bv), b: bv, objective, iterations: it, converged })
}

/// Accuracy parameters for slicing. `eps_star` overrides the class value
/// `eps2 / (2m)` when set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceParams {
    pub s: f64,
    pub lambda_s: f64,
    pub c17: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub m: u32,
    pub eps_star: Option<f64>,
    /// When set, `eps_star = factor * min_l ||G_l a||`; takes precedence
    /// over `eps_star`.
    pub eps_relative: Option<f64>,
    /// Practical (non-paper) values are in use; chain relations are not enforced.
    pub overrides: bool,
    pub tol: f64,
    pub max_iter: usize,
}

impl SliceParams {
    /// Practical defaults for desk-scale runs.
    pub fn practical(eps_star: f64) -> Self {
        SliceParams {
            s: 1.75,
            lambda_s: 1.0,
            c17: 1e6,
            eps0: 0.05,
            eps1: 0.05,
            eps2: 2.0 * eps_star,
            m: 1,
            eps_star: Some(eps_star),
            eps_relative: None,
            overrides: true,
            tol: 1e-9,
            max_iter: 20_000,
        }
    }

    /// Practical defaults with the data-driven rule `eps* = f ||G a||`.
    pub fn practical_relative(f: f64) -> Self {
        SliceParams { eps_star: None, eps_relative: Some(f), ..Self::practical(0.0) }
    }

    pub fn class_radii(&self) -> (f64, f64, f64) {
        let m = self.m as f64;
        let eps = self.eps_star.unwrap_or(self.eps2 / (2.0 * m));
        (self.c17 * self.lambda_s / m, self.lambda_s, eps)
    }

    /// Checks the relations between the accuracy parameters.
    pub fn audit(&self, gamma: f64, r0: f64, l: usize) -> Result<()> {
        if ![1, 2, 4].contains(&self.m) {
            return invalid(format!("class index m = {} must be 1, 2 or 4", self.m));
        }
        if !(self.s > 1.5 && self.s < 2.0) {
            return invalid("s must lie in (3/2, 2)");
        }
        if self.overrides {
            return Ok(());
        }
        let chk = |ok: bool, what: &str| if ok { Ok(()) } else { Err(Error::ChainViolation(what.to_string())) };
        chk(self.lambda_s >= 1.0, "Lambda_s >= 1")?;
        chk(self.eps0 <= self.lambda_s / 10.0, "eps0 <= Lambda_s / 10")?;
        let e1 = self.eps0 * self.eps0 / (10.0 * self.lambda_s);
        chk((self.eps1 - e1).abs() <= 1e-12 * e1, "eps1 = eps0^2 / (10 Lambda_s)")?;
        chk(self.eps2 <= self.eps1 / (4.0 * l as f64), "eps2 <= eps1 / (4L)")?;
        chk(gamma <= r0 / 32.0, "gamma <= r0/32")?;
        Ok(())
    }
}

/// Output of [`slice_coefficients`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceResult {
    pub d: Vec<f64>,
    pub minimizer: MinimizerResult,
    pub eps_star: f64,
    pub a1: f64,
    pub a2: f64,
}

/// `d = a - b` with `b` the minimizer in the class `C*_m` built from the
/// given (exact or perturbed) data.
pub fn slice_coefficients(
    a: &CoefficientVector,
    data: &InteriorSpectralData,
    centers: &[[f64; 2]],
    alpha: &SliceIndexAlpha,
    params: &SliceParams,
    cache: Option<&mut OperatorCache>,
) -> Result<SliceResult> {
    params.audit(alpha.gamma(), data.ball_radius(), alpha.support().len())?;
    if a.len() != data.eigen.len() {
        return invalid(format!("{} coefficients for {} eigenpairs", a.len(), data.eigen.len()));
    }
    let op = assemble_observation_operator(data, centers, alpha, cache)?;
    let (a1, a2, mut eps) = params.class_radii();
    if let Some(f) = params.eps_relative {
        eps = f * op.norms(&a.entries).into_iter().fold(f64::INFINITY, f64::min);
    }
    let c = ConstraintSet::new(&data.mus(), params.s, a1, a2, eps, op);
    let res = solve_min(&a.entries, &c, params.tol, params.max_iter)?;
    let d = a.entries.iter().zip(&res.b).map(|(x, y)| x - y).collect();
    Ok(SliceResult { d, minimizer: res, eps_star: eps, a1, a2 })
}

/// Noisy-data variant: the same algorithm on perturbed data in the `m = 2`
/// class.
pub fn slice_coefficients_noisy(
    a_tilde: &CoefficientVector,
    perturbed: &InteriorSpectralData,
    centers: &[[f64; 2]],
    alpha: &SliceIndexAlpha,
    params: &SliceParams,
    delta: f64,
    cache: Option<&mut OperatorCache>,
) -> Result<SliceResult> {
    if !(delta >= 0.0 && delta < 1.0) {
        return invalid("delta must lie in [0, 1)");
    }
    let mut p = params.clone();
    if !p.overrides {
        p.m = 2;
    }
    slice_coefficients(a_tilde, perturbed, centers, alpha, &p, cache)
}

/// Oracle: coefficients of `P_{j0}(chi u)` where `chi` is the indicator of
/// `union_l B(z_l, rho_l)`, by whole-manifold quadrature.
pub fn oracle_projection(
    m: &ModelManifold,
    u: &[f64],
    centers: &[Point],
    radii: &[f64],
    j0: usize,
    resolution: usize,
) -> Result<Vec<f64>> {
    if centers.len() != radii.len() {
        return invalid("centers and radii differ in length");
    }
    let n = j0 + 1;
    let basis = m.eigenpairs(n.max(u.len()))?;
    let q = m.quadrature(resolution);
    let mut out = vec![0.0; n];
    let mut vals = vec![0.0; basis.len()];
    for (x, w) in q.nodes.iter().zip(&q.weights) {
        let inside = centers.iter().zip(radii).any(|(z, &r)| r > 0.0 && m.geodesic_distance(x, z) < r);
        if !inside {
            continue;
        }
        basis.eval_into(x, &mut vals);
        let ux: f64 = u.iter().zip(&vals).map(|(a, p)| a * p).sum();
        for (o, p) in out.iter_mut().zip(&vals) {
            *o += w * ux * p;
        }
    }
    Ok(out)
}
