//! Spectral wave fields `w(x, t) = sum_j b_j cos(sqrt(lambda_j) t) phi_j(x)`
//! and their norms on observation cylinders inside the data ball.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::manifold::{Eigenbasis, Point};
use crate::spectral::InteriorSpectralData;

/// `<lambda> = (1 + lambda^2)^(1/2)`.
pub fn bracket(lambda: f64) -> f64 {
    (1.0 + lambda * lambda).sqrt()
}

/// Finite Fourier coefficients with the eigenvalues they refer to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    pub entries: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub s: f64,
}

impl CoefficientVector {
    pub fn new(entries: Vec<f64>, lambdas: Vec<f64>, s: f64) -> Result<Self> {
        if entries.len() != lambdas.len() {
            return invalid(format!("{} coefficients for {} eigenvalues", entries.len(), lambdas.len()));
        }
        if !(s > 1.5 && s < 2.0) {
            return invalid(format!("Sobolev exponent s = {s} must lie in (3/2, 2)"));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return invalid("coefficients must be finite");
        }
        Ok(CoefficientVector { entries, lambdas, s })
    }

    pub fn zeros(lambdas: Vec<f64>, s: f64) -> Result<Self> {
        Self::new(vec![0.0; lambdas.len()], lambdas, s)
    }

    pub fn unit(j: usize, lambdas: Vec<f64>, s: f64) -> Result<Self> {
        let mut e = vec![0.0; lambdas.len()];
        if j >= e.len() {
            return invalid(format!("unit index {j} out of range"));
        }
        e[j] = 1.0;
        Self::new(e, lambdas, s)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Weights `<lambda_j>^s` of the Sobolev norm.
    pub fn sobolev_weights(&self) -> Vec<f64> {
        self.lambdas.iter().map(|&l| bracket(l).powf(self.s)).collect()
    }

    pub fn sobolev_norm(&self) -> f64 {
        self.entries.iter().zip(self.sobolev_weights()).map(|(b, w)| w * b * b).sum::<f64>().sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|b| b * b).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        CoefficientVector { entries: self.entries.iter().map(|x| c * x).collect(), ..self.clone() }
    }

    pub fn with_entries(&self, entries: Vec<f64>) -> Self {
        CoefficientVector { entries, ..self.clone() }
    }
}

/// Field values `w(x, t)` at every `(t, x)`, indexed `[t][x]`.
pub fn synthesize(b: &CoefficientVector, basis: &Eigenbasis, pts: &[Point], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    if b.len() > basis.len() {
        return invalid(format!("{} coefficients but only {} eigenfunctions", b.len(), basis.len()));
    }
    let phi: Vec<Vec<f64>> = pts.iter().map(|x| basis.eval_all(x)).collect();
    Ok(times
        .iter()
        .map(|&t| {
            let c: Vec<f64> =
                b.entries.iter().zip(&b.lambdas).map(|(bj, l)| bj * (l.max(0.0).sqrt() * t).cos()).collect();
            phi.iter().map(|v| c.iter().zip(v).map(|(a, p)| a * p).sum()).collect()
        })
        .collect())
}

/// The same synthesis from ball data: values at every grid node.
pub fn synthesize_on_ball(b: &CoefficientVector, data: &InteriorSpectralData, t: f64) -> Result<Vec<f64>> {
    if b.len() > data.eigen.len() {
        return invalid("more coefficients than eigenpairs in the data");
    }
    let mut out = vec![0.0; data.grid.len()];
    for (bj, e) in b.entries.iter().zip(&data.eigen) {
        let c = bj * (e.mu.max(0.0).sqrt() * t).cos();
        if c != 0.0 {
            for (o, p) in out.iter_mut().zip(&e.psi) {
                *o += c * p;
            }
        }
    }
    Ok(out)
}

/// Space-time set `B(z, r0/16 + gamma) x (-T + r0/16, T - r0/16)`, with `z`
/// given in data (normal) coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationCylinder {
    pub center: [f64; 2],
    pub radius: f64,
    pub half_width: f64,
    pub t: f64,
    pub gamma: f64,
}

impl ObservationCylinder {
    pub fn new(center: [f64; 2], t: f64, r0: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return invalid("gamma must be positive");
        }
        if !(t > r0 / 16.0) {
            return invalid(format!("T = {t} must exceed r0/16 = {}", r0 / 16.0));
        }
        Ok(ObservationCylinder { center, radius: r0 / 16.0 + gamma, half_width: t - r0 / 16.0, t, gamma })
    }

    /// Checks `r0/8 <= T < 2D` and, unless overridden, `gamma <= r0/32`.
    pub fn check_invariants(&self, r0: f64, diameter: f64, allow_gamma_override: bool) -> Result<()> {
        if self.t < r0 / 8.0 || self.t >= 2.0 * diameter {
            return invalid(format!("T = {} outside [r0/8, 2D) = [{}, {})", self.t, r0 / 8.0, 2.0 * diameter));
        }
        if !allow_gamma_override && self.gamma > r0 / 32.0 {
            return invalid(format!("gamma = {} exceeds r0/32 = {}", self.gamma, r0 / 32.0));
        }
        Ok(())
    }
}

/// Masked space-time quadrature of a cylinder on the data grid.
#[derive(Clone, Debug)]
pub struct CylinderQuadrature {
    pub nodes: Vec<usize>,
    pub weights: Vec<f64>,
    pub times: Vec<f64>,
    pub time_weights: Vec<f64>,
}

impl CylinderQuadrature {
    pub fn build(data: &InteriorSpectralData, cyl: &ObservationCylinder) -> Result<Self> {
        let r0 = data.ball_radius();
        let c = cyl.center;
        if c[0].hypot(c[1]) + cyl.radius > r0 {
            return Err(Error::OutsideDataBall { center: c, radius: cyl.radius, ball_radius: r0 });
        }
        let w = data.weights();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for i in 0..data.grid.len() {
            let y = data.grid.node(i);
            if (y[0] - c[0]).hypot(y[1] - c[1]) > 1.5 * cyl.radius {
                continue;
            }
            if data.distance_a(c, y) < cyl.radius {
                nodes.push(i);
                weights.push(w[i]);
            }
        }
        if nodes.is_empty() {
            return invalid("observation cylinder contains no grid nodes");
        }
        let (times, time_weights) = trapezoid(cyl.half_width, cyl.gamma / 4.0);
        Ok(CylinderQuadrature { nodes, weights, times, time_weights })
    }

    pub fn spatial_measure(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Uniform trapezoid rule on `[-h, h]` with step at most `max_step`.
pub fn trapezoid(h: f64, max_step: f64) -> (Vec<f64>, Vec<f64>) {
    let n = ((2.0 * h / max_step).ceil() as usize).max(1);
    let dt = 2.0 * h / n as f64;
    let times = (0..=n).map(|k| -h + k as f64 * dt).collect();
    let weights = (0..=n).map(|k| if k == 0 || k == n { dt / 2.0 } else { dt }).collect();
    (times, weights)
}

/// `||w||_{L^2(cylinder)}` computed from the ball data alone.
pub fn observation_norm(b: &CoefficientVector, cyl: &ObservationCylinder, data: &InteriorSpectralData) -> Result<f64> {
    let q = CylinderQuadrature::build(data, cyl)?;
    observation_norm_with(b, &q, data)
}

pub fn observation_norm_with(b: &CoefficientVector, q: &CylinderQuadrature, data: &InteriorSpectralData) -> Result<f64> {
    if b.len() > data.eigen.len() {
        return invalid("more coefficients than eigenpairs in the data");
    }
    let mut total = 0.0;
    let mut c = vec![0.0; b.len()];
    for (&t, &wt) in q.times.iter().zip(&q.time_weights) {
        for (cj, (bj, e)) in c.iter_mut().zip(b.entries.iter().zip(&data.eigen)) {
            *cj = bj * (e.mu.max(0.0).sqrt() * t).cos();
        }
        for (&i, &wx) in q.nodes.iter().zip(&q.weights) {
            let v: f64 = c.iter().zip(&data.eigen).map(|(cj, e)| cj * e.psi[i]).sum();
            total += wt * wx * v * v;
        }
    }
    Ok(total.sqrt())
}

/// Result of [`energy_bound_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRatio {
    /// `||w||_{L^2(-T, T; H^s)} / ||v||_{H^s}`.
    pub ratio: f64,
    /// `6 sqrt(T)`.
    pub bound_t: f64,
    /// `C_20 = 6 sqrt(1 + D^2)`.
    pub c20: f64,
}

/// Spectral evaluation of the energy ratio, using
/// `int_{-T}^{T} cos^2(w t) dt = T + sin(2 w T) / (2 w)`.
pub fn energy_bound_check(b: &CoefficientVector, t: f64, diameter: f64) -> Result<EnergyRatio> {
    if !(t > 0.0) || t >= 2.0 * diameter {
        return invalid(format!("T = {t} must lie in (0, 2D)"));
    }
    let w = b.sobolev_weights();
    let mut num = 0.0;
    let mut den = 0.0;
    for ((bj, l), wj) in b.entries.iter().zip(&b.lambdas).zip(&w) {
        let om = l.max(0.0).sqrt();
        let ct = if om * t < 1e-8 { 2.0 * t } else { t + (2.0 * om * t).sin() / (2.0 * om) };
        num += wj * bj * bj * ct;
        den += wj * bj * bj;
    }
    let ratio = if den == 0.0 { 0.0 } else { (num / den).sqrt() };
    Ok(EnergyRatio { ratio, bound_t: 6.0 * t.sqrt(), c20: 6.0 * (1.0 + diameter * diameter).sqrt() })
}

/// Writes `(x1, x2, t, w)` rows.
pub fn write_field_csv(path: &Path, pts: &[[f64; 2]], times: &[f64], values: &[Vec<f64>]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "x1,x2,t,w")?;
    for (t, row) in times.iter().zip(values) {
        for (p, v) in pts.iter().zip(row) {
            writeln!(f, "{},{},{},{}", p[0], p[1], t, v)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ModelManifold;
    use crate::spectral::extract_fisd;
    use std::f64::consts::PI;

    #[test]
    fn constant_mode_is_stationary() {
        let m = ModelManifold::torus(2.0 * PI, 2.0 * PI);
        let basis = m.eigenpairs(5).unwrap();
        let b = CoefficientVector::unit(0, basis.lambdas.clone(), 1.75).unwrap();
        let w = synthesize(&b, &basis, &[Point::chart(0.3, 1.0)], &[0.0, 1.0, -2.5]).unwrap();
        for row in w {
            assert!((row[0] - 1.0 / (2.0 * PI)).abs() < 1e-15);
        }
    }

    #[test]
    fn energy_ratio_of_constant() {
        let b = CoefficientVector::unit(0, vec![0.0, 1.0], 1.75).unwrap();
        let r = energy_bound_check(&b, 1.3, 4.0).unwrap();
        assert!((r.ratio - (2.6f64).sqrt()).abs() < 1e-14);
        assert!(r.ratio <= r.bound_t);
    }

    #[test]
    fn cylinder_must_stay_in_ball() {
        let m = ModelManifold::torus(2.0 * PI, 2.0 * PI);
        let d = extract_fisd(&m, &m.bounds(0.9), 2, 16, 32, None).unwrap();
        let c = ObservationCylinder::new([0.85, 0.0], 0.5, 0.9, 0.05).unwrap();
        let b = CoefficientVector::unit(0, d.mus(), 1.75).unwrap();
        assert!(matches!(observation_norm(&b, &c, &d), Err(Error::OutsideDataBall { .. })));
    }
}
