use isd_core::manifold::ModelManifold;
use isd_core::solver::*;
use isd_core::spectral::{extract_fisd, InteriorSpectralData};
use isd_core::wave::{observation_norm, CoefficientVector, ObservationCylinder};
use proptest::prelude::*;
use std::f64::consts::PI;

fn torus_data(j: usize, n_r: usize, n_theta: usize) -> InteriorSpectralData {
    let m = ModelManifold::torus(2.0 * PI, 2.0 * PI);
    extract_fisd(&m, &m.bounds(0.9), j, n_r, n_theta, None).unwrap()
}

fn operator(data: &InteriorSpectralData, centers: &[[f64; 2]], radii: &[f64]) -> ObservationOperator {
    let alpha = SliceIndexAlpha::from_radii(0.05, radii).unwrap();
    assemble_observation_operator(data, centers, &alpha, None).unwrap()
}

/// Zooming grid search over the feasible set: `n` points per axis, the box
/// shrinks around the best feasible node until its half-width is tiny.
fn grid_min(a: &[f64], c: &ConstraintSet, n: usize) -> f64 {
    let d = a.len();
    let mut center = vec![0.0; d];
    let mut half = a.iter().map(|x| x * x).sum::<f64>().sqrt() * 1.05;
    let mut best = a.iter().map(|x| x * x).sum::<f64>(); // b = 0 is feasible
    let mut idx = vec![0usize; d];
    let mut b = vec![0.0; d];
    while half > 1e-10 {
        let step = 2.0 * half / (n - 1) as f64;
        let mut best_pt = center.clone();
        idx.iter_mut().for_each(|i| *i = 0);
        loop {
            for k in 0..d {
                b[k] = center[k] - half + idx[k] as f64 * step;
            }
            let obj: f64 = b.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum();
            if obj < best && c.margins(&b).worst() <= 0.0 {
                best = obj;
                best_pt.copy_from_slice(&b);
            }
            let mut k = 0;
            while k < d {
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        center = best_pt;
        half = 2.0 * step;
    }
    best
}

fn toy(j: usize, a: &[f64], a1: f64, eps_star: f64) -> (ConstraintSet, Vec<f64>) {
    let data = torus_data(j, 12, 24);
    let op = operator(&data, &[[0.0, 0.0]], &[0.6]);
    let c = ConstraintSet::new(&data.mus(), 1.75, a1, 1.0, eps_star, op);
    (c, a.to_vec())
}

#[test]
fn solver_matches_grid_search_on_three_coefficients() {
    let a = [0.8, 0.5, -0.3];
    let (c, a) = toy(2, &a, 1.2, 0.02);
    let r = solve_min(&a, &c, 1e-12, 500).unwrap();
    assert!(r.converged);
    assert!(r.objective > 1e-3, "constraints inactive: {}", r.objective);
    let g = grid_min(&a, &c, 41);
    assert!((r.objective - g).abs() <= 1e-6, "solver {} grid {}", r.objective, g);
    assert!(r.margins.worst() <= 1e-9);
}

#[test]
fn solver_matches_grid_search_on_five_coefficients() {
    let a = [0.6, 0.4, -0.3, 0.2, 0.35];
    let (c, a) = toy(4, &a, 1.0, 0.03);
    let r = solve_min(&a, &c, 1e-12, 500).unwrap();
    assert!(r.converged);
    assert!(r.objective > 1e-3, "constraints inactive: {}", r.objective);
    let g = grid_min(&a, &c, 9);
    assert!((r.objective - g).abs() <= 1e-6, "solver {} grid {}", r.objective, g);
    let dk = solve_min_dykstra(&a, &c, 1e-12, 200_000).unwrap();
    assert!((dk.objective - r.objective).abs() <= 1e-6);
}

#[test]
fn feasible_input_is_returned_unchanged() {
    let (c, _) = toy(4, &[0.0; 5], 10.0, 10.0);
    let a = [0.01, -0.02, 0.0, 0.01, 0.0];
    let r = solve_min(&a, &c, 1e-12, 100).unwrap();
    assert_eq!(r.b, a.to_vec());
    assert_eq!(r.objective, 0.0);
}

#[test]
fn newton_and_dykstra_agree_at_desk_scale() {
    let data = torus_data(60, 24, 48);
    let op = operator(&data, &[[0.0, 0.0], [0.2, 0.0]], &[0.5, 0.4]);
    let a = CoefficientVector::unit(0, data.mus(), 1.75).unwrap();
    let c = ConstraintSet::new(&data.mus(), 1.75, 1e6, 1.0, 0.01, op);
    let n = solve_min(&a.entries, &c, 1e-12, 500).unwrap();
    let d = solve_min_dykstra(&a.entries, &c, 1e-12, 50_000).unwrap();
    assert!(n.converged);
    assert!((n.objective - d.objective).abs() <= 1e-6 * n.objective.max(1e-3), "{} vs {}", n.objective, d.objective);
}

#[test]
fn operator_norms_match_direct_observation_norm() {
    let data = torus_data(30, 16, 32);
    let alpha = SliceIndexAlpha::from_radii(0.05, &[0.5]).unwrap();
    let op = assemble_observation_operator(&data, &[[0.1, -0.05]], &alpha, None).unwrap();
    let cyl = ObservationCylinder::new([0.1, -0.05], 0.5, 0.9, 0.05).unwrap();
    let mut seed = 1u64;
    for _ in 0..20 {
        let e: Vec<f64> = (0..data.eigen.len())
            .map(|_| {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        let b = CoefficientVector::new(e.clone(), data.mus(), 1.75).unwrap();
        let direct = observation_norm(&b, &cyl, &data).unwrap();
        assert!((op.norms(&e)[0] - direct).abs() <= 1e-10 * direct.max(1.0));
    }
    assert_eq!(op.norms(&vec![0.0; data.eigen.len()])[0], 0.0);
}

#[test]
fn covering_ball_keeps_nearly_everything() {
    // alpha of about the diameter: chi is ~1 on M, so d is close to a
    let data = torus_data(40, 16, 32);
    let a = CoefficientVector::unit(0, data.mus(), 1.75).unwrap();
    let alpha = SliceIndexAlpha::from_radii(0.05, &[6.5]).unwrap();
    let r = slice_coefficients(&a, &data, &[[0.0, 0.0]], &alpha, &SliceParams::practical(1e-3), None).unwrap();
    assert!((r.d[0] - 1.0).abs() < 0.05, "{}", r.d[0]);
}

#[test]
fn zero_coefficients_give_zero_slice() {
    let data = torus_data(20, 12, 24);
    let a = CoefficientVector::zeros(data.mus(), 1.75).unwrap();
    let alpha = SliceIndexAlpha::from_radii(0.05, &[0.5]).unwrap();
    let r = slice_coefficients(&a, &data, &[[0.0, 0.0]], &alpha, &SliceParams::practical(0.01), None).unwrap();
    assert!(r.d.iter().all(|x| *x == 0.0));
}

#[test]
fn minimum_grows_with_the_class_index() {
    let data = torus_data(60, 24, 48);
    let a = CoefficientVector::unit(0, data.mus(), 1.75).unwrap();
    let alpha = SliceIndexAlpha::from_radii(0.05, &[0.5]).unwrap();
    let mut prev = 0.0;
    for m in [1, 2, 4] {
        let mut p = SliceParams::practical(0.0);
        p.eps_star = None;
        p.eps2 = 0.04;
        p.m = m;
        let r = slice_coefficients(&a, &data, &[[0.0, 0.0]], &alpha, &p, None).unwrap();
        assert!(r.minimizer.objective >= prev - 1e-12, "m = {m}");
        prev = r.minimizer.objective;
    }
}

#[test]
fn audit_names_the_violated_relation() {
    let mut p = SliceParams::practical(0.01);
    p.overrides = false;
    let err = p.audit(0.05, 0.9, 1).unwrap_err().to_string();
    assert!(err.contains("chain"), "{err}");
    p.m = 3;
    assert!(p.audit(0.05, 0.9, 1).is_err());
}

#[test]
fn noisy_path_with_identity_certificate_equals_exact_path() {
    let data = torus_data(30, 16, 32);
    let a = CoefficientVector::unit(0, data.mus(), 1.75).unwrap();
    let alpha = SliceIndexAlpha::from_radii(0.05, &[0.5]).unwrap();
    let p = SliceParams::practical(0.01);
    let exact = slice_coefficients(&a, &data, &[[0.0, 0.0]], &alpha, &p, None).unwrap();
    let noisy = slice_coefficients_noisy(&a, &data, &[[0.0, 0.0]], &alpha, &p, 1e-15, None).unwrap();
    assert_eq!(exact.d, noisy.d);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scaling_identity(c in 0.1f64..10.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let data = torus_data(4, 12, 24);
        let a = [0.7, x, y, 0.2, -0.1];
        let set = |k: f64| ConstraintSet::new(&data.mus(), 1.75, k * 1.0, k * 1.0, k * 0.03, operator(&data, &[[0.0, 0.0]], &[0.6]));
        let r1 = solve_min(&a, &set(1.0), 1e-13, 500).unwrap();
        let ac: Vec<f64> = a.iter().map(|v| v * c).collect();
        let rc = solve_min(&ac, &set(c), 1e-13, 500).unwrap();
        for (u, v) in r1.b.iter().zip(&rc.b) {
            prop_assert!((u * c - v).abs() <= 1e-7 * c);
        }
    }

    #[test]
    fn solution_is_feasible_and_no_worse_than_zero(x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0) {
        let data = torus_data(2, 12, 24);
        let c = ConstraintSet::new(&data.mus(), 1.75, 1.5, 1.0, 0.02, operator(&data, &[[0.0, 0.0]], &[0.6]));
        let a = [x, y, z];
        let r = solve_min(&a, &c, 1e-12, 500).unwrap();
        prop_assert!(r.margins.worst() <= 1e-9 * (1.0 + x.abs() + y.abs() + z.abs()));
        prop_assert!(r.objective <= a.iter().map(|v| v * v).sum::<f64>() + 1e-12);
    }
}
