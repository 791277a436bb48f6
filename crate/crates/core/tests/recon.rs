use isd_core::manifold::{ModelManifold, Point};
use isd_core::recon::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

/// Largest error of the through-the-ball formula against the true torus
/// distance over random pairs outside the disc `B(c, r)`.
fn min_formula_error(r: f64, samples: usize, pairs: usize, seed: u64) -> f64 {
    let l = 2.0 * PI;
    let c = [1.0, 2.0];
    let m = ModelManifold::torus(l, l);
    let ring: Vec<[f64; 2]> = (0..samples)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / samples as f64;
            [c[0] + r * t.cos(), c[1] + r * t.sin()]
        })
        .collect();
    // inside a convex disc the distance between boundary points is the chord
    let dzz: Vec<Vec<f64>> = ring.iter().map(|a| ring.iter().map(|b| (a[0] - b[0]).hypot(a[1] - b[1])).collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    while n < pairs {
        let x = [rng.gen_range(0.0..l), rng.gen_range(0.0..l)];
        let y = [rng.gen_range(0.0..l), rng.gen_range(0.0..l)];
        let px = Point::chart(x[0], x[1]);
        let py = Point::chart(y[0], y[1]);
        let pc = Point::chart(c[0], c[1]);
        if m.geodesic_distance(&px, &pc) <= r || m.geodesic_distance(&py, &pc) <= r {
            continue;
        }
        n += 1;
        let dn = torus_obstacle_distance(l, l, c, r, x, y);
        let a: Vec<f64> = ring.iter().map(|z| torus_obstacle_distance(l, l, c, r, x, *z)).collect();
        let b: Vec<f64> = ring.iter().map(|z| torus_obstacle_distance(l, l, c, r, *z, y)).collect();
        let got = through_ball_min(dn, &a, &dzz, &b);
        worst = worst.max((got - m.geodesic_distance(&px, &py)).abs());
    }
    worst
}

#[test]
fn min_formula_recovers_torus_distance() {
    let diam = PI * 2f64.sqrt();
    assert!(min_formula_error(0.9 / 25.0, 64, 100, 1) <= 1e-3 * diam);
    // a large hole, where the formula does real work
    assert!(min_formula_error(0.8, 256, 100, 2) <= 1e-3 * diam);
}

#[test]
fn obstacle_detour_is_longer_than_the_chord() {
    let l = 2.0 * PI;
    let d = torus_obstacle_distance(l, l, [3.0, 3.0], 0.5, [2.0, 3.0], [4.0, 3.0]);
    let exact = 2.0 * (1.0f64 - 0.25).sqrt() + 0.5 * (PI - 2.0 * (0.5f64).acos());
    assert!((d - exact).abs() < 1e-12, "{d} vs {exact}");
}

#[test]
fn gh_bound_of_a_jittered_copy_is_small() {
    let m = ModelManifold::torus(2.0 * PI, 2.0 * PI);
    let (x, _) = truth_space(&m, 0.7, 3).unwrap();
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mat = x.matrix.clone();
    for i in 0..n {
        for j in 0..i {
            let v = (x.d(i, j) + rng.gen_range(-0.01..0.01)).max(0.0);
            mat[i * n + j] = v;
            mat[j * n + i] = v;
        }
    }
    let y = FiniteMetricSpace::new(x.labels.clone(), 0, mat).unwrap();
    let b = gh_upper_bound(&x, &y).unwrap();
    assert!(b.bound <= 0.01, "{b:?}");
}

#[test]
fn gh_bound_sees_a_rescaling() {
    let m = ModelManifold::torus(2.0 * PI, 2.0 * PI);
    let (x, _) = truth_space(&m, 0.7, 3).unwrap();
    let y = FiniteMetricSpace::new(x.labels.clone(), 0, x.matrix.iter().map(|v| 1.2 * v).collect()).unwrap();
    // any correspondence pairs the base points, and the farthest point
    // from the base is 0.2 diam farther away in y
    let far = (0..x.len()).map(|i| x.d(0, i)).fold(0.0, f64::max);
    assert!(gh_upper_bound(&x, &y).unwrap().bound >= 0.1 * far - 1e-12);
}

#[test]
fn truth_space_covers_the_torus() {
    let m = ModelManifold::torus(2.0 * PI, 2.0 * PI);
    let (x, cov) = truth_space(&m, 0.5, 9).unwrap();
    assert_eq!(x.labels[0], "x0");
    assert!(cov <= 1.0);
    assert!(x.axiom_defect() <= 1e-12);
    assert!((x.diameter() - PI * 2f64.sqrt()).abs() < 0.5);
}

#[test]
fn json_round_trip_of_metric_space() {
    let m = ModelManifold::torus(2.0 * PI, 2.0 * PI);
    let (x, _) = truth_space(&m, 1.0, 1).unwrap();
    assert_eq!(FiniteMetricSpace::from_json(&x.to_json().unwrap()).unwrap(), x);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn repair_yields_a_metric(vals in prop::collection::vec(0.0f64..5.0, 36)) {
        let mut s = FiniteMetricSpace::new((0..6).map(|i| i.to_string()).collect(), 0, vals).unwrap();
        s.repair();
        prop_assert!(s.axiom_defect() <= 1e-12);
    }

    #[test]
    fn obstacle_distance_dominates_flat_distance(x0 in 0.0f64..TAU, x1 in 0.0f64..TAU, y0 in 0.0f64..TAU, y1 in 0.0f64..TAU) {
        let l = 2.0 * PI;
        let m = ModelManifold::torus(l, l);
        let d = torus_obstacle_distance(l, l, [3.0, 3.0], 0.4, [x0, x1], [y0, y1]);
        let flat = m.geodesic_distance(&Point::chart(x0, x1), &Point::chart(y0, y1));
        prop_assert!(d >= flat - 1e-12);
        let back = torus_obstacle_distance(l, l, [3.0, 3.0], 0.4, [y0, y1], [x0, x1]);
        prop_assert!((d - back).abs() <= 1e-9);
    }
}
