//! Acceptance run: one PASS/FAIL line per criterion. A failing criterion is
//! reported, never turned into a panic; errors count as FAIL.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use isd_core::chain::{beta, c200, forward_chain, invert_rate, ChainInput, Pos};
use isd_core::harness::{monotone_within, projection_error, substream_seed, sweep, ExperimentConfig, SweepAxis};
use isd_core::manifold::{ModelManifold, Point};
use isd_core::recon::{through_ball_min, torus_obstacle_distance};
use isd_core::solver::*;
use isd_core::spectral::{check_delta_close, extract_fisd, perturb_delta, weyl_constant, ClusterMixMatrix, InteriorSpectralData};
use isd_core::wave::CoefficientVector;
use isd_core::volumes::{calibrate_eps_star, slice_volume, QuadratureVolumes, SliceStats, SpectralVolumes, UnionVolumes};
use isd_core::Result;

const GAMMA: f64 = 0.05;

fn torus() -> ModelManifold {
    ModelManifold::torus(2.0 * PI, 2.0 * PI)
}

/// Data of the projection and volume criteria.
struct Desk {
    data: InteriorSpectralData,
    calibrated: f64,
    tuned: f64,
    proj: Vec<(f64, f64, f64)>,
}

/// Oracle-tuned `eps*` per radius from a scan `cal * 2^(k/4)`.
fn desk() -> Result<Desk> {
    let m = torus();
    let data = extract_fisd(&m, &m.bounds(0.9), 225, 48, 96, None)?;
    let mix = ClusterMixMatrix::identity(data.eigen.len());
    let cal = calibrate_eps_star(&data, GAMMA, 0.45, &SliceParams::practical(0.0))?;
    let mut proj = Vec::new();
    for rho in [0.3, 0.5, 0.7] {
        let mut best = (f64::INFINITY, cal);
        for k in -8..=8 {
            let e = cal * 2f64.powf(k as f64 / 4.0);
            let err = projection_error(&m, &data, &mix, GAMMA, &SliceParams::practical(e), rho, 128)?;
            if err < best.0 {
                best = (err, e);
            }
        }
        proj.push((rho, best.1, best.0));
    }
    Ok(Desk { tuned: proj[0].1, data, calibrated: cal, proj })
}

fn c1() -> Result<(bool, String)> {
    let (c, b) = (c200(2), beta(0.5));
    Ok((c == 175 && b == 0.125, format!("c200(2) = {c}, beta(1/2) = {b}")))
}

fn c2() -> Result<(bool, String)> {
    let b = torus().eigenpairs(201)?;
    let c = weyl_constant(&b.lambdas, 2);
    Ok((c <= 10.0, format!("C = {c:.4} over j = 1..200")))
}

fn c3(d: &Desk) -> Result<(bool, String)> {
    let (rho, eps, err) = d.proj[0];
    let others: Vec<String> = d.proj[1..].iter().map(|(r, _, e)| format!("rho {r}: {e:.4}")).collect();
    Ok((
        err <= 0.05,
        format!("J = 225, rho = {rho}, eps* = {eps:.4e}: error {err:.4} of ||phi_0||; also {}", others.join(", ")),
    ))
}

fn c4(d: &Desk) -> Result<(bool, String)> {
    let mut sv = SpectralVolumes::new(&d.data, vec![[0.0, 0.0]], GAMMA, SliceParams::practical(d.calibrated))?;
    let mut worst: (f64, f64) = (0.0, 0.0);
    for k in 3..=20 {
        let r = k as f64 * GAMMA;
        let v = sv.union_volume(&[r])?.value;
        let e = (v / (PI * r * r) - 1.0).abs();
        if e > worst.0 {
            worst = (e, r);
        }
    }
    Ok((worst.0 <= 0.05, format!("radii 0.15..1.00, worst {:.2}% at r = {:.2}", 100.0 * worst.0, worst.1)))
}

fn c5(d: &Desk) -> Result<(bool, String)> {
    let m = torus();
    let zc = [[0.0, 0.0], [0.2, 0.0], [0.0, 0.2], [-0.15, -0.1]];
    let z: Vec<Point> = zc.iter().map(|v| m.exp_map(&m.base_point, *v)).collect::<Result<_>>()?;
    let beta = [0.5, 0.45, 0.55, 0.4];
    let sigma = 0.1;
    let mut coarse = QuadratureVolumes::new(&m, &z, 768);
    let fine = QuadratureVolumes::new(&m, &z, 1536);
    let mut spec = SpectralVolumes::new(&d.data, zc.to_vec(), GAMMA, SliceParams::practical(d.tuned))?;
    let mut cal = SpectralVolumes::new(&d.data, zc.to_vec(), GAMMA, SliceParams::practical(d.calibrated))?;
    let (mut oracle_worst, mut spec_worst, mut cal_worst) = (0.0f64, 0.0f64, 0.0f64);
    for l in 1..=4 {
        let members: Vec<usize> = (0..l).collect();
        let mut st = SliceStats::default();
        let direct = fine.slice_direct(&members, &beta, sigma);
        let ie = slice_volume(&mut coarse, &members, &beta, sigma, 4, &mut st)?.value;
        let sp = slice_volume(&mut spec, &members, &beta, sigma, 4, &mut st)?.value;
        let sc = slice_volume(&mut cal, &members, &beta, sigma, 4, &mut st)?.value;
        oracle_worst = oracle_worst.max((ie - direct).abs() / direct);
        spec_worst = spec_worst.max((sp - direct).abs() / direct);
        cal_worst = cal_worst.max((sc - direct).abs() / direct);
    }
    Ok((
        oracle_worst <= 5e-3 && spec_worst <= 0.02,
        format!(
            "L = 1..4: oracle {:.3}% (<= 0.5%), spectral {:.2}% (<= 2%); with calibrated eps* {:.2}%",
            100.0 * oracle_worst,
            100.0 * spec_worst,
            100.0 * cal_worst
        ),
    ))
}

fn c6() -> Result<(bool, String)> {
    let m = torus();
    let exact = extract_fisd(&m, &m.bounds(0.9), 100, 32, 64, None)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for delta in [1e-2, 1e-3] {
        let (mut near, mut far) = (0, 0);
        for seed in 0..200u64 {
            let (p, _) = perturb_delta(&exact, delta, substream_seed(seed, "near"))?;
            near += check_delta_close(&exact, &p, delta)?.pass as usize;
            let (q, _) = perturb_delta(&exact, 10.0 * delta, substream_seed(seed, "far"))?;
            far += !check_delta_close(&exact, &q, delta)?.pass as usize;
        }
        ok &= near == 200 && far >= 190;
        parts.push(format!("delta {delta:e}: pass {near}/200, 10 delta rejected {far}/200"));
    }
    Ok((ok, parts.join("; ")))
}

/// Zooming grid search over the feasible set, `n` points per axis.
fn grid_min(a: &[f64], c: &ConstraintSet, n: usize) -> f64 {
    let d = a.len();
    let mut center = vec![0.0; d];
    let mut half = a.iter().map(|x| x * x).sum::<f64>().sqrt() * 1.05;
    let mut best = a.iter().map(|x| x * x).sum::<f64>();
    let mut idx = vec![0usize; d];
    let mut b = vec![0.0; d];
    while half > 1e-10 {
        let step = 2.0 * half / (n - 1) as f64;
        let mut best_pt = center.clone();
        idx.iter_mut().for_each(|i| *i = 0);
        'grid: loop {
            for k in 0..d {
                b[k] = center[k] - half + idx[k] as f64 * step;
            }
            let obj: f64 = b.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum();
            if obj < best && c.margins(&b).worst() <= 0.0 {
                best = obj;
                best_pt.copy_from_slice(&b);
            }
            for k in 0..d {
                idx[k] += 1;
                if idx[k] < n {
                    continue 'grid;
                }
                idx[k] = 0;
            }
            break;
        }
        center = best_pt;
        half = 2.0 * step;
    }
    best
}

/// `||u||^2` on `B(p, r)` by quadrature of the model eigenfunctions.
fn oracle_ball_norm(m: &ModelManifold, u: &[f64], r: f64) -> Result<f64> {
    let basis = m.eigenpairs(u.len())?;
    let q = m.quadrature(512);
    let mut s = 0.0;
    for (x, w) in q.nodes.iter().zip(&q.weights) {
        if m.geodesic_distance(x, &m.base_point) < r {
            let v: f64 = basis.eval_all(x).iter().zip(u).map(|(p, c)| p * c).sum();
            s += w * v * v;
        }
    }
    Ok(s)
}

fn c7(d: &Desk) -> Result<(bool, String)> {
    let m = torus();
    let toy = extract_fisd(&m, &m.bounds(0.9), 4, 12, 24, None)?;
    let alpha = SliceIndexAlpha::from_radii(GAMMA, &[0.6])?;
    let op = assemble_observation_operator(&toy, &[[0.0, 0.0]], &alpha, None)?;
    let mut gap: f64 = 0.0;
    for (a, a1, eps) in [([0.8, 0.5, -0.3, 0.0, 0.0], 1.2, 0.02), ([0.6, 0.4, -0.3, 0.2, 0.35], 1.0, 0.03)] {
        let c = ConstraintSet::new(&toy.mus(), 1.75, a1, 1.0, eps, op.clone());
        let r = solve_min(&a, &c, 1e-12, 500)?;
        gap = gap.max((r.objective - grid_min(&a, &c, 9)).abs());
    }
    // sandwich |J_min - ||u||^2 on M(alpha, -2 gamma)| <= 2 Lambda eps1 + 4 eps1^2
    let p = SliceParams::practical(d.tuned);
    let bound = 2.0 * p.lambda_s * p.eps1 + 4.0 * p.eps1 * p.eps1;
    let mut worst: f64 = 0.0;
    let u0 = CoefficientVector::unit(0, d.data.mus(), p.s)?;
    for rho in [0.3, 0.5, 0.7] {
        let alpha = SliceIndexAlpha::from_radii(GAMMA, &[rho + 2.0 * GAMMA])?;
        let j = slice_coefficients(&u0, &d.data, &[[0.0, 0.0]], &alpha, &p, None)?.minimizer.objective;
        worst = worst.max((j - oracle_ball_norm(&m, &u0.entries, rho)?).abs());
    }
    let a = [0.6, 0.4, -0.3, 0.2, 0.35];
    let c = ConstraintSet::new(&toy.mus(), 1.75, 1e6, 1.0, 0.03, op);
    let j = solve_min(&a, &c, 1e-12, 500)?.objective;
    worst = worst.max((j - oracle_ball_norm(&m, &a, 0.6 - 2.0 * GAMMA)?).abs());
    Ok((
        gap <= 1e-6 && worst <= bound,
        format!("grid gap {gap:.2e} (<= 1e-6); sandwich worst {worst:.4} <= {bound:.4}"),
    ))
}

fn c8() -> Result<(bool, String)> {
    let l = 2.0 * PI;
    let m = torus();
    let diam = m.diameter();
    let c = [1.0, 2.0];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut parts = Vec::new();
    let mut ok = true;
    for (r, k) in [(0.9 / 25.0, 64), (0.8, 256)] {
        let ring: Vec<[f64; 2]> =
            (0..k).map(|i| 2.0 * PI * i as f64 / k as f64).map(|t| [c[0] + r * t.cos(), c[1] + r * t.sin()]).collect();
        let dzz: Vec<Vec<f64>> = ring.iter().map(|a| ring.iter().map(|b| (a[0] - b[0]).hypot(a[1] - b[1])).collect()).collect();
        let pc = Point::chart(c[0], c[1]);
        let (mut n, mut worst) = (0, 0.0f64);
        while n < 100 {
            let x = [rng.gen_range(0.0..l), rng.gen_range(0.0..l)];
            let y = [rng.gen_range(0.0..l), rng.gen_range(0.0..l)];
            let (px, py) = (Point::chart(x[0], x[1]), Point::chart(y[0], y[1]));
            if m.geodesic_distance(&px, &pc) <= r || m.geodesic_distance(&py, &pc) <= r {
                continue;
            }
            n += 1;
            let a: Vec<f64> = ring.iter().map(|z| torus_obstacle_distance(l, l, c, r, x, *z)).collect();
            let b: Vec<f64> = ring.iter().map(|z| torus_obstacle_distance(l, l, c, r, *z, y)).collect();
            let got = through_ball_min(torus_obstacle_distance(l, l, c, r, x, y), &a, &dzz, &b);
            worst = worst.max((got - m.geodesic_distance(&px, &py)).abs());
        }
        ok &= worst <= 1e-3 * diam;
        parts.push(format!("disc {r:.3}: worst {:.2e} diam", worst / diam));
    }
    Ok((ok, format!("{} (<= 1e-3)", parts.join(", "))))
}

fn c9() -> Result<(bool, String)> {
    let cfg = ExperimentConfig::default();
    let rows = sweep(&cfg, SweepAxis::Delta, &[1e-2, 1e-3, 1e-4])?;
    let diam = cfg.manifold.diameter();
    let trend = monotone_within(&rows, 0.1);
    let last = rows.last().map_or(f64::INFINITY, |r| r.gh_upper);
    let ghs: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.gh_upper)).collect();
    Ok((
        trend && last <= 0.25 * diam,
        format!(
            "GH [{}]; trend within 10%: {trend}; at 1e-4 {last:.3} vs 0.25 diam = {:.3}",
            ghs.join(", "),
            0.25 * diam
        ),
    ))
}

fn c10() -> Result<(bool, String)> {
    let mut ok = true;
    let mut gaps = Vec::new();
    let mut checks = 0;
    for eps in [1e-1, 1e-2, 1e-3] {
        let out = forward_chain(&ChainInput::default(), eps)?;
        let back = invert_rate(out.delta, out.rate.c1, out.rate.c2)?;
        let gap = back.log_gap(Pos::new(eps));
        ok &= out.all_hold() && gap <= 1e-9;
        checks += out.audit.len();
        gaps.push(format!("{gap:.1e}"));
    }
    Ok((ok, format!("log-log gaps [{}], {checks} audited relations", gaps.join(", "))))
}

fn report(n: usize, t: Instant, r: Result<(bool, String)>) -> bool {
    let secs = t.elapsed().as_secs_f64();
    let (ok, msg) = r.unwrap_or_else(|e| (false, format!("error: {e}")));
    println!("criterion {n:>2}: {} {msg} [{secs:.1} s]", if ok { "PASS" } else { "FAIL" });
    ok
}

fn main() {
    let mut passed = 0;
    let mut run = |n: usize, f: &dyn Fn() -> Result<(bool, String)>| {
        let t = Instant::now();
        passed += report(n, t, f()) as usize;
    };
    run(1, &c1);
    run(2, &c2);
    let t = Instant::now();
    let desk = desk();
    println!("desk data: J = 225, eps* scan {:.1} s", t.elapsed().as_secs_f64());
    match &desk {
        Ok(d) => {
            run(3, &|| c3(d));
            run(4, &|| c4(d));
            run(5, &|| c5(d));
        }
        Err(e) => {
            for n in 3..=5 {
                println!("criterion {n:>2}: FAIL error: {e}");
            }
        }
    }
    run(6, &c6);
    match &desk {
        Ok(d) => run(7, &|| c7(d)),
        Err(e) => println!("criterion  7: FAIL error: {e}"),
    }
    run(8, &c8);
    run(9, &c9);
    run(10, &c10);
    println!("{passed}/10 criteria pass");
}
