use isd_core::chain::*;
use isd_core::Error;
use proptest::prelude::*;
use std::f64::consts::E;

#[test]
fn c200_and_beta_are_exact() {
    assert_eq!(c200(2), 175);
    assert_eq!(beta(0.5), 1.0 / 8.0);
    assert_eq!(beta(1.0), 0.5);
    let t = appendix_table(Pos::new(0.01), 2).unwrap();
    assert_eq!(t.c200_appendix, 176);
}

#[test]
fn round_trip_recovers_eps_for_both_e2_forms() {
    for minus_one in [false, true] {
        let input = ChainInput { minus_one, ..Default::default() };
        for eps in [1e-1, 1e-2, 1e-3] {
            let out = forward_chain(&input, eps).unwrap();
            for a in &out.audit {
                assert!(a.holds, "eps {eps} minus_one {minus_one}: {a:?}");
            }
            let back = invert_rate(out.delta, out.rate.c1, out.rate.c2).unwrap();
            assert!(back.log_gap(Pos::new(eps)) <= IDENTITY_TOL);
            assert!((back.value() - eps).abs() <= 1e-12 * eps);
        }
    }
}

#[test]
fn smaller_eps_needs_smaller_delta() {
    let input = ChainInput::default();
    let mut prev: Option<Pos> = None;
    for eps in [0.5, 0.1, 1e-2, 1e-3, 1e-5] {
        let d = forward_chain(&input, eps).unwrap().delta;
        if let Some(p) = prev {
            assert!(d < p, "eps {eps}");
        }
        prev = Some(d);
    }
}

#[test]
fn delta_underflow_reports_its_size() {
    let out = forward_chain(&ChainInput::default(), 0.1).unwrap();
    match out.delta_value() {
        Err(Error::Underflow { quantity, lnln_inv }) => {
            assert_eq!(quantity, "delta");
            assert!(lnln_inv.contains("exp"), "{lnln_inv}");
        }
        other => panic!("expected underflow, got {other:?}"),
    }
}

#[test]
fn invert_rate_domain_edge() {
    let c1 = Pos::new(3.0);
    assert!(matches!(invert_rate(Pos::new(0.5), c1, 0.2), Err(Error::Domain(_))));
    // at delta = exp(-e), ln ln(1/delta) = 1
    let at_edge = invert_rate(Pos::from_ln(-E), c1, 0.2).unwrap();
    assert!((at_edge.value() - 3.0).abs() < 1e-12);
    // ln ln(1/delta) = e^2 gives C1 e^(-2 C2)
    let d = Pos::exp(Tower::from_f64(E * E).exp().neg());
    let v = invert_rate(d, c1, 0.5).unwrap().value();
    assert!((v - 3.0 / E).abs() < 1e-12);
}

#[test]
fn f_theta_closed_forms() {
    assert!((f_theta(1.0, 1.0, 0.5) - 1.0 / 2f64.ln().sqrt()).abs() < 1e-15);
    assert!((f_theta(2.0, 1.0, 1.0) - 2.0 / 3f64.ln()).abs() < 1e-15);
    // a -> 0: f ~ a^(1-theta) b^theta
    let a = 1e-9;
    assert!((f_theta(a, 4.0, 0.5) / (a.sqrt() * 2.0) - 1.0).abs() < 1e-8);
}

#[test]
fn j0_hat_scales_like_eps_power() {
    let input = ChainInput::default();
    let g = Pos::new(1e-3);
    let e = Pos::new(1e-6);
    let ratio = j0_hat(&input, e.div(Pos::new(8.0)), g).div(j0_hat(&input, e, g));
    let expect = 8f64.powf(2.0 / input.s);
    assert!((ratio.value() / expect - 1.0).abs() < 1e-12);
    let gratio = j0_hat(&input, e, g.div(Pos::new(2.0))).div(j0_hat(&input, e, g));
    assert!((gratio.value() - 4.0).abs() < 1e-12);
}

#[test]
fn thresholds_are_ordered() {
    let input = ChainInput::default();
    let t = thresholds(&input, Pos::new(1e-8), Pos::new(1e-3)).unwrap();
    assert!(t.j1_window[0] <= t.j1_window[1]);
    assert!(t.j_window[0] <= t.j_window[1]);
    assert!(t.j_window_alt[0] <= t.j_window_alt[1]);
    assert!(t.delta0 < Pos::ONE);
}

#[test]
fn displayed_c39_differs_by_8_to_the_2n_over_s() {
    let rc = ChainInput::default().rate_constants();
    let r = rc.c39_displayed.div(rc.c39).value();
    assert!((r - 8f64.powf(4.0 / 1.75)).abs() < 1e-9 * r);
}

#[test]
fn envelopes_reject_large_gamma_and_eps() {
    let input = ChainInput::default();
    assert!(stability_envelopes(&input, Pos::new(0.05), Pos::new(1e-3), Pos::new(1e-3)).is_err());
    assert!(stability_envelopes(&input, Pos::new(0.01), Pos::new(2.0), Pos::new(1e-3)).is_err());
    assert!(stability_envelopes(&input, Pos::new(0.01), Pos::new(1e-3), Pos::new(1e-3)).is_ok());
}

#[test]
fn e2_lies_below_its_unsimplified_form() {
    let env = stability_envelopes(&ChainInput::default(), Pos::new(0.02), Pos::new(1e-3), Pos::ONE).unwrap();
    assert!(env.e2 <= env.e2_exact);
}

#[test]
fn constant_table_names_every_constant() {
    let rows = constant_table(&ChainInput::default());
    for k in 1..=43 {
        let name = format!("C{k}");
        assert!(rows.iter().any(|r| r.name == name), "{name} missing");
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(forward_chain(&ChainInput { s: 2.5, ..Default::default() }, 0.1).is_err());
    assert!(forward_chain(&ChainInput { theta: 0.2, ..Default::default() }, 0.1).is_err());
    assert!(forward_chain(&ChainInput::default(), 1.5).is_err());
}

#[test]
fn alpha_for_steps_halves_after_n_steps() {
    for n in [1.0, 3.0, 10.0] {
        assert!((alpha_for_steps(n).powf(n) - 0.5).abs() < 1e-14);
    }
}

proptest! {
    #[test]
    fn pos_mul_div_inverse(a in -700.0f64..700.0, b in -700.0f64..700.0) {
        let (x, y) = (Pos::from_ln(a), Pos::from_ln(b));
        let back = x.mul(y).div(y);
        prop_assert!((back.ln_f64() - a).abs() <= 1e-12 * (1.0 + a.abs() + b.abs()));
    }

    #[test]
    fn pos_add_sub_inverse(a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
        let s = Pos::new(a).add(Pos::new(b));
        prop_assert!((s.value() - (a + b)).abs() <= 1e-12 * (a + b));
        let d = s.sub(Pos::new(b)).unwrap();
        prop_assert!((d.value() - a).abs() <= 1e-9 * (a + b));
    }

    #[test]
    fn tower_order_matches_floats(a in -1e300f64..1e300, b in -1e300f64..1e300) {
        let (x, y) = (Tower::from_f64(a), Tower::from_f64(b));
        prop_assert_eq!(x.partial_cmp(&y), a.partial_cmp(&b));
    }

    #[test]
    fn tower_exp_ln_round_trip(t in 0.0f64..1e5, levels in 1u32..4) {
        let mut x = Tower::from_f64(t);
        for _ in 0..levels { x = x.exp(); }
        for _ in 0..levels { x = x.ln_abs(); }
        prop_assert!((x.to_f64() - t).abs() <= 1e-9 * (1.0 + t));
    }

    #[test]
    fn chain_round_trip_is_exact_in_loglog(le in -6.0f64..-0.1) {
        let eps = 10f64.powf(le);
        let out = forward_chain(&ChainInput::default(), eps).unwrap();
        prop_assert!(out.all_hold());
        let back = invert_rate(out.delta, out.rate.c1, out.rate.c2).unwrap();
        prop_assert!(back.log_gap(Pos::new(eps)) <= IDENTITY_TOL);
    }
}
