//! Explicit constants and the accuracy-to-data-error chain.
//!
//! Doubly and triply exponential quantities are carried as [`Pos`] values
//! (a positive real through its logarithm, itself an iterated-exponential
//! [`Tower`]), so nothing here over- or underflows.

mod tower;

use serde::{Deserialize, Serialize};
use std::f64::consts::E;

use crate::error::{invalid, Error, Result};
pub use tower::{Pos, Tower};

/// `c_200 = 58(n+1) + 1`.
pub fn c200(n: usize) -> u64 {
    58 * (n as u64 + 1) + 1
}

/// `beta = theta^2 / 2`.
pub fn beta(theta: f64) -> f64 {
    theta * theta / 2.0
}

/// Interpolation exponent `b(s)`: `1/2` for `n = 2, 3`, otherwise `s/n`.
pub fn b_of_s(n: usize, s: f64) -> f64 {
    if n <= 3 {
        0.5
    } else {
        s / n as f64
    }
}

/// `f_theta(a, b) = a (ln(1 + a/b))^(-theta)`.
pub fn f_theta(a: f64, b: f64, theta: f64) -> f64 {
    a * (a / b).ln_1p().powf(-theta)
}

/// Geometry constants the chain depends on. Each is only known to exist;
/// all default to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConstants {
    pub c6: f64,
    pub c7: f64,
    pub c12: f64,
    pub c18: f64,
    pub c20: f64,
    pub c24: f64,
    pub c33: f64,
    /// `c_1(s)`
    pub c1_s: f64,
    /// `c_3(s)`
    pub c3_s: f64,
    pub c205: f64,
}

impl Default for ChainConstants {
    fn default() -> Self {
        ChainConstants { c6: 1.0, c7: 1.0, c12: 1.0, c18: 1.0, c20: 1.0, c24: 1.0, c33: 1.0, c1_s: 1.0, c3_s: 1.0, c205: 1.0 }
    }
}

impl ChainConstants {
    fn named(&self) -> [(&'static str, f64); 10] {
        [
            ("C6", self.c6),
            ("C7", self.c7),
            ("C12", self.c12),
            ("C18", self.c18),
            ("C20", self.c20),
            ("C24", self.c24),
            ("C33", self.c33),
            ("c1(s)", self.c1_s),
            ("c3(s)", self.c3_s),
            ("c205", self.c205),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainInput {
    pub n: usize,
    pub s: f64,
    pub theta: f64,
    pub lambda_s: f64,
    /// Maximal number of balls in a slice.
    pub l: f64,
    pub r0: f64,
    pub diameter: f64,
    pub constants: ChainConstants,
    /// Use the unsimplified `E_2` (with the `-1` and `exp(gamma^(-c200 theta/2))`).
    pub minus_one: bool,
}

impl Default for ChainInput {
    fn default() -> Self {
        ChainInput {
            n: 2,
            s: 1.75,
            theta: 0.5,
            lambda_s: 1.0,
            l: 3.0,
            r0: 0.9,
            diameter: std::f64::consts::PI * 2f64.sqrt(),
            constants: ChainConstants::default(),
            minus_one: false,
        }
    }
}

impl ChainInput {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return invalid("the chain needs n >= 2");
        }
        if !(self.s > 1.5 && self.s < 2.0) {
            return invalid(format!("s = {} outside (3/2, 2)", self.s));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return invalid(format!("theta = {} outside [1/2, 1]", self.theta));
        }
        if !(self.lambda_s >= 1.0) {
            return invalid(format!("Lambda_s = {} < 1", self.lambda_s));
        }
        for (name, v) in [("L", self.l), ("r0", self.r0), ("D", self.diameter)].into_iter().chain(self.constants.named()) {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} = {v} must be a positive real"));
            }
        }
        Ok(())
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn beta(&self) -> f64 {
        beta(self.theta)
    }

    pub fn b(&self) -> f64 {
        b_of_s(self.n, self.s)
    }

    pub fn c200(&self) -> f64 {
        c200(self.n) as f64
    }

    /// `c_5 = min(C7^-1, (1 + C18)^(-1/2) / (100 (1 + D)^(3/2) L))`.
    pub fn c5(&self) -> f64 {
        let k = &self.constants;
        (1.0 / k.c7).min((1.0 + k.c18).powf(-0.5) / (100.0 * (1.0 + self.diameter).powf(1.5) * self.l))
    }

    /// `C16 = c3(s)^(n/s) C7^(n/2) (C20 + 1)^(n/s)`.
    pub fn c16(&self) -> Pos {
        let k = &self.constants;
        let (n, s) = (self.nf(), self.s);
        Pos::new(k.c3_s).powf(n / s).mul(Pos::new(k.c7).powf(n / 2.0)).mul(Pos::new(k.c20 + 1.0).powf(n / s))
    }

    /// `C28 = (2 L c1(s))^(-1 / (2 b(s)))`.
    pub fn c28(&self) -> f64 {
        (2.0 * self.l * self.constants.c1_s).powf(-1.0 / (2.0 * self.b()))
    }

    /// `C41 = min(C28, r0/32)`.
    pub fn c41(&self) -> f64 {
        self.c28().min(self.r0 / 32.0)
    }

    /// `C40 = C7^2 / (160 C6^2 C33^(72n))`.
    pub fn c40(&self) -> Pos {
        let k = &self.constants;
        Pos::new(k.c7 * k.c7 / (160.0 * k.c6 * k.c6)).div(Pos::new(k.c33).powf(72.0 * self.nf()))
    }

    /// `gamma_0 = C28 (eps1 / Lambda_s)^(1/b(s))`.
    pub fn gamma0(&self, eps1: Pos) -> Pos {
        Pos::new(self.c28()).mul(eps1.div(Pos::new(self.lambda_s)).powf(1.0 / self.b()))
    }

    /// The constants `C34`..`C43` of the final rate.
    pub fn rate_constants(&self) -> RateConstants {
        let (n, s, th, b, bt) = (self.nf(), self.s, self.theta, self.b(), self.beta());
        let k = &self.constants;
        let c41 = self.c41();
        let q = (s + n) / (s - 1.0);
        let c34 = (n + q) / b;
        let c35 = Pos::new(q).mul(Pos::new(4.0 * self.l * k.c12).mul(Pos::new(c41).powf(-(2.0 - th / 2.0))).powf(1.0 / bt));
        let c36 = Pos::new(c41).powf(-self.c200()).div(Pos::new(bt));
        let c37 = (1.0 + (2.0 - th / 2.0) / b) / bt;
        let c38 = self.c200() / b;
        let lead = Pos::new(2f64.powf(-n / 2.0) * self.c5()).div(Pos::new(k.c7).powf(n)).div(self.c16());
        let c41q = Pos::new(c41).powf(q + n);
        let c39_displayed = lead.mul(Pos::new(8.0).powf(n / s)).mul(c41q);
        let c39 = lead.mul(Pos::new(8.0).powf(-n / s)).mul(c41q);
        let c40 = self.c40();
        let c42 = Pos::new(k.c24).div(Pos::new(k.c33).powf(36.0)).div(c40.powf(1.0 / (2.0 * n)));
        let c43 = c34.max(c37).max(c38).max(1.0 / (2.0 * n));
        let kk = c42.recip().add(c35).add(c36);
        let c2 = 1.0 / (72.0 * n * c43);
        let c1 = kk.powf(c2).mul(c40.powf(-1.0 / (72.0 * n)));
        // delta* = min(exp(-e), exp(-exp(1000^C43 K)))
        let star_inner = Pos::new(1000.0).powf(c43).mul(kk);
        let delta_star = Pos::from_ln(-E).min(Pos::exp(star_inner.real().exp().neg()));
        // ln(-ln delta*)^C2
        let star_term = Pos::from_real(delta_star.ln.neg()).ln;
        let c3 = c1.mul(Pos::new(2.0)).max(Pos::new(self.diameter).mul(Pos::from_real(star_term).powf(c2)));
        RateConstants { c34, c35, c36, c37, c38, c39, c39_displayed, c40, c41, c42, c43, k: kk, c1, c2, c3, delta_star }
    }
}

/// `C34`..`C43` together with the rate constants `C1`, `C2`, `C3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    pub c34: f64,
    pub c35: Pos,
    pub c36: Pos,
    pub c37: f64,
    pub c38: f64,
    /// With the `8^(-n/s)` factor that makes `j0 = j0_hat(eps2/8)`.
    pub c39: Pos,
    /// As printed, with `8^(n/s)`.
    pub c39_displayed: Pos,
    pub c40: Pos,
    pub c41: f64,
    pub c42: Pos,
    pub c43: f64,
    /// `C42^-1 + C35 + C36`.
    pub k: Pos,
    pub c1: Pos,
    pub c2: f64,
    pub c3: Pos,
    pub delta_star: Pos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstantOrigin {
    Input,
    Derived,
    /// Exists in the argument but plays no role in these formulas.
    Unused,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantRow {
    pub name: String,
    pub value: Option<Pos>,
    pub origin: ConstantOrigin,
}

/// Every named constant `C1`..`C43`, `c1`..`c6` and the `c_2xx` family.
pub fn constant_table(input: &ChainInput) -> Vec<ConstantRow> {
    let rc = input.rate_constants();
    let k = &input.constants;
    let mut known: Vec<(String, Pos, ConstantOrigin)> = vec![
        ("C1".into(), rc.c1, ConstantOrigin::Derived),
        ("C2".into(), Pos::new(rc.c2), ConstantOrigin::Derived),
        ("C3".into(), rc.c3, ConstantOrigin::Derived),
        ("C16".into(), input.c16(), ConstantOrigin::Derived),
        ("C28".into(), Pos::new(input.c28()), ConstantOrigin::Derived),
        ("C34".into(), Pos::new(rc.c34), ConstantOrigin::Derived),
        ("C35".into(), rc.c35, ConstantOrigin::Derived),
        ("C36".into(), rc.c36, ConstantOrigin::Derived),
        ("C37".into(), Pos::new(rc.c37), ConstantOrigin::Derived),
        ("C38".into(), Pos::new(rc.c38), ConstantOrigin::Derived),
        ("C39".into(), rc.c39, ConstantOrigin::Derived),
        ("C40".into(), rc.c40, ConstantOrigin::Derived),
        ("C41".into(), Pos::new(rc.c41), ConstantOrigin::Derived),
        ("C42".into(), rc.c42, ConstantOrigin::Derived),
        ("C43".into(), Pos::new(rc.c43), ConstantOrigin::Derived),
        ("c5".into(), Pos::new(input.c5()), ConstantOrigin::Derived),
        ("c200".into(), Pos::new(input.c200()), ConstantOrigin::Derived),
        ("c205".into(), Pos::new(k.c205), ConstantOrigin::Input),
    ];
    for (name, v) in [("C6", k.c6), ("C7", k.c7), ("C12", k.c12), ("C18", k.c18), ("C20", k.c20), ("C24", k.c24), ("C33", k.c33)] {
        known.push((name.into(), Pos::new(v), ConstantOrigin::Input));
    }
    known.push(("c1".into(), Pos::new(k.c1_s), ConstantOrigin::Input));
    known.push(("c3".into(), Pos::new(k.c3_s), ConstantOrigin::Input));
    let mut rows = Vec::new();
    let names = (1..=43).map(|i| format!("C{i}")).chain((1..=6).map(|i| format!("c{i}"))).chain(["c200", "c202", "c205", "c206"].map(String::from));
    for name in names {
        match known.iter().find(|(n, _, _)| *n == name) {
            Some((_, v, o)) => rows.push(ConstantRow { name, value: Some(*v), origin: *o }),
            // c202 and c206 depend on gamma; see `stability_envelopes`
            None if name == "c202" || name == "c206" => rows.push(ConstantRow { name, value: None, origin: ConstantOrigin::Derived }),
            None => rows.push(ConstantRow { name, value: None, origin: ConstantOrigin::Unused }),
        }
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelopes {
    /// `E_1(eps2; theta, gamma, Lambda)`.
    pub e1: Pos,
    /// `E_2(eps1/4L; theta, gamma, Lambda)` as used in the chain.
    pub e2: Pos,
    /// The same before simplification: with `-1` in the denominator and
    /// `exp(gamma^(-c200 theta/2))`. Inverts `4L E_1` exactly.
    pub e2_exact: Pos,
    pub c202: Pos,
    pub c206: Pos,
}

/// Evaluates `E_1(eps2)`, `E_2(eps1/4L)`, `c202` and `c206` at `gamma`,
/// with `Lambda = input.lambda_s`.
pub fn stability_envelopes(input: &ChainInput, gamma: Pos, eps1: Pos, eps2: Pos) -> Result<Envelopes> {
    input.validate()?;
    if gamma > Pos::new(input.r0 / 32.0) {
        return invalid(format!("gamma = {gamma} exceeds r0/32"));
    }
    let lam = Pos::new(input.lambda_s);
    if eps2 > lam || eps1 > lam {
        return invalid("eps1 and eps2 must not exceed Lambda");
    }
    let (s, th, bt) = (input.s, input.theta, input.beta());
    let k = &input.constants;
    let a = 2.0 - th / 2.0;
    let ss = s / (s - 1.0);
    let half = Pos::exp(gamma.powf(-input.c200() * th / 2.0).real());
    let full = Pos::exp(gamma.powf(-input.c200()).real());
    let c202 = Pos::new(k.c12).mul(half);
    let c206 = Pos::new(k.c205).mul(full);

    let q = gamma.mul(lam.powf(1.0 / ss)).mul(eps2.powf(-1.0 / ss));
    let e1 = c202.mul(lam).div(gamma.powf(a)).div(q.ln_1p_pos().powf(bt));

    let y = |growth: Pos| lam.mul(Pos::new(4.0 * input.l * k.c12)).div(eps1).div(gamma.powf(a)).mul(growth);
    let z = y(full).powf(1.0 / bt);
    let e2 = lam.mul(gamma.powf(ss)).mul(Pos::exp(z.real().neg().scale(ss)));
    let z_half = y(half).powf(1.0 / bt);
    let e2_exact = lam.mul(gamma.powf(ss)).div(z_half.exp_m1().powf(ss));
    Ok(Envelopes { e1, e2, e2_exact, c202, c206 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `j0_hat(eps2/8; gamma, Lambda)`, rounded up when representable.
    pub j0: Pos,
    pub j1_window: [Pos; 2],
    /// `delta0_hat` at the top of the `j1` window.
    pub delta0: Pos,
    /// `(C7^-1 delta^-1)^(n/2) <= J <= (2 C7 delta^-1)^(n/2)` at `delta0`.
    pub j_window: [Pos; 2],
    /// The alternative window `J0 <= J <= 2^(n/2) C7^n J0`, `J0 = (2 C7 delta)^(-n/2)`.
    pub j_window_alt: [Pos; 2],
}

/// `j0_hat(eps*; gamma, Lambda) = C16 gamma^-n (Lambda/eps*)^(n/s)`.
pub fn j0_hat(input: &ChainInput, eps_star: Pos, gamma: Pos) -> Pos {
    let n = input.nf();
    input.c16().mul(gamma.powf(-n)).mul(Pos::new(input.lambda_s).div(eps_star).powf(n / input.s))
}

/// `[j0, 2^(n/2) C7^n j0]`.
pub fn j1_window(input: &ChainInput, j0: Pos) -> [Pos; 2] {
    let n = input.nf();
    [j0, j0.mul(Pos::new(2f64.powf(n / 2.0))).mul(Pos::new(input.constants.c7).powf(n))]
}

/// `delta0_hat = c5 eps2 / (j1 Lambda)`.
pub fn delta0_hat(input: &ChainInput, eps2: Pos, j1: Pos) -> Pos {
    Pos::new(input.c5()).mul(eps2).div(j1).div(Pos::new(input.lambda_s))
}

pub fn j_window(input: &ChainInput, delta: Pos) -> [Pos; 2] {
    let (n, c7) = (input.nf(), input.constants.c7);
    [Pos::new(1.0 / c7).div(delta).powf(n / 2.0), Pos::new(2.0 * c7).div(delta).powf(n / 2.0)]
}

fn ceil_if_small(x: Pos) -> Pos {
    let v = x.value();
    if v < 1e15 {
        Pos::new(v.ceil().max(1.0))
    } else {
        x
    }
}

pub fn thresholds(input: &ChainInput, eps2: Pos, gamma: Pos) -> Result<Thresholds> {
    input.validate()?;
    let j0 = ceil_if_small(j0_hat(input, eps2.div(Pos::new(8.0)), gamma));
    let j1 = j1_window(input, j0);
    let delta0 = delta0_hat(input, eps2, j1[1]);
    let n = input.nf();
    let jz = Pos::new(2.0 * input.constants.c7).mul(delta0).powf(-n / 2.0);
    Ok(Thresholds { j0, j1_window: j1, delta0, j_window: j_window(input, delta0), j_window_alt: j1_window(input, jz) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
}

/// One checked inequality or identity of the chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub check: String,
    pub relation: Relation,
    pub lhs: Pos,
    pub rhs: Pos,
    /// Relative log gap for identities, `0` for inequalities.
    pub gap: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub name: String,
    pub formula: String,
    pub value: Pos,
}

/// Tolerance of identity checks, relative in the log domain.
pub const IDENTITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct Audit {
    log: Vec<LogEntry>,
    checks: Vec<AuditEntry>,
}

impl Audit {
    fn note(&mut self, name: &str, formula: &str, value: Pos) -> Pos {
        self.log.push(LogEntry { name: name.into(), formula: formula.into(), value });
        value
    }

    fn le(&mut self, check: &str, lhs: Pos, rhs: Pos) {
        self.checks.push(AuditEntry { check: check.into(), relation: Relation::Le, lhs, rhs, gap: 0.0, holds: lhs <= rhs });
    }

    fn eq(&mut self, check: &str, lhs: Pos, rhs: Pos) {
        let gap = lhs.log_gap(rhs);
        self.checks.push(AuditEntry { check: check.into(), relation: Relation::Eq, lhs, rhs, gap, holds: gap <= IDENTITY_TOL });
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub eps: f64,
    pub sigma: Pos,
    pub eps4: Pos,
    pub eps0: Pos,
    pub eps1: Pos,
    pub gamma: Pos,
    pub eps2: Pos,
    pub j0: Pos,
    pub j1_window: [Pos; 2],
    /// `2^(-n/2) c5 C7^-n j0^-1 eps2`, the admissible data error before simplification.
    pub delta_bound: Pos,
    /// `exp(-exp(K eps1^-C43))`.
    pub delta: Pos,
    pub j_window: [Pos; 2],
    pub rate: RateConstants,
    pub log: Vec<LogEntry>,
    pub audit: Vec<AuditEntry>,
}

impl ChainOutput {
    pub fn all_hold(&self) -> bool {
        self.audit.iter().all(|a| a.holds)
    }

    /// `delta` as a float, or an underflow error carrying `ln ln(1/delta)`.
    pub fn delta_value(&self) -> Result<f64> {
        let v = self.delta.value();
        if v > 0.0 {
            return Ok(v);
        }
        Err(Error::Underflow { quantity: "delta", lnln_inv: Pos::from_real(self.delta.ln.neg()).ln.to_string() })
    }
}

/// Runs the chain `eps -> sigma -> eps4 -> eps0 -> eps1 -> gamma -> eps2 ->
/// j0 -> j1 -> delta` with `Lambda_s = 1`, auditing each step.
pub fn forward_chain(input: &ChainInput, eps: f64) -> Result<ChainOutput> {
    input.validate()?;
    if !(eps > 0.0 && eps < 1.0) {
        return invalid(format!("eps = {eps} outside (0, 1)"));
    }
    let unit = ChainInput { lambda_s: 1.0, ..input.clone() };
    let (n, s, b) = (unit.nf(), unit.s, unit.b());
    let k = &unit.constants;
    let rc = unit.rate_constants();
    let mut au = Audit::default();
    let e = Pos::new(eps);
    let c33 = Pos::new(k.c33);

    let sigma = au.note("sigma", "(eps/C33)^36", e.div(c33).powf(36.0));
    let eps4 = au.note("eps4", "eps^(36n) / (4 C6 C33^(36n))", e.powf(36.0 * n).div(Pos::new(4.0 * k.c6)).div(c33.powf(36.0 * n)));
    let eps0 = au.note("eps0", "C7 eps4", Pos::new(k.c7).mul(eps4));
    au.le("eps0 <= Lambda_s/10", eps0, Pos::new(0.1));
    let eps1 = au.note("eps1", "C40 eps^(72n)", rc.c40.mul(e.powf(72.0 * n)));
    au.eq("eps1 = eps0^2 / (10 Lambda_s)", eps1, eps0.powf(2.0).div(Pos::new(10.0)));
    au.le("eps1 <= 1/1000", eps1, Pos::new(1e-3));

    let gamma = au.note("gamma", "C41 eps1^(1/b(s))", Pos::new(rc.c41).mul(eps1.powf(1.0 / b)));
    au.le("gamma <= r0/32", gamma, Pos::new(unit.r0 / 32.0));
    au.le("gamma <= gamma0 = C28 (eps1/Lambda_s)^(1/b(s))", gamma, unit.gamma0(eps1));

    let env = stability_envelopes(&unit, gamma, eps1, Pos::new(1.0))?;
    au.note("c202", "C12 exp(gamma^(-c200 theta/2))", env.c202);
    au.note("c206", "c205 exp(gamma^(-c200))", env.c206);
    let eps2 = if unit.minus_one { env.e2_exact } else { env.e2 };
    au.note("eps2", "E2(eps1/4L; theta, gamma, 1)", eps2);
    if !unit.minus_one {
        // the same quantity written through C41 and eps1 only
        let (th, bt) = (unit.theta, unit.beta());
        let g = Pos::new(rc.c41).mul(eps1.powf(1.0 / b));
        let inner = Pos::new(4.0 * unit.l * k.c12)
            .div(eps1)
            .mul(g.powf(-(2.0 - th / 2.0)))
            .mul(Pos::exp(Pos::new(rc.c41).powf(-unit.c200()).mul(eps1.powf(-unit.c200() / b)).real()));
        let direct = g.powf(s / (s - 1.0)).mul(Pos::exp(inner.powf(1.0 / bt).real().neg().scale(s / (s - 1.0))));
        au.eq("eps2 = (C41 eps1^(1/b))^(s/(s-1)) / exp[(...)^(1/beta)]^(s/(s-1))", eps2, direct);
    }
    au.le("eps2 <= eps1/(4L)", eps2, eps1.div(Pos::new(4.0 * unit.l)));
    let e1_back = stability_envelopes(&unit, gamma, eps1, eps2)?.e1;
    au.note("E1(eps2)", "c202 Lambda / (gamma^(2-theta/2) ln[1 + gamma Lambda^((s-1)/s) eps2^(-(s-1)/s)]^beta)", e1_back);
    if unit.minus_one {
        // E2 without simplification inverts E1 exactly, but E1 itself is a
        // ratio of two numbers near exp(exp(1/gamma^c200)) and cannot be
        // resolved; the equivalent inner identity ln(1 + q) = z is checked.
        let ss = s / (s - 1.0);
        let q = gamma.mul(eps2.powf(-1.0 / ss));
        let y = Pos::new(4.0 * unit.l * k.c12)
            .div(eps1)
            .div(gamma.powf(2.0 - unit.theta / 2.0))
            .mul(Pos::exp(gamma.powf(-unit.c200() * unit.theta / 2.0).real()));
        au.eq("E1(eps2) = eps1/(4L), as ln(1 + gamma eps2^(-(s-1)/s)) = (4L C12 e^(gamma^(-c200 theta/2)) / (eps1 gamma^(2-theta/2)))^(1/beta)", q.ln_1p_pos(), y.powf(1.0 / unit.beta()));
    } else {
        au.le("E1(eps2) <= eps1/(4L)", e1_back, eps1.div(Pos::new(4.0 * unit.l)));
    }

    let j0 = au.note(
        "j0",
        "C16 C41^-n 8^(n/s) eps1^(-n/b) eps2^(-n/s)",
        unit.c16().mul(Pos::new(rc.c41).powf(-n)).mul(Pos::new(8.0).powf(n / s)).mul(eps1.powf(-n / b)).mul(eps2.powf(-n / s)),
    );
    au.eq("j0 = j0_hat(eps2/8; gamma, 1)", j0, j0_hat(&unit, eps2.div(Pos::new(8.0)), gamma));
    let j1 = j1_window(&unit, j0);
    au.note("j1", "2^(n/2) C7^n j0", j1[1]);
    au.le("j0 <= j1", j1[0], j1[1]);

    let delta_bound = au.note(
        "delta_bound",
        "2^(-n/2) c5 C7^-n j0^-1 eps2",
        Pos::new(2f64.powf(-n / 2.0) * unit.c5()).div(Pos::new(k.c7).powf(n)).div(j0).mul(eps2),
    );
    au.eq("delta_bound = delta0_hat(eps2, gamma, j1, 1)", delta_bound, delta0_hat(&unit, eps2, j1[1]));
    if !unit.minus_one {
        let tail = rc.c36.mul(eps1.powf(-rc.c38)).real();
        let mid = rc.c35.mul(eps1.powf(-rc.c37)).mul(Pos::exp(tail));
        let product = rc.c39.mul(eps1.powf(rc.c34)).mul(Pos::exp(mid.real().neg()));
        au.eq("delta_bound = C39 eps1^C34 exp[-C35 eps1^-C37 exp(C36 eps1^-C38)]", delta_bound, product);
    }
    let lnln = rc.k.mul(eps1.powf(-rc.c43));
    let delta = au.note("delta", "exp[-exp((C42^-1 + C35 + C36) eps1^-C43)]", Pos::exp(lnln.real().exp().neg()));
    if unit.minus_one {
        au.le("delta <= delta_bound", delta, delta_bound);
    } else {
        // Both sides agree to the last float bit in the tower form, so the
        // common C36 eps1^-C38 is cancelled from ln ln(1/delta) and
        // ln ln(1/delta_bound) first.
        let outer = rc.c35.mul(eps1.powf(-rc.c37)).mul(Pos::exp(rc.c36.mul(eps1.powf(-rc.c38)).real()));
        let shift = rc.c39.ln_f64() + rc.c34 * eps1.ln_f64();
        let corr = if shift < 0.0 { Pos::new(-shift).div(outer).value() } else { 0.0 };
        let bound_rest = rc.c35.ln_f64() - rc.c37 * eps1.ln_f64() + corr;
        let delta_rest = rc.c42.recip().add(rc.c35).mul(eps1.powf(-rc.c43));
        au.le(
            "delta <= delta_bound, as ln ln(1/delta_bound) - C36 eps1^-C38 <= ln ln(1/delta) - C36 eps1^-C38",
            Pos::new(bound_rest.max(f64::MIN_POSITIVE)),
            delta_rest,
        );
    }
    au.le("delta <= exp(-e)", delta, Pos::from_ln(-E));
    au.le("delta <= delta*", delta, rc.delta_star);
    au.le("delta <= C24 sigma", delta, Pos::new(k.c24).mul(sigma));
    let lnln_inv = Pos::from_real(Pos::from_real(delta.ln.neg()).ln);
    // attained with equality by the choice of delta
    au.eq("(C42^-1 + C35 + C36) / ln ln(1/delta) <= eps1^C43", rc.k.div(lnln_inv), eps1.powf(rc.c43));
    au.eq("eps = C1 (ln ln 1/delta)^-C2", e, invert_rate(delta, rc.c1, rc.c2)?);

    let jw = j_window(&unit, delta);
    au.note("J_min", "(C7^-1 delta^-1)^(n/2)", jw[0]);
    au.note("J_max", "(2 C7 delta^-1)^(n/2)", jw[1]);
    au.le("J window nonempty", jw[0], jw[1]);

    Ok(ChainOutput {
        eps,
        sigma,
        eps4,
        eps0,
        eps1,
        gamma,
        eps2,
        j0,
        j1_window: j1,
        delta_bound,
        delta,
        j_window: jw,
        rate: rc,
        log: au.log,
        audit: au.checks,
    })
}

/// `eps = C1 (ln ln 1/delta)^-C2`, defined for `delta <= exp(-e)`.
pub fn invert_rate(delta: Pos, c1: Pos, c2: f64) -> Result<Pos> {
    if delta > Pos::from_ln(-E) {
        return Err(Error::Domain(format!("delta = {delta} > exp(-e)")));
    }
    let lnln = Pos::from_real(delta.ln.neg()).ln;
    Ok(c1.mul(Pos::from_real(lnln).powf(-c2)))
}

/// `C3 (ln ln 1/delta)^-C2`, the stability bound on the GH distance.
pub fn stability_bound(delta: Pos, rc: &RateConstants) -> Result<Pos> {
    invert_rate(delta, rc.c3, rc.c2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub name: String,
    /// `x ~ gamma^exponent`.
    pub exponent: f64,
    pub value: Pos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixTable {
    pub rows: Vec<OrderRow>,
    /// The six candidates whose minimum defines `R2`.
    pub r2_terms: Vec<f64>,
    /// `c200` as restated in the appendix bound on `c160`.
    pub c200_appendix: u64,
    /// `ln c206 - ln c205 = gamma^(-c200)`.
    pub ln_c206_growth: Pos,
}

impl AppendixTable {
    pub fn exponent(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.name == name).map(|r| r.exponent)
    }
}

// Exponent arithmetic for quantities `~ gamma^e` as gamma -> 0: products add,
// sums keep the most negative exponent, `min` over upper bounds keeps the largest.
fn dominant(terms: &[f64]) -> f64 {
    terms.iter().copied().fold(f64::INFINITY, f64::min)
}

fn smallest(terms: &[f64]) -> f64 {
    terms.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Orders of the geometric parameters in `gamma`, multiplicative constants dropped.
pub fn appendix_table(gamma: Pos, n: usize) -> Result<AppendixTable> {
    if !(gamma < Pos::ONE) {
        return invalid("gamma must lie in (0, 1)");
    }
    let nf = n as f64;
    let c_l = 1.0;
    let p1 = 2.0;
    let m1 = -2.0 * p1;
    let m2 = m1;
    let lambda = dominant(&[m1, 0.0, -2.0 * c_l]);
    let c_t = 3.0 * lambda;
    let eps0 = -dominant(&[lambda + dominant(&[0.0, lambda]), c_t]);
    let r1 = smallest(&[0.0, 2.0, -lambda]);
    let r2_terms = vec![
        r1,
        c_l - dominant(&[0.0, lambda, c_t - lambda]),
        2.0 * lambda + 2.0 * c_l - c_t,
        -(2.0 * c_t + m1 + dominant(&[0.0, 2.0 * lambda])) / 4.0,
        eps0 - m2 / 2.0,
        lambda - (c_t + dominant(&[0.0, 2.0 * lambda, 2.0 * lambda + dominant(&[0.0, lambda])])),
    ];
    let r2 = smallest(&r2_terms);
    let sigma = c_t + r2;
    let tau0 = m1 + dominant(&[2.0 * dominant(&[2.0 * lambda, c_t + r2]), 2.0 * dominant(&[0.0, lambda, c_t + 2.0 * r2]), 0.0]);
    let delta = c_t + 3.0 * r2;
    let r = 2.0 * lambda + 2.0 * c_l + 3.0 * r2 - dominant(&[lambda, c_t + 2.0 * r2]);
    let c1t = dominant(&[m1 - tau0, -lambda]) / 2.0;
    let one_minus_alpha = r * (nf + 1.0);
    let rows: Vec<OrderRow> = [
        ("C_l", c_l),
        ("p1", p1),
        ("M1", m1),
        ("lambda", lambda),
        ("c_T", c_t),
        ("eps0", eps0),
        ("R1", r1),
        ("R2", r2),
        ("sigma", sigma),
        ("tau0", tau0),
        ("R", r2),
        ("delta", delta),
        ("r", r),
        ("c_1T", c1t),
        ("1-alpha", one_minus_alpha),
        ("c_1X", -one_minus_alpha),
        ("N", -one_minus_alpha),
    ]
    .into_iter()
    .map(|(name, e)| OrderRow { name: name.into(), exponent: e, value: gamma.powf(e) })
    .collect();
    Ok(AppendixTable { rows, r2_terms, c200_appendix: c200(n) + 1, ln_c206_growth: gamma.powf(-(c200(n) as f64)) })
}

/// `alpha = (1/2)^(1/N)`, the Gevrey index fixed by `alpha^N = 1/2`.
pub fn alpha_for_steps(steps: f64) -> f64 {
    0.5f64.powf(1.0 / steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_constants() {
        assert_eq!([2, 3, 4, 5, 6].map(c200), [175, 233, 291, 349, 407]);
        assert_eq!(beta(0.5), 0.125);
        assert_eq!(b_of_s(3, 1.9), 0.5);
        assert!((b_of_s(4, 1.6) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn appendix_exponents() {
        let t = appendix_table(Pos::new(0.01), 2).unwrap();
        assert_eq!(t.r2_terms, vec![4.0, 9.0, 6.0, 9.0, 14.0, 20.0]);
        assert_eq!(t.exponent("R2"), Some(20.0));
        assert_eq!(t.exponent("r"), Some(58.0));
        assert_eq!(t.exponent("delta"), Some(48.0));
        assert_eq!(t.exponent("c_T"), Some(-12.0));
        assert_eq!(t.exponent("lambda"), Some(-4.0));
        assert_eq!(t.exponent("c_1X"), Some(-174.0));
    }

    #[test]
    fn default_chain_audits_clean() {
        let out = forward_chain(&ChainInput::default(), 0.1).unwrap();
        for a in &out.audit {
            assert!(a.holds, "{a:?}");
        }
        assert!(out.delta_value().is_err());
    }
}
