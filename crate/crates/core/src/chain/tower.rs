use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Magnitudes above this are lifted one level.
const BIG: f64 = 1e300;

/// A real number `sign * exp^level(top)`, with `exp^k` the k-fold exponential.
///
/// Normalized so that `level > 0` only when the value does not fit below
/// `1e300`; the ordering on `(level, top)` then matches the ordering of
/// magnitudes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tower {
    pub sign: i8,
    pub level: u32,
    pub top: f64,
}

impl Tower {
    pub const ZERO: Tower = Tower { sign: 0, level: 0, top: 0.0 };

    pub fn from_f64(x: f64) -> Tower {
        if x == 0.0 {
            return Tower::ZERO;
        }
        Tower { sign: if x > 0.0 { 1 } else { -1 }, level: 0, top: x.abs() }.normalized()
    }

    fn normalized(mut self) -> Tower {
        if self.sign == 0 || self.top == 0.0 {
            return Tower::ZERO;
        }
        if self.top.is_nan() {
            return self;
        }
        while self.top > BIG && self.top.is_finite() {
            self.top = self.top.ln();
            self.level += 1;
        }
        while self.level > 0 && self.top <= BIG.ln() {
            self.top = self.top.exp();
            self.level -= 1;
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Plain value; `+-inf` once it no longer fits.
    pub fn to_f64(&self) -> f64 {
        match self.level {
            0 => self.sign as f64 * self.top,
            _ => self.sign as f64 * f64::INFINITY,
        }
    }

    pub fn neg(self) -> Tower {
        Tower { sign: -self.sign, ..self }
    }

    pub fn abs(self) -> Tower {
        Tower { sign: self.sign.abs(), ..self }
    }

    /// `ln |x|`; `-inf` at zero.
    pub fn ln_abs(&self) -> Tower {
        if self.sign == 0 {
            return Tower { sign: -1, level: 0, top: f64::INFINITY };
        }
        match self.level {
            0 => Tower::from_f64(self.top.ln()),
            k => Tower { sign: 1, level: k - 1, top: self.top }.normalized(),
        }
    }

    pub fn exp(&self) -> Tower {
        if self.sign <= 0 {
            return Tower::from_f64(self.to_f64().exp());
        }
        Tower { sign: 1, level: self.level + 1, top: self.top }.normalized()
    }

    pub fn add(self, other: Tower) -> Tower {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        if self.top.is_nan() || other.top.is_nan() {
            return Tower { sign: 1, level: 0, top: f64::NAN };
        }
        let (big, small) = if self.abs() >= other.abs() { (self, other) } else { (other, self) };
        if big.level == 0 {
            return Tower::from_f64(big.to_f64() + small.to_f64());
        }
        // ln|big + small| = ln|big| + ln(1 +- exp(ln|small| - ln|big|))
        let lb = big.ln_abs();
        let ratio = small.ln_abs().add(lb.neg()).to_f64().exp();
        let corr = if big.sign == small.sign { ratio.ln_1p() } else { (-ratio).ln_1p() };
        if corr == f64::NEG_INFINITY {
            return Tower::ZERO;
        }
        let mag = lb.add(Tower::from_f64(corr)).exp();
        Tower { sign: big.sign, ..mag }
    }

    pub fn sub(self, other: Tower) -> Tower {
        self.add(other.neg())
    }

    pub fn mul(self, other: Tower) -> Tower {
        if self.is_zero() || other.is_zero() {
            return Tower::ZERO;
        }
        let mag = self.ln_abs().add(other.ln_abs()).exp();
        Tower { sign: self.sign * other.sign, ..mag }
    }

    pub fn scale(self, k: f64) -> Tower {
        self.mul(Tower::from_f64(k))
    }
}

impl PartialOrd for Tower {
    fn partial_cmp(&self, other: &Tower) -> Option<Ordering> {
        if self.top.is_nan() || other.top.is_nan() {
            return None;
        }
        if self.sign != other.sign {
            return Some(self.sign.cmp(&other.sign));
        }
        let mag = (self.level, self.top).partial_cmp(&(other.level, other.top))?;
        Some(if self.sign < 0 { mag.reverse() } else { mag })
    }
}

/// A positive real stored through its natural logarithm, so both
/// `exp(exp(exp(t)))` and its reciprocal are representable.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Pos {
    pub ln: Tower,
}

impl Pos {
    pub const ONE: Pos = Pos { ln: Tower::ZERO };

    pub fn new(x: f64) -> Pos {
        debug_assert!(x > 0.0, "Pos::new({x})");
        Pos { ln: Tower::from_f64(x.ln()) }
    }

    pub fn from_ln(ln: f64) -> Pos {
        Pos { ln: Tower::from_f64(ln) }
    }

    /// `exp(t)` for a real `t`.
    pub fn exp(t: Tower) -> Pos {
        Pos { ln: t }
    }

    /// The positive real `t` itself.
    pub fn from_real(t: Tower) -> Pos {
        debug_assert!(t.sign > 0);
        Pos { ln: t.ln_abs() }
    }

    /// Plain value; may be `0` or `inf`.
    pub fn value(&self) -> f64 {
        self.ln.exp().to_f64()
    }

    /// The value as a real, exact for large values and rounded to `0` for
    /// values below the smallest float.
    pub fn real(&self) -> Tower {
        self.ln.exp()
    }

    pub fn ln_f64(&self) -> f64 {
        self.ln.to_f64()
    }

    /// `ln |ln x|`.
    pub fn lnln_abs(&self) -> Tower {
        self.ln.ln_abs()
    }

    pub fn mul(self, o: Pos) -> Pos {
        Pos { ln: self.ln.add(o.ln) }
    }

    pub fn div(self, o: Pos) -> Pos {
        Pos { ln: self.ln.sub(o.ln) }
    }

    pub fn recip(self) -> Pos {
        Pos { ln: self.ln.neg() }
    }

    pub fn powf(self, p: f64) -> Pos {
        Pos { ln: self.ln.scale(p) }
    }

    pub fn add(self, o: Pos) -> Pos {
        let (hi, lo) = if self >= o { (self, o) } else { (o, self) };
        let gap = lo.ln.sub(hi.ln).to_f64();
        Pos { ln: hi.ln.add(Tower::from_f64(gap.exp().ln_1p())) }
    }

    /// `self - o`, `None` unless strictly positive.
    pub fn sub(self, o: Pos) -> Option<Pos> {
        if self <= o {
            return None;
        }
        let gap = o.ln.sub(self.ln).to_f64();
        Some(Pos { ln: self.ln.add(Tower::from_f64((-gap.exp()).ln_1p())) })
    }

    /// `ln(1 + x)` as a real.
    pub fn ln_1p(self) -> Tower {
        match self.ln.to_f64() {
            l if l < 30.0 => Tower::from_f64(l.exp().ln_1p()),
            _ => self.ln.add(Tower::from_f64(self.ln.neg().exp().to_f64().ln_1p())),
        }
    }

    /// `ln(1 + x)` as a positive number; `x` itself once `x < e^-30`.
    pub fn ln_1p_pos(self) -> Pos {
        match self.ln.to_f64() {
            l if l < -30.0 => self,
            _ => Pos::from_real(self.ln_1p()),
        }
    }

    /// `exp(x) - 1` for this `x`.
    pub fn exp_m1(self) -> Pos {
        let x = self.real();
        match x.to_f64() {
            v if v < 1e-300 => self,
            v if v < 30.0 => Pos::new(v.exp_m1()),
            _ => Pos::exp(x.add(Tower::from_f64((-(x.neg().exp().to_f64())).ln_1p()))),
        }
    }

    pub fn min(self, o: Pos) -> Pos {
        if self <= o { self } else { o }
    }

    pub fn max(self, o: Pos) -> Pos {
        if self >= o { self } else { o }
    }

    /// Relative gap of `ln a` and `ln b`, taken at the first iterated
    /// logarithm where both are plain floats.
    pub fn log_gap(self, o: Pos) -> f64 {
        let (mut a, mut b) = (self.ln, o.ln);
        if a.sign != b.sign {
            return if a.to_f64().is_finite() && b.to_f64().is_finite() { (a.to_f64() - b.to_f64()).abs() } else { f64::INFINITY };
        }
        while a.level > 0 || b.level > 0 {
            a = a.ln_abs();
            b = b.ln_abs();
        }
        let (x, y) = (a.to_f64(), b.to_f64());
        (x - y).abs() / x.abs().max(y.abs()).max(1.0)
    }
}

impl std::fmt::Display for Tower {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.level {
            0 => write!(f, "{:.9e}", self.to_f64()),
            k => write!(f, "{}exp^{}({:.9})", if self.sign < 0 { "-" } else { "" }, k, self.top),
        }
    }
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let l = self.ln;
        match l.level {
            0 if l.top < 700.0 => write!(f, "{:.6e}", self.value()),
            0 => write!(f, "exp({:.6e})", l.to_f64()),
            k => write!(f, "exp({}exp^{}({:.6}))", if l.sign < 0 { "-" } else { "" }, k, l.top),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_arithmetic_round_trips() {
        let a = Tower::from_f64(3.5);
        let b = Tower::from_f64(-1.25);
        assert!((a.add(b).to_f64() - 2.25).abs() < 1e-15);
        assert!((a.mul(b).to_f64() + 4.375).abs() < 1e-14);
        assert!((a.exp().to_f64() - 3.5f64.exp()).abs() < 1e-12);
        assert!(b < a);
    }

    #[test]
    fn towers_survive_triple_exponentials() {
        let t = Tower::from_f64(1e5).exp().exp();
        assert_eq!(t.level, 2);
        assert!((t.top - 1e5).abs() < 1e-9);
        assert_eq!(t.ln_abs().ln_abs().to_f64(), 1e5);
        let tiny = Pos::exp(t.neg());
        assert!(tiny < Pos::new(1e-300));
        assert_eq!(tiny.value(), 0.0);
        assert!(tiny.recip() > Pos::new(1e300));
    }

    #[test]
    fn positive_sums_and_differences() {
        let a = Pos::new(2.0);
        let b = Pos::new(5.0);
        assert!((a.add(b).value() - 7.0).abs() < 1e-13);
        assert!((b.sub(a).unwrap().value() - 3.0).abs() < 1e-13);
        assert!(a.sub(b).is_none());
        assert!((Pos::new(0.5).ln_1p().to_f64() - 1.5f64.ln()).abs() < 1e-15);
        assert!((Pos::new(0.5).exp_m1().value() - 0.5f64.exp_m1()).abs() < 1e-15);
        let tiny = Pos::from_ln(-1e5);
        assert_eq!(tiny.ln_1p_pos(), tiny);
        assert!((Pos::new(0.5).ln_1p_pos().value() - 1.5f64.ln()).abs() < 1e-15);
        let huge = Pos::from_ln(1e4);
        assert!((huge.ln_1p().to_f64() - 1e4).abs() < 1e-9);
    }
}
