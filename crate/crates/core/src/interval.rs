//! Outward-rounded interval arithmetic.
//!
//! Every bound is computed with round-to-nearest and then corrected with an
//! error-free transformation (TwoSum / FMA residual): if the exact result lies
//! on the wrong side of the rounded value, the bound is moved one ulp outward.
//! Near the underflow threshold the residual is no longer exact, so the bound
//! is always widened there.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

/// Below this magnitude FMA residuals may be inexact.
const UNDERFLOW_GUARD: f64 = 1e-290;

/// Exact `a * b − p` for `p = fl(a * b)`, assuming no underflow or overflow
/// in the partial products (callers guard both).
#[cfg(target_feature = "fma")]
fn prod_residual(a: f64, b: f64, p: f64) -> f64 {
    a.mul_add(b, -p)
}

/// Exact `a * b − p` for `p = fl(a * b)` by Dekker's product; a software
/// `fma` is far slower than this without hardware support.
#[cfg(not(target_feature = "fma"))]
fn prod_residual(a: f64, b: f64, p: f64) -> f64 {
    fn split(x: f64) -> (f64, f64) {
        let c = 134_217_729.0 * x; // 2^27 + 1
        let hi = c - (c - x);
        (hi, x - hi)
    }
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    ((ah * bh - p) + ah * bl + al * bh) + al * bl
}

/// Magnitude above which the Dekker split may overflow.
const OVERFLOW_GUARD: f64 = 1e290;

fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    let aa = s - bb;
    (a - aa) + (b - bb)
}

/// `a + b` rounded toward negative infinity.
pub fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    if s.abs() < UNDERFLOW_GUARD && s != 0.0 {
        return s.next_down();
    }
    if two_sum_err(a, b, s) < 0.0 {
        s.next_down()
    } else {
        s
    }
}

/// `a + b` rounded toward positive infinity.
pub fn add_up(a: f64, b: f64) -> f64 {
    -add_down(-a, -b)
}

pub fn sub_down(a: f64, b: f64) -> f64 {
    add_down(a, -b)
}

pub fn sub_up(a: f64, b: f64) -> f64 {
    add_up(a, -b)
}

/// `a * b` rounded toward negative infinity.
pub fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() || a == 0.0 || b == 0.0 {
        return p;
    }
    if p.abs() < UNDERFLOW_GUARD || a.abs() > OVERFLOW_GUARD || b.abs() > OVERFLOW_GUARD {
        return p.next_down();
    }
    if prod_residual(a, b, p) < 0.0 {
        p.next_down()
    } else {
        p
    }
}

/// `a * b` rounded toward positive infinity.
pub fn mul_up(a: f64, b: f64) -> f64 {
    -mul_down(-a, b)
}

/// `a * b` rounded down and up, sharing one residual computation.
fn mul_both(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    if !p.is_finite() || a == 0.0 || b == 0.0 {
        return (p, p);
    }
    if p.abs() < UNDERFLOW_GUARD || a.abs() > OVERFLOW_GUARD || b.abs() > OVERFLOW_GUARD {
        return (p.next_down(), p.next_up());
    }
    let r = prod_residual(a, b, p);
    if r < 0.0 {
        (p.next_down(), p)
    } else if r > 0.0 {
        (p, p.next_up())
    } else {
        (p, p)
    }
}

/// `a / b` rounded toward negative infinity. `b` must be nonzero.
pub fn div_down(a: f64, b: f64) -> f64 {
    let q = a / b;
    if !q.is_finite() || a == 0.0 {
        return q;
    }
    if q.abs() < UNDERFLOW_GUARD
        || b.abs() < UNDERFLOW_GUARD
        || a.abs() < UNDERFLOW_GUARD
        || q.abs() > OVERFLOW_GUARD
        || b.abs() > OVERFLOW_GUARD
    {
        return q.next_down();
    }
    // exact remainder a - q*b; the true quotient is below q iff r/b < 0
    let p = q * b;
    let r = (a - p) - prod_residual(q, b, p);
    if (r < 0.0) != (b < 0.0) && r != 0.0 {
        q.next_down()
    } else {
        q
    }
}

pub fn div_up(a: f64, b: f64) -> f64 {
    -div_down(-a, b)
}

/// Square root of a nonnegative number rounded down (clamped at zero).
pub fn sqrt_down(a: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let s = a.sqrt();
    if !(UNDERFLOW_GUARD..=OVERFLOW_GUARD).contains(&a) {
        return s.next_down().max(0.0);
    }
    let p = s * s;
    if (a - p) - prod_residual(s, s, p) < 0.0 {
        s.next_down()
    } else {
        s
    }
}

pub fn sqrt_up(a: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let s = a.sqrt();
    if !(UNDERFLOW_GUARD..=OVERFLOW_GUARD).contains(&a) {
        return s.next_up();
    }
    let p = s * s;
    if (a - p) - prod_residual(s, s, p) > 0.0 {
        s.next_up()
    } else {
        s
    }
}

/// A closed real interval `[lo, hi]`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// Symmetric interval `[-r, r]`.
    pub fn symmetric(r: f64) -> Self {
        Interval { lo: -r, hi: r }
    }

    pub fn is_point_zero(&self) -> bool {
        self.lo == 0.0 && self.hi == 0.0
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        sub_up(self.hi, self.lo)
    }

    pub fn mid(&self) -> f64 {
        if self.lo == self.hi {
            return self.lo;
        }
        0.5 * self.lo + 0.5 * self.hi
    }

    /// Upper bound on `|x|` over the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Lower bound on `|x|` over the interval.
    pub fn mig(&self) -> f64 {
        if self.lo > 0.0 {
            self.lo
        } else if self.hi < 0.0 {
            -self.hi
        } else {
            0.0
        }
    }

    pub fn abs(&self) -> Interval {
        Interval { lo: self.mig(), hi: self.mag() }
    }

    /// Exact range of `x²` over the interval (outward rounded).
    pub fn sqr(&self) -> Interval {
        let lo = self.mig();
        let hi = self.mag();
        Interval { lo: mul_down(lo, lo), hi: mul_up(hi, hi) }
    }

    pub fn sqrt(&self) -> Interval {
        Interval { lo: sqrt_down(self.lo), hi: sqrt_up(self.hi) }
    }

    pub fn scale(&self, k: f64) -> Interval {
        *self * Interval::point(k)
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    /// Lower bound of `self / d` for `d` strictly positive.
    pub fn div_pos(&self, d: &Interval) -> Interval {
        assert!(d.lo > 0.0, "division by interval containing zero");
        let lo = if self.lo >= 0.0 { div_down(self.lo, d.hi) } else { div_down(self.lo, d.lo) };
        let hi = if self.hi >= 0.0 { div_up(self.hi, d.lo) } else { div_up(self.hi, d.hi) };
        Interval { lo, hi }
    }
}

impl From<f64> for Interval {
    fn from(x: f64) -> Self {
        Interval::point(x)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        Interval { lo: add_down(self.lo, o.lo), hi: add_up(self.hi, o.hi) }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        Interval { lo: sub_down(self.lo, o.hi), hi: sub_up(self.hi, o.lo) }
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        if self.is_point_zero() || o.is_point_zero() {
            return Interval::ZERO;
        }
        let (x, y) = if o.lo == o.hi { (o, self) } else { (self, o) };
        if x.lo == x.hi {
            let a = x.lo;
            if a.is_finite() {
                let (l, h) = if a >= 0.0 { (y.lo, y.hi) } else { (y.hi, y.lo) };
                return Interval { lo: mul_both(a, l).0, hi: mul_both(a, h).1 };
            }
        }
        if self.lo >= 0.0 && o.lo >= 0.0 {
            return Interval { lo: mul_both(self.lo, o.lo).0, hi: mul_both(self.hi, o.hi).1 };
        }
        let cands = [(self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi)];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b) in cands {
            let (d, u) = mul_both(a, b);
            lo = lo.min(d);
            hi = hi.max(u);
        }
        Interval { lo, hi }
    }
}

/// A rectangular complex interval: real and imaginary parts enclosed separately.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CInterval {
    pub re: Interval,
    pub im: Interval,
}

impl CInterval {
    pub const ZERO: CInterval = CInterval { re: Interval::ZERO, im: Interval::ZERO };

    pub fn new(re: Interval, im: Interval) -> Self {
        CInterval { re, im }
    }

    pub fn point(z: Complex64) -> Self {
        CInterval { re: Interval::point(z.re), im: Interval::point(z.im) }
    }

    pub fn real(x: f64) -> Self {
        CInterval { re: Interval::point(x), im: Interval::ZERO }
    }

    pub fn is_point_zero(&self) -> bool {
        self.re.is_point_zero() && self.im.is_point_zero()
    }

    pub fn mid(&self) -> Complex64 {
        Complex64::new(self.re.mid(), self.im.mid())
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.re.contains(z.re) && self.im.contains(z.im)
    }

    /// Upper bound on the modulus over the rectangle.
    pub fn abs_upper(&self) -> f64 {
        (self.re.sqr() + self.im.sqr()).sqrt().hi
    }

    /// Enclosure of `|z|²`.
    pub fn norm_sqr(&self) -> Interval {
        self.re.sqr() + self.im.sqr()
    }
}

impl Add for CInterval {
    type Output = CInterval;
    fn add(self, o: CInterval) -> CInterval {
        CInterval { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for CInterval {
    type Output = CInterval;
    fn sub(self, o: CInterval) -> CInterval {
        CInterval { re: self.re - o.re, im: self.im - o.im }
    }
}

impl Neg for CInterval {
    type Output = CInterval;
    fn neg(self) -> CInterval {
        CInterval { re: -self.re, im: -self.im }
    }
}

impl Mul for CInterval {
    type Output = CInterval;
    fn mul(self, o: CInterval) -> CInterval {
        if self.is_point_zero() || o.is_point_zero() {
            return CInterval::ZERO;
        }
        // real factors avoid the spurious zero-width products of the general formula
        if self.im.is_point_zero() {
            return CInterval { re: self.re * o.re, im: self.re * o.im };
        }
        if o.im.is_point_zero() {
            return CInterval { re: self.re * o.re, im: self.im * o.re };
        }
        CInterval {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_operations_stay_points() {
        let a = Interval::point(0.5) + Interval::point(0.25);
        assert_eq!(a, Interval::point(0.75));
        let b = Interval::point(3.0) * Interval::point(4.0);
        assert_eq!(b, Interval::point(12.0));
    }

    #[test]
    fn inexact_sum_is_widened() {
        let a = Interval::point(0.1) + Interval::point(0.2);
        assert!(a.lo < a.hi);
        assert!(a.contains(0.1 + 0.2));
    }

    #[test]
    fn sqr_of_straddling_interval_starts_at_zero() {
        let a = Interval::new(-2.0, 1.0).sqr();
        assert_eq!(a.lo, 0.0);
        assert!(a.hi >= 4.0);
    }

    #[test]
    fn sqrt_bounds_bracket() {
        let lo = sqrt_down(2.0);
        let hi = sqrt_up(2.0);
        assert!(lo <= hi);
        assert!(mul_down(lo, lo) <= 2.0);
        assert!(mul_up(hi, hi) >= 2.0);
    }

    #[test]
    fn complex_product_encloses() {
        let a = Complex64::new(0.1, 0.3);
        let b = Complex64::new(-0.7, 0.2);
        let p = CInterval::point(a) * CInterval::point(b);
        assert!(p.contains(a * b));
    }

    proptest! {
        #[test]
        fn directed_rounding_brackets(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            prop_assert!(add_down(a, b) <= add_up(a, b));
            prop_assert!(mul_down(a, b) <= mul_up(a, b));
            prop_assert!(mul_up(a, b) - mul_down(a, b) <= 2.0 * (a * b).abs() * f64::EPSILON + 1e-300);
            if b.abs() > 1e-3 {
                let q = a / b;
                prop_assert!(div_down(a, b) <= q && q <= div_up(a, b));
            }
        }

        #[test]
        fn interval_mul_encloses_samples(a in -10f64..10.0, w in 0f64..3.0, b in -10f64..10.0, v in 0f64..3.0, s in 0f64..1.0, t in 0f64..1.0) {
            let x = Interval::new(a, a + w);
            let y = Interval::new(b, b + v);
            let px = a + s * w;
            let py = b + t * v;
            prop_assert!((x * y).contains(px * py));
            prop_assert!((x + y).contains(px + py));
            prop_assert!((x - y).contains(px - py));
        }
    }
}
