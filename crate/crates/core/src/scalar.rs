//! Scalar abstraction shared by the pricers, so one code path serves plain
//! `f64` evaluation and second-order forward-mode differentiation.

use num_traits::{Float, Num, NumCast, One, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::num::FpCategory;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, Sub, SubAssign};

pub trait Real:
    Float
    + Default
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
{
    fn cst(x: f64) -> Self;

    /// Primal value.
    fn val(self) -> f64;

    /// Largest absolute component; used for convergence tests that must also
    /// cover the derivative parts.
    fn magnitude(self) -> f64;

    /// All stored components, primal first, zero padded.
    fn parts(self) -> [f64; 4];

    /// Inverse of [`Real::parts`]; components the type cannot hold are dropped.
    fn from_parts(p: [f64; 4]) -> Self;
}

impl Real for f64 {
    #[inline]
    fn cst(x: f64) -> Self {
        x
    }
    #[inline]
    fn val(self) -> f64 {
        self
    }
    #[inline]
    fn magnitude(self) -> f64 {
        self.abs()
    }
    #[inline]
    fn parts(self) -> [f64; 4] {
        [self, 0.0, 0.0, 0.0]
    }
    #[inline]
    fn from_parts(p: [f64; 4]) -> Self {
        p[0]
    }
}

/// Hyper-dual number `a + b e1 + c e2 + d e1e2` with `e1² = e2² = 0`.
///
/// Seeding two inputs (or one input twice) yields exact first derivatives in
/// `e1`, `e2` and the mixed second derivative in `e12`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HyperDual {
    pub re: f64,
    pub e1: f64,
    pub e2: f64,
    pub e12: f64,
}

impl HyperDual {
    pub const fn new(re: f64, e1: f64, e2: f64, e12: f64) -> Self {
        Self { re, e1, e2, e12 }
    }

    pub const fn constant(re: f64) -> Self {
        Self::new(re, 0.0, 0.0, 0.0)
    }

    /// Variable seeded in both directions, giving f' in `e1`/`e2` and f'' in `e12`.
    pub const fn variable(re: f64) -> Self {
        Self::new(re, 1.0, 1.0, 0.0)
    }

    pub const fn seed_e1(re: f64) -> Self {
        Self::new(re, 1.0, 0.0, 0.0)
    }

    pub const fn seed_e2(re: f64) -> Self {
        Self::new(re, 0.0, 1.0, 0.0)
    }

    #[inline]
    fn chain(self, f: f64, d1: f64, d2: f64) -> Self {
        Self {
            re: f,
            e1: d1 * self.e1,
            e2: d1 * self.e2,
            e12: d1 * self.e12 + d2 * self.e1 * self.e2,
        }
    }
}

impl fmt::Display for HyperDual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.re)
    }
}

impl Add for HyperDual {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.e1 + o.e1, self.e2 + o.e2, self.e12 + o.e12)
    }
}

impl Sub for HyperDual {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.e1 - o.e1, self.e2 - o.e2, self.e12 - o.e12)
    }
}

impl Mul for HyperDual {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.re * o.re,
            self.re * o.e1 + self.e1 * o.re,
            self.re * o.e2 + self.e2 * o.re,
            self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        )
    }
}

impl Div for HyperDual {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl Rem for HyperDual {
    type Output = Self;
    fn rem(self, o: Self) -> Self {
        // derivative of x mod y is that of x - trunc(x/y) y with the trunc held fixed
        let q = (self.re / o.re).trunc();
        self - o * Self::constant(q)
    }
}

impl Neg for HyperDual {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.e1, -self.e2, -self.e12)
    }
}

impl AddAssign for HyperDual {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}
impl SubAssign for HyperDual {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}
impl MulAssign for HyperDual {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}
impl DivAssign for HyperDual {
    #[inline]
    fn div_assign(&mut self, o: Self) {
        *self = *self / o;
    }
}

impl Sum for HyperDual {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| a + b)
    }
}

impl PartialOrd for HyperDual {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        self.re.partial_cmp(&o.re)
    }
}

impl Zero for HyperDual {
    fn zero() -> Self {
        Self::constant(0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.e1 == 0.0 && self.e2 == 0.0 && self.e12 == 0.0
    }
}

impl One for HyperDual {
    fn one() -> Self {
        Self::constant(1.0)
    }
}

impl Num for HyperDual {
    type FromStrRadixErr = <f64 as Num>::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Self::constant)
    }
}

impl ToPrimitive for HyperDual {
    fn to_i64(&self) -> Option<i64> {
        self.re.to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        self.re.to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.re)
    }
}

impl NumCast for HyperDual {
    fn from<N: ToPrimitive>(n: N) -> Option<Self> {
        n.to_f64().map(Self::constant)
    }
}

impl Float for HyperDual {
    fn nan() -> Self {
        Self::constant(f64::NAN)
    }
    fn infinity() -> Self {
        Self::constant(f64::INFINITY)
    }
    fn neg_infinity() -> Self {
        Self::constant(f64::NEG_INFINITY)
    }
    fn neg_zero() -> Self {
        Self::constant(-0.0)
    }
    fn min_value() -> Self {
        Self::constant(f64::MIN)
    }
    fn min_positive_value() -> Self {
        Self::constant(f64::MIN_POSITIVE)
    }
    fn epsilon() -> Self {
        Self::constant(f64::EPSILON)
    }
    fn max_value() -> Self {
        Self::constant(f64::MAX)
    }
    fn is_nan(self) -> bool {
        self.re.is_nan()
    }
    fn is_infinite(self) -> bool {
        self.re.is_infinite()
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.e1.is_finite() && self.e2.is_finite() && self.e12.is_finite()
    }
    fn is_normal(self) -> bool {
        self.re.is_normal()
    }
    fn classify(self) -> FpCategory {
        self.re.classify()
    }
    fn floor(self) -> Self {
        Self::constant(self.re.floor())
    }
    fn ceil(self) -> Self {
        Self::constant(self.re.ceil())
    }
    fn round(self) -> Self {
        Self::constant(self.re.round())
    }
    fn trunc(self) -> Self {
        Self::constant(self.re.trunc())
    }
    fn fract(self) -> Self {
        Self::new(self.re.fract(), self.e1, self.e2, self.e12)
    }
    fn abs(self) -> Self {
        if self.re < 0.0 {
            -self
        } else {
            self
        }
    }
    fn signum(self) -> Self {
        Self::constant(self.re.signum())
    }
    fn is_sign_positive(self) -> bool {
        self.re.is_sign_positive()
    }
    fn is_sign_negative(self) -> bool {
        self.re.is_sign_negative()
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }
    fn recip(self) -> Self {
        let r = 1.0 / self.re;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::one();
        }
        let nf = n as f64;
        let p = self.re.powi(n);
        let d1 = nf * self.re.powi(n - 1);
        let d2 = if n == 1 { 0.0 } else { nf * (nf - 1.0) * self.re.powi(n - 2) };
        self.chain(p, d1, d2)
    }
    fn powf(self, n: Self) -> Self {
        if n.e1 == 0.0 && n.e2 == 0.0 && n.e12 == 0.0 {
            let e = n.re;
            if e == 0.0 {
                return Self::one();
            }
            let p = self.re.powf(e);
            let d1 = if e == 1.0 { 1.0 } else { e * self.re.powf(e - 1.0) };
            let d2 = if e == 1.0 { 0.0 } else { e * (e - 1.0) * self.re.powf(e - 2.0) };
            self.chain(p, d1, d2)
        } else {
            (self.ln() * n).exp()
        }
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.re))
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e, e)
    }
    fn exp2(self) -> Self {
        let e = self.re.exp2();
        let l = std::f64::consts::LN_2;
        self.chain(e, e * l, e * l * l)
    }
    fn ln(self) -> Self {
        let r = 1.0 / self.re;
        self.chain(self.re.ln(), r, -r * r)
    }
    fn log(self, base: Self) -> Self {
        self.ln() / base.ln()
    }
    fn log2(self) -> Self {
        self.ln() / Self::constant(std::f64::consts::LN_2)
    }
    fn log10(self) -> Self {
        self.ln() / Self::constant(std::f64::consts::LN_10)
    }
    fn max(self, o: Self) -> Self {
        if o.re > self.re {
            o
        } else {
            self
        }
    }
    fn min(self, o: Self) -> Self {
        if o.re < self.re {
            o
        } else {
            self
        }
    }
    fn abs_sub(self, o: Self) -> Self {
        if self.re > o.re {
            self - o
        } else {
            Self::zero()
        }
    }
    fn cbrt(self) -> Self {
        let c = self.re.cbrt();
        let d1 = c / (3.0 * self.re);
        self.chain(c, d1, -2.0 * d1 / (3.0 * self.re))
    }
    fn hypot(self, o: Self) -> Self {
        (self * self + o * o).sqrt()
    }
    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(c, -s, -c)
    }
    fn tan(self) -> Self {
        let t = self.re.tan();
        let d1 = 1.0 + t * t;
        self.chain(t, d1, 2.0 * t * d1)
    }
    fn asin(self) -> Self {
        let q = 1.0 - self.re * self.re;
        let d1 = 1.0 / q.sqrt();
        self.chain(self.re.asin(), d1, self.re * d1 / q)
    }
    fn acos(self) -> Self {
        let q = 1.0 - self.re * self.re;
        let d1 = -1.0 / q.sqrt();
        self.chain(self.re.acos(), d1, self.re * d1 / q)
    }
    fn atan(self) -> Self {
        let q = 1.0 + self.re * self.re;
        self.chain(self.re.atan(), 1.0 / q, -2.0 * self.re / (q * q))
    }
    fn atan2(self, o: Self) -> Self {
        // rotate so the primal point sits on the positive axis, where atan is smooth
        let (y0, x0) = (self.re, o.re);
        let num = self * Self::constant(x0) - o * Self::constant(y0);
        let den = o * Self::constant(x0) + self * Self::constant(y0);
        let mut r = (num / den).atan();
        r.re = y0.atan2(x0);
        r
    }
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    fn exp_m1(self) -> Self {
        let e = self.re.exp();
        self.chain(self.re.exp_m1(), e, e)
    }
    fn ln_1p(self) -> Self {
        let r = 1.0 / (1.0 + self.re);
        self.chain(self.re.ln_1p(), r, -r * r)
    }
    fn sinh(self) -> Self {
        let (s, c) = (self.re.sinh(), self.re.cosh());
        self.chain(s, c, s)
    }
    fn cosh(self) -> Self {
        let (s, c) = (self.re.sinh(), self.re.cosh());
        self.chain(c, s, c)
    }
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        let d1 = 1.0 - t * t;
        self.chain(t, d1, -2.0 * t * d1)
    }
    fn asinh(self) -> Self {
        let q = 1.0 + self.re * self.re;
        let d1 = 1.0 / q.sqrt();
        self.chain(self.re.asinh(), d1, -self.re * d1 / q)
    }
    fn acosh(self) -> Self {
        let q = self.re * self.re - 1.0;
        let d1 = 1.0 / q.sqrt();
        self.chain(self.re.acosh(), d1, -self.re * d1 / q)
    }
    fn atanh(self) -> Self {
        let q = 1.0 - self.re * self.re;
        self.chain(self.re.atanh(), 1.0 / q, 2.0 * self.re / (q * q))
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        self.re.integer_decode()
    }
}

impl Real for HyperDual {
    #[inline]
    fn cst(x: f64) -> Self {
        Self::constant(x)
    }
    #[inline]
    fn val(self) -> f64 {
        self.re
    }
    #[inline]
    fn magnitude(self) -> f64 {
        self.re
            .abs()
            .max(self.e1.abs())
            .max(self.e2.abs())
            .max(self.e12.abs())
    }
    #[inline]
    fn parts(self) -> [f64; 4] {
        [self.re, self.e1, self.e2, self.e12]
    }
    #[inline]
    fn from_parts(p: [f64; 4]) -> Self {
        Self::new(p[0], p[1], p[2], p[3])
    }
}
