//! Forward-mode dual numbers `re + eps·ε` with `ε² = 0`.
//!
//! `Dual<T>` is itself a [`Scalar`] whenever `T` is, so duals nest:
//! `Dual<Dual<Dual<f64>>>` seeded in three coordinate directions carries every
//! mixed partial derivative up to order three.
//!
//! Comparisons and equality look at the primal part only.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::num::FpCategory;
use std::ops::{
    Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign,
};

use num_traits::{Float, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Scalar> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Self { re, eps }
    }

    pub fn constant(re: T) -> Self {
        Self { re, eps: T::zero() }
    }

    /// A variable with unit tangent.
    pub fn variable(re: T) -> Self {
        Self { re, eps: T::one() }
    }

    /// Applies a function with value `f0` and derivative `f1` at `self.re`.
    #[inline]
    fn chain(self, f0: T, f1: T) -> Self {
        Self {
            re: f0,
            eps: self.eps * f1,
        }
    }
}

impl<T: Scalar> PartialEq for Dual<T> {
    fn eq(&self, other: &Self) -> bool {
        self.re == other.re
    }
}

impl<T: Scalar> PartialOrd for Dual<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.re.partial_cmp(&other.re)
    }
}

impl<T: Scalar> fmt::Display for Dual<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}ε", self.re, self.eps)
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.eps)
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = T::one() / o.re;
        let q = self.re * inv;
        Self::new(q, (self.eps - q * o.eps) * inv)
    }
}

impl<T: Scalar> Rem for Dual<T> {
    type Output = Self;
    fn rem(self, o: Self) -> Self {
        // a % b = a - b·trunc(a/b); trunc is locally constant.
        let k = (self.re / o.re).trunc();
        Self::new(self.re % o.re, self.eps - o.eps * k)
    }
}

macro_rules! assign_ops {
    ($($tr:ident $m:ident $op:tt),*) => {$(
        impl<T: Scalar> $tr for Dual<T> {
            fn $m(&mut self, o: Self) {
                *self = *self $op o;
            }
        }
    )*};
}
assign_ops!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *,
    DivAssign div_assign /, RemAssign rem_assign %);

impl<T: Scalar> Sum for Dual<T> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| a + b)
    }
}

impl<T: Scalar> Zero for Dual<T> {
    fn zero() -> Self {
        Self::constant(T::zero())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.eps.is_zero()
    }
}

impl<T: Scalar> One for Dual<T> {
    fn one() -> Self {
        Self::constant(T::one())
    }
}

impl<T: Scalar> Num for Dual<T> {
    type FromStrRadixErr = T::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        T::from_str_radix(s, radix).map(Self::constant)
    }
}

impl<T: Scalar> ToPrimitive for Dual<T> {
    fn to_i64(&self) -> Option<i64> {
        self.re.to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        self.re.to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        self.re.to_f64()
    }
}

impl<T: Scalar> NumCast for Dual<T> {
    fn from<N: ToPrimitive>(n: N) -> Option<Self> {
        <T as NumCast>::from(n).map(Self::constant)
    }
}

impl<T: Scalar> FromPrimitive for Dual<T> {
    fn from_i64(n: i64) -> Option<Self> {
        T::from_i64(n).map(Self::constant)
    }
    fn from_u64(n: u64) -> Option<Self> {
        T::from_u64(n).map(Self::constant)
    }
    fn from_f64(n: f64) -> Option<Self> {
        T::from_f64(n).map(Self::constant)
    }
}

impl<T: Scalar> Float for Dual<T> {
    fn nan() -> Self {
        Self::constant(T::nan())
    }
    fn infinity() -> Self {
        Self::constant(T::infinity())
    }
    fn neg_infinity() -> Self {
        Self::constant(T::neg_infinity())
    }
    fn neg_zero() -> Self {
        Self::constant(T::neg_zero())
    }
    fn min_value() -> Self {
        Self::constant(T::min_value())
    }
    fn min_positive_value() -> Self {
        Self::constant(T::min_positive_value())
    }
    fn epsilon() -> Self {
        Self::constant(T::epsilon())
    }
    fn max_value() -> Self {
        Self::constant(T::max_value())
    }
    fn is_nan(self) -> bool {
        self.re.is_nan() || self.eps.is_nan()
    }
    fn is_infinite(self) -> bool {
        self.re.is_infinite() || self.eps.is_infinite()
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.eps.is_finite()
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
        Self::new(self.re.fract(), self.eps)
    }
    fn abs(self) -> Self {
        if self.re < T::zero() {
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
        let r = self.re.recip();
        self.chain(r, -r * r)
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::one();
        }
        let pm1 = self.re.powi(n - 1);
        self.chain(pm1 * self.re, T::lit(n as f64) * pm1)
    }
    fn powf(self, n: Self) -> Self {
        if n.eps.is_zero() {
            let pm1 = self.re.powf(n.re - T::one());
            return self.chain(pm1 * self.re, n.re * pm1);
        }
        (self.ln() * n).exp()
    }
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        self.chain(r, T::lit(0.5) / r)
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    fn exp2(self) -> Self {
        let e = self.re.exp2();
        self.chain(e, e * T::lit(std::f64::consts::LN_2))
    }
    fn ln(self) -> Self {
        self.chain(self.re.ln(), self.re.recip())
    }
    fn log(self, base: Self) -> Self {
        self.ln() / base.ln()
    }
    fn log2(self) -> Self {
        self.chain(
            self.re.log2(),
            (self.re * T::lit(std::f64::consts::LN_2)).recip(),
        )
    }
    fn log10(self) -> Self {
        self.chain(
            self.re.log10(),
            (self.re * T::lit(std::f64::consts::LN_10)).recip(),
        )
    }
    fn max(self, other: Self) -> Self {
        if other.re > self.re {
            other
        } else {
            self
        }
    }
    fn min(self, other: Self) -> Self {
        if other.re < self.re {
            other
        } else {
            self
        }
    }
    fn abs_sub(self, other: Self) -> Self {
        if self.re <= other.re {
            Self::zero()
        } else {
            self - other
        }
    }
    fn cbrt(self) -> Self {
        let c = self.re.cbrt();
        self.chain(c, (T::lit(3.0) * c * c).recip())
    }
    fn hypot(self, other: Self) -> Self {
        (self * self + other * other).sqrt()
    }
    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(s, c)
    }
    fn cos(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(c, -s)
    }
    fn tan(self) -> Self {
        let t = self.re.tan();
        self.chain(t, T::one() + t * t)
    }
    fn asin(self) -> Self {
        self.chain(
            self.re.asin(),
            (T::one() - self.re * self.re).sqrt().recip(),
        )
    }
    fn acos(self) -> Self {
        self.chain(
            self.re.acos(),
            -(T::one() - self.re * self.re).sqrt().recip(),
        )
    }
    fn atan(self) -> Self {
        self.chain(self.re.atan(), (T::one() + self.re * self.re).recip())
    }
    fn atan2(self, other: Self) -> Self {
        let d = self.re * self.re + other.re * other.re;
        Self::new(
            self.re.atan2(other.re),
            (other.re * self.eps - self.re * other.eps) / d,
        )
    }
    fn sin_cos(self) -> (Self, Self) {
        let (s, c) = self.re.sin_cos();
        (self.chain(s, c), self.chain(c, -s))
    }
    fn exp_m1(self) -> Self {
        self.chain(self.re.exp_m1(), self.re.exp())
    }
    fn ln_1p(self) -> Self {
        self.chain(self.re.ln_1p(), (T::one() + self.re).recip())
    }
    fn sinh(self) -> Self {
        self.chain(self.re.sinh(), self.re.cosh())
    }
    fn cosh(self) -> Self {
        self.chain(self.re.cosh(), self.re.sinh())
    }
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        self.chain(t, T::one() - t * t)
    }
    fn asinh(self) -> Self {
        self.chain(
            self.re.asinh(),
            (self.re * self.re + T::one()).sqrt().recip(),
        )
    }
    fn acosh(self) -> Self {
        self.chain(
            self.re.acosh(),
            (self.re * self.re - T::one()).sqrt().recip(),
        )
    }
    fn atanh(self) -> Self {
        self.chain(self.re.atanh(), (T::one() - self.re * self.re).recip())
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        self.re.integer_decode()
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn lit(v: f64) -> Self {
        Self::constant(T::lit(v))
    }

    fn re(self) -> f64 {
        self.re.re()
    }
}

/// Third-order hyper-dual used for metric jets.
pub type Dual3<T> = Dual<Dual<Dual<T>>>;

/// Seeds a coordinate for third-order differentiation along directions
/// `(i, j, k)` (outermost to innermost). `axis` is the coordinate index.
pub fn seed3<T: Scalar>(value: T, axis: usize, i: usize, j: usize, k: usize) -> Dual3<T> {
    let d = |a: usize| if a == axis { T::one() } else { T::zero() };
    let inner = Dual::new(value, d(k));
    let mid = Dual::new(inner, Dual::constant(d(j)));
    Dual::new(mid, Dual::constant(Dual::constant(d(i))))
}

/// Components of a third-order hyper-dual value seeded with [`seed3`]:
/// `(value, ∂_i, ∂_j, ∂_k, ∂_i∂_j, ∂_i∂_k, ∂_j∂_k, ∂_i∂_j∂_k)`.
pub struct Dual3Parts<T> {
    pub value: T,
    pub di: T,
    pub dj: T,
    pub dk: T,
    pub dij: T,
    pub dik: T,
    pub djk: T,
    pub dijk: T,
}

pub fn split3<T: Scalar>(v: Dual3<T>) -> Dual3Parts<T> {
    Dual3Parts {
        value: v.re.re.re,
        dk: v.re.re.eps,
        dj: v.re.eps.re,
        djk: v.re.eps.eps,
        di: v.eps.re.re,
        dik: v.eps.re.eps,
        dij: v.eps.eps.re,
        dijk: v.eps.eps.eps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(x: f64) -> Dual<f64> {
        Dual::variable(x)
    }

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    type Case = (fn(Dual<f64>) -> Dual<f64>, fn(f64) -> f64);

    #[test]
    fn elementary_derivatives_match_central_differences() {
        let x = 0.37;
        let cases: Vec<Case> = vec![
            (|a| a.sin(), f64::sin),
            (|a| a.cos(), f64::cos),
            (|a| a.tan(), f64::tan),
            (|a| a.exp(), f64::exp),
            (|a| a.ln(), f64::ln),
            (|a| a.sqrt(), f64::sqrt),
            (|a| a.cbrt(), f64::cbrt),
            (|a| a.asin(), f64::asin),
            (|a| a.acos(), f64::acos),
            (|a| a.atan(), f64::atan),
            (|a| a.sinh(), f64::sinh),
            (|a| a.cosh(), f64::cosh),
            (|a| a.tanh(), f64::tanh),
            (|a| a.powi(5), |v| v.powi(5)),
            (|a| a.powf(Dual::constant(2.5)), |v| v.powf(2.5)),
            (|a| a.recip(), f64::recip),
            (|a| a.exp2(), f64::exp2),
            (|a| a.log10(), f64::log10),
        ];
        for (f, g) in cases {
            let got = f(d(x));
            assert!((got.re - g(x)).abs() < 1e-15);
            assert!(
                (got.eps - fd(g, x)).abs() < 1e-8,
                "{} vs {}",
                got.eps,
                fd(g, x)
            );
        }
    }

    #[test]
    fn quotient_and_product_rules() {
        let x = d(1.3);
        let y = (x * x + Dual::constant(1.0)) / (x.sin() + Dual::constant(2.0));
        let g = |v: f64| (v * v + 1.0) / (v.sin() + 2.0);
        assert!((y.eps - fd(g, 1.3)).abs() < 1e-8);
    }

    #[test]
    fn third_order_nesting_recovers_mixed_partials() {
        // f(x, y) = sin(x)·y³ ; ∂x∂y∂y f = 6 y cos x
        let (x0, y0) = (0.4, -0.7);
        let f = |v: [Dual3<f64>; 2]| v[0].sin() * v[1].powi(3);
        let v = [seed3(x0, 0, 0, 1, 1), seed3(y0, 1, 0, 1, 1)];
        let p = split3(f(v));
        assert!((p.value - x0.sin() * y0.powi(3)).abs() < 1e-15);
        assert!((p.di - x0.cos() * y0.powi(3)).abs() < 1e-14);
        assert!((p.dj - 3.0 * x0.sin() * y0 * y0).abs() < 1e-14);
        assert!((p.djk - 6.0 * x0.sin() * y0).abs() < 1e-14);
        assert!((p.dijk - 6.0 * x0.cos() * y0).abs() < 1e-14);
    }
}
