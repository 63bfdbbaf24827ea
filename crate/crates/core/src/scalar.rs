//! Scalar abstraction and forward-mode dual numbers.
//!
//! Every evaluator (Lagrangians, weights, expression trees) is written once
//! against [`Real`] and then run on `f64`, `f32`, or nested [`Dual`] numbers.
//! Nesting `k` levels of duals gives exact mixed partials of order `k`.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::{One, Zero};

pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Number of nested infinitesimal levels (0 for plain floats).
    const DEPTH: usize;

    fn from_f64(x: f64) -> Self;
    /// Real part, projected to `f64`.
    fn value(self) -> f64;

    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn tanh(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf_const(self, p: f64) -> Self;

    /// `value + Σ_l dirs[l] ε_l`, level 0 being the outermost dual.
    fn seeded(value: f64, dirs: &[f64]) -> Self;
    /// Coefficient of `Π_{l: levels[l]} ε_l`.
    fn coefficient(&self, levels: &[bool]) -> f64;

    fn abs(self) -> Self {
        if self.value() < 0.0 {
            -self
        } else {
            self
        }
    }

    fn scale(self, k: f64) -> Self {
        self * Self::from_f64(k)
    }
}

macro_rules! impl_real_float {
    ($t:ty) => {
        impl Real for $t {
            const DEPTH: usize = 0;

            fn from_f64(x: f64) -> Self {
                x as $t
            }
            fn value(self) -> f64 {
                self as f64
            }
            fn sqrt(self) -> Self {
                num_traits::Float::sqrt(self)
            }
            fn exp(self) -> Self {
                num_traits::Float::exp(self)
            }
            fn ln(self) -> Self {
                num_traits::Float::ln(self)
            }
            fn sin(self) -> Self {
                num_traits::Float::sin(self)
            }
            fn cos(self) -> Self {
                num_traits::Float::cos(self)
            }
            fn tan(self) -> Self {
                num_traits::Float::tan(self)
            }
            fn sinh(self) -> Self {
                num_traits::Float::sinh(self)
            }
            fn cosh(self) -> Self {
                num_traits::Float::cosh(self)
            }
            fn tanh(self) -> Self {
                num_traits::Float::tanh(self)
            }
            fn powi(self, n: i32) -> Self {
                num_traits::Float::powi(self, n)
            }
            fn powf_const(self, p: f64) -> Self {
                num_traits::Float::powf(self, p as $t)
            }
            fn seeded(value: f64, dirs: &[f64]) -> Self {
                debug_assert!(dirs.iter().all(|d| *d == 0.0) || dirs.is_empty());
                value as $t
            }
            fn coefficient(&self, levels: &[bool]) -> f64 {
                if levels.iter().any(|l| *l) {
                    0.0
                } else {
                    *self as f64
                }
            }
        }
    };
}

impl_real_float!(f64);
impl_real_float!(f32);

/// `re + du·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub du: T,
}

impl<T: Real> Dual<T> {
    pub fn new(re: T, du: T) -> Self {
        Dual { re, du }
    }

    pub fn constant(re: T) -> Self {
        Dual { re, du: T::zero() }
    }

    /// Applies a scalar function with known value and derivative at `re`.
    fn chain(self, f: T, df: T) -> Self {
        Dual { re: f, du: self.du * df }
    }
}

impl<T: Real> PartialOrd for Dual<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.re.partial_cmp(&other.re)
    }
}

impl<T: Real> Zero for Dual<T> {
    fn zero() -> Self {
        Dual::constant(T::zero())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.du.is_zero()
    }
}

impl<T: Real> One for Dual<T> {
    fn one() -> Self {
        Dual::constant(T::one())
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual { re: self.re + o.re, du: self.du + o.du }
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual { re: self.re - o.re, du: self.du - o.du }
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual { re: self.re * o.re, du: self.re * o.du + self.du * o.re }
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = T::one() / o.re;
        let q = self.re * inv;
        Dual { re: q, du: (self.du - q * o.du) * inv }
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual { re: -self.re, du: -self.du }
    }
}

impl<T: Real> AddAssign for Dual<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}
impl<T: Real> SubAssign for Dual<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}
impl<T: Real> MulAssign for Dual<T> {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}
impl<T: Real> DivAssign for Dual<T> {
    fn div_assign(&mut self, o: Self) {
        *self = *self / o;
    }
}

impl<T: Real> Real for Dual<T> {
    const DEPTH: usize = T::DEPTH + 1;

    fn from_f64(x: f64) -> Self {
        Dual::constant(T::from_f64(x))
    }
    fn value(self) -> f64 {
        self.re.value()
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, T::one() / (s + s))
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.re.ln(), T::one() / self.re)
    }
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn tan(self) -> Self {
        let t = self.re.tan();
        self.chain(t, T::one() + t * t)
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
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::one(),
            1 => self,
            _ => self.chain(self.re.powi(n), self.re.powi(n - 1).scale(n as f64)),
        }
    }
    fn powf_const(self, p: f64) -> Self {
        self.chain(self.re.powf_const(p), self.re.powf_const(p - 1.0).scale(p))
    }
    fn seeded(value: f64, dirs: &[f64]) -> Self {
        let (d0, rest) = dirs.split_first().map_or((0.0, &[][..]), |(a, b)| (*a, b));
        Dual { re: T::seeded(value, rest), du: T::from_f64(d0) }
    }
    fn coefficient(&self, levels: &[bool]) -> f64 {
        match levels.split_first() {
            None => self.re.coefficient(&[]),
            Some((true, rest)) => self.du.coefficient(rest),
            Some((false, rest)) => self.re.coefficient(rest),
        }
    }
}

/// Hyper-dual number over `S`: `s + a ε₁ + b ε₂` with the outer level ε₁.
pub fn hyper<S: Real>(s: S, a: S, b: S) -> Dual<Dual<S>> {
    Dual::new(Dual::new(s, b), Dual::constant(a))
}

/// Components `(value, ∂ε₁, ∂ε₂, ∂ε₁ε₂)` of a hyper-dual.
pub fn hyper_parts<S: Real>(h: Dual<Dual<S>>) -> (S, S, S, S) {
    (h.re.re, h.du.re, h.re.du, h.du.du)
}
