//! Working fields and the two-parameter rate functions.
//!
//! Every formula in this crate is assembled from four rational functions of a
//! pair of spectral parameters and a fixed coupling constant `c`:
//!
//! ```text
//! g(x,y) = c/(x-y)              f(x,y) = (x-y+c)/(x-y) = 1 + g(x,y)
//! h(x,y) = f/g = (x-y+c)/c      t(x,y) = g/h = c^2/((x-y)(x-y+c))
//! ```
//!
//! `h` and `t` are implemented through the closed forms on the right, not as
//! quotients: `h` is a polynomial in `x-y` and stays finite at `x = y`, which
//! matters because several determinant formulas evaluate `h` at coincident or
//! `c`-shifted points where the `f/g` quotient would be 0/0.
//!
//! Two scalar backends implement [`Field`]:
//!
//! * [`Rat`] (arbitrary-precision rationals) for exact identities, and
//! * [`C64`] (complex double precision) for root finding and on-shell work.
//!
//! Comparisons go through [`Field::eq_tol`], which demands identity in exact
//! mode and a relative tolerance `|a-b| <= tol * max(1, |a|, |b|)` in float
//! mode.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::traits::ToPrimitive;
use num::{BigInt, One, Zero};

use crate::error::{Error, Result};

/// Exact rational scalar.
pub type Rat = num::BigRational;
/// Complex double-precision scalar.
pub type C64 = num::complex::Complex64;

/// Scalar values the library can compute with.
///
/// The trait is deliberately small: ring operations by value, a handful of
/// constructors, and mode-dependent comparison. Formula code clones freely;
/// all matrices in scope are tiny.
pub trait Field:
    Sized
    + Clone
    + PartialEq
    + Debug
    + Display
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
{
    /// True when arithmetic is exact and comparisons may demand identity.
    const EXACT: bool;

    /// Mode label used in reports and error messages.
    fn mode_name() -> &'static str;

    fn from_int(n: i64) -> Self;

    /// The fraction `num/den`. Panics if `den == 0`.
    fn from_ratio(num: i64, den: i64) -> Self;

    /// Magnitude estimate used for pivot selection and deviation reports.
    fn mag(&self) -> f64;

    /// Exact equality in exact mode, relative comparison otherwise.
    fn eq_tol(&self, other: &Self, tol: f64) -> bool;

    /// Principal natural logarithm; `None` in exact mode.
    fn try_ln(&self) -> Option<Self>;
}

impl Field for Rat {
    const EXACT: bool = true;

    fn mode_name() -> &'static str {
        "rational"
    }

    fn from_int(n: i64) -> Self {
        Rat::from_integer(BigInt::from(n))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Rat::new(BigInt::from(num), BigInt::from(den))
    }

    fn mag(&self) -> f64 {
        self.to_f64().unwrap_or(f64::INFINITY).abs()
    }

    fn eq_tol(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }

    fn try_ln(&self) -> Option<Self> {
        None
    }
}

impl Field for C64 {
    const EXACT: bool = false;

    fn mode_name() -> &'static str {
        "float"
    }

    fn from_int(n: i64) -> Self {
        C64::new(n as f64, 0.0)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        C64::new(num as f64 / den as f64, 0.0)
    }

    fn mag(&self) -> f64 {
        self.norm()
    }

    fn eq_tol(&self, other: &Self, tol: f64) -> bool {
        let scale = 1f64.max(self.norm()).max(other.norm());
        (self - other).norm() <= tol * scale
    }

    fn try_ln(&self) -> Option<Self> {
        Some(self.ln())
    }
}

/// Selector for the four rate functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    G,
    F,
    H,
    T,
}

impl RateKind {
    pub fn name(self) -> &'static str {
        match self {
            RateKind::G => "g",
            RateKind::F => "f",
            RateKind::H => "h",
            RateKind::T => "t",
        }
    }
}

/// The coupling constant together with evaluators for g, f, h, t and their
/// products over parameter sets.
#[derive(Debug, Clone)]
pub struct RateKernel<F> {
    c: F,
}

impl<F: Field> RateKernel<F> {
    /// A kernel with coupling `c`. Fails on `c = 0`, where every rate
    /// function degenerates.
    pub fn new(c: F) -> Result<Self> {
        if c.is_zero() {
            return Err(Error::Pole("coupling constant c must be nonzero".into()));
        }
        Ok(RateKernel { c })
    }

    pub fn c(&self) -> &F {
        &self.c
    }

    /// `g(x,y) = c/(x-y)`; pole at `x = y`.
    pub fn g(&self, x: &F, y: &F) -> Result<F> {
        let d = x.clone() - y.clone();
        if d.is_zero() {
            return Err(Error::Pole(format!("g({x}, {y}): x - y = 0")));
        }
        Ok(self.c.clone() / d)
    }

    /// `f(x,y) = (x-y+c)/(x-y)`; pole at `x = y`.
    pub fn f(&self, x: &F, y: &F) -> Result<F> {
        let d = x.clone() - y.clone();
        if d.is_zero() {
            return Err(Error::Pole(format!("f({x}, {y}): x - y = 0")));
        }
        Ok((d.clone() + self.c.clone()) / d)
    }

    /// `h(x,y) = (x-y+c)/c`, the pole-free form of `f/g`. Total.
    pub fn h(&self, x: &F, y: &F) -> F {
        (x.clone() - y.clone() + self.c.clone()) / self.c.clone()
    }

    /// `t(x,y) = c^2/((x-y)(x-y+c))`; poles at `x = y` and `x = y - c`.
    pub fn t(&self, x: &F, y: &F) -> Result<F> {
        let d = x.clone() - y.clone();
        if d.is_zero() {
            return Err(Error::Pole(format!("t({x}, {y}): x - y = 0")));
        }
        let dc = d.clone() + self.c.clone();
        if dc.is_zero() {
            return Err(Error::Pole(format!("t({x}, {y}): x - y + c = 0")));
        }
        Ok(self.c.clone() * self.c.clone() / (d * dc))
    }

    /// One of the four rate functions, selected at runtime.
    pub fn rate(&self, kind: RateKind, x: &F, y: &F) -> Result<F> {
        match kind {
            RateKind::G => self.g(x, y),
            RateKind::F => self.f(x, y),
            RateKind::H => Ok(self.h(x, y)),
            RateKind::T => self.t(x, y),
        }
    }

    /// Double set product `prod_{x in xs} prod_{y in ys} kind(x,y)`.
    ///
    /// Empty factors give 1. The pole error, if any, names the offending pair.
    pub fn prod(&self, kind: RateKind, xs: &[F], ys: &[F]) -> Result<F> {
        let mut acc = F::one();
        for x in xs {
            for y in ys {
                acc = acc
                    * self.rate(kind, x, y).map_err(|_| {
                        Error::Pole(format!(
                            "{}({x}, {y}) undefined inside set product",
                            kind.name()
                        ))
                    })?;
            }
        }
        Ok(acc)
    }

    pub fn g_set(&self, xs: &[F], ys: &[F]) -> Result<F> {
        self.prod(RateKind::G, xs, ys)
    }

    pub fn f_set(&self, xs: &[F], ys: &[F]) -> Result<F> {
        self.prod(RateKind::F, xs, ys)
    }

    pub fn h_set(&self, xs: &[F], ys: &[F]) -> Result<F> {
        self.prod(RateKind::H, xs, ys)
    }

    pub fn t_set(&self, xs: &[F], ys: &[F]) -> Result<F> {
        self.prod(RateKind::T, xs, ys)
    }

    /// `prod_{j>k} g(x_j, x_k)` over one ordered set.
    pub fn delta_prime(&self, xs: &[F]) -> Result<F> {
        let mut acc = F::one();
        for j in 0..xs.len() {
            for k in 0..j {
                acc = acc * self.g(&xs[j], &xs[k])?;
            }
        }
        Ok(acc)
    }

    /// `prod_{j<k} g(x_j, x_k)` over one ordered set.
    pub fn delta(&self, xs: &[F]) -> Result<F> {
        let mut acc = F::one();
        for j in 0..xs.len() {
            for k in (j + 1)..xs.len() {
                acc = acc * self.g(&xs[j], &xs[k])?;
            }
        }
        Ok(acc)
    }
}

/// Division guarded against a vanishing denominator.
///
/// Exact zero denominators panic (`BigRational`) or poison the result
/// (`Complex64`), so formula code routes every denominator that could
/// vanish at special parameter values through this check.
pub fn div_nz<F: Field>(num: F, den: F, what: &str) -> Result<F> {
    if den.is_zero() {
        return Err(Error::Pole(format!("{what} vanishes")));
    }
    Ok(num / den)
}
