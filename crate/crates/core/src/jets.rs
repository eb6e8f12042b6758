//! Truncated Taylor series in one variable.
//!
//! A [`TaylorJet`] of order `N` stores the normalized coefficients
//! `f(t0)`, `f'(t0)`, `f''(t0)/2!`, ..., `f^(N)(t0)/N!` of a scalar function
//! around an implicit expansion point. Arithmetic follows the usual
//! Cauchy-product and composition recurrences, truncated at `N`, so every
//! derivative up to the order is exact up to round-off.
//!
//! Binary operations require both operands to share the same order. The
//! operator overloads panic on a mismatch (like shape mismatches in array
//! libraries); the named methods return [`JetError::OrderMismatch`] instead.

use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Value plus eight derivatives: enough for sixth derivatives of a profile
/// after two more orders are spent on composition.
pub const DEFAULT_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum JetError {
    #[error("division by a jet with zero constant term")]
    DivisionByZero,
    #[error("logarithm of a jet with non-positive constant term {0}")]
    LogDomain(f64),
    #[error("real power of a jet with non-positive constant term {0}")]
    PowDomain(f64),
    #[error("jet orders differ: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },
    #[error("derivative of order {requested} requested from a jet of order {order}")]
    OrderExceeded { requested: usize, order: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorJet {
    coeffs: Vec<f64>,
}

/// Right-hand operand of [`jet_arith`].
#[derive(Debug, Clone, Copy)]
pub enum Operand<'a> {
    Jet(&'a TaylorJet),
    Scalar(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetOp {
    Add,
    Mul,
    Div,
    /// `a^b` for a scalar exponent `b`.
    Pow,
    /// Unary; the operand is ignored.
    Exp,
    /// Unary; the operand is ignored.
    Log,
}

/// Dispatches one of the elementary jet operations.
pub fn jet_arith(a: &TaylorJet, b: Operand<'_>, op: JetOp) -> Result<TaylorJet, JetError> {
    match (op, b) {
        (JetOp::Add, Operand::Jet(b)) => a.try_add(b),
        (JetOp::Add, Operand::Scalar(s)) => Ok(a.add_scalar(s)),
        (JetOp::Mul, Operand::Jet(b)) => a.try_mul(b),
        (JetOp::Mul, Operand::Scalar(s)) => Ok(a.scale(s)),
        (JetOp::Div, Operand::Jet(b)) => a.try_div(b),
        (JetOp::Div, Operand::Scalar(s)) => {
            if s == 0.0 {
                Err(JetError::DivisionByZero)
            } else {
                Ok(a.scale(1.0 / s))
            }
        }
        (JetOp::Pow, Operand::Scalar(p)) => a.powf(p),
        (JetOp::Pow, Operand::Jet(b)) => a.ln()?.try_mul(b).map(|l| l.exp()),
        (JetOp::Exp, _) => Ok(a.exp()),
        (JetOp::Log, _) => a.ln(),
    }
}

impl TaylorJet {
    /// Builds a jet from normalized coefficients; the order is `len - 1`.
    ///
    /// Panics on an empty vector.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least the value coefficient");
        Self { coeffs }
    }

    /// Builds a jet from plain derivatives `[f, f', f'', ...]`.
    pub fn from_derivatives(derivs: &[f64]) -> Self {
        let mut fact = 1.0;
        let coeffs = derivs
            .iter()
            .enumerate()
            .map(|(n, &d)| {
                if n > 0 {
                    fact *= n as f64;
                }
                d / fact
            })
            .collect();
        Self::from_coeffs(coeffs)
    }

    pub fn constant(value: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = value;
        Self { coeffs }
    }

    /// The independent variable itself, expanded at `at`.
    pub fn variable(at: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = at;
        if order > 0 {
            coeffs[1] = 1.0;
        }
        Self { coeffs }
    }

    /// `exp(t)` expanded at `at`.
    pub fn exp_variable(at: f64, order: usize) -> Self {
        Self::constant(1.0, order).shifted_exp(at)
    }

    // exp(at + h') where the jet already holds h'-coefficients of exp(h').
    fn shifted_exp(mut self, at: f64) -> Self {
        let e = at.exp();
        let mut fact = 1.0;
        for (n, c) in self.coeffs.iter_mut().enumerate() {
            if n > 0 {
                fact *= n as f64;
            }
            *c = e / fact;
        }
        self
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `n!·coeffs[n]`, i.e. the n-th derivative at the expansion point.
    pub fn derivative(&self, n: usize) -> Result<f64, JetError> {
        if n > self.order() {
            return Err(JetError::OrderExceeded {
                requested: n,
                order: self.order(),
            });
        }
        Ok(self.coeffs[n] * factorial(n))
    }

    /// All derivatives `[f, f', ..., f^(N)]`.
    pub fn derivatives(&self) -> Vec<f64> {
        (0..=self.order()).map(|n| self.coeffs[n] * factorial(n)).collect()
    }

    /// Jet of the derivative; the order drops by one (an order-0 jet maps to
    /// the zero constant).
    pub fn differentiate(&self) -> Self {
        if self.order() == 0 {
            return Self::constant(0.0, 0);
        }
        let coeffs = (1..self.coeffs.len()).map(|n| n as f64 * self.coeffs[n]).collect();
        Self { coeffs }
    }

    /// Drops coefficients above `order` (no-op when already at or below it).
    pub fn truncate(&self, order: usize) -> Self {
        let keep = (order + 1).min(self.coeffs.len());
        Self {
            coeffs: self.coeffs[..keep].to_vec(),
        }
    }

    fn check(&self, other: &Self) -> Result<(), JetError> {
        if self.order() != other.order() {
            Err(JetError::OrderMismatch {
                left: self.order(),
                right: other.order(),
            })
        } else {
            Ok(())
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, JetError> {
        self.check(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Self { coeffs })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, JetError> {
        self.check(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(Self { coeffs })
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, JetError> {
        self.check(other)?;
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.coeffs[..n - i].iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Ok(Self { coeffs: out })
    }

    pub fn try_div(&self, other: &Self) -> Result<Self, JetError> {
        self.check(other)?;
        let b0 = other.coeffs[0];
        if b0 == 0.0 {
            return Err(JetError::DivisionByZero);
        }
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        for k in 0..n {
            let mut acc = self.coeffs[k];
            for j in 1..=k {
                acc -= other.coeffs[j] * out[k - j];
            }
            out[k] = acc / b0;
        }
        Ok(Self { coeffs: out })
    }

    pub fn recip(&self) -> Result<Self, JetError> {
        Self::constant(1.0, self.order()).try_div(self)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    pub fn exp(&self) -> Self {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        out[0] = self.coeffs[0].exp();
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.coeffs[j] * out[k - j];
            }
            out[k] = acc / k as f64;
        }
        Self { coeffs: out }
    }

    pub fn ln(&self) -> Result<Self, JetError> {
        let a0 = self.coeffs[0];
        if !(a0 > 0.0) {
            return Err(JetError::LogDomain(a0));
        }
        Ok(self.ln_with_value(a0.ln()))
    }

    /// Logarithm whose constant term is supplied by the caller, for callers
    /// that can evaluate it more accurately than `ln(coeffs[0])` (e.g. via
    /// `ln_1p`). The constant coefficient must still be positive.
    pub fn ln_with_value(&self, value: f64) -> Self {
        let a0 = self.coeffs[0];
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        out[0] = value;
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..k {
                acc += j as f64 * out[j] * self.coeffs[k - j];
            }
            out[k] = (self.coeffs[k] - acc / k as f64) / a0;
        }
        Self { coeffs: out }
    }

    /// Real power. A non-positive base is only allowed for integer exponents.
    pub fn powf(&self, p: f64) -> Result<Self, JetError> {
        if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
            return self.powi(p as i32);
        }
        let a0 = self.coeffs[0];
        if !(a0 > 0.0) {
            return Err(JetError::PowDomain(a0));
        }
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        out[0] = a0.powf(p);
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (p * j as f64 - (k - j) as f64) * self.coeffs[j] * out[k - j];
            }
            out[k] = acc / (k as f64 * a0);
        }
        Ok(Self { coeffs: out })
    }

    /// Integer power by repeated squaring; negative exponents need a nonzero
    /// constant term.
    pub fn powi(&self, p: i32) -> Result<Self, JetError> {
        let base = if p < 0 { self.recip()? } else { self.clone() };
        let mut e = p.unsigned_abs();
        let mut acc = Self::constant(1.0, self.order());
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &sq;
            }
            e >>= 1;
            if e > 0 {
                sq = &sq * &sq;
            }
        }
        Ok(acc)
    }

    /// Evaluates `self ∘ inner`, where `self` is expanded around
    /// `inner.value()`. Orders must agree.
    pub fn compose(&self, inner: &Self) -> Result<Self, JetError> {
        self.check(inner)?;
        let mut delta = inner.clone();
        delta.coeffs[0] = 0.0;
        // Horner in the zero-constant increment.
        let mut acc = Self::constant(*self.coeffs.last().unwrap(), self.order());
        for c in self.coeffs.iter().rev().skip(1) {
            acc = (&acc * &delta).add_scalar(*c);
        }
        Ok(acc)
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

impl Add for &TaylorJet {
    type Output = TaylorJet;
    fn add(self, rhs: &TaylorJet) -> TaylorJet {
        self.try_add(rhs).expect("jet order mismatch")
    }
}

impl Sub for &TaylorJet {
    type Output = TaylorJet;
    fn sub(self, rhs: &TaylorJet) -> TaylorJet {
        self.try_sub(rhs).expect("jet order mismatch")
    }
}

impl Mul for &TaylorJet {
    type Output = TaylorJet;
    fn mul(self, rhs: &TaylorJet) -> TaylorJet {
        self.try_mul(rhs).expect("jet order mismatch")
    }
}

impl Add<f64> for &TaylorJet {
    type Output = TaylorJet;
    fn add(self, rhs: f64) -> TaylorJet {
        self.add_scalar(rhs)
    }
}

impl Mul<f64> for &TaylorJet {
    type Output = TaylorJet;
    fn mul(self, rhs: f64) -> TaylorJet {
        self.scale(rhs)
    }
}

impl Neg for &TaylorJet {
    type Output = TaylorJet;
    fn neg(self) -> TaylorJet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for TaylorJet {
            type Output = TaylorJet;
            fn $m(self, rhs: TaylorJet) -> TaylorJet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&TaylorJet> for TaylorJet {
            type Output = TaylorJet;
            fn $m(self, rhs: &TaylorJet) -> TaylorJet {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
