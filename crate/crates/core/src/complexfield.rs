//! Holomorphic polynomial fields `f(z) d` on C = R^2 and the identification
//! `f^x d_x + f^y d_y  <->  (f^x + i f^y) d`.
//!
//! On holomorphic fields the real Lie bracket corresponds to
//! `[f d, g d] = (f g' - g f') d`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::polyvec::{Monomial, Polynomial, PolyVectorField};
use crate::scalar::Scalar;

/// `sum_a c_a z^a d` with complex (Gaussian-rational when `S` is rational) coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexPolyField<S> {
    coeffs: BTreeMap<u32, Complex<S>>,
}

impl<S: Scalar> ComplexPolyField<S> {
    pub fn zero() -> Self {
        ComplexPolyField {
            coeffs: BTreeMap::new(),
        }
    }

    /// `c z^power d`.
    pub fn monomial(c: Complex<S>, power: u32) -> Self {
        let mut f = Self::zero();
        f.add_term(power, c);
        f
    }

    /// `z^power d`.
    pub fn real_monomial(power: u32) -> Self {
        Self::monomial(Complex::new(S::one(), S::zero()), power)
    }

    /// `i z^power d`.
    pub fn imag_monomial(power: u32) -> Self {
        Self::monomial(Complex::new(S::zero(), S::one()), power)
    }

    pub fn from_coeffs(coeffs: impl IntoIterator<Item = (u32, Complex<S>)>) -> Self {
        let mut f = Self::zero();
        for (a, c) in coeffs {
            f.add_term(a, c);
        }
        f
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, power: u32) -> Complex<S> {
        self.coeffs.get(&power).cloned().unwrap_or_else(Complex::zero)
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (u32, &Complex<S>)> {
        self.coeffs.iter().map(|(a, c)| (*a, c))
    }

    pub fn degree(&self) -> Option<u32> {
        self.coeffs.keys().next_back().copied()
    }

    fn add_term(&mut self, power: u32, c: Complex<S>) {
        if c.is_zero() {
            return;
        }
        let sum = self.coeff(power) + c;
        if sum.is_zero() {
            self.coeffs.remove(&power);
        } else {
            self.coeffs.insert(power, sum);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, c) in &other.coeffs {
            out.add_term(*a, c.clone());
        }
        out
    }

    pub fn scale(&self, c: &Complex<S>) -> Self {
        Self::from_coeffs(self.coeffs.iter().map(|(a, x)| (*a, x.clone() * c.clone())))
    }

    fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (a, x) in &self.coeffs {
            for (b, y) in &other.coeffs {
                out.add_term(a + b, x.clone() * y.clone());
            }
        }
        out
    }

    fn derivative(&self) -> Self {
        Self::from_coeffs(self.coeffs.iter().filter(|(a, _)| **a > 0).map(|(a, c)| {
            let k = S::from_u32(*a).unwrap();
            (a - 1, c.clone() * Complex::new(k, S::zero()))
        }))
    }

    /// `[f d, g d] = (f g' - g f') d`.
    pub fn complex_bracket(&self, other: &Self) -> Self {
        let lhs = self.mul(&other.derivative());
        let rhs = other.mul(&self.derivative());
        lhs.add(&rhs.scale(&Complex::new(-S::one(), S::zero())))
    }

    /// The real field `(Re f) d_x + (Im f) d_y`.
    pub fn to_real(&self) -> PolyVectorField<S> {
        let mut re = Polynomial::zero(2);
        let mut im = Polynomial::zero(2);
        for (&a, c) in &self.coeffs {
            let (zr, zi) = z_power(a);
            // (p + iq)(zr + i zi) = (p zr - q zi) + i (p zi + q zr)
            re = re.add(&zr.scale(&c.re)).sub(&zi.scale(&c.im));
            im = im.add(&zi.scale(&c.re)).add(&zr.scale(&c.im));
        }
        PolyVectorField::new(vec![re, im]).expect("two components in two variables")
    }

    /// Inverse of [`to_real`](Self::to_real); fails unless `X^x + i X^y` is a polynomial in `z`.
    pub fn from_real(field: &PolyVectorField<S>) -> Result<Self> {
        if field.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: field.dim(),
            });
        }
        // z^a contributes x^a with coefficient 1, so the pure-x coefficients determine f
        let (fx, fy) = (field.component(0), field.component(1));
        let degree = field.degree().unwrap_or(0);
        let candidate = Self::from_coeffs((0..=degree).map(|a| {
            let m = Monomial::new(vec![a, 0]);
            (a, Complex::new(fx.coeff(&m), fy.coeff(&m)))
        }));
        if &candidate.to_real() != field {
            return Err(Error::NotHolomorphic(
                "Cauchy-Riemann conditions fail on the coefficients".into(),
            ));
        }
        Ok(candidate)
    }

    pub fn map_coeffs<T: Scalar>(&self, f: impl Fn(&S) -> T) -> ComplexPolyField<T> {
        ComplexPolyField::from_coeffs(
            self.coeffs
                .iter()
                .map(|(a, c)| (*a, Complex::new(f(&c.re), f(&c.im)))),
        )
    }
}

/// Real and imaginary parts of `(x + iy)^a`.
fn z_power<S: Scalar>(a: u32) -> (Polynomial<S>, Polynomial<S>) {
    let mut re = Polynomial::constant(2, S::one());
    let mut im = Polynomial::zero(2);
    let x = Polynomial::var(2, 0);
    let y = Polynomial::var(2, 1);
    for _ in 0..a {
        let nre = re.mul(&x).sub(&im.mul(&y));
        let nim = re.mul(&y).add(&im.mul(&x));
        re = nre;
        im = nim;
    }
    (re, im)
}

impl<S: Scalar> fmt::Display for ComplexPolyField<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return f.write_str("0");
        }
        for (i, (a, c)) in self.coeffs.iter().rev().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            let coeff = match (c.re.is_zero(), c.im.is_zero()) {
                (false, true) => format!("({})", c.re),
                (true, false) if c.im.is_one() => "i".to_string(),
                (true, false) => format!("({}i)", c.im),
                _ => format!("({} + {}i)", c.re, c.im),
            };
            match a {
                0 => write!(f, "{coeff} d")?,
                1 => write!(f, "{coeff}*z d")?,
                _ => write!(f, "{coeff}*z^{a} d")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyvec::generator_pair;
    use crate::Rational;

    type Cf = ComplexPolyField<Rational>;

    fn q(n: i64) -> Rational {
        Rational::from_integer(n.into())
    }

    fn c(re: i64, im: i64) -> Complex<Rational> {
        Complex::new(q(re), q(im))
    }

    #[test]
    fn displayed_complex_brackets() {
        let d = Cf::real_monomial(0);
        assert_eq!(d.complex_bracket(&Cf::imag_monomial(3)), Cf::monomial(c(0, 3), 2));
        // (iz)(3iz^2) - (iz^3)(i) = -2z^3, not -z^3
        assert_eq!(
            Cf::imag_monomial(1).complex_bracket(&Cf::imag_monomial(3)),
            Cf::monomial(c(-2, 0), 3)
        );
        let f = Cf::from_coeffs([(2, c(1, -2)), (5, c(3, 0))]);
        assert!(f.complex_bracket(&f).is_zero());
    }

    #[test]
    fn to_real_examples() {
        let (x, y) = generator_pair::<Rational>(2).unwrap();
        assert_eq!(Cf::imag_monomial(3).to_real(), y);
        assert_eq!(Cf::real_monomial(0).to_real(), x);
        let rot = PolyVectorField::parse("(-1)*x2 d1 + x1 d2", 2).unwrap();
        assert_eq!(Cf::imag_monomial(1).to_real(), rot);
    }

    #[test]
    fn from_real_examples() {
        let euler = PolyVectorField::parse("x1 d1 + x2 d2", 2).unwrap();
        assert_eq!(Cf::from_real(&euler).unwrap(), Cf::real_monomial(1));
        let dx = PolyVectorField::<Rational>::unit(2, 0);
        assert_eq!(Cf::from_real(&dx).unwrap(), Cf::real_monomial(0));
        let conj = PolyVectorField::parse("x1 d1 + (-1)*x2 d2", 2).unwrap();
        assert!(matches!(Cf::from_real(&conj), Err(Error::NotHolomorphic(_))));
        let wrong_dim = PolyVectorField::<Rational>::unit(3, 0);
        assert!(Cf::from_real(&wrong_dim).is_err());
    }

    #[test]
    fn display() {
        assert_eq!(Cf::imag_monomial(3).to_string(), "i*z^3 d");
        assert_eq!(Cf::monomial(c(-1, 0), 3).to_string(), "(-1)*z^3 d");
    }
}
