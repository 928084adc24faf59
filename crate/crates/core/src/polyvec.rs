//! Polynomial vector fields on R^d with exact (or floating) coefficients,
//! and their Lie brackets.
//!
//! Coordinates are 1-based in text (`x1`, `d1`) and 0-based in the API.
//! Monomials are ordered graded-lexicographically; the canonical text form
//! lists components in ascending order and monomials in descending order
//! within each component, e.g. `x1^3 d1 + (-3)*x1^2*x2 d1 + x2 d2`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::scalar::{parse_rational, Scalar};

/// Exponent vector of a monomial in `d` variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(dim: usize) -> Self {
        Monomial(vec![0; dim])
    }

    /// `x_var^power`.
    pub fn var_pow(dim: usize, var: usize, power: u32) -> Self {
        let mut e = vec![0; dim];
        e[var] = power;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                f.write_str("*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, e)?;
            }
        }
        if first {
            f.write_str("1")?;
        }
        Ok(())
    }
}

/// Sparse polynomial in `dim` variables; zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial<S> {
    dim: usize,
    terms: BTreeMap<Monomial, S>,
}

impl<S: Scalar> Polynomial<S> {
    pub fn zero(dim: usize) -> Self {
        Polynomial {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: S) -> Self {
        Self::monomial(c, Monomial::one(dim))
    }

    pub fn monomial(c: S, m: Monomial) -> Self {
        let mut p = Self::zero(m.dim());
        p.add_term(m, c);
        p
    }

    /// The coordinate function `x_var`.
    pub fn var(dim: usize, var: usize) -> Self {
        Self::monomial(S::one(), Monomial::var_pow(dim, var, 1))
    }

    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (Monomial, S)>) -> Result<Self> {
        let mut p = Self::zero(dim);
        for (m, c) in terms {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.dim(),
                });
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &S)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Monomial) -> S {
        self.terms.get(m).cloned().unwrap_or_else(S::zero)
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().next_back().map(Monomial::degree)
    }

    fn add_term(&mut self, m: Monomial, c: S) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                let sum = existing.clone() + c;
                if sum.is_zero() {
                    self.terms.remove(&m);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn scale(&self, c: &S) -> Self {
        if c.is_zero() {
            return Self::zero(self.dim);
        }
        Polynomial {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(m, a)| (m.clone(), a.clone() * c.clone()))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.dim);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca.clone() * cb.clone());
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Self::constant(self.dim, S::one());
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Partial derivative with respect to `x_var`.
    pub fn derivative(&self, var: usize) -> Self {
        let mut out = Self::zero(self.dim);
        for (m, c) in &self.terms {
            let e = m.0[var];
            if e == 0 {
                continue;
            }
            let mut dm = m.clone();
            dm.0[var] -= 1;
            out.add_term(dm, c.clone() * S::from_u32(e).unwrap());
        }
        out
    }

    pub fn evaluate(&self, point: &[S]) -> Result<S> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: point.len(),
            });
        }
        let mut acc = S::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (x, &e) in point.iter().zip(&m.0) {
                for _ in 0..e {
                    t = t * x.clone();
                }
            }
            acc = acc + t;
        }
        Ok(acc)
    }

    /// Re-expresses the polynomial in `new_dim` variables, mapping `x_j` to `x_{offset+j}`.
    pub fn embed(&self, new_dim: usize, offset: usize) -> Self {
        assert!(offset + self.dim <= new_dim);
        let terms = self.terms.iter().map(|(m, c)| {
            let mut e = vec![0; new_dim];
            e[offset..offset + self.dim].copy_from_slice(&m.0);
            (Monomial(e), c.clone())
        });
        Polynomial {
            dim: new_dim,
            terms: terms.collect(),
        }
    }

    pub fn map_coeffs<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Polynomial<T> {
        let mut out = Polynomial::zero(self.dim);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }
}

/// `sum_k P_k d_k` with one polynomial component per coordinate direction.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyVectorField<S> {
    components: Vec<Polynomial<S>>,
}

impl<S: Scalar> PolyVectorField<S> {
    pub fn zero(dim: usize) -> Self {
        PolyVectorField {
            components: vec![Polynomial::zero(dim); dim],
        }
    }

    pub fn new(components: Vec<Polynomial<S>>) -> Result<Self> {
        let dim = components.len();
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if let Some(p) = components.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        Ok(PolyVectorField { components })
    }

    /// The constant unit field `d_k`.
    pub fn unit(dim: usize, k: usize) -> Self {
        Self::monomial_field(dim, S::one(), Monomial::one(dim), k)
    }

    /// `c * m * d_k`.
    pub fn monomial_field(dim: usize, c: S, m: Monomial, k: usize) -> Self {
        let mut out = Self::zero(dim);
        out.components[k] = Polynomial::monomial(c, m);
        out
    }

    /// `p * d_k`.
    pub fn along(p: Polynomial<S>, k: usize) -> Self {
        let mut out = Self::zero(p.dim());
        out.components[k] = p;
        out
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Polynomial<S>] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &Polynomial<S> {
        &self.components[k]
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Polynomial::is_zero)
    }

    /// Largest component degree; `None` for the zero field.
    pub fn degree(&self) -> Option<u32> {
        self.components.iter().filter_map(Polynomial::degree).max()
    }

    pub fn num_terms(&self) -> usize {
        self.components.iter().map(Polynomial::num_terms).sum()
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(PolyVectorField {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(PolyVectorField {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.sub(b))
                .collect(),
        })
    }

    pub fn scale(&self, c: &S) -> Self {
        PolyVectorField {
            components: self.components.iter().map(|p| p.scale(c)).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(&-S::one())
    }

    /// Directional derivative `X(f) = sum_j X^j d_j f`.
    pub fn apply(&self, f: &Polynomial<S>) -> Polynomial<S> {
        let mut out = Polynomial::zero(self.dim());
        for (j, xj) in self.components.iter().enumerate() {
            if xj.is_zero() {
                continue;
            }
            let df = f.derivative(j);
            if !df.is_zero() {
                out = out.add(&xj.mul(&df));
            }
        }
        out
    }

    /// `[X, Y]` with components `X(Y^k) - Y(X^k)`.
    pub fn lie_bracket(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let components = (0..self.dim())
            .map(|k| self.apply(&other.components[k]).sub(&other.apply(&self.components[k])))
            .collect();
        Ok(PolyVectorField { components })
    }

    pub fn evaluate(&self, point: &[S]) -> Result<Vec<S>> {
        self.components.iter().map(|p| p.evaluate(point)).collect()
    }

    /// Exact linear combination `sum_i coeffs[i] * fields[i]`.
    pub fn scalar_combine(coeffs: &[S], fields: &[Self]) -> Result<Self> {
        if coeffs.len() != fields.len() {
            return Err(Error::LengthMismatch {
                expected: coeffs.len(),
                found: fields.len(),
            });
        }
        let Some(first) = fields.first() else {
            return Err(Error::Empty("scalar_combine needs at least one field"));
        };
        let mut out = Self::zero(first.dim());
        for (c, f) in coeffs.iter().zip(fields) {
            out = out.add(&f.scale(c))?;
        }
        Ok(out)
    }

    /// Replicates the field on `new_dim` variables, acting on the block starting at `offset`.
    pub fn embed(&self, new_dim: usize, offset: usize) -> Self {
        let mut out = Self::zero(new_dim);
        for (k, p) in self.components.iter().enumerate() {
            out.components[offset + k] = p.embed(new_dim, offset);
        }
        out
    }

    pub fn map_coeffs<T: Scalar>(&self, f: impl Fn(&S) -> T) -> PolyVectorField<T> {
        PolyVectorField {
            components: self.components.iter().map(|p| p.map_coeffs(&f)).collect(),
        }
    }

    pub fn to_f64(&self) -> PolyVectorField<f64> {
        self.map_coeffs(|c| c.to_f64())
    }
}

/// Index `j + shift` modulo `d`, on 0-based indices.
pub fn cyclic(j: usize, shift: isize, d: usize) -> usize {
    (j as isize + shift).rem_euclid(d as isize) as usize
}

/// The generator pair `(X, Y)`: `X = d_1`, and `Y` the cubic field for dimension `d`.
///
/// * `d = 1`: `x^3 d`
/// * `d = 2`: `-y(3x^2 - y^2) d_x + x(x^2 - 3y^2) d_y`
/// * `d >= 3`: `|x|^2 sum_k x^k d_{k+1}`, indices modulo `d`
pub fn generator_pair<S: Scalar>(d: usize) -> Result<(PolyVectorField<S>, PolyVectorField<S>)> {
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    let x = PolyVectorField::unit(d, 0);
    let int = |v: i64| S::from_i64(v).unwrap();
    let y = match d {
        1 => PolyVectorField::monomial_field(1, S::one(), Monomial::new(vec![3]), 0),
        2 => {
            let mono = |a, b| Monomial::new(vec![a, b]);
            let yx = Polynomial::from_terms(2, [(mono(2, 1), int(-3)), (mono(0, 3), int(1))])?;
            let yy = Polynomial::from_terms(2, [(mono(3, 0), int(1)), (mono(1, 2), int(-3))])?;
            PolyVectorField::new(vec![yx, yy])?
        }
        _ => {
            let norm2 = (0..d).fold(Polynomial::zero(d), |acc, j| {
                acc.add(&Polynomial::var(d, j).pow(2))
            });
            let mut comps = vec![Polynomial::zero(d); d];
            for k in 0..d {
                comps[cyclic(k, 1, d)] = norm2.mul(&Polynomial::var(d, k));
            }
            PolyVectorField::new(comps)?
        }
    };
    Ok((x, y))
}

fn fmt_coeff<S: Scalar>(c: &S) -> Option<String> {
    if c.is_one() {
        return None;
    }
    let s = c.to_string();
    if s.contains('/') || s.starts_with('-') || s.contains('e') {
        Some(format!("({s})"))
    } else {
        Some(s)
    }
}

impl<S: Scalar> fmt::Display for PolyVectorField<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, p) in self.components.iter().enumerate() {
            for (m, c) in p.terms().rev() {
                if !first {
                    f.write_str(" + ")?;
                }
                first = false;
                match (fmt_coeff(c), m.degree()) {
                    (None, 0) => write!(f, "d{}", k + 1)?,
                    (Some(c), 0) => write!(f, "{c} d{}", k + 1)?,
                    (None, _) => write!(f, "{m} d{}", k + 1)?,
                    (Some(c), _) => write!(f, "{c}*{m} d{}", k + 1)?,
                }
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

impl PolyVectorField<BigRational> {
    /// Parses the canonical text form in dimension `dim`. Terms may appear in any order.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let text = text.trim();
        let mut field = Self::zero(dim);
        if text == "0" {
            return Ok(field);
        }
        for term in split_terms(text) {
            let bad = || Error::Parse(format!("bad term `{term}`"));
            let (body, dir) = term.rsplit_once(' ').unwrap_or(("1", term));
            let k: usize = dir.strip_prefix('d').and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            if k == 0 || k > dim {
                return Err(bad());
            }
            let mut coeff = BigRational::from_integer(1.into());
            let mut exps = vec![0u32; dim];
            for factor in body.trim().split('*') {
                let factor = factor.trim();
                if factor == "1" {
                    continue;
                }
                if let Some(var) = factor.strip_prefix('x') {
                    let (idx, pow) = var.split_once('^').unwrap_or((var, "1"));
                    let idx: usize = idx.parse().map_err(|_| bad())?;
                    let pow: u32 = pow.parse().map_err(|_| bad())?;
                    if idx == 0 || idx > dim {
                        return Err(bad());
                    }
                    exps[idx - 1] += pow;
                } else {
                    let inner = factor.trim_start_matches('(').trim_end_matches(')');
                    coeff *= parse_rational(inner).ok_or_else(bad)?;
                }
            }
            let piece = Self::monomial_field(dim, coeff, Monomial::new(exps), k - 1);
            field = field.add(&piece)?;
        }
        Ok(field)
    }
}

fn split_terms(text: &str) -> Vec<&str> {
    // split on " + " outside parentheses
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b'+' if depth == 0 && i > 0 && bytes[i - 1] == b' ' => {
                out.push(text[start..i - 1].trim());
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    out.push(text[start..].trim());
    out
}

impl FromStr for Monomial {
    type Err = Error;

    /// Parses `x1^2*x3` style monomials; the dimension is the largest index seen.
    fn from_str(s: &str) -> Result<Self> {
        let mut exps: Vec<u32> = Vec::new();
        for factor in s.split('*') {
            let var = factor
                .trim()
                .strip_prefix('x')
                .ok_or_else(|| Error::Parse(format!("bad monomial `{s}`")))?;
            let (idx, pow) = var.split_once('^').unwrap_or((var, "1"));
            let idx: usize = idx.parse().map_err(|_| Error::Parse(s.into()))?;
            let pow: u32 = pow.parse().map_err(|_| Error::Parse(s.into()))?;
            if idx == 0 {
                return Err(Error::Parse(s.into()));
            }
            if exps.len() < idx {
                exps.resize(idx, 0);
            }
            exps[idx - 1] += pow;
        }
        Ok(Monomial(exps))
    }
}
