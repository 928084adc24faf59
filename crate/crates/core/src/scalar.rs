//! Scalar abstraction shared by the symbolic and numeric layers.
//!
//! Exact rationals drive every identity check; `f64`/`f32` drive flows,
//! steering and floating-point rank decisions.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

/// Relative singular-value cutoff used for floating-point rank decisions.
pub const FLOAT_RANK_RTOL: f64 = 1e-9;

/// Coefficient field for polynomials, configurations and evaluation matrices.
pub trait Scalar:
    Clone + PartialEq + Debug + Display + Num + Signed + FromPrimitive + Send + Sync + 'static
{
    /// Whether arithmetic is exact (rank is decided by elimination, not by tolerance).
    const EXACT: bool;

    fn to_f64(&self) -> f64;

    /// Exact conversion when the type is exact; rounding otherwise.
    fn from_f64(v: f64) -> Option<Self>;

    /// Rank of a dense matrix given as columns of equal length.
    fn matrix_rank(columns: &[Vec<Self>]) -> usize;

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num).unwrap() / Self::from_i64(den).unwrap()
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_f64(v: f64) -> Option<Self> {
        BigRational::from_float(v)
    }

    fn matrix_rank(columns: &[Vec<Self>]) -> usize {
        exact_rank(columns)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_f64(v: f64) -> Option<Self> {
        Some(v)
    }

    fn matrix_rank(columns: &[Vec<Self>]) -> usize {
        svd_rank(columns.iter().map(|c| c.as_slice()), FLOAT_RANK_RTOL)
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn to_f64(&self) -> f64 {
        *self as f64
    }

    fn from_f64(v: f64) -> Option<Self> {
        Some(v as f32)
    }

    fn matrix_rank(columns: &[Vec<Self>]) -> usize {
        let wide: Vec<Vec<f64>> = columns
            .iter()
            .map(|c| c.iter().map(|&x| x as f64).collect())
            .collect();
        svd_rank(wide.iter().map(|c| c.as_slice()), FLOAT_RANK_RTOL)
    }
}

/// Rank by Gaussian elimination; only meaningful for exact fields.
pub fn exact_rank<S: Scalar>(columns: &[Vec<S>]) -> usize {
    let mut echelon = Echelon::new();
    columns.iter().filter(|c| echelon.insert(c)).count()
}

/// Numerical rank: singular values above `rtol * sigma_max`.
pub fn svd_rank<'a>(columns: impl Iterator<Item = &'a [f64]>, rtol: f64) -> usize {
    let cols: Vec<&[f64]> = columns.collect();
    if cols.is_empty() || cols[0].is_empty() {
        return 0;
    }
    let rows = cols[0].len();
    let m = nalgebra::DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]);
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 || !max.is_finite() {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * max).count()
}

/// Incrementally maintained row-echelon basis over an exact field.
#[derive(Clone, Debug, Default)]
pub struct Echelon<S> {
    rows: Vec<(usize, Vec<S>)>,
}

impl<S: Scalar> Echelon<S> {
    pub fn new() -> Self {
        Self { rows: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the basis; returns the residual.
    pub fn reduce(&self, v: &[S]) -> Vec<S> {
        let mut r = v.to_vec();
        for (pivot, row) in &self.rows {
            if r[*pivot].is_zero() {
                continue;
            }
            let f = r[*pivot].clone();
            for (x, y) in r.iter_mut().zip(row) {
                if !y.is_zero() {
                    *x = x.clone() - f.clone() * y.clone();
                }
            }
        }
        r
    }

    /// Adds `v` if it is independent of the basis; returns whether it was added.
    pub fn insert(&mut self, v: &[S]) -> bool {
        let mut r = self.reduce(v);
        let Some(pivot) = r.iter().position(|x| !x.is_zero()) else {
            return false;
        };
        let inv = S::one() / r[pivot].clone();
        for x in r.iter_mut() {
            *x = x.clone() * inv.clone();
        }
        // keep earlier rows reduced at the new pivot so `reduce` stays single-pass
        for (_, row) in self.rows.iter_mut() {
            if !row[pivot].is_zero() {
                let f = row[pivot].clone();
                for (x, y) in row.iter_mut().zip(&r) {
                    *x = x.clone() - f.clone() * y.clone();
                }
            }
        }
        self.rows.push((pivot, r));
        true
    }

    /// Whether `v` lies in the span of the basis.
    pub fn contains(&self, v: &[S]) -> bool {
        self.reduce(v).iter().all(|x| x.is_zero())
    }
}

/// Determinant of a square matrix (rows), by exact elimination.
pub fn determinant<S: Scalar>(rows: &[Vec<S>]) -> S {
    let n = rows.len();
    let mut a: Vec<Vec<S>> = rows.to_vec();
    let mut det = S::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return S::zero();
        };
        if p != col {
            a.swap(p, col);
            det = -det;
        }
        let pivot = a[col][col].clone();
        det = det * pivot.clone();
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone() / pivot.clone();
            for c in col..n {
                let v = a[col][c].clone();
                a[r][c] = a[r][c].clone() - f.clone() * v;
            }
        }
    }
    det
}

/// Canonical text for a rational: `p` or `p/q` in lowest terms.
pub fn rational_to_string(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parses `p`, `p/q` or a decimal literal (exactly) into a rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Ok(n) = s.parse::<BigInt>() {
        return Some(BigRational::from_integer(n));
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let neg = int_part.starts_with('-');
    let digits = format!("{}{}", int_part.trim_start_matches(['-', '+']), frac_part);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut n: BigInt = digits.parse().ok()?;
    if neg {
        n = -n;
    }
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        BigRational::from_integer(n * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(n, num_traits::pow(ten, (-scale) as usize))
    })
}
