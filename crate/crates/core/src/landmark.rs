//! Landmark configurations, the lift of vector fields to configuration
//! space, and Vandermonde utilities.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::polyvec::PolyVectorField;
use crate::scalar::Scalar;

/// Default minimum pairwise distance for floating-point configurations.
pub const DEFAULT_DISTINCT_GUARD: f64 = 1e-12;

/// An ordered tuple of `n` pairwise-distinct points in R^d.
///
/// Exactness follows the scalar type: rational configurations are checked by
/// exact comparison, floating ones against a minimum pairwise distance.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkConfig<S> {
    dim: usize,
    points: Vec<Vec<S>>,
}

impl<S: Scalar> LandmarkConfig<S> {
    pub fn new(dim: usize, points: Vec<Vec<S>>) -> Result<Self> {
        Self::with_guard(dim, points, DEFAULT_DISTINCT_GUARD)
    }

    /// Like [`new`](Self::new) with an explicit distinctness guard for floating coordinates.
    pub fn with_guard(dim: usize, points: Vec<Vec<S>>, guard: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.len(),
            });
        }
        let cfg = LandmarkConfig { dim, points };
        if let Some((a, b)) = cfg.first_collision(guard) {
            return Err(Error::RepeatedPoint(a + 1, b + 1));
        }
        Ok(cfg)
    }

    fn first_collision(&self, guard: f64) -> Option<(usize, usize)> {
        for a in 0..self.points.len() {
            for b in a + 1..self.points.len() {
                let clash = if S::EXACT {
                    self.points[a] == self.points[b]
                } else {
                    self.distance(a, b) < guard
                };
                if clash {
                    return Some((a, b));
                }
            }
        }
        None
    }

    /// Euclidean distance between landmarks `a` and `b` (0-based), in `f64`.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.points[a]
            .iter()
            .zip(&self.points[b])
            .map(|(x, y)| (x.to_f64() - y.to_f64()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let n = self.len();
        let mut best = f64::INFINITY;
        for a in 0..n {
            for b in a + 1..n {
                best = best.min(self.distance(a, b));
            }
        }
        best
    }

    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut best: f64 = 0.0;
        for a in 0..n {
            for b in a + 1..n {
                best = best.max(self.distance(a, b));
            }
        }
        best
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<S>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[S] {
        &self.points[i]
    }

    pub fn into_points(self) -> Vec<Vec<S>> {
        self.points
    }

    /// Coordinates stacked landmark-major: entry `i*d + j` is coordinate `j` of landmark `i`.
    pub fn flatten(&self) -> Vec<S> {
        self.points.iter().flatten().cloned().collect()
    }

    pub fn to_f64(&self) -> LandmarkConfig<f64> {
        LandmarkConfig {
            dim: self.dim,
            points: self
                .points
                .iter()
                .map(|p| p.iter().map(Scalar::to_f64).collect())
                .collect(),
        }
    }

    /// Applies the same permutation to the landmarks: landmark `i` of the result is `self[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        LandmarkConfig {
            dim: self.dim,
            points: perm.iter().map(|&i| self.points[i].clone()).collect(),
        }
    }
}

/// The `(n d) x m` matrix whose column `c` is the lifted field `l X_c` at a configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedEvaluation<S> {
    rows: usize,
    columns: Vec<Vec<S>>,
}

impl<S: Scalar> LiftedEvaluation<S> {
    pub fn empty(rows: usize) -> Self {
        LiftedEvaluation {
            rows,
            columns: Vec::new(),
        }
    }

    pub fn from_columns(rows: usize, columns: Vec<Vec<S>>) -> Self {
        debug_assert!(columns.iter().all(|c| c.len() == rows));
        LiftedEvaluation { rows, columns }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, c: usize) -> &[S] {
        &self.columns[c]
    }

    pub fn columns(&self) -> &[Vec<S>] {
        &self.columns
    }

    pub fn push(&mut self, column: Vec<S>) {
        assert_eq!(column.len(), self.rows);
        self.columns.push(column);
    }

    pub fn get(&self, row: usize, col: usize) -> &S {
        &self.columns[col][row]
    }

    pub fn rank(&self) -> usize {
        S::matrix_rank(&self.columns)
    }

    /// Row-major copy, for square determinants and serialization.
    pub fn to_rows(&self) -> Vec<Vec<S>> {
        (0..self.rows)
            .map(|r| self.columns.iter().map(|c| c[r].clone()).collect())
            .collect()
    }
}

/// Stacked evaluation of one field at every landmark.
pub fn lift_column<S: Scalar>(field: &PolyVectorField<S>, cfg: &LandmarkConfig<S>) -> Result<Vec<S>> {
    if field.dim() != cfg.dim() {
        return Err(Error::DimensionMismatch {
            expected: cfg.dim(),
            found: field.dim(),
        });
    }
    let mut col = Vec::with_capacity(cfg.len() * cfg.dim());
    for p in cfg.points() {
        col.extend(field.evaluate(p)?);
    }
    Ok(col)
}

/// `l X(x_1, ..., x_n) = (X(x_1), ..., X(x_n))` for each field, as matrix columns.
pub fn lift_evaluate<S: Scalar>(
    fields: &[PolyVectorField<S>],
    cfg: &LandmarkConfig<S>,
) -> Result<LiftedEvaluation<S>> {
    let columns = fields
        .iter()
        .map(|f| lift_column(f, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(LiftedEvaluation::from_columns(cfg.len() * cfg.dim(), columns))
}

/// `prod_{i<j} (x_j - x_i)`, the determinant of the Vandermonde matrix with rows `x^0..x^{n-1}`.
pub fn vandermonde_det<S: Scalar>(xs: &[S]) -> Result<S> {
    let mut det = S::one();
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let diff = xs[j].clone() - xs[i].clone();
            if diff.is_zero() {
                return Err(Error::RepeatedPoint(i + 1, j + 1));
            }
            det = det * diff;
        }
    }
    Ok(det)
}

/// Whether two configurations on the line lie in the same connected component
/// of the landmark manifold, i.e. have the same relative order.
pub fn same_order_component<S: Scalar>(a: &LandmarkConfig<S>, b: &LandmarkConfig<S>) -> Result<bool> {
    for cfg in [a, b] {
        if cfg.dim() != 1 {
            return Err(Error::RequiresLine(cfg.dim()));
        }
    }
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(argsort(a) == argsort(b))
}

fn argsort<S: Scalar>(cfg: &LandmarkConfig<S>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..cfg.len()).collect();
    idx.sort_by(|&i, &j| {
        let diff = cfg.point(i)[0].clone() - cfg.point(j)[0].clone();
        if diff.is_zero() {
            Ordering::Equal
        } else if diff.is_positive() {
            Ordering::Greater
        } else {
            Ordering::Less
        }
    });
    idx
}

/// The lifted field `sum_i X^k(x_i) d^i_k` as a polynomial field on R^{n d}.
pub fn lift_symbolic<S: Scalar>(field: &PolyVectorField<S>, n: usize) -> PolyVectorField<S> {
    let d = field.dim();
    (0..n).fold(PolyVectorField::zero(n * d), |acc, i| {
        acc.add(&field.embed(n * d, i * d)).expect("same ambient dimension")
    })
}

/// Checks `[l X, l Y] = l [X, Y]` symbolically on the `n d`-dimensional space,
/// and that both sides agree when evaluated at `cfg`.
pub fn lifted_bracket_check<S: Scalar>(
    x: &PolyVectorField<S>,
    y: &PolyVectorField<S>,
    cfg: &LandmarkConfig<S>,
) -> Result<bool> {
    for f in [x, y] {
        if f.dim() != cfg.dim() {
            return Err(Error::DimensionMismatch {
                expected: cfg.dim(),
                found: f.dim(),
            });
        }
    }
    let n = cfg.len();
    let lhs = lift_symbolic(x, n).lie_bracket(&lift_symbolic(y, n))?;
    let bracket = x.lie_bracket(y)?;
    let rhs = lift_symbolic(&bracket, n);
    if lhs != rhs {
        return Ok(false);
    }
    Ok(lhs.evaluate(&cfg.flatten())? == lift_column(&bracket, cfg)?)
}
