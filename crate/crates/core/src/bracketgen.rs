//! Certificates of the bracket-generating condition.
//!
//! Three tools live here:
//!
//! * [`closure_search`] explores iterated brackets of the generator pair
//!   breadth-first and records which of them span the tangent space of the
//!   landmark manifold at a given configuration;
//! * the `monomial_ladder_*` builders reproduce, as replayable expression
//!   trees, the constructive chains that reach every monomial field
//!   `(x^j)^a d_k` from the two generators;
//! * [`separation_field`] gives the polynomial field that moves exactly one
//!   landmark, which turns "all polynomial fields are generated" into
//!   "the lifted fields span the tangent space".

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::landmark::{lift_column, LandmarkConfig, LiftedEvaluation};
use crate::polyvec::{cyclic, generator_pair, Monomial, Polynomial, PolyVectorField};
use crate::scalar::{Echelon, Scalar};

/// The generator pair for a dimension, shared by every expression built on it.
#[derive(Clone, Debug)]
pub struct Generators<S> {
    pub dim: usize,
    pub x: PolyVectorField<S>,
    pub y: PolyVectorField<S>,
}

impl<S: Scalar> Generators<S> {
    pub fn new(dim: usize) -> Result<Self> {
        let (x, y) = generator_pair(dim)?;
        Ok(Generators { dim, x, y })
    }
}

#[derive(Clone, Debug)]
pub enum Node<S> {
    GenX,
    GenY,
    Bracket(Arc<BracketExpr<S>>, Arc<BracketExpr<S>>),
    Combine(Vec<S>, Vec<Arc<BracketExpr<S>>>),
}

/// An iterated bracket / linear combination over the generator symbols,
/// with its value cached at construction.
#[derive(Clone, Debug)]
pub struct BracketExpr<S> {
    node: Node<S>,
    value: PolyVectorField<S>,
    depth: usize,
}

pub type Expr<S> = Arc<BracketExpr<S>>;

impl<S: Scalar> BracketExpr<S> {
    pub fn gen_x(gens: &Generators<S>) -> Expr<S> {
        Arc::new(BracketExpr {
            node: Node::GenX,
            value: gens.x.clone(),
            depth: 0,
        })
    }

    pub fn gen_y(gens: &Generators<S>) -> Expr<S> {
        Arc::new(BracketExpr {
            node: Node::GenY,
            value: gens.y.clone(),
            depth: 0,
        })
    }

    pub fn bracket(a: &Expr<S>, b: &Expr<S>) -> Expr<S> {
        let value = a.value.lie_bracket(&b.value).expect("expressions share a dimension");
        Arc::new(BracketExpr {
            node: Node::Bracket(a.clone(), b.clone()),
            value,
            depth: 1 + a.depth.max(b.depth),
        })
    }

    pub fn combine(coeffs: Vec<S>, children: Vec<Expr<S>>) -> Expr<S> {
        let fields: Vec<_> = children.iter().map(|c| c.value.clone()).collect();
        let value = PolyVectorField::scalar_combine(&coeffs, &fields).expect("matching lengths");
        let depth = children.iter().map(|c| c.depth).max().unwrap_or(0);
        Arc::new(BracketExpr {
            node: Node::Combine(coeffs, children),
            value,
            depth,
        })
    }

    pub fn node(&self) -> &Node<S> {
        &self.node
    }

    pub fn value(&self) -> &PolyVectorField<S> {
        &self.value
    }

    /// Bracket nesting level; combinations do not add depth.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Recomputes the value from the generators, ignoring every cached value.
    pub fn replay(&self, gens: &Generators<S>) -> PolyVectorField<S> {
        let mut memo = HashMap::new();
        self.replay_memo(gens, &mut memo)
    }

    fn replay_memo(
        &self,
        gens: &Generators<S>,
        memo: &mut HashMap<*const BracketExpr<S>, PolyVectorField<S>>,
    ) -> PolyVectorField<S> {
        let key = self as *const _;
        if let Some(v) = memo.get(&key) {
            return v.clone();
        }
        let v = match &self.node {
            Node::GenX => gens.x.clone(),
            Node::GenY => gens.y.clone(),
            Node::Bracket(a, b) => a
                .replay_memo(gens, memo)
                .lie_bracket(&b.replay_memo(gens, memo))
                .expect("same dimension"),
            Node::Combine(coeffs, children) => {
                let fields: Vec<_> = children.iter().map(|c| c.replay_memo(gens, memo)).collect();
                PolyVectorField::scalar_combine(coeffs, &fields).expect("matching lengths")
            }
        };
        memo.insert(key, v.clone());
        v
    }

    /// Number of distinct nodes (shared subtrees counted once).
    pub fn distinct_nodes(&self) -> usize {
        fn walk<S>(e: &BracketExpr<S>, seen: &mut std::collections::HashSet<*const BracketExpr<S>>) {
            if !seen.insert(e as *const _) {
                return;
            }
            match &e.node {
                Node::Bracket(a, b) => {
                    walk(a, seen);
                    walk(b, seen);
                }
                Node::Combine(_, cs) => cs.iter().for_each(|c| walk(c, seen)),
                _ => {}
            }
        }
        let mut seen = std::collections::HashSet::new();
        walk(self, &mut seen);
        seen.len()
    }
}

/// Prefix notation: `X`, `Y`, `(bracket A B)`, `(combine c1 A1 c2 A2 ...)`.
impl<S: Scalar> fmt::Display for BracketExpr<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::GenX => f.write_str("X"),
            Node::GenY => f.write_str("Y"),
            Node::Bracket(a, b) => write!(f, "(bracket {a} {b})"),
            Node::Combine(coeffs, children) => {
                f.write_str("(combine")?;
                for (c, e) in coeffs.iter().zip(children) {
                    write!(f, " {c} {e}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A ladder result: an expression whose value is `constant` times the target monomial field.
#[derive(Clone, Debug)]
pub struct Ladder<S> {
    pub expr: Expr<S>,
    pub constant: S,
}

impl<S: Scalar> Ladder<S> {
    fn normalized(&self) -> Expr<S> {
        if self.constant.is_one() {
            self.expr.clone()
        } else {
            BracketExpr::combine(vec![S::one() / self.constant.clone()], vec![self.expr.clone()])
        }
    }
}

fn ratio<S: Scalar>(n: i64, d: i64) -> S {
    S::from_ratio(n, d)
}

/// `x^a d` on the line from `d` and `x^3 d`.
///
/// Uses `[X0, X3] = 3 X2`, `[X0, X2] = 2 X1` and `[X2, Xa] = (a - 2) X_{a+1}`.
pub fn monomial_ladder_d1<S: Scalar>(alpha: u32) -> Ladder<S> {
    let gens = Generators::new(1).expect("d = 1");
    let x = BracketExpr::gen_x(&gens);
    let y = BracketExpr::gen_y(&gens);
    let x2 = BracketExpr::bracket(&x, &y); // 3 X2
    match alpha {
        0 => Ladder { expr: x, constant: S::one() },
        1 => Ladder {
            expr: BracketExpr::bracket(&x, &x2),
            constant: ratio(6, 1),
        },
        2 => Ladder { expr: x2, constant: ratio(3, 1) },
        3 => Ladder { expr: y, constant: S::one() },
        _ => monomial_ladder_d1_from(&x2, y, alpha),
    }
}

fn monomial_ladder_d1_from<S: Scalar>(x2: &Expr<S>, y: Expr<S>, alpha: u32) -> Ladder<S> {
    let mut cur = Ladder { expr: y, constant: S::one() };
    for a in 3..alpha {
        // [3 X2, c Xa] = 3 c (a - 2) X_{a+1}
        cur = Ladder {
            expr: BracketExpr::bracket(x2, &cur.expr),
            constant: cur.constant * ratio(3 * (a as i64 - 2), 1),
        };
    }
    cur
}

/// `z^a d` (parity 0) or `i z^a d` (parity 1) in the plane, realized as real fields.
///
/// The constant is real: the value is `to_real(c z^a d)` or `to_real(c i z^a d)`.
pub fn monomial_ladder_d2<S: Scalar>(parity: u8, alpha: u32) -> Result<Ladder<S>> {
    if parity > 1 {
        return Err(Error::Invalid(format!("parity must be 0 or 1, got {parity}")));
    }
    let gens = Generators::new(2)?;
    let x = BracketExpr::gen_x(&gens);
    let y = BracketExpr::gen_y(&gens); // i z^3
    let i2 = BracketExpr::bracket(&x, &y); // 3 i z^2
    let i1 = BracketExpr::bracket(&x, &i2); // 6 i z
    let i0 = BracketExpr::bracket(&x, &i1); // 6 i
    let r2 = BracketExpr::bracket(&i0, &y); // 6 [i d, i z^3 d] = -18 z^2
    let r3 = BracketExpr::bracket(&i1, &y); // 6 [i z d, i z^3 d] = -12 z^3
    let c = |v: i64| ratio::<S>(v, 1);
    let base = |p: u8, a: u32| -> Ladder<S> {
        match (p, a) {
            (0, 0) => Ladder { expr: x.clone(), constant: S::one() },
            (0, 1) => Ladder {
                expr: BracketExpr::bracket(&x, &r2),
                constant: c(-36),
            },
            (0, 2) => Ladder { expr: r2.clone(), constant: c(-18) },
            (0, _) => Ladder { expr: r3.clone(), constant: c(-12) },
            (_, 0) => Ladder { expr: i0.clone(), constant: c(6) },
            (_, 1) => Ladder { expr: i1.clone(), constant: c(6) },
            (_, 2) => Ladder { expr: i2.clone(), constant: c(3) },
            (_, _) => Ladder { expr: y.clone(), constant: S::one() },
        }
    };
    let mut cur = base(parity, alpha.min(3));
    for a in 3..alpha {
        // [-18 z^2 d, c w z^a d] = -18 c (a - 2) w z^{a+1} d
        cur = Ladder {
            expr: BracketExpr::bracket(&r2, &cur.expr),
            constant: cur.constant * c(-18 * (a as i64 - 2)),
        };
    }
    Ok(cur)
}

/// Builds `(x^j)^a d_k` for `d >= 3` from `d_1` and `|x|^2 sum_k x^k d_{k+1}`.
///
/// Intermediate monomial fields are normalized to coefficient one and shared,
/// so one builder can produce many ladders cheaply. Indices are 0-based.
pub struct LadderBuilder<S> {
    gens: Generators<S>,
    memo: HashMap<Key, Expr<S>>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Key {
    Unit(usize),
    R(usize),
    A(usize),
    Lin(usize, usize),
    Quad(usize, usize),
    Mixed(usize, usize, usize),
    Pow(usize, u32, usize),
}

impl<S: Scalar> LadderBuilder<S> {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(LadderBuilder {
            gens: Generators::new(dim)?,
            memo: HashMap::new(),
        })
    }

    pub fn generators(&self) -> &Generators<S> {
        &self.gens
    }

    fn d(&self) -> usize {
        self.gens.dim
    }

    fn m(&self, j: usize, shift: isize) -> usize {
        cyclic(j, shift, self.d())
    }

    fn cached(&mut self, key: Key, build: impl FnOnce(&mut Self) -> Expr<S>) -> Expr<S> {
        if let Some(e) = self.memo.get(&key) {
            return e.clone();
        }
        let e = build(self);
        self.memo.insert(key, e.clone());
        e
    }

    fn x(&self) -> Expr<S> {
        BracketExpr::gen_x(&self.gens)
    }

    fn y(&self) -> Expr<S> {
        BracketExpr::gen_y(&self.gens)
    }

    fn lin_comb(terms: Vec<(S, Expr<S>)>) -> Expr<S> {
        let (c, e) = terms.into_iter().unzip();
        BracketExpr::combine(c, e)
    }

    /// `d_k`, via `[d_j, [d_j, [d_j, Y]]] = 6 d_{j+1}` starting from `d_1`.
    pub fn unit(&mut self, k: usize) -> Expr<S> {
        self.cached(Key::Unit(k), |b| {
            if k == 0 {
                return b.x();
            }
            let j = k - 1;
            let a = b.a(j);
            let p = b.unit(j);
            let triple = BracketExpr::bracket(&p, &a);
            BracketExpr::combine(vec![ratio(1, 6)], vec![triple])
        })
    }

    /// `[d_j, Y] = 2 x^j sum_k x^k d_{k+1} + |x|^2 d_{j+1}`.
    fn r(&mut self, j: usize) -> Expr<S> {
        self.cached(Key::R(j), |b| {
            let p = b.unit(j);
            let y = b.y();
            BracketExpr::bracket(&p, &y)
        })
    }

    /// `[d_j, [d_j, Y]] = 2 sum_k x^k d_{k+1} + 4 x^j d_{j+1}`.
    fn a(&mut self, j: usize) -> Expr<S> {
        self.cached(Key::A(j), |b| {
            // d_j for j > 0 is itself built from A(j-1); d_0 = X avoids the cycle
            let p = if j == 0 { b.x() } else { b.unit(j) };
            let r = if j == 0 {
                let y = b.y();
                BracketExpr::bracket(&p, &y)
            } else {
                b.r(j)
            };
            BracketExpr::bracket(&p, &r)
        })
    }

    /// `[d_a, [d_b, Y]] = 2 (x^b d_{a+1} + x^a d_{b+1})` for `a != b`.
    fn c(&mut self, a: usize, bidx: usize) -> Expr<S> {
        let p = self.unit(a);
        let r = self.r(bidx);
        BracketExpr::bracket(&p, &r)
    }

    /// `x^a d_b` for any `a, b`.
    pub fn lin(&mut self, a: usize, bidx: usize) -> Expr<S> {
        self.cached(Key::Lin(a, bidx), |b| {
            let d = b.d();
            let next = b.m(a, 1);
            if bidx == next {
                // F = 1/4 (A(a) - A(a+1)) = x^a d_{a+1} - x^{a+1} d_{a+2}
                // G = 1/2 [d_a, [d_{a+1}, Y]] = x^{a+1} d_{a+1} + x^a d_{a+2}
                // F - [G, F] = 2 x^a d_{a+1}
                let (aa, an) = (b.a(a), b.a(next));
                let f = Self::lin_comb(vec![(ratio(1, 4), aa), (ratio(-1, 4), an)]);
                let g = BracketExpr::combine(vec![ratio(1, 2)], vec![b.c(a, next)]);
                let gf = BracketExpr::bracket(&g, &f);
                Self::lin_comb(vec![(ratio(1, 2), f), (ratio(-1, 2), gf)])
            } else if bidx == a {
                // [d_{a-1}, [d_a, Y]] = 2 (x^{a-1} d_{a+1} + x^a d_a)
                let prev = b.m(a, -1);
                let c = b.c(prev, a);
                let l = b.lin(prev, next);
                Self::lin_comb(vec![(ratio(1, 2), c), (ratio(-1, 1), l)])
            } else {
                // [x^a d_m, x^m d_{m+1}] = x^a d_{m+1} while m + 1 != a
                let m = (bidx + d - 1) % d;
                let head = b.lin(a, m);
                let step = b.lin(m, bidx);
                BracketExpr::bracket(&head, &step)
            }
        })
    }

    /// `(x^a)^2 d_b`.
    pub fn quad(&mut self, a: usize, bidx: usize) -> Expr<S> {
        self.cached(Key::Quad(a, bidx), |b| {
            let next = b.m(a, 1);
            if bidx == next {
                // Q = [x^a d_a, [d_a, Y]]; [x^a d_a, Q] - Q = 6 (x^a)^2 d_{a+1}
                let e = b.lin(a, a);
                let r = b.r(a);
                let q = BracketExpr::bracket(&e, &r);
                let eq = BracketExpr::bracket(&e, &q);
                Self::lin_comb(vec![(ratio(1, 6), eq), (ratio(-1, 6), q)])
            } else if bidx != a {
                // [x^a d_k, [x^a d_k, (x^k)^2 d_{k+1}]] = 2 (x^a)^2 d_{k+1}, k + 1 = b
                let k = b.m(bidx, -1);
                let l = b.lin(a, k);
                let base = b.quad(k, bidx);
                let inner = BracketExpr::bracket(&l, &base);
                let outer = BracketExpr::bracket(&l, &inner);
                BracketExpr::combine(vec![ratio(1, 2)], vec![outer])
            } else {
                b.quad_diagonal(a)
            }
        })
    }

    /// `x^a x^l d_m` for `a != l`, `m` not in `{a, l}`: `1/2 [x^a d_l, (x^l)^2 d_m]`.
    fn mixed(&mut self, a: usize, l: usize, m: usize) -> Expr<S> {
        debug_assert!(a != l && m != a && m != l);
        self.cached(Key::Mixed(a, l, m), |b| {
            let lin = b.lin(a, l);
            let q = b.quad(l, m);
            BracketExpr::combine(vec![ratio(1, 2)], vec![BracketExpr::bracket(&lin, &q)])
        })
    }

    /// `(x^j)^2 d_j`. Brackets of linear fields with divergence-free quadratic
    /// fields stay divergence-free, so this needs one more contact with `Y`:
    /// `Phi = [x^j d_{j+2}, [d_{j+1}, Y]]` has divergence `2 x^j`.
    fn quad_diagonal(&mut self, j: usize) -> Expr<S> {
        let d = self.d();
        let (j1, j2, j3, jm) = (self.m(j, 1), self.m(j, 2), self.m(j, 3), self.m(j, -1));
        let lin = self.lin(j, j2);
        let r = self.r(j1);
        // Phi = 2 x^j x^{j+1} d_{j+3} - 2 x^{j+1} x^{j-1} d_{j+2} + 2 x^j x^{j+2} d_{j+2}
        let phi = BracketExpr::bracket(&lin, &r);
        // u = x^j x^{j+2} d_{j+2}
        let u = if d >= 4 {
            let m1 = self.mixed(j, j1, j3);
            let m2 = self.mixed(j1, jm, j2);
            Self::lin_comb(vec![(ratio(1, 2), phi), (ratio(-1, 1), m1), (ratio(1, 1), m2)])
        } else {
            // d = 3: the first two terms of Phi are 2 (x^{j+1} x^j d_j - x^{j+1} x^{j+2} d_{j+2})
            let e = self.lin(j, j2);
            let m = self.mixed(j1, j2, j);
            let diff = BracketExpr::bracket(&e, &m);
            Self::lin_comb(vec![(ratio(1, 2), phi), (ratio(-1, 1), diff)])
        };
        // [x^{j+2} d_j, (x^j)^2 d_{j+2}] = 2 u - (x^j)^2 d_j
        let e = self.lin(j2, j);
        let q = self.quad(j, j2);
        let rel = BracketExpr::bracket(&e, &q);
        Self::lin_comb(vec![(ratio(2, 1), u), (ratio(-1, 1), rel)])
    }

    /// `(x^k)^3 d_j`.
    fn cubic(&mut self, k: usize, j: usize) -> Ladder<S> {
        if k != j {
            // [x^k d_l, [(x^k)^2 d_l, (x^l)^2 d_j]] = 2 (x^k)^3 d_j, l not in {j, k}
            let l = (0..self.d()).find(|&l| l != j && l != k).expect("d >= 3");
            let a = self.quad(k, l);
            let b = self.quad(l, j);
            let inner = BracketExpr::bracket(&a, &b);
            let lin = self.lin(k, l);
            Ladder {
                expr: BracketExpr::bracket(&lin, &inner),
                constant: ratio(2, 1),
            }
        } else {
            // with i = k - 1:
            // [x^k d_i, [x^k d_i, [x^k d_i, Y]]] = 6 (x^k)^3 d_k - 18 (x^k)^2 x^i d_i, and
            // [(x^k)^2 d_i, (x^i)^2 d_i] = 2 (x^k)^2 x^i d_i cancels the second term
            let i = self.m(k, -1);
            let e = self.lin(k, i);
            let y = self.y();
            let t1 = BracketExpr::bracket(&e, &y);
            let t2 = BracketExpr::bracket(&e, &t1);
            let t3 = BracketExpr::bracket(&e, &t2);
            let a = self.quad(k, i);
            let b = self.quad(i, i);
            let corr = BracketExpr::bracket(&a, &b);
            Ladder {
                expr: Self::lin_comb(vec![(S::one(), t3), (ratio(9, 1), corr)]),
                constant: ratio(6, 1),
            }
        }
    }

    /// Ladder for `(x^j)^alpha d_k` with its constant.
    pub fn ladder(&mut self, j: usize, k: usize, alpha: u32) -> Ladder<S> {
        match alpha {
            0 => Ladder { expr: self.unit(k), constant: S::one() },
            1 => Ladder { expr: self.lin(j, k), constant: S::one() },
            2 => Ladder { expr: self.quad(j, k), constant: S::one() },
            3 => self.cubic(j, k),
            _ => {
                // [(x^j)^2 d_j, (x^j)^a d_k] = a (x^j)^{a+1} d_k, or (a - 2) (x^j)^{a+1} d_j when k = j
                let prev = self.pow(j, alpha - 1, k);
                let sq = self.quad(j, j);
                let a = alpha as i64 - 1;
                let c = if j == k { a - 2 } else { a };
                Ladder {
                    expr: BracketExpr::bracket(&sq, &prev),
                    constant: ratio(c, 1),
                }
            }
        }
    }

    /// Normalized `(x^j)^alpha d_k`.
    pub fn pow(&mut self, j: usize, alpha: u32, k: usize) -> Expr<S> {
        if let Some(e) = self.memo.get(&Key::Pow(j, alpha, k)) {
            return e.clone();
        }
        let e = self.ladder(j, k, alpha).normalized();
        self.memo.insert(Key::Pow(j, alpha, k), e.clone());
        e
    }
}

/// One-shot form of [`LadderBuilder::ladder`]; `j`, `k` are 0-based coordinates.
pub fn monomial_ladder_dge3<S: Scalar>(d: usize, j: usize, k: usize, alpha: u32) -> Result<Ladder<S>> {
    for idx in [j, k] {
        if idx >= d {
            return Err(Error::IndexOutOfRange { index: idx, max: d });
        }
    }
    let mut b = LadderBuilder::new(d)?;
    Ok(b.ladder(j, k, alpha))
}

/// The target monomial field `(x^j)^alpha d_k`.
pub fn monomial_field<S: Scalar>(d: usize, j: usize, alpha: u32, k: usize) -> PolyVectorField<S> {
    PolyVectorField::monomial_field(d, S::one(), Monomial::var_pow(d, j, alpha), k)
}

/// A field `p d_j` with `p(x_i) != 0` and `p(x_l) = 0` for every other landmark.
///
/// On the line `p(x) = prod_{l != i} (x - x_l)`; in higher dimensions
/// `p(x) = prod_{l != i} |x - x_l|^2`. Indices are 0-based.
pub fn separation_field<S: Scalar>(cfg: &LandmarkConfig<S>, i: usize, j: usize) -> Result<PolyVectorField<S>> {
    let (n, d) = (cfg.len(), cfg.dim());
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, max: n });
    }
    if j >= d {
        return Err(Error::IndexOutOfRange { index: j, max: d });
    }
    let mut p = Polynomial::constant(d, S::one());
    for (l, pt) in cfg.points().iter().enumerate() {
        if l == i {
            continue;
        }
        let factor = if d == 1 {
            Polynomial::var(1, 0).sub(&Polynomial::constant(1, pt[0].clone()))
        } else {
            (0..d).fold(Polynomial::zero(d), |acc, c| {
                let diff = Polynomial::var(d, c).sub(&Polynomial::constant(d, pt[c].clone()));
                acc.add(&diff.mul(&diff))
            })
        };
        p = p.mul(&factor);
    }
    Ok(PolyVectorField::along(p, j))
}

/// Bounds and knobs for [`closure_search`].
#[derive(Clone, Debug, PartialEq)]
pub struct ClosureOptions {
    /// Longest bracket word explored, counting generators as length one.
    /// Generators are always included, so 0 and 1 behave alike.
    pub max_depth: usize,
    pub max_degree: u32,
    /// Order of the Taylor jet at the landmarks used to decide whether a new
    /// bracket is kept for further bracketing.
    pub jet_order: usize,
}

impl ClosureOptions {
    pub const DEFAULT_MAX_DEPTH: usize = 12;
    pub const DEFAULT_JET_ORDER: usize = 2;

    pub fn for_landmarks(n: usize) -> Self {
        ClosureOptions {
            max_depth: Self::DEFAULT_MAX_DEPTH,
            max_degree: 2 * n as u32 + 3,
            jet_order: Self::DEFAULT_JET_ORDER,
        }
    }
}

/// Evidence that iterated brackets span the tangent space at a configuration.
#[derive(Clone, Debug)]
pub struct RankCertificate<S> {
    pub config: LandmarkConfig<S>,
    pub options: ClosureOptions,
    /// Expressions whose lifted values form the columns of `matrix`, in order.
    pub exprs: Vec<Expr<S>>,
    pub matrix: LiftedEvaluation<S>,
    pub achieved_rank: usize,
    pub target_rank: usize,
    pub success: bool,
    /// Number of fields kept for bracketing and the longest word length explored.
    pub fields_kept: usize,
    pub depth_reached: usize,
}

/// Stacked derivatives `d^beta X^k(x_i)` for `|beta| <= order`, landmark-major.
pub fn jet_vector<S: Scalar>(field: &PolyVectorField<S>, cfg: &LandmarkConfig<S>, order: usize) -> Vec<S> {
    let d = cfg.dim();
    let mut derivs: Vec<PolyVectorField<S>> = vec![field.clone()];
    let mut frontier: Vec<(PolyVectorField<S>, usize)> = vec![(field.clone(), 0)];
    for _ in 0..order {
        let mut next = Vec::new();
        for (f, first_var) in &frontier {
            // derivatives in non-decreasing variable order enumerate each multi-index once
            for v in *first_var..d {
                let df = PolyVectorField::new(f.components().iter().map(|p| p.derivative(v)).collect())
                    .expect("same dimension");
                next.push((df, v));
            }
        }
        derivs.extend(next.iter().map(|(f, _)| f.clone()));
        frontier = next;
    }
    let mut out = Vec::with_capacity(cfg.len() * d * derivs.len());
    for p in cfg.points() {
        for f in &derivs {
            out.extend(f.evaluate(p).expect("dimension checked"));
        }
    }
    out
}

struct SearchState<S> {
    kept: Vec<Expr<S>>,
    jets: Tracker<S>,
    values: Tracker<S>,
    exprs: Vec<Expr<S>>,
    matrix: LiftedEvaluation<S>,
    target: usize,
}

impl<S: Scalar> SearchState<S> {
    fn consider(&mut self, e: Expr<S>, jet: &[S], col: Vec<S>, new: &mut Vec<usize>) {
        if self.values.rank() < self.target && self.values.try_insert(&col) {
            self.exprs.push(e.clone());
            self.matrix.push(col);
        }
        if self.jets.try_insert(jet) {
            new.push(self.kept.len());
            self.kept.push(e);
        }
    }
}

enum Tracker<S> {
    Exact(Echelon<S>),
    Float(Vec<Vec<S>>, usize),
}

impl<S: Scalar> Tracker<S> {
    fn new() -> Self {
        if S::EXACT {
            Tracker::Exact(Echelon::new())
        } else {
            Tracker::Float(Vec::new(), 0)
        }
    }

    fn rank(&self) -> usize {
        match self {
            Tracker::Exact(e) => e.rank(),
            Tracker::Float(_, r) => *r,
        }
    }

    fn try_insert(&mut self, v: &[S]) -> bool {
        match self {
            Tracker::Exact(e) => e.insert(v),
            Tracker::Float(cols, r) => {
                cols.push(v.to_vec());
                let nr = S::matrix_rank(cols);
                if nr > *r {
                    *r = nr;
                    true
                } else {
                    cols.pop();
                    false
                }
            }
        }
    }
}

/// Breadth-first search over iterated brackets of the generator pair for a
/// set of fields whose lifted values have full rank `n d` at `cfg`.
///
/// Level `L` brackets every field kept at level `L - 1` with every kept field
/// (generator `X` first, then in creation order). A new field is kept for
/// further bracketing when its jet at the landmarks is independent of the
/// kept fields' jets; it contributes a certificate column when its value
/// raises the rank of the lifted evaluation matrix. Candidates are evaluated
/// in parallel; keep decisions are made serially in generation order.
pub fn closure_search<S: Scalar>(cfg: &LandmarkConfig<S>, opts: &ClosureOptions) -> Result<RankCertificate<S>> {
    let d = cfg.dim();
    let gens = Generators::<S>::new(d)?;
    let target = cfg.len() * d;
    let mut st = SearchState {
        kept: Vec::new(),
        jets: Tracker::new(),
        values: Tracker::new(),
        exprs: Vec::new(),
        matrix: LiftedEvaluation::empty(target),
        target,
    };
    let mut depth_reached = 1;

    let evaluate = |e: &Expr<S>| -> Option<(Vec<S>, Vec<S>)> {
        let v = e.value();
        if v.is_zero() || v.degree().unwrap_or(0) > opts.max_degree {
            return None;
        }
        let col = lift_column(v, cfg).expect("dimension checked");
        Some((jet_vector(v, cfg, opts.jet_order), col))
    };

    let mut new = Vec::new();
    for e in [BracketExpr::gen_x(&gens), BracketExpr::gen_y(&gens)] {
        if let Some((jet, col)) = evaluate(&e) {
            st.consider(e, &jet, col, &mut new);
        }
    }

    // generators are words of length one; nesting level L means length L + 1
    for depth in 1..opts.max_depth {
        if st.values.rank() == target || new.is_empty() {
            break;
        }
        depth_reached = depth + 1;
        let fresh: std::collections::HashSet<usize> = new.iter().copied().collect();
        let mut pairs = Vec::new();
        for &a in &new {
            for b in 0..st.kept.len() {
                // each unordered pair of fresh fields once
                if b == a || (fresh.contains(&b) && b > a) {
                    continue;
                }
                pairs.push((b, a));
            }
        }
        let kept = &st.kept;
        let candidates: Vec<(Expr<S>, Option<(Vec<S>, Vec<S>)>)> = pairs
            .par_iter()
            .map(|&(b, a)| {
                let e = BracketExpr::bracket(&kept[b], &kept[a]);
                let ev = evaluate(&e);
                (e, ev)
            })
            .collect();
        let mut next = Vec::new();
        for (e, ev) in candidates {
            if let Some((jet, col)) = ev {
                st.consider(e, &jet, col, &mut next);
            }
            if st.values.rank() == target {
                break;
            }
        }
        new = next;
    }

    let SearchState { kept, values, exprs, matrix, .. } = st;
    let achieved = values.rank();
    Ok(RankCertificate {
        config: cfg.clone(),
        options: opts.clone(),
        exprs,
        matrix,
        achieved_rank: achieved,
        target_rank: target,
        success: achieved == target,
        fields_kept: kept.len(),
        depth_reached,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexfield::ComplexPolyField;
    use num_traits::Zero;
    use crate::Rational;

    fn q(n: i64) -> Rational {
        Rational::from_integer(n.into())
    }

    fn mono1(a: u32) -> PolyVectorField<Rational> {
        monomial_field(1, 0, a, 0)
    }

    #[test]
    fn d1_ladder_examples() {
        let l = monomial_ladder_d1::<Rational>(2);
        assert_eq!(l.constant, q(3));
        assert_eq!(l.expr.value(), &mono1(2).scale(&q(3)));
        let l = monomial_ladder_d1::<Rational>(0);
        assert!(matches!(l.expr.node(), Node::GenX));
        for a in 0..=8 {
            let l = monomial_ladder_d1::<Rational>(a);
            assert!(!l.constant.is_zero());
            assert_eq!(l.expr.value(), &mono1(a).scale(&l.constant), "alpha={a}");
        }
    }

    #[test]
    fn d2_ladder_examples() {
        let l = monomial_ladder_d2::<Rational>(1, 3).unwrap();
        assert!(matches!(l.expr.node(), Node::GenY));
        let l = monomial_ladder_d2::<Rational>(0, 0).unwrap();
        assert!(matches!(l.expr.node(), Node::GenX));
        let l = monomial_ladder_d2::<Rational>(0, 3).unwrap();
        let expected = ComplexPolyField::real_monomial(3).to_real().scale(&l.constant);
        assert_eq!(l.expr.value(), &expected);
        assert!(monomial_ladder_d2::<Rational>(2, 0).is_err());
    }

    #[test]
    fn dge3_ladder_examples() {
        for k in 0..3 {
            let l = monomial_ladder_dge3::<Rational>(3, 0, k, 0).unwrap();
            assert_eq!(l.expr.value(), &PolyVectorField::unit(3, k));
        }
        let l = monomial_ladder_dge3::<Rational>(3, 1, 2, 1).unwrap();
        assert_eq!(l.expr.value(), &monomial_field(3, 1, 1, 2).scale(&l.constant));
        let l = monomial_ladder_dge3::<Rational>(4, 0, 2, 4).unwrap();
        assert!(!l.constant.is_zero());
        assert_eq!(l.expr.value(), &monomial_field(4, 0, 4, 2).scale(&l.constant));
        assert!(monomial_ladder_dge3::<Rational>(2, 0, 0, 1).is_err());
        assert!(monomial_ladder_dge3::<Rational>(3, 3, 0, 1).is_err());
    }

    #[test]
    fn cached_values_replay() {
        let mut b = LadderBuilder::<Rational>::new(3).unwrap();
        let l = b.ladder(2, 2, 3);
        assert_eq!(&l.expr.replay(b.generators()), l.expr.value());
    }

    #[test]
    fn separation_examples() {
        let cfg = LandmarkConfig::new(1, vec![vec![q(0)], vec![q(1)]]).unwrap();
        let f = separation_field(&cfg, 0, 0).unwrap();
        assert_eq!(f, PolyVectorField::parse("x1 d1 + (-1) d1", 1).unwrap());
        assert_eq!(f.to_string(), "x1 d1 + (-1) d1");
        assert_eq!(f.evaluate(&[q(0)]).unwrap(), vec![q(-1)]);
        assert_eq!(f.evaluate(&[q(1)]).unwrap(), vec![q(0)]);

        let single = LandmarkConfig::new(2, vec![vec![q(3), q(4)]]).unwrap();
        assert_eq!(separation_field(&single, 0, 1).unwrap(), PolyVectorField::unit(2, 1));

        let cfg = LandmarkConfig::new(2, vec![vec![q(0), q(0)], vec![q(1), q(0)]]).unwrap();
        let f = separation_field(&cfg, 1, 0).unwrap();
        assert_eq!(f, PolyVectorField::parse("x1^2 d1 + x2^2 d1", 2).unwrap());
        assert_eq!(f.evaluate(&[q(1), q(0)]).unwrap(), vec![q(1), q(0)]);
        assert!(separation_field(&cfg, 2, 0).is_err());
        assert!(separation_field(&cfg, 0, 2).is_err());
    }

    #[test]
    fn closure_search_examples() {
        let cfg = LandmarkConfig::new(1, vec![vec![q(0)], vec![q(1)]]).unwrap();
        let cert = closure_search(&cfg, &ClosureOptions { max_depth: 6, ..ClosureOptions::for_landmarks(2) }).unwrap();
        assert!(cert.success);
        assert_eq!(cert.achieved_rank, 2);

        let cfg = LandmarkConfig::new(3, vec![vec![q(1), q(0), q(0)]]).unwrap();
        let cert = closure_search(&cfg, &ClosureOptions { max_depth: 8, ..ClosureOptions::for_landmarks(1) }).unwrap();
        assert!(cert.success);
        assert_eq!(cert.achieved_rank, 3);

        let cfg = LandmarkConfig::new(1, vec![vec![q(0)], vec![q(1)], vec![q(2)]]).unwrap();
        let cert = closure_search(&cfg, &ClosureOptions { max_depth: 1, ..ClosureOptions::for_landmarks(3) }).unwrap();
        assert!(!cert.success);
        assert!(cert.achieved_rank <= 2);
    }

    #[test]
    fn certificate_columns_match_expressions() {
        let cfg = LandmarkConfig::new(2, vec![vec![q(0), q(0)], vec![q(1), q(2)]]).unwrap();
        let cert = closure_search(&cfg, &ClosureOptions::for_landmarks(2)).unwrap();
        assert!(cert.success);
        assert_eq!(cert.matrix.cols(), cert.exprs.len());
        for (c, e) in cert.exprs.iter().enumerate() {
            assert_eq!(cert.matrix.column(c), lift_column(e.value(), &cfg).unwrap().as_slice());
        }
        assert_eq!(cert.matrix.rank(), cert.achieved_rank);
    }

    #[test]
    fn float_configurations_use_numeric_rank() {
        let cfg = LandmarkConfig::new(2, vec![vec![0.1, 0.2], vec![-0.4, 0.7]]).unwrap();
        let cert = closure_search(&cfg, &ClosureOptions::for_landmarks(2)).unwrap();
        assert!(cert.success);
    }
}
