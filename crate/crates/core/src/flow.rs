//! Flows of polynomial fields and their composition along control schedules.

use std::fmt;

use num_traits::Float;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::landmark::LandmarkConfig;
use crate::polyvec::{generator_pair, PolyVectorField};
use crate::scalar::Scalar;
use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Generator {
    X,
    Y,
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Generator::X => "X",
            Generator::Y => "Y",
        })
    }
}

/// A finite sequence of flow legs `e^{s_1 G_1}, e^{s_2 G_2}, ...`, applied first to last.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSchedule {
    dim: usize,
    legs: Vec<(Generator, f64)>,
}

impl ControlSchedule {
    pub fn new(dim: usize, legs: Vec<(Generator, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if let Some((_, t)) = legs.iter().find(|(_, t)| !t.is_finite()) {
            return Err(Error::Invalid(format!("non-finite duration {t}")));
        }
        Ok(ControlSchedule { dim, legs })
    }

    pub fn identity(dim: usize) -> Self {
        ControlSchedule { dim, legs: Vec::new() }
    }

    /// `pairs` alternating legs `X, Y, X, Y, ...` with the given durations.
    pub fn alternating(dim: usize, durations: &[f64]) -> Result<Self> {
        Self::alternating_from(dim, 0, durations)
    }

    /// Tail of an alternating schedule whose first leg has index `offset`.
    pub fn alternating_from(dim: usize, offset: usize, durations: &[f64]) -> Result<Self> {
        let legs = durations
            .iter()
            .enumerate()
            .map(|(i, &t)| (if (offset + i).is_multiple_of(2) { Generator::X } else { Generator::Y }, t))
            .collect();
        Self::new(dim, legs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn legs(&self) -> &[(Generator, f64)] {
        &self.legs
    }

    pub fn len(&self) -> usize {
        self.legs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.legs.is_empty()
    }

    pub fn durations(&self) -> Vec<f64> {
        self.legs.iter().map(|(_, t)| *t).collect()
    }

    /// The inverse schedule: legs in reverse order with negated durations.
    pub fn reversed(&self) -> Self {
        ControlSchedule {
            dim: self.dim,
            legs: self.legs.iter().rev().map(|(g, t)| (*g, -t)).collect(),
        }
    }

    /// Drops zero-duration legs and merges consecutive legs of the same generator.
    pub fn simplified(&self) -> Self {
        let mut legs: Vec<(Generator, f64)> = Vec::new();
        for &(g, t) in &self.legs {
            match legs.last_mut() {
                Some((h, s)) if *h == g => *s += t,
                _ => legs.push((g, t)),
            }
            if legs.last().is_some_and(|(_, s)| *s == 0.0) {
                legs.pop();
            }
        }
        ControlSchedule { dim: self.dim, legs }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Integration stops with [`FlowStatus::Escaped`] once `|x|` exceeds this.
    pub state_bound: f64,
    pub max_steps: usize,
    /// Record every accepted step; otherwise only the endpoints of each leg.
    pub record: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            rtol: 1e-10,
            atol: 1e-12,
            state_bound: 1e6,
            max_steps: 200_000,
            record: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowStatus {
    Ok,
    Escaped,
    StepFailure,
}

/// Where a configuration flow stopped early.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlowFailure {
    pub status: FlowStatus,
    pub leg: usize,
    pub landmark: usize,
}

/// A polynomial field compiled for fast floating-point evaluation.
#[derive(Clone, Debug)]
pub struct CompiledField<T> {
    dim: usize,
    terms: Vec<Term<T>>,
    /// Terms of the Jacobian, indexed by `row * dim + column`.
    jac_terms: Vec<Term<T>>,
    kind: ClosedForm<T>,
}

type Term<T> = (usize, T, Vec<(usize, i32)>);

fn eval_terms<T: Float>(terms: &[Term<T>], x: &[T], out: &mut [T]) {
    out.iter_mut().for_each(|o| *o = T::zero());
    for (k, c, powers) in terms {
        let mut v = *c;
        for &(var, e) in powers {
            v = v * x[var].powi(e);
        }
        out[*k] = out[*k] + v;
    }
}

#[derive(Clone, Debug, PartialEq)]
enum ClosedForm<T> {
    Translation(Vec<T>),
    /// `c x^3 d` on the line.
    Cubic(T),
    None,
}

impl<T: Float + Send + Sync> CompiledField<T> {
    pub fn new<S: Scalar>(field: &PolyVectorField<S>) -> Self {
        let dim = field.dim();
        let conv = |c: &S| T::from(c.to_f64()).expect("finite coefficient");
        let mut terms = Vec::new();
        for (k, p) in field.components().iter().enumerate() {
            for (m, c) in p.terms() {
                let powers: Vec<(usize, i32)> = m
                    .exponents()
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(v, &e)| (v, e as i32))
                    .collect();
                terms.push((k, conv(c), powers));
            }
        }
        let mut jac_terms = Vec::new();
        for (k, c, powers) in &terms {
            for (i, &(var, e)) in powers.iter().enumerate() {
                let mut dp: Vec<(usize, i32)> = powers.clone();
                if e == 1 {
                    dp.remove(i);
                } else {
                    dp[i].1 -= 1;
                }
                jac_terms.push((k * dim + var, *c * T::from(e).expect("small exponent"), dp));
            }
        }
        // structural detection only: exact coefficient patterns
        let kind = if field.degree().unwrap_or(0) == 0 {
            let v = field
                .components()
                .iter()
                .map(|p| p.terms().next().map_or(T::zero(), |(_, c)| conv(c)))
                .collect();
            ClosedForm::Translation(v)
        } else if dim == 1 && field.num_terms() == 1 && field.degree() == Some(3) {
            ClosedForm::Cubic(terms[0].1)
        } else {
            ClosedForm::None
        };
        CompiledField { dim, terms, jac_terms, kind }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The same field integrated numerically even where a closed form exists.
    pub fn without_closed_form(mut self) -> Self {
        self.kind = ClosedForm::None;
        self
    }

    pub fn has_closed_form(&self) -> bool {
        self.kind != ClosedForm::None
    }

    pub fn eval_into(&self, x: &[T], out: &mut [T]) {
        eval_terms(&self.terms, x, out);
    }

    /// Row-major Jacobian `dF_k/dx_v` at `x` into `out` (length `dim * dim`).
    pub fn jacobian_into(&self, x: &[T], out: &mut [T]) {
        eval_terms(&self.jac_terms, x, out);
    }

    pub fn eval(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        self.eval_into(x, &mut out);
        out
    }
}

/// One landmark's path through one leg: `(time within the leg, point)`.
pub type Samples<T> = Vec<(T, Vec<T>)>;

/// Result of flowing a single point.
#[derive(Clone, Debug)]
pub struct PointFlow<T> {
    pub status: FlowStatus,
    pub point: Vec<T>,
    pub samples: Samples<T>,
}

fn num<T: Float>(v: f64) -> T {
    T::from(v).expect("representable constant")
}

fn out_of_bounds<T: Float>(x: &[T], bound: T) -> bool {
    x.iter().any(|v| !v.is_finite() || v.abs() > bound)
}

/// Flow of `field` for time `t` from `p`; closed forms when the field is a
/// translation or the cubic on the line, adaptive Dormand-Prince 5(4) otherwise.
pub fn flow_point<T: Float + Send + Sync>(field: &CompiledField<T>, t: T, p: &[T], opts: &FlowOptions) -> PointFlow<T> {
    let bound = num::<T>(opts.state_bound);
    let start = vec![(T::zero(), p.to_vec())];
    if out_of_bounds(p, bound) {
        return PointFlow { status: FlowStatus::Escaped, point: p.to_vec(), samples: start };
    }
    if t == T::zero() {
        return PointFlow { status: FlowStatus::Ok, point: p.to_vec(), samples: start };
    }
    match &field.kind {
        ClosedForm::Translation(v) => {
            let q: Vec<T> = p.iter().zip(v).map(|(&x, &c)| x + c * t).collect();
            finish_closed(q, t, start, bound)
        }
        ClosedForm::Cubic(c) => {
            // x' = c x^3  =>  x(t) = x0 / sqrt(1 - 2 c x0^2 t)
            let x0 = p[0];
            let den = T::one() - num::<T>(2.0) * *c * x0 * x0 * t;
            if den <= T::zero() {
                return PointFlow { status: FlowStatus::Escaped, point: p.to_vec(), samples: start };
            }
            finish_closed(vec![x0 / den.sqrt()], t, start, bound)
        }
        ClosedForm::None => dormand_prince(|x: &[T], o: &mut [T]| field.eval_into(x, o), p.len(), t, p, opts),
    }
}

fn finish_closed<T: Float>(q: Vec<T>, t: T, mut samples: Samples<T>, bound: T) -> PointFlow<T> {
    let status = if out_of_bounds(&q, bound) { FlowStatus::Escaped } else { FlowStatus::Ok };
    samples.push((t, q.clone()));
    PointFlow { status, point: q, samples }
}

// Dormand-Prince 5(4) tableau; the fields are autonomous, so the nodes are not needed
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights are the last row of A; these are fifth minus fourth order
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `x' = rhs(x)`; only the first `bounded` components are checked against the state bound.
fn dormand_prince<T: Float, F: Fn(&[T], &mut [T])>(rhs: F, bounded: usize, t_end: T, p: &[T], opts: &FlowOptions) -> PointFlow<T> {
    let d = p.len();
    let (rtol, atol, bound) = (num::<T>(opts.rtol), num::<T>(opts.atol), num::<T>(opts.state_bound));
    let dir = t_end.signum();
    let span = t_end.abs();
    let mut t = T::zero();
    let mut x = p.to_vec();
    let mut samples = vec![(T::zero(), x.clone())];
    let mut k = vec![vec![T::zero(); d]; 7];
    let mut stage = vec![T::zero(); d];
    let mut xn = vec![T::zero(); d];
    rhs(&x, &mut k[0]);

    // initial step from the local scale of the field
    let fnorm = k[0].iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let xnorm = x.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let mut h = if fnorm > T::zero() {
        (num::<T>(0.01) * (xnorm + T::one()) / fnorm).min(span)
    } else {
        span
    };
    let h_floor = num::<T>(1e-14) * span.max(T::one());
    let tenth = num::<T>(0.1);

    for _ in 0..opts.max_steps {
        if span - t <= T::zero() {
            let status = FlowStatus::Ok;
            if !opts.record {
                samples.push((t * dir, x.clone()));
            }
            return PointFlow { status, point: x, samples };
        }
        let last = h >= span - t;
        if last {
            h = span - t;
        }
        let hs = h * dir;
        for s in 1..7 {
            for i in 0..d {
                let mut acc = T::zero();
                for (r, kr) in k.iter().enumerate().take(s) {
                    let a = A[s][r];
                    if a != 0.0 {
                        acc = acc + num::<T>(a) * kr[i];
                    }
                }
                stage[i] = x[i] + hs * acc;
            }
            rhs(&stage, &mut k[s]);
        }
        // the seventh stage is evaluated at the fifth-order solution
        xn.copy_from_slice(&stage);
        let mut err = T::zero();
        let mut finite = true;
        for i in 0..d {
            let mut e = T::zero();
            for (r, kr) in k.iter().enumerate() {
                if E[r] != 0.0 {
                    e = e + num::<T>(E[r]) * kr[i];
                }
            }
            e = e * hs;
            let sc = atol + rtol * x[i].abs().max(xn[i].abs());
            let ratio = e / sc;
            err = err + ratio * ratio;
            finite &= xn[i].is_finite() && e.is_finite();
        }
        err = (err / num::<T>(d as f64)).sqrt();
        if !finite {
            h = h * tenth;
            if h < h_floor {
                return PointFlow { status: FlowStatus::Escaped, point: x, samples };
            }
            continue;
        }
        if err <= T::one() {
            t = if last { span } else { t + h };
            x.copy_from_slice(&xn);
            let k6 = k[6].clone();
            k[0] = k6;
            if out_of_bounds(&x[..bounded], bound) {
                samples.push((t * dir, x.clone()));
                return PointFlow { status: FlowStatus::Escaped, point: x, samples };
            }
            if opts.record {
                samples.push((t * dir, x.clone()));
            }
        }
        let factor = if err == T::zero() {
            num::<T>(5.0)
        } else {
            (num::<T>(0.9) * err.powf(num::<T>(-0.2))).max(num::<T>(0.2)).min(num::<T>(5.0))
        };
        h = h * factor;
        if h < h_floor && span - t > T::zero() {
            // a collapse that would carry the point past the bound at its current speed is a blow-up
            rhs(&x, &mut k[1]);
            let speed = k[1][..bounded].iter().fold(T::zero(), |m, v| m.max(v.abs()));
            let status = if speed * (span - t) <= bound { FlowStatus::StepFailure } else { FlowStatus::Escaped };
            return PointFlow { status, point: x, samples };
        }
    }
    PointFlow { status: FlowStatus::StepFailure, point: x, samples }
}

/// Flow of `field` from `p` together with its derivative `D(phi_t)(p)`
/// (row-major `d x d`), from the variational equation `M' = DF(x) M`.
pub fn flow_point_variational<T: Float + Send + Sync>(
    field: &CompiledField<T>,
    t: T,
    p: &[T],
    opts: &FlowOptions,
) -> (FlowStatus, Vec<T>, Vec<T>) {
    let d = p.len();
    let mut ident = vec![T::zero(); d * d];
    (0..d).for_each(|i| ident[i * d + i] = T::one());
    match &field.kind {
        ClosedForm::Translation(_) | ClosedForm::Cubic(_) => {
            let r = flow_point(field, t, p, &FlowOptions { record: false, ..opts.clone() });
            if let (ClosedForm::Cubic(c), FlowStatus::Ok) = (&field.kind, r.status) {
                // dx/dx0 = (1 - 2 c x0^2 t)^(-3/2) = (x / x0)^3
                let den = T::one() - num::<T>(2.0) * *c * p[0] * p[0] * t;
                ident[0] = den.powf(num::<T>(-1.5));
            }
            (r.status, r.point, ident)
        }
        ClosedForm::None => {
            let mut z = p.to_vec();
            z.extend_from_slice(&ident);
            let rhs = |z: &[T], o: &mut [T]| {
                let (x, m) = z.split_at(d);
                let (ox, om) = o.split_at_mut(d);
                field.eval_into(x, ox);
                let mut jac = vec![T::zero(); d * d];
                field.jacobian_into(x, &mut jac);
                for r in 0..d {
                    for c in 0..d {
                        om[r * d + c] = (0..d).fold(T::zero(), |acc, k| acc + jac[r * d + k] * m[k * d + c]);
                    }
                }
            };
            let r = dormand_prince(rhs, d, t, &z, &FlowOptions { record: false, ..opts.clone() });
            let mut point = r.point;
            let m = point.split_off(d);
            (r.status, point, m)
        }
    }
}

/// Compiled generator pair for one dimension.
#[derive(Clone, Debug)]
pub struct GeneratorFlows<T> {
    pub x: CompiledField<T>,
    pub y: CompiledField<T>,
}

impl<T: Float + Send + Sync> GeneratorFlows<T> {
    pub fn new(dim: usize) -> Result<Self> {
        let (x, y) = generator_pair::<Rational>(dim)?;
        Ok(GeneratorFlows {
            x: CompiledField::new(&x),
            y: CompiledField::new(&y),
        })
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn field(&self, g: Generator) -> &CompiledField<T> {
        match g {
            Generator::X => &self.x,
            Generator::Y => &self.y,
        }
    }
}

/// Result of running a schedule on a configuration.
#[derive(Clone, Debug)]
pub struct FlowResult<T> {
    pub points: Vec<Vec<T>>,
    /// `trajectory[leg][landmark]`: samples within that leg.
    pub trajectory: Vec<Vec<Samples<T>>>,
    /// First failure in (leg, landmark) order, if any.
    pub failure: Option<FlowFailure>,
}

impl<T: Float> FlowResult<T> {
    pub fn status(&self) -> FlowStatus {
        self.failure.map_or(FlowStatus::Ok, |f| f.status)
    }

    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }
}

impl<T: Float + Scalar> FlowResult<T> {
    /// The final configuration; fails if points merged numerically.
    pub fn final_config(&self) -> Result<LandmarkConfig<T>> {
        let dim = self.points.first().map_or(1, |p| p.len());
        LandmarkConfig::new(dim, self.points.clone())
    }
}

/// Applies every leg to every landmark. Landmarks are integrated independently
/// and in parallel; each landmark's result does not depend on the worker count.
pub fn run_schedule<T: Float + Send + Sync>(
    flows: &GeneratorFlows<T>,
    sched: &ControlSchedule,
    points: &[Vec<T>],
    opts: &FlowOptions,
) -> Result<FlowResult<T>> {
    if sched.dim() != flows.dim() {
        return Err(Error::DimensionMismatch { expected: flows.dim(), found: sched.dim() });
    }
    if let Some(p) = points.iter().find(|p| p.len() != sched.dim()) {
        return Err(Error::DimensionMismatch { expected: sched.dim(), found: p.len() });
    }
    let per_landmark: Vec<(Vec<T>, Vec<Samples<T>>, Option<(usize, FlowStatus)>)> = points
        .par_iter()
        .map(|p| {
            let mut x = p.clone();
            let mut legs = Vec::with_capacity(sched.len());
            for (leg, &(g, t)) in sched.legs().iter().enumerate() {
                let r = flow_point(flows.field(g), num::<T>(t), &x, opts);
                legs.push(r.samples);
                x = r.point;
                if r.status != FlowStatus::Ok {
                    return (x, legs, Some((leg, r.status)));
                }
            }
            (x, legs, None)
        })
        .collect();

    let failure = per_landmark
        .iter()
        .enumerate()
        .filter_map(|(i, (_, _, f))| f.map(|(leg, status)| FlowFailure { status, leg, landmark: i }))
        .min_by_key(|f| (f.leg, f.landmark));
    let mut trajectory: Vec<Vec<Samples<T>>> = vec![Vec::with_capacity(points.len()); sched.len()];
    let mut finals = Vec::with_capacity(points.len());
    for (x, legs, _) in per_landmark {
        finals.push(x);
        for (leg, samples) in legs.into_iter().enumerate() {
            trajectory[leg].push(samples);
        }
    }
    // landmarks that stopped early leave later legs short; pad for a rectangular layout
    for leg in trajectory.iter_mut() {
        leg.resize(points.len(), Vec::new());
    }
    Ok(FlowResult { points: finals, trajectory, failure })
}

/// [`run_schedule`] for a configuration, compiling the generators on the fly.
pub fn flow_config<T: Float + Scalar>(
    sched: &ControlSchedule,
    cfg: &LandmarkConfig<T>,
    opts: &FlowOptions,
) -> Result<FlowResult<T>> {
    if sched.dim() != cfg.dim() {
        return Err(Error::DimensionMismatch { expected: cfg.dim(), found: sched.dim() });
    }
    let flows = GeneratorFlows::new(cfg.dim())?;
    run_schedule(&flows, sched, cfg.points(), opts)
}

/// Whether a flow on the line kept the landmarks in their original order.
pub fn order_preserved<T: Float + Scalar>(before: &LandmarkConfig<T>, result: &FlowResult<T>) -> Result<bool> {
    if before.dim() != 1 {
        return Err(Error::RequiresLine(before.dim()));
    }
    if !result.is_ok() {
        return Err(Error::Invalid("flow did not complete".into()));
    }
    if result.points.len() != before.len() {
        return Err(Error::LengthMismatch { expected: before.len(), found: result.points.len() });
    }
    let pts = before.points();
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            let was = pts[a][0] < pts[b][0];
            let now = result.points[a][0] < result.points[b][0];
            if was != now || result.points[a][0] == result.points[b][0] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> CompiledField<f64> {
        GeneratorFlows::<f64>::new(1).unwrap().y
    }

    #[test]
    fn translation_is_exact() {
        let f = GeneratorFlows::<f64>::new(2).unwrap();
        let r = flow_point(&f.x, 2.5, &[0.0, 0.0], &FlowOptions::default());
        assert_eq!(r.status, FlowStatus::Ok);
        assert_eq!(r.point, vec![2.5, 0.0]);
    }

    #[test]
    fn zero_time_is_identity() {
        let f = GeneratorFlows::<f64>::new(3).unwrap();
        let p = [0.3, -0.2, 0.9];
        assert_eq!(flow_point(&f.y, 0.0, &p, &FlowOptions::default()).point, p.to_vec());
    }

    #[test]
    fn cubic_closed_form_matches_integrator() {
        let (_, y) = generator_pair::<Rational>(1).unwrap();
        // same field with closed-form detection switched off
        let generic = CompiledField::<f64>::new(&y).without_closed_form();
        let opts = FlowOptions::default();
        for &(x0, t) in &[(0.5, 1.0), (1.0, 0.3), (-0.7, -2.0), (2.0, 0.1)] {
            let exact = flow_point(&cubic(), t, &[x0], &opts).point[0];
            let numeric = flow_point(&generic, t, &[x0], &opts);
            assert_eq!(numeric.status, FlowStatus::Ok);
            assert!(((numeric.point[0] - exact) / exact).abs() < 1e-9, "{x0} {t}");
        }
    }

    #[test]
    fn cubic_escape() {
        let r = flow_point(&cubic(), 1.0, &[1.0], &FlowOptions::default());
        assert_eq!(r.status, FlowStatus::Escaped);
        let mut generic = cubic();
        generic.kind = ClosedForm::None;
        let r = flow_point(&generic, 1.0, &[1.0], &FlowOptions::default());
        assert_eq!(r.status, FlowStatus::Escaped);
    }

    #[test]
    fn schedule_examples() {
        let cfg = LandmarkConfig::new(1, vec![vec![-1.0], vec![1.0]]).unwrap();
        let opts = FlowOptions::default();
        let r = flow_config(&ControlSchedule::identity(1), &cfg, &opts).unwrap();
        assert!(r.is_ok());
        assert_eq!(r.points, cfg.points());

        let t = 0.3;
        let sched = ControlSchedule::new(1, vec![(Generator::Y, t)]).unwrap();
        let r = flow_config(&sched, &cfg, &opts).unwrap();
        let s = 1.0 / (1.0 - 2.0 * t).sqrt();
        assert_eq!(r.points, vec![vec![-s], vec![s]]);
        assert!(order_preserved(&cfg, &r).unwrap());

        let cfg2 = LandmarkConfig::new(2, vec![vec![0.0, 1.0], vec![2.0, -1.0]]).unwrap();
        let sched = ControlSchedule::new(2, vec![(Generator::X, 0.75)]).unwrap();
        let r = flow_config(&sched, &cfg2, &opts).unwrap();
        assert_eq!(r.points, vec![vec![0.75, 1.0], vec![2.75, -1.0]]);
        assert!(flow_config(&sched, &cfg, &opts).is_err());
    }

    #[test]
    fn failure_reports_leg_and_landmark() {
        let cfg = LandmarkConfig::new(1, vec![vec![0.1], vec![2.0]]).unwrap();
        let sched = ControlSchedule::new(1, vec![(Generator::X, 0.0), (Generator::Y, 0.2)]).unwrap();
        let r = flow_config(&sched, &cfg, &FlowOptions::default()).unwrap();
        assert_eq!(
            r.failure,
            Some(FlowFailure { status: FlowStatus::Escaped, leg: 1, landmark: 1 })
        );
        assert!(order_preserved(&cfg, &r).is_err());
    }

    #[test]
    fn reversal_and_semigroup() {
        let cfg = LandmarkConfig::new(3, vec![vec![0.1, 0.2, -0.3], vec![-0.4, 0.5, 0.0]]).unwrap();
        let sched = ControlSchedule::alternating(3, &[0.3, 0.8, -0.5, -1.1]).unwrap();
        let opts = FlowOptions::default();
        let fwd = flow_config(&sched, &cfg, &opts).unwrap();
        assert!(fwd.is_ok());
        let back = run_schedule(&GeneratorFlows::new(3).unwrap(), &sched.reversed(), &fwd.points, &opts).unwrap();
        for (p, q) in back.points.iter().zip(cfg.points()) {
            for (a, b) in p.iter().zip(q) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        let once = ControlSchedule::new(3, vec![(Generator::Y, 1.0)]).unwrap();
        let twice = ControlSchedule::new(3, vec![(Generator::Y, 0.4), (Generator::Y, 0.6)]).unwrap();
        let a = flow_config(&once, &cfg, &opts).unwrap();
        let b = flow_config(&twice, &cfg, &opts).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            for (x, y) in p.iter().zip(q) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn f32_flows() {
        let f = GeneratorFlows::<f32>::new(2).unwrap();
        let opts = FlowOptions { rtol: 1e-5, atol: 1e-6, ..FlowOptions::default() };
        let r = flow_point(&f.y, 0.5f32, &[0.3, 0.4], &opts);
        let r64 = flow_point(&GeneratorFlows::<f64>::new(2).unwrap().y, 0.5, &[0.3, 0.4], &FlowOptions::default());
        assert_eq!(r.status, FlowStatus::Ok);
        assert!((r.point[0] as f64 - r64.point[0]).abs() < 1e-4);
    }

    #[test]
    fn simplify_merges_legs() {
        let s = ControlSchedule::new(
            2,
            vec![(Generator::X, 1.0), (Generator::X, -1.0), (Generator::Y, 0.5), (Generator::Y, 0.25), (Generator::X, 0.0)],
        )
        .unwrap();
        assert_eq!(s.simplified().legs(), &[(Generator::Y, 0.75)]);
        assert!(ControlSchedule::new(2, vec![(Generator::X, f64::NAN)]).is_err());
    }
}
