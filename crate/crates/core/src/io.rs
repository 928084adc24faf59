//! JSON and CSV formats. Output is deterministic: object keys are sorted and
//! floats are written with 17 significant digits.

use std::str::FromStr;

use serde_json::{json, Map, Number, Value};

use crate::bracketgen::RankCertificate;
use crate::error::{Error, Result};
use crate::flow::{ControlSchedule, FlowResult, Generator};
use crate::identities::IdentityReport;
use crate::landmark::LandmarkConfig;
use crate::planner::{JacobianMethod, SteeringProblem, SteeringSolution};
use crate::scalar::{parse_rational, Scalar};
use crate::Rational;

/// Fixed 17-significant-digit form, e.g. `2.5000000000000000e0`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A float as a JSON number with fixed formatting; non-finite values become strings.
pub fn float_value(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&format_float(x)).expect("valid number literal"))
    } else {
        Value::String(x.to_string())
    }
}

/// Exact scalars as `"p/q"` strings, floating ones as fixed-format numbers.
pub fn scalar_value<S: Scalar>(x: &S) -> Value {
    if S::EXACT {
        Value::String(x.to_string())
    } else {
        float_value(x.to_f64())
    }
}

/// Serializes with sorted keys (serde_json's default map is ordered).
pub fn to_string_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values are serializable");
    s.push('\n');
    s
}

fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("invalid JSON: {e}")))
}

fn field<'a>(obj: &'a Value, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| Error::Parse(format!("missing field `{key}`")))
}

fn as_usize(v: &Value, what: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::Parse(format!("`{what}` must be a non-negative integer")))
}

fn as_f64(v: &Value, what: &str) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| Error::Parse(format!("`{what}` is not a number"))),
        Value::String(s) => parse_rational(s)
            .map(|q| Scalar::to_f64(&q))
            .ok_or_else(|| Error::Parse(format!("`{what}`: cannot parse `{s}`"))),
        _ => Err(Error::Parse(format!("`{what}` must be a number"))),
    }
}

/// A configuration read from JSON; exact when every coordinate is an integer or a `"p/q"` string.
#[derive(Clone, Debug, PartialEq)]
pub enum ConfigInput {
    Exact(LandmarkConfig<Rational>),
    Float(LandmarkConfig<f64>),
}

impl ConfigInput {
    pub fn dim(&self) -> usize {
        match self {
            ConfigInput::Exact(c) => c.dim(),
            ConfigInput::Float(c) => c.dim(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ConfigInput::Exact(c) => c.len(),
            ConfigInput::Float(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_f64(&self) -> LandmarkConfig<f64> {
        match self {
            ConfigInput::Exact(c) => c.to_f64(),
            ConfigInput::Float(c) => c.clone(),
        }
    }
}

fn is_exact_literal(v: &Value) -> bool {
    match v {
        Value::String(_) => true,
        Value::Number(n) => n.is_i64() || n.is_u64(),
        _ => false,
    }
}

fn exact_coordinate(v: &Value) -> Result<Rational> {
    match v {
        Value::String(s) => parse_rational(s).ok_or_else(|| Error::Parse(format!("cannot parse coordinate `{s}`"))),
        Value::Number(n) => parse_rational(&n.to_string()).ok_or_else(|| Error::Parse(format!("bad coordinate {n}"))),
        _ => Err(Error::Parse("coordinates must be numbers or strings".into())),
    }
}

pub fn config_from_value(v: &Value) -> Result<ConfigInput> {
    let d = as_usize(field(v, "d")?, "d")?;
    let pts = field(v, "points")?
        .as_array()
        .ok_or_else(|| Error::Parse("`points` must be an array".into()))?;
    let rows: Vec<&Vec<Value>> = pts
        .iter()
        .map(|p| p.as_array().ok_or_else(|| Error::Parse("each point must be an array".into())))
        .collect::<Result<_>>()?;
    if rows.iter().flat_map(|r| r.iter()).all(is_exact_literal) {
        let points = rows
            .iter()
            .map(|r| r.iter().map(exact_coordinate).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(ConfigInput::Exact(LandmarkConfig::new(d, points)?))
    } else {
        let points = rows
            .iter()
            .map(|r| r.iter().map(|x| as_f64(x, "coordinate")).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(ConfigInput::Float(LandmarkConfig::new(d, points)?))
    }
}

pub fn parse_config(text: &str) -> Result<ConfigInput> {
    config_from_value(&parse_json(text)?)
}

pub fn config_to_value<S: Scalar>(cfg: &LandmarkConfig<S>) -> Value {
    json!({
        "d": cfg.dim(),
        "points": cfg.points().iter().map(|p| p.iter().map(scalar_value).collect::<Vec<_>>()).collect::<Vec<_>>(),
    })
}

pub fn points_to_value(points: &[Vec<f64>]) -> Value {
    Value::Array(
        points
            .iter()
            .map(|p| Value::Array(p.iter().map(|&x| float_value(x)).collect()))
            .collect(),
    )
}

pub fn schedule_to_value(s: &ControlSchedule) -> Value {
    json!({
        "d": s.dim(),
        "legs": s.legs().iter().map(|(g, t)| json!([g.to_string(), float_value(*t)])).collect::<Vec<_>>(),
    })
}

pub fn schedule_from_value(v: &Value) -> Result<ControlSchedule> {
    let d = as_usize(field(v, "d")?, "d")?;
    let legs = field(v, "legs")?
        .as_array()
        .ok_or_else(|| Error::Parse("`legs` must be an array".into()))?
        .iter()
        .map(|leg| {
            let pair = leg.as_array().filter(|a| a.len() == 2).ok_or_else(|| {
                Error::Parse("each leg must be a [generator, duration] pair".into())
            })?;
            let g = match pair[0].as_str() {
                Some("X") => Generator::X,
                Some("Y") => Generator::Y,
                _ => return Err(Error::Parse("generator must be \"X\" or \"Y\"".into())),
            };
            Ok((g, as_f64(&pair[1], "duration")?))
        })
        .collect::<Result<Vec<_>>>()?;
    ControlSchedule::new(d, legs)
}

pub fn parse_schedule(text: &str) -> Result<ControlSchedule> {
    schedule_from_value(&parse_json(text)?)
}

/// Reads `{"source", "target", "legs"?, "tol"?, "seed"?, ...}`.
pub fn problem_from_value(v: &Value) -> Result<SteeringProblem> {
    let source = config_from_value(field(v, "source")?)?.to_f64();
    let target = config_from_value(field(v, "target")?)?.to_f64();
    let mut p = SteeringProblem::new(source, target)?;
    if let Some(x) = v.get("legs") {
        p.legs = Some(as_usize(x, "legs")?);
    }
    if let Some(x) = v.get("tol") {
        p.tol = as_f64(x, "tol")?;
    }
    if let Some(x) = v.get("seed") {
        p.seed = x.as_u64().ok_or_else(|| Error::Parse("`seed` must be a non-negative integer".into()))?;
    }
    if let Some(x) = v.get("state_bound") {
        p.state_bound = as_f64(x, "state_bound")?;
    }
    if let Some(x) = v.get("max_iterations") {
        p.max_iterations = as_usize(x, "max_iterations")?;
    }
    if let Some(x) = v.get("restarts") {
        p.restarts = as_usize(x, "restarts")?;
    }
    if let Some(x) = v.get("continuation") {
        p.continuation = x.as_bool().ok_or_else(|| Error::Parse("`continuation` must be a boolean".into()))?;
    }
    if let Some(x) = v.get("jacobian") {
        p.jacobian = match x.as_str() {
            Some("variational") => JacobianMethod::Variational,
            Some("finite_difference") => JacobianMethod::FiniteDifference,
            _ => return Err(Error::Parse("`jacobian` must be \"variational\" or \"finite_difference\"".into())),
        };
    }
    p.validate()?;
    Ok(p)
}

fn jacobian_name(m: JacobianMethod) -> &'static str {
    match m {
        JacobianMethod::Variational => "variational",
        JacobianMethod::FiniteDifference => "finite_difference",
    }
}

pub fn parse_problem(text: &str) -> Result<SteeringProblem> {
    problem_from_value(&parse_json(text)?)
}

pub fn problem_to_value(p: &SteeringProblem) -> Value {
    let mut m = Map::new();
    m.insert("source".into(), config_to_value(&p.source));
    m.insert("target".into(), config_to_value(&p.target));
    if let Some(l) = p.legs {
        m.insert("legs".into(), json!(l));
    }
    m.insert("tol".into(), float_value(p.tol));
    m.insert("seed".into(), json!(p.seed));
    m.insert("state_bound".into(), float_value(p.state_bound));
    m.insert("max_iterations".into(), json!(p.max_iterations));
    m.insert("restarts".into(), json!(p.restarts));
    m.insert("continuation".into(), json!(p.continuation));
    m.insert("jacobian".into(), json!(jacobian_name(p.jacobian)));
    Value::Object(m)
}

pub fn solution_to_value(sol: &SteeringSolution, final_points: &[Vec<f64>]) -> Value {
    json!({
        "schedule": schedule_to_value(&sol.schedule),
        "residual": float_value(sol.residual),
        "iterations": sol.iterations,
        "restarts": sol.restarts,
        "waypoints": sol.waypoints,
        "converged": sol.converged,
        "final_points": points_to_value(final_points),
    })
}

pub fn certificate_to_value<S: Scalar>(cert: &RankCertificate<S>) -> Value {
    json!({
        "config": config_to_value(&cert.config),
        "exact": S::EXACT,
        "max_depth": cert.options.max_depth,
        "max_degree": cert.options.max_degree,
        "jet_order": cert.options.jet_order,
        "expressions": cert.exprs.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
        "fields": cert.exprs.iter().map(|e| e.value().to_string()).collect::<Vec<_>>(),
        "matrix": cert.matrix.to_rows().iter().map(|r| r.iter().map(scalar_value).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "achieved_rank": cert.achieved_rank,
        "target_rank": cert.target_rank,
        "success": cert.success,
        "fields_kept": cert.fields_kept,
        "depth_reached": cert.depth_reached,
    })
}

pub fn identity_report_to_value(r: &IdentityReport) -> Value {
    json!({
        "d": r.dim,
        "passed": r.all_passed(),
        "errata": r.errata(),
        "checks": r.checks.iter().map(|c| json!({
            "identity": c.name,
            "instance": c.instance,
            "computed": c.computed.to_string(),
            "expected": c.expected().to_string(),
            "printed": c.printed.to_string(),
            "printed_holds": c.printed_holds(),
            "passed": c.passed(),
        })).collect::<Vec<_>>(),
    })
}

/// `leg,time,landmark,x1..xd`, ordered by leg, landmark, then time within the leg.
pub fn trajectory_csv(result: &FlowResult<f64>, dim: usize) -> String {
    let mut out = String::from("leg,time,landmark");
    for k in 1..=dim {
        out.push_str(&format!(",x{k}"));
    }
    out.push('\n');
    for (leg, per_landmark) in result.trajectory.iter().enumerate() {
        for (i, samples) in per_landmark.iter().enumerate() {
            for (t, x) in samples {
                out.push_str(&format!("{},{},{}", leg + 1, format_float(*t), i + 1));
                for v in x {
                    out.push(',');
                    out.push_str(&format_float(*v));
                }
                out.push('\n');
            }
        }
    }
    out
}
