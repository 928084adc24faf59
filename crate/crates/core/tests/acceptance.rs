//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always show. The process
//! exits non-zero if any criterion deviates from its expected outcome.

use std::time::{Duration, Instant};

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use landmark_control::bracketgen::{
    closure_search, monomial_field, monomial_ladder_d1, monomial_ladder_d2, ClosureOptions, Generators, LadderBuilder,
};
use landmark_control::flow::{flow_point, run_schedule, order_preserved, CompiledField, ControlSchedule, FlowOptions, FlowResult, FlowStatus, Generator, GeneratorFlows};
use landmark_control::identities::identity_suite;
use landmark_control::io;
use landmark_control::landmark::{lift_evaluate, lifted_bracket_check, same_order_component, vandermonde_det, LandmarkConfig};
use landmark_control::planner::{resimulate, solve, SteeringProblem};
use landmark_control::polyvec::{generator_pair, Monomial, PolyVectorField, Polynomial};
use landmark_control::scalar::determinant;
use landmark_control::{Error, ExactConfig, Rational, RationalField};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn random_rational(rng: &mut ChaCha8Rng) -> Rational {
    q(rng.random_range(-24..=24), rng.random_range(1..=8))
}

fn random_exact_config(rng: &mut ChaCha8Rng, n: usize, d: usize) -> ExactConfig {
    loop {
        let pts: Vec<Vec<Rational>> = (0..n).map(|_| (0..d).map(|_| random_rational(rng)).collect()).collect();
        if let Ok(cfg) = LandmarkConfig::new(d, pts) {
            return cfg;
        }
    }
}

fn random_field(rng: &mut ChaCha8Rng, d: usize, max_degree: u32) -> RationalField {
    let comps = (0..d)
        .map(|_| {
            let terms = (0..rng.random_range(1..=3)).map(|_| {
                let deg = rng.random_range(0..=max_degree);
                let mut e = vec![0u32; d];
                for _ in 0..deg {
                    e[rng.random_range(0..d)] += 1;
                }
                (Monomial::new(e), random_rational(rng))
            });
            Polynomial::from_terms(d, terms.collect::<Vec<_>>()).unwrap()
        })
        .collect();
    PolyVectorField::new(comps).unwrap()
}

/// Unit-diameter configuration, landmarks at least a tenth of the diameter apart.
fn unit_config(rng: &mut ChaCha8Rng, n: usize, d: usize, sorted: bool) -> LandmarkConfig<f64> {
    loop {
        let mut pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-0.5..0.5)).collect()).collect();
        if sorted {
            pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
        }
        let c = LandmarkConfig::new(d, pts.clone()).unwrap();
        let diam = c.diameter();
        if c.min_pairwise_distance() < 0.1 * diam {
            continue;
        }
        let pts = pts.into_iter().map(|p| p.into_iter().map(|x| x / diam).collect()).collect();
        return LandmarkConfig::new(d, pts).unwrap();
    }
}

const PLANE_ERRATUM: &str = "[iz d, iz^3 d] = -z^3 d";
const TRIPLE_ERRATUM: &str = "[x^{j+1} d_j, [x^{j+1} d_j, [x^{j+1} d_j, Y]]] = 6 (x^{j+1})^3 d_{j+1} - 16 (x^{j+1})^2 x^j d_j";
const COMBINATION_ERRATUM: &str =
    "[x^{j+1} d_j, [x^{j+1} d_j, [x^{j+1} d_j, Y]]] + 8 [(x^{j+1})^2 d_j, (x^j)^2 d_j] = 6 (x^{j+1})^3 d_{j+1}";
const SHIFT_ERRATUM: &str = "[x^{j+1} d_{j+1} + x^j d_{j+2}, x^{j+2} d_{j+1} + x^j d_{j+3}] = (x^j - x^{j+2}) d_{j+1}";

/// Displayed identities whose printed right-hand side is false, per dimension.
fn known_errata(d: usize) -> Vec<String> {
    let mut v: Vec<String> = match d {
        1 => vec![],
        2 => vec![PLANE_ERRATUM.into(), format!("{PLANE_ERRATUM} (real images)")],
        3 => vec![TRIPLE_ERRATUM.into(), COMBINATION_ERRATUM.into(), SHIFT_ERRATUM.into()],
        _ => vec![TRIPLE_ERRATUM.into(), COMBINATION_ERRATUM.into()],
    };
    v.sort();
    v
}

// 1. Bracket identities, exact. Also returns whether the computed brackets match
// the corrected forms with exactly the known errata.
fn identities() -> (Outcome, bool) {
    let start = Instant::now();
    let (mut checks, mut families) = (0, 0);
    let mut mismatched = Vec::new();
    let mut errata_ok = true;
    let mut failing = Vec::new();
    for d in 1..=5 {
        let report = identity_suite(d).unwrap();
        checks += report.checks.len();
        families += report.families().len();
        for c in report.checks.iter().filter(|c| !c.passed()) {
            mismatched.push(format!("d={d} {} [{}]", c.name, c.instance));
        }
        let mut errata: Vec<String> = report.errata().into_iter().map(String::from).collect();
        errata.sort();
        errata_ok &= errata == known_errata(d);
        failing.extend(errata.into_iter().map(|e| format!("d={d}: {e}")));
    }
    let elapsed = start.elapsed();
    let corrected_ok = mismatched.is_empty() && elapsed < Duration::from_secs(10);
    let mut detail = format!(
        "{checks} instances of {families} identities over d=1..5 in {elapsed:.2?}; false as printed: {}; all hold after correction: {corrected_ok}",
        failing.len()
    );
    for f in &failing {
        detail.push_str(&format!("\n     false as printed, {f}"));
    }
    for m in &mismatched {
        detail.push_str(&format!("\n     computed value differs, {m}"));
    }
    (outcome(failing.is_empty() && corrected_ok, detail), corrected_ok && errata_ok)
}

// 2. Lifted bracket equals bracket of lifts.
fn homomorphism() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = 0;
    let mut total = 0;
    for d in 1..=3 {
        for _ in 0..50 {
            let cfg = random_exact_config(&mut rng, 3, d);
            let x = random_field(&mut rng, d, 3);
            let y = random_field(&mut rng, d, 3);
            total += 1;
            if !lifted_bracket_check(&x, &y, &cfg).unwrap() {
                failures += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(failures == 0 && elapsed < Duration::from_secs(60), format!("{}/{total} pairs exact, n=3, d=1..3, in {elapsed:.2?}", total - failures))
}

// 3. Lifted evaluation of 1, x, ..., x^{n-1} on the line is a Vandermonde matrix.
fn vandermonde() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ok = 0;
    for trial in 0..20 {
        let n = 2 + trial % 5;
        let cfg = random_exact_config(&mut rng, n, 1);
        let fields: Vec<RationalField> = (0..n).map(|a| monomial_field(1, 0, a as u32, 0)).collect();
        let det = determinant(&lift_evaluate(&fields, &cfg).unwrap().to_rows());
        let xs: Vec<Rational> = cfg.points().iter().map(|p| p[0].clone()).collect();
        // oracle: the product formula written out directly
        let mut product = Rational::one();
        for i in 0..n {
            for j in i + 1..n {
                product *= &xs[j] - &xs[i];
            }
        }
        if !det.is_zero() && det.abs() == product.abs() && vandermonde_det(&xs).unwrap() == product {
            ok += 1;
        }
    }
    outcome(ok == 20, format!("{ok}/20 configurations, n = 2..6, exact"))
}

fn certificates(seed: u64) -> (Vec<(usize, usize, usize, usize, Duration)>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for &(d, n) in &[(1, 2), (1, 3), (1, 5), (2, 2), (2, 4), (3, 2), (3, 3), (4, 2)] {
        let cfg = random_exact_config(&mut rng, n, d);
        let start = Instant::now();
        let cert = closure_search(&cfg, &ClosureOptions::for_landmarks(n)).unwrap();
        let rank = if cert.success { cert.achieved_rank } else { 0 };
        rows.push((d, n, rank, cert.target_rank, start.elapsed()));
        files.push(io::to_string_pretty(&io::certificate_to_value(&cert)));
    }
    (rows, files)
}

// 4. Full-rank certificates within default bounds.
fn controllability(rows: &[(usize, usize, usize, usize, Duration)]) -> Outcome {
    let ok = rows.iter().all(|&(_, _, r, t, e)| r == t && e < Duration::from_secs(300));
    let detail = rows
        .iter()
        .map(|(d, n, r, t, e)| format!("(d={d},n={n}) {r}/{t} {e:.1?}"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(ok, detail)
}

/// Real field of `w z^a d` in the plane, expanded binomially: `w` is 1 or i.
fn planar_monomial(a: u32, times_i: bool) -> RationalField {
    // z^a = sum_m C(a, m) x^{a-m} (i y)^m
    let mut re = Polynomial::zero(2);
    let mut im = Polynomial::zero(2);
    let mut binom = Rational::one();
    for m in 0..=a {
        let term = Polynomial::monomial(binom.clone(), Monomial::new(vec![a - m, m]));
        match m % 4 {
            0 => re = re.add(&term),
            1 => im = im.add(&term),
            2 => re = re.sub(&term),
            _ => im = im.sub(&term),
        }
        binom *= q((a - m) as i64, (m + 1) as i64);
    }
    let (u, v) = if times_i { (Polynomial::zero(2).sub(&im), re) } else { (re, im) };
    PolyVectorField::new(vec![u, v]).unwrap()
}

// 5. Monomial ladders, checked by replaying each expression from the generators.
fn ladders() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    let g1 = Generators::<Rational>::new(1).unwrap();
    for a in 0..=8 {
        let l = monomial_ladder_d1::<Rational>(a);
        checked += 1;
        if l.constant.is_zero() || l.expr.replay(&g1) != monomial_field(1, 0, a, 0).scale(&l.constant) {
            bad.push(format!("d=1 a={a}"));
        }
    }
    let g2 = Generators::<Rational>::new(2).unwrap();
    for parity in 0..=1u8 {
        for a in 0..=6 {
            let l = monomial_ladder_d2::<Rational>(parity, a).unwrap();
            checked += 1;
            if l.constant.is_zero() || l.expr.replay(&g2) != planar_monomial(a, parity == 1).scale(&l.constant) {
                bad.push(format!("d=2 parity={parity} a={a}"));
            }
        }
    }
    let g3 = Generators::<Rational>::new(3).unwrap();
    let mut builder = LadderBuilder::<Rational>::new(3).unwrap();
    for j in 0..3 {
        for k in 0..3 {
            for a in 0..=6 {
                let l = builder.ladder(j, k, a);
                checked += 1;
                if l.constant.is_zero() || l.expr.replay(&g3) != monomial_field(3, j, a, k).scale(&l.constant) {
                    bad.push(format!("d=3 j={} k={} a={a}", j + 1, k + 1));
                }
            }
        }
    }
    let detail = if bad.is_empty() { format!("{checked} ladders exact") } else { format!("failed: {}", bad.join(", ")) };
    outcome(bad.is_empty(), detail)
}

// 6. Flow oracles: cubic closed form against the adaptive integrator; constant fields.
fn flow_oracle() -> Outcome {
    let (x, y) = generator_pair::<Rational>(1).unwrap();
    let generic = CompiledField::<f64>::new(&y).without_closed_form();
    let opts = FlowOptions::default();
    let mut worst: f64 = 0.0;
    for a in 0..20 {
        let x0 = -2.0 + 4.0 * (a as f64 + 0.5) / 20.0;
        for b in 0..20 {
            // t spans both directions with 2 x0^2 |t| <= 0.8
            let t = 0.8 / (2.0 * x0 * x0) * (-1.0 + 2.0 * b as f64 / 19.0);
            let exact = x0 / (1.0 - 2.0 * x0 * x0 * t).sqrt();
            let r = flow_point(&generic, t, &[x0], &opts);
            if r.status != FlowStatus::Ok {
                worst = f64::INFINITY;
            }
            worst = worst.max(((r.point[0] - exact) / exact).abs());
        }
    }
    let mut constant_ok = true;
    let cx = CompiledField::<f64>::new(&x);
    for &(p, t) in &[(0.25, 0.5), (-1.5, 2.25), (3.0, -0.75)] {
        let r = flow_point(&cx, t, &[p], &opts);
        constant_ok &= io::format_float(r.point[0]) == io::format_float(p + t);
    }
    let (x2, _) = generator_pair::<Rational>(3).unwrap();
    let r = flow_point(&CompiledField::<f64>::new(&x2), 0.5, &[0.25, -1.0, 2.0], &opts);
    constant_ok &= r.point == vec![0.75, -1.0, 2.0];
    outcome(worst <= 1e-9 && constant_ok, format!("max relative error {worst:.2e} on 20x20 grid; constant fields exact: {constant_ok}"))
}

fn steering_runs() -> (Vec<(usize, usize, usize)>, Vec<String>, Duration) {
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for &(n, d) in &[(2, 1), (3, 1), (2, 2), (3, 2), (2, 3)] {
        let mut ok = 0;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 * n as u64 + 100 * d as u64 + seed);
            let source = unit_config(&mut rng, n, d, d == 1);
            let target = unit_config(&mut rng, n, d, d == 1);
            let mut prob = SteeringProblem::new(source, target).unwrap();
            prob.seed = seed;
            prob.continuation = false;
            let sol = solve(&prob).unwrap();
            let (err, status) = resimulate(&sol.schedule, &prob).unwrap();
            if sol.converged && status == FlowStatus::Ok && err < 1e-6 {
                ok += 1;
            }
            let run = run_schedule(&GeneratorFlows::new(d).unwrap(), &sol.schedule, prob.source.points(), &FlowOptions::default()).unwrap();
            files.push(io::to_string_pretty(&io::solution_to_value(&sol, &run.points)));
        }
        rows.push((n, d, ok));
    }
    (rows, files, start.elapsed())
}

// 7. Seeded steering problems, direct shooting only.
fn steering(rows: &[(usize, usize, usize)], elapsed: Duration) -> Outcome {
    let ok = rows.iter().all(|&(_, _, c)| c >= 8) && elapsed < Duration::from_secs(900);
    let detail = rows.iter().map(|(n, d, c)| format!("(n={n},d={d}) {c}/10")).collect::<Vec<_>>().join(", ");
    outcome(ok, format!("{detail}; {elapsed:.1?} total"))
}

// 8. Order on the line: flows preserve it, the planner refuses to change it.
fn line_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let flows = GeneratorFlows::<f64>::new(1).unwrap();
    let opts = FlowOptions::default();
    let (mut flowed, mut preserved) = (0, 0);
    for _ in 0..100 {
        let n = rng.random_range(2..=5);
        let cfg = unit_config(&mut rng, n, 1, false);
        let legs: Vec<(Generator, f64)> = (0..rng.random_range(1..=12))
            .map(|i| {
                // cubic legs short enough that most schedules complete; some still escape
                if i % 2 == 0 { (Generator::X, rng.random_range(-0.6..0.6)) } else { (Generator::Y, rng.random_range(-0.8..0.8)) }
            })
            .collect();
        let sched = ControlSchedule::new(1, legs).unwrap();
        let r: FlowResult<f64> = run_schedule(&flows, &sched, cfg.points(), &opts).unwrap();
        if r.is_ok() {
            flowed += 1;
            if order_preserved(&cfg, &r).unwrap() {
                preserved += 1;
            }
        }
    }
    let mut rejected = 0;
    for _ in 0..20 {
        let n = rng.random_range(2..=5);
        let source = unit_config(&mut rng, n, 1, true);
        let mut target = unit_config(&mut rng, n, 1, true);
        let pts = target.clone().into_points().into_iter().rev().collect();
        target = LandmarkConfig::new(1, pts).unwrap();
        assert!(!same_order_component(&source, &target).unwrap());
        let direct = matches!(SteeringProblem::new(source.clone(), target.clone()), Err(Error::OrderMismatch));
        let mut prob = SteeringProblem::new(source.clone(), source).unwrap();
        prob.target = target;
        if direct && matches!(solve(&prob), Err(Error::OrderMismatch)) {
            rejected += 1;
        }
    }
    outcome(
        flowed > 0 && preserved == flowed && rejected == 20,
        format!("order kept in {preserved}/{flowed} completed flows (of 100 schedules); {rejected}/20 mismatched problems rejected"),
    )
}

// 9. Byte-identical certificate and solution files on repeat runs.
fn determinism(first: &(Vec<String>, Vec<String>)) -> Outcome {
    let (_, certs) = certificates(4);
    let (_, sols, _) = steering_runs();
    let same_c = certs == first.0;
    let same_s = sols == first.1;
    outcome(same_c && same_s, format!("{} certificates identical: {same_c}; {} solutions identical: {same_s}", certs.len(), sols.len()))
}

fn main() {
    // libtest-style flags (e.g. from `cargo test -- --nocapture`) are ignored
    let mut results: Vec<(&str, bool, bool)> = Vec::new();
    let mut report = |label: &'static str, o: Outcome, expected: bool| {
        println!("{} {label}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((label, o.passed, expected));
    };
    // the displayed forms are known to contain errata: this line fails by analysis, and
    // the run is only accepted if the errata are exactly the known ones
    let (ids, analysis_holds) = identities();
    report("1 bracket identities as displayed", ids, !analysis_holds);
    report("2 lift homomorphism", homomorphism(), true);
    report("3 Vandermonde determinant", vandermonde(), true);
    let (cert_rows, cert_files) = certificates(4);
    report("4 controllability certificates", controllability(&cert_rows), true);
    report("5 monomial ladders", ladders(), true);
    report("6 flow oracle", flow_oracle(), true);
    let (steer_rows, steer_files, steer_time) = steering_runs();
    report("7 steering", steering(&steer_rows, steer_time), true);
    report("8 line order invariants", line_invariants(), true);
    report("9 determinism", determinism(&(cert_files, steer_files)), true);

    let unexpected: Vec<&str> = results.iter().filter(|(_, p, e)| p != e).map(|(l, _, _)| *l).collect();
    let passed = results.iter().filter(|(_, p, _)| *p).count();
    println!("{passed}/{} criteria pass", results.len());
    if !unexpected.is_empty() {
        println!("unexpected outcome: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
