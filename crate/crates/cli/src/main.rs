//! `landmark-control`: identity checks, rank certificates, steering and schedule replay.
//!
//! Exit codes: 0 success, 1 verification or convergence failure, 2 usage or input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use landmark_control::bracketgen::{closure_search, ClosureOptions, RankCertificate};
use landmark_control::flow::{flow_config, FlowOptions};
use landmark_control::identities::identity_suite;
use landmark_control::io::{self, ConfigInput};
use landmark_control::planner::{resimulate, solve};
use landmark_control::Scalar;

/// Environment variable holding the worker count for parallel sections.
const WORKERS_ENV: &str = "LANDMARK_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "landmark-control", version, about = "Bracket certificates and flow steering for landmark configurations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the ladder bracket identities for a dimension exactly.
    Identities {
        #[arg(long)]
        d: usize,
        /// Write the full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search iterated brackets for a full-rank certificate at a configuration.
    Certify {
        /// Configuration JSON: {"d": int, "points": [[...], ...]}.
        config: PathBuf,
        /// Longest bracket word (generators count as length one).
        #[arg(long, default_value_t = ClosureOptions::DEFAULT_MAX_DEPTH)]
        depth: usize,
        /// Largest polynomial degree kept; defaults to 2n + 3.
        #[arg(long)]
        degree: Option<u32>,
        #[arg(long, default_value_t = ClosureOptions::DEFAULT_JET_ORDER)]
        jet_order: usize,
        #[arg(long, default_value = "certificate.json")]
        out: PathBuf,
    },
    /// Solve a steering problem; writes <out>.solution.json and <out>.trajectory.csv.
    Steer {
        /// Problem JSON: {"source", "target", "legs"?, "tol"?, "seed"?}.
        problem: PathBuf,
        #[arg(long)]
        legs: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "steer")]
        out: String,
    },
    /// Replay a schedule on a configuration; writes <out>.flow.json and <out>.trajectory.csv.
    Flow {
        /// Schedule JSON: {"d": int, "legs": [["X"|"Y", duration], ...]}.
        schedule: PathBuf,
        config: PathBuf,
        #[arg(long, default_value = "flow")]
        out: String,
    },
}

enum Failure {
    /// Computation finished but did not verify or converge.
    Verification(String),
    /// Bad arguments, unreadable or malformed input, or unwritable output.
    Usage(String),
}

impl From<landmark_control::Error> for Failure {
    fn from(e: landmark_control::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

/// Inputs, resolved options and outputs of one run; enough to repeat it.
struct RunManifest {
    command: &'static str,
    options: Value,
    seed: Option<u64>,
    inputs: Vec<(String, String)>,
    outputs: Vec<String>,
}

impl RunManifest {
    fn new(command: &'static str) -> Self {
        RunManifest { command, options: json!({}), seed: None, inputs: Vec::new(), outputs: Vec::new() }
    }

    fn read_input(&mut self, path: &Path) -> Result<String, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push((path.display().to_string(), hex::encode(Sha256::digest(text.as_bytes()))));
        Ok(text)
    }

    fn write_output(&mut self, path: &str, contents: &str) -> CmdResult {
        fs::write(path, contents).map_err(|e| Failure::Usage(format!("cannot write {path}: {e}")))?;
        self.outputs.push(path.to_string());
        Ok(())
    }

    fn to_value(&self) -> Value {
        json!({
            "command": self.command,
            "options": self.options,
            "seed": self.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "inputs": self.inputs.iter().map(|(p, d)| json!({"path": p, "sha256": d})).collect::<Vec<_>>(),
            "outputs": self.outputs,
        })
    }

    fn save(mut self, path: &str) -> CmdResult {
        let text = io::to_string_pretty(&self.to_value());
        self.write_output(path, &text)
    }
}

fn manifest_path(out: &Path) -> String {
    let s = out.display().to_string();
    match s.strip_suffix(".json") {
        Some(stem) => format!("{stem}.manifest.json"),
        None => format!("{s}.manifest.json"),
    }
}

fn cmd_identities(d: usize, out: Option<PathBuf>) -> CmdResult {
    let report = identity_suite(d)?;
    for c in &report.checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        let inst = if c.instance.is_empty() { String::new() } else { format!(" [{}]", c.instance) };
        println!("{status} {}{inst}", c.name);
        if !c.printed_holds() && c.passed() {
            println!("     printed right-hand side does not hold; corrected: {}", c.expected());
        }
        if !c.passed() {
            println!("     computed: {}\n     expected: {}", c.computed, c.expected());
        }
    }
    let passed = report.checks.iter().filter(|c| c.passed()).count();
    println!(
        "d={d}: {passed}/{} checks passed across {} identities; {} printed forms corrected",
        report.checks.len(),
        report.families().len(),
        report.errata().len()
    );
    if let Some(out) = out {
        let mut m = RunManifest::new("identities");
        m.options = json!({"d": d});
        let path = out.display().to_string();
        m.write_output(&path, &io::to_string_pretty(&io::identity_report_to_value(&report)))?;
        m.save(&manifest_path(&out))?;
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Verification("identity check failed".into()))
    }
}

fn certify<S: Scalar>(
    cfg: &landmark_control::landmark::LandmarkConfig<S>,
    opts: &ClosureOptions,
) -> Result<(RankCertificate<S>, Value), Failure> {
    let cert = closure_search(cfg, opts)?;
    let v = io::certificate_to_value(&cert);
    Ok((cert, v))
}

fn cmd_certify(config: PathBuf, depth: usize, degree: Option<u32>, jet_order: usize, out: PathBuf) -> CmdResult {
    let mut m = RunManifest::new("certify");
    let text = m.read_input(&config)?;
    let input = io::parse_config(&text)?;
    let mut opts = ClosureOptions::for_landmarks(input.len());
    opts.max_depth = depth;
    if let Some(deg) = degree {
        opts.max_degree = deg;
    }
    opts.jet_order = jet_order;
    let (achieved, target, success, value) = match &input {
        ConfigInput::Exact(c) => {
            let (cert, v) = certify(c, &opts)?;
            (cert.achieved_rank, cert.target_rank, cert.success, v)
        }
        ConfigInput::Float(c) => {
            let (cert, v) = certify(c, &opts)?;
            (cert.achieved_rank, cert.target_rank, cert.success, v)
        }
    };
    println!("rank {achieved}/{target}: {}", if success { "full rank" } else { "not full rank" });
    m.options = json!({
        "max_depth": opts.max_depth,
        "max_degree": opts.max_degree,
        "jet_order": opts.jet_order,
        "exact": matches!(input, ConfigInput::Exact(_)),
    });
    let path = out.display().to_string();
    m.write_output(&path, &io::to_string_pretty(&value))?;
    m.save(&manifest_path(&out))?;
    if success {
        Ok(())
    } else {
        Err(Failure::Verification(format!("achieved rank {achieved} < {target}")))
    }
}

fn cmd_steer(problem: PathBuf, legs: Option<usize>, tol: Option<f64>, seed: Option<u64>, out: String) -> CmdResult {
    let mut m = RunManifest::new("steer");
    let text = m.read_input(&problem)?;
    let mut prob = match io::parse_problem(&text) {
        Err(landmark_control::Error::OrderMismatch) => {
            return Err(Failure::Usage(
                "source and target have different landmark orders; on the line, flows cannot change the order".into(),
            ))
        }
        other => other?,
    };
    if legs.is_some() {
        prob.legs = legs;
    }
    if let Some(t) = tol {
        prob.tol = t;
    }
    if let Some(s) = seed {
        prob.seed = s;
    }
    prob.validate()?;
    m.seed = Some(prob.seed);
    m.options = io::problem_to_value(&prob);

    let sol = solve(&prob)?;
    let run = flow_config(&sol.schedule, &prob.source, &FlowOptions { state_bound: prob.state_bound, ..FlowOptions::default() })?;
    let (check, _) = resimulate(&sol.schedule, &prob)?;
    println!(
        "{} after {} iterations: residual {} (re-simulated {}), {} legs, {} waypoint(s)",
        if sol.converged { "converged" } else { "not converged" },
        sol.iterations,
        io::format_float(sol.residual),
        io::format_float(check),
        sol.schedule.len(),
        sol.waypoints
    );
    m.write_output(&format!("{out}.solution.json"), &io::to_string_pretty(&io::solution_to_value(&sol, &run.points)))?;
    m.write_output(&format!("{out}.trajectory.csv"), &io::trajectory_csv(&run, prob.dim()))?;
    m.save(&format!("{out}.manifest.json"))?;
    if sol.converged {
        Ok(())
    } else {
        Err(Failure::Verification(format!("no schedule within tolerance {}", prob.tol)))
    }
}

fn cmd_flow(schedule: PathBuf, config: PathBuf, out: String) -> CmdResult {
    let mut m = RunManifest::new("flow");
    let sched = io::parse_schedule(&m.read_input(&schedule)?)?;
    let cfg = io::parse_config(&m.read_input(&config)?)?.to_f64();
    let opts = FlowOptions::default();
    m.options = json!({
        "rtol": io::float_value(opts.rtol),
        "atol": io::float_value(opts.atol),
        "state_bound": io::float_value(opts.state_bound),
    });
    let run = flow_config(&sched, &cfg, &opts)?;
    let status = match run.failure {
        None => json!("ok"),
        Some(f) => json!({
            "status": format!("{:?}", f.status).to_lowercase(),
            "leg": f.leg + 1,
            "landmark": f.landmark + 1,
        }),
    };
    let value = json!({"status": status, "final_points": io::points_to_value(&run.points)});
    m.write_output(&format!("{out}.flow.json"), &io::to_string_pretty(&value))?;
    m.write_output(&format!("{out}.trajectory.csv"), &io::trajectory_csv(&run, cfg.dim()))?;
    m.save(&format!("{out}.manifest.json"))?;
    match run.failure {
        None => {
            println!("ok: {} legs applied to {} landmarks", sched.len(), cfg.len());
            Ok(())
        }
        Some(f) => Err(Failure::Verification(format!(
            "{:?} on leg {}, landmark {}",
            f.status,
            f.leg + 1,
            f.landmark + 1
        ))),
    }
}

fn configure_workers() -> CmdResult {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| Failure::Usage(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_workers().and_then(|()| match cli.command {
        Command::Identities { d, out } => cmd_identities(d, out),
        Command::Certify { config, depth, degree, jet_order, out } => cmd_certify(config, depth, degree, jet_order, out),
        Command::Steer { problem, legs, tol, seed, out } => cmd_steer(problem, legs, tol, seed, out),
        Command::Flow { schedule, config, out } => cmd_flow(schedule, config, out),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
