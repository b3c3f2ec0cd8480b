//! Command-line front end. Every command prints one machine-readable
//! record (JSON object by default, CSV with --format csv) and exits with
//! 0 on success, 2 on a specification error, 3 on a numerical failure and
//! 4 when a validation verdict fails.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::genmat::{generator_matrix, ProcessSpec, StateSpace};
use crate::magnus::{
    self, norm_integral, transition_matrix, MethodUsed, QuadratureConfig, SolveMethod, PI_SAFETY,
};
use crate::mc::{self, Scheme, SimConfig};
use crate::polyalg::{enumerate_basis, MultiIndex};
use crate::processes;

pub const EXIT_SPEC_ERROR: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERDICT: i32 = 4;

#[derive(Parser)]
#[command(
    name = "polymag",
    version,
    about = "Moments of time-inhomogeneous polynomial jump-diffusions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Conditional moment E[X_t^k | X_s = x]
    Moment(MomentArgs),
    /// Generator matrix H_t on the monomial basis
    Matrix(MatrixArgs),
    /// Magnus terms and transition matrix P_{s,t}
    Magnus(MagnusArgs),
    /// Norm integral against the pi convergence gate
    Normcheck(NormcheckArgs),
    /// Cross-method validation suite
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SpecSource {
    /// Path to a spec document (alternative to --builtin)
    spec: Option<PathBuf>,
    /// Catalog process name
    #[arg(long, conflicts_with = "spec")]
    builtin: Option<String>,
    /// Builtin parameter, repeatable: --param key=value
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct CommonOut {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct MomentArgs {
    #[command(flatten)]
    source: SpecSource,
    #[arg(long, default_value_t = 0.0)]
    s: f64,
    #[arg(long)]
    t: f64,
    /// Initial state, comma-separated coordinates
    #[arg(long)]
    x: String,
    /// Moment multi-index, comma-separated exponents
    #[arg(long)]
    k: String,
    #[arg(long, default_value = "auto")]
    method: String,
    /// Quadrature relative tolerance
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    out: CommonOut,
}

#[derive(Args)]
struct MatrixArgs {
    #[command(flatten)]
    source: SpecSource,
    #[arg(long)]
    t: f64,
    /// Basis degree bound
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[command(flatten)]
    out: CommonOut,
}

#[derive(Args)]
struct MagnusArgs {
    #[command(flatten)]
    source: SpecSource,
    #[arg(long, default_value_t = 0.0)]
    s: f64,
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    out: CommonOut,
}

#[derive(Args)]
struct NormcheckArgs {
    #[command(flatten)]
    source: SpecSource,
    #[arg(long, default_value_t = 0.0)]
    s: f64,
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    out: CommonOut,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    source: SpecSource,
    #[arg(long, default_value_t = 0.0)]
    s: f64,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    x: String,
    /// Check all moments with |k| up to this bound
    #[arg(long, default_value_t = 2)]
    kmax: usize,
    #[arg(long, default_value_t = 20000)]
    paths: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    out: CommonOut,
}

fn load_spec(source: &SpecSource) -> Result<ProcessSpec> {
    match (&source.spec, &source.builtin) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::SpecInvalid(format!("cannot read {}: {e}", path.display())))?;
            if !source.params.is_empty() {
                return Err(Error::SpecInvalid(
                    "--param only applies to --builtin".into(),
                ));
            }
            processes::parse_spec(&text)
        }
        (None, Some(name)) => {
            let mut params = BTreeMap::new();
            for p in &source.params {
                let (k, v) = p.split_once('=').ok_or_else(|| {
                    Error::SpecInvalid(format!("--param needs key=value, got '{p}'"))
                })?;
                params.insert(k.trim().to_string(), v.trim().to_string());
            }
            processes::builtin(name, &params)
        }
        _ => Err(Error::SpecInvalid(
            "give exactly one of a spec file or --builtin".into(),
        )),
    }
}

fn parse_csv_f64(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|w| {
            w.trim()
                .parse()
                .map_err(|_| Error::SpecInvalid(format!("bad {what} entry '{w}'")))
        })
        .collect()
}

fn parse_multi_index(text: &str, d: usize) -> Result<MultiIndex> {
    let v: Vec<u32> = text
        .split(',')
        .map(|w| {
            w.trim()
                .parse()
                .map_err(|_| Error::SpecInvalid(format!("bad multi-index entry '{w}'")))
        })
        .collect::<Result<_>>()?;
    if v.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: v.len(),
        });
    }
    Ok(MultiIndex(v))
}

/// Human-readable monomial name for a basis exponent vector.
fn monomial_label(k: &MultiIndex) -> String {
    if k.is_zero() {
        return "1".into();
    }
    k.0.iter()
        .enumerate()
        .filter(|(_, &e)| e > 0)
        .map(|(i, &e)| {
            if e == 1 {
                format!("x{}", i + 1)
            } else {
                format!("x{}^{e}", i + 1)
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    let rows: Vec<Value> = (0..m.nrows())
        .map(|i| Value::from((0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<f64>>()))
        .collect();
    Value::from(rows)
}

/// Flatten a JSON object into dotted-key scalar columns for CSV output.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, val) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, val, out);
            }
        }
        Value::Array(items) => {
            let cell = items
                .iter()
                .map(|x| match x {
                    Value::Array(row) => row
                        .iter()
                        .map(|y| y.to_string())
                        .collect::<Vec<_>>()
                        .join(";"),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(";");
            out.push((prefix.to_string(), cell));
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn emit(record: &Value, format: Format) {
    match format {
        Format::Json => println!("{}", serde_json::to_string(record).unwrap()),
        Format::Csv => {
            let mut cells = Vec::new();
            flatten("", record, &mut cells);
            let header: Vec<&str> = cells.iter().map(|(k, _)| k.as_str()).collect();
            let values: Vec<String> = cells
                .iter()
                .map(|(_, v)| {
                    if v.contains(',') || v.contains('"') {
                        format!("\"{}\"", v.replace('"', "\"\""))
                    } else {
                        v.clone()
                    }
                })
                .collect();
            println!("{}", header.join(","));
            println!("{}", values.join(","));
        }
    }
}

fn transition_diagnostics(t: &magnus::TransitionResult) -> Value {
    json!({
        "method": t.method.to_string(),
        "subintervals": t.subintervals,
        "norm_integral": t.norm_integral,
        "residual": t.residual,
    })
}

fn cmd_moment(args: &MomentArgs) -> Result<Value> {
    let spec = load_spec(&args.source)?;
    let x = parse_csv_f64(&args.x, "state")?;
    let kidx = parse_multi_index(&args.k, spec.d)?;
    let method: SolveMethod = args.method.parse()?;
    let q = QuadratureConfig {
        rtol: args.tol,
        ..QuadratureConfig::default()
    };
    let start = Instant::now();
    let r = magnus::moment(&spec, args.s, args.t, &x, &kidx, method, &q)?;
    Ok(json!({
        "command": "moment",
        "inputs": {
            "s": args.s, "t": args.t, "x": x, "k": kidx.0,
            "method": args.method, "tol": args.tol,
        },
        "result": { "moment": r.value },
        "diagnostics": {
            "method": r.transition.method.to_string(),
            "subintervals": r.transition.subintervals,
            "norm_integral": r.transition.norm_integral,
            "residual": r.transition.residual,
            "outside_state_space": r.outside_state_space,
        },
        "wall_time_s": start.elapsed().as_secs_f64(),
    }))
}

fn cmd_matrix(args: &MatrixArgs) -> Result<Value> {
    let spec = load_spec(&args.source)?;
    let start = Instant::now();
    let g = generator_matrix(&spec, args.t, args.k)?;
    let labels: Vec<String> = g.basis.order().iter().map(monomial_label).collect();
    Ok(json!({
        "command": "matrix",
        "inputs": { "t": args.t, "k": args.k },
        "result": { "basis": labels, "h": matrix_json(&g.entries) },
        "diagnostics": { "dimension": g.basis.len() },
        "wall_time_s": start.elapsed().as_secs_f64(),
    }))
}

fn cmd_magnus(args: &MagnusArgs) -> Result<Value> {
    let spec = load_spec(&args.source)?;
    let q = QuadratureConfig {
        rtol: args.tol,
        ..QuadratureConfig::default()
    };
    let start = Instant::now();
    let terms = magnus::magnus_terms(&spec, args.s, args.t, args.k, &q)?;
    let transition = transition_matrix(&spec, args.s, args.t, args.k, SolveMethod::Auto, &q)?;
    Ok(json!({
        "command": "magnus",
        "inputs": { "s": args.s, "t": args.t, "k": args.k, "tol": args.tol },
        "result": {
            "omega1": matrix_json(&terms.omega1),
            "omega2": matrix_json(&terms.omega2),
            "omega3": matrix_json(&terms.omega3),
            "transition": matrix_json(&transition.matrix),
        },
        "diagnostics": transition_diagnostics(&transition),
        "wall_time_s": start.elapsed().as_secs_f64(),
    }))
}

fn cmd_normcheck(args: &NormcheckArgs) -> Result<Value> {
    let spec = load_spec(&args.source)?;
    let q = QuadratureConfig {
        rtol: args.tol,
        ..QuadratureConfig::default()
    };
    let start = Instant::now();
    let integral = norm_integral(&spec, args.s, args.t, args.k, &q)?;
    let gate = std::f64::consts::PI * PI_SAFETY;
    let recommended = ((integral / gate).ceil() as usize).max(1);
    Ok(json!({
        "command": "normcheck",
        "inputs": { "s": args.s, "t": args.t, "k": args.k, "tol": args.tol },
        "result": {
            "norm_integral": integral,
            "gate": gate,
            "verdict": if integral < gate { "pass" } else { "subdivide" },
            "recommended_subintervals": recommended,
        },
        "diagnostics": {},
        "wall_time_s": start.elapsed().as_secs_f64(),
    }))
}

/// All multi-indices with 1 <= |k| <= kmax in graded-lex order.
fn indices_up_to(d: usize, kmax: usize) -> Result<Vec<MultiIndex>> {
    let basis = enumerate_basis(d, kmax)?;
    Ok((1..basis.len())
        .map(|i| basis.order()[i].clone())
        .collect())
}

fn cmd_validate(args: &ValidateArgs) -> Result<(Value, bool)> {
    let spec = load_spec(&args.source)?;
    let x = parse_csv_f64(&args.x, "state")?;
    if args.kmax > spec.m {
        return Err(Error::SpecInvalid(format!(
            "kmax={} exceeds the spec bound m={}",
            args.kmax, spec.m
        )));
    }
    let q = QuadratureConfig::default();
    let start = Instant::now();

    let scheme = match spec.state_space {
        StateSpace::Full => Scheme::Euler,
        _ => Scheme::EulerProjected,
    };
    let cfg = SimConfig {
        n_paths: args.paths,
        n_steps: 500,
        seed: args.seed,
        scheme,
    };
    let samples = mc::simulate_paths(&spec, args.s, args.t, &x, &cfg)?;
    let in_space = mc::all_in_state_space(&spec.state_space, &samples);
    let space_ok = scheme == Scheme::Euler || in_space;

    let mut rows = Vec::new();
    let mut all_ok = space_ok;
    for kidx in indices_up_to(spec.d, args.kmax)? {
        let m_auto = magnus::moment(&spec, args.s, args.t, &x, &kidx, SolveMethod::Auto, &q)?;
        let m_ode = magnus::moment(&spec, args.s, args.t, &x, &kidx, SolveMethod::Ode, &q)?;
        let est = mc::moment_from_samples(&samples, &kidx);
        let scale = m_auto.value.abs().max(1.0);
        let ode_ok = (m_auto.value - m_ode.value).abs() <= 1e-6 * scale;
        let mc_ok = (m_auto.value - est.mean).abs() <= 4.0 * est.stderr + 0.01;
        all_ok &= ode_ok && mc_ok;
        rows.push(json!({
            "k": kidx.0,
            "matrix": m_auto.value,
            "ode": m_ode.value,
            "mc": est.mean,
            "mc_stderr": est.stderr,
            "ode_agrees": ode_ok,
            "mc_agrees": mc_ok,
            "method": m_auto.transition.method.to_string(),
        }));
    }

    // evolution-property spot checks at the requested interval
    let k = args.kmax.max(1);
    let mid = 0.5 * (args.s + args.t);
    let p_ss = transition_matrix(&spec, args.s, args.s, k, SolveMethod::Auto, &q)?;
    let n = p_ss.matrix.nrows();
    let identity_ok = (&p_ss.matrix - DMatrix::<f64>::identity(n, n)).amax() == 0.0;
    let p_st = transition_matrix(&spec, args.s, args.t, k, SolveMethod::Auto, &q)?;
    let p_sm = transition_matrix(&spec, args.s, mid, k, SolveMethod::Auto, &q)?;
    let p_mt = transition_matrix(&spec, mid, args.t, k, SolveMethod::Auto, &q)?;
    let comp_defect = (&p_sm.matrix * &p_mt.matrix - &p_st.matrix).amax();
    let composition_ok = comp_defect <= 1e-6;
    // column 0 is the image of the constant monomial and must stay e_0
    let constant_defect = (0..n)
        .map(|i| (p_st.matrix[(i, 0)] - if i == 0 { 1.0 } else { 0.0 }).abs())
        .fold(0.0_f64, f64::max);
    let constants_ok = constant_defect <= 1e-12;
    all_ok &= identity_ok && composition_ok && constants_ok;

    let record = json!({
        "command": "validate",
        "inputs": {
            "s": args.s, "t": args.t, "x": x, "kmax": args.kmax,
            "paths": args.paths, "seed": args.seed,
        },
        "result": {
            "moments": rows,
            "invariants": {
                "identity_at_s": identity_ok,
                "composition_defect": comp_defect,
                "composition": composition_ok,
                "constant_defect": constant_defect,
                "constants_preserved": constants_ok,
                "state_space_preserved": space_ok,
            },
            "verdict": if all_ok { "pass" } else { "fail" },
        },
        "diagnostics": transition_diagnostics(&p_st),
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    Ok((record, all_ok))
}

fn configure_threads() {
    if let Ok(v) = std::env::var("POLYMAG_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// Parse argv, run the selected command, print its record, return the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    configure_threads();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version with success exit codes
            let _ = e.print();
            return if e.use_stderr() { EXIT_SPEC_ERROR } else { 0 };
        }
    };
    let (result, format) = match &cli.command {
        Command::Moment(a) => (cmd_moment(a), a.out.format),
        Command::Matrix(a) => (cmd_matrix(a), a.out.format),
        Command::Magnus(a) => (cmd_magnus(a), a.out.format),
        Command::Normcheck(a) => (cmd_normcheck(a), a.out.format),
        Command::Validate(a) => match cmd_validate(a) {
            Ok((record, ok)) => {
                emit(&record, a.out.format);
                return if ok { 0 } else { EXIT_VERDICT };
            }
            Err(e) => (Err(e), a.out.format),
        },
    };
    match result {
        Ok(record) => {
            emit(&record, format);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_spec_error() {
                EXIT_SPEC_ERROR
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

// keep MethodUsed referenced for serde derive users of this module
#[allow(unused)]
fn _method_used_is_serializable(m: MethodUsed) -> String {
    serde_json::to_string(&m).unwrap()
}
