//! Built-in process catalog and the text-format front door.

pub mod parser;

pub use parser::{parse_expression, parse_spec, parse_time_expression};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::genmat::{ProcessSpec, SamplerKind, StateSpace, TimeCoefficient, TimePolynomial};
use crate::polyalg::MultiIndex;

/// Strongly-typed constructors for the catalog processes.
pub mod builtin_typed {
    use super::*;

    fn base(
        d: usize,
        m: usize,
        horizon: f64,
        drift: Vec<TimePolynomial>,
        diffusion: Vec<Vec<TimePolynomial>>,
        jump_moments: BTreeMap<MultiIndex, TimePolynomial>,
        state_space: StateSpace,
        jump_sampler: Option<SamplerKind>,
    ) -> Result<ProcessSpec> {
        let spec = ProcessSpec {
            d,
            m,
            horizon,
            drift,
            diffusion,
            jump_moments,
            state_space,
            jump_sampler,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn one() -> TimePolynomial {
        TimePolynomial::constant(1, TimeCoefficient::constant(1.0))
    }

    /// dX = a(t) dt + dW on the real line.
    pub fn bm_drift(a: TimeCoefficient, m: usize, horizon: f64) -> Result<ProcessSpec> {
        base(
            1,
            m,
            horizon,
            vec![TimePolynomial::constant(1, a)],
            vec![vec![one()]],
            BTreeMap::new(),
            StateSpace::Full,
            None,
        )
    }

    /// dX = (theta t - X) dt + dW: mean reversion toward a moving target.
    pub fn ou_theta_t(theta: f64, m: usize, horizon: f64) -> Result<ProcessSpec> {
        let mut drift = TimePolynomial::constant(1, TimeCoefficient::Poly(vec![0.0, theta]));
        drift.add_term(MultiIndex(vec![1]), TimeCoefficient::constant(-1.0));
        base(
            1,
            m,
            horizon,
            vec![drift],
            vec![vec![one()]],
            BTreeMap::new(),
            StateSpace::Full,
            None,
        )
    }

    /// dX = t X dt + dW: the generators commute on degree 1 but not beyond.
    pub fn ou_tx(m: usize, horizon: f64) -> Result<ProcessSpec> {
        let drift = TimePolynomial::term(MultiIndex(vec![1]), TimeCoefficient::Poly(vec![0.0, 1.0]));
        base(
            1,
            m,
            horizon,
            vec![drift],
            vec![vec![one()]],
            BTreeMap::new(),
            StateSpace::Full,
            None,
        )
    }

    /// dX = a(t) dt + sqrt(X (b - X)) dW on [0, b].
    pub fn jacobi(a: TimeCoefficient, b: f64, m: usize, horizon: f64) -> Result<ProcessSpec> {
        if !(b > 0.0) {
            return Err(Error::BadParam {
                name: "b".into(),
                msg: "jacobi barrier level b must be positive".into(),
            });
        }
        let mut diff = TimePolynomial::term(MultiIndex(vec![1]), TimeCoefficient::constant(b));
        diff.add_term(MultiIndex(vec![2]), TimeCoefficient::constant(-1.0));
        base(
            1,
            m,
            horizon,
            vec![TimePolynomial::constant(1, a)],
            vec![vec![diff]],
            BTreeMap::new(),
            StateSpace::Box {
                lower: vec![0.0],
                upper: vec![b],
            },
            None,
        )
    }

    /// Jacobi dynamics on [0,1] with downward jumps: the kernel has density
    /// proportional to 1/|xi| on [a x, b x] and unit intensity, so the l-th
    /// moment is x^l (b^l - a^l) / (-l log(a/b)).
    pub fn jacobi_jumps(
        kappa: f64,
        theta: f64,
        a: f64,
        b: f64,
        m: usize,
        horizon: f64,
    ) -> Result<ProcessSpec> {
        if !(-1.0 <= a && a < b && b < 0.0) {
            return Err(Error::BadParam {
                name: "a,b".into(),
                msg: "jump support needs -1 <= a < b < 0".into(),
            });
        }
        if !(kappa >= 0.0) || !(0.0 <= theta && theta <= 1.0) {
            return Err(Error::BadParam {
                name: "kappa,theta".into(),
                msg: "need kappa >= 0 and theta in [0,1]".into(),
            });
        }
        let mut drift = TimePolynomial::constant(1, TimeCoefficient::constant(kappa * theta));
        drift.add_term(MultiIndex(vec![1]), TimeCoefficient::constant(-kappa));
        let mut diff = TimePolynomial::term(MultiIndex(vec![1]), TimeCoefficient::constant(1.0));
        diff.add_term(MultiIndex(vec![2]), TimeCoefficient::constant(-1.0));
        let log_ratio = (a / b).ln();
        let mut jump_moments = BTreeMap::new();
        for l in 2..=m {
            let coef = (b.powi(l as i32) - a.powi(l as i32)) / (-(l as f64) * log_ratio);
            jump_moments.insert(
                MultiIndex(vec![l as u32]),
                TimePolynomial::term(MultiIndex(vec![l as u32]), TimeCoefficient::constant(coef)),
            );
        }
        base(
            1,
            m,
            horizon,
            vec![drift],
            vec![vec![diff]],
            jump_moments,
            StateSpace::Box {
                lower: vec![0.0],
                upper: vec![1.0],
            },
            Some(SamplerKind::JacobiDown { a, b }),
        )
    }

    /// The pair (X, Y) with dX = a(t) dt + dW and Y = A0 + A1 X + A2 X^2:
    /// polynomial in two dimensions but not affine (quadratic diffusion
    /// block 4 A2^2 x1^2).
    pub fn affine_square(
        a0: f64,
        a1: f64,
        a2: f64,
        a: TimeCoefficient,
        m: usize,
        horizon: f64,
    ) -> Result<ProcessSpec> {
        let _ = a0; // enters only through the initial condition Y_s
        let e1 = MultiIndex(vec![1, 0]);
        let zero2 = MultiIndex::zero(2);
        let b1 = TimePolynomial::constant(2, a.clone());
        let mut b2 = TimePolynomial::constant(2, a.scale(a1 + a2));
        b2.add_term(e1.clone(), a.scale(2.0 * a2));

        let c11 = TimePolynomial::constant(2, TimeCoefficient::constant(1.0));
        let mut c12 = TimePolynomial::constant(2, TimeCoefficient::constant(a1));
        c12.add_term(e1.clone(), TimeCoefficient::constant(2.0 * a2));
        let mut c22 = TimePolynomial::constant(2, TimeCoefficient::constant(a1 * a1));
        c22.add_term(e1.clone(), TimeCoefficient::constant(4.0 * a1 * a2));
        c22.add_term(
            MultiIndex(vec![2, 0]),
            TimeCoefficient::constant(4.0 * a2 * a2),
        );
        let _ = zero2;
        base(
            2,
            m,
            horizon,
            vec![b1, b2],
            vec![vec![c11, c12.clone()], vec![c12, c22]],
            BTreeMap::new(),
            StateSpace::Full,
            None,
        )
    }

    /// Drift a(t) + b(t) x + x^2 with no noise: a legal specification whose
    /// generator raises degrees instead of preserving them, so every matrix
    /// request fails with DegreeOverflow.
    pub fn quadratic_drift_counterexample(
        a: TimeCoefficient,
        b: TimeCoefficient,
        m: usize,
        horizon: f64,
    ) -> Result<ProcessSpec> {
        let mut drift = TimePolynomial::constant(1, a);
        drift.add_term(MultiIndex(vec![1]), b);
        drift.add_term(MultiIndex(vec![2]), TimeCoefficient::constant(1.0));
        base(
            1,
            m,
            horizon,
            vec![drift],
            vec![vec![TimePolynomial::zero()]],
            BTreeMap::new(),
            StateSpace::Full,
            None,
        )
    }
}

pub const BUILTIN_NAMES: &[&str] = &[
    "bm-drift",
    "ou-theta-t",
    "ou-tx",
    "jacobi",
    "jacobi-jumps",
    "affine-square",
    "quadratic-drift-counterexample",
];

struct Params<'a> {
    name: &'a str,
    map: &'a BTreeMap<String, String>,
}

impl<'a> Params<'a> {
    fn check_known(&self, allowed: &[&str]) -> Result<()> {
        for k in self.map.keys() {
            if !allowed.contains(&k.as_str()) && !["m", "T", "horizon"].contains(&k.as_str()) {
                return Err(Error::BadParam {
                    name: k.clone(),
                    msg: format!("builtin '{}' does not take this parameter", self.name),
                });
            }
        }
        Ok(())
    }

    fn time_coeff(&self, key: &str, default: &str) -> Result<TimeCoefficient> {
        let text = self.map.get(key).map(String::as_str).unwrap_or(default);
        parse_time_expression(text).map_err(|e| Error::BadParam {
            name: key.to_string(),
            msg: e.to_string(),
        })
    }

    fn scalar(&self, key: &str, default: f64) -> Result<f64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(text) => text.trim().parse().map_err(|_| Error::BadParam {
                name: key.to_string(),
                msg: format!("expected a number, got '{text}'"),
            }),
        }
    }

    fn m(&self) -> Result<usize> {
        match self.map.get("m") {
            None => Ok(4),
            Some(text) => text.trim().parse().map_err(|_| Error::BadParam {
                name: "m".into(),
                msg: format!("expected an integer, got '{text}'"),
            }),
        }
    }

    fn horizon(&self) -> Result<f64> {
        let text = self.map.get("T").or_else(|| self.map.get("horizon"));
        match text {
            None => Ok(2.0),
            Some(text) => text.trim().parse().map_err(|_| Error::BadParam {
                name: "T".into(),
                msg: format!("expected a number, got '{text}'"),
            }),
        }
    }
}

/// Construct a catalog process from string parameters (the CLI entry point).
/// All builtins accept m (default 4) and T (default 2).
pub fn builtin(name: &str, params: &BTreeMap<String, String>) -> Result<ProcessSpec> {
    use builtin_typed::*;
    let p = Params { name, map: params };
    let m = p.m()?;
    let horizon = p.horizon()?;
    match name {
        "bm-drift" => {
            p.check_known(&["a"])?;
            bm_drift(p.time_coeff("a", "1")?, m, horizon)
        }
        "ou-theta-t" => {
            p.check_known(&["theta"])?;
            ou_theta_t(p.scalar("theta", 1.0)?, m, horizon)
        }
        "ou-tx" => {
            p.check_known(&[])?;
            ou_tx(m, horizon)
        }
        "jacobi" => {
            p.check_known(&["a", "b"])?;
            jacobi(p.time_coeff("a", "0.3+0.1*t")?, p.scalar("b", 1.0)?, m, horizon)
        }
        "jacobi-jumps" => {
            p.check_known(&["kappa", "theta", "a", "b"])?;
            jacobi_jumps(
                p.scalar("kappa", 1.0)?,
                p.scalar("theta", 0.5)?,
                p.scalar("a", -0.5)?,
                p.scalar("b", -0.1)?,
                m,
                horizon,
            )
        }
        "affine-square" => {
            p.check_known(&["A0", "A1", "A2", "a"])?;
            affine_square(
                p.scalar("A0", 0.1)?,
                p.scalar("A1", 0.5)?,
                p.scalar("A2", 0.25)?,
                p.time_coeff("a", "1")?,
                m,
                horizon,
            )
        }
        "quadratic-drift-counterexample" => {
            p.check_known(&["a", "b"])?;
            quadratic_drift_counterexample(p.time_coeff("a", "1")?, p.time_coeff("b", "1")?, m, horizon)
        }
        _ => Err(Error::UnknownBuiltin(name.to_string())),
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

fn t_poly_str(coeffs: &[f64]) -> String {
    let mut parts = Vec::new();
    for (i, &c) in coeffs.iter().enumerate() {
        if c == 0.0 && coeffs.len() > 1 {
            continue;
        }
        parts.push(match i {
            0 => fmt_f(c),
            1 => format!("{} * t", fmt_f(c)),
            _ => format!("{} * t^{i}", fmt_f(c)),
        });
    }
    if parts.is_empty() {
        parts.push("0.0".into());
    }
    parts.join(" + ")
}

fn time_coeff_str(c: &TimeCoefficient) -> String {
    match c {
        TimeCoefficient::Poly(v) => t_poly_str(v),
        TimeCoefficient::Piecewise { breaks, segments } => {
            let mut s = format!("pw({}", fmt_f(breaks[0]));
            for (i, seg) in segments.iter().enumerate() {
                s.push_str(&format!("; {}; {}", t_poly_str(seg), fmt_f(breaks[i + 1])));
            }
            s.push(')');
            s
        }
    }
}

fn poly_str(p: &TimePolynomial) -> String {
    let mut parts = Vec::new();
    for (k, c) in p.terms() {
        if c.is_zero() {
            continue;
        }
        let coef = format!("({})", time_coeff_str(c));
        if k.is_zero() {
            parts.push(coef);
            continue;
        }
        let mono: Vec<String> = k
            .0
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| {
                if e == 1 {
                    format!("x{}", i + 1)
                } else {
                    format!("x{}^{e}", i + 1)
                }
            })
            .collect();
        parts.push(format!("{coef} * {}", mono.join(" * ")));
    }
    if parts.is_empty() {
        parts.push("0".into());
    }
    parts.join(" + ")
}

/// Serialize a ProcessSpec to the text document format; parsing the output
/// reproduces the spec coefficient-for-coefficient.
pub fn spec_to_document(spec: &ProcessSpec) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    out.push_str("[meta]\n");
    writeln!(out, "d = {}", spec.d).unwrap();
    writeln!(out, "m = {}", spec.m).unwrap();
    writeln!(out, "horizon = {}", fmt_f(spec.horizon)).unwrap();
    match &spec.state_space {
        StateSpace::Full => out.push_str("state_space = full\n"),
        StateSpace::Orthant { p } => writeln!(out, "state_space = orthant {p}").unwrap(),
        StateSpace::Box { lower, upper } => {
            out.push_str("state_space = box");
            for (l, u) in lower.iter().zip(upper) {
                write!(out, " {} {}", fmt_f(*l), fmt_f(*u)).unwrap();
            }
            out.push('\n');
        }
    }
    out.push_str("[drift]\n");
    for (i, b) in spec.drift.iter().enumerate() {
        if !b.is_zero() {
            writeln!(out, "{}: {}", i + 1, poly_str(b)).unwrap();
        }
    }
    out.push_str("[diffusion]\n");
    for i in 0..spec.d {
        for j in i..spec.d {
            let c = &spec.diffusion[i][j];
            if !c.is_zero() {
                writeln!(out, "{} {}: {}", i + 1, j + 1, poly_str(c)).unwrap();
            }
        }
    }
    if !spec.jump_moments.is_empty() {
        out.push_str("[jump_moments]\n");
        for (l, p) in &spec.jump_moments {
            let idx: Vec<String> = l.0.iter().map(|e| e.to_string()).collect();
            writeln!(out, "({}): {}", idx.join(","), poly_str(p)).unwrap();
        }
    }
    if let Some(k) = &spec.jump_sampler {
        out.push_str("[sampler]\n");
        match k {
            SamplerKind::JacobiDown { a, b } => {
                writeln!(out, "jacobi-down a={} b={}", fmt_f(*a), fmt_f(*b)).unwrap()
            }
            SamplerKind::JacobiUp { alpha } => {
                writeln!(out, "jacobi-up alpha={}", fmt_f(*alpha)).unwrap()
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmat::generator_matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn minimal_document_parses() {
        let text = "\
[meta]
d = 1
m = 2
horizon = 1.0
[drift]
1: t - x1
[diffusion]
1 1: 1
";
        let spec = parse_spec(text).unwrap();
        assert_eq!(spec.d, 1);
        assert_eq!(spec.m, 2);
        assert_eq!(spec.drift[0].eval(0.75, &[0.25]), 0.5);
        assert_eq!(spec.diffusion[0][0].eval(0.3, &[5.0]), 1.0);
    }

    #[test]
    fn bare_x_is_accepted_in_one_dimension() {
        let p = parse_expression("t - x", 1, 1).unwrap();
        assert_eq!(p.eval(0.75, &[0.25]), 0.5);
    }

    #[test]
    fn drift_degree_violation_is_rejected() {
        let text = "[meta]\nd = 1\nm = 2\nhorizon = 1.0\n[drift]\n1: x1^2\n";
        let err = parse_spec(text).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 6, .. }), "{err}");
    }

    #[test]
    fn jump_moment_degree_violation_is_rejected() {
        let text = "\
[meta]
d = 1
m = 2
horizon = 1.0
[diffusion]
1 1: 1
[jump_moments]
(2): x1^3
";
        assert!(matches!(parse_spec(text), Err(Error::Parse { line: 8, .. })));
    }

    #[test]
    fn syntax_errors_carry_location() {
        match parse_expression("1 + * 2", 1, 3) {
            Err(Error::Parse { line: 3, col, .. }) => assert_eq!(col, 5),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn piecewise_expression_round_trips() {
        let p = parse_expression("pw(0.0; t; 1.0; 1.0; 2.0) * x1", 1, 1).unwrap();
        assert_eq!(p.eval(0.5, &[2.0]), 1.0);
        assert_eq!(p.eval(1.5, &[2.0]), 2.0);
    }

    #[test]
    fn grammar_cannot_express_cauchy_dynamics() {
        // a Cauchy-type generator needs the non-polynomial symbol |xi| or a
        // rational kernel density; the grammar has no division, no absolute
        // value and no transcendental functions, so such a document cannot
        // even be written down
        assert!(parse_expression("1/(1+x1^2)", 1, 1).is_err());
        assert!(parse_expression("abs(x1)", 1, 1).is_err());
        assert!(parse_expression("exp(-t)", 1, 1).is_err());
    }

    fn all_builtins() -> Vec<(&'static str, ProcessSpec)> {
        BUILTIN_NAMES
            .iter()
            .map(|&n| (n, builtin(n, &BTreeMap::new()).unwrap()))
            .collect()
    }

    #[test]
    fn round_trip_all_builtins() {
        // the counterexample is excluded: its drift is deliberately outside
        // the degree-1 bound the document grammar enforces
        for (name, spec) in all_builtins() {
            if name == "quadratic-drift-counterexample" {
                continue;
            }
            let doc = spec_to_document(&spec);
            let back = parse_spec(&doc).unwrap_or_else(|e| panic!("{name}: {e}\n{doc}"));
            assert_eq!(back, spec, "{name} did not round-trip:\n{doc}");
        }
    }

    #[test]
    fn builtins_are_degree_closed() {
        for (name, spec) in all_builtins() {
            if name == "quadratic-drift-counterexample" {
                assert!(generator_matrix(&spec, 0.5, spec.m).is_err());
                continue;
            }
            for &t in &[0.0, 0.5, 1.5] {
                generator_matrix(&spec, t, spec.m)
                    .unwrap_or_else(|e| panic!("{name} not closed at t={t}: {e}"));
            }
        }
    }

    #[test]
    fn builtin_param_plumbing() {
        let mut params = BTreeMap::new();
        params.insert("a".to_string(), "t".to_string());
        let from_map = builtin("bm-drift", &params).unwrap();
        let typed =
            builtin_typed::bm_drift(TimeCoefficient::Poly(vec![0.0, 1.0]), 4, 2.0).unwrap();
        assert_eq!(from_map, typed);

        assert!(matches!(
            builtin("no-such-process", &BTreeMap::new()),
            Err(Error::UnknownBuiltin(_))
        ));
        let mut bad = BTreeMap::new();
        bad.insert("b".to_string(), "-1".to_string());
        assert!(matches!(builtin("jacobi", &bad), Err(Error::BadParam { .. })));
        let mut bad = BTreeMap::new();
        bad.insert("a".to_string(), "-0.1".to_string());
        bad.insert("b".to_string(), "-0.5".to_string());
        assert!(matches!(
            builtin("jacobi-jumps", &bad),
            Err(Error::BadParam { .. })
        ));
        let mut bad = BTreeMap::new();
        bad.insert("frequency".to_string(), "3".to_string());
        assert!(matches!(builtin("ou-tx", &bad), Err(Error::BadParam { .. })));
    }

    #[test]
    fn jacobi_jump_moments_match_closed_form() {
        let spec = builtin_typed::jacobi_jumps(1.0, 0.5, -0.5, -0.1, 6, 2.0).unwrap();
        let (a, b): (f64, f64) = (-0.5, -0.1);
        for l in 2..=6usize {
            let want = |x: f64| {
                x.powi(l as i32) * (b.powi(l as i32) - a.powi(l as i32))
                    / (-(l as f64) * (a / b).ln())
            };
            let jm = &spec.jump_moments[&MultiIndex(vec![l as u32])];
            for &x in &[0.2, 0.9] {
                assert!((jm.eval(0.4, &[x]) - want(x)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn fuzzed_documents_never_panic() {
        let base = spec_to_document(&builtin("jacobi-jumps", &BTreeMap::new()).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let alphabet: Vec<char> = "()[]+-*^;:=.,0123456789txabm \n#".chars().collect();
        for _ in 0..400 {
            let mut chars: Vec<char> = base.chars().collect();
            for _ in 0..rng.gen_range(1..6) {
                let pos = rng.gen_range(0..chars.len());
                match rng.gen_range(0..3) {
                    0 => chars[pos] = alphabet[rng.gen_range(0..alphabet.len())],
                    1 => {
                        chars.remove(pos);
                    }
                    _ => chars.insert(pos, alphabet[rng.gen_range(0..alphabet.len())]),
                }
            }
            let doc: String = chars.into_iter().collect();
            let _ = parse_spec(&doc); // must return, never panic
        }
    }
}
