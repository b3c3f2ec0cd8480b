//! Line-oriented text format for process specifications.
//!
//! Documents have sections [meta], [drift], [diffusion], [jump_moments] and
//! [sampler]; '#' starts a comment. Coefficient expressions form the
//! polynomial ring in t, x1..xd with +, -, *, integer powers and the
//! piecewise constructor pw(t0; p0(t); t1; p1(t); ...; tk). The grammar is
//! deliberately closed under nothing else: exponentials, rational or
//! transcendental coefficients (and hence Cauchy-type dynamics) cannot be
//! written down.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::genmat::{
    ProcessSpec, SamplerKind, StateSpace, TimeCoefficient, TimePolynomial,
};
use crate::polyalg::MultiIndex;

const MAX_POWER: u32 = 16;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Caret,
    Semi,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            col: self.pos + 1,
            msg: msg.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize)>> {
        let mut out = Vec::new();
        while self.pos < self.src.len() {
            let c = self.src[self.pos] as char;
            let col = self.pos + 1;
            match c {
                ' ' | '\t' => {
                    self.pos += 1;
                    continue;
                }
                '(' => out.push((Tok::LParen, col)),
                ')' => out.push((Tok::RParen, col)),
                '+' => out.push((Tok::Plus, col)),
                '-' => out.push((Tok::Minus, col)),
                '*' => out.push((Tok::Star, col)),
                '^' => out.push((Tok::Caret, col)),
                ';' => out.push((Tok::Semi, col)),
                '0'..='9' | '.' => {
                    let start = self.pos;
                    while self.pos < self.src.len() {
                        let d = self.src[self.pos] as char;
                        let exp_sign = (d == '+' || d == '-')
                            && matches!(self.src[self.pos - 1] as char, 'e' | 'E');
                        if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                    let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                    let v: f64 = text
                        .parse()
                        .map_err(|_| self.err(format!("bad number literal '{text}'")))?;
                    out.push((Tok::Num(v), col));
                    continue;
                }
                'a'..='z' | 'A'..='Z' | '_' => {
                    let start = self.pos;
                    while self.pos < self.src.len()
                        && matches!(self.src[self.pos] as char,
                            'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                    {
                        self.pos += 1;
                    }
                    let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                    out.push((Tok::Ident(text.to_string()), col));
                    continue;
                }
                _ => return Err(self.err(format!("unexpected character '{c}'"))),
            }
            self.pos += 1;
        }
        Ok(out)
    }
}

struct ExprParser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    d: usize,
}

impl ExprParser {
    fn err_at(&self, msg: impl Into<String>) -> Error {
        let col = self
            .toks
            .get(self.pos)
            .map(|(_, c)| *c)
            .unwrap_or_else(|| self.toks.last().map(|(_, c)| c + 1).unwrap_or(1));
        Error::Parse {
            line: self.line,
            col,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        match self.next() {
            Some(t) if t == want => Ok(()),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err_at(format!("expected {what}")))
            }
        }
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<TimePolynomial> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?.scale(-1.0));
                }
                _ => return Ok(acc),
            }
        }
    }

    // term := factor ('*' factor)*
    fn term(&mut self) -> Result<TimePolynomial> {
        let mut acc = self.factor()?;
        while self.peek() == Some(&Tok::Star) {
            self.pos += 1;
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    // factor := ('-')* primary ('^' integer)?
    fn factor(&mut self) -> Result<TimePolynomial> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            return Ok(self.factor()?.scale(-1.0));
        }
        let base = self.primary()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let n = match self.next() {
                Some(Tok::Num(v)) if v >= 0.0 && v.fract() == 0.0 && v <= MAX_POWER as f64 => {
                    v as u32
                }
                _ => {
                    self.pos = self.pos.saturating_sub(1);
                    return Err(
                        self.err_at(format!("exponent must be an integer in 0..={MAX_POWER}"))
                    );
                }
            };
            let mut acc = TimePolynomial::constant(self.d, TimeCoefficient::constant(1.0));
            for _ in 0..n {
                acc = acc.mul(&base);
            }
            return Ok(acc);
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<TimePolynomial> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(TimePolynomial::constant(
                self.d,
                TimeCoefficient::constant(v),
            )),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "t" => Ok(TimePolynomial::constant(
                    self.d,
                    TimeCoefficient::Poly(vec![0.0, 1.0]),
                )),
                "pw" => self.piecewise(),
                "x" if self.d == 1 => Ok(TimePolynomial::term(
                    MultiIndex(vec![1]),
                    TimeCoefficient::constant(1.0),
                )),
                _ => {
                    if let Some(num) = name.strip_prefix('x') {
                        if let Ok(i) = num.parse::<usize>() {
                            if i >= 1 && i <= self.d {
                                let mut k = MultiIndex::zero(self.d);
                                k.0[i - 1] = 1;
                                return Ok(TimePolynomial::term(
                                    k,
                                    TimeCoefficient::constant(1.0),
                                ));
                            }
                            self.pos -= 1;
                            return Err(self.err_at(format!(
                                "variable {name} out of range (d = {})",
                                self.d
                            )));
                        }
                    }
                    self.pos -= 1;
                    Err(self.err_at(format!("unknown identifier '{name}'")))
                }
            },
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err_at("expected a number, t, x<i>, pw(...) or '('"))
            }
        }
    }

    // pw(t0; p0; t1; p1; ...; tk) with k >= 1 segments in t only
    fn piecewise(&mut self) -> Result<TimePolynomial> {
        self.expect(Tok::LParen, "'(' after pw")?;
        let mut breaks = vec![self.break_point()?];
        let mut segments: Vec<Vec<f64>> = Vec::new();
        loop {
            self.expect(Tok::Semi, "';' inside pw(...)")?;
            let seg = self.expr()?;
            segments.push(self.t_only(&seg)?);
            self.expect(Tok::Semi, "';' inside pw(...)")?;
            breaks.push(self.break_point()?);
            match self.peek() {
                Some(Tok::RParen) => {
                    self.pos += 1;
                    break;
                }
                Some(Tok::Semi) => continue,
                _ => return Err(self.err_at("expected ';' or ')' inside pw(...)")),
            }
        }
        let tc = TimeCoefficient::piecewise(breaks, segments).map_err(|e| Error::Parse {
            line: self.line,
            col: 1,
            msg: e.to_string(),
        })?;
        Ok(TimePolynomial::constant(self.d, tc))
    }

    fn break_point(&mut self) -> Result<f64> {
        let neg = self.peek() == Some(&Tok::Minus);
        if neg {
            self.pos += 1;
        }
        match self.next() {
            Some(Tok::Num(v)) => Ok(if neg { -v } else { v }),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err_at("expected a breakpoint literal"))
            }
        }
    }

    /// Flatten a t-only TimePolynomial term into plain t coefficients.
    fn t_only(&self, p: &TimePolynomial) -> Result<Vec<f64>> {
        let mut out = vec![0.0];
        for (k, c) in p.terms() {
            if c.is_zero() {
                continue;
            }
            if !k.is_zero() {
                return Err(self.err_at("pw(...) segments must depend on t only"));
            }
            match c {
                TimeCoefficient::Poly(v) => {
                    for (i, &x) in v.iter().enumerate() {
                        if i >= out.len() {
                            out.resize(i + 1, 0.0);
                        }
                        out[i] += x;
                    }
                }
                TimeCoefficient::Piecewise { .. } => {
                    return Err(self.err_at("pw(...) cannot be nested"))
                }
            }
        }
        while out.len() > 1 && *out.last().unwrap() == 0.0 {
            out.pop();
        }
        Ok(out)
    }
}

/// Parse one coefficient expression in the ring R[t, x1..xd].
pub fn parse_expression(text: &str, d: usize, line: usize) -> Result<TimePolynomial> {
    let toks = Lexer::new(text, line).tokens()?;
    if toks.is_empty() {
        return Err(Error::Parse {
            line,
            col: 1,
            msg: "empty expression".into(),
        });
    }
    let mut p = ExprParser {
        toks,
        pos: 0,
        line,
        d,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err_at("trailing input after expression"));
    }
    Ok(e)
}

/// Parse a time-only expression into a TimeCoefficient (used for builtin
/// parameters like a=0.3+0.1*t).
pub fn parse_time_expression(text: &str) -> Result<TimeCoefficient> {
    let p = parse_expression(text, 1, 1)?;
    let mut poly: Option<TimeCoefficient> = None;
    for (k, c) in p.terms() {
        if c.is_zero() {
            continue;
        }
        if !k.is_zero() {
            return Err(Error::BadParam {
                name: text.to_string(),
                msg: "expected an expression in t only".into(),
            });
        }
        poly = Some(match poly {
            None => c.clone(),
            Some(acc) => acc.add(c),
        });
    }
    Ok(poly.unwrap_or_else(|| TimeCoefficient::constant(0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    None,
    Meta,
    Drift,
    Diffusion,
    JumpMoments,
    Sampler,
}

struct Meta {
    d: Option<usize>,
    m: Option<usize>,
    horizon: Option<f64>,
    state_space: Option<StateSpace>,
}

fn parse_err(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        col,
        msg: msg.into(),
    }
}

fn parse_meta_line(meta: &mut Meta, line_no: usize, body: &str) -> Result<()> {
    let (key, value) = body
        .split_once('=')
        .ok_or_else(|| parse_err(line_no, 1, "meta entries have the form key = value"))?;
    let key = key.trim();
    let value = value.trim();
    let bad = |msg: String| parse_err(line_no, 1, msg);
    match key {
        "d" => {
            meta.d = Some(
                value
                    .parse()
                    .map_err(|_| bad(format!("bad dimension '{value}'")))?,
            )
        }
        "m" => {
            meta.m = Some(
                value
                    .parse()
                    .map_err(|_| bad(format!("bad moment bound '{value}'")))?,
            )
        }
        "horizon" | "T" => {
            meta.horizon = Some(
                value
                    .parse()
                    .map_err(|_| bad(format!("bad horizon '{value}'")))?,
            )
        }
        "state_space" => {
            let mut words = value.split_whitespace();
            let kind = words.next().unwrap_or("");
            meta.state_space = Some(match kind {
                "full" => StateSpace::Full,
                "orthant" => {
                    let p = words
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| bad("orthant needs a coordinate count p".into()))?;
                    StateSpace::Orthant { p }
                }
                "box" => {
                    let nums: Vec<f64> = words
                        .map(|w| w.parse().map_err(|_| bad(format!("bad bound '{w}'"))))
                        .collect::<Result<_>>()?;
                    if nums.is_empty() || nums.len() % 2 != 0 {
                        return Err(bad("box needs lower/upper pairs per coordinate".into()));
                    }
                    let (lower, upper): (Vec<f64>, Vec<f64>) =
                        nums.chunks(2).map(|c| (c[0], c[1])).unzip();
                    if lower.iter().zip(&upper).any(|(l, u)| l >= u) {
                        return Err(bad("box bounds must satisfy lower < upper".into()));
                    }
                    StateSpace::Box { lower, upper }
                }
                _ => return Err(bad(format!("unknown state space '{value}'"))),
            });
        }
        _ => return Err(bad(format!("unknown meta key '{key}'"))),
    }
    Ok(())
}

fn parse_sampler_line(line_no: usize, body: &str) -> Result<SamplerKind> {
    let mut words = body.split_whitespace();
    let name = words.next().unwrap_or("");
    let mut params = BTreeMap::new();
    for w in words {
        let (k, v) = w
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, 1, "sampler parameters have the form key=value"))?;
        let v: f64 = v
            .parse()
            .map_err(|_| parse_err(line_no, 1, format!("bad sampler parameter '{w}'")))?;
        params.insert(k.to_string(), v);
    }
    let get = |k: &str| {
        params
            .get(k)
            .copied()
            .ok_or_else(|| parse_err(line_no, 1, format!("sampler '{name}' needs parameter {k}")))
    };
    match name {
        "jacobi-down" => Ok(SamplerKind::JacobiDown {
            a: get("a")?,
            b: get("b")?,
        }),
        "jacobi-up" => Ok(SamplerKind::JacobiUp { alpha: get("alpha")? }),
        _ => Err(parse_err(
            line_no,
            1,
            format!("unknown sampler '{name}'"),
        )),
    }
}

/// Parse a full specification document into a validated ProcessSpec.
pub fn parse_spec(text: &str) -> Result<ProcessSpec> {
    let mut section = Section::None;
    let mut meta = Meta {
        d: None,
        m: None,
        horizon: None,
        state_space: None,
    };
    struct Pending {
        line: usize,
        head: String,
        expr: String,
    }
    let mut drift_lines: Vec<Pending> = Vec::new();
    let mut diffusion_lines: Vec<Pending> = Vec::new();
    let mut jump_lines: Vec<Pending> = Vec::new();
    let mut sampler: Option<SamplerKind> = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = match name.trim() {
                "meta" => Section::Meta,
                "drift" => Section::Drift,
                "diffusion" => Section::Diffusion,
                "jump_moments" => Section::JumpMoments,
                "sampler" => Section::Sampler,
                other => {
                    return Err(parse_err(line_no, 1, format!("unknown section [{other}]")))
                }
            };
            continue;
        }
        match section {
            Section::None => {
                return Err(parse_err(
                    line_no,
                    1,
                    "content before the first section header",
                ))
            }
            Section::Meta => parse_meta_line(&mut meta, line_no, line)?,
            Section::Sampler => {
                if sampler.is_some() {
                    return Err(parse_err(line_no, 1, "duplicate sampler line"));
                }
                sampler = Some(parse_sampler_line(line_no, line)?);
            }
            _ => {
                let (head, expr) = line.split_once(':').ok_or_else(|| {
                    parse_err(line_no, 1, "entries have the form index: expression")
                })?;
                let p = Pending {
                    line: line_no,
                    head: head.trim().to_string(),
                    expr: expr.trim().to_string(),
                };
                match section {
                    Section::Drift => drift_lines.push(p),
                    Section::Diffusion => diffusion_lines.push(p),
                    Section::JumpMoments => jump_lines.push(p),
                    _ => unreachable!(),
                }
            }
        }
    }

    let d = meta
        .d
        .ok_or_else(|| parse_err(1, 1, "missing meta entry d"))?;
    let m = meta
        .m
        .ok_or_else(|| parse_err(1, 1, "missing meta entry m"))?;
    let horizon = meta
        .horizon
        .ok_or_else(|| parse_err(1, 1, "missing meta entry horizon"))?;
    let state_space = meta.state_space.unwrap_or(StateSpace::Full);
    if d == 0 {
        return Err(parse_err(1, 1, "d must be >= 1"));
    }

    let mut drift = vec![TimePolynomial::zero(); d];
    for p in &drift_lines {
        let i: usize = p
            .head
            .parse()
            .ok()
            .filter(|&i| i >= 1 && i <= d)
            .ok_or_else(|| parse_err(p.line, 1, format!("bad drift coordinate '{}'", p.head)))?;
        let e = parse_expression(&p.expr, d, p.line)?;
        if e.x_degree().unwrap_or(0) > 1 {
            return Err(parse_err(
                p.line,
                1,
                "drift must have degree <= 1 in the state",
            ));
        }
        drift[i - 1] = drift[i - 1].add(&e);
    }

    let mut diffusion = vec![vec![TimePolynomial::zero(); d]; d];
    for p in &diffusion_lines {
        let mut words = p.head.split_whitespace();
        let parse_coord = |w: Option<&str>| {
            w.and_then(|w| w.parse::<usize>().ok())
                .filter(|&i| i >= 1 && i <= d)
        };
        let (i, j) = match (parse_coord(words.next()), parse_coord(words.next())) {
            (Some(i), Some(j)) if words.next().is_none() && i <= j => (i, j),
            _ => {
                return Err(parse_err(
                    p.line,
                    1,
                    format!("bad diffusion entry '{}' (want upper-triangle 'i j')", p.head),
                ))
            }
        };
        let e = parse_expression(&p.expr, d, p.line)?;
        if e.x_degree().unwrap_or(0) > 2 {
            return Err(parse_err(
                p.line,
                1,
                "diffusion must have degree <= 2 in the state",
            ));
        }
        diffusion[i - 1][j - 1] = diffusion[i - 1][j - 1].add(&e);
        if i != j {
            diffusion[j - 1][i - 1] = diffusion[i - 1][j - 1].clone();
        }
    }

    let mut jump_moments = BTreeMap::new();
    for p in &jump_lines {
        let inner = p
            .head
            .strip_prefix('(')
            .and_then(|h| h.strip_suffix(')'))
            .ok_or_else(|| {
                parse_err(p.line, 1, "jump-moment keys have the form (l1,l2,...)")
            })?;
        let l: Vec<u32> = inner
            .split(',')
            .map(|w| {
                w.trim()
                    .parse()
                    .map_err(|_| parse_err(p.line, 1, format!("bad multi-index '{}'", p.head)))
            })
            .collect::<Result<_>>()?;
        if l.len() != d {
            return Err(parse_err(
                p.line,
                1,
                format!("multi-index '{}' has wrong length (d = {d})", p.head),
            ));
        }
        let l = MultiIndex(l);
        let deg = l.degree() as usize;
        let e = parse_expression(&p.expr, d, p.line)?;
        if e.x_degree().unwrap_or(0) > deg {
            return Err(parse_err(
                p.line,
                1,
                format!("jump moment for ({l}) must have degree <= {deg} in the state"),
            ));
        }
        if !e.is_zero() {
            jump_moments.insert(l, e);
        }
    }

    let spec = ProcessSpec {
        d,
        m,
        horizon,
        drift,
        diffusion,
        jump_moments,
        state_space,
        jump_sampler: sampler,
    };
    spec.validate()?;
    Ok(spec)
}
