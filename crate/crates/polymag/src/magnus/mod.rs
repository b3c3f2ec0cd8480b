//! Solve the matrix Kolmogorov forward equation dP/dt = P H_t by exact
//! exponential (commuting family), truncated Magnus expansion with a
//! pi-gated convergence criterion, or fixed-step Runge-Kutta reference
//! integration, and extract conditional moments.

pub mod hpoly;
pub mod quad;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::genmat::ProcessSpec;
use crate::linalg::commutator;
pub use crate::linalg::{matrix_exp, spectral_norm};
use crate::polyalg::{enumerate_basis, MultiIndex};

use hpoly::HPoly;

/// Convergence gate for the Magnus series: per-subinterval norm integral
/// must stay below pi times this safety factor.
pub const PI_SAFETY: f64 = 0.9;

/// Gauss-Legendre configuration for all iterated integrals.
#[derive(Debug, Clone)]
pub struct QuadratureConfig {
    /// Nodes per panel.
    pub gl_order: usize,
    /// Maximal number of panel doublings before reporting non-convergence.
    pub max_refine: usize,
    /// Relative tolerance between successive refinements.
    pub rtol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            gl_order: 16,
            max_refine: 18,
            rtol: 1e-10,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gl_order < 2 || self.rtol <= 0.0 {
            return Err(Error::SpecInvalid(
                "quadrature needs gl_order >= 2 and rtol > 0".into(),
            ));
        }
        Ok(())
    }
}

/// First three Magnus terms on [s, t].
#[derive(Debug, Clone)]
pub struct MagnusTerms {
    pub s: f64,
    pub t: f64,
    pub omega1: DMatrix<f64>,
    pub omega2: DMatrix<f64>,
    pub omega3: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodUsed {
    ExactCommuting,
    Magnus3,
    Rk4Ode,
}

impl std::fmt::Display for MethodUsed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MethodUsed::ExactCommuting => write!(f, "exact-commuting"),
            MethodUsed::Magnus3 => write!(f, "magnus3"),
            MethodUsed::Rk4Ode => write!(f, "rk4-ode"),
        }
    }
}

/// Requested solve method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Auto,
    Exact,
    Magnus3,
    Ode,
}

impl std::str::FromStr for SolveMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(SolveMethod::Auto),
            "exact" => Ok(SolveMethod::Exact),
            "magnus3" => Ok(SolveMethod::Magnus3),
            "ode" => Ok(SolveMethod::Ode),
            other => Err(Error::SpecInvalid(format!("unknown method `{other}`"))),
        }
    }
}

/// Transition matrix P_{s,t} plus solve diagnostics.
#[derive(Debug, Clone)]
pub struct TransitionResult {
    pub s: f64,
    pub t: f64,
    pub matrix: DMatrix<f64>,
    pub method: MethodUsed,
    pub subintervals: usize,
    pub norm_integral: f64,
    /// Finite-difference defect of the forward equation at t.
    pub residual: f64,
}

/// Number of fixed RK4 steps for the reference ODE route.
pub const DEFAULT_ODE_STEPS: usize = 2048;

/// Relative target for the panel-refinement loop around the Magnus solve.
const MAGNUS_REFINE_RTOL: f64 = 1e-9;

fn norm_integral_hp(hp: &HPoly, s: f64, t: f64, cuts: &[f64], q: &QuadratureConfig) -> Result<f64> {
    quad::integrate_scalar(|u| spectral_norm(&hp.at(u)), s, t, cuts, q)
}

/// Adaptive Gauss-Legendre estimate of int_s^t ||H_u||_2 du.
pub fn norm_integral(
    spec: &ProcessSpec,
    s: f64,
    t: f64,
    k: usize,
    q: &QuadratureConfig,
) -> Result<f64> {
    q.validate()?;
    let hp = HPoly::build(spec, k)?;
    norm_integral_hp(&hp, s, t, &spec.breakpoints(), q)
}

/// First three Magnus terms, exact for polynomial and piecewise-polynomial
/// coefficients (closed-form simplex moments of the matrix coefficients).
pub fn magnus_terms(
    spec: &ProcessSpec,
    s: f64,
    t: f64,
    k: usize,
    q: &QuadratureConfig,
) -> Result<MagnusTerms> {
    q.validate()?;
    let hp = HPoly::build(spec, k)?;
    Ok(magnus_terms_hp(&hp, s, t))
}

fn magnus_terms_hp(hp: &HPoly, s: f64, t: f64) -> MagnusTerms {
    MagnusTerms {
        s,
        t,
        omega1: hp.omega1(s, t),
        omega2: hp.simplex2_commutator(s, t) * -0.5,
        omega3: hp.simplex3_commutator(s, t) / 6.0,
    }
}

/// Third-order Magnus solve on a single subinterval.
fn magnus3_panel(hp: &HPoly, s: f64, t: f64) -> Result<DMatrix<f64>> {
    let terms = magnus_terms_hp(hp, s, t);
    matrix_exp(&(terms.omega1 + terms.omega2 + terms.omega3))
}

fn magnus3_sub(hp: &HPoly, s: f64, t: f64, n_sub: usize) -> Result<DMatrix<f64>> {
    let n = hp.dim();
    let mut p = DMatrix::<f64>::identity(n, n);
    for i in 0..n_sub {
        let a = s + (t - s) * i as f64 / n_sub as f64;
        let b = s + (t - s) * (i + 1) as f64 / n_sub as f64;
        p = p * magnus3_panel(hp, a, b)?;
    }
    Ok(p)
}

/// Magnus solve with an explicit subinterval count, composed left-to-right
/// by the evolution property P_{s,t} = P_{s,u} P_{u,t}.
pub fn magnus3_with_subintervals(
    spec: &ProcessSpec,
    s: f64,
    t: f64,
    k: usize,
    n_sub: usize,
    q: &QuadratureConfig,
) -> Result<DMatrix<f64>> {
    q.validate()?;
    let hp = HPoly::build(spec, k)?;
    magnus3_sub(&hp, s, t, n_sub)
}

/// Smallest equal subdivision with every piece below the pi gate.
fn choose_subintervals(
    hp: &HPoly,
    s: f64,
    t: f64,
    cuts: &[f64],
    q: &QuadratureConfig,
) -> Result<(usize, f64)> {
    let total = norm_integral_hp(hp, s, t, cuts, q)?;
    let gate = std::f64::consts::PI * PI_SAFETY;
    let mut n = ((total / gate).ceil() as usize).max(1);
    'outer: loop {
        if n > 1024 {
            return Err(Error::Numerical(
                "subinterval count exhausted while gating the Magnus series".into(),
            ));
        }
        for i in 0..n {
            let a = s + (t - s) * i as f64 / n as f64;
            let b = s + (t - s) * (i + 1) as f64 / n as f64;
            if norm_integral_hp(hp, a, b, cuts, q)? >= gate {
                n += 1;
                continue 'outer;
            }
        }
        return Ok((n, total));
    }
}

fn rk4_sub(hp: &HPoly, s: f64, t: f64, steps: usize) -> Result<DMatrix<f64>> {
    if steps == 0 {
        return Err(Error::Numerical("RK4 needs at least one step".into()));
    }
    let n = hp.dim();
    let mut p = DMatrix::<f64>::identity(n, n);
    let h = (t - s) / steps as f64;
    if h == 0.0 {
        return Ok(p);
    }
    for i in 0..steps {
        let u = s + i as f64 * h;
        let h1 = hp.at(u);
        let h2 = hp.at(u + 0.5 * h);
        let h4 = hp.at(u + h);
        let k1 = &p * &h1;
        let k2 = (&p + &k1 * (0.5 * h)) * &h2;
        let k3 = (&p + &k2 * (0.5 * h)) * &h2;
        let k4 = (&p + &k3 * h) * &h4;
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok(p)
}

/// Classical RK4 on dP/dt = P H_t with fixed step count, P(s) = I.
pub fn rk4_transition(
    spec: &ProcessSpec,
    s: f64,
    t: f64,
    k: usize,
    steps: usize,
) -> Result<DMatrix<f64>> {
    let hp = HPoly::build(spec, k)?;
    rk4_sub(&hp, s, t, steps)
}

/// Sampled commutativity probe on the matrix-polynomial form.
fn commuting_family(hp: &HPoly, s: f64, t: f64) -> Result<bool> {
    let grid = 20;
    let mats: Vec<DMatrix<f64>> = (0..grid)
        .map(|i| hp.at(s + (t - s) * i as f64 / (grid - 1) as f64))
        .collect();
    let mut max_h: f64 = 0.0;
    for m in &mats {
        max_h = max_h.max(spectral_norm(m)?);
    }
    let tol = 1e-12 * max_h * max_h;
    for i in 0..grid {
        for j in (i + 1)..grid {
            if spectral_norm(&commutator(&mats[i], &mats[j]))? > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn solve_matrix(
    hp: &HPoly,
    cuts: &[f64],
    s: f64,
    t: f64,
    method: SolveMethod,
    q: &QuadratureConfig,
) -> Result<(DMatrix<f64>, MethodUsed, usize, f64)> {
    match method {
        SolveMethod::Exact => {
            let ni = norm_integral_hp(hp, s, t, cuts, q)?;
            Ok((
                matrix_exp(&hp.omega1(s, t))?,
                MethodUsed::ExactCommuting,
                1,
                ni,
            ))
        }
        SolveMethod::Magnus3 => {
            // the pi gate only guarantees convergence of the series; refine
            // the subdivision until two solves agree (4th-order decay)
            let (mut n_sub, total) = choose_subintervals(hp, s, t, cuts, q)?;
            let mut p = magnus3_sub(hp, s, t, n_sub)?;
            for _ in 0..12 {
                let p2 = magnus3_sub(hp, s, t, 2 * n_sub)?;
                let diff = (&p2 - &p).amax();
                let scale = p2.amax().max(1.0);
                n_sub *= 2;
                p = p2;
                if diff <= MAGNUS_REFINE_RTOL.max(q.rtol) * scale {
                    return Ok((p, MethodUsed::Magnus3, n_sub, total));
                }
            }
            Err(Error::Numerical(
                "Magnus panel refinement failed to converge".into(),
            ))
        }
        SolveMethod::Ode => {
            let p = rk4_sub(hp, s, t, DEFAULT_ODE_STEPS)?;
            let ni = norm_integral_hp(hp, s, t, cuts, q)?;
            Ok((p, MethodUsed::Rk4Ode, DEFAULT_ODE_STEPS, ni))
        }
        SolveMethod::Auto => {
            if commuting_family(hp, s, t.max(s + 1e-12))? {
                solve_matrix(hp, cuts, s, t, SolveMethod::Exact, q)
            } else {
                solve_matrix(hp, cuts, s, t, SolveMethod::Magnus3, q)
            }
        }
    }
}

/// Transition matrix P_{s,t} on the degree-<= k basis with diagnostics.
pub fn transition_matrix(
    spec: &ProcessSpec,
    s: f64,
    t: f64,
    k: usize,
    method: SolveMethod,
    q: &QuadratureConfig,
) -> Result<TransitionResult> {
    if !(0.0 <= s && s <= t && t <= spec.horizon) {
        return Err(Error::SpecInvalid(format!(
            "need 0 <= s <= t <= T, got s={s}, t={t}, T={}",
            spec.horizon
        )));
    }
    if k > spec.m {
        return Err(Error::SpecInvalid(format!(
            "degree k={k} exceeds the spec bound m={}",
            spec.m
        )));
    }
    if t == s {
        let n = enumerate_basis(spec.d, k)?.len();
        let ni = 0.0;
        return Ok(TransitionResult {
            s,
            t,
            matrix: DMatrix::identity(n, n),
            method: match method {
                SolveMethod::Ode => MethodUsed::Rk4Ode,
                SolveMethod::Magnus3 => MethodUsed::Magnus3,
                _ => MethodUsed::ExactCommuting,
            },
            subintervals: 0,
            norm_integral: ni,
            residual: 0.0,
        });
    }
    let hp = HPoly::build(spec, k)?;
    let cuts = spec.breakpoints();
    let (matrix, used, subintervals, ni) = solve_matrix(&hp, &cuts, s, t, method, q)?;

    // forward-equation defect by finite differences, reusing the same route
    let h = ((t - s) * 1e-4).max(1e-7);
    let resolve = |tt: f64| -> Result<DMatrix<f64>> {
        Ok(solve_matrix(&hp, &cuts, s, tt, method_of(used), q)?.0)
    };
    let residual = {
        let ht = hp.at(t);
        let dpdt = if t + h <= spec.horizon {
            (resolve(t + h)? - resolve(t - h)?) / (2.0 * h)
        } else {
            (resolve(t - 2.0 * h)? - resolve(t - h)? * 4.0 + &matrix * 3.0) / (2.0 * h)
        };
        spectral_norm(&(dpdt - &matrix * ht))?
    };

    Ok(TransitionResult {
        s,
        t,
        matrix,
        method: used,
        subintervals,
        norm_integral: ni,
        residual,
    })
}

fn method_of(used: MethodUsed) -> SolveMethod {
    match used {
        MethodUsed::ExactCommuting => SolveMethod::Exact,
        MethodUsed::Magnus3 => SolveMethod::Magnus3,
        MethodUsed::Rk4Ode => SolveMethod::Ode,
    }
}

/// Conditional-moment result: value plus the underlying solve diagnostics.
#[derive(Debug, Clone)]
pub struct MomentResult {
    pub value: f64,
    pub transition: TransitionResult,
    /// Set when x is outside the declared state space (warning, not error).
    pub outside_state_space: bool,
}

/// E[X_t^kidx | X_s = x] via the representing-matrix route:
/// (basis row at x) * P_{s,t} * e_kidx on the degree-|kidx| basis.
pub fn moment(
    spec: &ProcessSpec,
    s: f64,
    t: f64,
    x: &[f64],
    kidx: &MultiIndex,
    method: SolveMethod,
    q: &QuadratureConfig,
) -> Result<MomentResult> {
    if kidx.dim() != spec.d {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            got: kidx.dim(),
        });
    }
    if kidx.degree() as usize > spec.m {
        return Err(Error::SpecInvalid(format!(
            "|k| = {} exceeds m = {}",
            kidx.degree(),
            spec.m
        )));
    }
    let k = (kidx.degree() as usize).max(1);
    let transition = transition_matrix(spec, s, t, k, method, q)?;
    let basis = enumerate_basis(spec.d, k)?;
    let row = basis.eval_row(x)?;
    let col = basis
        .index_of(kidx)
        .expect("kidx fits the degree-k basis by construction");
    let value = (0..basis.len())
        .map(|i| row[i] * transition.matrix[(i, col)])
        .sum();
    Ok(MomentResult {
        value,
        transition,
        outside_state_space: !spec.state_space.contains(x),
    })
}
