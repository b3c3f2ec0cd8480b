//! Time-dependent polynomial characteristics and the representing matrix of
//! the generator on the graded monomial basis.
//!
//! A process is described by drift polynomials b^i(t,x), a symmetric
//! diffusion array c^{ij}(t,x) and jump-moment polynomials
//! x -> integral of xi^l K_t(x,dxi). The generator acts on a polynomial f as
//!
//!   G_t f = sum_i D_i f b^i + 1/2 sum_ij D_ij f c^ij
//!         + sum_{2 <= |l| <= deg f} (D^l f / l!) * jump_moment[l]
//!
//! and its matrix on the degree-<= k basis is block upper-triangular by
//! degree whenever the characteristics are degree-closed.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{commutator, spectral_norm};
use crate::polyalg::{
    derivative_multi, enumerate_basis, multiply, partial_derivative, MonomialBasis, MultiIndex,
    Polynomial,
};

/// Coefficient function of time: a polynomial in t, or a piecewise
/// polynomial over a breakpoint grid. Piecewise segments are stored as
/// global polynomials in t valid on [breaks[i], breaks[i+1]).
#[derive(Debug, Clone, PartialEq)]
pub enum TimeCoefficient {
    Poly(Vec<f64>),
    Piecewise {
        breaks: Vec<f64>,
        segments: Vec<Vec<f64>>,
    },
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0))
        .collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_trim(mut a: Vec<f64>) -> Vec<f64> {
    while a.len() > 1 && *a.last().unwrap() == 0.0 {
        a.pop();
    }
    if a.is_empty() {
        a.push(0.0);
    }
    a
}

impl TimeCoefficient {
    pub fn constant(c: f64) -> Self {
        TimeCoefficient::Poly(vec![c])
    }

    /// Piecewise constructor with the continuity invariant checked at the
    /// interior breakpoints.
    pub fn piecewise(breaks: Vec<f64>, segments: Vec<Vec<f64>>) -> Result<Self> {
        if breaks.len() != segments.len() + 1 || segments.is_empty() {
            return Err(Error::SpecInvalid(
                "piecewise coefficient needs k+1 breakpoints for k segments".into(),
            ));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::SpecInvalid(
                "piecewise breakpoints must be strictly increasing".into(),
            ));
        }
        for i in 0..segments.len() - 1 {
            let t = breaks[i + 1];
            let left = horner(&segments[i], t);
            let right = horner(&segments[i + 1], t);
            let scale = left.abs().max(right.abs()).max(1.0);
            if (left - right).abs() > 1e-9 * scale {
                return Err(Error::SpecInvalid(format!(
                    "piecewise coefficient discontinuous at t={t}: {left} vs {right}"
                )));
            }
        }
        let segments = segments.into_iter().map(poly_trim).collect();
        Ok(TimeCoefficient::Piecewise { breaks, segments })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeCoefficient::Poly(c) => horner(c, t),
            TimeCoefficient::Piecewise { breaks, segments } => {
                // clamp outside the grid; segments are continuous inside
                let mut idx = 0;
                for i in 0..segments.len() {
                    if t >= breaks[i] {
                        idx = i;
                    }
                }
                horner(&segments[idx], t)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TimeCoefficient::Poly(c) => c.iter().all(|&x| x == 0.0),
            TimeCoefficient::Piecewise { segments, .. } => {
                segments.iter().all(|s| s.iter().all(|&x| x == 0.0))
            }
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        match self {
            TimeCoefficient::Poly(_) => &[],
            TimeCoefficient::Piecewise { breaks, .. } => breaks,
        }
    }

    /// Degree in t (per piece for piecewise coefficients).
    pub fn t_degree(&self) -> usize {
        fn deg(c: &[f64]) -> usize {
            c.iter().rposition(|&x| x != 0.0).unwrap_or(0)
        }
        match self {
            TimeCoefficient::Poly(c) => deg(c),
            TimeCoefficient::Piecewise { segments, .. } => {
                segments.iter().map(|s| deg(s)).max().unwrap_or(0)
            }
        }
    }

    fn segments_on(&self, breaks: &[f64]) -> Vec<Vec<f64>> {
        match self {
            TimeCoefficient::Poly(c) => vec![c.clone(); breaks.len() - 1],
            TimeCoefficient::Piecewise {
                breaks: own,
                segments,
            } => breaks[..breaks.len() - 1]
                .iter()
                .map(|&t| {
                    let mut idx = 0;
                    for i in 0..segments.len() {
                        if t >= own[i] - 1e-15 {
                            idx = i;
                        }
                    }
                    segments[idx].clone()
                })
                .collect(),
        }
    }

    fn merged_breaks(&self, other: &TimeCoefficient) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .breakpoints()
            .iter()
            .chain(other.breakpoints())
            .copied()
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        all.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        all
    }

    fn binop(&self, other: &TimeCoefficient, f: impl Fn(&[f64], &[f64]) -> Vec<f64>) -> Self {
        match (self, other) {
            (TimeCoefficient::Poly(a), TimeCoefficient::Poly(b)) => {
                TimeCoefficient::Poly(poly_trim(f(a, b)))
            }
            _ => {
                let breaks = self.merged_breaks(other);
                let sa = self.segments_on(&breaks);
                let sb = other.segments_on(&breaks);
                let segments = sa
                    .iter()
                    .zip(&sb)
                    .map(|(a, b)| poly_trim(f(a, b)))
                    .collect();
                TimeCoefficient::Piecewise { breaks, segments }
            }
        }
    }

    pub fn add(&self, other: &TimeCoefficient) -> Self {
        self.binop(other, poly_add)
    }

    pub fn mul(&self, other: &TimeCoefficient) -> Self {
        self.binop(other, poly_mul)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.mul(&TimeCoefficient::constant(c))
    }
}

/// Polynomial in x with TimeCoefficient entries: the representation used for
/// drift, diffusion and jump-moment coefficient functions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimePolynomial {
    terms: BTreeMap<MultiIndex, TimeCoefficient>,
}

impl TimePolynomial {
    pub fn zero() -> Self {
        TimePolynomial {
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(d: usize, c: TimeCoefficient) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(MultiIndex::zero(d), c);
        }
        TimePolynomial { terms }
    }

    pub fn term(k: MultiIndex, c: TimeCoefficient) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(k, c);
        }
        TimePolynomial { terms }
    }

    pub fn terms(&self) -> &BTreeMap<MultiIndex, TimeCoefficient> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|c| c.is_zero())
    }

    /// Maximal degree in x over the nonzero terms.
    pub fn x_degree(&self) -> Option<usize> {
        self.terms
            .iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, _)| k.degree() as usize)
            .max()
    }

    pub fn add_term(&mut self, k: MultiIndex, c: TimeCoefficient) {
        let entry = self
            .terms
            .entry(k)
            .or_insert_with(|| TimeCoefficient::constant(0.0));
        *entry = entry.add(&c);
    }

    pub fn add(&self, other: &TimePolynomial) -> TimePolynomial {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c.clone());
        }
        out
    }

    pub fn mul(&self, other: &TimePolynomial) -> TimePolynomial {
        let mut out = TimePolynomial::zero();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                out.add_term(ka.plus(kb), ca.mul(cb));
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> TimePolynomial {
        TimePolynomial {
            terms: self
                .terms
                .iter()
                .map(|(k, v)| (k.clone(), v.scale(c)))
                .collect(),
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(k, c)| c.eval(t) * k.eval(x))
            .sum()
    }

    /// Freeze at time t into a Polynomial on the given basis.
    pub fn at(&self, t: f64, basis: &Arc<MonomialBasis>) -> Result<Polynomial> {
        let mut p = Polynomial::zero(Arc::clone(basis));
        for (k, c) in &self.terms {
            let v = c.eval(t);
            if v == 0.0 {
                continue;
            }
            match basis.index_of(k) {
                Some(_) => p.set_coeff(k, p.coeff(k) + v)?,
                None => {
                    return Err(Error::DegreeOverflow {
                        degree: k.degree() as usize,
                        bound: basis.max_degree(),
                    })
                }
            }
        }
        Ok(p)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .terms
            .values()
            .flat_map(|c| c.breakpoints().iter().copied())
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        all.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        all
    }

    pub fn t_degree(&self) -> usize {
        self.terms.values().map(|c| c.t_degree()).max().unwrap_or(0)
    }
}

/// State-space descriptor used by validation and the Monte Carlo simulator.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpace {
    /// All of R^d.
    Full,
    /// R_+^p x R^{d-p}: first p coordinates non-negative.
    Orthant { p: usize },
    /// Product of intervals [lower_i, upper_i].
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl StateSpace {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            StateSpace::Full => true,
            StateSpace::Orthant { p } => x.iter().take(*p).all(|&v| v >= 0.0),
            StateSpace::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&v, (&l, &u))| v >= l && v <= u),
        }
    }

    /// Clip x into the state space (used by the euler-projected scheme).
    pub fn project(&self, x: &mut [f64]) {
        match self {
            StateSpace::Full => {}
            StateSpace::Orthant { p } => {
                for v in x.iter_mut().take(*p) {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            StateSpace::Box { lower, upper } => {
                for (v, (&l, &u)) in x.iter_mut().zip(lower.iter().zip(upper)) {
                    *v = v.clamp(l, u);
                }
            }
        }
    }

    /// A representative interior point, used for sampling-based validation.
    pub fn sample_points(&self, d: usize, n: usize) -> Vec<Vec<f64>> {
        let mut pts = Vec::with_capacity(n);
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64; // deterministic stratified
            let x: Vec<f64> = (0..d)
                .map(|j| {
                    let v = (u + 0.37 * j as f64).fract();
                    match self {
                        StateSpace::Full => 4.0 * v - 2.0,
                        StateSpace::Orthant { p } => {
                            if j < *p {
                                2.0 * v
                            } else {
                                4.0 * v - 2.0
                            }
                        }
                        StateSpace::Box { lower, upper } => lower[j] + v * (upper[j] - lower[j]),
                    }
                })
                .collect();
            pts.push(x);
        }
        pts
    }
}

/// Descriptor of a built-in jump kernel sampler (finite-activity kernels
/// for the Monte Carlo module).
#[derive(Debug, Clone, PartialEq)]
pub enum SamplerKind {
    /// Downward jumps: K(t,dxi) = 1_[ax,bx](xi) * (-1/log(a/b)) * xi^-1 dxi,
    /// with -1 <= a < b < 0. Unit total intensity.
    JacobiDown { a: f64, b: f64 },
    /// Upward jumps supported on [alpha(1-x), 1-x] with xi^-1 density and
    /// unit intensity, alpha in (0,1). The printed support interval has its
    /// endpoints reversed; we use the orientation that makes it an interval.
    JacobiUp { alpha: f64 },
}

/// Time-dependent polynomial characteristics of an m-polynomial
/// jump-diffusion plus state-space descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSpec {
    pub d: usize,
    pub m: usize,
    pub horizon: f64,
    pub drift: Vec<TimePolynomial>,
    pub diffusion: Vec<Vec<TimePolynomial>>,
    pub jump_moments: BTreeMap<MultiIndex, TimePolynomial>,
    pub state_space: StateSpace,
    pub jump_sampler: Option<SamplerKind>,
}

impl ProcessSpec {
    /// Structural validation: shape, symmetry, m even, jump-moment degrees,
    /// and sampled positive semi-definiteness of a = c + second jump moments.
    /// Degree closure of the drift is deliberately NOT enforced here: the
    /// quadratic-drift counterexample is a legal spec whose generator
    /// application fails with DegreeOverflow.
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::SpecInvalid("d must be >= 1".into()));
        }
        if self.m < 2 || self.m % 2 != 0 {
            return Err(Error::SpecInvalid(format!(
                "moment degree bound m={} must be even and >= 2",
                self.m
            )));
        }
        if self.m > 12 {
            return Err(Error::SpecInvalid(
                "m capped at 12 to keep factorial weights exact".into(),
            ));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::SpecInvalid("horizon T must be positive".into()));
        }
        match &self.state_space {
            StateSpace::Full => {}
            StateSpace::Orthant { p } => {
                if *p > self.d {
                    return Err(Error::SpecInvalid(format!(
                        "orthant coordinate count {p} exceeds d={}",
                        self.d
                    )));
                }
            }
            StateSpace::Box { lower, upper } => {
                if lower.len() != self.d || upper.len() != self.d {
                    return Err(Error::SpecInvalid(
                        "box state space needs one interval per coordinate".into(),
                    ));
                }
            }
        }
        if self.drift.len() != self.d {
            return Err(Error::SpecInvalid(format!(
                "drift has {} entries, expected d={}",
                self.drift.len(),
                self.d
            )));
        }
        if self.diffusion.len() != self.d || self.diffusion.iter().any(|r| r.len() != self.d) {
            return Err(Error::SpecInvalid("diffusion array must be d x d".into()));
        }
        for i in 0..self.d {
            for j in 0..i {
                if self.diffusion[i][j] != self.diffusion[j][i] {
                    return Err(Error::SpecInvalid(format!(
                        "diffusion not symmetric at ({},{})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        for (l, p) in &self.jump_moments {
            let deg = l.degree() as usize;
            if l.dim() != self.d {
                return Err(Error::SpecInvalid(format!(
                    "jump moment index {l} has wrong dimension"
                )));
            }
            if deg < 2 || deg > self.m {
                return Err(Error::SpecInvalid(format!(
                    "jump moment index {l} must satisfy 2 <= |l| <= m"
                )));
            }
            if let Some(xd) = p.x_degree() {
                if xd > deg {
                    return Err(Error::SpecInvalid(format!(
                        "jump moment for {l} has x-degree {xd} > |l| = {deg}"
                    )));
                }
            }
        }
        self.check_a_psd_sampled()?;
        Ok(())
    }

    /// Sampled necessary condition: a(t,x) = c(t,x) + second jump moments
    /// must be PSD at state-space points. Checked, not proved.
    fn check_a_psd_sampled(&self) -> Result<()> {
        let ts: Vec<f64> = (0..5)
            .map(|i| self.horizon * (i as f64 + 0.25) / 5.5)
            .collect();
        let points = self.state_space.sample_points(self.d, 7);
        for &t in &ts {
            for x in &points {
                let mut a = DMatrix::<f64>::zeros(self.d, self.d);
                for i in 0..self.d {
                    for j in 0..self.d {
                        a[(i, j)] = self.diffusion[i][j].eval(t, x);
                        let mut l = MultiIndex::zero(self.d);
                        l.0[i] += 1;
                        l.0[j] += 1;
                        if let Some(jm) = self.jump_moments.get(&l) {
                            a[(i, j)] += jm.eval(t, x);
                        }
                    }
                }
                let sym = (&a + a.transpose()) * 0.5;
                let eig = sym.symmetric_eigen();
                let min_eig = eig.eigenvalues.min();
                let scale = eig.eigenvalues.amax().max(1.0);
                if min_eig < -1e-8 * scale {
                    return Err(Error::SpecInvalid(format!(
                        "a(t,x) not PSD at t={t}, x={x:?} (min eigenvalue {min_eig:e})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Union of all coefficient breakpoints, for exact piecewise quadrature.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut all: Vec<f64> = Vec::new();
        for p in self
            .drift
            .iter()
            .chain(self.diffusion.iter().flatten())
            .chain(self.jump_moments.values())
        {
            all.extend(p.breakpoints());
        }
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        all.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        all
    }

    pub fn has_jumps(&self) -> bool {
        self.jump_moments.values().any(|p| !p.is_zero())
    }

    /// Maximal t-degree over all coefficient functions. The generator is
    /// linear in the coefficients, so its matrix inherits this bound on each
    /// breakpoint piece.
    pub fn t_degree(&self) -> usize {
        self.drift
            .iter()
            .chain(self.diffusion.iter().flatten())
            .chain(self.jump_moments.values())
            .map(|p| p.t_degree())
            .max()
            .unwrap_or(0)
    }
}

/// Apply the generator at time t to a polynomial. The result degree never
/// exceeds deg(f); if any product overflows that bound the characteristics
/// are not degree-closed (e.g. quadratic drift) and DegreeOverflow is raised.
pub fn apply_generator(spec: &ProcessSpec, t: f64, f: &Polynomial) -> Result<Polynomial> {
    if !(0.0 <= t && t < spec.horizon) {
        return Err(Error::SpecInvalid(format!(
            "time t={t} outside [0, T={})",
            spec.horizon
        )));
    }
    let basis = Arc::clone(f.basis());
    if basis.d() != spec.d {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            got: basis.d(),
        });
    }
    let k = match f.degree() {
        None | Some(0) => return Ok(Polynomial::zero(basis)),
        Some(k) => k,
    };
    if k > spec.m {
        return Err(Error::SpecInvalid(format!(
            "deg(f)={k} exceeds the spec moment bound m={}",
            spec.m
        )));
    }
    let mut result = Polynomial::zero(Arc::clone(&basis));

    // drift: sum_i D_i f * b^i(t, .)
    let coef_basis = enumerate_basis(spec.d, spec.m.max(2).max(k))?;
    for i in 0..spec.d {
        let df = partial_derivative(f, i)?;
        if df.is_zero() || spec.drift[i].is_zero() {
            continue;
        }
        let b_i = spec.drift[i].at(t, &coef_basis)?;
        let prod = multiply(&df, &b_i, k)?;
        result.add_assign(&prod.embed(&basis)?)?;
    }

    // diffusion: 1/2 sum_ij D_ij f * c^ij(t, .)
    for i in 0..spec.d {
        let dif = partial_derivative(f, i)?;
        if dif.is_zero() {
            continue;
        }
        for j in 0..spec.d {
            let dijf = partial_derivative(&dif, j)?;
            if dijf.is_zero() || spec.diffusion[i][j].is_zero() {
                continue;
            }
            let c_ij = spec.diffusion[i][j].at(t, &coef_basis)?;
            let prod = multiply(&dijf, &c_ij, k)?;
            result.add_assign(&prod.scale(0.5).embed(&basis)?)?;
        }
    }

    // jumps by Taylor expansion: sum_{2 <= |l| <= k} D^l f / l! * jm[l](t, .)
    for (l, jm) in &spec.jump_moments {
        let deg_l = l.degree() as usize;
        if deg_l > k || jm.is_zero() {
            continue;
        }
        let dlf = derivative_multi(f, l)?;
        if dlf.is_zero() {
            continue;
        }
        let jm_t = jm.at(t, &coef_basis)?;
        let prod = multiply(&dlf, &jm_t, k)?;
        result.add_assign(&prod.scale(1.0 / l.factorial()).embed(&basis)?)?;
    }

    Ok(result)
}

/// Representing matrix of the generator at fixed time on the degree-<= k
/// monomial basis: column j holds the basis coefficients of G_t v_j.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub t: f64,
    pub basis: Arc<MonomialBasis>,
    pub entries: DMatrix<f64>,
}

pub fn generator_matrix(spec: &ProcessSpec, t: f64, k: usize) -> Result<GeneratorMatrix> {
    if k > spec.m {
        return Err(Error::SpecInvalid(format!(
            "requested degree k={k} exceeds m={}",
            spec.m
        )));
    }
    let basis = enumerate_basis(spec.d, k)?;
    let n = basis.len();
    let mut entries = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let vj = Polynomial::monomial(Arc::clone(&basis), j);
        let g = apply_generator(spec, t, &vj)?;
        for (i, &c) in g.coeffs().iter().enumerate() {
            entries[(i, j)] = c;
        }
    }
    Ok(GeneratorMatrix { t, basis, entries })
}

/// Result of the numerical commutativity probe.
#[derive(Debug, Clone)]
pub struct CommutatorReport {
    pub commuting: bool,
    pub max_norm: f64,
    pub tol: f64,
}

/// Evaluate ||[H_u, H_v]||_2 on a grid x grid sample of [s,t]^2 and compare
/// against tol. When tol is not finite the probe substitutes the default
/// 1e-12 * max ||H||_2^2 tie-break.
pub fn commutator_probe(
    spec: &ProcessSpec,
    s: f64,
    t: f64,
    k: usize,
    grid: usize,
    tol: f64,
) -> Result<CommutatorReport> {
    if grid < 2 {
        return Err(Error::SpecInvalid("probe grid must be >= 2".into()));
    }
    let mats: Vec<DMatrix<f64>> = (0..grid)
        .map(|i| {
            let u = s + (t - s) * i as f64 / (grid - 1) as f64;
            // stay strictly inside [0, T)
            let u = u.min(spec.horizon * (1.0 - 1e-12));
            generator_matrix(spec, u, k).map(|g| g.entries)
        })
        .collect::<Result<_>>()?;
    let mut max_h: f64 = 0.0;
    for m in &mats {
        max_h = max_h.max(spectral_norm(m)?);
    }
    let tol = if tol.is_finite() {
        tol
    } else {
        1e-12 * max_h * max_h
    };
    let mut max_norm: f64 = 0.0;
    for i in 0..grid {
        for j in (i + 1)..grid {
            let c = commutator(&mats[i], &mats[j]);
            max_norm = max_norm.max(spectral_norm(&c)?);
        }
    }
    Ok(CommutatorReport {
        commuting: max_norm <= tol,
        max_norm,
        tol,
    })
}
