//! Euler-Maruyama path simulation with compound-Poisson jumps: the
//! independent statistical oracle for the matrix-based moments.
//!
//! Every path owns its own counter-based random stream derived from
//! (seed, path index), so results are bit-for-bit reproducible regardless
//! of how paths are scheduled across workers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::genmat::{ProcessSpec, SamplerKind, StateSpace};
use crate::linalg::psd_cholesky_into;
use crate::polyalg::MultiIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    /// Clips the state into the declared state space after every step.
    EulerProjected,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.n_steps == 0 {
            return Err(Error::SpecInvalid(
                "n_paths and n_steps must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MomentEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub elapsed: f64,
}

/// Finite-activity jump kernel that can be sampled pathwise.
pub trait JumpKernelSampler: Sync {
    fn intensity(&self, t: f64, x: &[f64]) -> f64;
    fn draw(&self, t: f64, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64>;
    /// First moment of the kernel, integral of xi K(t,x,dxi). The declared
    /// drift is the special-semimartingale drift, so the simulator removes
    /// this compensator from the pathwise drift and adds raw jumps back.
    fn mean(&self, t: f64, x: &[f64]) -> Vec<f64>;
}

impl JumpKernelSampler for SamplerKind {
    fn intensity(&self, _t: f64, _x: &[f64]) -> f64 {
        // both built-in kernels have unit total mass by construction
        1.0
    }

    fn draw(&self, _t: f64, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            // density proportional to 1/|xi| on [ax, bx] (downward jumps),
            // so |xi| is log-uniform on [-bx, -ax]
            SamplerKind::JacobiDown { a, b } => {
                let x1 = x[0];
                if x1 <= 0.0 {
                    return vec![0.0];
                }
                let lo = (-b * x1).ln();
                let hi = (-a * x1).ln();
                let u: f64 = rng.gen();
                vec![-(lo + u * (hi - lo)).exp()]
            }
            // log-uniform on [alpha(1-x), 1-x] (upward jumps)
            SamplerKind::JacobiUp { alpha } => {
                let gap = 1.0 - x[0];
                if gap <= 0.0 {
                    return vec![0.0];
                }
                let lo = (alpha * gap).ln();
                let hi = gap.ln();
                let u: f64 = rng.gen();
                vec![(lo + u * (hi - lo)).exp()]
            }
        }
    }

    fn mean(&self, _t: f64, x: &[f64]) -> Vec<f64> {
        match self {
            SamplerKind::JacobiDown { a, b } => {
                let x1 = x[0].max(0.0);
                vec![x1 * (b - a) / -(a / b).ln()]
            }
            SamplerKind::JacobiUp { alpha } => {
                let gap = (1.0 - x[0]).max(0.0);
                vec![gap * (1.0 - alpha) / -alpha.ln()]
            }
        }
    }
}

fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path.wrapping_add(1));
    rng
}

fn simulate_one_path(
    spec: &ProcessSpec,
    s: f64,
    t: f64,
    x0: &[f64],
    cfg: &SimConfig,
    sampler: Option<&SamplerKind>,
    path: usize,
) -> Result<Vec<f64>> {
    let d = spec.d;
    let dt = (t - s) / cfg.n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let mut rng = path_rng(cfg.seed, path as u64);
    let mut x = x0.to_vec();
    let mut c = DMatrix::<f64>::zeros(d, d);
    let mut l = DMatrix::<f64>::zeros(d, d);
    let mut dx = vec![0.0; d];
    let mut z = vec![0.0; d];
    for step in 0..cfg.n_steps {
        let tk = s + step as f64 * dt; // left-endpoint convention
        // drift, minus the jump compensator when a kernel is attached
        for i in 0..d {
            dx[i] = spec.drift[i].eval(tk, &x) * dt;
        }
        if let Some(k) = sampler {
            let m1 = k.mean(tk, &x);
            for i in 0..d {
                dx[i] -= m1[i] * dt;
            }
        }
        // diffusion; the one-dimensional case stays on scalars
        if d == 1 {
            let v = spec.diffusion[0][0].eval(tk, &x);
            if v < -1e-10 * v.abs().max(1.0) {
                return Err(Error::DiffusionNotPsd { t: tk, pivot: v });
            }
            if v > 0.0 {
                let g: f64 = StandardNormal.sample(&mut rng);
                dx[0] += v.sqrt() * g * sqrt_dt;
            }
        } else {
            let mut has_diffusion = false;
            for i in 0..d {
                for j in 0..d {
                    let v = spec.diffusion[i][j].eval(tk, &x);
                    c[(i, j)] = v;
                    if v != 0.0 {
                        has_diffusion = true;
                    }
                }
            }
            if has_diffusion {
                psd_cholesky_into(&c, &mut l, 1e-10)
                    .map_err(|pivot| Error::DiffusionNotPsd { t: tk, pivot })?;
                for zi in z.iter_mut() {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *zi = g;
                }
                for i in 0..d {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += l[(i, j)] * z[j];
                    }
                    dx[i] += acc * sqrt_dt;
                }
            }
        }
        // compound-Poisson jumps
        if let Some(k) = sampler {
            let lambda = k.intensity(tk, &x);
            if lambda > 0.0 {
                let n_jumps = Poisson::new(lambda * dt)
                    .map_err(|e| Error::Numerical(format!("poisson: {e}")))?
                    .sample(&mut rng) as usize;
                for _ in 0..n_jumps {
                    let xi = k.draw(tk, &x, &mut rng);
                    for i in 0..d {
                        dx[i] += xi[i];
                    }
                }
            }
        }
        for i in 0..d {
            x[i] += dx[i];
        }
        if cfg.scheme == Scheme::EulerProjected {
            spec.state_space.project(&mut x);
        }
    }
    Ok(x)
}

/// Simulate terminal states of n_paths trajectories from X_s = x0.
pub fn simulate_paths(
    spec: &ProcessSpec,
    s: f64,
    t: f64,
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    if !(s < t) {
        return Err(Error::SpecInvalid("need s < t for simulation".into()));
    }
    if x0.len() != spec.d {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            got: x0.len(),
        });
    }
    let sampler = match (&spec.jump_sampler, spec.has_jumps()) {
        (Some(k), _) => Some(k),
        (None, true) => return Err(Error::NoSampler),
        (None, false) => None,
    };
    (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| simulate_one_path(spec, s, t, x0, cfg, sampler, p))
        .collect()
}

/// Pairwise (cascade) summation for reproducible reductions.
fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Mean and standard error of xi -> xi^kidx over a terminal sample set.
pub fn moment_from_samples(samples: &[Vec<f64>], kidx: &MultiIndex) -> MomentEstimate {
    let n = samples.len();
    let vals: Vec<f64> = samples.iter().map(|x| kidx.eval(x)).collect();
    let mean = pairwise_sum(&vals) / n as f64;
    let sq: Vec<f64> = vals.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = if n > 1 {
        pairwise_sum(&sq) / (n - 1) as f64
    } else {
        0.0
    };
    MomentEstimate {
        mean,
        stderr: (var / n as f64).sqrt(),
        n_paths: n,
        elapsed: 0.0,
    }
}

/// Monte Carlo estimate of E[X_t^kidx | X_s = x0].
pub fn estimate_moment(
    spec: &ProcessSpec,
    s: f64,
    t: f64,
    x0: &[f64],
    kidx: &MultiIndex,
    cfg: &SimConfig,
) -> Result<MomentEstimate> {
    let start = std::time::Instant::now();
    let samples = simulate_paths(spec, s, t, x0, cfg)?;
    let mut est = moment_from_samples(&samples, kidx);
    est.elapsed = start.elapsed().as_secs_f64();
    Ok(est)
}

/// One row of the kernel-consistency report.
#[derive(Debug, Clone)]
pub struct KernelMomentCheck {
    pub index: MultiIndex,
    pub declared: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct KernelConsistencyReport {
    pub t: f64,
    pub x: Vec<f64>,
    pub checks: Vec<KernelMomentCheck>,
    pub all_ok: bool,
}

/// Compare intensity-weighted empirical moments of the sampler against the
/// declared jump-moment polynomials (4-standard-error flag, report only).
pub fn kernel_consistency_check(
    sampler: &SamplerKind,
    spec: &ProcessSpec,
    t: f64,
    x: &[f64],
    n: usize,
) -> Result<KernelConsistencyReport> {
    if n < 10_000 {
        return Err(Error::SpecInvalid(
            "kernel consistency check needs n >= 10^4 draws".into(),
        ));
    }
    let lambda = sampler.intensity(t, x);
    let mut rng = path_rng(0x6b65726e, 0);
    let draws: Vec<Vec<f64>> = (0..n).map(|_| sampler.draw(t, x, &mut rng)).collect();
    let mut checks = Vec::new();
    for (l, jm) in &spec.jump_moments {
        let declared = jm.eval(t, x);
        let vals: Vec<f64> = draws.iter().map(|xi| l.eval(xi)).collect();
        let mean = pairwise_sum(&vals) / n as f64;
        let sq: Vec<f64> = vals.iter().map(|v| (v - mean) * (v - mean)).collect();
        let se = (pairwise_sum(&sq) / ((n - 1) as f64 * n as f64)).sqrt();
        let empirical = lambda * mean;
        let stderr = lambda * se;
        let ok = (empirical - declared).abs() <= 4.0 * stderr + 1e-12;
        checks.push(KernelMomentCheck {
            index: l.clone(),
            declared,
            empirical,
            stderr,
            ok,
        });
    }
    let all_ok = checks.iter().all(|c| c.ok);
    Ok(KernelConsistencyReport {
        t,
        x: x.to_vec(),
        checks,
        all_ok,
    })
}

/// True when every terminal state lies in the declared state space.
pub fn all_in_state_space(space: &StateSpace, samples: &[Vec<f64>]) -> bool {
    samples.iter().all(|x| space.contains(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmat::TimeCoefficient;
    use crate::processes::builtin_typed::*;

    fn cfg(n_paths: usize, n_steps: usize) -> SimConfig {
        SimConfig {
            n_paths,
            n_steps,
            seed: 42,
            scheme: Scheme::Euler,
        }
    }

    #[test]
    fn pure_drift_is_deterministic() {
        // diffusion zeroed: terminal = x0 + A(t) - A(s) up to O(dt) bias
        let mut spec = bm_drift(TimeCoefficient::Poly(vec![0.0, 1.0]), 4, 2.0).unwrap();
        spec.diffusion[0][0] = crate::genmat::TimePolynomial::zero();
        let samples = simulate_paths(&spec, 0.0, 1.0, &[0.25], &cfg(16, 4000)).unwrap();
        let want = 0.25 + 0.5;
        for x in &samples {
            assert!((x[0] - want).abs() < 1e-3);
            assert_eq!(x[0], samples[0][0]); // all paths identical
        }
    }

    #[test]
    fn bm_drift_mean_within_three_stderr() {
        let spec = bm_drift(TimeCoefficient::Poly(vec![0.0, 1.0]), 4, 2.0).unwrap();
        let est =
            estimate_moment(&spec, 0.0, 1.0, &[0.0], &MultiIndex(vec![1]), &cfg(20_000, 200))
                .unwrap();
        let want = 0.5;
        assert!(
            (est.mean - want).abs() < 3.0 * est.stderr + 0.005,
            "mean {} want {want} se {}",
            est.mean,
            est.stderr
        );
    }

    #[test]
    fn bm_second_moment_variance_one() {
        let spec = bm_drift(TimeCoefficient::constant(0.0), 4, 2.0).unwrap();
        let est =
            estimate_moment(&spec, 0.0, 1.0, &[0.0], &MultiIndex(vec![2]), &cfg(40_000, 100))
                .unwrap();
        assert!((est.mean - 1.0).abs() < 3.0 * est.stderr + 0.01);
    }

    #[test]
    fn zero_index_moment_is_exactly_one() {
        let spec = bm_drift(TimeCoefficient::constant(1.0), 4, 2.0).unwrap();
        let est = estimate_moment(&spec, 0.0, 0.5, &[0.3], &MultiIndex(vec![0]), &cfg(100, 10))
            .unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn seed_determinism_across_worker_counts() {
        let spec = jacobi_jumps(1.0, 0.5, -0.5, -0.1, 4, 2.0).unwrap();
        let c = SimConfig {
            n_paths: 512,
            n_steps: 50,
            seed: 7,
            scheme: Scheme::EulerProjected,
        };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| simulate_paths(&spec, 0.0, 1.0, &[0.5], &c).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn projected_scheme_respects_box() {
        let spec = jacobi(TimeCoefficient::constant(0.2), 1.0, 4, 2.0).unwrap();
        let c = SimConfig {
            n_paths: 2000,
            n_steps: 100,
            seed: 3,
            scheme: Scheme::EulerProjected,
        };
        let samples = simulate_paths(&spec, 0.0, 1.0, &[0.5], &c).unwrap();
        assert!(all_in_state_space(&spec.state_space, &samples));
    }

    #[test]
    fn missing_sampler_is_an_error() {
        let mut spec = jacobi_jumps(1.0, 0.5, -0.5, -0.1, 4, 2.0).unwrap();
        spec.jump_sampler = None;
        let r = simulate_paths(&spec, 0.0, 0.5, &[0.5], &cfg(10, 10));
        assert!(matches!(r, Err(Error::NoSampler)));
    }

    #[test]
    fn jacobi_kernel_consistency() {
        let spec = jacobi_jumps(1.0, 0.5, -0.5, -0.1, 4, 2.0).unwrap();
        let sampler = spec.jump_sampler.clone().unwrap();
        let rep = kernel_consistency_check(&sampler, &spec, 0.3, &[0.6], 200_000).unwrap();
        assert!(rep.all_ok, "{:#?}", rep.checks);
        // second moment closed form: x^2 (b^2 - a^2) / (-2 log(a/b))
        let (a, b): (f64, f64) = (-0.5, -0.1);
        let x: f64 = 0.6;
        let want = x * x * (b * b - a * a) / (-2.0 * (a / b).ln());
        let row = rep
            .checks
            .iter()
            .find(|c| c.index == MultiIndex(vec![2]))
            .unwrap();
        assert!((row.declared - want).abs() < 1e-14);
    }

    #[test]
    fn bias_halves_with_step_doubling() {
        // a(t) = t with left-endpoint evaluation has exact mean bias
        // -(t-s) dt / 2, so doubling the steps halves it
        let spec = bm_drift(TimeCoefficient::Poly(vec![0.0, 1.0]), 4, 2.0).unwrap();
        let exact = 0.5;
        let est8 =
            estimate_moment(&spec, 0.0, 1.0, &[0.0], &MultiIndex(vec![1]), &cfg(200_000, 8))
                .unwrap();
        let est16 =
            estimate_moment(&spec, 0.0, 1.0, &[0.0], &MultiIndex(vec![1]), &cfg(200_000, 16))
                .unwrap();
        let e8 = (est8.mean - exact).abs();
        let e16 = (est16.mean - exact).abs();
        assert!(
            e16 < 0.75 * e8 + 3.0 * est16.stderr,
            "e8={e8:e} e16={e16:e}"
        );
    }
}
