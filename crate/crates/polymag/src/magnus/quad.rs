//! Gauss-Legendre quadrature with panel doubling, including nested
//! simplex integrals for the Magnus commutator terms.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::QuadratureConfig;

/// Nodes and weights of n-point Gauss-Legendre quadrature on [-1, 1],
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // evaluate P_n and its derivative
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Split [s, t] at the interior points of `cuts`, producing panel edges.
fn segment_edges(s: f64, t: f64, cuts: &[f64], panels_per_segment: usize) -> Vec<f64> {
    let mut edges = vec![s];
    for &c in cuts {
        if c > s + 1e-15 && c < t - 1e-15 {
            edges.push(c);
        }
    }
    edges.push(t);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut fine = Vec::with_capacity(edges.len() * panels_per_segment);
    for w in edges.windows(2) {
        for p in 0..panels_per_segment {
            fine.push(w[0] + (w[1] - w[0]) * p as f64 / panels_per_segment as f64);
        }
    }
    fine.push(t);
    fine
}

fn gl_matrix_once(
    f: &mut dyn FnMut(f64) -> Result<DMatrix<f64>>,
    s: f64,
    t: f64,
    cuts: &[f64],
    panels: usize,
    nodes: &[f64],
    weights: &[f64],
) -> Result<DMatrix<f64>> {
    let edges = segment_edges(s, t, cuts, panels);
    let mut acc: Option<DMatrix<f64>> = None;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (&x, &wt) in nodes.iter().zip(weights) {
            let v = f(mid + half * x)? * (wt * half);
            acc = Some(match acc {
                None => v,
                Some(m) => m + v,
            });
        }
    }
    acc.ok_or_else(|| Error::Numerical("empty quadrature interval".into()))
}

/// Adaptive matrix-valued integral of f over [s, t]; panels are doubled
/// until two successive estimates agree to cfg.rtol.
pub fn integrate_matrix(
    mut f: impl FnMut(f64) -> Result<DMatrix<f64>>,
    s: f64,
    t: f64,
    cuts: &[f64],
    cfg: &QuadratureConfig,
) -> Result<DMatrix<f64>> {
    if (t - s).abs() == 0.0 {
        let probe = f(s)?;
        return Ok(DMatrix::zeros(probe.nrows(), probe.ncols()));
    }
    let (nodes, weights) = gauss_legendre(cfg.gl_order);
    let mut panels = 1usize;
    let mut prev = gl_matrix_once(&mut f, s, t, cuts, panels, &nodes, &weights)?;
    let mut last_diff = f64::INFINITY;
    for r in 0..cfg.max_refine {
        panels *= 2;
        let cur = gl_matrix_once(&mut f, s, t, cuts, panels, &nodes, &weights)?;
        last_diff = (&cur - &prev).amax();
        let scale = cur.amax();
        if last_diff <= cfg.rtol * scale + 1e-14 {
            return Ok(cur);
        }
        prev = cur;
        let _ = r;
    }
    Err(Error::QuadratureNonConvergence {
        refinements: cfg.max_refine,
        last_diff,
    })
}

/// Adaptive scalar integral of f over [s, t].
pub fn integrate_scalar(
    mut f: impl FnMut(f64) -> Result<f64>,
    s: f64,
    t: f64,
    cuts: &[f64],
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let wrapped =
        |u: f64| -> Result<DMatrix<f64>> { Ok(DMatrix::from_element(1, 1, f(u)?)) };
    Ok(integrate_matrix(wrapped, s, t, cuts, cfg)?[(0, 0)])
}

/// Nested double integral over the simplex s < v < u < t:
/// I = int_s^t du int_s^u dv f(u, v), with tensor-product Gauss-Legendre
/// nodes mapped onto the triangle and panel doubling in both levels.
pub fn integrate_simplex2(
    mut f: impl FnMut(f64, f64) -> Result<DMatrix<f64>>,
    s: f64,
    t: f64,
    cuts: &[f64],
    cfg: &QuadratureConfig,
) -> Result<DMatrix<f64>> {
    if (t - s).abs() == 0.0 {
        let probe = f(s, s)?;
        return Ok(DMatrix::zeros(probe.nrows(), probe.ncols()));
    }
    let (nodes, weights) = gauss_legendre(cfg.gl_order);
    let mut once = |panels: usize| -> Result<DMatrix<f64>> {
        gl_matrix_once(
            &mut |u| gl_matrix_once(&mut |v| f(u, v), s, u, cuts, panels, &nodes, &weights),
            s,
            t,
            cuts,
            panels,
            &nodes,
            &weights,
        )
    };
    adaptive(&mut once, cfg)
}

/// Triple simplex integral over s < w < v < u < t:
/// I = int_s^t du int_s^u dv int_s^v dw f(u, v, w).
pub fn integrate_simplex3(
    mut f: impl FnMut(f64, f64, f64) -> Result<DMatrix<f64>>,
    s: f64,
    t: f64,
    cuts: &[f64],
    cfg: &QuadratureConfig,
) -> Result<DMatrix<f64>> {
    if (t - s).abs() == 0.0 {
        let probe = f(s, s, s)?;
        return Ok(DMatrix::zeros(probe.nrows(), probe.ncols()));
    }
    let (nodes, weights) = gauss_legendre(cfg.gl_order);
    let mut once = |panels: usize| -> Result<DMatrix<f64>> {
        gl_matrix_once(
            &mut |u| {
                gl_matrix_once(
                    &mut |v| {
                        gl_matrix_once(&mut |w| f(u, v, w), s, v, cuts, panels, &nodes, &weights)
                    },
                    s,
                    u,
                    cuts,
                    panels,
                    &nodes,
                    &weights,
                )
            },
            s,
            t,
            cuts,
            panels,
            &nodes,
            &weights,
        )
    };
    adaptive(&mut once, cfg)
}

fn adaptive(
    once: &mut dyn FnMut(usize) -> Result<DMatrix<f64>>,
    cfg: &QuadratureConfig,
) -> Result<DMatrix<f64>> {
    let mut panels = 1usize;
    let mut prev = once(panels)?;
    let mut last_diff = f64::INFINITY;
    for _ in 0..cfg.max_refine {
        panels *= 2;
        let cur = once(panels)?;
        last_diff = (&cur - &prev).amax();
        if last_diff <= cfg.rtol * cur.amax() + 1e-14 {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureNonConvergence {
        refinements: cfg.max_refine,
        last_diff,
    })
}
