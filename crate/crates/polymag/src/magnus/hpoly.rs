//! Piecewise matrix-polynomial form of the generator family H_t.
//!
//! The generator matrix depends polynomially on t between coefficient
//! breakpoints, with degree bounded by the largest t-degree in the
//! characteristics. Recovering the matrix coefficients once (by sampling
//! and a Vandermonde solve) turns every iterated Magnus integral into a
//! closed-form expression in monomial simplex moments: no nested
//! quadrature, exact up to roundoff.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::genmat::{generator_matrix, ProcessSpec};
use crate::linalg::commutator;

struct Piece {
    a: f64,
    b: f64,
    /// H(t) = sum_r coeffs[r] t^r on [a, b], t in global time.
    coeffs: Vec<DMatrix<f64>>,
}

pub struct HPoly {
    n: usize,
    horizon: f64,
    pieces: Vec<Piece>,
}

/// int_a^b u^j du.
fn mono(a: f64, b: f64, j: usize) -> f64 {
    let p = (j + 1) as f64;
    (b.powi(j as i32 + 1) - a.powi(j as i32 + 1)) / p
}

/// int_a^b u^j int_a^u v^k dv du.
fn tri(a: f64, b: f64, j: usize, k: usize) -> f64 {
    (mono(a, b, j + k + 1) - a.powi(k as i32 + 1) * mono(a, b, j)) / (k + 1) as f64
}

/// int_a^b u^j int_a^u v^k int_a^v w^l dw dv du.
fn simp(a: f64, b: f64, j: usize, k: usize, l: usize) -> f64 {
    let al = a.powi(l as i32 + 1);
    let inner = (mono(a, b, j + k + l + 2) - a.powi((k + l + 2) as i32) * mono(a, b, j))
        / (k + l + 2) as f64
        - al * (mono(a, b, j + k + 1) - a.powi(k as i32 + 1) * mono(a, b, j)) / (k + 1) as f64;
    inner / (l + 1) as f64
}

impl HPoly {
    pub fn build(spec: &ProcessSpec, k: usize) -> Result<HPoly> {
        let r = spec.t_degree();
        if r > 24 {
            return Err(Error::Numerical(format!(
                "coefficient t-degree {r} too high for stable interpolation"
            )));
        }
        let mut edges: Vec<f64> = vec![0.0];
        for &c in &spec.breakpoints() {
            if c > 0.0 && c < spec.horizon {
                edges.push(c);
            }
        }
        edges.push(spec.horizon);

        let mut pieces = Vec::new();
        let mut n = 0;
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            // interior Chebyshev-like nodes: never on a breakpoint
            let nodes: Vec<f64> = (0..=r)
                .map(|i| a + (b - a) * (2 * i + 1) as f64 / (2 * (r + 1)) as f64)
                .collect();
            let samples: Vec<DMatrix<f64>> = nodes
                .iter()
                .map(|&t| generator_matrix(spec, t, k).map(|g| g.entries))
                .collect::<Result<_>>()?;
            n = samples[0].nrows();
            let coeffs = if r == 0 {
                vec![samples.into_iter().next().unwrap()]
            } else {
                let v = DMatrix::<f64>::from_fn(r + 1, r + 1, |i, p| nodes[i].powi(p as i32));
                // stack vec(H(t_i)) as rows and solve V C = S entry-wise
                let mut s = DMatrix::<f64>::zeros(r + 1, n * n);
                for (i, h) in samples.iter().enumerate() {
                    for (idx, &val) in h.as_slice().iter().enumerate() {
                        s[(i, idx)] = val;
                    }
                }
                let c = v
                    .lu()
                    .solve(&s)
                    .ok_or_else(|| Error::Numerical("singular Vandermonde system".into()))?;
                (0..=r)
                    .map(|p| {
                        DMatrix::from_fn(n, n, |i, j| c[(p, j * n + i)])
                    })
                    .collect()
            };
            pieces.push(Piece { a, b, coeffs });
        }
        Ok(HPoly {
            n,
            horizon: spec.horizon,
            pieces,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// H at time t (clamped into [0, T]).
    pub fn at(&self, t: f64) -> DMatrix<f64> {
        let t = t.clamp(0.0, self.horizon);
        let piece = self
            .pieces
            .iter()
            .rev()
            .find(|p| t >= p.a)
            .unwrap_or(&self.pieces[0]);
        let mut h = DMatrix::zeros(self.n, self.n);
        for c in piece.coeffs.iter().rev() {
            h = h * t + c;
        }
        h
    }

    /// Pieces clipped to [s, t], ascending.
    fn clipped(&self, s: f64, t: f64) -> Vec<(f64, f64, &[DMatrix<f64>])> {
        self.pieces
            .iter()
            .filter_map(|p| {
                let a = p.a.max(s);
                let b = p.b.min(t);
                if a < b {
                    Some((a, b, p.coeffs.as_slice()))
                } else {
                    None
                }
            })
            .collect()
    }

    fn zeros(&self) -> DMatrix<f64> {
        DMatrix::zeros(self.n, self.n)
    }

    fn piece_integral(part: &(f64, f64, &[DMatrix<f64>])) -> DMatrix<f64> {
        let (a, b, coeffs) = part;
        let mut acc = coeffs[0].clone() * mono(*a, *b, 0);
        for (r, c) in coeffs.iter().enumerate().skip(1) {
            acc += c * mono(*a, *b, r);
        }
        acc
    }

    /// Omega_1 = int_s^t H_u du, exactly.
    pub fn omega1(&self, s: f64, t: f64) -> DMatrix<f64> {
        let mut acc = self.zeros();
        for part in self.clipped(s, t) {
            acc += Self::piece_integral(&part);
        }
        acc
    }

    /// Raw double integral int_{s<v<u<t} [H_u, H_v] dv du, exactly.
    pub fn simplex2_commutator(&self, s: f64, t: f64) -> DMatrix<f64> {
        let parts = self.clipped(s, t);
        let ints: Vec<DMatrix<f64>> = parts.iter().map(Self::piece_integral).collect();
        let mut acc = self.zeros();
        for (p, part) in parts.iter().enumerate() {
            // earlier pieces contribute a factored rectangle term
            for q in 0..p {
                acc += commutator(&ints[p], &ints[q]);
            }
            // triangle within the piece
            let (a, b, c) = part;
            for (j, cj) in c.iter().enumerate() {
                for (k, ck) in c.iter().enumerate() {
                    if j == k {
                        continue;
                    }
                    acc += commutator(cj, ck) * tri(*a, *b, j, k);
                }
            }
        }
        acc
    }

    /// Raw triple integral over s < w < v < u < t of
    /// [H_u, [H_v, H_w]] + [H_w, [H_v, H_u]], exactly.
    pub fn simplex3_commutator(&self, s: f64, t: f64) -> DMatrix<f64> {
        let parts = self.clipped(s, t);
        let ints: Vec<DMatrix<f64>> = parts.iter().map(Self::piece_integral).collect();
        let f = |u: &DMatrix<f64>, v: &DMatrix<f64>, w: &DMatrix<f64>| {
            commutator(u, &commutator(v, w)) + commutator(w, &commutator(v, u))
        };
        let mut acc = self.zeros();
        for (p, pu) in parts.iter().enumerate() {
            for q in 0..=p {
                for r in 0..=q {
                    let pv = &parts[q];
                    let pw = &parts[r];
                    if r < q && q < p {
                        acc += f(&ints[p], &ints[q], &ints[r]);
                    } else if r < q {
                        // u, v share a piece (q == p), w earlier
                        let (a, b, c) = pu;
                        for (j, cj) in c.iter().enumerate() {
                            for (k, ck) in c.iter().enumerate() {
                                acc += f(cj, ck, &ints[r]) * tri(*a, *b, j, k);
                            }
                        }
                    } else if q < p {
                        // v, w share a piece (r == q), u later
                        let (a, b, c) = pv;
                        for (k, ck) in c.iter().enumerate() {
                            for (l, cl) in c.iter().enumerate() {
                                acc += f(&ints[p], ck, cl) * tri(*a, *b, k, l);
                            }
                        }
                    } else {
                        // all three in one piece
                        let (a, b, c) = pw;
                        for (j, cj) in c.iter().enumerate() {
                            for (k, ck) in c.iter().enumerate() {
                                for (l, cl) in c.iter().enumerate() {
                                    acc += f(cj, ck, cl) * simp(*a, *b, j, k, l);
                                }
                            }
                        }
                    }
                }
            }
        }
        acc
    }
}
