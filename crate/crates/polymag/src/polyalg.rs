//! Multi-index monomial bases and exact polynomial arithmetic over R^d.
//!
//! Everything downstream (generator matrices, Magnus terms, moments) is
//! expressed on the graded monomial basis built here. Ordering is graded
//! lexicographic so that degree-preserving operators get block
//! upper-triangular representing matrices.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Exponent tuple k = (k_1, ..., k_d); |k| is the total degree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    /// The unit index e_i (x_i to the first power), i zero-based.
    pub fn unit(d: usize, i: usize) -> Self {
        let mut k = vec![0; d];
        k[i] = 1;
        MultiIndex(k)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Componentwise sum, the exponent of a monomial product.
    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| a + b)
                .collect(),
        )
    }

    /// k! as a product of coordinate factorials. Exact for degrees <= 12.
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&e| (1..=e as u64).product::<u64>() as f64)
            .product()
    }

    /// x^k.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }

    // graded order; within a degree x1 precedes x2 etc., so the exponent
    // vectors compare lexicographically in reverse
    fn graded_lex_cmp(&self, other: &MultiIndex) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.graded_lex_cmp(other)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Graded monomial basis of polynomials of degree <= m on R^d.
/// Index 0 is always the constant monomial.
#[derive(Debug)]
pub struct MonomialBasis {
    d: usize,
    m: usize,
    order: Vec<MultiIndex>,
    pos: HashMap<MultiIndex, usize>,
}

impl PartialEq for MonomialBasis {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.m == other.m
    }
}

impl MonomialBasis {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn max_degree(&self) -> usize {
        self.m
    }

    /// Basis size N = C(d + m, d).
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn order(&self) -> &[MultiIndex] {
        &self.order
    }

    pub fn index_of(&self, k: &MultiIndex) -> Option<usize> {
        self.pos.get(k).copied()
    }

    /// Row vector (v_1(x), ..., v_N(x)).
    pub fn eval_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(self.order.iter().map(|k| k.eval(x)).collect())
    }
}

/// Enumerate the graded monomial basis of degree <= m on R^d.
pub fn enumerate_basis(d: usize, m: usize) -> Result<Arc<MonomialBasis>> {
    if d == 0 {
        return Err(Error::SpecInvalid("state dimension d must be >= 1".into()));
    }
    let mut order = Vec::new();
    let mut current = vec![0u32; d];
    gen_indices(d, m as u32, 0, &mut current, &mut order);
    order.sort();
    let pos = order
        .iter()
        .enumerate()
        .map(|(i, k)| (k.clone(), i))
        .collect();
    Ok(Arc::new(MonomialBasis { d, m, order, pos }))
}

fn gen_indices(d: usize, m: u32, coord: usize, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if coord == d {
        out.push(MultiIndex(current.clone()));
        return;
    }
    let used: u32 = current[..coord].iter().sum();
    for e in 0..=(m - used) {
        current[coord] = e;
        gen_indices(d, m, coord + 1, current, out);
    }
    current[coord] = 0;
}

/// Dense coefficient vector over a monomial basis.
#[derive(Debug, Clone)]
pub struct Polynomial {
    basis: Arc<MonomialBasis>,
    coeffs: Vec<f64>,
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        self.basis == other.basis && self.coeffs == other.coeffs
    }
}

impl Polynomial {
    pub fn zero(basis: Arc<MonomialBasis>) -> Self {
        let n = basis.len();
        Polynomial {
            basis,
            coeffs: vec![0.0; n],
        }
    }

    pub fn from_coeffs(basis: Arc<MonomialBasis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: coeffs.len(),
            });
        }
        Ok(Polynomial { basis, coeffs })
    }

    pub fn constant(basis: Arc<MonomialBasis>, c: f64) -> Self {
        let mut p = Polynomial::zero(basis);
        p.coeffs[0] = c;
        p
    }

    /// The basis monomial v_j.
    pub fn monomial(basis: Arc<MonomialBasis>, j: usize) -> Self {
        let mut p = Polynomial::zero(basis);
        p.coeffs[j] = 1.0;
        p
    }

    pub fn basis(&self) -> &Arc<MonomialBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: &MultiIndex) -> f64 {
        self.basis.index_of(k).map_or(0.0, |i| self.coeffs[i])
    }

    pub fn set_coeff(&mut self, k: &MultiIndex, v: f64) -> Result<()> {
        let i = self
            .basis
            .index_of(k)
            .ok_or_else(|| Error::SpecInvalid(format!("monomial {k} not in basis")))?;
        self.coeffs[i] = v;
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// None for the zero polynomial (the -infinity sentinel).
    pub fn degree(&self) -> Option<usize> {
        self.basis
            .order()
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, &c)| c != 0.0)
            .map(|(k, _)| k.degree() as usize)
            .max()
    }

    /// Max-abs coefficient norm. On R^d representations are unique, so this
    /// realizes the representation-infimum norm.
    pub fn norm_max(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |a, &c| a.max(c.abs()))
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.basis.d() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.d(),
                got: x.len(),
            });
        }
        Ok(self
            .basis
            .order()
            .iter()
            .zip(&self.coeffs)
            .map(|(k, &c)| c * k.eval(x))
            .sum())
    }

    pub fn add_assign(&mut self, other: &Polynomial) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::SpecInvalid("basis mismatch in polynomial add".into()));
        }
        for (a, &b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        Polynomial {
            basis: Arc::clone(&self.basis),
            coeffs: self.coeffs.iter().map(|&a| a * c).collect(),
        }
    }

    /// Re-express on another basis of the same dimension. Fails if a nonzero
    /// coefficient does not fit the target degree bound.
    pub fn embed(&self, basis: &Arc<MonomialBasis>) -> Result<Polynomial> {
        if basis.d() != self.basis.d() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.d(),
                got: basis.d(),
            });
        }
        let mut out = Polynomial::zero(Arc::clone(basis));
        for (k, &c) in self.basis.order().iter().zip(&self.coeffs) {
            if c == 0.0 {
                continue;
            }
            match basis.index_of(k) {
                Some(i) => out.coeffs[i] += c,
                None => {
                    return Err(Error::DegreeOverflow {
                        degree: k.degree() as usize,
                        bound: basis.max_degree(),
                    })
                }
            }
        }
        Ok(out)
    }
}

/// Exact product of p and q re-expanded on the degree-`target_m` basis.
/// Errors with DegreeOverflow if a nonzero product coefficient exceeds the
/// target degree.
pub fn multiply(p: &Polynomial, q: &Polynomial, target_m: usize) -> Result<Polynomial> {
    let d = p.basis.d();
    if q.basis.d() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: q.basis.d(),
        });
    }
    let basis = enumerate_basis(d, target_m)?;
    let mut out = Polynomial::zero(Arc::clone(&basis));
    for (kp, &cp) in p.basis.order().iter().zip(&p.coeffs) {
        if cp == 0.0 {
            continue;
        }
        for (kq, &cq) in q.basis.order().iter().zip(&q.coeffs) {
            if cq == 0.0 {
                continue;
            }
            let k = kp.plus(kq);
            match basis.index_of(&k) {
                Some(i) => out.coeffs[i] += cp * cq,
                None => {
                    return Err(Error::DegreeOverflow {
                        degree: k.degree() as usize,
                        bound: target_m,
                    })
                }
            }
        }
    }
    Ok(out)
}

/// Coefficient-level partial derivative with respect to x_i (zero-based).
pub fn partial_derivative(p: &Polynomial, i: usize) -> Result<Polynomial> {
    let d = p.basis.d();
    if i >= d {
        return Err(Error::IndexOutOfBounds { index: i, d });
    }
    let mut out = Polynomial::zero(Arc::clone(&p.basis));
    for (k, &c) in p.basis.order().iter().zip(&p.coeffs) {
        if c == 0.0 || k.0[i] == 0 {
            continue;
        }
        let mut dk = k.clone();
        dk.0[i] -= 1;
        let j = p.basis.index_of(&dk).expect("derivative stays in basis");
        out.coeffs[j] += c * k.0[i] as f64;
    }
    Ok(out)
}

/// Iterated derivative D^l = D_1^{l_1} ... D_d^{l_d}.
pub fn derivative_multi(p: &Polynomial, l: &MultiIndex) -> Result<Polynomial> {
    let mut out = p.clone();
    for (i, &e) in l.0.iter().enumerate() {
        for _ in 0..e {
            out = partial_derivative(&out, i)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: usize, k: usize) -> usize {
        let mut r = 1usize;
        for i in 0..k {
            r = r * (n - i) / (i + 1);
        }
        r
    }

    #[test]
    fn basis_d1_m2() {
        let b = enumerate_basis(1, 2).unwrap();
        let exps: Vec<_> = b.order().iter().map(|k| k.0.clone()).collect();
        assert_eq!(exps, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(b.len(), 3);
    }

    #[test]
    fn basis_d2_m1() {
        let b = enumerate_basis(2, 1).unwrap();
        let exps: Vec<_> = b.order().iter().map(|k| k.0.clone()).collect();
        assert_eq!(exps, vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn basis_d2_m2_count() {
        // brute-force oracle: count pairs with k1+k2 <= 2
        let mut n = 0;
        for k1 in 0..=2u32 {
            for k2 in 0..=2u32 {
                if k1 + k2 <= 2 {
                    n += 1;
                }
            }
        }
        assert_eq!(n, 6);
        assert_eq!(enumerate_basis(2, 2).unwrap().len(), 6);
    }

    #[test]
    fn basis_rejects_d0() {
        assert!(enumerate_basis(0, 2).is_err());
    }

    #[test]
    fn basis_counts_match_binomial() {
        for d in 1..=4 {
            for m in 0..=6 {
                let b = enumerate_basis(d, m).unwrap();
                assert_eq!(b.len(), binom(d + m, d), "d={d} m={m}");
                // graded and duplicate-free
                for w in b.order().windows(2) {
                    assert!(w[0] < w[1]);
                }
                assert!(b.order()[0].is_zero());
            }
        }
    }

    #[test]
    fn eval_examples() {
        let b = enumerate_basis(1, 2).unwrap();
        let one = Polynomial::constant(Arc::clone(&b), 1.0);
        assert_eq!(one.eval(&[17.3]).unwrap(), 1.0);

        let xsq = Polynomial::monomial(Arc::clone(&b), 2);
        assert_eq!(xsq.eval(&[3.0]).unwrap(), 9.0);

        let b2 = enumerate_basis(2, 2).unwrap();
        let mut p = Polynomial::constant(Arc::clone(&b2), 2.0);
        p.set_coeff(&MultiIndex(vec![1, 1]), 1.0).unwrap();
        assert_eq!(p.eval(&[2.0, 5.0]).unwrap(), 12.0);
    }

    #[test]
    fn eval_dimension_mismatch() {
        let b = enumerate_basis(2, 1).unwrap();
        let p = Polynomial::constant(b, 1.0);
        assert!(matches!(
            p.eval(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn multiply_examples() {
        let b = enumerate_basis(1, 2).unwrap();
        let x = Polynomial::monomial(Arc::clone(&b), 1);
        let xx = multiply(&x, &x, 2).unwrap();
        assert_eq!(xx.coeffs(), &[0.0, 0.0, 1.0]);

        let mut p = Polynomial::zero(Arc::clone(&b));
        p.coeffs = vec![1.0, -2.0, 0.5];
        let one = Polynomial::constant(Arc::clone(&b), 1.0);
        let q = multiply(&one, &p, 2).unwrap();
        assert_eq!(q.coeffs(), p.coeffs());

        let xsq = Polynomial::monomial(Arc::clone(&b), 2);
        assert!(matches!(
            multiply(&x, &xsq, 2),
            Err(Error::DegreeOverflow { .. })
        ));
    }

    #[test]
    fn derivative_examples() {
        let b = enumerate_basis(1, 2).unwrap();
        let xsq = Polynomial::monomial(Arc::clone(&b), 2);
        let dx = partial_derivative(&xsq, 0).unwrap();
        assert_eq!(dx.coeffs(), &[0.0, 2.0, 0.0]);

        let c = Polynomial::constant(Arc::clone(&b), 5.0);
        assert!(partial_derivative(&c, 0).unwrap().is_zero());

        // D_1(x1^2 x2) = 2 x1 x2
        let b3 = enumerate_basis(2, 3).unwrap();
        let p = Polynomial::monomial(
            Arc::clone(&b3),
            b3.index_of(&MultiIndex(vec![2, 1])).unwrap(),
        );
        let dp = partial_derivative(&p, 0).unwrap();
        assert_eq!(dp.coeff(&MultiIndex(vec![1, 1])), 2.0);
        assert_eq!(dp.degree(), Some(2));
    }

    #[test]
    fn zero_polynomial_degree_sentinel() {
        let b = enumerate_basis(2, 3).unwrap();
        assert_eq!(Polynomial::zero(b).degree(), None);
    }

    #[test]
    fn factorial_of_multi_index() {
        assert_eq!(MultiIndex(vec![3, 2]).factorial(), 12.0);
        assert_eq!(MultiIndex(vec![0, 0]).factorial(), 1.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_poly(d: usize, m: usize) -> impl Strategy<Value = Polynomial> {
            let basis = enumerate_basis(d, m).unwrap();
            let n = basis.len();
            proptest::collection::vec(-3.0f64..3.0, n).prop_map(move |c| {
                Polynomial::from_coeffs(Arc::clone(&basis), c).unwrap()
            })
        }

        proptest! {
            #[test]
            fn eval_is_additive(p in arb_poly(2, 3), q in arb_poly(2, 3),
                                x in proptest::collection::vec(-2.0f64..2.0, 2)) {
                let mut sum = p.clone();
                sum.add_assign(&q).unwrap();
                let lhs = sum.eval(&x).unwrap();
                let rhs = p.eval(&x).unwrap() + q.eval(&x).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
            }

            #[test]
            fn eval_is_multiplicative(p in arb_poly(2, 2), q in arb_poly(2, 2),
                                      x in proptest::collection::vec(-2.0f64..2.0, 2)) {
                let prod = multiply(&p, &q, 4).unwrap();
                let lhs = prod.eval(&x).unwrap();
                let rhs = p.eval(&x).unwrap() * q.eval(&x).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
            }

            #[test]
            fn mixed_partials_commute(p in arb_poly(3, 4)) {
                let d01 = partial_derivative(&partial_derivative(&p, 0).unwrap(), 1).unwrap();
                let d10 = partial_derivative(&partial_derivative(&p, 1).unwrap(), 0).unwrap();
                prop_assert_eq!(d01.coeffs(), d10.coeffs());
            }
        }
    }
}
