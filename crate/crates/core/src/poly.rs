//! Polynomials in `(z, z̄)` on `C^n` with exact degree bookkeeping.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type MultiIndex = Vec<u32>;

const ZERO_TOL: f64 = 0.0;

pub fn index_degree(a: &[u32]) -> usize {
    a.iter().map(|&k| k as usize).sum()
}

pub fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `alpha!` for a multi-index.
pub fn multi_factorial(a: &[u32]) -> f64 {
    a.iter().map(|&k| factorial(k)).product()
}

/// All multi-indices of length `n` with `|alpha| <= max_degree`, ordered by
/// total degree and then lexicographically (descending in the first slot).
pub fn monomials_up_to(n: usize, max_degree: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for d in 0..=max_degree {
        let mut level = Vec::new();
        compositions(n, d as u32, &mut vec![], &mut level);
        out.extend(level);
    }
    out
}

fn compositions(n: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if prefix.len() + 1 == n {
        let mut a = prefix.clone();
        a.push(remaining);
        out.push(a);
        return;
    }
    for k in (0..=remaining).rev() {
        prefix.push(k);
        compositions(n, remaining - k, prefix, out);
        prefix.pop();
    }
}

pub fn unit_index(n: usize, j: usize) -> MultiIndex {
    let mut a = vec![0; n];
    a[j] = 1;
    a
}

/// Finite sum of terms `c z^alpha z̄^beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiPolynomial {
    n: usize,
    terms: BTreeMap<(MultiIndex, MultiIndex), Complex64>,
}

impl BiPolynomial {
    pub fn zero(n: usize) -> Self {
        BiPolynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn monomial(coeff: Complex64, alpha: MultiIndex, beta: MultiIndex) -> Self {
        assert_eq!(alpha.len(), beta.len());
        let mut p = BiPolynomial::zero(alpha.len());
        p.add_term(coeff, alpha, beta);
        p
    }

    pub fn constant(n: usize, c: Complex64) -> Self {
        Self::monomial(c, vec![0; n], vec![0; n])
    }

    /// The coordinate `z_j`.
    pub fn z(n: usize, j: usize) -> Self {
        Self::monomial(Complex64::from(1.0), unit_index(n, j), vec![0; n])
    }

    /// The coordinate `z̄_j`.
    pub fn zbar(n: usize, j: usize) -> Self {
        Self::monomial(Complex64::from(1.0), vec![0; n], unit_index(n, j))
    }

    /// The quadratic form `v^t S v` with `v = (x, y)`, `z = x + iy`.
    pub fn from_real_quadratic_form(s: &DMatrix<f64>) -> Self {
        let n = s.nrows() / 2;
        assert_eq!(s.nrows(), 2 * n);
        assert_eq!(s.ncols(), 2 * n);
        let half = Complex64::from(0.5);
        let coord = |k: usize| -> BiPolynomial {
            if k < n {
                // x = (z + z̄)/2
                (BiPolynomial::z(n, k) + BiPolynomial::zbar(n, k)).scale(half)
            } else {
                // y = (z - z̄)/(2i)
                let j = k - n;
                (BiPolynomial::z(n, j) - BiPolynomial::zbar(n, j)).scale(Complex64::new(0.0, -0.5))
            }
        };
        let coords: Vec<BiPolynomial> = (0..2 * n).map(coord).collect();
        let mut out = BiPolynomial::zero(n);
        for a in 0..2 * n {
            for b in 0..2 * n {
                let w = s[(a, b)];
                if w != 0.0 {
                    out = out + (&coords[a] * &coords[b]).scale(Complex64::from(w));
                }
            }
        }
        out
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn add_term(&mut self, coeff: Complex64, alpha: MultiIndex, beta: MultiIndex) {
        assert_eq!(alpha.len(), self.n);
        assert_eq!(beta.len(), self.n);
        if coeff.norm() <= ZERO_TOL {
            return;
        }
        let key = (alpha, beta);
        let entry = self.terms.entry(key.clone()).or_insert(Complex64::from(0.0));
        *entry += coeff;
        if entry.norm() == 0.0 {
            self.terms.remove(&key);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &MultiIndex, &Complex64)> {
        self.terms.iter().map(|((a, b), c)| (a, b, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, alpha: &[u32], beta: &[u32]) -> Complex64 {
        self.terms
            .get(&(alpha.to_vec(), beta.to_vec()))
            .copied()
            .unwrap_or_default()
    }

    /// Largest total degree in `z`.
    pub fn z_degree(&self) -> usize {
        self.terms.keys().map(|(a, _)| index_degree(a)).max().unwrap_or(0)
    }

    /// Largest total degree in `z̄`.
    pub fn zbar_degree(&self) -> usize {
        self.terms.keys().map(|(_, b)| index_degree(b)).max().unwrap_or(0)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = BiPolynomial::zero(self.n);
        for (a, b, v) in self.terms() {
            out.add_term(v * c, a.clone(), b.clone());
        }
        out
    }

    /// `∂/∂z_j`
    pub fn d_z(&self, j: usize) -> Self {
        let mut out = BiPolynomial::zero(self.n);
        for (a, b, v) in self.terms() {
            if a[j] > 0 {
                let mut a2 = a.clone();
                a2[j] -= 1;
                out.add_term(v * a[j] as f64, a2, b.clone());
            }
        }
        out
    }

    /// `∂/∂z̄_j`
    pub fn d_zbar(&self, j: usize) -> Self {
        let mut out = BiPolynomial::zero(self.n);
        for (a, b, v) in self.terms() {
            if b[j] > 0 {
                let mut b2 = b.clone();
                b2[j] -= 1;
                out.add_term(v * b[j] as f64, a.clone(), b2);
            }
        }
        out
    }

    pub fn evaluate(&self, z: &[Complex64]) -> Complex64 {
        self.terms()
            .map(|(a, b, v)| {
                let mut t = *v;
                for j in 0..self.n {
                    t *= z[j].powu(a[j]) * z[j].conj().powu(b[j]);
                }
                t
            })
            .sum()
    }

    /// Complex conjugate: `c z^α z̄^β ↦ c̄ z^β z̄^α`.
    pub fn conj(&self) -> Self {
        let mut out = BiPolynomial::zero(self.n);
        for (a, b, v) in self.terms() {
            out.add_term(v.conj(), b.clone(), a.clone());
        }
        out
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

impl Add for BiPolynomial {
    type Output = BiPolynomial;
    fn add(mut self, rhs: BiPolynomial) -> BiPolynomial {
        assert_eq!(self.n, rhs.n);
        for ((a, b), v) in rhs.terms {
            self.add_term(v, a, b);
        }
        self
    }
}

impl Sub for BiPolynomial {
    type Output = BiPolynomial;
    fn sub(self, rhs: BiPolynomial) -> BiPolynomial {
        self + (-rhs)
    }
}

impl Neg for BiPolynomial {
    type Output = BiPolynomial;
    fn neg(self) -> BiPolynomial {
        self.scale(Complex64::from(-1.0))
    }
}

impl Mul for &BiPolynomial {
    type Output = BiPolynomial;
    fn mul(self, rhs: &BiPolynomial) -> BiPolynomial {
        assert_eq!(self.n, rhs.n);
        let mut out = BiPolynomial::zero(self.n);
        for (a1, b1, v1) in self.terms() {
            for (a2, b2, v2) in rhs.terms() {
                let a: MultiIndex = a1.iter().zip(a2).map(|(x, y)| x + y).collect();
                let b: MultiIndex = b1.iter().zip(b2).map(|(x, y)| x + y).collect();
                out.add_term(v1 * v2, a, b);
            }
        }
        out
    }
}

/// Holomorphic polynomial `f(z)`, the prefactor of a Bargmann section
/// `f(z) e^{-N|z|^2/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HoloPolynomial {
    n: usize,
    max_degree: usize,
    terms: BTreeMap<MultiIndex, Complex64>,
}

impl HoloPolynomial {
    pub fn zero(n: usize, max_degree: usize) -> Self {
        HoloPolynomial {
            n,
            max_degree,
            terms: BTreeMap::new(),
        }
    }

    /// Returns `None` when `alpha` exceeds the degree cap.
    pub fn monomial(alpha: MultiIndex, coeff: Complex64, max_degree: usize) -> Option<Self> {
        let mut p = HoloPolynomial::zero(alpha.len(), max_degree);
        p.add_term(alpha, coeff).then_some(p)
    }

    /// Adds a term; refuses (returning false) terms beyond the degree cap.
    pub fn add_term(&mut self, alpha: MultiIndex, coeff: Complex64) -> bool {
        assert_eq!(alpha.len(), self.n);
        if index_degree(&alpha) > self.max_degree {
            return false;
        }
        if coeff.norm() == 0.0 {
            return true;
        }
        let e = self.terms.entry(alpha.clone()).or_insert(Complex64::from(0.0));
        *e += coeff;
        if e.norm() == 0.0 {
            self.terms.remove(&alpha);
        }
        true
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|a| index_degree(a)).max().unwrap_or(0)
    }

    pub fn coefficient(&self, alpha: &[u32]) -> Complex64 {
        self.terms.get(alpha).copied().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn to_bipolynomial(&self) -> BiPolynomial {
        let mut p = BiPolynomial::zero(self.n);
        for (a, v) in self.terms() {
            p.add_term(*v, a.clone(), vec![0; self.n]);
        }
        p
    }

    /// `∂^beta f`
    pub fn derivative(&self, beta: &[u32]) -> HoloPolynomial {
        let mut out = HoloPolynomial::zero(self.n, self.max_degree);
        for (a, v) in self.terms() {
            if a.iter().zip(beta).all(|(x, y)| x >= y) {
                let mut c = *v;
                for (x, y) in a.iter().zip(beta) {
                    for k in 0..*y {
                        c *= (x - k) as f64;
                    }
                }
                let reduced: MultiIndex = a.iter().zip(beta).map(|(x, y)| x - y).collect();
                out.add_term(reduced, c);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_counts_match_binomials() {
        assert_eq!(monomials_up_to(1, 12).len(), 13);
        assert_eq!(monomials_up_to(2, 12).len(), 91);
        assert_eq!(monomials_up_to(2, 0), vec![vec![0, 0]]);
    }

    #[test]
    fn quadratic_form_conversion() {
        // x^2 - y^2 = Re z^2 = (z^2 + z̄^2)/2
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let p = BiPolynomial::from_real_quadratic_form(&s);
        assert!((p.coefficient(&[2], &[0]) - Complex64::from(0.5)).norm() < 1e-15);
        assert!((p.coefficient(&[0], &[2]) - Complex64::from(0.5)).norm() < 1e-15);
        assert!(p.coefficient(&[1], &[1]).norm() < 1e-15);
        let z = [Complex64::new(0.3, -1.1)];
        assert!((p.evaluate(&z).re - (0.09 - 1.21)).abs() < 1e-14);
    }

    #[test]
    fn derivatives_commute() {
        let p = &BiPolynomial::z(2, 0) * &(&BiPolynomial::zbar(2, 1) * &BiPolynomial::z(2, 1));
        assert_eq!(p.d_z(0).d_zbar(1), p.d_zbar(1).d_z(0));
        assert!(p.d_zbar(0).is_zero());
    }

    #[test]
    fn holo_degree_cap() {
        assert!(HoloPolynomial::monomial(vec![3, 4], Complex64::from(1.0), 6).is_none());
        let f = HoloPolynomial::monomial(vec![3, 1], Complex64::from(2.0), 6).unwrap();
        let d = f.derivative(&[2, 1]);
        assert_eq!(d.coefficient(&[1, 0]), Complex64::from(12.0));
    }
}
