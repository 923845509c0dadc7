//! Truncated Bargmann–Fock spaces over `C^n`.
//!
//! Sections are `f(z) e^{-N|z|²/2}` with `f` holomorphic. Everything here is
//! exact polynomial algebra: the orthogonal projector acts by
//! `z^α z̄^β ↦ N^{-|β|} ∂^β z^α`, so no integral is ever evaluated.
//! Matrices are written in the orthonormal basis `e_α = z^α sqrt(N^{|α|}/α!)`
//! (the Gaussian measure constant is absorbed into the basis).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::CMatrix;
use crate::poly::{index_degree, monomials_up_to, multi_factorial, BiPolynomial, HoloPolynomial, MultiIndex};
use crate::symplectic::{omega_p, QuadraticHamiltonian, TangentVariation, SP_TOL};

const MODULE: &str = "bargmann";

/// Smallest admissible degree cutoff: two degree-2 raises plus margin.
pub const MIN_DEGREE: usize = 6;
pub const DEFAULT_DEGREE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockTruncation {
    n: usize,
    level: u32,
    max_degree: usize,
}

impl FockTruncation {
    pub fn new(n: usize, level: u32, max_degree: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain(MODULE, "need at least one complex variable"));
        }
        if level == 0 {
            return Err(Error::domain(MODULE, "level N must be a positive integer"));
        }
        if max_degree < MIN_DEGREE {
            return Err(Error::Truncation {
                needed: MIN_DEGREE,
                allowed: max_degree,
            });
        }
        Ok(FockTruncation {
            n,
            level,
            max_degree,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    fn nf(&self) -> f64 {
        f64::from(self.level)
    }

    /// `sqrt(N^{|α|}/α!)`: the factor turning `z^α` into a unit vector.
    pub fn basis_scale(&self, alpha: &[u32]) -> f64 {
        (self.nf().powi(index_degree(alpha) as i32) / multi_factorial(alpha)).sqrt()
    }

    /// All monomials of degree at most `d`.
    pub fn monomials(&self, d: usize) -> Vec<MultiIndex> {
        monomials_up_to(self.n, d)
    }

    /// Squared norm of `z^α e^{-N|z|²/2}` in the absorbed normalization.
    pub fn monomial_norm_sq(&self, alpha: &[u32]) -> f64 {
        let s = self.basis_scale(alpha);
        1.0 / (s * s)
    }
}

/// A matrix in the orthonormal monomial basis. Columns index the input
/// monomials, rows the output monomials; rows always span every degree up
/// to the cutoff so that no component of the image is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    rows: Vec<MultiIndex>,
    cols: Vec<MultiIndex>,
    matrix: CMatrix,
}

impl FockOperator {
    pub fn rows(&self) -> &[MultiIndex] {
        &self.rows
    }

    pub fn cols(&self) -> &[MultiIndex] {
        &self.cols
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// The inclusion of the column space into the row space.
    pub fn identity_like(&self) -> CMatrix {
        CMatrix::from_fn(self.rows.len(), self.cols.len(), |i, j| {
            if self.rows[i] == self.cols[j] {
                Complex64::from(1.0)
            } else {
                Complex64::from(0.0)
            }
        })
    }

    /// Entry `<e_row, T e_col>`.
    pub fn entry(&self, row: &[u32], col: &[u32]) -> Option<Complex64> {
        let i = self.rows.iter().position(|r| r.as_slice() == row)?;
        let j = self.cols.iter().position(|c| c.as_slice() == col)?;
        Some(self.matrix[(i, j)])
    }

    /// HS distance to `c · ι`, divided by `‖ι‖_HS`.
    pub fn relative_deviation_from_scalar(&self, c: Complex64) -> f64 {
        let id = self.identity_like();
        let diff = &self.matrix - id.map(|v| v * c);
        diff.norm() / id.norm()
    }
}

fn check_hamiltonian(h: &BiPolynomial, trunc: &FockTruncation) -> Result<()> {
    if h.nvars() != trunc.n {
        return Err(Error::Dimension(format!(
            "Hamiltonian in {} variables on a {}-variable Fock space",
            h.nvars(),
            trunc.n
        )));
    }
    if h.terms().any(|(a, b, _)| index_degree(a) + index_degree(b) > 2) {
        return Err(Error::domain(MODULE, "Hamiltonian must be at most quadratic"));
    }
    Ok(())
}

/// `π`: `z^α z̄^β ↦ N^{-|β|} ∂^β z^α`.
pub fn project(p: &BiPolynomial, trunc: &FockTruncation) -> Result<HoloPolynomial> {
    let n = p.nvars();
    if n != trunc.n {
        return Err(Error::Dimension(format!(
            "polynomial in {n} variables projected onto a {}-variable Fock space",
            trunc.n
        )));
    }
    let nf = trunc.nf();
    let mut out = HoloPolynomial::zero(n, trunc.max_degree);
    for (alpha, beta, c) in p.terms() {
        if alpha.iter().zip(beta).any(|(a, b)| a < b) {
            continue;
        }
        let mut coeff = *c / nf.powi(index_degree(beta) as i32);
        for (a, b) in alpha.iter().zip(beta) {
            for k in 0..*b {
                coeff *= f64::from(a - k);
            }
        }
        let reduced: MultiIndex = alpha.iter().zip(beta).map(|(a, b)| a - b).collect();
        let d = index_degree(&reduced);
        if !out.add_term(reduced, coeff) {
            return Err(Error::Truncation {
                needed: d,
                allowed: trunc.max_degree,
            });
        }
    }
    Ok(out)
}

/// `𝔏_{ξ_H}` on the prefactor `p` of `p e^{-N|z|²/2}`:
/// `ξ_H = 2i Σ_j (H_{z_j} ∂_{z̄_j} - H_{z̄_j} ∂_{z_j})`, with the Gaussian
/// contributing `-iN Σ_j (z_j H_{z_j} - z̄_j H_{z̄_j})`.
pub fn lie_derivative_prefactor(h: &BiPolynomial, p: &BiPolynomial, level: u32) -> BiPolynomial {
    let n = h.nvars();
    let two_i = Complex64::new(0.0, 2.0);
    let gauss = Complex64::new(0.0, -f64::from(level));
    let mut out = BiPolynomial::zero(n);
    for j in 0..n {
        let hz = h.d_z(j);
        let hzb = h.d_zbar(j);
        let flow = &hz * &p.d_zbar(j) - &hzb * &p.d_z(j);
        let weight = &BiPolynomial::z(n, j) * &hz - &BiPolynomial::zbar(n, j) * &hzb;
        out = out + flow.scale(two_i) + (&weight * p).scale(gauss);
    }
    out
}

/// `𝔏_{ξ_H}(f e^{-N|z|²/2})`, returned as the polynomial prefactor.
pub fn lie_derivative(
    h: &BiPolynomial,
    f: &HoloPolynomial,
    trunc: &FockTruncation,
) -> Result<BiPolynomial> {
    check_hamiltonian(h, trunc)?;
    if f.nvars() != trunc.n {
        return Err(Error::Dimension("section and truncation differ in n".into()));
    }
    if f.degree() + 2 > trunc.max_degree {
        return Err(Error::Truncation {
            needed: f.degree() + 2,
            allowed: trunc.max_degree,
        });
    }
    Ok(lie_derivative_prefactor(h, &f.to_bipolynomial(), trunc.level))
}

/// `π 𝔏_{ξ_H}` applied to a holomorphic section.
pub fn projected_lie(h: &BiPolynomial, f: &HoloPolynomial, trunc: &FockTruncation) -> Result<HoloPolynomial> {
    project(&lie_derivative(h, f, trunc)?, trunc)
}

fn to_operator<F>(trunc: &FockTruncation, input_degree: usize, image: F) -> Result<FockOperator>
where
    F: Fn(&HoloPolynomial) -> Result<HoloPolynomial>,
{
    let rows = trunc.monomials(trunc.max_degree);
    let cols = trunc.monomials(input_degree);
    let mut matrix = CMatrix::zeros(rows.len(), cols.len());
    for (j, alpha) in cols.iter().enumerate() {
        let f = HoloPolynomial::monomial(alpha.clone(), Complex64::from(1.0), trunc.max_degree)
            .expect("input degree is within the cutoff");
        let g = image(&f)?;
        let s_in = trunc.basis_scale(alpha);
        for (beta, c) in g.terms() {
            let i = rows
                .iter()
                .position(|r| r == beta)
                .expect("projection never exceeds the cutoff");
            matrix[(i, j)] = c * (s_in / trunc.basis_scale(beta));
        }
    }
    Ok(FockOperator { rows, cols, matrix })
}

/// Matrix of `π 𝔏_{ξ_H}` on monomials of degree at most `D - 2`.
pub fn lie_matrix(h: &BiPolynomial, trunc: &FockTruncation) -> Result<FockOperator> {
    check_hamiltonian(h, trunc)?;
    to_operator(trunc, trunc.max_degree - 2, |f| projected_lie(h, f, trunc))
}

/// `Curv_{H₁,H₂} = π[𝔏₂, 𝔏₁]π - [π𝔏₂π, π𝔏₁π]` on monomials of degree at
/// most `D - 4`. Each composition is carried out on polynomials and
/// projected only where the formula projects, so the result is exact.
pub fn curvature_operator(
    h1: &BiPolynomial,
    h2: &BiPolynomial,
    trunc: &FockTruncation,
) -> Result<FockOperator> {
    check_hamiltonian(h1, trunc)?;
    check_hamiltonian(h2, trunc)?;
    let level = trunc.level;
    to_operator(trunc, trunc.max_degree - 4, |f| {
        let fb = f.to_bipolynomial();
        let l1 = lie_derivative_prefactor(h1, &fb, level);
        let l2 = lie_derivative_prefactor(h2, &fb, level);
        let l21 = lie_derivative_prefactor(h2, &l1, level);
        let l12 = lie_derivative_prefactor(h1, &l2, level);
        let full = project(&(l21 - l12), trunc)?;
        let k1 = project(&l1, trunc)?;
        let k2 = project(&l2, trunc)?;
        let k21 = project(&lie_derivative_prefactor(h2, &k1.to_bipolynomial(), level), trunc)?;
        let k12 = project(&lie_derivative_prefactor(h1, &k2.to_bipolynomial(), level), trunc)?;
        let mut out = full;
        for (a, c) in k21.terms() {
            out.add_term(a.clone(), -c);
        }
        for (a, c) in k12.terms() {
            out.add_term(a.clone(), *c);
        }
        Ok(out)
    })
}

/// Scalar part of the curvature of a pair of `p`-Hamiltonians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarCurvature {
    /// `tr(Curv)/dim` on the safe subspace.
    pub scalar: Complex64,
    /// `‖Curv - scalar·Id‖_HS / ‖Id‖_HS`.
    pub deviation: f64,
    /// `Ω(X₁, X₂) = tr(X₁ J₀ X₂)` for the generators.
    pub omega: f64,
}

pub fn verify_scalar_curvature(
    q1: &QuadraticHamiltonian,
    q2: &QuadraticHamiltonian,
    trunc: &FockTruncation,
) -> Result<ScalarCurvature> {
    for q in [q1, q2] {
        if !q.generator().is_in_p(SP_TOL) {
            return Err(Error::domain(MODULE, "Hamiltonian generator is not in p"));
        }
    }
    let a = TangentVariation::from_p_generator(q1.generator())?;
    let b = TangentVariation::from_p_generator(q2.generator())?;
    let omega = omega_p(&a, &b)?;
    let op = curvature_operator(&q1.to_bipolynomial(), &q2.to_bipolynomial(), trunc)?;
    let id = op.identity_like();
    let dim = op.cols.len() as f64;
    let scalar = op
        .matrix
        .iter()
        .zip(id.iter())
        .map(|(m, e)| m * e)
        .sum::<Complex64>()
        / dim;
    Ok(ScalarCurvature {
        scalar,
        deviation: op.relative_deviation_from_scalar(scalar),
        omega,
    })
}

/// `z_m z_l` as a (complex) quadratic Hamiltonian.
pub fn holomorphic_quadratic(n: usize, m: usize, l: usize) -> BiPolynomial {
    &BiPolynomial::z(n, m) * &BiPolynomial::z(n, l)
}

/// `z̄_m z̄_l`.
pub fn antiholomorphic_quadratic(n: usize, m: usize, l: usize) -> BiPolynomial {
    &BiPolynomial::zbar(n, m) * &BiPolynomial::zbar(n, l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::p_plus_minus_basis;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn trunc(n: usize, level: u32) -> FockTruncation {
        FockTruncation::new(n, level, DEFAULT_DEGREE).unwrap()
    }

    #[test]
    fn truncation_validation() {
        assert!(FockTruncation::new(1, 4, 5).is_err());
        assert!(FockTruncation::new(1, 0, 12).is_err());
        assert!(FockTruncation::new(0, 4, 12).is_err());
        assert!(FockTruncation::new(2, 4, 6).is_ok());
    }

    #[test]
    fn projection_examples() {
        let t = trunc(1, 4);
        let p = BiPolynomial::monomial(cx(1.0, 0.0), vec![1], vec![1]);
        let r = project(&p, &t).unwrap();
        assert_eq!(r.coefficient(&[0]), cx(0.25, 0.0));
        let p = BiPolynomial::monomial(cx(1.0, 0.0), vec![2], vec![2]);
        assert_eq!(project(&p, &t).unwrap().coefficient(&[0]), cx(2.0 / 16.0, 0.0));
        let p = BiPolynomial::monomial(cx(1.0, 0.0), vec![3], vec![0]);
        assert_eq!(project(&p, &t).unwrap().coefficient(&[3]), cx(1.0, 0.0));
        let p = BiPolynomial::monomial(cx(1.0, 0.0), vec![1], vec![2]);
        assert!(project(&p, &t).unwrap().is_zero());
        let p = BiPolynomial::monomial(cx(1.0, 0.0), vec![13], vec![0]);
        assert!(matches!(project(&p, &t), Err(Error::Truncation { .. })));
    }

    #[test]
    fn lie_derivative_examples() {
        let t = trunc(1, 4);
        let f = HoloPolynomial::monomial(vec![3], cx(1.0, 0.0), 12).unwrap();
        let zero = BiPolynomial::zero(1);
        assert!(lie_derivative(&zero, &f, &t).unwrap().is_zero());
        // H = z²: π𝔏 f = -2iN z² f
        let r = projected_lie(&holomorphic_quadratic(1, 0, 0), &f, &t).unwrap();
        assert_eq!(r.coefficient(&[5]), cx(0.0, -8.0));
        assert_eq!(r.terms().count(), 1);
        // H = z̄²: π𝔏 f = (-2i/N) f''
        let r = projected_lie(&antiholomorphic_quadratic(1, 0, 0), &f, &t).unwrap();
        assert!((r.coefficient(&[1]) - cx(0.0, -2.0 / 4.0 * 6.0)).norm() < 1e-15);
        assert_eq!(r.terms().count(), 1);
        let big = HoloPolynomial::monomial(vec![11], cx(1.0, 0.0), 12).unwrap();
        assert!(lie_derivative(&zero, &big, &t).is_err());
    }

    #[test]
    fn lie_matrix_band_structure() {
        let t = trunc(2, 3);
        let up = lie_matrix(&holomorphic_quadratic(2, 0, 1), &t).unwrap();
        let down = lie_matrix(&antiholomorphic_quadratic(2, 1, 1), &t).unwrap();
        for (op, shift) in [(&up, 2i64), (&down, -2i64)] {
            for (i, r) in op.rows().iter().enumerate() {
                for (j, c) in op.cols().iter().enumerate() {
                    let v = op.matrix()[(i, j)];
                    if v.norm() > 0.0 {
                        assert_eq!(index_degree(r) as i64 - index_degree(c) as i64, shift);
                    }
                }
            }
        }
        assert!(lie_matrix(&BiPolynomial::zero(2), &t).unwrap().matrix().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn prop_a3_case_three_n1() {
        let t = trunc(1, 4);
        let op = curvature_operator(&holomorphic_quadratic(1, 0, 0), &antiholomorphic_quadratic(1, 0, 0), &t)
            .unwrap();
        assert!(op.relative_deviation_from_scalar(cx(8.0, 0.0)) < 1e-12);
    }

    #[test]
    fn cor_a4_n1() {
        let t = trunc(1, 4);
        let (plus, minus) = p_plus_minus_basis(1);
        let op = curvature_operator(&plus[0].to_bipolynomial(), &minus[0].to_bipolynomial(), &t).unwrap();
        assert!(op.relative_deviation_from_scalar(cx(0.0, -16.0)) < 1e-12);
        let s = verify_scalar_curvature(&plus[0], &minus[0], &t).unwrap();
        assert!((s.scalar - cx(0.0, -16.0)).norm() < 1e-12);
        assert!((s.omega - 32.0).abs() < 1e-12);
        let s = verify_scalar_curvature(&plus[0], &plus[0], &t).unwrap();
        assert!(s.scalar.norm() < 1e-12 && s.deviation < 1e-12);
    }

    #[test]
    fn non_p_input_rejected() {
        let t = trunc(1, 4);
        let rot = QuadraticHamiltonian::new(
            crate::symplectic::SpElement::new(crate::symplectic::standard_sigma(1)).unwrap(),
        );
        let (plus, _) = p_plus_minus_basis(1);
        assert!(verify_scalar_curvature(&rot, &plus[0], &t).is_err());
    }
}
