//! Linear symplectic algebra on `(R^{2n}, ω)` with `ω(u, v) = u^t σ^t v`,
//! `σ = [[0, -I], [I, 0]]` and complex coordinates `z = x + iy`.
//!
//! A quadratic Hamiltonian is identified with its generator `X ∈ sp(n, R)`
//! through `H(v) = ½ v^t σ^t X v`. The Cartan involution `X ↦ -X^t` splits
//! `sp = k ⊕ p` into antisymmetric and symmetric parts; `p` is the tangent
//! space to the compatible complex structures at `J₀ = σ`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::CMatrix;
use crate::poly::BiPolynomial;

pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

const MODULE: &str = "symplectic-linear";

/// Tolerance on `X^t σ + σ X = 0`.
pub const SP_TOL: f64 = 1e-12;
/// Tolerance on the defining identities of a compatible complex structure.
pub const STRUCTURE_TOL: f64 = 1e-10;
const POSITIVITY_SAMPLES: usize = 20;

fn max_abs(m: &RMatrix) -> f64 {
    m.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

fn rel_scale(m: &RMatrix) -> f64 {
    max_abs(m).max(1.0)
}

/// The standard symplectic matrix `σ` on `R^{2n}`.
pub fn standard_sigma(n: usize) -> RMatrix {
    let mut s = RMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        s[(j, n + j)] = -1.0;
        s[(n + j, j)] = 1.0;
    }
    s
}

/// `ω(u, v) = u^t σ^t v`.
pub fn omega(u: &RVector, v: &RVector) -> f64 {
    let n = u.len() / 2;
    u.dot(&(standard_sigma(n).transpose() * v))
}

/// An element of `sp(n, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpElement {
    n: usize,
    x: RMatrix,
}

impl SpElement {
    pub fn new(x: RMatrix) -> Result<Self> {
        if x.nrows() != x.ncols() || x.nrows() % 2 != 0 || x.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "sp(n) element must be 2n x 2n, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        let n = x.nrows() / 2;
        let s = standard_sigma(n);
        let defect = max_abs(&(x.transpose() * &s + &s * &x));
        if defect > SP_TOL * rel_scale(&x) {
            return Err(Error::domain(
                MODULE,
                format!("matrix is not in sp(n): |X^t σ + σ X| = {defect:.3e}"),
            ));
        }
        Ok(SpElement { n, x })
    }

    pub fn zero(n: usize) -> Self {
        SpElement {
            n,
            x: RMatrix::zeros(2 * n, 2 * n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.x
    }

    /// `Θ(X) = -X^t`
    pub fn cartan_involution(&self) -> SpElement {
        SpElement {
            n: self.n,
            x: -self.x.transpose(),
        }
    }

    pub fn is_in_k(&self, tol: f64) -> bool {
        max_abs(&(&self.x + self.x.transpose())) <= tol * rel_scale(&self.x)
    }

    pub fn is_in_p(&self, tol: f64) -> bool {
        max_abs(&(&self.x - self.x.transpose())) <= tol * rel_scale(&self.x)
    }

    pub fn scale(&self, a: f64) -> SpElement {
        SpElement {
            n: self.n,
            x: &self.x * a,
        }
    }
}

/// Splits `X = ½(X - X^t) + ½(X + X^t)` into its `k` and `p` parts.
pub fn cartan_decompose(x: &SpElement) -> (SpElement, SpElement) {
    let t = x.x.transpose();
    (
        SpElement {
            n: x.n,
            x: (&x.x - &t) * 0.5,
        },
        SpElement {
            n: x.n,
            x: (&x.x + &t) * 0.5,
        },
    )
}

/// A quadratic Hamiltonian `H(v) = ½ v^t σ^t X v`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticHamiltonian {
    generator: SpElement,
}

impl QuadraticHamiltonian {
    pub fn new(generator: SpElement) -> Self {
        QuadraticHamiltonian { generator }
    }

    /// The Hamiltonian `v^t S v` for a symmetric `S`; its generator is `2σS`.
    pub fn from_form(s: &RMatrix) -> Result<Self> {
        if s.nrows() != s.ncols() || s.nrows() % 2 != 0 {
            return Err(Error::Dimension("quadratic form must be 2n x 2n".into()));
        }
        let sym = (s + s.transpose()) * 0.5;
        let n = s.nrows() / 2;
        Ok(QuadraticHamiltonian {
            generator: SpElement::new(standard_sigma(n) * sym * 2.0)?,
        })
    }

    pub fn generator(&self) -> &SpElement {
        &self.generator
    }

    pub fn n(&self) -> usize {
        self.generator.n
    }

    /// Symmetric matrix `S` with `H(v) = v^t S v`.
    pub fn form(&self) -> RMatrix {
        let st = standard_sigma(self.n()).transpose();
        let m = st * &self.generator.x * 0.5;
        (&m + m.transpose()) * 0.5
    }

    pub fn evaluate(&self, v: &RVector) -> f64 {
        let n = self.n();
        0.5 * v.dot(&(standard_sigma(n).transpose() * &self.generator.x * v))
    }

    /// The Hamiltonian as a polynomial in `(z, z̄)`.
    pub fn to_bipolynomial(&self) -> BiPolynomial {
        BiPolynomial::from_real_quadratic_form(&self.form())
    }
}

/// `{H₁, H₂}` with generator `[X₂, X₁]`.
pub fn poisson_bracket(
    h1: &QuadraticHamiltonian,
    h2: &QuadraticHamiltonian,
) -> Result<QuadraticHamiltonian> {
    if h1.n() != h2.n() {
        return Err(Error::Dimension(format!(
            "Poisson bracket of Hamiltonians on R^{} and R^{}",
            2 * h1.n(),
            2 * h2.n()
        )));
    }
    let x1 = h1.generator.matrix();
    let x2 = h2.generator.matrix();
    Ok(QuadraticHamiltonian {
        generator: SpElement {
            n: h1.n(),
            x: x2 * x1 - x1 * x2,
        },
    })
}

/// `ξ_H` at `v`, from `ξ_H = Σ (∂H/∂y_j ∂/∂x_j - ∂H/∂x_j ∂/∂y_j)`, i.e.
/// `ξ_H ⌟ ω = dH`. For `H = ½ v^t σ^t X v` this is `-X v`.
pub fn hamiltonian_vector_field(h: &QuadraticHamiltonian, v: &RVector) -> RVector {
    let n = h.n();
    let grad = h.form() * v * 2.0;
    let mut out = RVector::zeros(2 * n);
    for j in 0..n {
        out[j] = grad[n + j];
        out[n + j] = -grad[j];
    }
    out
}

/// A compatible linear complex structure.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearComplexStructure {
    j: RMatrix,
}

impl LinearComplexStructure {
    pub fn new(j: RMatrix) -> Result<Self> {
        if j.nrows() != j.ncols() || j.nrows() % 2 != 0 || j.nrows() == 0 {
            return Err(Error::Dimension("complex structure must be 2n x 2n".into()));
        }
        let n = j.nrows() / 2;
        let s = standard_sigma(n);
        let id = RMatrix::identity(2 * n, 2 * n);
        let sq = max_abs(&(&j * &j + &id));
        if sq > STRUCTURE_TOL * rel_scale(&j) {
            return Err(Error::domain(MODULE, format!("J^2 != -I (defect {sq:.3e})")));
        }
        let sym = max_abs(&(j.transpose() * &s * &j - &s));
        if sym > STRUCTURE_TOL * rel_scale(&j).powi(2) {
            return Err(Error::domain(MODULE, format!("J does not preserve ω (defect {sym:.3e})")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_1a);
        let st = s.transpose();
        for _ in 0..POSITIVITY_SAMPLES {
            let v = RVector::from_fn(2 * n, |_, _| rng.random_range(-1.0..1.0));
            if v.dot(&(&st * &j * &v)) <= 0.0 {
                return Err(Error::domain(MODULE, "ω(·, J·) is not positive"));
            }
        }
        Ok(LinearComplexStructure { j })
    }

    /// `J₀ = σ`, for which `z = x + iy` is holomorphic.
    pub fn standard(n: usize) -> Self {
        LinearComplexStructure {
            j: standard_sigma(n),
        }
    }

    /// `g σ g^{-1}` for a symplectic `g`.
    pub fn conjugate_standard(g: &RMatrix) -> Result<Self> {
        let n = g.nrows() / 2;
        let inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::domain(MODULE, "conjugating matrix is singular"))?;
        Self::new(g * standard_sigma(n) * inv)
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.j
    }

    pub fn n(&self) -> usize {
        self.j.nrows() / 2
    }
}

/// An infinitesimal variation `A ∈ T_J 𝒥`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVariation {
    a: RMatrix,
    base: LinearComplexStructure,
}

impl TangentVariation {
    pub fn new(a: RMatrix, base: LinearComplexStructure) -> Result<Self> {
        let j = base.matrix();
        if a.shape() != j.shape() {
            return Err(Error::Dimension("variation and structure differ in size".into()));
        }
        let scale = rel_scale(&a) * rel_scale(j);
        let anti = max_abs(&(j * &a + &a * j));
        if anti > SP_TOL * scale {
            return Err(Error::domain(MODULE, format!("JA + AJ != 0 (defect {anti:.3e})")));
        }
        // ω(A·, J·) + ω(J·, A·) = 0  <=>  A^t σ^t J + J^t σ^t A = 0
        let st = standard_sigma(base.n()).transpose();
        let comp = max_abs(&(a.transpose() * &st * j + j.transpose() * &st * &a));
        if comp > SP_TOL * scale {
            return Err(Error::domain(
                MODULE,
                format!("variation does not preserve ω-compatibility (defect {comp:.3e})"),
            ));
        }
        Ok(TangentVariation { a, base })
    }

    /// A generator in `p` viewed as a tangent vector at `J₀ = σ`.
    pub fn from_p_generator(x: &SpElement) -> Result<Self> {
        Self::new(x.matrix().clone(), LinearComplexStructure::standard(x.n()))
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.a
    }

    pub fn base(&self) -> &LinearComplexStructure {
        &self.base
    }
}

fn same_base(a: &TangentVariation, b: &TangentVariation) -> Result<()> {
    let da = a.base.matrix();
    let db = b.base.matrix();
    if da.shape() != db.shape() || max_abs(&(da - db)) > STRUCTURE_TOL {
        return Err(Error::domain(MODULE, "tangent vectors live over different base structures"));
    }
    Ok(())
}

/// `Ω(A, B) = tr(A J₀ B)` on the tangent space at the common base point.
pub fn omega_p(a: &TangentVariation, b: &TangentVariation) -> Result<f64> {
    same_base(a, b)?;
    Ok((a.matrix() * a.base.matrix() * b.matrix()).trace())
}

/// `χ_{A,B} = tr(A J B)`.
pub fn chi_symbol(
    a: &TangentVariation,
    j: &LinearComplexStructure,
    b: &TangentVariation,
) -> Result<f64> {
    same_base(a, b)?;
    if max_abs(&(a.base.matrix() - j.matrix())) > STRUCTURE_TOL {
        return Err(Error::domain(MODULE, "χ evaluated at a structure other than the base point"));
    }
    Ok((a.matrix() * j.matrix() * b.matrix()).trace())
}

/// Real spanning sets of `p⁺` and `p⁻`: `H⁺_{m,l} = z_m z_l + z̄_m z̄_l` and
/// `H⁻_{m,l} = i(z_m z_l - z̄_m z̄_l)` for `m <= l`.
pub fn p_plus_minus_basis(n: usize) -> (Vec<QuadraticHamiltonian>, Vec<QuadraticHamiltonian>) {
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for m in 0..n {
        for l in m..n {
            let (xm, ym, xl, yl) = (m, n + m, l, n + l);
            // H⁺ = 2 Re(z_m z_l) = 2(x_m x_l - y_m y_l)
            let mut sp = RMatrix::zeros(2 * n, 2 * n);
            sp[(xm, xl)] += 1.0;
            sp[(xl, xm)] += 1.0;
            sp[(ym, yl)] -= 1.0;
            sp[(yl, ym)] -= 1.0;
            // H⁻ = -2 Im(z_m z_l) = -2(x_m y_l + y_m x_l)
            let mut sm = RMatrix::zeros(2 * n, 2 * n);
            sm[(xm, yl)] -= 1.0;
            sm[(yl, xm)] -= 1.0;
            sm[(ym, xl)] -= 1.0;
            sm[(xl, ym)] -= 1.0;
            plus.push(QuadraticHamiltonian::from_form(&sp).expect("valid form"));
            minus.push(QuadraticHamiltonian::from_form(&sm).expect("valid form"));
        }
    }
    (plus, minus)
}

/// Splits `H` into a Hermitian and a symmetric complex piece:
/// `H(v) = ¼ Re(i z^t (A' + iB') z̄ + i z^t (A'' - iB'') z)` with
/// `A' = A - A^t`, `B' = B - C^t`, `A'' = A + A^t`, `B'' = B + C^t`
/// for `X = [[A, B], [C, -A^t]]`.
pub fn decompose_quadratic(h: &QuadraticHamiltonian) -> Result<(CMatrix, CMatrix)> {
    let n = h.n();
    let x = h.generator.matrix();
    let a = x.view((0, 0), (n, n)).into_owned();
    let b = x.view((0, n), (n, n)).into_owned();
    let cm = x.view((n, 0), (n, n)).into_owned();
    let d = x.view((n, n), (n, n)).into_owned();
    let tol = SP_TOL * rel_scale(x);
    if max_abs(&(&d + a.transpose())) > tol
        || max_abs(&(&b - b.transpose())) > tol
        || max_abs(&(&cm - cm.transpose())) > tol
    {
        return Err(Error::domain(MODULE, "generator is not of the block form [[A, B], [C, -A^t]]"));
    }
    let a1 = &a - a.transpose();
    let b1 = &b - cm.transpose();
    let a2 = &a + a.transpose();
    let b2 = &b + cm.transpose();
    let herm = CMatrix::from_fn(n, n, |i, j| Complex64::new(a1[(i, j)], b1[(i, j)]));
    let symm = CMatrix::from_fn(n, n, |i, j| Complex64::new(a2[(i, j)], -b2[(i, j)]));
    Ok((herm, symm))
}

/// Evaluates the right-hand side of [`decompose_quadratic`] at `v`.
pub fn reconstruct_quadratic(herm: &CMatrix, symm: &CMatrix, v: &RVector) -> f64 {
    let n = herm.nrows();
    let z: Vec<Complex64> = (0..n).map(|j| Complex64::new(v[j], v[n + j])).collect();
    let mut s = Complex64::from(0.0);
    for i in 0..n {
        for j in 0..n {
            s += z[i] * herm[(i, j)] * z[j].conj() + z[i] * symm[(i, j)] * z[j];
        }
    }
    0.25 * (Complex64::i() * s).re
}

/// Random element of `sp(n, R)` with entries of order one.
pub fn random_sp_element<R: Rng>(n: usize, rng: &mut R) -> SpElement {
    let mut s = RMatrix::from_fn(2 * n, 2 * n, |_, _| rng.random_range(-1.0..1.0));
    s = (&s + s.transpose()) * 0.5;
    SpElement {
        n,
        x: standard_sigma(n) * s * 2.0,
    }
}

/// Random element of `p` (symmetric generators).
pub fn random_p_element<R: Rng>(n: usize, rng: &mut R) -> SpElement {
    let (_, p) = cartan_decompose(&random_sp_element(n, rng));
    p
}
