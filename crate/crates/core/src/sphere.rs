//! Kähler quantization of the round sphere `CP¹` at level `N`.
//!
//! Points are stored through their lift to `S³ ⊂ C²`; the affine chart is
//! `z = w₁/w₀`. A section of `O(N)` is a function `F` on `S³` with
//! `F(e^{iθ}w) = e^{iNθ}F(w)`, and its value at the canonical lift
//! `(1, z)/sqrt(1+|z|²)` is the section in a unitary frame, so the `L²`
//! pairing is a plain weighted sum over grid points. Holomorphic sections
//! are the homogeneous polynomials of degree `N` in `w`.
//!
//! The quadrature measure is `dx dy/(1+|z|²)²` (total area `π`). The
//! symplectic form driving the flows is twice that, so that it integrates
//! to `2π` and `O(1)` is its prequantum line.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{
    c, frobenius, gauss_legendre_unit, hermitian_inv_sqrt, hs_norm, par_map, projector_from_frame,
    richardson_difference, central_difference, weighted_gram, CMatrix, FrameProjector, OdeStepper,
    QuadratureRule,
};
use crate::poly::BiPolynomial;
use crate::symplectic::{chi_symbol, LinearComplexStructure, TangentVariation};

const MODULE: &str = "sphere-quantization";

/// Total mass of the quadrature measure.
pub const SPHERE_AREA: f64 = std::f64::consts::PI;

/// `Υ ≈ κ T_χ`: the curvature is anti-Hermitian while the symbol operator is
/// Hermitian; the factor is fixed by the flat model (`Curv = -16i` against
/// `χ = 128` for the `H⁺, H⁻` pair).
pub const SYMBOL_FACTOR: Complex64 = Complex64::new(0.0, -0.125);

/// Step budget factor for the unitarity monitor: drift of `|w|²` may not
/// exceed `100 (s dt)⁴ (s |t|)` where `s` is the largest lifted speed.
const DRIFT_FACTOR: f64 = 100.0;
const DRIFT_FLOOR: f64 = 1e-13;
/// Drift that is never acceptable, whatever the step.
pub const MAX_DRIFT: f64 = 1e-6;

pub type S3Point = [Complex64; 2];
pub type Mat2 = Matrix2<f64>;

fn j0() -> Mat2 {
    Mat2::new(0.0, -1.0, 1.0, 0.0)
}

/// Hopf projection `S³ → S² ⊂ R³`, extended to `C²` without normalization.
pub fn hopf(w: &S3Point) -> [f64; 3] {
    let m = w[0].conj() * w[1];
    [2.0 * m.re, 2.0 * m.im, w[1].norm_sqr() - w[0].norm_sqr()]
}

/// Embedding of the chart point `z` into the unit sphere.
pub fn embed(z: Complex64) -> [f64; 3] {
    let d = 1.0 + z.norm_sqr();
    [2.0 * z.re / d, 2.0 * z.im / d, (z.norm_sqr() - 1.0) / d]
}

/// The canonical lift `(1, z)/sqrt(1+|z|²)`.
pub fn canonical_lift(z: Complex64) -> S3Point {
    let s = 1.0 / (1.0 + z.norm_sqr()).sqrt();
    [c(s, 0.0), z * s]
}

/// `(1+|z|²)² ∂X/∂z̄` for the three embedding coordinates.
fn frame_numerators(z: Complex64) -> [Complex64; 3] {
    let z2 = z * z;
    [1.0 - z2, Complex64::i() * (1.0 + z2), z * 2.0]
}

fn frame_numerator_derivatives(z: Complex64) -> [Complex64; 3] {
    [-z * 2.0, Complex64::i() * z * 2.0, c(2.0, 0.0)]
}

/// Tensor-product Gauss rule on the chart: `z = r e^{iθ}` with
/// `r² = t/(1-t)`, Gauss–Legendre in `t` and uniform `θ`.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    n_radial: usize,
    n_angular: usize,
    points: Vec<S3Point>,
    weights: Vec<f64>,
}

impl SphereGrid {
    pub fn new(n_radial: usize, n_angular: usize) -> Result<Self> {
        if n_radial == 0 || n_angular == 0 {
            return Err(Error::domain(MODULE, "grid needs at least one node per direction"));
        }
        let (t, wt) = gauss_legendre_unit(n_radial);
        let dtheta = std::f64::consts::TAU / n_angular as f64;
        let mut points = Vec::with_capacity(n_radial * n_angular);
        let mut weights = Vec::with_capacity(n_radial * n_angular);
        for (ti, wi) in t.iter().zip(&wt) {
            for a in 0..n_angular {
                let theta = a as f64 * dtheta;
                points.push([c((1.0 - ti).sqrt(), 0.0), Complex64::from_polar(ti.sqrt(), theta)]);
                weights.push(0.5 * wi * dtheta);
            }
        }
        Ok(SphereGrid {
            n_radial,
            n_angular,
            points,
            weights,
        })
    }

    /// `n_angular = 4N + 8`, `n_radial = 2N + 16`.
    pub fn for_level(level: u32) -> Self {
        let n = level as usize;
        Self::new(2 * n + 16, 4 * n + 8).expect("policy sizes are positive")
    }

    pub fn resolves(&self, level: u32) -> bool {
        let n = level as usize;
        self.n_angular >= 4 * n + 8 && self.n_radial >= 2 * n + 16
    }

    pub fn n_radial(&self) -> usize {
        self.n_radial
    }

    pub fn n_angular(&self) -> usize {
        self.n_angular
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[S3Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn chart_point(&self, i: usize) -> Complex64 {
        self.points[i][1] / self.points[i][0]
    }

    pub fn embedded(&self, i: usize) -> [f64; 3] {
        hopf(&self.points[i])
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Average against the normalized Liouville measure.
    pub fn average(&self, values: &[f64]) -> f64 {
        self.integrate(values) / self.total_weight()
    }

    pub fn rule(&self) -> Result<QuadratureRule> {
        QuadratureRule::new(
            (0..self.len()).map(|i| self.chart_point(i)).collect(),
            self.weights.clone(),
        )
    }
}

/// `H = c + a·X + X^t Q X` restricted to the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianField {
    constant: f64,
    linear: [f64; 3],
    quadratic: [[f64; 3]; 3],
}

impl HamiltonianField {
    pub fn new(constant: f64, linear: [f64; 3], quadratic: [[f64; 3]; 3]) -> Result<Self> {
        for i in 0..3 {
            for j in 0..3 {
                if (quadratic[i][j] - quadratic[j][i]).abs() > 1e-14 {
                    return Err(Error::domain(MODULE, "quadratic part must be symmetric"));
                }
            }
        }
        let finite = constant.is_finite()
            && linear.iter().all(|v| v.is_finite())
            && quadratic.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::domain(MODULE, "Hamiltonian coefficients must be finite"));
        }
        Ok(HamiltonianField {
            constant,
            linear,
            quadratic,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self::new(value, [0.0; 3], [[0.0; 3]; 3]).expect("valid")
    }

    /// A linear function `a·X`: the moment map of a rotation.
    pub fn rotation(axis: [f64; 3]) -> Self {
        Self::new(0.0, axis, [[0.0; 3]; 3]).expect("valid")
    }

    /// `X₃`, generating `z ↦ e^{2it} z`.
    pub fn chart_axis_rotation() -> Self {
        Self::rotation([0.0, 0.0, 1.0])
    }

    pub fn quadratic(q: [[f64; 3]; 3]) -> Result<Self> {
        Self::new(0.0, [0.0; 3], q)
    }

    /// `X₃²`: rotation about the chart axis at a latitude-dependent speed.
    pub fn axial_twist() -> Self {
        let mut q = [[0.0; 3]; 3];
        q[2][2] = 1.0;
        Self::quadratic(q).expect("valid")
    }

    /// The fixed non-isometric pair used by the convergence experiment:
    /// `X₁X₃ + ½X₂²` and `X₂X₃ - ½X₁² + ¼X₃²`.
    pub fn standard_pair() -> (Self, Self) {
        let a = Self::quadratic([[0.0, 0.0, 0.5], [0.0, 0.5, 0.0], [0.5, 0.0, 0.0]]).expect("valid");
        let b = Self::quadratic([[-0.5, 0.0, 0.0], [0.0, 0.0, 0.5], [0.0, 0.5, 0.25]]).expect("valid");
        (a, b)
    }

    pub fn linear_part(&self) -> [f64; 3] {
        self.linear
    }

    pub fn quadratic_part(&self) -> [[f64; 3]; 3] {
        self.quadratic
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    /// An isometry flow: the traceless part of `Q` vanishes.
    pub fn is_isometric(&self, tol: f64) -> bool {
        let q = &self.quadratic;
        let tr = (q[0][0] + q[1][1] + q[2][2]) / 3.0;
        (0..3).all(|i| (0..3).all(|j| (q[i][j] - if i == j { tr } else { 0.0 }).abs() <= tol))
    }

    pub fn value(&self, x: &[f64; 3]) -> f64 {
        let mut v = self.constant;
        for a in 0..3 {
            v += self.linear[a] * x[a];
            for b in 0..3 {
                v += self.quadratic[a][b] * x[a] * x[b];
            }
        }
        v
    }

    pub fn gradient(&self, x: &[f64; 3]) -> [f64; 3] {
        let mut g = self.linear;
        for a in 0..3 {
            for b in 0..3 {
                g[a] += 2.0 * self.quadratic[a][b] * x[b];
            }
        }
        g
    }

    pub fn hessian(&self) -> [[f64; 3]; 3] {
        let mut h = self.quadratic;
        h.iter_mut().flatten().for_each(|v| *v *= 2.0);
        h
    }

    pub fn value_at(&self, z: Complex64) -> f64 {
        self.value(&embed(z))
    }

    /// `∂H/∂z̄` in the chart.
    pub fn d_zbar(&self, z: Complex64) -> Complex64 {
        let g = self.gradient(&embed(z));
        let n = frame_numerators(z);
        let d = 1.0 + z.norm_sqr();
        (0..3).map(|a| n[a] * g[a]).sum::<Complex64>() / (d * d)
    }

    pub fn d_z(&self, z: Complex64) -> Complex64 {
        self.d_zbar(z).conj()
    }

    /// The same function written in the chart `ζ = 1/z`, where the embedding
    /// reads `(X₁, -X₂, -X₃)`.
    pub fn inverted(&self) -> Self {
        let s = [1.0, -1.0, -1.0];
        let mut out = self.clone();
        for a in 0..3 {
            out.linear[a] *= s[a];
            for b in 0..3 {
                out.quadratic[a][b] *= s[a] * s[b];
            }
        }
        out
    }

    /// Hamiltonian vector field `ξ^z = i (1+|z|²)² ∂H/∂z̄` in the chart.
    pub fn chart_velocity(&self, z: Complex64) -> Complex64 {
        let g = self.gradient(&embed(z));
        let n = frame_numerators(z);
        Complex64::i() * (0..3).map(|a| n[a] * g[a]).sum::<Complex64>()
    }

    /// `(∂ξ^z/∂z, ∂ξ^z/∂z̄)`.
    pub fn chart_velocity_derivatives(&self, z: Complex64) -> (Complex64, Complex64) {
        let x = embed(z);
        let g = self.gradient(&x);
        let hess = self.hessian();
        let n = frame_numerators(z);
        let dn = frame_numerator_derivatives(z);
        let d = 1.0 + z.norm_sqr();
        let d2 = d * d;
        let mut dz = Complex64::from(0.0);
        let mut dzb = Complex64::from(0.0);
        for a in 0..3 {
            dz += dn[a] * g[a];
            for b in 0..3 {
                dz += n[a] * hess[a][b] * n[b].conj() / d2;
                dzb += n[a] * hess[a][b] * n[b] / d2;
            }
        }
        (Complex64::i() * dz, Complex64::i() * dzb)
    }

    /// Real Jacobian of the chart vector field.
    pub fn chart_jacobian(&self, z: Complex64) -> Mat2 {
        let (dz, dzb) = self.chart_velocity_derivatives(z);
        let dx = dz + dzb;
        let dy = Complex64::i() * (dz - dzb);
        Mat2::new(dx.re, dy.re, dx.im, dy.im)
    }

    /// Velocity of the lifted flow on `C² \ 0`:
    /// `ẇ = i (Ĥ w + |w|² ∂Ĥ/∂w̄)` with `Ĥ(w) = H(P(w)/|w|²)`. It is tangent
    /// to the spheres `|w| = const` and commutes with the circle action.
    pub fn lift_velocity(&self, w: &S3Point) -> S3Point {
        let r2 = w[0].norm_sqr() + w[1].norm_sqr();
        let p = hopf(w);
        let x = [p[0] / r2, p[1] / r2, p[2] / r2];
        let hv = self.value(&x);
        let g = self.gradient(&x);
        let dp = hopf_dwbar(w);
        let mut out = [Complex64::from(0.0); 2];
        for j in 0..2 {
            let mut s = w[j] * hv;
            for a in 0..3 {
                s += (dp[j][a] - w[j] * x[a]) * g[a];
            }
            out[j] = Complex64::i() * s;
        }
        out
    }

    /// Polynomial form of the lifted velocity, valid on `|w| = 1`.
    pub fn lift_velocity_polynomials(&self) -> [BiPolynomial; 2] {
        let hp = hopf_polynomials();
        let mut hhat = BiPolynomial::constant(2, c(self.constant, 0.0));
        let mut grad: Vec<BiPolynomial> = Vec::new();
        for a in 0..3 {
            hhat = hhat + hp[a].scale(c(self.linear[a], 0.0));
            let mut g = BiPolynomial::constant(2, c(self.linear[a], 0.0));
            for b in 0..3 {
                if self.quadratic[a][b] != 0.0 {
                    hhat = hhat + (&hp[a] * &hp[b]).scale(c(self.quadratic[a][b], 0.0));
                    g = g + hp[b].scale(c(2.0 * self.quadratic[a][b], 0.0));
                }
            }
            grad.push(g);
        }
        let w = [BiPolynomial::z(2, 0), BiPolynomial::z(2, 1)];
        let dp = hopf_dwbar_polynomials();
        let i = Complex64::i();
        let build = |j: usize| {
            let mut s = &hhat * &w[j];
            for a in 0..3 {
                let tangent = dp[j][a].clone() - &hp[a] * &w[j];
                s = s + &grad[a] * &tangent;
            }
            s.scale(i)
        };
        [build(0), build(1)]
    }
}

fn hopf_dwbar(w: &S3Point) -> [[Complex64; 3]; 2] {
    let i = Complex64::i();
    [
        [w[1], -i * w[1], -w[0]],
        [w[0], i * w[0], w[1]],
    ]
}

fn hopf_polynomials() -> [BiPolynomial; 3] {
    let w0 = BiPolynomial::z(2, 0);
    let w1 = BiPolynomial::z(2, 1);
    let b0 = BiPolynomial::zbar(2, 0);
    let b1 = BiPolynomial::zbar(2, 1);
    let m = &b0 * &w1;
    let mc = &w0 * &b1;
    [
        m.clone() + mc.clone(),
        (m - mc).scale(c(0.0, -1.0)),
        &w1 * &b1 - &w0 * &b0,
    ]
}

fn hopf_dwbar_polynomials() -> [[BiPolynomial; 3]; 2] {
    let w0 = BiPolynomial::z(2, 0);
    let w1 = BiPolynomial::z(2, 1);
    let i = Complex64::i();
    [
        [w1.clone(), w1.scale(-i), -w0.clone()],
        [w0.clone(), w0.scale(i), w1],
    ]
}

/// Value and first derivatives of the lifted velocity at one point.
#[derive(Debug, Clone, Copy)]
struct FlowJet {
    v: S3Point,
    /// `dw[j][i] = ∂ẇ_j/∂w_i`
    dw: [[Complex64; 2]; 2],
    /// `dwb[j][i] = ∂ẇ_j/∂w̄_i`
    dwb: [[Complex64; 2]; 2],
}

struct JetPolynomials {
    v: [BiPolynomial; 2],
    dw: [[BiPolynomial; 2]; 2],
    dwb: [[BiPolynomial; 2]; 2],
}

impl JetPolynomials {
    fn new(h: &HamiltonianField) -> Self {
        let v = h.lift_velocity_polynomials();
        let dw = [[v[0].d_z(0), v[0].d_z(1)], [v[1].d_z(0), v[1].d_z(1)]];
        let dwb = [
            [v[0].d_zbar(0), v[0].d_zbar(1)],
            [v[1].d_zbar(0), v[1].d_zbar(1)],
        ];
        JetPolynomials { v, dw, dwb }
    }

    fn at(&self, w: &S3Point) -> FlowJet {
        let e = |p: &BiPolynomial| p.evaluate(w);
        FlowJet {
            v: [e(&self.v[0]), e(&self.v[1])],
            dw: [
                [e(&self.dw[0][0]), e(&self.dw[0][1])],
                [e(&self.dw[1][0]), e(&self.dw[1][1])],
            ],
            dwb: [
                [e(&self.dwb[0][0]), e(&self.dwb[0][1])],
                [e(&self.dwb[1][0]), e(&self.dwb[1][1])],
            ],
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Monomial `w₀^a w₁^b` with derivatives up to order two, for the scaled
/// basis `sqrt(C(N,k)) w₀^{N-k} w₁^k`.
struct MonomialJet {
    level: u32,
    scale: Vec<f64>,
}

impl MonomialJet {
    fn new(level: u32) -> Self {
        MonomialJet {
            level,
            scale: (0..=level).map(|k| binomial(level, k).sqrt()).collect(),
        }
    }

    fn powers(&self, x: Complex64) -> Vec<Complex64> {
        let mut p = Vec::with_capacity(self.level as usize + 1);
        let mut v = Complex64::from(1.0);
        for _ in 0..=self.level {
            p.push(v);
            v *= x;
        }
        p
    }

    fn mono(p0: &[Complex64], p1: &[Complex64], a: i64, b: i64) -> Complex64 {
        if a < 0 || b < 0 {
            Complex64::from(0.0)
        } else {
            p0[a as usize] * p1[b as usize]
        }
    }

    /// Values `F_k(w)` for `k = 0..=N`.
    fn values(&self, w: &S3Point) -> Vec<Complex64> {
        let (p0, p1) = (self.powers(w[0]), self.powers(w[1]));
        let n = self.level as i64;
        (0..=n)
            .map(|k| self.scale[k as usize] * Self::mono(&p0, &p1, n - k, k))
            .collect()
    }

    /// `G F_k = Σ_j ∂_j F_k ẇ_j` for holomorphic `F_k`.
    fn first_order(&self, w: &S3Point, velocity: &S3Point) -> Vec<Complex64> {
        let (p0, p1) = (self.powers(w[0]), self.powers(w[1]));
        let n = self.level as i64;
        (0..=n)
            .map(|k| {
                let a = n - k;
                let d0 = Self::mono(&p0, &p1, a - 1, k) * a as f64;
                let d1 = Self::mono(&p0, &p1, a, k - 1) * k as f64;
                self.scale[k as usize] * (d0 * velocity[0] + d1 * velocity[1])
            })
            .collect()
    }

    /// `G₂ G₁ F_k`, differentiating `G₁F_k = Σ_j ∂_jF ẇ¹_j` along `ẇ²`.
    fn second_order(&self, w: &S3Point, j1: &FlowJet, j2: &FlowJet) -> Vec<Complex64> {
        let (p0, p1) = (self.powers(w[0]), self.powers(w[1]));
        let n = self.level as i64;
        (0..=n)
            .map(|k| {
                let a = n - k;
                let d = [
                    Self::mono(&p0, &p1, a - 1, k) * a as f64,
                    Self::mono(&p0, &p1, a, k - 1) * k as f64,
                ];
                let dd = [
                    [
                        Self::mono(&p0, &p1, a - 2, k) * (a * (a - 1)) as f64,
                        Self::mono(&p0, &p1, a - 1, k - 1) * (a * k) as f64,
                    ],
                    [
                        Self::mono(&p0, &p1, a - 1, k - 1) * (a * k) as f64,
                        Self::mono(&p0, &p1, a, k - 2) * (k * (k - 1)) as f64,
                    ],
                ];
                let mut s = Complex64::from(0.0);
                for i in 0..2 {
                    let mut along_w = Complex64::from(0.0);
                    let mut along_wb = Complex64::from(0.0);
                    for j in 0..2 {
                        along_w += dd[i][j] * j1.v[j] + d[j] * j1.dw[j][i];
                        along_wb += d[j] * j1.dwb[j][i];
                    }
                    s += j2.v[i] * along_w + j2.v[i].conj() * along_wb;
                }
                self.scale[k as usize] * s
            })
            .collect()
    }
}

fn rows_to_matrix(rows: Vec<Vec<Complex64>>, ncols: usize) -> CMatrix {
    CMatrix::from_fn(rows.len(), ncols, |i, k| rows[i][k])
}

/// The holomorphic sections of `O(N)` sampled on a grid, with the
/// orthogonal projector onto their span.
#[derive(Debug, Clone)]
pub struct SectionSpace {
    level: u32,
    grid: SphereGrid,
    normalizer: CMatrix,
    projector: FrameProjector,
}

/// `Π_N`: orthogonal projection onto holomorphic sections.
pub fn build_projector(level: u32, grid: &SphereGrid) -> Result<SectionSpace> {
    if level == 0 {
        return Err(Error::domain(MODULE, "level N must be positive"));
    }
    if !grid.resolves(level) {
        return Err(Error::domain(
            MODULE,
            format!(
                "grid {}x{} does not resolve level {level} (need n_radial >= {}, n_angular >= {})",
                grid.n_radial,
                grid.n_angular,
                2 * level + 16,
                4 * level + 8
            ),
        ));
    }
    let jet = MonomialJet::new(level);
    let raw = rows_to_matrix(
        par_map(grid.len(), |i| jet.values(&grid.points[i])),
        level as usize + 1,
    );
    let gram = weighted_gram(&raw, &raw, &grid.weights);
    let (normalizer, _, _) = hermitian_inv_sqrt(&gram)?;
    let projector = projector_from_frame(&raw, &grid.weights)?;
    Ok(SectionSpace {
        level,
        grid: grid.clone(),
        normalizer,
        projector,
    })
}

impl SectionSpace {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.level as usize + 1
    }

    pub fn grid(&self) -> &SphereGrid {
        &self.grid
    }

    pub fn projector(&self) -> &FrameProjector {
        &self.projector
    }

    /// Orthonormal basis `e_k` on the grid (column `k` is `∝ z^k`).
    pub fn basis(&self) -> &CMatrix {
        self.projector.basis()
    }

    pub fn weights(&self) -> &[f64] {
        &self.grid.weights
    }

    /// Gram matrix of the plain monomials `z^k` in the unitary frame.
    pub fn monomial_gram(&self) -> CMatrix {
        let n = self.level;
        let rows = par_map(self.grid.len(), |i| {
            let w = self.grid.points[i];
            (0..=n)
                .map(|k| w[0].powu(n - k) * w[1].powu(k))
                .collect::<Vec<_>>()
        });
        let raw = rows_to_matrix(rows, self.dim());
        weighted_gram(&raw, &raw, &self.grid.weights)
    }

    /// Closed form `π k!(N-k)!/(N+1)!` of the monomial Gram diagonal.
    pub fn monomial_gram_exact(&self, k: u32) -> f64 {
        SPHERE_AREA / (f64::from(self.level + 1) * binomial(self.level, k))
    }

    /// `e_k` evaluated at arbitrary points of `S³` (equivariantly).
    pub fn basis_at(&self, points: &[S3Point]) -> CMatrix {
        self.monomial_frame(points) * &self.normalizer
    }

    /// The scaled monomials `sqrt(C(N,k)) w₀^{N-k} w₁^k` at arbitrary points;
    /// `basis_at(p) = monomial_frame(p) · normalizer()`.
    pub fn monomial_frame(&self, points: &[S3Point]) -> CMatrix {
        let jet = MonomialJet::new(self.level);
        rows_to_matrix(par_map(points.len(), |i| jet.values(&points[i])), self.dim())
    }

    /// `G F_k` for the scaled monomials `F_k` at arbitrary points.
    pub fn monomial_generator_frame(&self, h: &HamiltonianField, points: &[S3Point]) -> CMatrix {
        let jet = MonomialJet::new(self.level);
        let rows = par_map(points.len(), |i| {
            jet.first_order(&points[i], &h.lift_velocity(&points[i]))
        });
        rows_to_matrix(rows, self.dim())
    }

    /// Change of basis from the scaled monomials to `e_k`.
    pub fn normalizer(&self) -> &CMatrix {
        &self.normalizer
    }

    /// Columns `G e_k` for the prequantum generator `G = ∇_ξ + iNH`.
    pub fn generator_columns(&self, h: &HamiltonianField) -> CMatrix {
        let polys = JetPolynomials::new(h);
        let jet = MonomialJet::new(self.level);
        let rows = par_map(self.grid.len(), |i| {
            let w = &self.grid.points[i];
            jet.first_order(w, &polys.at(w).v)
        });
        rows_to_matrix(rows, self.dim()) * &self.normalizer
    }

    /// Columns `G₂ G₁ e_k`.
    pub fn second_order_columns(&self, h2: &HamiltonianField, h1: &HamiltonianField) -> CMatrix {
        let p1 = JetPolynomials::new(h1);
        let p2 = JetPolynomials::new(h2);
        let jet = MonomialJet::new(self.level);
        let rows = par_map(self.grid.len(), |i| {
            let w = &self.grid.points[i];
            jet.second_order(w, &p1.at(w), &p2.at(w))
        });
        rows_to_matrix(rows, self.dim()) * &self.normalizer
    }

    /// `<e_j, v_k>` for grid functions `v`.
    pub fn compress(&self, columns: &CMatrix) -> CMatrix {
        self.projector.coordinates(columns)
    }

    /// `<e_j, f e_k>`.
    pub fn compress_multiplication(&self, values: &[f64]) -> Result<CMatrix> {
        if values.len() != self.grid.len() {
            return Err(Error::Dimension(format!(
                "{} samples for a grid of {} points",
                values.len(),
                self.grid.len()
            )));
        }
        let mut fe = self.basis().clone();
        for (i, mut row) in fe.row_iter_mut().enumerate() {
            row *= Complex64::from(values[i]);
        }
        Ok(self.compress(&fe))
    }
}

pub fn sample_hamiltonian(h: &HamiltonianField, grid: &SphereGrid) -> Vec<f64> {
    (0..grid.len()).map(|i| h.value(&grid.embedded(i))).collect()
}

/// `T_f = Π M_f Π` on the range.
pub fn toeplitz_mult(values: &[f64], space: &SectionSpace) -> Result<CMatrix> {
    space.compress_multiplication(values)
}

/// `Π G Π` with `G = ∇_ξ + iNH`.
pub fn prequantum_generator(h: &HamiltonianField, space: &SectionSpace) -> CMatrix {
    space.compress(&space.generator_columns(h))
}

/// `Π(-i∇_ξ + NH)Π = -i Π G Π`; `Op(1) = N·Id`.
pub fn op_full(h: &HamiltonianField, space: &SectionSpace) -> CMatrix {
    prequantum_generator(h, space) * c(0.0, -1.0)
}

/// `{f, g} = ω(ξ_f, ξ_g) = -2 X·(∇f × ∇g)` on the unit sphere.
pub fn poisson_bracket_at(f: &HamiltonianField, g: &HamiltonianField, x: &[f64; 3]) -> f64 {
    let a = f.gradient(x);
    let b = g.gradient(x);
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    -2.0 * (x[0] * cross[0] + x[1] * cross[1] + x[2] * cross[2])
}

/// Chern connection of the weight `(1+|z|²)^{-N}` in the holomorphic frame:
/// `∇_v (u e) = (v u_z + v̄ u_z̄ - N v z̄ u/(1+|z|²)) e`.
pub fn chern_derivative(
    level: u32,
    z: Complex64,
    u: Complex64,
    u_z: Complex64,
    u_zbar: Complex64,
    v: Complex64,
) -> Complex64 {
    v * u_z + v.conj() * u_zbar - v * z.conj() * u * f64::from(level) / (1.0 + z.norm_sqr())
}

/// `(∇_ξ + iNH) u` in the holomorphic frame of the chart.
pub fn chart_generator(
    h: &HamiltonianField,
    level: u32,
    z: Complex64,
    u: Complex64,
    u_z: Complex64,
    u_zbar: Complex64,
) -> Complex64 {
    let xi = h.chart_velocity(z);
    chern_derivative(level, z, u, u_z, u_zbar, xi) + Complex64::i() * f64::from(level) * h.value_at(z) * u
}

/// Largest speed of the lifted flow over the given points (at least 1).
pub fn max_lift_speed(h: &HamiltonianField, points: &[S3Point]) -> f64 {
    points
        .iter()
        .map(|w| {
            let v = h.lift_velocity(w);
            (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
        })
        .fold(1.0, f64::max)
}

/// Allowed drift of `|w|²` after integrating for time `t` with step `dt`.
pub fn drift_budget(speed: f64, dt: f64, t: f64) -> f64 {
    (DRIFT_FACTOR * (speed * dt).powi(4) * speed * t.abs()).min(MAX_DRIFT) + DRIFT_FLOOR
}

/// `n` RK4 steps of size `dt` (signed) of the lifted flow for every point;
/// returns the moved points and the largest drift of `|w|²`.
pub fn step_points(
    h: &HamiltonianField,
    points: &[S3Point],
    dt: f64,
    n: usize,
) -> (Vec<S3Point>, f64) {
    let field = |_: f64, w: &[Complex64; 2]| h.lift_velocity(w);
    let results = par_map(points.len(), |i| {
        let mut w = points[i];
        let r0 = w[0].norm_sqr() + w[1].norm_sqr();
        let mut drift: f64 = 0.0;
        for s in 0..n {
            w = OdeStepper::step_with(dt, &field, s as f64 * dt, &w);
            drift = drift.max((w[0].norm_sqr() + w[1].norm_sqr() - r0).abs());
        }
        (w, drift)
    });
    let drift = results.iter().map(|r| r.1).fold(0.0, f64::max);
    (results.into_iter().map(|r| r.0).collect(), drift)
}

/// Maps grid points along the lifted flow for time `t`, monitoring the
/// drift of `|w|²` at every step.
pub fn flow_points(
    h: &HamiltonianField,
    points: &[S3Point],
    t: f64,
    stepper: &OdeStepper,
) -> Result<Vec<S3Point>> {
    if t == 0.0 {
        return Ok(points.to_vec());
    }
    let n = stepper.steps_for(0.0, t);
    let dt = t / n as f64;
    let budget = drift_budget(max_lift_speed(h, points), dt, t);
    let (moved, drift) = step_points(h, points, dt, n);
    if drift > budget {
        return Err(Error::StepSize { drift, budget });
    }
    Ok(moved)
}

/// Columns `V_t e_k = e_k ∘ f_t` of the pull-back by the lifted flow.
pub fn pullback_flow(
    h: &HamiltonianField,
    space: &SectionSpace,
    t: f64,
    stepper: &OdeStepper,
) -> Result<CMatrix> {
    if t.abs() > 2.0 {
        return Err(Error::domain(MODULE, format!("|t| = {} exceeds 2", t.abs())));
    }
    let moved = flow_points(h, space.grid.points(), t, stepper)?;
    Ok(space.basis_at(&moved))
}

/// `Π_t = V_t^{-1} Π₀ V_t`, whose range is spanned by `e_k ∘ f_{-t}`.
pub fn projector_curve(
    h: &HamiltonianField,
    space: &SectionSpace,
    t: f64,
    stepper: &OdeStepper,
) -> Result<FrameProjector> {
    let frame = pullback_flow(h, space, -t, stepper)?;
    projector_from_frame(&frame, space.weights())
}

/// How the tangent field `A = d/dt J_t` is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TangentMethod {
    /// `A = [J₀, Dξ]`.
    Analytic,
    /// Central differences (with one Richardson step) of
    /// `dφ_t^{-1} J₀ dφ_t`, integrating the variational equation.
    Flow { step: f64 },
}

fn chart_tangent(h: &HamiltonianField, z: Complex64, method: TangentMethod) -> Result<Mat2> {
    match method {
        TangentMethod::Analytic => {
            let d = h.chart_jacobian(z);
            Ok(j0() * d - d * j0())
        }
        TangentMethod::Flow { step } => {
            if !(step > 0.0 && step <= 0.1) {
                return Err(Error::domain(MODULE, format!("flow step {step} outside (0, 0.1]")));
            }
            let stepper = OdeStepper::new(step / 8.0)?;
            let field = |_: f64, y: &[f64; 6]| {
                let zz = c(y[0], y[1]);
                let v = h.chart_velocity(zz);
                let d = h.chart_jacobian(zz);
                let m = Mat2::new(y[2], y[3], y[4], y[5]);
                let dm = d * m;
                [v.re, v.im, dm[(0, 0)], dm[(0, 1)], dm[(1, 0)], dm[(1, 1)]]
            };
            let y0 = [z.re, z.im, 1.0, 0.0, 0.0, 1.0];
            let structure = |t: f64| -> Result<CMatrix> {
                let y = stepper.integrate(field, 0.0, t, y0);
                let m = Mat2::new(y[2], y[3], y[4], y[5]);
                let inv = m
                    .try_inverse()
                    .ok_or_else(|| Error::domain(MODULE, "variational equation blew up"))?;
                let jt = inv * j0() * m;
                Ok(CMatrix::from_fn(2, 2, |i, j| c(jt[(i, j)], 0.0)))
            };
            let d = richardson_difference(structure, 0.0, step)?;
            Ok(Mat2::new(d[(0, 0)].re, d[(0, 1)].re, d[(1, 0)].re, d[(1, 1)].re))
        }
    }
}

/// `A` at the chart point `z`, computed in whichever of the charts `z`,
/// `1/z` keeps the point in the unit disc and transported back.
pub fn tangent_at(h: &HamiltonianField, z: Complex64, method: TangentMethod) -> Result<Mat2> {
    if z.norm() <= 1.0 {
        return chart_tangent(h, z, method);
    }
    let zeta = 1.0 / z;
    let a = chart_tangent(&h.inverted(), zeta, method)?;
    // z = 1/ζ: dz = -ζ^{-2} dζ, a conformal linear map
    let m = -1.0 / (zeta * zeta);
    let cm = Mat2::new(m.re, -m.im, m.im, m.re);
    let inv = cm
        .try_inverse()
        .ok_or_else(|| Error::domain(MODULE, "degenerate chart change"))?;
    Ok(cm * a * inv)
}

/// The variation `A(x) = d/dt|₀ dφ_t^{-1} J₀ dφ_t` on every grid point.
pub fn tangent_structure(
    h: &HamiltonianField,
    grid: &SphereGrid,
    method: TangentMethod,
) -> Result<Vec<Mat2>> {
    par_map(grid.len(), |i| tangent_at(h, grid.chart_point(i), method))
        .into_iter()
        .collect()
}

fn to_variation(a: &Mat2) -> Result<TangentVariation> {
    let m = DMatrix::from_fn(2, 2, |i, j| a[(i, j)]);
    TangentVariation::new(m, LinearComplexStructure::standard(1))
}

/// `χ_{A,B}(x) = tr(A_x J_x B_x)` on the grid.
pub fn chi_field(h1: &HamiltonianField, h2: &HamiltonianField, grid: &SphereGrid) -> Result<Vec<f64>> {
    let a = tangent_structure(h1, grid, TangentMethod::Analytic)?;
    let b = tangent_structure(h2, grid, TangentMethod::Analytic)?;
    let j = LinearComplexStructure::standard(1);
    a.iter()
        .zip(&b)
        .map(|(ai, bi)| chi_symbol(&to_variation(ai)?, &j, &to_variation(bi)?))
        .collect()
}

/// `Υ(A, B) = Π[G₂, G₁]Π - [ΠG₂Π, ΠG₁Π]` on the range of `Π₀`, with
/// `G_i = ∇_{ξ_i} + iNH_i`.
pub fn curvature_commutator(
    h1: &HamiltonianField,
    h2: &HamiltonianField,
    space: &SectionSpace,
) -> CMatrix {
    let k1 = prequantum_generator(h1, space);
    let k2 = prequantum_generator(h2, space);
    let g21 = space.second_order_columns(h2, h1);
    let g12 = space.second_order_columns(h1, h2);
    space.compress(&(g21 - g12)) - (&k2 * &k1 - &k1 * &k2)
}

/// Finite-difference curvature `Π₀[δ_AΠ, δ_BΠ]Π₀` along the two pull-back
/// directions, with the step `h` and its estimated round-off floor.
#[derive(Debug, Clone)]
pub struct FdCurvature {
    pub matrix: CMatrix,
    pub noise_floor: f64,
}

/// Which difference quotient is used for `δΠ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DifferenceScheme {
    Central,
    Richardson,
}

pub fn curvature_fd(
    h1: &HamiltonianField,
    h2: &HamiltonianField,
    space: &SectionSpace,
    step: f64,
    scheme: DifferenceScheme,
) -> Result<FdCurvature> {
    if !(1e-4..=1e-2).contains(&step) {
        return Err(Error::domain(MODULE, format!("finite-difference step {step} outside [1e-4, 1e-2]")));
    }
    let stepper = OdeStepper::new(step / 4.0)?;
    let e = space.basis();
    let variation = |h: &HamiltonianField| -> Result<CMatrix> {
        let curve = |t: f64| -> Result<CMatrix> {
            let p = projector_curve(h, space, t, &stepper)?;
            Ok(p.apply(e))
        };
        match scheme {
            DifferenceScheme::Central => central_difference(curve, 0.0, step),
            DifferenceScheme::Richardson => richardson_difference(curve, 0.0, step),
        }
    };
    let da = variation(h1)?;
    let db = variation(h2)?;
    let w = space.weights();
    let matrix = weighted_gram(&da, &db, w) - weighted_gram(&db, &da, w);
    let noise_floor = f64::EPSILON * (frobenius(&da) + frobenius(&db)) * space.dim() as f64 / step;
    Ok(FdCurvature { matrix, noise_floor })
}

/// One level of the convergence experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: u32,
    pub dim: usize,
    /// `‖Υ - κ T_χ‖²_HS / dim`
    pub eps: f64,
    /// `Im tr(Υ) / dim`
    pub trace_lhs: f64,
    /// `Im(κ) · <χ>` (Liouville average)
    pub trace_rhs: f64,
    /// `|κ| · rms(χ)`, the natural scale of either side
    pub trace_scale: f64,
    /// `tr(Υ*Υ)/dim`
    pub second_moment_lhs: f64,
    /// `|κ|² <χ²>`
    pub second_moment_rhs: f64,
    /// `‖Υ + Υ*‖ / ‖Υ‖`
    pub skew_defect: f64,
}

impl ConvergenceRow {
    /// `|lhs - rhs| / max(|rhs|, scale)`.
    pub fn trace_error(&self) -> f64 {
        (self.trace_lhs - self.trace_rhs).abs() / self.trace_rhs.abs().max(self.trace_scale)
    }

    pub fn second_moment_error(&self) -> f64 {
        (self.second_moment_lhs - self.second_moment_rhs).abs() / self.second_moment_rhs
    }
}

fn convergence_row(h1: &HamiltonianField, h2: &HamiltonianField, level: u32) -> Result<ConvergenceRow> {
    let grid = SphereGrid::for_level(level);
    let space = build_projector(level, &grid)?;
    let upsilon = curvature_commutator(h1, h2, &space);
    let chi = chi_field(h1, h2, &grid)?;
    let t_chi = toeplitz_mult(&chi, &space)?;
    let dim = space.dim();
    let dimf = dim as f64;
    let diff = &upsilon - t_chi.map(|v| v * SYMBOL_FACTOR);
    let eps = hs_norm(&diff)?.powi(2) / dimf;
    let trace_lhs = upsilon.trace().im / dimf;
    let mean = grid.average(&chi);
    let chi_sq: Vec<f64> = chi.iter().map(|v| v * v).collect();
    let mean_sq = grid.average(&chi_sq);
    let kappa = SYMBOL_FACTOR.norm();
    let norm = hs_norm(&upsilon)?;
    Ok(ConvergenceRow {
        level,
        dim,
        eps,
        trace_lhs,
        trace_rhs: SYMBOL_FACTOR.im * mean,
        trace_scale: kappa * mean_sq.sqrt(),
        second_moment_lhs: norm * norm / dimf,
        second_moment_rhs: kappa * kappa * mean_sq,
        skew_defect: frobenius(&(&upsilon + upsilon.adjoint())) / norm.max(f64::MIN_POSITIVE),
    })
}

/// Runs the curvature-vs-symbol comparison over a ladder of levels.
pub fn theorem_main_experiment(
    h1: &HamiltonianField,
    h2: &HamiltonianField,
    levels: &[u32],
) -> Result<Vec<ConvergenceRow>> {
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain(MODULE, "levels must be a non-empty ascending list"));
    }
    par_map(levels.len(), |i| convergence_row(h1, h2, levels[i]))
        .into_iter()
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
