//! Dense complex linear algebra, quadrature, finite differences and a fixed
//! fourth-order Runge–Kutta stepper shared by the geometric modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Absolute floor used when a relative tolerance meets an exactly-zero scale.
pub const ABS_FLOOR: f64 = 1e-14;

/// Largest Gram condition number accepted by [`projector_from_frame`].
pub const MAX_GRAM_CONDITION: f64 = 1e8;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Hilbert–Schmidt norm `sqrt(tr M*M)` of a square matrix.
pub fn hs_norm(m: &CMatrix) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "hs_norm needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(frobenius(m))
}

/// Frobenius norm of any (possibly rectangular) matrix.
pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max|M - M*| <= tol * max|M|` (with the absolute floor).
pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    let scale = max_abs(m).max(ABS_FLOOR);
    max_abs(&(m - m.adjoint())) <= tol * scale
}

/// `sqrt(sum_i w_i sum_k |x_ik|²)`: the HS norm of the operator whose
/// columns are the grid functions `x`.
pub fn weighted_norm(x: &CMatrix, weights: &[f64]) -> f64 {
    assert_eq!(x.nrows(), weights.len());
    x.row_iter()
        .zip(weights)
        .map(|(row, w)| w * row.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Gram matrix `A* W B` for the pairing `<u, v> = sum_i w_i conj(u_i) v_i`.
pub fn weighted_gram(a: &CMatrix, b: &CMatrix, weights: &[f64]) -> CMatrix {
    assert_eq!(a.nrows(), weights.len());
    assert_eq!(b.nrows(), weights.len());
    let mut wb = b.clone();
    for (i, mut row) in wb.row_iter_mut().enumerate() {
        row *= Complex64::from(weights[i]);
    }
    a.ad_mul(&wb)
}

/// Hermitian inverse square root together with the extreme eigenvalues.
pub fn hermitian_inv_sqrt(g: &CMatrix) -> Result<(CMatrix, f64, f64)> {
    let eig = g.clone().symmetric_eigen();
    let smallest = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let largest = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let condition = if smallest > 0.0 { largest / smallest } else { f64::INFINITY };
    if !(smallest > 0.0) || condition > MAX_GRAM_CONDITION {
        return Err(Error::Conditioning {
            smallest,
            condition,
        });
    }
    let d = CVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| Complex64::from(1.0 / l.sqrt())),
    );
    let u = &eig.eigenvectors;
    Ok((u * CMatrix::from_diagonal(&d) * u.adjoint(), smallest, largest))
}

/// Orthogonal projector onto the span of a frame, with respect to a weighted
/// pairing. The projector is held in factored form `P = Q Q* W` where the
/// columns of `Q` are weighted-orthonormal.
#[derive(Debug, Clone)]
pub struct FrameProjector {
    basis: CMatrix,
    weights: Vec<f64>,
    smallest_gram_eigenvalue: f64,
}

/// Orthonormalizes `frame` (columns) by the inverse square root of its Gram
/// matrix, which is independent of column order.
pub fn projector_from_frame(frame: &CMatrix, weights: &[f64]) -> Result<FrameProjector> {
    if frame.nrows() != weights.len() {
        return Err(Error::Dimension(format!(
            "frame has {} rows but {} weights were given",
            frame.nrows(),
            weights.len()
        )));
    }
    if frame.ncols() == 0 || frame.ncols() > frame.nrows() {
        return Err(Error::Dimension(format!(
            "frame of {} vectors in dimension {}",
            frame.ncols(),
            frame.nrows()
        )));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::Dimension("pairing weights must be positive".into()));
    }
    let gram = weighted_gram(frame, frame, weights);
    let (inv_sqrt, smallest, _) = hermitian_inv_sqrt(&gram)?;
    Ok(FrameProjector {
        basis: frame * inv_sqrt,
        weights: weights.to_vec(),
        smallest_gram_eigenvalue: smallest,
    })
}

impl FrameProjector {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Weighted-orthonormal basis of the range.
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn smallest_gram_eigenvalue(&self) -> f64 {
        self.smallest_gram_eigenvalue
    }

    /// Coordinates `Q* W v` of the columns of `v` in the orthonormal basis.
    pub fn coordinates(&self, v: &CMatrix) -> CMatrix {
        weighted_gram(&self.basis, v, &self.weights)
    }

    pub fn apply(&self, v: &CMatrix) -> CMatrix {
        &self.basis * self.coordinates(v)
    }

    /// Dense matrix of the projector. Only sensible for small ambient dimension.
    pub fn matrix(&self) -> CMatrix {
        let mut qw = self.basis.adjoint();
        for (j, mut col) in qw.column_iter_mut().enumerate() {
            col *= Complex64::from(self.weights[j]);
        }
        &self.basis * qw
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] -> [0, 1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A quadrature rule on a chart of the plane, `z` the complex coordinate.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(nodes: Vec<Complex64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::Dimension("nodes and weights differ in length".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Dimension("quadrature weights must be positive and finite".into()));
        }
        Ok(QuadratureRule { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| f(z) * w)
            .sum()
    }
}

/// Symmetric difference quotient `(f(t0 + h) - f(t0 - h)) / 2h`.
pub fn central_difference<F>(curve: F, t0: f64, h: f64) -> Result<CMatrix>
where
    F: Fn(f64) -> Result<CMatrix>,
{
    if !(h > 0.0) {
        return Err(Error::Dimension("finite-difference step must be positive".into()));
    }
    let plus = curve(t0 + h)?;
    let minus = curve(t0 - h)?;
    if plus.shape() != minus.shape() {
        return Err(Error::Dimension("curve changed shape".into()));
    }
    Ok((plus - minus) / Complex64::from(2.0 * h))
}

/// One Richardson refinement of the central difference:
/// `(4 D(h/2) - D(h)) / 3`, fourth-order accurate.
pub fn richardson_difference<F>(curve: F, t0: f64, h: f64) -> Result<CMatrix>
where
    F: Fn(f64) -> Result<CMatrix>,
{
    let coarse = central_difference(&curve, t0, h)?;
    let fine = central_difference(&curve, t0, 0.5 * h)?;
    Ok((fine * Complex64::from(4.0) - coarse) / Complex64::from(3.0))
}

/// Vector-space operations needed by the stepper.
pub trait OdeState: Clone {
    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);
}

impl OdeState for CMatrix {
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += x * Complex64::from(a);
    }
}

impl OdeState for Vec<f64> {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += a * v;
        }
    }
}

impl OdeState for Vec<Complex64> {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += v * a;
        }
    }
}

impl<const K: usize> OdeState for [Complex64; K] {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += v * a;
        }
    }
}

impl<const K: usize> OdeState for [f64; K] {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += a * v;
        }
    }
}

/// Classical four-stage Runge–Kutta with a fixed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeStepper {
    dt: f64,
}

impl OdeStepper {
    pub const ORDER: u32 = 4;

    pub fn new(dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Dimension(format!("invalid step size {dt}")));
        }
        Ok(OdeStepper { dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step of size `h` (signed) from `(t, y)`.
    pub fn step_with<S, F>(h: f64, f: &F, t: f64, y: &S) -> S
    where
        S: OdeState,
        F: Fn(f64, &S) -> S,
    {
        let k1 = f(t, y);
        let mut y2 = y.clone();
        y2.axpy(0.5 * h, &k1);
        let k2 = f(t + 0.5 * h, &y2);
        let mut y3 = y.clone();
        y3.axpy(0.5 * h, &k2);
        let k3 = f(t + 0.5 * h, &y3);
        let mut y4 = y.clone();
        y4.axpy(h, &k3);
        let k4 = f(t + h, &y4);
        let mut out = y.clone();
        out.axpy(h / 6.0, &k1);
        out.axpy(h / 3.0, &k2);
        out.axpy(h / 3.0, &k3);
        out.axpy(h / 6.0, &k4);
        out
    }

    /// Number of equal steps used to cover `[t0, t1]` (never longer than `dt`).
    pub fn steps_for(&self, t0: f64, t1: f64) -> usize {
        ((t1 - t0).abs() / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    /// Integrates from `t0` to `t1` (either direction) with steps no longer than `dt`.
    pub fn integrate<S, F>(&self, f: F, t0: f64, t1: f64, y0: S) -> S
    where
        S: OdeState,
        F: Fn(f64, &S) -> S,
    {
        let n = self.steps_for(t0, t1);
        if n == 0 {
            return y0;
        }
        let h = (t1 - t0) / n as f64;
        let mut y = y0;
        for i in 0..n {
            y = Self::step_with(h, &f, t0 + i as f64 * h, &y);
        }
        y
    }
}

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is enabled.
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hs_norm_examples() {
        let id = CMatrix::identity(3, 3);
        assert!((hs_norm(&id).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(hs_norm(&CMatrix::zeros(4, 4)).unwrap(), 0.0);
        let m = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        assert!((hs_norm(&m).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(hs_norm(&CMatrix::zeros(2, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn projector_examples() {
        let e1 = CMatrix::from_column_slice(2, 1, &[c(1., 0.), c(0., 0.)]);
        let p = projector_from_frame(&e1, &[1.0, 1.0]).unwrap().matrix();
        let expect = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        assert!(frobenius(&(p - expect)) < 1e-15);

        let full = CMatrix::identity(3, 3);
        let p = projector_from_frame(&full, &[1.0; 3]).unwrap().matrix();
        assert!(frobenius(&(p - CMatrix::identity(3, 3))) < 1e-14);
    }

    #[test]
    fn projector_rejects_dependent_frame() {
        let f = CMatrix::from_column_slice(3, 2, &[c(1., 0.), c(2., 0.), c(0., 1.), c(2., 0.), c(4., 0.), c(0., 2.)]);
        match projector_from_frame(&f, &[1.0; 3]) {
            Err(Error::Conditioning { smallest, .. }) => assert!(smallest.abs() < 1e-10),
            other => panic!("expected conditioning error, got {other:?}"),
        }
    }

    #[test]
    fn random_frame_projector_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = CMatrix::from_fn(4, 2, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let p = projector_from_frame(&f, &[1.0; 4]).unwrap().matrix();
        assert!(frobenius(&(&p * &p - &p)) <= 1e-10 * frobenius(&p));
        assert!(is_hermitian(&p, 1e-12));
        assert!((p.trace().re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_projector_is_self_adjoint_in_weighted_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w: Vec<f64> = (0..5).map(|_| rng.random_range(0.1..2.0)).collect();
        let f = CMatrix::from_fn(5, 3, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let proj = projector_from_frame(&f, &w).unwrap();
        let p = proj.matrix();
        assert!(frobenius(&(&p * &p - &p)) <= 1e-10 * frobenius(&p));
        // W P = (W P)*  <=>  P self-adjoint for the weighted pairing
        let wm = CMatrix::from_diagonal(&CVector::from_iterator(5, w.iter().map(|&x| c(x, 0.))));
        let wp = &wm * &p;
        assert!(is_hermitian(&wp, 1e-12));
        assert!((p.trace().re - 3.0).abs() < 1e-12);
        // the frame itself is fixed
        assert!(frobenius(&(proj.apply(&f) - &f)) < 1e-12);
    }

    #[test]
    fn central_difference_examples() {
        let lin = |t: f64| Ok(CMatrix::identity(2, 2) * c(t, 0.));
        let d = central_difference(lin, 0.0, 0.1).unwrap();
        assert!(frobenius(&(d - CMatrix::identity(2, 2))) < 1e-14);

        let even = |t: f64| Ok(CMatrix::identity(2, 2) * c(t * t, 0.));
        assert!(frobenius(&central_difference(even, 0.0, 0.37).unwrap()) < 1e-15);

        let exp = |t: f64| Ok(CMatrix::from_element(1, 1, c(t.exp(), 0.)));
        let d = central_difference(exp, 0.0, 1e-3).unwrap();
        // remainder h^2/6 e^h ~ 1.7e-7
        assert!((d[(0, 0)].re - 1.0).abs() < 1e-6);
    }

    #[test]
    fn central_difference_is_second_order() {
        let curve = |t: f64| Ok(CMatrix::from_element(1, 1, c(t.sin(), (2.0 * t).cos())));
        let exact = c(0.3f64.cos(), -2.0 * (0.6f64).sin());
        let e1 = (central_difference(curve, 0.3, 0.02).unwrap()[(0, 0)] - exact).norm();
        let e2 = (central_difference(curve, 0.3, 0.01).unwrap()[(0, 0)] - exact).norm();
        assert!(e1 / e2 >= 3.5, "ratio {}", e1 / e2);
        let r = (richardson_difference(curve, 0.3, 0.02).unwrap()[(0, 0)] - exact).norm();
        assert!(r < e2 * 1e-2);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre_unit(7);
        for k in 0..14 {
            let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k)).sum();
            assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "k={k}");
        }
        let (_, w) = gauss_legendre_unit(144);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn rk4_reproduces_exponential() {
        for &cc in &[-5.0, -1.0, 0.5, 2.0, 5.0] {
            for &dt in &[0.1, 0.05, 0.01] {
                let st = OdeStepper::new(dt).unwrap();
                let y = st.integrate(|_, y: &Vec<f64>| vec![cc * y[0]], 0.0, 1.0, vec![1.0]);
                let rel = (y[0] - f64::exp(cc)).abs() / f64::exp(cc);
                // leading local error (c dt)^5/120 per step, 1/dt steps
                let bound = 2.0 * f64::abs(cc).powi(5) * dt.powi(4) / 120.0;
                assert!(rel <= bound, "c={cc} dt={dt} rel={rel}");
            }
        }
    }

    #[test]
    fn rk4_meets_the_flat_bound_for_moderate_rates() {
        // `10 dt⁴` holds while `|c|⁵/60 ≤ 10`; it fails near `|c| = 5`.
        for &cc in &[-3.0, -1.0, 1.0, 3.0] {
            for &dt in &[0.1, 0.05, 0.01] {
                let st = OdeStepper::new(dt).unwrap();
                let y = st.integrate(|_, y: &Vec<f64>| vec![cc * y[0]], 0.0, 1.0, vec![1.0]);
                let rel = (y[0] - f64::exp(cc)).abs() / f64::exp(cc);
                assert!(rel <= 10.0 * dt.powi(4), "c={cc} dt={dt} rel={rel}");
            }
        }
    }

    #[test]
    fn rk4_preserves_norm_for_hermitian_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = CMatrix::from_fn(4, 4, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let h = (&a + a.adjoint()) * c(0.5, 0.0);
        let dt = 0.05;
        let st = OdeStepper::new(dt).unwrap();
        let gen = h * c(0.0, 1.0);
        let y = st.integrate(|_, y: &CMatrix| &gen * y, 0.0, 1.0, CMatrix::identity(4, 4));
        let drift = frobenius(&(y.adjoint() * &y - CMatrix::identity(4, 4)));
        assert!(drift <= 10.0 * dt.powi(4), "drift {drift}");
    }
}
