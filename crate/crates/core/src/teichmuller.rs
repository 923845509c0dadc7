//! Pointwise symplectic pairing on the slice of metrics attached to
//! Teichmüller data.
//!
//! At a point of the surface the data are the conformal factor `σ` of the
//! hyperbolic metric, positive reals `ρ₀, E₀, f₀` and the quadratic
//! differential coefficient `Φ₀`. Only the combinations `Ψ = f₀Φ₀` and
//! `P = f₀ρ₀E₀` enter the metric; equal area means `P² - 4|Ψ|² = σ²`.

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type Mat2 = Matrix2<f64>;

/// Tolerance on the equal-area constraint.
pub const ADMISSIBILITY_TOL: f64 = 1e-10;

pub fn j0() -> Mat2 {
    Mat2::new(0.0, -1.0, 1.0, 0.0)
}

/// The rotation `Z` realizing the invariant complex structure on `p`.
pub fn z_matrix() -> Mat2 {
    Mat2::new(1.0, 1.0, -1.0, 1.0) / std::f64::consts::SQRT_2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicePoint {
    sigma: f64,
    rho0: f64,
    e0: f64,
    f0: f64,
    phi0: Complex64,
}

impl SlicePoint {
    pub fn new(sigma: f64, rho0: f64, e0: f64, f0: f64, phi0: Complex64) -> Result<Self> {
        for (name, v) in [("sigma", sigma), ("rho0", rho0), ("E0", e0), ("f0", f0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Constraint(format!("{name} must be positive, got {v}")));
            }
        }
        if !(phi0.re.is_finite() && phi0.im.is_finite()) {
            return Err(Error::Constraint("Phi0 must be finite".into()));
        }
        let lhs = f0 * f0 * (rho0 * rho0 * e0 * e0 - 4.0 * phi0.norm_sqr());
        let defect = (lhs - sigma * sigma).abs();
        if defect > ADMISSIBILITY_TOL * (sigma * sigma).max(1.0) {
            return Err(Error::Constraint(format!(
                "f0²(ρ0²E0² - 4|Φ0|²) = {lhs} differs from σ² = {} by {defect:.3e}",
                sigma * sigma
            )));
        }
        Ok(SlicePoint {
            sigma,
            rho0,
            e0,
            f0,
            phi0,
        })
    }

    /// The point over the hyperbolic metric itself: `Φ₀ = 0, f₀ = E₀ = 1, ρ₀ = σ`.
    pub fn hyperbolic(sigma: f64) -> Result<Self> {
        Self::new(sigma, sigma, 1.0, 1.0, Complex64::from(0.0))
    }

    /// Draws `σ, f₀ ∈ [0.5, 3]`, `|Φ₀| ≤ 1` and solves the constraint for
    /// `ρ₀E₀`, split at random between the two factors.
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let sigma = rng.random_range(0.5..3.0);
        let f0 = rng.random_range(0.5..3.0);
        let r = rng.random_range(0.0f64..1.0).sqrt();
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let phi0 = Complex64::from_polar(r, theta);
        let product = (sigma * sigma / (f0 * f0) + 4.0 * phi0.norm_sqr()).sqrt();
        let rho0 = product * rng.random_range(0.25..4.0);
        let e0 = product / rho0;
        SlicePoint {
            sigma,
            rho0,
            e0,
            f0,
            phi0,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn phi0(&self) -> Complex64 {
        self.phi0
    }

    /// `f₀Φ₀`
    pub fn psi(&self) -> Complex64 {
        self.phi0 * self.f0
    }

    /// `f₀ρ₀E₀`
    pub fn trace_part(&self) -> f64 {
        self.f0 * self.rho0 * self.e0
    }
}

fn metric_from(psi: Complex64, p: f64) -> Mat2 {
    Mat2::new(
        2.0 * psi.re + p,
        -2.0 * psi.im,
        -2.0 * psi.im,
        -2.0 * psi.re + p,
    )
}

/// `g₀` at the point.
pub fn metric_matrix(p: &SlicePoint) -> Mat2 {
    metric_from(p.psi(), p.trace_part())
}

/// The `Sp(1, R)` element with `g₀ = σ J₀^{-1} h J₀ h^{-1}`.
pub fn h_matrix(p: &SlicePoint) -> Mat2 {
    let s = p.sigma;
    let q = p.trace_part();
    let psi = p.psi();
    let m = Mat2::new(
        -s + 2.0 * psi.re - q,
        -2.0 * psi.im,
        -2.0 * psi.im,
        -s - 2.0 * psi.re - q,
    );
    m / (2.0 * s * (s + q)).sqrt()
}

/// A tangent vector to the slice, determined by `v = d(f Φ)/dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceVariation {
    v: Complex64,
    u: Mat2,
    trace_rate: f64,
}

impl SliceVariation {
    /// The trace part moves as `d(fρE)/dt = 4 Re(conj(fΦ) v)/(fρE)` so the
    /// area form is preserved to first order.
    pub fn new(p: &SlicePoint, v: Complex64) -> Result<Self> {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Constraint("variation must be finite".into()));
        }
        let q = p.trace_part();
        let trace_rate = 4.0 * (p.psi().conj() * v).re / q;
        Ok(SliceVariation {
            v,
            u: metric_from(v, trace_rate),
            trace_rate,
        })
    }

    pub fn v(&self) -> Complex64 {
        self.v
    }

    /// `dg/dt`
    pub fn u(&self) -> &Mat2 {
        &self.u
    }

    pub fn trace_rate(&self) -> f64 {
        self.trace_rate
    }

    /// Derivative of `P² - 4|Ψ|²` along the variation; zero on the slice.
    pub fn area_defect(&self, p: &SlicePoint) -> f64 {
        2.0 * p.trace_part() * self.trace_rate - 8.0 * (p.psi().conj() * self.v).re
    }
}

/// `-(1/σ²) tr(h^{-1} J₀ u₁ h Z h^{-1} J₀ u₂ h Z^{-1})`.
pub fn pairing_trace(p: &SlicePoint, u1: &SliceVariation, u2: &SliceVariation) -> Result<f64> {
    let h = h_matrix(p);
    let hinv = h
        .try_inverse()
        .ok_or_else(|| Error::Constraint("h is singular".into()))?;
    let z = z_matrix();
    let zinv = z.transpose();
    let x1 = hinv * j0() * u1.u * h;
    let x2 = hinv * j0() * u2.u * h;
    Ok(-(x1 * z * x2 * zinv).trace() / (p.sigma * p.sigma))
}

/// `-8/(σ ρ₀ f₀ E₀) Im(v₁ conj(v₂))`.
pub fn pairing_closed_form(p: &SlicePoint, v1: Complex64, v2: Complex64) -> f64 {
    -8.0 / (p.sigma * p.trace_part()) * (v1 * v2.conj()).im
}

/// `-(8/σ²) Im(φ₁ conj(φ₂))`, the integrand at the hyperbolic point.
pub fn wp_integrand(sigma: f64, phi1: Complex64, phi2: Complex64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Constraint(format!("sigma must be positive, got {sigma}")));
    }
    Ok(-8.0 / (sigma * sigma) * (phi1 * phi2.conj()).im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &Mat2, b: &Mat2, tol: f64) -> bool {
        (a - b).abs().max() <= tol
    }

    #[test]
    fn hyperbolic_metric_is_conformal() {
        let p = SlicePoint::hyperbolic(1.7).unwrap();
        assert!(close(&metric_matrix(&p), &(Mat2::identity() * 1.7), 1e-15));
        assert!(close(&h_matrix(&p), &(-Mat2::identity()), 1e-15));
    }

    #[test]
    fn rejects_inadmissible_points() {
        assert!(SlicePoint::new(1.0, 1.0, 1.0, 1.0, Complex64::new(0.1, 0.0)).is_err());
        assert!(SlicePoint::new(-1.0, 1.0, 1.0, 1.0, Complex64::from(0.0)).is_err());
        assert!(SlicePoint::new(1.0, 0.0, 1.0, 1.0, Complex64::from(0.0)).is_err());
    }

    #[test]
    fn random_points_are_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let p = SlicePoint::random(&mut rng);
            let q = SlicePoint::new(p.sigma(), p.rho0(), p.e0(), p.f0(), p.phi0()).unwrap();
            let g = metric_matrix(&q);
            assert!((g.determinant() - p.sigma().powi(2)).abs() < 1e-10 * p.sigma().powi(2).max(1.0));
            assert!(g[(0, 0)] > 0.0 && g.determinant() > 0.0);
            let h = h_matrix(&q);
            assert!((h.determinant() - 1.0).abs() < 1e-12);
            assert!(close(&(h.transpose() * j0() * h), &j0(), 1e-10));
            let rebuilt = j0().try_inverse().unwrap() * h * j0() * h.try_inverse().unwrap() * p.sigma();
            assert!(close(&rebuilt, &g, 1e-9));
        }
    }

    #[test]
    fn pairing_examples() {
        let p = SlicePoint::hyperbolic(2.0).unwrap();
        let zero = SliceVariation::new(&p, Complex64::from(0.0)).unwrap();
        let a = SliceVariation::new(&p, Complex64::new(0.3, -1.1)).unwrap();
        assert_eq!(pairing_trace(&p, &zero, &a).unwrap(), 0.0);
        assert_eq!(pairing_closed_form(&p, a.v(), a.v()), 0.0);
        assert_eq!(wp_integrand(2.0, Complex64::from(1.0), Complex64::i()).unwrap(), 2.0);
        assert!(wp_integrand(0.0, Complex64::from(1.0), Complex64::i()).is_err());
        let v1 = Complex64::new(0.4, 0.2);
        let v2 = Complex64::new(-0.7, 0.9);
        assert_eq!(
            pairing_closed_form(&p, v1 * 2.0, v2),
            2.0 * pairing_closed_form(&p, v1, v2)
        );
        assert_eq!(
            pairing_closed_form(&p, v1, v2),
            wp_integrand(2.0, v1, v2).unwrap()
        );
    }

    #[test]
    fn trace_pairing_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = SlicePoint::random(&mut rng);
            let v1 = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let v2 = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let a = SliceVariation::new(&p, v1).unwrap();
            let b = SliceVariation::new(&p, v2).unwrap();
            assert!(a.area_defect(&p).abs() < 1e-12);
            let t = pairing_trace(&p, &a, &b).unwrap();
            let c = pairing_closed_form(&p, v1, v2);
            assert!((t - c).abs() <= 1e-10 * c.abs().max(1e-3), "{t} vs {c}");
            let swapped = pairing_trace(&p, &b, &a).unwrap();
            assert!((t + swapped).abs() <= 1e-10 * t.abs().max(1e-3));
        }
    }
}
