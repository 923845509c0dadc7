//! Schrödinger evolution generated by a fixed Hamiltonian against parallel
//! transport of holomorphic sections along the pulled-back complex
//! structures `J_t = f_t^* J`.
//!
//! Every operator lives on the same grid as the [`SectionSpace`]. With
//! `V_t F = F ∘ f_t`, the pulled-back projector is `Π_t = V_t^{-1} Π₀ V_t`,
//! whose range is spanned by `e_k ∘ f_{-t}`.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{
    c, frobenius, CMatrix, OdeStepper,
};
use crate::sphere::{
    drift_budget, max_lift_speed, MAX_DRIFT, prequantum_generator, step_points, HamiltonianField,
    S3Point, SectionSpace,
};

const MODULE: &str = "schrodinger";

/// Longest time the propagators accept.
pub const MAX_TIME: f64 = 2.0;

/// Step-size budget for the loss of unitarity of the propagator:
/// `‖S*S - I‖ ≤ 100 (ρ dt)⁴ ρ t_end` (plus round-off), `ρ ≥ 1` the spectral
/// radius of the generator, and never more than [`MAX_DRIFT`].
const UNITARITY_FACTOR: f64 = 100.0;
const UNITARITY_FLOOR: f64 = 1e-12;

/// Number of interior times at which the transport equation is checked.
pub const TRANSPORT_SAMPLES: usize = 10;

/// Fourth-order central stencil on offsets `-2..=2`.
const STENCIL: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];

/// `A = Π(-i∇_ξ + NH)Π`, Hermitian on holomorphic sections.
pub fn schrodinger_generator(h: &HamiltonianField, space: &SectionSpace) -> CMatrix {
    prequantum_generator(h, space) * c(0.0, -1.0)
}

/// The state at time `t`, all operators restricted to the range of `Π₀`.
#[derive(Debug, Clone)]
pub struct TransportState {
    pub t: f64,
    /// `S_t` in the basis `e_k`.
    pub schrodinger: CMatrix,
    /// Columns `V_t^{-1} S_t e_k` on the grid.
    pub pulled_back: CMatrix,
    /// Columns `𝒫_t e_k` on the grid.
    pub transport: CMatrix,
}

/// Residuals of the transport equation at one interior time, both in the
/// normalized HS norm `‖·‖_HS / sqrt(N+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportResidual {
    pub t: f64,
    /// `Π_t d𝒫/dt`
    pub horizontal: f64,
    /// `d𝒫/dt - (dΠ_t/dt) 𝒫`
    pub equation: f64,
}

#[derive(Debug, Clone)]
pub struct TransportRun {
    pub state: TransportState,
    pub residuals: Vec<TransportResidual>,
    /// `max_t ‖S_t* S_t - I‖_F`.
    pub schrodinger_drift: f64,
    /// `max_t ‖𝒫_t* 𝒫_t - I‖_F`.
    pub transport_drift: f64,
    /// `‖𝒫_t - V_t^{-1} S_t‖_HS / sqrt(N+1)` at the final time.
    pub intertwine: f64,
}

fn check_time(t_end: f64) -> Result<()> {
    if !(t_end.is_finite() && (0.0..=MAX_TIME).contains(&t_end)) {
        return Err(Error::domain(
            MODULE,
            format!("t_end must lie in [0, {MAX_TIME}], got {t_end}"),
        ));
    }
    Ok(())
}

fn unitarity_defect(m: &CMatrix) -> f64 {
    let n = m.ncols();
    frobenius(&(m.adjoint() * m - CMatrix::identity(n, n)))
}

fn spectral_radius(k: &CMatrix) -> f64 {
    let hermitian = (k * c(0.0, -1.0) + k.adjoint() * c(0.0, 1.0)) * c(0.5, 0.0);
    hermitian
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(1.0, |m, l| m.max(l.abs()))
}

fn unitarity_budget(k: &CMatrix, dt: f64, t_end: f64) -> f64 {
    let rho = spectral_radius(k);
    (UNITARITY_FACTOR * (rho * dt).powi(4) * rho * t_end).min(MAX_DRIFT) + UNITARITY_FLOOR
}

/// RK4 for `dS/dt = i A S = K S`, `S₀ = Id`, in the basis `e_k`.
pub fn schrodinger_propagate(
    h: &HamiltonianField,
    space: &SectionSpace,
    t_end: f64,
    stepper: &OdeStepper,
) -> Result<CMatrix> {
    check_time(t_end)?;
    let k = prequantum_generator(h, space);
    let n = space.dim();
    let steps = stepper.steps_for(0.0, t_end);
    let mut s = CMatrix::identity(n, n);
    if steps == 0 {
        return Ok(s);
    }
    let dt = t_end / steps as f64;
    let budget = unitarity_budget(&k, dt, t_end);
    let field = |_: f64, m: &CMatrix| &k * m;
    for j in 0..steps {
        s = OdeStepper::step_with(dt, &field, j as f64 * dt, &s);
        let drift = unitarity_defect(&s);
        if drift > budget {
            return Err(Error::StepSize { drift, budget });
        }
    }
    Ok(s)
}

/// The frame `F_k ∘ f_{-t}` of the range of `Π_t` with its time derivative
/// `-(G F_k) ∘ f_{-t}`, rows scaled by `sqrt(w_i)` so the pairing is the
/// plain Euclidean one.
#[derive(Clone)]
struct FrameSlot {
    frame: CMatrix,
    gram: CMatrix,
    /// `-(F* F)^{-1} F* dF/dt`: the coefficient field of the transport.
    connection: CMatrix,
}

impl FrameSlot {
    fn project(&self, x: &CMatrix) -> CMatrix {
        let coords = self
            .gram
            .clone()
            .cholesky()
            .expect("frame Gram is positive")
            .solve(&self.frame.ad_mul(x));
        &self.frame * coords
    }
}

fn scale_rows(mut m: CMatrix, sqrt_w: &[f64]) -> CMatrix {
    for (i, mut row) in m.row_iter_mut().enumerate() {
        row *= Complex64::from(sqrt_w[i]);
    }
    m
}

struct FrameStream<'a> {
    h: &'a HamiltonianField,
    space: &'a SectionSpace,
    sqrt_w: Vec<f64>,
    half: f64,
    points: Vec<S3Point>,
    drift: f64,
}

impl<'a> FrameStream<'a> {
    fn new(h: &'a HamiltonianField, space: &'a SectionSpace, half: f64) -> Self {
        FrameStream {
            h,
            space,
            sqrt_w: space.weights().iter().map(|w| w.sqrt()).collect(),
            half,
            points: space.grid().points().to_vec(),
            drift: 0.0,
        }
    }

    /// Frame at the current time, then moves the points on by `half`.
    fn next(&mut self) -> Result<FrameSlot> {
        let frame = scale_rows(self.space.monomial_frame(&self.points), &self.sqrt_w);
        let derivative = scale_rows(
            self.space.monomial_generator_frame(self.h, &self.points),
            &self.sqrt_w,
        );
        let gram = frame.ad_mul(&frame);
        let chol = gram.clone().cholesky().ok_or(Error::Conditioning {
            smallest: 0.0,
            condition: f64::INFINITY,
        })?;
        // dF/dt = -(G F) ∘ f_{-t}, so -(F*F)^{-1} F* dF/dt = (F*F)^{-1} F* (G F).
        let connection = chol.solve(&frame.ad_mul(&derivative));
        let (moved, _) = step_points(self.h, &self.points, -self.half, 1);
        self.points = moved;
        self.drift = self.drift.max(radius_drift(&self.points));
        Ok(FrameSlot {
            frame,
            gram,
            connection,
        })
    }
}

fn radius_drift(points: &[S3Point]) -> f64 {
    points
        .iter()
        .map(|w| (w[0].norm_sqr() + w[1].norm_sqr() - 1.0).abs())
        .fold(0.0, f64::max)
}

fn stencil_sum(mats: &[&CMatrix], scale: f64) -> CMatrix {
    let mut out = CMatrix::zeros(mats[0].nrows(), mats[0].ncols());
    for (w, m) in STENCIL.iter().zip(mats) {
        if *w != 0.0 {
            out += *m * Complex64::from(w / scale);
        }
    }
    out
}

/// Parallel transport `d𝒫/dt = (dΠ_t/dt) 𝒫`, `𝒫₀ = Π₀`, along `J_t`.
///
/// The transported sections are kept as `𝒫_t = F_t C_t` where `F_t` is the
/// monomial frame of the range of `Π_t`. Horizontality `Π_t d𝒫/dt = 0`
/// becomes `dC/dt = -(F*F)^{-1} F* (dF/dt) C`, which stays inside the range
/// exactly, and `dF/dt` is the generator applied to the frame, so no
/// projector derivative enters the integration. Frames are built on a
/// half-step grid so the RK4 stages land on grid times. The Schrödinger
/// propagator and the pull-back `V_t^{-1}` share the same time grid.
///
/// At [`TRANSPORT_SAMPLES`] interior times the equation itself is checked
/// with fourth-order differences of `𝒫_t` and `Π_t`.
pub fn parallel_transport(
    h: &HamiltonianField,
    space: &SectionSpace,
    t_end: f64,
    stepper: &OdeStepper,
) -> Result<TransportRun> {
    check_time(t_end)?;
    let n = space.dim();
    let norm = (n as f64).sqrt();
    let steps = stepper.steps_for(0.0, t_end);
    if steps == 0 {
        let basis = space.basis().clone();
        return Ok(TransportRun {
            state: TransportState {
                t: 0.0,
                schrodinger: CMatrix::identity(n, n),
                pulled_back: basis.clone(),
                transport: basis,
            },
            residuals: Vec::new(),
            schrodinger_drift: 0.0,
            transport_drift: 0.0,
            intertwine: 0.0,
        });
    }
    if steps < 2 * TRANSPORT_SAMPLES {
        return Err(Error::domain(
            MODULE,
            format!("need at least {} steps, got {steps}", 2 * TRANSPORT_SAMPLES),
        ));
    }
    let dt = t_end / steps as f64;
    let half = dt / 2.0;
    let k = prequantum_generator(h, space);
    let budget = unitarity_budget(&k, dt, t_end);
    let schrodinger_field = |_: f64, m: &CMatrix| &k * m;

    // Full-step indices at which the transport equation is checked.
    let samples: Vec<usize> = (1..=TRANSPORT_SAMPLES)
        .map(|s| ((steps * s) as f64 / (TRANSPORT_SAMPLES + 1) as f64).round() as usize)
        .map(|s| s.clamp(2, steps - 2))
        .collect();
    let near_sample = |m: usize| samples.iter().any(|&s| m + 2 >= s && m <= s + 2);

    let mut stream = FrameStream::new(h, space, half);
    let mut current = stream.next()?;
    let mut coeff = space.normalizer().clone();
    let mut s = CMatrix::identity(n, n);
    let mut schrodinger_drift: f64 = 0.0;
    let mut transport_drift: f64 = 0.0;
    // Full steps near a sample time: (step, frame slot, transported sections).
    let mut history: VecDeque<(usize, FrameSlot, CMatrix)> = VecDeque::new();
    let mut residuals = Vec::new();
    let mut record = |m: usize, slot: &FrameSlot, coeff: &CMatrix| {
        if !near_sample(m) {
            history.clear();
            return;
        }
        history.push_back((m, slot.clone(), &slot.frame * coeff));
        if history.len() > 5 {
            history.pop_front();
        }
        if history.len() == 5 && samples.contains(&history[2].0) {
            residuals.push(transport_residual(&history, history[2].0 as f64 * dt, dt, norm));
        }
    };
    record(0, &current, &coeff);

    for step in 0..steps {
        let mid = stream.next()?;
        let next = stream.next()?;
        {
            let (m0, m1, m2) = (&current.connection, &mid.connection, &next.connection);
            let field = |t: f64, x: &CMatrix| -> CMatrix {
                let local = t - step as f64 * dt;
                let m = if local < 0.25 * dt {
                    m0
                } else if local < 0.75 * dt {
                    m1
                } else {
                    m2
                };
                m * x
            };
            coeff = OdeStepper::step_with(dt, &field, step as f64 * dt, &coeff);
        }
        s = OdeStepper::step_with(dt, &schrodinger_field, step as f64 * dt, &s);
        schrodinger_drift = schrodinger_drift.max(unitarity_defect(&s));
        let isometry = coeff.adjoint() * &next.gram * &coeff - CMatrix::identity(n, n);
        transport_drift = transport_drift.max(frobenius(&isometry));
        if schrodinger_drift > budget {
            return Err(Error::StepSize {
                drift: schrodinger_drift,
                budget,
            });
        }
        current = next;
        record(step + 1, &current, &coeff);
    }
    drop(record);

    let point_budget = drift_budget(
        max_lift_speed(h, space.grid().points()),
        half,
        (2 * steps + 1) as f64 * half,
    );
    if stream.drift > point_budget {
        return Err(Error::StepSize {
            drift: stream.drift,
            budget: point_budget,
        });
    }

    // Back to plain grid values.
    let inv_sqrt_w: Vec<f64> = space.weights().iter().map(|w| 1.0 / w.sqrt()).collect();
    let frame = scale_rows(current.frame.clone(), &inv_sqrt_w);
    let gap = &coeff - space.normalizer() * &s;
    let intertwine = (gap.adjoint() * &current.gram * &gap).trace().re.max(0.0).sqrt() / norm;
    let transport = &frame * &coeff;
    let pulled_back = &frame * space.normalizer() * &s;
    Ok(TransportRun {
        state: TransportState {
            t: t_end,
            schrodinger: s,
            pulled_back,
            transport,
        },
        residuals,
        schrodinger_drift,
        transport_drift,
        intertwine,
    })
}

fn transport_residual(
    history: &VecDeque<(usize, FrameSlot, CMatrix)>,
    t: f64,
    dt: f64,
    norm: f64,
) -> TransportResidual {
    let sections: Vec<&CMatrix> = history.iter().map(|h| &h.2).collect();
    let d_sections = stencil_sum(&sections, dt);
    let centre = sections[2];
    let projected: Vec<CMatrix> = history.iter().map(|h| h.1.project(centre)).collect();
    let projected: Vec<&CMatrix> = projected.iter().collect();
    let d_projector_applied = stencil_sum(&projected, dt);
    let horizontal = history[2].1.project(&d_sections);
    TransportResidual {
        t,
        horizontal: frobenius(&horizontal) / norm,
        equation: frobenius(&(d_sections - d_projector_applied)) / norm,
    }
}

/// `‖𝒫_{t_end} - V_{t_end}^{-1} S_{t_end}‖_HS / sqrt(N+1)`.
pub fn intertwine_check(
    h: &HamiltonianField,
    space: &SectionSpace,
    t_end: f64,
    stepper: &OdeStepper,
) -> Result<f64> {
    Ok(parallel_transport(h, space, t_end, stepper)?.intertwine)
}
