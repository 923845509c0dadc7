//! Runs validated jobs and turns their measurements into CSV tables.

use num_complex::Complex64;
use quantcurv::bargmann::{curvature_operator, verify_scalar_curvature, FockTruncation};
use quantcurv::numerics::OdeStepper;
use quantcurv::poly::BiPolynomial;
use quantcurv::schrodinger::parallel_transport;
use quantcurv::sphere::{build_projector, theorem_main_experiment, HamiltonianField, SphereGrid};
use quantcurv::symplectic::{random_p_element, QuadraticHamiltonian};
use quantcurv::teichmuller::{
    h_matrix, j0, metric_matrix, pairing_closed_form, pairing_trace, wp_integrand, SlicePoint,
    SliceVariation,
};
use quantcurv::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{BargmannParams, Job, NamedHamiltonian, Params, SliceParams, SphereParams, TransportParams};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        let mut header = vec!["experiment", "config_hash"];
        header.extend_from_slice(columns);
        header.extend_from_slice(&["tolerance", "pass"]);
        Table { header, rows: Vec::new() }
    }

    fn push(&mut self, job: &Job, values: Vec<String>, tolerance: f64, pass: bool) {
        let mut row = vec![job.name.clone(), job.hash.clone()];
        row.extend(values);
        row.push(num(tolerance));
        row.push(pass.to_string());
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.last().map(String::as_str) != Some("true")).count()
    }
}

/// 17 significant digits, enough to round-trip an `f64`.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// The run's random source: ChaCha8 seeded with the config seed, one
/// stream per experiment index.
fn job_rng(job: &Job) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
    rng.set_stream(job.index as u64);
    rng
}

pub fn run(job: &Job) -> Result<Table, Error> {
    match &job.params {
        Params::BargmannCurvature(p) => bargmann(job, p),
        Params::SphereConvergence(p) => sphere(job, p),
        Params::SchrodingerIntertwine(p) => transport(job, p),
        Params::TeichmullerSymbol(p) => slice(job, p),
    }
}

fn quad(n: usize, m: usize, l: usize, holomorphic: bool) -> BiPolynomial {
    let f = if holomorphic { BiPolynomial::z } else { BiPolynomial::zbar };
    &f(n, m) * &f(n, l)
}

fn bargmann(job: &Job, p: &BargmannParams) -> Result<Table, Error> {
    let trunc = FockTruncation::new(p.n, p.level, p.degree)?;
    let mut table = Table::new(&[
        "n", "N", "D", "check", "case", "measured_re", "measured_im", "expected_re", "expected_im",
        "deviation",
    ]);
    let echo = |check: &str, case: String, measured: Complex64, expected: Complex64, deviation: f64| {
        vec![
            p.n.to_string(),
            p.level.to_string(),
            p.degree.to_string(),
            check.to_string(),
            case,
            num(measured.re),
            num(measured.im),
            num(expected.re),
            num(expected.im),
            num(deviation),
        ]
    };
    let n = p.n;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|m| (m..n).map(move |l| (m, l))).collect();
    for &(m, l) in &pairs {
        for &(r, s) in &pairs {
            let d = f64::from(u8::from(m == r && l == s)) + f64::from(u8::from(m == s && l == r));
            let plus = |a, b| quad(n, a, b, true) + quad(n, a, b, false);
            let minus = |a, b| (quad(n, a, b, true) - quad(n, a, b, false)).scale(Complex64::i());
            let checks = [
                ("holomorphic", quad(n, m, l, true), quad(n, r, s, true), Complex64::from(0.0)),
                ("antiholomorphic", quad(n, m, l, false), quad(n, r, s, false), Complex64::from(0.0)),
                ("mixed", quad(n, m, l, true), quad(n, r, s, false), Complex64::from(4.0 * d)),
                ("plus-minus", plus(m, l), minus(r, s), Complex64::new(0.0, -8.0 * d)),
                ("plus-plus", plus(m, l), plus(r, s), Complex64::from(0.0)),
                ("minus-minus", minus(m, l), minus(r, s), Complex64::from(0.0)),
            ];
            for (check, h1, h2, expected) in checks {
                let op = curvature_operator(&h1, &h2, &trunc)?;
                let deviation = op.relative_deviation_from_scalar(expected);
                let measured = op.matrix()[(0, 0)];
                let case = format!("m={m} l={l} r={r} s={s}");
                table.push(job, echo(check, case, measured, expected, deviation), p.tolerance, deviation <= p.tolerance);
            }
        }
    }

    let mut rng = job_rng(job);
    let mut reference = None;
    for k in 0..p.random_pairs {
        let q1 = QuadraticHamiltonian::new(random_p_element(n, &mut rng));
        let q2 = QuadraticHamiltonian::new(random_p_element(n, &mut rng));
        let s = verify_scalar_curvature(&q1, &q2, &trunc)?;
        let ok = s.deviation <= p.random_pair_tolerance;
        let zero = Complex64::from(0.0);
        table.push(job, echo("scalar", format!("pair {k}"), s.scalar, zero, s.deviation), p.random_pair_tolerance, ok);
        let ratio = s.scalar / Complex64::new(0.0, s.omega);
        let first = *reference.get_or_insert(ratio);
        let spread = (ratio - first).norm() / first.norm();
        table.push(job, echo("ratio", format!("pair {k}"), ratio, first, spread), p.ratio_tolerance, spread <= p.ratio_tolerance);
    }
    Ok(table)
}

fn sphere(job: &Job, p: &SphereParams) -> Result<Table, Error> {
    let (h1, h2) = HamiltonianField::standard_pair();
    let rows = theorem_main_experiment(&h1, &h2, &p.levels)?;
    let mut table = Table::new(&[
        "N", "dim", "eps_N", "ratio", "trace_lhs", "trace_rhs", "trace_error", "second_moment_error",
    ]);
    let mut previous: Option<f64> = None;
    for row in &rows {
        let ratio = previous.map(|e| row.eps / e);
        previous = Some(row.eps);
        let ok = ratio.is_none_or(|r| r <= p.max_ratio) && row.trace_error() <= p.trace_tolerance;
        table.push(
            job,
            vec![
                row.level.to_string(),
                row.dim.to_string(),
                num(row.eps),
                ratio.map(num).unwrap_or_default(),
                num(row.trace_lhs),
                num(row.trace_rhs),
                num(row.trace_error()),
                num(row.second_moment_error()),
            ],
            p.max_ratio,
            ok,
        );
    }
    Ok(table)
}

fn named(h: NamedHamiltonian) -> HamiltonianField {
    match h {
        NamedHamiltonian::Rotation => HamiltonianField::chart_axis_rotation(),
        NamedHamiltonian::Twist => HamiltonianField::axial_twist(),
        NamedHamiltonian::PairFirst => HamiltonianField::standard_pair().0,
        NamedHamiltonian::PairSecond => HamiltonianField::standard_pair().1,
    }
}

fn transport(job: &Job, p: &TransportParams) -> Result<Table, Error> {
    let space = build_projector(p.level, &SphereGrid::for_level(p.level))?;
    let stepper = OdeStepper::new(p.dt)?;
    let mut table = Table::new(&[
        "hamiltonian", "N", "dt", "t_end", "intertwine", "residual", "schrodinger_drift", "transport_drift",
    ]);
    for &h in &p.hamiltonians {
        let run = parallel_transport(&named(h), &space, p.t_end, &stepper)?;
        let residual = run
            .residuals
            .iter()
            .map(|r| r.horizontal.max(r.equation))
            .fold(0.0, f64::max);
        let ok = run.intertwine <= p.tolerance && residual <= p.residual_tolerance;
        table.push(
            job,
            vec![
                h.label().to_string(),
                p.level.to_string(),
                num(p.dt),
                num(p.t_end),
                num(run.intertwine),
                num(residual),
                num(run.schrodinger_drift),
                num(run.transport_drift),
            ],
            p.tolerance,
            ok,
        );
    }
    Ok(table)
}

fn slice(job: &Job, p: &SliceParams) -> Result<Table, Error> {
    let mut rng = job_rng(job);
    let mut worst = [0.0f64; 4];
    for _ in 0..p.samples {
        let point = SlicePoint::random(&mut rng);
        let v1 = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let v2 = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let trace = pairing_trace(&point, &SliceVariation::new(&point, v1)?, &SliceVariation::new(&point, v2)?)?;
        let scale = 8.0 / (point.sigma() * point.trace_part()) * v1.norm() * v2.norm();
        worst[0] = worst[0].max((trace - pairing_closed_form(&point, v1, v2)).abs() / scale);

        let h = h_matrix(&point);
        worst[1] = worst[1].max((h.transpose() * j0() * h - j0()).abs().max());
        let hinv = h.try_inverse().ok_or_else(|| Error::Constraint("h is singular".into()))?;
        let g = metric_matrix(&point);
        let rebuilt = -j0() * h * j0() * hinv * point.sigma();
        worst[2] = worst[2].max((rebuilt - g).abs().max() / g.abs().max());

        let sigma = point.sigma();
        let hyperbolic = SlicePoint::hyperbolic(sigma)?;
        let wp = wp_integrand(sigma, v1, v2)?;
        let wp_scale = 8.0 / (sigma * sigma) * v1.norm() * v2.norm();
        worst[3] = worst[3].max((pairing_closed_form(&hyperbolic, v1, v2) - wp).abs() / wp_scale);
    }
    let mut table = Table::new(&["samples", "check", "measured"]);
    let checks = [
        ("pairing", p.tolerance),
        ("symplectic", p.structure_tolerance),
        ("factorization", p.structure_tolerance),
        ("reduction", p.reduction_tolerance),
    ];
    for ((check, tol), measured) in checks.into_iter().zip(worst) {
        table.push(job, vec![p.samples.to_string(), check.into(), num(measured)], tol, measured <= tol);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_with_17_digits() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
    }
}
