//! Periodic orbits of the reduced map.
//!
//! Besides the parabolic line and the fixed point `p_λ`, two families have
//! closed forms: `q_n` with itinerary `1ⁿ22` (period `n + 2`) and `p_n` with
//! itinerary `1 2^{2n-1}` (period `2n`). The closed forms are formal; an orbit
//! is only reported after it has been followed step by step along its
//! itinerary and closes within [`TOL_FIX`].

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linearization::{classify_cycle, step_with_jacobian, StabilityClass};
use crate::manifolds::{g_contract, g_iterate, h_partial, sigma_partial, SeriesEval, TOL_SERIES};
use crate::maps::{
    classify_reduced, full_distance, full_map, lifts, reduced_map, FullPoint, Lambda, ReducedPoint,
    RegionTag,
};
use crate::roots::{brent, RootReport};

/// Closure tolerance on the per-step backward error.
pub const TOL_FIX: f64 = 1e-11;

/// Search interval for the existence thresholds `c_n`.
pub const CN_BRACKET: (f64, f64) = (0.55, 0.9);

/// `S_n(θ) = Σ_{i=0}^{n} tan(λ^i θ)`; `n = -1` gives 0.
pub fn s_sum(theta: f64, lambda: Lambda, n: i64) -> f64 {
    let mut sum = 0.0;
    let mut angle = theta;
    for _ in 0..=n {
        sum += angle.tan();
        angle *= lambda.value();
    }
    sum
}

/// `γ_n(θ) = Π_{i<n} cot(g^i(θ))`.
pub fn gamma_n(theta: f64, lambda: Lambda, n: usize) -> f64 {
    let mut prod = 1.0;
    let mut angle = theta;
    for _ in 0..n {
        prod /= angle.tan();
        angle = g_contract(angle, lambda);
    }
    prod
}

/// `h_n`, `γ_n` and `S_n` evaluated at one angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SequenceBundle {
    pub n: usize,
    pub theta: f64,
    pub h: f64,
    pub gamma: f64,
    pub s_sum: f64,
}

impl SequenceBundle {
    pub fn evaluate(theta: f64, lambda: Lambda, n: usize) -> Self {
        SequenceBundle {
            n,
            theta,
            h: h_partial(theta, lambda, n as i64),
            gamma: gamma_n(theta, lambda, n),
            s_sum: s_sum(theta, lambda, n as i64),
        }
    }
}

/// Closed form of `f₂ⁿ ∘ f₁ᵐ(s, θ)`. With `validate` set, the orbit is also
/// followed step by step and must use `f₁` for `m` steps, then `f₂`.
pub fn compose_f2n_f1m(
    s: f64,
    theta: f64,
    lambda: Lambda,
    n: usize,
    m: usize,
    validate: bool,
) -> Result<ReducedPoint> {
    let start = ReducedPoint::new(s, theta)?;
    if validate {
        let mut p = start;
        for step in 0..n + m {
            let want = if step < m { RegionTag::ReducedM1 } else { RegionTag::ReducedM2 };
            let next = reduced_map(p, lambda).map_err(|_| Error::ItineraryViolation { step })?;
            if next.branch != want {
                return Err(Error::ItineraryViolation { step });
            }
            p = next.image;
        }
    }
    let x = lambda.value().powi(m as i32) * theta;
    let upsilon =
        (h_partial(x, lambda, n as i64 - 1) - s - s_sum(theta, lambda, m as i64 - 1)) * gamma_n(x, lambda, n);
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    let out = ReducedPoint { s: sign * upsilon, theta: g_iterate(x, lambda, n as u32) };
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// A point of the parabolic line `θ = 0`.
    PLine,
    FixedPoint,
    Q(usize),
    P(usize),
    Other,
}

impl Family {
    pub fn label(&self) -> &'static str {
        match self {
            Family::PLine => "p_line",
            Family::FixedPoint => "fixed_point",
            Family::Q(_) => "q",
            Family::P(_) => "p",
            Family::Other => "other",
        }
    }

    pub fn index(&self) -> usize {
        match self {
            Family::Q(n) | Family::P(n) => *n,
            _ => 0,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Q(n) => write!(f, "q{n}"),
            Family::P(n) => write!(f, "p{n}"),
            other => f.write_str(other.label()),
        }
    }
}

impl Serialize for Family {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

/// A verified periodic orbit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicOrbitRecord {
    pub family: Family,
    pub n: usize,
    pub lambda: f64,
    pub period: usize,
    pub itinerary: String,
    pub points: Vec<ReducedPoint>,
    /// Largest per-step backward error: the size of the perturbation of a
    /// recorded point that makes its image land exactly on the next one.
    pub residual: f64,
    /// Largest `‖φ(x_i) - x_{i+1}‖_∞`.
    pub forward_residual: f64,
    pub stability: StabilityClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    OutsidePhaseSpace,
    NearSingular,
    WrongBranch,
    Residual(f64),
}

/// Where and why a candidate orbit was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationFailure {
    pub step: usize,
    pub reason: FailureReason,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OrbitOutcome {
    Exists(Box<PeriodicOrbitRecord>),
    Absent(ValidationFailure),
}

impl OrbitOutcome {
    pub fn exists(&self) -> bool {
        matches!(self, OrbitOutcome::Exists(_))
    }

    pub fn record(&self) -> Option<&PeriodicOrbitRecord> {
        match self {
            OrbitOutcome::Exists(r) => Some(r),
            OrbitOutcome::Absent(_) => None,
        }
    }
}

/// Residuals of a cycle that follows `itinerary`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleCheck {
    pub residual: f64,
    pub forward_residual: f64,
}

/// Follows `points` along `itinerary` (digits `1`/`2`) and measures how well
/// the cycle closes.
pub fn verify_cycle(
    points: &[ReducedPoint],
    itinerary: &str,
    lambda: Lambda,
) -> std::result::Result<CycleCheck, ValidationFailure> {
    let digits: Vec<char> = itinerary.chars().collect();
    assert_eq!(digits.len(), points.len(), "itinerary length must equal period");
    let k = points.len();
    let mut residual: f64 = 0.0;
    let mut forward: f64 = 0.0;
    for (step, p) in points.iter().enumerate() {
        let fail = |reason| ValidationFailure { step, reason };
        if p.validate().is_err() {
            return Err(fail(FailureReason::OutsidePhaseSpace));
        }
        let region = classify_reduced(*p).map_err(|_| fail(FailureReason::OutsidePhaseSpace))?;
        if region.is_singular() {
            return Err(fail(FailureReason::NearSingular));
        }
        if region.branch_digit() != Some(digits[step]) {
            return Err(fail(FailureReason::WrongBranch));
        }
        let (img, jac) = step_with_jacobian(*p, lambda).map_err(|_| fail(FailureReason::NearSingular))?;
        let next = points[(step + 1) % k];
        let ds = img.image.s - next.s;
        let dt = img.image.theta - next.theta;
        forward = forward.max(ds.abs()).max(dt.abs());
        let sign = jac.sign();
        let back_theta = sign * dt / jac.a22;
        let back_s = (sign * ds - jac.a12 * back_theta) / jac.a11;
        residual = residual.max(back_s.abs()).max(back_theta.abs());
    }
    if !(residual < TOL_FIX) {
        return Err(ValidationFailure { step: k, reason: FailureReason::Residual(residual) });
    }
    Ok(CycleCheck { residual, forward_residual: forward })
}

fn finish(
    family: Family,
    lambda: Lambda,
    points: Vec<ReducedPoint>,
    itinerary: String,
) -> OrbitOutcome {
    let check = match verify_cycle(&points, &itinerary, lambda) {
        Ok(c) => c,
        Err(f) => return OrbitOutcome::Absent(f),
    };
    let stability = match classify_cycle(&points, lambda) {
        Ok(s) => s,
        Err(_) => {
            return OrbitOutcome::Absent(ValidationFailure { step: 0, reason: FailureReason::NearSingular })
        }
    };
    OrbitOutcome::Exists(Box::new(PeriodicOrbitRecord {
        family,
        n: family.index(),
        lambda: lambda.value(),
        period: points.len(),
        itinerary,
        points,
        residual: check.residual,
        forward_residual: check.forward_residual,
        stability,
    }))
}

/// `p_λ = (1/(1 + tanθ_λ), θ_λ)`, the only fixed point off the parabolic line.
pub fn fixed_point_p(lambda: Lambda) -> Result<PeriodicOrbitRecord> {
    lambda.require_contracting()?;
    let theta = lambda.fixed_angle();
    let p = ReducedPoint { s: 1.0 / (1.0 + theta.tan()), theta };
    match finish(Family::FixedPoint, lambda, vec![p], "2".into()) {
        OrbitOutcome::Exists(r) => Ok(*r),
        OrbitOutcome::Absent(f) => Err(Error::Unverified(match f.reason {
            FailureReason::Residual(r) => r,
            _ => f64::NAN,
        })),
    }
}

/// A point of the parabolic line: a fixed point of the reduced map.
pub fn parabolic_point(s: f64, lambda: Lambda) -> Result<PeriodicOrbitRecord> {
    let p = ReducedPoint::new(s, 0.0)?;
    match finish(Family::PLine, lambda, vec![p], "1".into()) {
        OrbitOutcome::Exists(r) => Ok(*r),
        OrbitOutcome::Absent(_) => Err(Error::Singular(crate::SingularSet::Plus)),
    }
}

/// `θ_n = (π/2) λ(1-λ) / (1-λ^{n+2})`.
pub fn qn_theta(n: usize, lambda: Lambda) -> f64 {
    let l = lambda.value();
    FRAC_PI_2 * l * (1.0 - l) / (1.0 - l.powi(n as i32 + 2))
}

/// Closed-form orbit points of `q_n`, `n ≥ 1`. The last point is computed
/// from the difference form of `s_n` to avoid cancellation.
pub fn qn_candidate(n: usize, lambda: Lambda) -> Vec<ReducedPoint> {
    let l = lambda.value();
    let theta = qn_theta(n, lambda);
    let x = l.powi(n as i32) * theta;
    let gx = g_contract(x, lambda);
    let gamma2 = 1.0 / (x.tan() * gx.tan());
    let s0 = (1.0 - s_sum(theta, lambda, n as i64)) * gamma2 / (gamma2 - 1.0);
    let mut pts = Vec::with_capacity(n + 2);
    for j in 0..=n {
        pts.push(ReducedPoint {
            s: s0 + s_sum(theta, lambda, j as i64 - 1),
            theta: l.powi(j as i32) * theta,
        });
    }
    let d = (1.0 / gx.tan() - (1.0 - s_sum(theta, lambda, n as i64 - 1))) / (gamma2 - 1.0);
    pts.push(ReducedPoint { s: d / x.tan(), theta: gx });
    pts
}

/// `q_n` if it exists at `λ`; `n = 0` gives `p_λ`.
pub fn solve_qn(n: usize, lambda: Lambda) -> Result<OrbitOutcome> {
    lambda.require_contracting()?;
    if n == 0 {
        let p = fixed_point_p(lambda)?;
        return Ok(finish(Family::Q(0), lambda, p.points, p.itinerary));
    }
    let itinerary = format!("{}22", "1".repeat(n));
    Ok(finish(Family::Q(n), lambda, qn_candidate(n, lambda), itinerary))
}

/// Existence of `q_n` from the sign condition `S_n(θ_n) < 1`.
pub fn qn_exists_analytic(n: usize, lambda: Lambda) -> bool {
    s_sum(qn_theta(n, lambda), lambda, n as i64) < 1.0
}

/// Angle of `p_n`: the fixed point of `θ ↦ g^{2n-1}(λθ)`.
pub fn pn_theta(n: usize, lambda: Lambda) -> f64 {
    let l = lambda.value();
    let k = 2 * n as i32 - 1;
    lambda.fixed_angle() * (1.0 + l.powi(k)) / (1.0 + l.powi(k + 1))
}

/// First point of the `p_n` candidate, from the fixed point of the
/// composition formula (linear in `s`).
pub fn pn_start(n: usize, lambda: Lambda) -> ReducedPoint {
    let theta = pn_theta(n, lambda);
    let k = 2 * n - 1;
    let x = lambda.value() * theta;
    let inv_gamma = 1.0 / gamma_n(x, lambda, k);
    let s = (h_partial(x, lambda, k as i64 - 1) - theta.tan()) / (1.0 + inv_gamma);
    ReducedPoint { s, theta }
}

/// Orbit points from exact angles and one anchored `s_0`. The remaining
/// arclengths come from the inverse branches taken backwards around the
/// cycle, which contract in `s`, so rounding errors do not grow.
fn fill_backward(s0: f64, thetas: &[f64], itinerary: &str) -> Vec<ReducedPoint> {
    let digits: Vec<char> = itinerary.chars().collect();
    let k = thetas.len();
    let mut s = vec![0.0; k];
    s[0] = s0;
    let mut next = s0;
    for j in (1..k).rev() {
        let t = thetas[j].tan();
        next = if digits[j] == '1' { next - t } else { 1.0 - next * t };
        s[j] = next;
    }
    s.iter().zip(thetas).map(|(&s, &theta)| ReducedPoint { s, theta }).collect()
}

/// `p_n`, `n ≥ 1`, if it exists at `λ`.
pub fn solve_pn(n: usize, lambda: Lambda) -> Result<OrbitOutcome> {
    lambda.require_contracting()?;
    if n == 0 {
        return Err(Error::InvalidArgument("p_n needs n >= 1".into()));
    }
    let itinerary = format!("1{}", "2".repeat(2 * n - 1));
    let start = pn_start(n, lambda);
    let mut thetas = vec![start.theta, lambda.value() * start.theta];
    for _ in 1..2 * n - 1 {
        let last = *thetas.last().unwrap();
        thetas.push(g_contract(last, lambda));
    }
    Ok(finish(Family::P(n), lambda, fill_backward(start.s, &thetas, &itinerary), itinerary))
}

/// Number of `q_n`, `1 ≤ n ≤ n_max`, that exist at `λ`.
pub fn count_q(lambda: Lambda, n_max: usize) -> Result<usize> {
    let mut count = 0;
    for n in 1..=n_max {
        if solve_qn(n, lambda)?.exists() {
            count += 1;
        }
    }
    Ok(count)
}

pub fn count_p(lambda: Lambda, n_max: usize) -> Result<usize> {
    let mut count = 0;
    for n in 1..=n_max {
        if solve_pn(n, lambda)?.exists() {
            count += 1;
        }
    }
    Ok(count)
}

/// `c_n`: the root of `S_n(θ_n(λ)) = 1`. `q_n` exists exactly for `λ < c_n`.
pub fn cn_threshold(n: usize) -> Result<RootReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("c_n needs n >= 1".into()));
    }
    let f = |l: f64| -> Result<f64> {
        let lambda = Lambda::new(l)?;
        Ok(s_sum(qn_theta(n, lambda), lambda, n as i64) - 1.0)
    };
    brent(f, CN_BRACKET.0, CN_BRACKET.1, 1e-15)
}

/// Local stable graph `s = H(θ)` of `q_m`, as the series solution of
/// `H(θ) = 1 - S_m(θ) + H(G(θ)) τ(θ)` with `G(θ) = g²(λ^m θ)` and
/// `τ(θ) = tan(λ^m θ) tan(g(λ^m θ))`.
pub fn qn_stable_graph(m: usize, lambda: Lambda, theta: f64) -> Result<SeriesEval> {
    lambda.require_contracting()?;
    let l = lambda.value();
    let lm = l.powi(m as i32);
    let fixed = qn_theta(m, lambda);
    let big_g = |t: f64| g_iterate(lm * t, lambda, 2);
    let tau = |t: f64| {
        let x = lm * t;
        x.tan() * g_contract(x, lambda).tan()
    };
    let mut value = 0.0;
    let mut weight = 1.0;
    let mut t = theta;
    for k in 0..100_000 {
        if !(0.0..FRAC_PI_2).contains(&t) {
            return Err(Error::SeriesDiverged { theta });
        }
        let term = (1.0 - s_sum(t, lambda, m as i64)) * weight;
        value += term;
        weight *= tau(t);
        if !weight.is_finite() || weight.abs() > 1e250 {
            return Err(Error::SeriesDiverged { theta });
        }
        t = big_g(t);
        let d = (t - fixed).abs();
        let r = tau(fixed).max(tau(fixed + d)).max(tau((fixed - d).max(0.0)));
        if r < 1.0 {
            let tail = weight.abs() * (1.0 - s_sum(t, lambda, m as i64)).abs().max(1.0) / (1.0 - r);
            if tail < TOL_SERIES {
                return Ok(SeriesEval { value, terms_used: k + 1, tail_bound: tail });
            }
        }
    }
    Err(Error::SeriesDiverged { theta })
}

/// Checks that the stable graph of `q_m` at `θ` is a genuine stable point:
/// one period follows `1ᵐ22` and lands on the graph again. Also returns the
/// bracketing values `σ_{m+1}(θ)`, `σ_m(θ)`.
pub fn qn_stable_point(m: usize, lambda: Lambda, theta: f64) -> Result<(ReducedPoint, f64, f64)> {
    let s = qn_stable_graph(m, lambda, theta)?.value;
    let p = ReducedPoint::new(s, theta)?;
    let img = compose_f2n_f1m(s, theta, lambda, 2, m, true)?;
    let expected = qn_stable_graph(m, lambda, img.theta)?.value;
    if (img.s - expected).abs() > 1e-8 {
        return Err(Error::Unverified((img.s - expected).abs()));
    }
    Ok((p, sigma_partial(theta, lambda, m + 1), sigma_partial(theta, lambda, m)))
}

/// Full-map periods of the lifts of a reduced cycle, one per lift of the
/// first point.
pub fn lift_periods(record: &PeriodicOrbitRecord, lambda: Lambda, tol: f64) -> Result<Vec<usize>> {
    let k = record.period;
    let mut out = Vec::new();
    for start in lifts(record.points[0]) {
        let mut p: FullPoint = start;
        let mut found = None;
        for step in 1..=8 * k {
            p = full_map(p, lambda)?.image;
            if step % k == 0 && full_distance(&p, &start) < tol {
                found = Some(step);
                break;
            }
        }
        out.push(found.ok_or(Error::Unverified(f64::NAN))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linearization::StabilityKind;

    fn lam(v: f64) -> Lambda {
        Lambda::new(v).unwrap()
    }

    #[test]
    fn sequence_conventions() {
        let l = lam(0.6);
        let b = SequenceBundle::evaluate(0.4, l, 0);
        assert_eq!(b.h, 1.0);
        assert_eq!(b.gamma, 1.0);
        assert_eq!(b.s_sum, 0.4f64.tan());
    }

    #[test]
    fn fixed_point_at_half() {
        let p = fixed_point_p(lam(0.5)).unwrap();
        let th = std::f64::consts::PI / 6.0;
        assert!((p.points[0].theta - th).abs() < 1e-15);
        assert!((p.points[0].s - 1.0 / (1.0 + 1.0 / 3f64.sqrt())).abs() < 1e-15);
        assert!(p.forward_residual < 1e-13);
        assert_eq!(p.stability.kind, StabilityKind::Hyperbolic);
    }

    #[test]
    fn q1_exists_below_c1_only() {
        let r = solve_qn(1, lam(0.6)).unwrap();
        let rec = r.record().unwrap();
        assert_eq!(rec.period, 3);
        assert_eq!(rec.itinerary, "122");
        assert!(!solve_qn(1, lam(0.85)).unwrap().exists());
        assert_eq!(solve_qn(0, lam(0.6)).unwrap().record().unwrap().period, 1);
    }

    #[test]
    fn c1_value() {
        let c = cn_threshold(1).unwrap();
        assert!((c.root - 0.7964).abs() < 1e-3);
    }

    #[test]
    fn p1_closed_form() {
        let l = lam(0.6);
        let r = solve_pn(1, l).unwrap();
        let rec = r.record().unwrap();
        assert_eq!(rec.period, 2);
        let th = 0.6 * std::f64::consts::PI / (2.0 * (1.0 + 0.36));
        assert!((rec.points[0].theta - th).abs() < 1e-15);
        let s = (1.0 - th.tan()) / (1.0 + (0.6 * th).tan());
        assert!((rec.points[0].s - s).abs() < 1e-15);
    }

    #[test]
    fn composition_single_f2() {
        let l = lam(0.6);
        let (s, th) = (0.7, 0.5);
        let direct = reduced_map(ReducedPoint::new(s, th).unwrap(), l).unwrap().image;
        let formula = compose_f2n_f1m(s, th, l, 1, 0, true).unwrap();
        assert!(direct.dist_max(&formula) < 1e-14);
    }

    #[test]
    fn stable_graph_of_q_passes_through_q() {
        let l = lam(0.5);
        for m in 1..5 {
            let q = solve_qn(m, l).unwrap();
            let q0 = q.record().unwrap().points[0];
            let h = qn_stable_graph(m, l, q0.theta).unwrap();
            assert!((h.value - q0.s).abs() < 1e-12, "m = {m}");
        }
    }
}
