//! Derivatives of the full and reduced maps.
//!
//! Both maps send horizontal lines to horizontal lines, so every derivative is
//! upper triangular. A step Jacobian is `±[[cosθ₀/cosθ_B, t/cosθ_B], [0, λ]]`
//! where `θ_B` is the angle right after the specular reflection (before the
//! contraction) and `t` the flight length. The overall sign is kept as a flag
//! so the entries stay positive.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{
    full_map_detail, reduced_map_detail, FullPoint, Lambda, MapStep, ReducedPoint, RegionTag,
    ANGLE_GUARD, TOL_SING,
};

/// Parabolic test tolerance on `|α - 1|`.
pub const TOL_EIG: f64 = 1e-9;

/// A point of either phase space that knows how to advance itself.
pub trait PhasePoint: Copy + Send + Sync {
    /// One map step plus the pre-contraction image angle.
    fn advance(self, lambda: Lambda) -> Result<(MapStep<Self>, f64)>;
    fn theta(&self) -> f64;
    fn s(&self) -> f64;
}

impl PhasePoint for FullPoint {
    fn advance(self, lambda: Lambda) -> Result<(MapStep<Self>, f64)> {
        full_map_detail(self, lambda, TOL_SING)
    }
    fn theta(&self) -> f64 {
        self.theta
    }
    fn s(&self) -> f64 {
        self.s
    }
}

impl PhasePoint for ReducedPoint {
    fn advance(self, lambda: Lambda) -> Result<(MapStep<Self>, f64)> {
        reduced_map_detail(self, lambda, TOL_SING)
    }
    fn theta(&self) -> f64 {
        self.theta
    }
    fn s(&self) -> f64 {
        self.s
    }
}

/// Upper-triangular 2×2 matrix `sign · [[a11, a12], [0, a22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriJacobian {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
    /// True when the matrix carries an overall factor `-1`.
    pub negated: bool,
}

impl TriJacobian {
    pub const IDENTITY: TriJacobian = TriJacobian { a11: 1.0, a12: 0.0, a22: 1.0, negated: false };

    pub fn sign(&self) -> f64 {
        if self.negated {
            -1.0
        } else {
            1.0
        }
    }

    /// `self · earlier`: apply `earlier` first.
    pub fn after(&self, earlier: &TriJacobian) -> TriJacobian {
        TriJacobian {
            a11: self.a11 * earlier.a11,
            a12: self.a11 * earlier.a12 + self.a12 * earlier.a22,
            a22: self.a22 * earlier.a22,
            negated: self.negated != earlier.negated,
        }
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22
    }

    /// Entries with the sign applied, row-major, `a21 = 0`.
    pub fn signed_entries(&self) -> [[f64; 2]; 2] {
        let g = self.sign();
        [[g * self.a11, g * self.a12], [0.0, g * self.a22]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityKind {
    Parabolic,
    Hyperbolic,
}

/// Stability of a periodic orbit with its eigenvalue moduli `(α, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityClass {
    pub kind: StabilityKind,
    pub alpha: f64,
    pub beta: f64,
}

fn jacobian_from_step(theta0: f64, unscaled: f64, flight: f64, lambda: Lambda, branch: RegionTag) -> Result<TriJacobian> {
    if unscaled.abs() >= FRAC_PI_2 - ANGLE_GUARD {
        return Err(Error::AngleRange(unscaled));
    }
    // cosθ_B from the incoming angle: near a corner θ_B sits next to ±π/2
    // and its cosine would lose all relative accuracy
    let cb = match branch {
        RegionTag::ReducedM2 | RegionTag::FullM1 => theta0.sin(),
        RegionTag::FullM3 => -theta0.sin(),
        _ => unscaled.cos(),
    };
    if branch == RegionTag::ReducedM1 {
        return Ok(TriJacobian { a11: 1.0, a12: flight / cb, a22: lambda.value(), negated: false });
    }
    Ok(TriJacobian {
        a11: theta0.cos() / cb,
        a12: flight / cb,
        a22: lambda.value(),
        negated: true,
    })
}

/// Derivative of one step at `p`.
pub fn step_jacobian<P: PhasePoint>(p: P, lambda: Lambda) -> Result<TriJacobian> {
    let (step, unscaled) = p.advance(lambda)?;
    jacobian_from_step(p.theta(), unscaled, step.flight_length, lambda, step.branch)
}

/// Step Jacobian together with the image point.
pub fn step_with_jacobian<P: PhasePoint>(p: P, lambda: Lambda) -> Result<(MapStep<P>, TriJacobian)> {
    let (step, unscaled) = p.advance(lambda)?;
    let jac = jacobian_from_step(p.theta(), unscaled, step.flight_length, lambda, step.branch)?;
    Ok((step, jac))
}

/// `D(map^n)(p)`. Fails with [`Error::OrbitDied`] carrying the index of the
/// step that could not be taken.
pub fn cocycle<P: PhasePoint>(p: P, lambda: Lambda, n: usize) -> Result<TriJacobian> {
    cocycle_with_orbit(p, lambda, n).map(|(j, _)| j)
}

/// Like [`cocycle`], also returning the `n + 1` orbit points.
pub fn cocycle_with_orbit<P: PhasePoint>(p: P, lambda: Lambda, n: usize) -> Result<(TriJacobian, Vec<P>)> {
    let mut jac = TriJacobian::IDENTITY;
    let mut orbit = Vec::with_capacity(n + 1);
    orbit.push(p);
    let mut q = p;
    for step in 0..n {
        let (next, j) = step_with_jacobian(q, lambda).map_err(|_| Error::OrbitDied { step })?;
        jac = j.after(&jac);
        q = next.image;
        orbit.push(q);
    }
    Ok((jac, orbit))
}

/// Stability of a cycle given by its points in order. Each Jacobian is taken
/// at the recorded point, so closure errors do not accumulate.
pub fn classify_cycle<P: PhasePoint>(points: &[P], lambda: Lambda) -> Result<StabilityClass> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty cycle".into()));
    }
    let mut jac = TriJacobian::IDENTITY;
    for (step, p) in points.iter().enumerate() {
        let j = step_jacobian(*p, lambda).map_err(|_| Error::OrbitDied { step })?;
        jac = j.after(&jac);
    }
    let alpha = jac.a11.abs();
    let beta = jac.a22.abs();
    let kind = if (alpha - 1.0).abs() <= TOL_EIG {
        StabilityKind::Parabolic
    } else {
        StabilityKind::Hyperbolic
    };
    Ok(StabilityClass { kind, alpha, beta })
}

/// Two Lyapunov exponents from the triangular cocycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    /// `ln(α_n) / n`, accumulated as a sum of logarithms.
    pub upper: f64,
    /// `ln λ`.
    pub lower: f64,
    pub steps: usize,
}

pub fn lyapunov<P: PhasePoint>(p: P, lambda: Lambda, n_max: usize) -> Result<LyapunovEstimate> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be positive".into()));
    }
    let mut log_sum = 0.0;
    let mut log_beta = 0.0;
    let mut q = p;
    for step in 0..n_max {
        let (next, j) = step_with_jacobian(q, lambda).map_err(|_| Error::OrbitDied { step })?;
        log_sum += j.a11.ln();
        log_beta += j.a22.ln();
        q = next.image;
    }
    let n = n_max as f64;
    Ok(LyapunovEstimate { upper: log_sum / n, lower: log_beta / n, steps: n_max })
}
