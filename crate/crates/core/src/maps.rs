//! Full and reduced billiard maps of the unit square.
//!
//! Arclength `s ∈ [0,4)` runs counterclockwise from the corner `(0,0)`; side
//! `k = ⌊s⌋` starts at the `k`-th corner. The reflection angle `θ` is measured
//! from the inward normal, positive towards the counterclockwise tangent.
//! The map `Φ_λ = R_λ ∘ B` is the specular billiard map `B` followed by the
//! angle contraction `R_λ(s,θ) = (s, λθ)`.
//!
//! The reduced map acts on `M = (0,1) × [0, π/2)` obtained by identifying the
//! four sides and the mirror symmetry `(s,θ) ~ (1-s,-θ)`. It has two branches,
//! `f₁(s,θ) = (s + tanθ, λθ)` below the corner curve `s + tanθ = 1` and
//! `f₂(s,θ) = ((1-s)cotθ, λ(π/2-θ))` above it.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SingularSet};

/// Absolute distance to a singular set below which a point is refused.
pub const TOL_SING: f64 = 1e-12;

/// Angles within this distance of `±π/2` are rejected before taking `tan`.
pub const ANGLE_GUARD: f64 = 1e-9;

/// Contraction factor of the reflection law.
///
/// [`Lambda::new`] accepts `0 < λ < 1`. The conjugacy between `Φ_{1/λ}` and
/// `Φ_λ⁻¹` needs expanding factors as well; [`Lambda::any`] accepts every
/// positive value except `1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Lambda(f64);

impl Lambda {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Lambda(value))
        } else {
            Err(Error::InvalidLambda(value))
        }
    }

    pub fn any(value: f64) -> Result<Self> {
        if value > 0.0 && value != 1.0 && value.is_finite() {
            Ok(Lambda(value))
        } else {
            Err(Error::InvalidLambda(value))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn inverse(self) -> Lambda {
        Lambda(1.0 / self.0)
    }

    pub fn is_contracting(self) -> bool {
        self.0 < 1.0
    }

    /// Angle of the hyperbolic fixed point, `θ_λ = πλ / (2(1+λ))`.
    pub fn fixed_angle(self) -> f64 {
        std::f64::consts::PI * self.0 / (2.0 * (1.0 + self.0))
    }

    pub(crate) fn require_contracting(self) -> Result<()> {
        if self.is_contracting() {
            Ok(())
        } else {
            Err(Error::InvalidLambda(self.0))
        }
    }
}

impl TryFrom<f64> for Lambda {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Lambda::any(value)
    }
}

impl From<Lambda> for f64 {
    fn from(l: Lambda) -> f64 {
        l.0
    }
}

/// State of the unreduced map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullPoint {
    pub s: f64,
    pub theta: f64,
}

impl FullPoint {
    pub fn new(s: f64, theta: f64) -> Result<Self> {
        let p = FullPoint { s, theta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..4.0).contains(&self.s) {
            return Err(Error::Domain { what: "s", value: self.s });
        }
        check_angle(self.theta)
    }

    /// Side index `[s]`.
    pub fn side(&self) -> f64 {
        self.s.floor()
    }

    /// Position along the side, `{s}`.
    pub fn frac(&self) -> f64 {
        self.s - self.s.floor()
    }
}

/// State of the reduced map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedPoint {
    pub s: f64,
    pub theta: f64,
}

impl ReducedPoint {
    pub fn new(s: f64, theta: f64) -> Result<Self> {
        let p = ReducedPoint { s, theta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::Domain { what: "s", value: self.s });
        }
        if !(self.theta >= 0.0 && self.theta < FRAC_PI_2 - ANGLE_GUARD) {
            return Err(Error::Domain { what: "theta", value: self.theta });
        }
        Ok(())
    }

    pub fn dist_max(&self, other: &ReducedPoint) -> f64 {
        (self.s - other.s).abs().max((self.theta - other.theta).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionTag {
    /// Full map, next collision on the following side.
    FullM1,
    /// Full map, next collision on the opposite side.
    FullM2,
    /// Full map, next collision on the preceding side.
    FullM3,
    /// Reduced map, below the corner curve: branch `f₁`.
    ReducedM1,
    /// Reduced map, above the corner curve: branch `f₂`.
    ReducedM2,
    OnSingularPlus,
    OnSingularMinus,
}

impl RegionTag {
    pub fn is_singular(self) -> bool {
        matches!(self, RegionTag::OnSingularPlus | RegionTag::OnSingularMinus)
    }

    /// Branch label used in itineraries: `1` for `f₁`, `2` for `f₂`.
    pub fn branch_digit(self) -> Option<char> {
        match self {
            RegionTag::ReducedM1 => Some('1'),
            RegionTag::ReducedM2 => Some('2'),
            _ => None,
        }
    }
}

/// One application of a map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapStep<P> {
    pub image: P,
    /// Region of the point the branch was selected from.
    pub branch: RegionTag,
    /// Euclidean length of the chord between the two collisions.
    pub flight_length: f64,
}

fn check_angle(theta: f64) -> Result<()> {
    if theta.abs() < FRAC_PI_2 - ANGLE_GUARD {
        Ok(())
    } else {
        Err(Error::Domain { what: "theta", value: theta })
    }
}

fn wrap4(s: f64) -> f64 {
    let w = s.rem_euclid(4.0);
    if w >= 4.0 {
        0.0
    } else {
        w
    }
}

/// Region of a full-map point, with corner proximity measured against `tol`.
pub fn classify_full_tol(p: FullPoint, tol: f64) -> Result<RegionTag> {
    p.validate()?;
    let x = p.frac();
    if x <= tol || 1.0 - x <= tol {
        return Ok(RegionTag::OnSingularPlus);
    }
    let u = x + p.theta.tan();
    if u.abs() <= tol || (u - 1.0).abs() <= tol {
        return Ok(RegionTag::OnSingularPlus);
    }
    Ok(if u > 1.0 {
        RegionTag::FullM1
    } else if u > 0.0 {
        RegionTag::FullM2
    } else {
        RegionTag::FullM3
    })
}

pub fn classify_full(p: FullPoint) -> Result<RegionTag> {
    classify_full_tol(p, TOL_SING)
}

/// Region of a reduced point. Points within `tol` of the corner curve or of
/// the sides `s = 0`, `s = 1` (lifts of corners) are singular.
pub fn classify_reduced_tol(p: ReducedPoint, tol: f64) -> Result<RegionTag> {
    p.validate()?;
    if p.s <= tol || 1.0 - p.s <= tol {
        return Ok(RegionTag::OnSingularPlus);
    }
    let u = p.s + p.theta.tan();
    if (u - 1.0).abs() <= tol {
        Ok(RegionTag::OnSingularPlus)
    } else if u < 1.0 {
        Ok(RegionTag::ReducedM1)
    } else {
        Ok(RegionTag::ReducedM2)
    }
}

pub fn classify_reduced(p: ReducedPoint) -> Result<RegionTag> {
    classify_reduced_tol(p, TOL_SING)
}

/// Specular billiard map `B`. Returns the image and its (unscaled) angle.
fn billiard(p: FullPoint, tol: f64) -> Result<(FullPoint, RegionTag, f64)> {
    let region = classify_full_tol(p, tol)?;
    let k = p.side();
    let x = p.s - k;
    let (s1, theta1, flight) = match region {
        RegionTag::FullM1 => {
            let t = p.theta.tan();
            (k + 1.0 + (1.0 - x) / t, FRAC_PI_2 - p.theta, (1.0 - x) / p.theta.sin())
        }
        RegionTag::FullM2 => (k - 1.0 - x - p.theta.tan(), -p.theta, 1.0 / p.theta.cos()),
        RegionTag::FullM3 => {
            let t = p.theta.tan();
            (k + x / t, -FRAC_PI_2 - p.theta, -x / p.theta.sin())
        }
        _ => return Err(Error::Singular(SingularSet::Plus)),
    };
    Ok((FullPoint { s: wrap4(s1), theta: theta1 }, region, flight))
}

/// Time reversal `T(s,θ) = (s,-θ)`.
pub fn time_reversal(p: FullPoint) -> FullPoint {
    FullPoint { s: p.s, theta: -p.theta }
}

/// Reflection law `R_λ(s,θ) = (s, λθ)`.
pub fn reflection_law(p: FullPoint, lambda: Lambda) -> FullPoint {
    FullPoint { s: p.s, theta: lambda.value() * p.theta }
}

/// `Φ_λ` together with the pre-contraction angle `λ⁻¹θ₁` (needed by the
/// Jacobian, which would otherwise pick up a rounding error from dividing).
pub(crate) fn full_map_detail(
    p: FullPoint,
    lambda: Lambda,
    tol: f64,
) -> Result<(MapStep<FullPoint>, f64)> {
    let (b, branch, flight) = billiard(p, tol)?;
    let theta = lambda.value() * b.theta;
    check_angle(theta).map_err(|_| Error::AngleRange(theta))?;
    Ok((
        MapStep { image: FullPoint { s: b.s, theta }, branch, flight_length: flight },
        b.theta,
    ))
}

pub fn full_map_tol(p: FullPoint, lambda: Lambda, tol: f64) -> Result<MapStep<FullPoint>> {
    full_map_detail(p, lambda, tol).map(|(step, _)| step)
}

/// `Φ_λ(p)`. Refuses points on `S⁺` and, for expanding `λ`, images whose
/// angle leaves the phase space.
pub fn full_map(p: FullPoint, lambda: Lambda) -> Result<MapStep<FullPoint>> {
    full_map_tol(p, lambda, TOL_SING)
}

/// `Φ_λ⁻¹ = T ∘ B ∘ T ∘ R_λ⁻¹`. The reported branch is the region of the
/// preimage.
pub fn full_inverse(p: FullPoint, lambda: Lambda) -> Result<MapStep<FullPoint>> {
    p.validate()?;
    let unscaled = p.theta / lambda.value();
    check_angle(unscaled).map_err(|_| Error::AngleRange(unscaled))?;
    let reversed = FullPoint { s: p.s, theta: -unscaled };
    let (b, region, flight) = match billiard(reversed, TOL_SING) {
        Err(Error::Singular(_)) => return Err(Error::Singular(SingularSet::Minus)),
        other => other?,
    };
    let branch = match region {
        RegionTag::FullM1 => RegionTag::FullM3,
        RegionTag::FullM3 => RegionTag::FullM1,
        other => other,
    };
    Ok(MapStep { image: time_reversal(b), branch, flight_length: flight })
}

/// Max-norm discrepancy between `Φ_{1/λ}(p)` and
/// `(R_λ∘T)⁻¹ ∘ Φ_λ⁻¹ ∘ (R_λ∘T)(p)`; the arclength difference is taken
/// modulo 4.
pub fn conjugacy_check(p: FullPoint, lambda: Lambda) -> Result<f64> {
    lambda.require_contracting()?;
    let lhs = full_map(p, lambda.inverse())?.image;
    let conj = time_reversal(reflection_law(p, lambda));
    let mid = full_inverse(conj, lambda)?.image;
    let rhs = time_reversal(reflection_law(mid, lambda.inverse()));
    Ok(full_distance(&lhs, &rhs))
}

/// Max-norm distance with the arclength measured on the circle of length 4.
pub fn full_distance(a: &FullPoint, b: &FullPoint) -> f64 {
    let ds = (a.s - b.s).rem_euclid(4.0);
    ds.min(4.0 - ds).max((a.theta - b.theta).abs())
}

/// Quotient projection `π`. Corner lifts (`{s} = 0`) are refused.
pub fn project(p: FullPoint) -> Result<ReducedPoint> {
    p.validate()?;
    let x = p.frac();
    if x == 0.0 {
        return Err(Error::Domain { what: "s (corner)", value: p.s });
    }
    let r = if p.theta >= 0.0 {
        ReducedPoint { s: x, theta: p.theta.abs() }
    } else {
        ReducedPoint { s: 1.0 - x, theta: -p.theta }
    };
    if !(r.s > 0.0 && r.s < 1.0) {
        return Err(Error::Domain { what: "s (corner)", value: p.s });
    }
    Ok(r)
}

/// All preimages of `p` under [`project`]: eight when `θ > 0`, four on the
/// parabolic line `θ = 0`.
pub fn lifts(p: ReducedPoint) -> Vec<FullPoint> {
    let mut out = Vec::with_capacity(8);
    for k in 0..4 {
        let k = k as f64;
        out.push(FullPoint { s: k + p.s, theta: p.theta });
        if p.theta > 0.0 {
            out.push(FullPoint { s: k + 1.0 - p.s, theta: -p.theta });
        }
    }
    out
}

/// Reduced map with the pre-contraction angle of the image.
pub(crate) fn reduced_map_detail(
    p: ReducedPoint,
    lambda: Lambda,
    tol: f64,
) -> Result<(MapStep<ReducedPoint>, f64)> {
    let branch = classify_reduced_tol(p, tol)?;
    let l = lambda.value();
    match branch {
        RegionTag::ReducedM1 => {
            let t = p.theta.tan();
            let image = ReducedPoint { s: p.s + t, theta: l * p.theta };
            Ok((MapStep { image, branch, flight_length: 1.0 / p.theta.cos() }, p.theta))
        }
        RegionTag::ReducedM2 => {
            let t = p.theta.tan();
            let unscaled = FRAC_PI_2 - p.theta;
            let image = ReducedPoint { s: (1.0 - p.s) / t, theta: l * unscaled };
            if image.theta >= FRAC_PI_2 - ANGLE_GUARD {
                return Err(Error::AngleRange(image.theta));
            }
            let flight = (1.0 - p.s) / p.theta.sin();
            Ok((MapStep { image, branch, flight_length: flight }, unscaled))
        }
        _ => Err(Error::Singular(SingularSet::Plus)),
    }
}

pub fn reduced_map_tol(p: ReducedPoint, lambda: Lambda, tol: f64) -> Result<MapStep<ReducedPoint>> {
    reduced_map_detail(p, lambda, tol).map(|(step, _)| step)
}

/// `φ_λ(p)`: `f₁` below the corner curve, `f₂` above it.
pub fn reduced_map(p: ReducedPoint, lambda: Lambda) -> Result<MapStep<ReducedPoint>> {
    reduced_map_tol(p, lambda, TOL_SING)
}

/// `φ_λ⁻¹(p)`. The branch reported is the branch of the preimage.
pub fn reduced_inverse(p: ReducedPoint, lambda: Lambda) -> Result<MapStep<ReducedPoint>> {
    p.validate()?;
    let unscaled = p.theta / lambda.value();
    if unscaled >= FRAC_PI_2 - ANGLE_GUARD {
        return Err(Error::NoPreimage);
    }
    let t = unscaled.tan();
    let d = p.s - t;
    if d.abs() <= TOL_SING {
        return Err(Error::Singular(SingularSet::Minus));
    }
    if d > 0.0 {
        let image = ReducedPoint { s: d, theta: unscaled };
        Ok(MapStep { image, branch: RegionTag::ReducedM1, flight_length: 1.0 / unscaled.cos() })
    } else {
        let theta = FRAC_PI_2 - unscaled;
        let s = 1.0 - p.s / t;
        let image = ReducedPoint { s, theta };
        Ok(MapStep {
            image,
            branch: RegionTag::ReducedM2,
            flight_length: (1.0 - s) / theta.sin(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lam(v: f64) -> Lambda {
        Lambda::new(v).unwrap()
    }

    #[test]
    fn lambda_validation() {
        assert!(Lambda::new(0.5).is_ok());
        assert!(Lambda::new(1.0).is_err());
        assert!(Lambda::new(0.0).is_err());
        assert!(Lambda::new(1.5).is_err());
        assert!(Lambda::any(1.5).is_ok());
        assert!(Lambda::any(1.0).is_err());
        assert!(Lambda::any(-0.2).is_err());
        assert!(Lambda::any(f64::NAN).is_err());
    }

    #[test]
    fn classify_examples() {
        let p = FullPoint::new(0.5, 0.0).unwrap();
        assert_eq!(classify_full(p).unwrap(), RegionTag::FullM2);
        // {s} + tanθ = 1 exactly
        let p = FullPoint { s: 2.5, theta: 0.5f64.atan() };
        assert_eq!(classify_full(p).unwrap(), RegionTag::OnSingularPlus);
        let p = FullPoint::new(0.2, 1.2).unwrap();
        assert!(0.2 + 1.2f64.tan() > 1.0);
        assert_eq!(classify_full(p).unwrap(), RegionTag::FullM1);
        let p = FullPoint::new(3.2, -0.5).unwrap();
        assert_eq!(classify_full(p).unwrap(), RegionTag::FullM3);
        let corner = FullPoint::new(2.0, 0.3).unwrap();
        assert_eq!(classify_full(corner).unwrap(), RegionTag::OnSingularPlus);
        assert!(classify_full(FullPoint { s: 0.5, theta: 1.6 }).is_err());
    }

    #[test]
    fn perpendicular_bounce_is_period_two() {
        let l = lam(0.37);
        let p = FullPoint::new(0.5, 0.0).unwrap();
        let a = full_map(p, l).unwrap();
        assert_eq!(a.image.theta, 0.0);
        assert!((a.image.s - 2.5).abs() < 1e-15);
        assert!((a.flight_length - 1.0).abs() < 1e-15);
        let b = full_map(a.image, l).unwrap();
        assert!(full_distance(&b.image, &p) < 1e-15);
        let back = full_inverse(p, l).unwrap();
        assert!(full_distance(&back.image, &a.image) < 1e-15);
    }

    #[test]
    fn full_map_refuses_singular_points() {
        let p = FullPoint { s: 1.25, theta: 0.75f64.atan() };
        assert_eq!(full_map(p, lam(0.5)), Err(Error::Singular(SingularSet::Plus)));
    }

    #[test]
    fn fixed_point_lifts_to_period_four() {
        let l = lam(0.6);
        let th = l.fixed_angle();
        let s = 1.0 / (1.0 + th.tan());
        let p = FullPoint::new(s, th).unwrap();
        let mut q = p;
        for _ in 0..4 {
            q = full_map(q, l).unwrap().image;
        }
        assert!(full_distance(&q, &p) < 1e-13);
    }

    #[test]
    fn project_branches() {
        let a = project(FullPoint::new(2.3, 0.4).unwrap()).unwrap();
        assert!((a.s - 0.3).abs() < 1e-15 && a.theta == 0.4);
        let b = project(FullPoint::new(2.3, -0.4).unwrap()).unwrap();
        assert!((b.s - 0.7).abs() < 1e-15 && b.theta == 0.4);
        assert!(project(FullPoint::new(3.0, 0.1).unwrap()).is_err());
    }

    #[test]
    fn eight_preimages() {
        let p = ReducedPoint::new(0.3, 0.4).unwrap();
        let ls = lifts(p);
        assert_eq!(ls.len(), 8);
        for q in &ls {
            assert!(project(*q).unwrap().dist_max(&p) < 1e-15);
        }
        for (i, a) in ls.iter().enumerate() {
            for b in &ls[i + 1..] {
                assert!(full_distance(a, b) > 1e-3);
            }
        }
        assert_eq!(lifts(ReducedPoint::new(0.3, 0.0).unwrap()).len(), 4);
    }

    #[test]
    fn parabolic_line_is_fixed() {
        for &s in &[0.01, 0.3, 0.77, 0.99] {
            let p = ReducedPoint::new(s, 0.0).unwrap();
            let q = reduced_map(p, lam(0.8)).unwrap();
            assert_eq!(q.image, p);
            assert_eq!(q.branch, RegionTag::ReducedM1);
        }
    }

    #[test]
    fn reduced_fixed_point() {
        for &v in &[0.1, 0.5, 0.6218, 0.95] {
            let l = lam(v);
            let th = l.fixed_angle();
            let p = ReducedPoint::new(1.0 / (1.0 + th.tan()), th).unwrap();
            let q = reduced_map(p, l).unwrap();
            assert_eq!(q.branch, RegionTag::ReducedM2);
            assert!(q.image.dist_max(&p) < 1e-15);
        }
    }

    #[test]
    fn reduced_inverse_cases() {
        let l = lam(0.7);
        let p = ReducedPoint::new(0.4, 0.3).unwrap();
        let q = reduced_map(p, l).unwrap().image;
        assert!(reduced_inverse(q, l).unwrap().image.dist_max(&p) < 1e-12);
        let high = ReducedPoint::new(0.5, 0.7 * FRAC_PI_2).unwrap();
        assert_eq!(reduced_inverse(high, l), Err(Error::NoPreimage));
        let th: f64 = 0.4;
        let on_minus = ReducedPoint::new((th / 0.7).tan(), th).unwrap();
        assert_eq!(reduced_inverse(on_minus, l), Err(Error::Singular(SingularSet::Minus)));
    }

    #[test]
    fn conjugacy_on_perpendicular_line_is_exact() {
        let p = FullPoint::new(1.3, 0.0).unwrap();
        assert_eq!(conjugacy_check(p, lam(0.8)).unwrap(), 0.0);
    }

    #[test]
    fn expanding_lambda_can_escape() {
        let p = FullPoint::new(0.5, 0.1).unwrap();
        // B sends the angle to -0.1; a factor of 20 leaves the phase space.
        let big = Lambda::any(20.0).unwrap();
        assert!(matches!(full_map(p, big), Err(Error::AngleRange(_))));
    }
}
