//! Invariant curves of the reduced map.
//!
//! The hyperbolic fixed point `p_λ = (s_λ, θ_λ)` has the horizontal line
//! `θ = θ_λ` as local unstable manifold and the graph of
//!
//! ```text
//! h_λ(θ) = Σ_{n≥0} (-1)^n Π_{i<n} tan(g^i(θ)),   g(θ) = λ(π/2 - θ)
//! ```
//!
//! as local stable manifold; `h_λ` is the fixed point of the graph transform
//! `Γ(h)(θ) = 1 - h(g(θ)) tanθ`. The curve `S_∞ = graph(σ)` with
//! `σ(θ) = 1 - Σ tan(λ^i θ)` bounds the region `B` of points that fall into the
//! parabolic line along the first branch only.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{reduced_inverse, reduced_map, Lambda, ReducedPoint, RegionTag, ANGLE_GUARD};
use crate::par::{self, Execution};

pub const TOL_SERIES: f64 = 1e-13;

/// Maximum depth accepted by [`unstable_segments`].
pub const MAX_DEPTH: usize = 12;

/// Segments shorter than this are dropped by [`unstable_segments`].
pub const MIN_SEGMENT: f64 = 1e-9;

/// Margin used for the interior of the trapping region.
pub const DELTA_MARGIN: f64 = 1e-9;

const MAX_TERMS: usize = 1_000_000;
const OVERFLOW: f64 = 1e250;

/// Largest angle accepted in the reduced phase space.
pub fn theta_max() -> f64 {
    FRAC_PI_2 - ANGLE_GUARD
}

/// Affine contraction `g(θ) = λ(π/2 - θ)`.
#[inline]
pub fn g_contract(theta: f64, lambda: Lambda) -> f64 {
    lambda.value() * (FRAC_PI_2 - theta)
}

/// `g^k(x) = θ_λ + (-λ)^k (x - θ_λ)`.
pub fn g_iterate(x: f64, lambda: Lambda, k: u32) -> f64 {
    let fixed = lambda.fixed_angle();
    fixed + (-lambda.value()).powi(k as i32) * (x - fixed)
}

/// Truncated series value with a rigorous bound on the discarded tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesEval {
    pub value: f64,
    pub terms_used: usize,
    pub tail_bound: f64,
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..theta_max()).contains(&theta) {
        Ok(())
    } else {
        Err(Error::Domain { what: "theta", value: theta })
    }
}

/// `h_λ(θ)` summed until the tail is below `tol`.
///
/// Beyond term `n` every factor is at most `r = tan(θ_λ + λ^{n+1}|θ - θ_λ|)`,
/// so once `r < 1` the absolute tail is bounded by `|P_{n+1}| / (1 - r)`.
pub fn h_lambda_tol(theta: f64, lambda: Lambda, tol: f64) -> Result<SeriesEval> {
    lambda.require_contracting()?;
    check_theta(theta)?;
    let l = lambda.value();
    let fixed = lambda.fixed_angle();
    let dist0 = (theta - fixed).abs();
    let mut value = 0.0;
    let mut product = 1.0;
    let mut sign = 1.0;
    let mut angle = theta;
    let mut dist = dist0;
    for n in 0..MAX_TERMS {
        value += sign * product;
        product *= angle.tan();
        if !product.is_finite() || product.abs() > OVERFLOW {
            return Err(Error::SeriesDiverged { theta });
        }
        sign = -sign;
        angle = g_contract(angle, lambda);
        dist *= l;
        let r = (fixed + dist).tan();
        if r < 1.0 {
            let tail = product.abs() / (1.0 - r);
            if tail < tol {
                return Ok(SeriesEval { value, terms_used: n + 1, tail_bound: tail });
            }
        }
    }
    Err(Error::SeriesDiverged { theta })
}

pub fn h_lambda(theta: f64, lambda: Lambda) -> Result<SeriesEval> {
    h_lambda_tol(theta, lambda, TOL_SERIES)
}

/// Partial sum `Σ_{i=0}^{n} (-1)^i Π_{j<i} tan(g^j(θ))`; `n = -1` gives 0.
pub fn h_partial(theta: f64, lambda: Lambda, n: i64) -> f64 {
    let mut value = 0.0;
    let mut product = 1.0;
    let mut sign = 1.0;
    let mut angle = theta;
    for _ in 0..=n {
        value += sign * product;
        product *= angle.tan();
        sign = -sign;
        angle = g_contract(angle, lambda);
    }
    value
}

/// Closed form of `h_λ'(θ_λ)`.
pub fn h_derivative_at_fixed(lambda: Lambda) -> f64 {
    let t = lambda.fixed_angle().tan();
    let c = lambda.fixed_angle().cos();
    -1.0 / (c * c) / ((1.0 - lambda.value() * t) * (1.0 + t))
}

/// Value of `σ(θ)` with a tag for points where `S_∞` has left the phase
/// space (`σ ≤ 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaEval {
    pub value: f64,
    pub terms_used: usize,
    pub tail_bound: f64,
    pub exits: bool,
}

/// `σ(θ) = 1 - Σ_{i≥0} tan(λ^i θ)`. Convexity of `tan` gives
/// `tan(λx) ≤ λ tan x`, hence the tail after term `n` is at most
/// `tan(λ^n θ) λ / (1 - λ)`.
pub fn sigma_curve(theta: f64, lambda: Lambda) -> Result<SigmaEval> {
    lambda.require_contracting()?;
    check_theta(theta)?;
    let l = lambda.value();
    let ratio = l / (1.0 - l);
    let mut sum = 0.0;
    let mut angle = theta;
    for n in 0..MAX_TERMS {
        let term = angle.tan();
        sum += term;
        let tail = term * ratio;
        if tail < TOL_SERIES {
            let value = 1.0 - sum;
            return Ok(SigmaEval { value, terms_used: n + 1, tail_bound: tail, exits: value <= 0.0 });
        }
        angle *= l;
    }
    Err(Error::SeriesDiverged { theta })
}

/// `σ_n(θ) = 1 - Σ_{i<n} tan(λ^i θ)`. The strip `σ_{n+1} < s < σ_n` holds
/// the points sent into the second branch after exactly `n` steps of `f₁`.
pub fn sigma_partial(theta: f64, lambda: Lambda, n: usize) -> f64 {
    let mut sum = 0.0;
    let mut angle = theta;
    for _ in 0..n {
        sum += angle.tan();
        angle *= lambda.value();
    }
    1.0 - sum
}

/// Membership in `B = {s < σ(θ)}`, stopping as soon as the partial sums
/// decide. `tan_theta` must equal `tan(θ)`.
#[inline]
pub fn in_b_with_tan(s: f64, theta: f64, tan_theta: f64, lambda: Lambda) -> bool {
    let l = lambda.value();
    let ratio = l / (1.0 - l);
    let mut acc = s + tan_theta;
    let mut term = tan_theta;
    let mut angle = theta;
    for _ in 0..4096 {
        if acc >= 1.0 {
            return false;
        }
        if acc + term * ratio < 1.0 {
            return true;
        }
        angle *= l;
        term = angle.tan();
        acc += term;
    }
    acc < 1.0
}

pub fn in_b(p: ReducedPoint, lambda: Lambda) -> bool {
    in_b_with_tan(p.s, p.theta, p.theta.tan(), lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    StableLocal,
    UnstableLocal,
    SInfinity,
    SingularPlus,
    SingularMinus,
    IterateOfSingular,
    /// Local stable graph of a periodic point of the `q_n` family.
    StableOfQ,
    /// Partial curve `s = σ_n(θ)`.
    SigmaPartial,
}

impl CurveKind {
    pub fn label(self) -> &'static str {
        match self {
            CurveKind::StableLocal => "stable_local",
            CurveKind::UnstableLocal => "unstable_local",
            CurveKind::SInfinity => "s_infinity",
            CurveKind::SingularPlus => "singular_plus",
            CurveKind::SingularMinus => "singular_minus",
            CurveKind::IterateOfSingular => "iterate_of_singular",
            CurveKind::StableOfQ => "stable_of_q",
            CurveKind::SigmaPartial => "sigma_partial",
        }
    }
}

/// A curve given as the graph `s = f(θ)` over a strictly increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub kind: CurveKind,
    pub points: Vec<ReducedPoint>,
}

impl Curve {
    /// Builds a curve, checking that the θ-grid is strictly increasing.
    pub fn new(kind: CurveKind, points: Vec<ReducedPoint>) -> Result<Self> {
        if points.windows(2).any(|w| !(w[1].theta > w[0].theta)) {
            return Err(Error::InvalidArgument("curve grid must be strictly increasing".into()));
        }
        Ok(Curve { kind, points })
    }

    /// Graph of `f` sampled at `thetas`.
    pub fn from_fn<F: Fn(f64) -> f64>(kind: CurveKind, thetas: &[f64], f: F) -> Result<Self> {
        let pts = thetas.iter().map(|&theta| ReducedPoint { s: f(theta), theta }).collect();
        Curve::new(kind, pts)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn theta_range(&self) -> Option<(f64, f64)> {
        Some((self.points.first()?.theta, self.points.last()?.theta))
    }

    /// Monotone piecewise-cubic (Fritsch–Carlson) interpolation.
    pub fn interpolate(&self, theta: f64) -> Result<f64> {
        let pts = &self.points;
        let n = pts.len();
        let (lo, hi) = self.theta_range().ok_or(Error::InterpolationRange(theta))?;
        if !(theta >= lo && theta <= hi) {
            return Err(Error::InterpolationRange(theta));
        }
        if n == 1 {
            return Ok(pts[0].s);
        }
        let k = match pts.binary_search_by(|p| p.theta.partial_cmp(&theta).unwrap()) {
            Ok(i) => return Ok(pts[i].s),
            Err(i) => i - 1,
        };
        let secant = |i: usize| (pts[i + 1].s - pts[i].s) / (pts[i + 1].theta - pts[i].theta);
        let slope = |i: usize| -> f64 {
            if i == 0 {
                return secant(0);
            }
            if i == n - 1 {
                return secant(n - 2);
            }
            let (d0, d1) = (secant(i - 1), secant(i));
            if d0 * d1 <= 0.0 {
                return 0.0;
            }
            let h0 = pts[i].theta - pts[i - 1].theta;
            let h1 = pts[i + 1].theta - pts[i].theta;
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            (w1 + w2) / (w1 / d0 + w2 / d1)
        };
        let h = pts[k + 1].theta - pts[k].theta;
        let t = (theta - pts[k].theta) / h;
        let (m0, m1) = (slope(k), slope(k + 1));
        let t2 = t * t;
        let t3 = t2 * t;
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * pts[k].s
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * pts[k + 1].s
            + (t3 - t2) * h * m1)
    }
}

/// Horizontal piece `(s_lo, s_hi) × {θ}` of an unstable manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HorizontalSegment {
    pub theta: f64,
    pub s_lo: f64,
    pub s_hi: f64,
    /// Number of forward iterations that produced this piece.
    pub depth: usize,
}

impl HorizontalSegment {
    pub fn length(&self) -> f64 {
        self.s_hi - self.s_lo
    }

    pub fn endpoints(&self) -> [ReducedPoint; 2] {
        [
            ReducedPoint { s: self.s_lo, theta: self.theta },
            ReducedPoint { s: self.s_hi, theta: self.theta },
        ]
    }
}

/// `θ_k = θ_max · k / (n - 1)`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// One application of the graph transform to a sampled curve, on the same
/// grid. Every `g(θ)` must lie inside the curve's θ-range.
pub fn graph_transform(h: &Curve, lambda: Lambda) -> Result<Curve> {
    let mut pts = Vec::with_capacity(h.len());
    for p in &h.points {
        let s = 1.0 - h.interpolate(g_contract(p.theta, lambda))? * p.theta.tan();
        pts.push(ReducedPoint { s, theta: p.theta });
    }
    Curve::new(h.kind, pts)
}

/// `Γ(h)(θ)` for a function given in closed form.
pub fn graph_transform_fn<F: Fn(f64) -> f64>(h: F, theta: f64, lambda: Lambda) -> f64 {
    1.0 - h(g_contract(theta, lambda)) * theta.tan()
}

/// Largest interval around `θ_λ` on which `0 < h_λ < 1`, where the graph
/// describes the local stable manifold.
pub fn stable_valid_interval(lambda: Lambda) -> Result<(f64, f64)> {
    lambda.require_contracting()?;
    let fixed = lambda.fixed_angle();
    let inside = |theta: f64| -> Result<bool> {
        let v = h_lambda(theta, lambda)?.value;
        Ok(v > 0.0 && v < 1.0)
    };
    let steps = 2048;
    let walk = |target: f64| -> Result<f64> {
        let mut prev = fixed;
        for k in 1..=steps {
            let theta = fixed + (target - fixed) * k as f64 / steps as f64;
            if !inside(theta)? {
                let (mut a, mut b) = (prev, theta);
                for _ in 0..60 {
                    let mid = 0.5 * (a + b);
                    if inside(mid)? {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                return Ok(a);
            }
            prev = theta;
        }
        Ok(target)
    };
    Ok((walk(0.0)?, walk(theta_max())?))
}

/// Sampled graph of `h_λ` over [`stable_valid_interval`].
pub fn stable_manifold_curve(lambda: Lambda, n: usize, exec: Execution) -> Result<Curve> {
    let (lo, hi) = stable_valid_interval(lambda)?;
    let grid = uniform_grid(lo, hi, n.max(2));
    let vals = par::map_slice(exec, &grid, |&t| h_lambda(t, lambda).map(|e| e.value));
    let mut pts = Vec::with_capacity(grid.len());
    for (theta, v) in grid.iter().zip(vals) {
        pts.push(ReducedPoint { s: v?, theta: *theta });
    }
    Curve::new(CurveKind::StableLocal, pts)
}

/// Sampled `S_∞` restricted to `σ > 0`.
pub fn s_infinity_curve(lambda: Lambda, n: usize) -> Result<Curve> {
    let mut pts = Vec::new();
    for theta in uniform_grid(0.0, theta_max(), n.max(2)) {
        let e = sigma_curve(theta, lambda)?;
        if e.exits {
            break;
        }
        pts.push(ReducedPoint { s: e.value, theta });
    }
    Curve::new(CurveKind::SInfinity, pts)
}

/// `S⁺ = {s + tanθ = 1}` for `θ ∈ [0, π/4)`.
pub fn singular_plus_curve(n: usize) -> Result<Curve> {
    let grid = uniform_grid(0.0, FRAC_PI_4, n.max(2));
    let grid = &grid[..grid.len() - 1];
    Curve::from_fn(CurveKind::SingularPlus, grid, |t| 1.0 - t.tan())
}

/// `S⁻ = {s = tan(θ/λ)}` for `θ ∈ (0, λπ/4)`.
pub fn singular_minus_curve(lambda: Lambda, n: usize) -> Result<Curve> {
    let grid = uniform_grid(0.0, lambda.value() * FRAC_PI_4, n.max(3));
    let grid = &grid[1..grid.len() - 1];
    Curve::from_fn(CurveKind::SingularMinus, grid, |t| (t / lambda.value()).tan())
}

/// Preimages `φ^{-k}(S⁺)` for `k = 1..=depth`, split into pieces on which
/// the inverse uses a single branch.
pub fn singular_preimages(lambda: Lambda, depth: usize, n: usize) -> Result<Vec<Curve>> {
    let base = singular_plus_curve(n)?;
    let mut layer: Vec<Vec<ReducedPoint>> = vec![base.points[1..].to_vec()];
    let mut out = Vec::new();
    for _ in 0..depth {
        let mut next = Vec::new();
        for piece in &layer {
            let mut current: Vec<ReducedPoint> = Vec::new();
            let mut branch = None;
            for p in piece {
                match reduced_inverse(*p, lambda) {
                    Ok(step) if step.image.validate().is_ok() => {
                        if branch.is_some() && branch != Some(step.branch) {
                            next.push(std::mem::take(&mut current));
                        }
                        branch = Some(step.branch);
                        current.push(step.image);
                    }
                    _ => {
                        if !current.is_empty() {
                            next.push(std::mem::take(&mut current));
                        }
                        branch = None;
                    }
                }
            }
            if !current.is_empty() {
                next.push(current);
            }
        }
        next.retain(|c| c.len() >= 2);
        for piece in &next {
            let mut pts = piece.clone();
            pts.sort_by(|a, b| a.theta.partial_cmp(&b.theta).unwrap());
            pts.dedup_by(|a, b| a.theta == b.theta);
            out.push(Curve::new(CurveKind::IterateOfSingular, pts)?);
        }
        layer = next;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnstableReport {
    pub segments: Vec<HorizontalSegment>,
    /// Pieces shorter than [`MIN_SEGMENT`] that were discarded.
    pub dropped: usize,
    pub depth: usize,
}

/// Image of `(s_lo, s_hi) × {θ}` under the reduced map, split at the corner
/// curve. Each returned piece is `(θ', s_lo', s_hi')`.
pub fn image_of_segment(seg: &HorizontalSegment, lambda: Lambda) -> Vec<HorizontalSegment> {
    let t = seg.theta.tan();
    let corner = 1.0 - t;
    let mut out = Vec::with_capacity(2);
    if seg.s_lo < corner {
        let hi = seg.s_hi.min(corner);
        out.push(HorizontalSegment {
            theta: lambda.value() * seg.theta,
            s_lo: seg.s_lo + t,
            s_hi: hi + t,
            depth: seg.depth + 1,
        });
    }
    if seg.s_hi > corner && seg.theta > 0.0 {
        let lo = seg.s_lo.max(corner);
        out.push(HorizontalSegment {
            theta: g_contract(seg.theta, lambda),
            s_lo: (1.0 - seg.s_hi) / t,
            s_hi: (1.0 - lo) / t,
            depth: seg.depth + 1,
        });
    }
    out
}

/// `W^u_loc(p_λ) = (0,1) × {θ_λ}` and its forward images up to `depth`
/// (clamped to [`MAX_DEPTH`]). Pieces contained in an already listed piece
/// at the same height are not repeated.
pub fn unstable_segments(lambda: Lambda, depth: usize) -> Result<UnstableReport> {
    lambda.require_contracting()?;
    let depth = depth.min(MAX_DEPTH);
    let root = HorizontalSegment { theta: lambda.fixed_angle(), s_lo: 0.0, s_hi: 1.0, depth: 0 };
    let mut all = vec![root];
    let mut frontier = vec![root];
    let mut dropped = 0;
    for _ in 0..depth {
        let mut next = Vec::new();
        for seg in &frontier {
            for img in image_of_segment(seg, lambda) {
                if img.length() < MIN_SEGMENT {
                    dropped += 1;
                    continue;
                }
                let covered = all.iter().any(|o| {
                    (o.theta - img.theta).abs() <= 1e-15 && o.s_lo <= img.s_lo && o.s_hi >= img.s_hi
                });
                if !covered {
                    all.push(img);
                    next.push(img);
                }
            }
        }
        frontier = next;
    }
    Ok(UnstableReport { segments: all, dropped, depth })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomoclinicReport {
    pub holds: bool,
    /// `h_λ(λθ_λ) - tanθ_λ`.
    pub margin_lower: f64,
    /// `1 - h_λ(λθ_λ)`.
    pub margin_upper: f64,
}

/// The first image of the unstable manifold crosses the stable graph iff
/// `tanθ_λ < h_λ(λθ_λ) < 1`.
pub fn homoclinic_test(lambda: Lambda) -> Result<HomoclinicReport> {
    let fixed = lambda.fixed_angle();
    let h = h_lambda(lambda.value() * fixed, lambda)?.value;
    let margin_lower = h - fixed.tan();
    let margin_upper = 1.0 - h;
    Ok(HomoclinicReport { holds: margin_lower > 0.0 && margin_upper > 0.0, margin_lower, margin_upper })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMembership {
    Interior,
    Boundary,
    Outside,
}

/// Position relative to the region bounded by the local stable graph and
/// the local unstable line: the two opposite wedges
/// `{(θ - θ_λ)(s - h_λ(θ)) ≤ 0}` that `f₂` swaps.
pub fn in_delta(p: ReducedPoint, lambda: Lambda) -> Result<DeltaMembership> {
    let dtheta = p.theta - lambda.fixed_angle();
    let ds = p.s - h_lambda(p.theta, lambda)?.value;
    let product = dtheta * ds;
    Ok(if product < 0.0 && dtheta.abs() > DELTA_MARGIN && ds.abs() > DELTA_MARGIN {
        DeltaMembership::Interior
    } else if product <= 0.0 || dtheta.abs() <= DELTA_MARGIN || ds.abs() <= DELTA_MARGIN {
        DeltaMembership::Boundary
    } else {
        DeltaMembership::Outside
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrappingReport {
    pub samples: usize,
    pub interior_images: usize,
    pub fraction: f64,
    /// Rejected draws while sampling the region.
    pub draws: usize,
}

/// Samples points of the region inside the first branch, applies `f₁` and
/// counts images that land in the interior of the region.
pub fn delta_trapping_check(lambda: Lambda, n_samples: usize, seed: u64) -> Result<TrappingReport> {
    lambda.require_contracting()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = 0;
    let mut inside = 0;
    let mut draws = 0;
    let cap = n_samples.saturating_mul(10_000).max(1);
    while samples < n_samples {
        draws += 1;
        if draws > cap {
            return Err(Error::InvalidArgument("trapping region has no area in the first branch".into()));
        }
        let theta = rng.random_range(0.0..FRAC_PI_4);
        let s = rng.random_range(0.0..1.0);
        if s <= 0.0 || s + theta.tan() >= 1.0 {
            continue;
        }
        let p = ReducedPoint { s, theta };
        if in_delta(p, lambda)? == DeltaMembership::Outside {
            continue;
        }
        samples += 1;
        let img = reduced_map(p, lambda)?;
        debug_assert_eq!(img.branch, RegionTag::ReducedM1);
        if in_delta(img.image, lambda)? == DeltaMembership::Interior {
            inside += 1;
        }
    }
    let fraction = if samples == 0 { 0.0 } else { inside as f64 / samples as f64 };
    Ok(TrappingReport { samples, interior_images: inside, fraction, draws })
}
