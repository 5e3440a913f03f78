//! Bifurcation constants and basins of the parabolic line.
//!
//! - `λ₂` solves `h_λ(λθ_λ) = tanθ_λ`: below it the unstable line of `p_λ`
//!   crosses its stable graph.
//! - `λ₁` solves `σ(πλ(1-λ)/2) = 0`: the curve `S_∞` touches `s = 0` on the
//!   line the `q_n` accumulate on.
//! - `λ₀` is estimated from the basin dichotomy: below it almost every orbit
//!   falls into the parabolic line, above it an open set stays away.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::attractor::{sample_attractor, AttractorConfig};
use crate::error::{Error, Result};
use crate::manifolds::{g_contract, h_lambda, homoclinic_test, in_b_with_tan, sigma_curve, HorizontalSegment};
use crate::maps::{Lambda, TOL_SING};
use crate::par::{self, Execution};
use crate::periodic::{count_p, count_q, cn_threshold, qn_stable_point, solve_qn, PeriodicOrbitRecord};
use crate::roots::{brent, RootReport};

pub const LAMBDA2_BRACKET: (f64, f64) = (0.5, 0.99);
pub const LAMBDA1_BRACKET: (f64, f64) = (0.3, 0.9);

/// `F(λ) = h_λ(λθ_λ) - tanθ_λ`.
pub fn lambda2_function(l: f64) -> Result<f64> {
    let lambda = Lambda::new(l)?;
    let fixed = lambda.fixed_angle();
    Ok(h_lambda(l * fixed, lambda)?.value - fixed.tan())
}

/// `G(λ) = Σ_{i≥0} tan((π/2) λ^{i+1} (1-λ)) - 1`.
pub fn lambda1_function(l: f64) -> Result<f64> {
    let lambda = Lambda::new(l)?;
    Ok(-sigma_curve(FRAC_PI_2 * l * (1.0 - l), lambda)?.value)
}

pub fn solve_lambda2() -> Result<RootReport> {
    brent(lambda2_function, LAMBDA2_BRACKET.0, LAMBDA2_BRACKET.1, 1e-15)
}

pub fn solve_lambda1() -> Result<RootReport> {
    brent(lambda1_function, LAMBDA1_BRACKET.0, LAMBDA1_BRACKET.1, 1e-15)
}

/// Rectangular grid of cell centres, row-major with one row per θ value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_s: usize,
    pub n_theta: usize,
    pub s_min: f64,
    pub s_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl GridSpec {
    /// The whole reduced phase space.
    pub fn full(n_s: usize, n_theta: usize) -> Self {
        GridSpec { n_s, n_theta, s_min: 0.0, s_max: 1.0, theta_min: 0.0, theta_max: FRAC_PI_2 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_s < 2 || self.n_theta < 2 {
            return Err(Error::InvalidArgument("grid must be at least 2x2".into()));
        }
        let ok = 0.0 <= self.s_min
            && self.s_min < self.s_max
            && self.s_max <= 1.0
            && 0.0 <= self.theta_min
            && self.theta_min < self.theta_max
            && self.theta_max <= FRAC_PI_2;
        if !ok {
            return Err(Error::InvalidArgument("grid extent outside the phase space".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_s * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn s_at(&self, i: usize) -> f64 {
        self.s_min + (i as f64 + 0.5) * (self.s_max - self.s_min) / self.n_s as f64
    }

    pub fn theta_at(&self, j: usize) -> f64 {
        self.theta_min + (j as f64 + 0.5) * (self.theta_max - self.theta_min) / self.n_theta as f64
    }

    /// Cell centre of the flat index `k = j * n_s + i`.
    pub fn point(&self, k: usize) -> (f64, f64) {
        (self.s_at(k % self.n_s), self.theta_at(k / self.n_s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum BasinLabel {
    ToP = 0,
    Bounded = 1,
    Singular = 2,
}

impl BasinLabel {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(BasinLabel::ToP),
            1 => Some(BasinLabel::Bounded),
            2 => Some(BasinLabel::Singular),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BasinLabel::ToP => "to_p",
            BasinLabel::Bounded => "bounded",
            BasinLabel::Singular => "singular",
        }
    }
}

/// Outcome of following one orbit until it enters `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasinOrbit {
    pub label: BasinLabel,
    /// Iterate at which `B` was entered (`ToP`) or the orbit died
    /// (`Singular`); `n_iter` for bounded orbits.
    pub steps: u32,
}

/// Follows `(s, θ)` for up to `n_iter` steps. This is the reduced map
/// written out with `tanθ` shared between the membership test and the step.
#[inline]
pub fn follow_orbit(s: f64, theta: f64, lambda: Lambda, n_iter: u32) -> BasinOrbit {
    let l = lambda.value();
    let (mut s, mut theta) = (s, theta);
    for k in 0..=n_iter {
        let t = theta.tan();
        if in_b_with_tan(s, theta, t, lambda) {
            return BasinOrbit { label: BasinLabel::ToP, steps: k };
        }
        if k == n_iter {
            break;
        }
        let u = s + t;
        if s <= TOL_SING || 1.0 - s <= TOL_SING || (u - 1.0).abs() <= TOL_SING {
            return BasinOrbit { label: BasinLabel::Singular, steps: k };
        }
        if u < 1.0 {
            s = u;
            theta *= l;
        } else {
            s = (1.0 - s) / t;
            theta = l * (FRAC_PI_2 - theta);
        }
    }
    BasinOrbit { label: BasinLabel::Bounded, steps: n_iter }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinReport {
    pub lambda: f64,
    pub grid: GridSpec,
    pub n_iter: u32,
    /// Row-major labels, one row per θ value.
    pub labels: Vec<BasinLabel>,
    /// Entry iterate into `B` for `ToP` cells, otherwise the step count.
    pub steps: Vec<u32>,
    pub count_to_p: usize,
    pub count_bounded: usize,
    pub count_singular: usize,
    /// `histogram[0]` counts entries at iterate 0; `histogram[k]` entries in
    /// `[2^{k-1}, 2^k)`.
    pub histogram: Vec<u64>,
}

impl BasinReport {
    fn fraction(&self, count: usize) -> f64 {
        count as f64 / self.labels.len() as f64
    }

    pub fn fraction_to_p(&self) -> f64 {
        self.fraction(self.count_to_p)
    }

    pub fn fraction_bounded(&self) -> f64 {
        self.fraction(self.count_bounded)
    }

    pub fn fraction_singular(&self) -> f64 {
        self.fraction(self.count_singular)
    }

    /// Cells that reached `B` at iterate `k` or later.
    pub fn entries_from(&self, k: u32) -> usize {
        self.labels.iter().zip(&self.steps).filter(|(l, s)| **l == BasinLabel::ToP && **s >= k).count()
    }

    /// Largest entry iterate among cells that reached `B`.
    pub fn max_entry(&self) -> Option<u32> {
        self.labels
            .iter()
            .zip(&self.steps)
            .filter(|(l, _)| **l == BasinLabel::ToP)
            .map(|(_, s)| *s)
            .max()
    }
}

fn log2_bin(steps: u32) -> usize {
    if steps == 0 {
        0
    } else {
        32 - steps.leading_zeros() as usize
    }
}

/// Classifies every grid cell by the fate of its orbit.
pub fn basin_of_p(lambda: Lambda, grid: GridSpec, n_iter: u32, exec: Execution) -> Result<BasinReport> {
    lambda.require_contracting()?;
    grid.validate()?;
    if n_iter == 0 {
        return Err(Error::InvalidArgument("n_iter must be positive".into()));
    }
    let orbits = par::map_indexed(exec, grid.len(), |k| {
        let (s, theta) = grid.point(k);
        follow_orbit(s, theta, lambda, n_iter)
    });
    let mut histogram = vec![0u64; 33];
    let (mut to_p, mut bounded, mut singular) = (0, 0, 0);
    for o in &orbits {
        match o.label {
            BasinLabel::ToP => {
                to_p += 1;
                histogram[log2_bin(o.steps)] += 1;
            }
            BasinLabel::Bounded => bounded += 1,
            BasinLabel::Singular => singular += 1,
        }
    }
    let used = histogram.iter().rposition(|&c| c > 0).map_or(1, |i| i + 1);
    histogram.truncate(used);
    Ok(BasinReport {
        lambda: lambda.value(),
        grid,
        n_iter,
        labels: orbits.iter().map(|o| o.label).collect(),
        steps: orbits.iter().map(|o| o.steps).collect(),
        count_to_p: to_p,
        count_bounded: bounded,
        count_singular: singular,
        histogram,
    })
}

/// Settings of the basin dichotomy used to bracket `λ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lambda0Config {
    pub bracket: (f64, f64),
    pub grid: GridSpec,
    pub n_iter: u32,
    /// The predicate is `fraction(Bounded) > threshold`.
    pub threshold: f64,
    pub width: f64,
    /// Also require that no grid orbit enters `B` after the first tenth of
    /// the budget. A leaking bounded set is a long transient, not an
    /// attractor, and without this check the bracket tracks the transient
    /// lifetime instead of the onset of the attractor.
    pub leak_check: bool,
}

impl Default for Lambda0Config {
    fn default() -> Self {
        Lambda0Config {
            bracket: (0.55, 0.62),
            grid: GridSpec::full(400, 400),
            n_iter: 10_000,
            threshold: 1e-3,
            width: 1e-3,
            leak_check: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lambda0Probe {
    pub lambda: f64,
    pub fraction_bounded: f64,
    /// Entries into `B` after the first tenth of the budget.
    pub late_entries: usize,
    pub attractor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lambda0Estimate {
    pub low: f64,
    pub high: f64,
    /// Every probe that was evaluated, in evaluation order.
    pub probes: Vec<Lambda0Probe>,
    /// True when the bracket had to be enlarged because the predicate did
    /// not change sign across it.
    pub widened: bool,
    /// False when the probes, sorted by λ, do not switch from false to true
    /// exactly once.
    pub monotone: bool,
}

impl Lambda0Estimate {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.low + self.high)
    }
}

/// The attractor predicate at one λ.
pub fn lambda0_probe(lambda: Lambda, cfg: &Lambda0Config, exec: Execution) -> Result<Lambda0Probe> {
    let rep = basin_of_p(lambda, cfg.grid, cfg.n_iter, exec)?;
    let fraction_bounded = rep.fraction_bounded();
    let late_entries = rep.entries_from((cfg.n_iter / 10).max(1));
    let attractor = fraction_bounded > cfg.threshold && (!cfg.leak_check || late_entries == 0);
    Ok(Lambda0Probe { lambda: lambda.value(), fraction_bounded, late_entries, attractor })
}

/// Bisects on the attractor predicate down to the configured width.
pub fn estimate_lambda0(cfg: &Lambda0Config, exec: Execution) -> Result<Lambda0Estimate> {
    let mut probes = Vec::new();
    let mut pred = |l: f64| -> Result<bool> {
        let p = lambda0_probe(Lambda::new(l)?, cfg, exec)?;
        probes.push(p);
        Ok(p.attractor)
    };
    let (mut lo, mut hi) = cfg.bracket;
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(Error::InvalidArgument("lambda0 bracket must satisfy 0 < lo < hi < 1".into()));
    }
    let mut widened = false;
    let step = hi - lo;
    let mut tries = 0;
    while pred(lo)? {
        widened = true;
        tries += 1;
        lo -= step;
        if lo <= 0.0 || tries > 8 {
            return Err(Error::NotBracketed { lo: lo.max(0.0), hi, f_lo: 1.0, f_hi: 1.0 });
        }
    }
    tries = 0;
    while !pred(hi)? {
        widened = true;
        tries += 1;
        hi += step;
        if hi >= 1.0 || tries > 8 {
            return Err(Error::NotBracketed { lo, hi: hi.min(1.0), f_lo: 0.0, f_hi: 0.0 });
        }
    }
    while hi - lo > cfg.width {
        let mid = 0.5 * (lo + hi);
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut sorted = probes.clone();
    sorted.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let flags: Vec<bool> = sorted.iter().map(|p| p.attractor).collect();
    let switches = flags.windows(2).filter(|w| w[0] != w[1]).count();
    let monotone = switches <= 1 && flags.first() != Some(&true);
    Ok(Lambda0Estimate { low: lo, high: hi, probes, widened, monotone })
}

/// Image of a horizontal segment under one named branch, or `None` if the
/// segment has no part in that branch.
fn branch_image(seg: HorizontalSegment, digit: char, lambda: Lambda) -> Option<HorizontalSegment> {
    let t = seg.theta.tan();
    let corner = 1.0 - t;
    let depth = seg.depth + 1;
    match digit {
        '1' if seg.s_lo < corner => {
            let hi = seg.s_hi.min(corner);
            Some(HorizontalSegment { theta: lambda.value() * seg.theta, s_lo: seg.s_lo + t, s_hi: hi + t, depth })
        }
        '2' if seg.s_hi > corner => {
            let lo = seg.s_lo.max(corner);
            Some(HorizontalSegment {
                theta: g_contract(seg.theta, lambda),
                s_lo: (1.0 - seg.s_hi) / t,
                s_hi: (1.0 - lo) / t,
                depth,
            })
        }
        _ => None,
    }
}

/// Local unstable segment of a periodic cycle at the height of its first
/// point: the image, after one period, of the part of `(0,1)` that follows
/// the itinerary. Every point of it has a backward orbit that follows the
/// itinerary forever and converges to the cycle.
pub fn cycle_unstable_segment(record: &PeriodicOrbitRecord, lambda: Lambda) -> Option<HorizontalSegment> {
    let theta = record.points[0].theta;
    let mut seg = HorizontalSegment { theta, s_lo: 0.0, s_hi: 1.0, depth: 0 };
    for digit in record.itinerary.chars() {
        seg = branch_image(seg, digit, lambda)?;
    }
    Some(HorizontalSegment { theta, ..seg })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeteroclinicReport {
    pub lambda: f64,
    pub n: usize,
    pub m: usize,
    pub unstable: HorizontalSegment,
    /// `σ(θ_n)`.
    pub sigma: f64,
    /// The unstable segment of `q_n` reaches into `B`.
    pub meets_b: bool,
    /// Value of the stable graph of `q_m` at `θ_n`, when it could be
    /// evaluated and verified.
    pub stable_s: Option<f64>,
    /// The unstable segment of `q_n` crosses the local stable graph of `q_m`.
    pub crosses_stable: bool,
}

/// Tests `W^u(q_n)` against `B` and against the local stable graph of `q_m`.
pub fn heteroclinic_probe(lambda: Lambda, n: usize, m: usize) -> Result<HeteroclinicReport> {
    let qn = solve_qn(n, lambda)?;
    let qn = qn.record().ok_or_else(|| Error::MissingOrbit(format!("q{n}")))?;
    if !solve_qn(m, lambda)?.exists() {
        return Err(Error::MissingOrbit(format!("q{m}")));
    }
    let unstable = cycle_unstable_segment(qn, lambda)
        .ok_or_else(|| Error::Unverified(f64::NAN))?;
    let theta = unstable.theta;
    let sig = sigma_curve(theta, lambda)?;
    let meets_b = !sig.exits && unstable.s_lo < sig.value;
    let stable_s = if m == 0 {
        h_lambda(theta, lambda).ok().map(|e| e.value)
    } else {
        qn_stable_point(m, lambda, theta).ok().map(|(p, _, _)| p.s)
    };
    let crosses_stable = stable_s.is_some_and(|s| unstable.s_lo < s && s < unstable.s_hi);
    Ok(HeteroclinicReport { lambda: lambda.value(), n, m, unstable, sigma: sig.value, meets_b, stable_s, crosses_stable })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "below_l0")]
    BelowL0,
    #[serde(rename = "l0_to_l1")]
    L0toL1,
    #[serde(rename = "l1_to_l2")]
    L1toL2,
    #[serde(rename = "above_l2")]
    AboveL2,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::BelowL0 => "below_l0",
            Regime::L0toL1 => "l0_to_l1",
            Regime::L1toL2 => "l1_to_l2",
            Regime::AboveL2 => "above_l2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    /// Within `1e-6` of one of the thresholds.
    pub boundary: bool,
}

/// Threshold values used for classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

pub fn regime_classify(lambda: Lambda, th: &Thresholds) -> RegimeReport {
    let l = lambda.value();
    let regime = if l < th.lambda0 {
        Regime::BelowL0
    } else if l < th.lambda1 {
        Regime::L0toL1
    } else if l < th.lambda2 {
        Regime::L1toL2
    } else {
        Regime::AboveL2
    };
    let boundary = [th.lambda0, th.lambda1, th.lambda2].iter().any(|t| (l - t).abs() <= 1e-6);
    RegimeReport { regime, boundary }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CnEntry {
    pub n: usize,
    pub value: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationConstants {
    pub lambda0: Option<Lambda0Estimate>,
    pub lambda1: RootReport,
    pub lambda2: RootReport,
    pub cn: Vec<CnEntry>,
}

/// `c_1 … c_{n_max}`, each solved independently; failures are recorded per
/// entry.
pub fn cn_table(n_max: usize, exec: Execution) -> Vec<CnEntry> {
    par::map_indexed(exec, n_max, |i| {
        let n = i + 1;
        match cn_threshold(n) {
            Ok(r) => CnEntry { n, value: Some(r.root), iterations: r.iterations, residual: r.residual, error: None },
            Err(e) => CnEntry { n, value: None, iterations: 0, residual: f64::NAN, error: Some(e.to_string()) },
        }
    })
}

/// Everything except `λ₀`, which is costly and is attached by the caller.
pub fn compute_constants(n_max: usize, exec: Execution) -> Result<BifurcationConstants> {
    Ok(BifurcationConstants {
        lambda0: None,
        lambda1: solve_lambda1()?,
        lambda2: solve_lambda2()?,
        cn: cn_table(n_max, exec),
    })
}

/// Settings for one row of a λ-scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub grid: GridSpec,
    pub n_iter: u32,
    pub n_max: usize,
    pub attractor: AttractorConfig,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            grid: GridSpec::full(100, 100),
            n_iter: 2000,
            n_max: 20,
            attractor: AttractorConfig { n_initial: 100, n_iter: 2000, transient: 500, ..AttractorConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub lambda: f64,
    pub regime: Regime,
    pub fraction_to_p: f64,
    pub attractor_nonempty: bool,
    pub homoclinic: bool,
    pub q_count: usize,
    pub p_count: usize,
}

/// One row of a λ-scan. Work inside a row is sequential; callers
/// parallelise over rows.
pub fn scan_lambda(lambda: Lambda, th: &Thresholds, cfg: &ScanConfig) -> Result<ScanRow> {
    let basin = basin_of_p(lambda, cfg.grid, cfg.n_iter, Execution::Sequential)?;
    let sample = sample_attractor(lambda, &cfg.attractor, Execution::Sequential)?;
    Ok(ScanRow {
        lambda: lambda.value(),
        regime: regime_classify(lambda, th).regime,
        fraction_to_p: basin.fraction_to_p(),
        attractor_nonempty: !sample.is_near_empty(),
        homoclinic: homoclinic_test(lambda)?.holds,
        q_count: count_q(lambda, cfg.n_max)?,
        p_count: count_p(lambda, cfg.n_max)?,
    })
}
