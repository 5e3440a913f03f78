use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;

use sqbilliard::linearization::{cocycle, cocycle_with_orbit, lyapunov, step_with_jacobian, StabilityKind};
use sqbilliard::maps::{full_distance, full_map, lifts, reduced_map};
use sqbilliard::periodic::{
    count_q, fixed_point_p, qn_theta, s_sum, solve_pn, solve_qn, OrbitOutcome, PeriodicOrbitRecord, SequenceBundle,
};
use sqbilliard::{FullPoint, Lambda, ReducedPoint};

fn lam(v: f64) -> Lambda {
    Lambda::new(v).unwrap()
}

fn existing(out: OrbitOutcome) -> Option<PeriodicOrbitRecord> {
    match out {
        OrbitOutcome::Exists(r) => Some(*r),
        OrbitOutcome::Absent(_) => None,
    }
}

#[test]
fn fixed_point_at_one_half() {
    let r = fixed_point_p(lam(0.5)).unwrap();
    let p = r.points[0];
    assert!((p.theta - PI / 6.0).abs() < 1e-15);
    assert!((p.s - 1.0 / (1.0 + 1.0 / 3f64.sqrt())).abs() < 1e-15);
    assert_eq!(r.itinerary, "2");
    assert_eq!(r.stability.kind, StabilityKind::Hyperbolic);
}

/// Newton on `φ(p) = p` inside the second branch from a grid of seeds.
/// Every converged seed must land on the known fixed point.
#[test]
fn fixed_point_is_the_only_one_found() {
    for l in [0.3, 0.5, 0.7, 0.9] {
        let lambda = lam(l);
        let known = fixed_point_p(lambda).unwrap().points[0];
        let mut converged = 0;
        for i in 1..20 {
            for j in 1..20 {
                let mut s = i as f64 / 20.0;
                let mut t = 1.5 * j as f64 / 20.0;
                for _ in 0..60 {
                    let Ok(step) = reduced_map(ReducedPoint { s, theta: t }, lambda) else { break };
                    if step.branch != sqbilliard::RegionTag::ReducedM2 {
                        break;
                    }
                    // residual and its Jacobian, written out for the second branch
                    let (fs, ft) = (step.image.s - s, step.image.theta - t);
                    let tan = t.tan();
                    let j11 = -1.0 / tan - 1.0;
                    let j12 = -(1.0 - s) / t.sin().powi(2);
                    let j22 = -l - 1.0;
                    let dt = -ft / j22;
                    let ds = -(fs + j12 * dt) / j11;
                    s += ds;
                    t += dt;
                    if !(s > 0.0 && s < 1.0 && t > 0.0 && t < FRAC_PI_2) {
                        break;
                    }
                    if ds.abs().max(dt.abs()) < 1e-15 {
                        break;
                    }
                }
                let end = ReducedPoint { s, theta: t };
                if let Ok(step) = reduced_map(end, lambda) {
                    if step.image.dist_max(&end) < 1e-12 {
                        converged += 1;
                        assert!(end.dist_max(&known) < 1e-10, "second fixed point {end:?} at {l}");
                    }
                }
            }
        }
        assert!(converged > 0);
    }
}

#[test]
fn sequence_bundle_starts() {
    let b = SequenceBundle::evaluate(0.4, lam(0.6), 0);
    assert_eq!(b.h, 1.0);
    assert_eq!(b.gamma, 1.0);
    assert_eq!(b.s_sum, 0.4f64.tan());
}

#[test]
fn q_family_geometry() {
    for l in [0.65, 0.7, 0.75] {
        let lambda = lam(l);
        let limit = PI * l * (1.0 - l) / 2.0;
        let mut last = f64::INFINITY;
        for n in 1..=30 {
            let t = qn_theta(n, lambda);
            assert!(t < last && t > limit);
            last = t;
            if let Some(r) = existing(solve_qn(n, lambda).unwrap()) {
                let (s, theta) = (r.points[0].s, r.points[0].theta);
                assert!(s > 1.0 - s_sum(theta, lambda, n as i64));
                assert!(s < 1.0 - s_sum(theta, lambda, n as i64 - 1));
                assert_eq!(r.period, n + 2);
                assert_eq!(r.itinerary, format!("{}22", "1".repeat(n)));
            }
        }
        assert!(last - limit < 1e-3);
    }
}

#[test]
fn between_c2_and_c1_only_q1_exists() {
    let lambda = lam(0.75);
    assert_eq!(count_q(lambda, 30).unwrap(), 1);
    assert!(existing(solve_qn(1, lambda).unwrap()).is_some());
    assert!(existing(solve_qn(1, lam(0.85)).unwrap()).is_none());
}

/// Smallest `j ≥ 1` with `Φ^j(p) = p`, up to `limit`.
fn full_period(p: FullPoint, lambda: Lambda, limit: usize) -> Option<usize> {
    let mut q = p;
    for j in 1..=limit {
        q = full_map(q, lambda).ok()?.image;
        if full_distance(&q, &p) < 1e-9 {
            return Some(j);
        }
    }
    None
}

#[test]
fn lifted_orbits_have_period_k_2k_4k_or_8k() {
    let mut checked = 0;
    for l in [0.5, 0.6, 0.7] {
        let lambda = lam(l);
        let mut records = vec![fixed_point_p(lambda).unwrap()];
        for n in 1..=4 {
            records.extend(existing(solve_qn(n, lambda).unwrap()));
            records.extend(existing(solve_pn(n, lambda).unwrap()));
        }
        for r in records {
            let k = r.period;
            for lift in lifts(r.points[0]) {
                let period = full_period(lift, lambda, 8 * k).expect("lift closes");
                assert!([k, 2 * k, 4 * k, 8 * k].contains(&period), "{} lifted to period {period}", r.family);
                checked += 1;
            }
        }
    }
    assert!(checked > 50);
}

#[test]
fn expanding_factor_matches_direct_product() {
    // along a full-map orbit, α_n cosθ_n / cosθ_0 = Π cosθ_i / cos(θ_i/λ)
    let l = 0.8;
    let lambda = lam(l);
    let p = FullPoint { s: 0.37, theta: 0.9 };
    let (j, orbit) = cocycle_with_orbit(p, lambda, 25).unwrap();
    let direct: f64 = orbit[1..].iter().map(|q| q.theta.cos() / (q.theta / l).cos()).product();
    let lhs = j.a11 * orbit[25].theta.cos() / orbit[0].theta.cos();
    assert!((lhs / direct - 1.0).abs() < 1e-12, "{lhs} vs {direct}");
}

#[test]
fn attractor_orbit_has_positive_exponent() {
    let lambda = lam(0.75);
    let mut p = ReducedPoint { s: 0.4, theta: 0.6 };
    for _ in 0..2000 {
        p = reduced_map(p, lambda).unwrap().image;
    }
    let est = lyapunov(p, lambda, 20_000).unwrap();
    assert!(est.upper > 0.0, "{est:?}");
    assert!((est.lower - 0.75f64.ln()).abs() < 1e-12);
}

fn clear(p: ReducedPoint, l: f64, n: usize) -> bool {
    let mut q = p;
    for _ in 0..n {
        if (q.s + q.theta.tan() - 1.0).abs() < 1e-6 || q.theta > 1.4 {
            return false;
        }
        match reduced_map(q, lam(l)) {
            Ok(step) => q = step.image,
            Err(_) => return false,
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn cocycle_splits(s in 0.01..0.99f64, theta in 0.0..1.4f64, l in 0.1..0.95f64, n in 0usize..6, m in 0usize..6) {
        let p = ReducedPoint { s, theta };
        prop_assume!(clear(p, l, n + m));
        let (head, orbit) = cocycle_with_orbit(p, lam(l), n).unwrap();
        let tail = cocycle(orbit[n], lam(l), m).unwrap();
        let whole = cocycle(p, lam(l), n + m).unwrap();
        let joined = tail.after(&head);
        for (a, b) in [(joined.a11, whole.a11), (joined.a12, whole.a12), (joined.a22, whole.a22)] {
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-300));
        }
        prop_assert_eq!(joined.negated, whole.negated);
    }

    #[test]
    fn collisions_off_the_parabolic_line_expand(s in 0.0..4.0f64, theta in -1.4..1.4f64, l in 0.1..0.95f64) {
        let p = FullPoint { s, theta };
        prop_assume!(theta.abs() > 1e-6 && p.frac() > 1e-6);
        let Ok((step, j)) = step_with_jacobian(p, lam(l)) else { return Ok(()) };
        // one regrouped factor: cosθ₁ / cos(θ₁/λ)
        let factor = j.a11 * step.image.theta.cos() / theta.cos();
        prop_assert!(factor > 1.0);
    }
}
