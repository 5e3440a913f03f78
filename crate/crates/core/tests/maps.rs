use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sqbilliard::maps::{
    classify_reduced, conjugacy_check, full_distance, full_inverse, full_map, project, reduced_inverse, reduced_map,
};
use sqbilliard::{FullPoint, Lambda, ReducedPoint, RegionTag};

type V = [f64; 2];

/// Start corner, unit tangent and inward normal of each side of the unit
/// square, walked counter-clockwise from the origin.
fn side_frame(k: usize) -> (V, V, V) {
    match k {
        0 => ([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]),
        1 => ([1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]),
        2 => ([1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]),
        _ => ([0.0, 1.0], [0.0, -1.0], [1.0, 0.0]),
    }
}

fn dot(a: V, b: V) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Position and unit velocity in the plane for a perimeter point.
fn to_plane(s: f64, theta: f64) -> (V, V, usize) {
    let k = s.floor() as usize;
    let (o, t, n) = side_frame(k);
    let x = s - k as f64;
    let pos = [o[0] + x * t[0], o[1] + x * t[1]];
    let vel = [theta.cos() * n[0] + theta.sin() * t[0], theta.cos() * n[1] + theta.sin() * t[1]];
    (pos, vel, k)
}

/// First wall hit by the ray from `pos` along `vel`, leaving side `from`:
/// (side, point, distance).
fn cast(pos: V, vel: V, from: usize) -> (usize, V, f64) {
    let mut best = (usize::MAX, [0.0; 2], f64::INFINITY);
    for k in 0..4 {
        if k == from {
            continue;
        }
        let (o, _, n) = side_frame(k);
        let speed = dot(vel, n);
        if speed >= 0.0 {
            continue;
        }
        let d = dot([o[0] - pos[0], o[1] - pos[1]], n) / speed;
        if d > 0.0 && d < best.2 {
            best = (k, [pos[0] + d * vel[0], pos[1] + d * vel[1]], d);
        }
    }
    best
}

/// One collision of the contracting billiard traced in the plane.
fn ray_trace(p: FullPoint, lambda: f64) -> (FullPoint, f64) {
    let (pos, vel, k0) = to_plane(p.s, p.theta);
    let (k, hit, dist) = cast(pos, vel, k0);
    let (o, t, n) = side_frame(k);
    // specular reflection flips the normal component
    let out = [vel[0] - 2.0 * dot(vel, n) * n[0], vel[1] - 2.0 * dot(vel, n) * n[1]];
    let theta = dot(out, t).atan2(dot(out, n));
    let x = dot([hit[0] - o[0], hit[1] - o[1]], t);
    (FullPoint { s: k as f64 + x, theta: lambda * theta }, dist)
}

/// The preimage traced backwards: undo the contraction and the reflection,
/// then follow the incoming ray back to the wall it came from.
fn ray_trace_back(p: FullPoint, lambda: f64) -> FullPoint {
    let (pos, out, k) = to_plane(p.s, p.theta / lambda);
    let (_, _, n) = side_frame(k);
    let incoming = [out[0] - 2.0 * dot(out, n) * n[0], out[1] - 2.0 * dot(out, n) * n[1]];
    let (j, hit, _) = cast(pos, [-incoming[0], -incoming[1]], k);
    let (o, t, nj) = side_frame(j);
    let theta = dot(incoming, t).atan2(dot(incoming, nj));
    FullPoint { s: j as f64 + dot([hit[0] - o[0], hit[1] - o[1]], t), theta }
}

fn lam(v: f64) -> Lambda {
    Lambda::new(v).unwrap()
}

fn random_full(rng: &mut ChaCha8Rng) -> FullPoint {
    FullPoint { s: rng.random_range(0.0..4.0), theta: rng.random_range(-1.5..1.5) }
}

/// Away from corners and from rays that end in a corner.
fn well_inside(p: FullPoint) -> bool {
    let x = p.frac();
    let t = p.theta.tan();
    x > 1e-6 && x < 1.0 - 1e-6 && (x + t - 1.0).abs() > 1e-6 && (x + t).abs() > 1e-6
}

#[test]
fn full_map_matches_ray_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let l = 0.7;
    let mut n = 0;
    while n < 10_000 {
        let p = random_full(&mut rng);
        if !well_inside(p) {
            continue;
        }
        let step = full_map(p, lam(l)).unwrap();
        let (want, dist) = ray_trace(p, l);
        assert!(full_distance(&step.image, &want) < 1e-9, "{p:?}: {:?} vs {want:?}", step.image);
        assert!((step.flight_length - dist).abs() < 1e-9 * dist.max(1.0));
        n += 1;
    }
}

#[test]
fn full_inverse_matches_backward_ray_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    let l = 0.55;
    let mut n = 0;
    while n < 10_000 {
        let p = random_full(&mut rng);
        // images of the map carry angles below λπ/2
        let q = FullPoint { s: p.s, theta: p.theta * l };
        let unscaled = FullPoint { s: q.s, theta: q.theta / l };
        if !well_inside(unscaled) {
            continue;
        }
        let Ok(back) = full_inverse(q, lam(l)) else { continue };
        let want = ray_trace_back(q, l);
        assert!(full_distance(&back.image, &want) < 1e-9, "{q:?}: {:?} vs {want:?}", back.image);
        n += 1;
    }
}

#[test]
fn worked_examples() {
    let l = lam(0.5);
    // tan 1.2 is about 2.57, so the ray reaches the next side
    let step = full_map(FullPoint { s: 0.2, theta: 1.2 }, l).unwrap();
    assert_eq!(step.branch, RegionTag::FullM1);
    let step = full_map(FullPoint { s: 0.5, theta: 0.0 }, l).unwrap();
    assert_eq!(step.branch, RegionTag::FullM2);
    assert!((step.image.s - 2.5).abs() < 1e-15 && step.image.theta == 0.0);
    assert!(reduced_inverse(ReducedPoint { s: 0.5, theta: 0.5 * FRAC_PI_2 + 1e-3 }, l).is_err());
}

fn full_point() -> impl Strategy<Value = FullPoint> {
    (0.0..4.0f64, -1.5..1.5f64).prop_map(|(s, theta)| FullPoint { s, theta })
}

fn reduced_point() -> impl Strategy<Value = ReducedPoint> {
    (1e-6..1.0 - 1e-6f64, 0.0..1.5f64).prop_map(|(s, theta)| ReducedPoint { s, theta })
}

fn contraction() -> impl Strategy<Value = f64> {
    0.05..0.99f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn projection_commutes_with_the_maps(p in full_point(), l in contraction()) {
        prop_assume!(well_inside(p));
        let (Ok(full), Ok(base)) = (full_map(p, lam(l)), project(p)) else { return Ok(()) };
        let Ok(red) = reduced_map(base, lam(l)) else { return Ok(()) };
        let Ok(down) = project(full.image) else { return Ok(()) };
        prop_assert!(down.dist_max(&red.image) < 1e-12);
    }

    #[test]
    fn full_map_is_reversible(p in full_point(), l in contraction()) {
        prop_assume!(well_inside(p));
        let img = full_map(p, lam(l)).unwrap().image;
        let back = full_inverse(img, lam(l)).unwrap().image;
        prop_assert!(full_distance(&back, &p) < 1e-12 * (1.0 + p.theta.tan().abs()), "{:?} -> {:?}", p, back);
    }

    #[test]
    fn reduced_map_is_reversible(p in reduced_point(), l in contraction()) {
        prop_assume!((p.s + p.theta.tan() - 1.0).abs() > 1e-6);
        let Ok(img) = reduced_map(p, lam(l)) else { return Ok(()) };
        let back = reduced_inverse(img.image, lam(l)).unwrap().image;
        prop_assert!(back.dist_max(&p) < 1e-12 * (1.0 + p.theta.tan().abs()));
    }

    #[test]
    fn image_angle_depends_on_angle_and_branch(s1 in 1e-6..1.0f64, s2 in 1e-6..1.0f64, theta in 0.0..1.5f64, l in contraction()) {
        let a = ReducedPoint { s: s1, theta };
        let b = ReducedPoint { s: s2, theta };
        let (Ok(fa), Ok(fb)) = (reduced_map(a, lam(l)), reduced_map(b, lam(l))) else { return Ok(()) };
        if fa.branch == fb.branch {
            prop_assert_eq!(fa.image.theta, fb.image.theta);
        }
    }

    #[test]
    fn image_angles_stay_below_contracted_bound(p in full_point(), l in contraction()) {
        prop_assume!(well_inside(p));
        let full = full_map(p, lam(l)).unwrap().image;
        prop_assert!(full.theta.abs() < l * FRAC_PI_2);
        if let Ok(r) = project(p) {
            if let Ok(step) = reduced_map(r, lam(l)) {
                prop_assert!(step.image.theta >= 0.0 && step.image.theta < l * FRAC_PI_2);
            }
        }
    }

    #[test]
    fn exactly_one_branch(p in reduced_point()) {
        let tag = classify_reduced(p);
        let below = p.s + p.theta.tan() < 1.0;
        match tag {
            Ok(RegionTag::ReducedM1) => prop_assert!(below),
            Ok(RegionTag::ReducedM2) => prop_assert!(!below),
            Ok(other) => prop_assert!(other.is_singular()),
            Err(_) => {}
        }
    }

    #[test]
    fn expanding_law_is_conjugate(p in full_point(), l in 0.3..0.95f64) {
        prop_assume!(well_inside(p));
        if let Ok(d) = conjugacy_check(p, lam(l)) {
            prop_assert!(d < 1e-10);
        }
    }
}
