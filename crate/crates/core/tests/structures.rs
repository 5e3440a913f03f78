use proptest::prelude::*;

use sqbilliard::attractor::{sample_attractor, AttractorConfig};
use sqbilliard::bifurcation::{basin_of_p, cn_table, solve_lambda1, solve_lambda2, GridSpec};
use sqbilliard::export::{read_raster, write_raster, Raster};
use sqbilliard::manifolds::{
    g_contract, g_iterate, h_lambda, h_partial, homoclinic_test, in_b, sigma_curve, stable_valid_interval,
};
use sqbilliard::maps::reduced_map;
use sqbilliard::{Execution, Lambda, ReducedPoint};

fn lam(v: f64) -> Lambda {
    Lambda::new(v).unwrap()
}

#[test]
fn affine_angle_map_closed_form() {
    for l in [0.2, 0.6, 0.95] {
        let lambda = lam(l);
        let mut x = 0.3;
        for k in 1..=50 {
            x = g_contract(x, lambda);
            assert!((g_iterate(0.3, lambda, k) - x).abs() < 1e-14);
        }
    }
}

#[test]
fn stable_graph_passes_through_fixed_point() {
    for k in 1..50 {
        let lambda = lam(k as f64 / 50.0);
        let t = lambda.fixed_angle();
        let h = h_lambda(t, lambda).unwrap();
        assert!((h.value - 1.0 / (1.0 + t.tan())).abs() < 1e-13);
        assert!(h.tail_bound < 1e-13);
        // long partial sums agree with the series
        assert!((h_partial(t, lambda, 5000) - h.value).abs() < 1e-12);
    }
}

#[test]
fn stable_graph_decreases() {
    for l in [0.4, 0.6218, 0.8] {
        let lambda = lam(l);
        let (lo, hi) = stable_valid_interval(lambda).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..500 {
            let v = h_lambda(lo + (hi - lo) * k as f64 / 499.0, lambda).unwrap().value;
            assert!(v < last);
            last = v;
        }
    }
}

#[test]
fn homoclinic_margins() {
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let lambda = lam(k as f64 / 200.0);
        let r = homoclinic_test(lambda).unwrap();
        // the upper inequality never fails
        assert!(r.margin_upper > 0.0);
        assert!(r.margin_lower < last);
        last = r.margin_lower;
    }
    assert!(homoclinic_test(lam(0.5)).unwrap().holds);
    assert!(!homoclinic_test(lam(0.9)).unwrap().holds);
}

#[test]
fn bifurcation_constants_are_ordered() {
    let l1 = solve_lambda1().unwrap();
    let l2 = solve_lambda2().unwrap();
    assert!(l1.residual < 1e-10 && l2.residual < 1e-10);
    let table = cn_table(25, Execution::Parallel);
    let c1 = table[0].value.unwrap();
    for e in &table {
        let c = e.value.unwrap();
        assert!(l1.root < c && c <= c1 && c < l2.root);
    }
}

#[test]
fn basin_fractions_partition_the_grid() {
    for l in [0.5, 0.7] {
        let r = basin_of_p(lam(l), GridSpec::full(40, 30), 1000, Execution::Parallel).unwrap();
        let total = r.fraction_to_p() + r.fraction_bounded() + r.fraction_singular();
        assert!((total - 1.0).abs() < 1e-15);
        let seq = basin_of_p(lam(l), GridSpec::full(40, 30), 1000, Execution::Sequential).unwrap();
        assert_eq!(r, seq);
    }
}

#[test]
fn attractor_points_avoid_the_capture_region() {
    let cfg = AttractorConfig { n_initial: 60, n_iter: 3000, transient: 1000, stride: 7, seed: 3 };
    for l in [0.7, 0.9] {
        let a = sample_attractor(lam(l), &cfg, Execution::Parallel).unwrap();
        let b = sample_attractor(lam(l), &cfg, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert!(!a.points.is_empty());
        assert!(a.points.iter().all(|p| !in_b(*p, lam(l)) && p.s > 0.0 && p.s < 1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn stable_graph_is_fixed_by_graph_transform(l in 0.05..0.99f64, u in 0.0..1.0f64) {
        let lambda = lam(l);
        let (lo, hi) = stable_valid_interval(lambda).unwrap();
        let theta = lo + (hi - lo) * u;
        let h = h_lambda(theta, lambda).unwrap().value;
        let inner = h_lambda(g_contract(theta, lambda), lambda).unwrap().value;
        prop_assert!((1.0 - inner * theta.tan() - h).abs() < 1e-10);
    }

    #[test]
    fn image_of_fixed_angle_lies_in_stable_strip(l in 0.01..0.99f64) {
        let lambda = lam(l);
        let v = h_lambda(l * lambda.fixed_angle(), lambda).unwrap().value;
        prop_assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn capture_boundary_shifts_by_one_tangent(theta in 0.0..1.2f64, l in 0.05..0.95f64) {
        let lambda = lam(l);
        let here = sigma_curve(theta, lambda).unwrap().value;
        let next = sigma_curve(l * theta, lambda).unwrap().value;
        prop_assert!((here - (next - theta.tan())).abs() < 1e-12);
    }

    #[test]
    fn capture_boundary_is_forward_invariant(theta in 0.0..1.2f64, l in 0.05..0.95f64) {
        let lambda = lam(l);
        let s = sigma_curve(theta, lambda).unwrap().value;
        prop_assume!(s > 1e-9 && s < 1.0);
        let img = reduced_map(ReducedPoint { s, theta }, lambda).unwrap().image;
        let on_curve = sigma_curve(img.theta, lambda).unwrap().value;
        prop_assert!((img.s - on_curve).abs() < 1e-10);
    }

    #[test]
    fn raster_round_trips(n_s in 1u32..20, n_theta in 1u32..20, l in 0.01..0.99f64, seed in any::<u64>()) {
        let labels = (0..n_s * n_theta).map(|k| ((seed >> (k % 64)) & 3) as u8 % 3).collect();
        let raster = Raster { n_s, n_theta, lambda: l, extent: [0.0, 1.0, 0.1, 1.5], labels };
        let mut bytes = Vec::new();
        write_raster(&mut bytes, &raster).unwrap();
        let back = read_raster(&mut bytes.as_slice()).unwrap();
        prop_assert_eq!(back, raster);
    }
}
