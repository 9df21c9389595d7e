use std::f64::consts::PI;

use greenlab::geometry::{distance, Domain};
use greenlab::green_bounds::{disk_green_exact, f_ratio, g_bound, interval_green};
use greenlab::levy_model::{potential_density, ProcessSpec};
use greenlab::mc_engine::{Estimate, SimScheme, Simulator};
use greenlab::verify_harness::{bound_scaling_defect, ks_two_sample};
use num_complex::Complex64;
use proptest::prelude::*;

fn disk_point() -> impl Strategy<Value = [f64; 2]> {
    (0.0..0.95f64, 0.0..(2.0 * PI)).prop_map(|(r, t)| [r * t.cos(), r * t.sin()])
}

fn ball3_point() -> impl Strategy<Value = Vec<f64>> {
    (0.0..0.95f64, -1.0..1.0f64, 0.0..(2.0 * PI)).prop_map(|(r, c, p)| {
        let s = (1.0 - c * c).sqrt();
        vec![r * s * p.cos(), r * s * p.sin(), r * c]
    })
}

/// Green function of Δ on the unit disk via the conformal map `z -> (z - w) / (1 - conj(w) z)`.
fn disk_green_conformal(x: [f64; 2], y: [f64; 2]) -> f64 {
    let z = Complex64::new(x[0], x[1]);
    let w = Complex64::new(y[0], y[1]);
    ((Complex64::new(1.0, 0.0) - w.conj() * z).norm() / (z - w).norm()).ln() / (2.0 * PI)
}

/// Sine-series Green function of `-d^2/dx^2` on `(0, len)`.
fn interval_green_series(len: f64, x: f64, y: f64, terms: usize) -> f64 {
    (1..=terms)
        .map(|k| {
            let w = k as f64 * PI / len;
            (w * x).sin() * (w * y).sin() / (w * w)
        })
        .sum::<f64>()
        * 2.0
        / len
}

proptest! {
    #[test]
    fn disk_green_matches_conformal_form(x in disk_point(), y in disk_point()) {
        prop_assume!(distance(&x, &y) > 1e-3);
        let exact = disk_green_exact(&x, &y).unwrap();
        let oracle = disk_green_conformal(x, y);
        prop_assert!((exact - oracle).abs() <= 1e-12 * oracle.abs().max(1.0), "{exact} {oracle}");
        prop_assert!(exact > 0.0);
    }

    #[test]
    fn interval_green_matches_sine_series(x in 0.05..1.95f64, y in 0.05..1.95f64) {
        let exact = interval_green(0.0, 2.0, x, y);
        let series = interval_green_series(2.0, x, y, 20_000);
        prop_assert!((exact - series).abs() < 1e-4, "{exact} {series}");
    }

    #[test]
    fn g_bound_is_symmetric_and_positive(
        x in ball3_point(),
        y in ball3_point(),
        a in 0.0..2.0f64,
        alpha in 0.2..1.95f64,
    ) {
        prop_assume!(distance(&x, &y) > 1e-6);
        let dom = Domain::ball(vec![0.0; 3], 1.0).unwrap();
        let spec = ProcessSpec::plain(3, alpha, a).unwrap();
        let gxy = g_bound(&spec, &dom, &x, &y).unwrap();
        let gyx = g_bound(&spec, &dom, &y, &x).unwrap();
        prop_assert!(gxy.value > 0.0 && gxy.value.is_finite());
        prop_assert!((gxy.value - gyx.value).abs() <= 1e-14 * gxy.value);
        prop_assert!(gxy.same_component);
    }

    #[test]
    fn disk_bound_is_log_of_f(x in disk_point(), y in disk_point()) {
        prop_assume!(distance(&x, &y) > 1e-6);
        let dom = Domain::unit_disk();
        let spec = ProcessSpec::plain(2, 1.0, 0.7).unwrap();
        let g = g_bound(&spec, &dom, &x, &y).unwrap().value;
        let f = f_ratio(&dom, &x, &y).unwrap();
        prop_assert!((g - f.ln_1p()).abs() <= 1e-14 * g.max(1e-300));
    }

    #[test]
    fn same_component_scaling_is_exact(
        x in disk_point(),
        y in disk_point(),
        lam in 0.25..4.0f64,
        a in 0.0..2.0f64,
    ) {
        let dom = Domain::unit_disk();
        prop_assume!(distance(&x, &y) > 1e-6);
        prop_assume!(dom.dist_to_boundary(&x).unwrap() > 1e-3 && dom.dist_to_boundary(&y).unwrap() > 1e-3);
        let spec = ProcessSpec::plain(2, 1.0, a).unwrap();
        let (err, same) = bound_scaling_defect(&spec, &dom, &x, &y, lam).unwrap();
        prop_assert!(same);
        prop_assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn scaled_domain_scales_distances(x in ball3_point(), lam in 0.1..10.0f64) {
        let dom = Domain::ball(vec![0.0; 3], 1.0).unwrap();
        let big = dom.scaled(lam).unwrap();
        let sx: Vec<f64> = x.iter().map(|v| v * lam).collect();
        let d0 = dom.dist_to_boundary(&x).unwrap();
        let d1 = big.dist_to_boundary(&sx).unwrap();
        prop_assert!((d1 - lam * d0).abs() <= 1e-12 * lam);
    }

    #[test]
    fn potential_density_is_a_decreasing_probability(a in 0.0..2.0f64, t in 1e-3..20.0f64, alpha in 0.3..1.9f64) {
        let spec = ProcessSpec::plain(1, alpha, a).unwrap();
        let u0 = potential_density(&spec, t).unwrap();
        let u1 = potential_density(&spec, t * 1.5).unwrap();
        prop_assert!(u0 > 0.0 && u0 <= 1.0 + 1e-12);
        prop_assert!(u1 <= u0 + 1e-12);
    }

    #[test]
    fn batch_estimate_is_the_pooled_mean(
        sums in prop::collection::vec(0.0..10.0f64, 2..50),
        per in 1u64..100,
    ) {
        let counts = vec![per; sums.len()];
        let e = Estimate::from_batches(&sums, &counts).unwrap();
        let pooled = sums.iter().sum::<f64>() / (per * sums.len() as u64) as f64;
        prop_assert!((e.mean - pooled).abs() <= 1e-12 * pooled.max(1.0));
        prop_assert!(e.std_error >= 0.0);
        prop_assert!(e.ci99[0] <= e.mean && e.mean <= e.ci99[1]);
        prop_assert!(e.overlaps(&e));
    }

    #[test]
    fn ks_statistic_is_a_sup_distance(v in prop::collection::vec(-5.0..5.0f64, 5..200), shift in 20.0..30.0f64) {
        let same = ks_two_sample(&v, &v).unwrap();
        prop_assert_eq!(same.statistic, 0.0);
        let moved: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let apart = ks_two_sample(&v, &moved).unwrap();
        prop_assert!((apart.statistic - 1.0).abs() < 1e-12);
        prop_assert!(apart.p_value <= same.p_value);
    }
}

#[test]
fn exit_times_do_not_depend_on_worker_count() {
    let spec = ProcessSpec::plain(2, 1.2, 0.8).unwrap();
    let dom = Domain::unit_disk();
    let scheme = SimScheme::default();
    let one = Simulator::new(&spec, &dom, &scheme).unwrap().with_workers(1);
    let four = Simulator::new(&spec, &dom, &scheme).unwrap().with_workers(4);
    let a = one.exit_times(&[0.3, -0.2], 500, 17).unwrap();
    let b = four.exit_times(&[0.3, -0.2], 500, 17).unwrap();
    assert_eq!(a, b);
    let c = four.exit_times(&[0.3, -0.2], 500, 18).unwrap();
    assert_ne!(a, c);
}

#[test]
fn brownian_exit_time_in_disk() {
    // E tau = (1 - |x|^2) / (2 d) for generator Δ on the unit ball
    let spec = ProcessSpec::plain(2, 1.0, 0.0).unwrap();
    let dom = Domain::unit_disk();
    let sim = Simulator::new(&spec, &dom, &SimScheme::default()).unwrap();
    let x = [0.5, 0.0];
    let e = sim.mean_exit_time(&x, 20_000, 5).unwrap();
    let exact = (1.0 - 0.25) / 4.0;
    assert!((e.mean - exact).abs() < 4.0 * e.std_error + 0.005 * exact, "{} +- {}", e.mean, e.std_error);
}
