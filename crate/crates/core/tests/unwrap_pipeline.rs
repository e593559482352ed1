use std::f64::consts::PI;

use hrtf_graph::hrir::{Direction, EarSelector};
use hrtf_graph::hull::convex_hull_graph;
use hrtf_graph::synth::{fibonacci_grid, rigid_sphere_set, woodworth_delay_s, RigidSphere};
use hrtf_graph::toa::{estimate_toa, ToaConfig};
use hrtf_graph::unwrap::{prealign_shifts, unwrap_frequency, unwrap_joint, unwrap_spherical_sim, wrap, PhaseField};

fn delay_field(dirs: &[Direction], radius_m: f64, offset: f64, fft_size: usize) -> (Vec<Vec<f64>>, PhaseField) {
    let ear = Direction::new([0.0, 1.0, 0.0]).unwrap();
    let bins = fft_size / 2 + 1;
    let truth: Vec<Vec<f64>> = dirs
        .iter()
        .map(|d| {
            let tau = offset + 44_100.0 * woodworth_delay_s(d, &ear, radius_m, 343.0);
            (0..bins).map(|f| -2.0 * PI * f as f64 * tau / fft_size as f64).collect()
        })
        .collect();
    let field = PhaseField::new(
        truth.iter().map(|r| r.iter().map(|&x| wrap(x)).collect()).collect(),
        (0..bins).map(|f| f as f64 * 44_100.0 / fft_size as f64).collect(),
        fft_size,
    )
    .unwrap();
    (truth, field)
}

fn max_error_up_to_global_cycle(truth: &[Vec<f64>], phase: &[Vec<f64>]) -> f64 {
    let k = ((phase[0][1] - truth[0][1]) / (2.0 * PI)).round();
    truth
        .iter()
        .zip(phase)
        .flat_map(|(t, p)| t.iter().zip(p).skip(1).map(move |(a, b)| (b - 2.0 * PI * k - a).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn joint_unwrap_is_exact_under_itoh() {
    let dirs = fibonacci_grid(150);
    let hull = convex_hull_graph(&dirs).unwrap();
    let (truth, field) = delay_field(&dirs, 0.01, 6.0, 32);
    let u = unwrap_joint(&field, &hull, None).unwrap();
    assert_eq!(u.sum_abs_k, 0);
    assert!(max_error_up_to_global_cycle(&truth, &u.phase) <= 1e-6);
    for (p, w) in u.phase.iter().flatten().zip(field.wrapped.iter().flatten()) {
        assert!((wrap(*p) - w).abs() < 1e-9 || (wrap(*p) - w).abs() > 2.0 * PI - 1e-9);
    }
    let fu = unwrap_frequency(&field).unwrap();
    assert!(max_error_up_to_global_cycle(&truth, &fu.phase) <= 1e-6);
    let su = unwrap_spherical_sim(&field, &hull).unwrap();
    assert!(max_error_up_to_global_cycle(&truth, &su.phase) <= 1e-6);
}

#[test]
fn prealigned_run_restores_the_same_phase() {
    let dirs = fibonacci_grid(80);
    let hull = convex_hull_graph(&dirs).unwrap();
    let (_, field) = delay_field(&dirs, 0.01, 6.0, 32);
    let plain = unwrap_joint(&field, &hull, None).unwrap();
    let shifts: Vec<f64> = (0..80).map(|i| 0.1 * (i % 7) as f64).collect();
    let pre = unwrap_joint(&field, &hull, Some(&shifts)).unwrap();
    assert!(pre.prealigned);
    for (a, b) in plain.phase.iter().flatten().zip(pre.phase.iter().flatten()) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn single_bin_matches_spherical_slice() {
    let dirs = fibonacci_grid(60);
    let hull = convex_hull_graph(&dirs).unwrap();
    let (_, field) = delay_field(&dirs, 0.0875, 20.0, 16);
    let slice = PhaseField::new(field.wrapped.iter().map(|r| vec![r[5]]).collect(), vec![field.bin_freqs_hz[5]], 16).unwrap();
    let a = unwrap_joint(&slice, &hull, None).unwrap();
    let b = unwrap_spherical_sim(&slice, &hull).unwrap();
    assert_eq!(a.sum_abs_k, b.sum_abs_k);
    for (x, y) in a.phase.iter().zip(&b.phase) {
        assert!((x[0] - y[0]).abs() < 1e-12);
    }
}

#[test]
fn prealignment_shrinks_corrections_on_rigid_sphere() {
    let params = RigidSphere { num_samples: 128, offset_samples: 16.0, ..RigidSphere::default() };
    let syn = rigid_sphere_set(&fibonacci_grid(100), &params).unwrap();
    let hull = convex_hull_graph(&syn.set.directions).unwrap();
    let field = PhaseField::from_set(&syn.set, EarSelector::Left, 128).unwrap();
    let sol = estimate_toa(&syn.set, &ToaConfig::default()).unwrap();
    let shifts = prealign_shifts(&sol.tau_left, 10);
    let raw = unwrap_joint(&field, &hull, None).unwrap();
    let pre = unwrap_joint(&field, &hull, Some(&shifts)).unwrap();
    println!("sum |K| without {} with {}", raw.sum_abs_k, pre.sum_abs_k);
    assert!(pre.sum_abs_k < raw.sum_abs_k);
}
