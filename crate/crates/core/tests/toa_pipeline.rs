use hrtf_graph::synth::{fibonacci_grid, rigid_sphere_set, RigidSphere, SyntheticSet};
use hrtf_graph::toa::{estimate_toa, Algorithm, ToaConfig, ToaSolution, Weighting};

fn edge_hit_rate(syn: &SyntheticSet, sol: &ToaSolution, factor: f64) -> f64 {
    let hull = hrtf_graph::hull::convex_hull_graph(&syn.set.directions).unwrap();
    let mut ok = 0;
    let mut total = 0;
    for (truth, est) in [(&syn.tau_left, &sol.tau_left), (&syn.tau_right, &sol.tau_right)] {
        for &(i, j) in &hull.edges {
            let want = (truth[j] - truth[i]) * factor;
            let got = est[j] - est[i];
            total += 1;
            if (got - want).abs() <= 1.0 {
                ok += 1;
            }
        }
    }
    ok as f64 / total as f64
}

fn itd_mae(syn: &SyntheticSet, sol: &ToaSolution) -> f64 {
    let truth = syn.itd_us();
    truth.iter().zip(&sol.itd_us).map(|(a, b)| (a - b).abs()).sum::<f64>() / truth.len() as f64
}

#[test]
fn rigid_sphere_recovery_all_configs() {
    let syn = rigid_sphere_set(&fibonacci_grid(128), &RigidSphere::default()).unwrap();
    for config in ToaConfig::grid(&ToaConfig::default()) {
        let sol = estimate_toa(&syn.set, &config).unwrap();
        let rate = edge_hit_rate(&syn, &sol, 10.0);
        let mae = itd_mae(&syn, &sol);
        assert!(rate >= 0.99, "{} edge rate {rate}", config.label());
        assert!(mae <= 3.0, "{} itd mae {mae}", config.label());
        assert_eq!(sol.diagnostics.clamped_shifts, 0);
    }
}

#[test]
fn l1_and_ls_share_the_gauge_convention() {
    let syn = rigid_sphere_set(&fibonacci_grid(64), &RigidSphere::default()).unwrap();
    for algorithm in Algorithm::ALL {
        let config = ToaConfig { algorithm, weighting: Weighting::Exp, use_minphase: false, ..ToaConfig::default() };
        let sol = estimate_toa(&syn.set, &config).unwrap();
        let sum: f64 = sol.tau_left.iter().chain(&sol.tau_right).sum();
        assert!(sum.abs() < 1e-6 * sol.tau_left.len() as f64, "{}", config.label());
        assert_eq!(sol.rows(&syn.set.directions).len(), 64);
    }
}
