//! The three demo operations as plain Rust, testable without a browser.

use std::f64::consts::PI;

use hrtf_graph::hrir::Direction;
use hrtf_graph::hull::convex_hull_graph;
use hrtf_graph::synth::{add_white_noise, fibonacci_grid, rigid_sphere_set, woodworth_delay_s, RigidSphere, SyntheticSet};
use hrtf_graph::toa::{estimate_from_features, estimate_toa, measure_features, Algorithm, ToaConfig, ToaSolution, Weighting};
use hrtf_graph::unwrap::{unwrap_frequency, unwrap_joint, unwrap_spherical_sim, wrap, PhaseField, UnwrappedField};
use hrtf_graph::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Correlation oversampling used by the demo; lower than the CLI default to stay interactive.
pub const DEMO_OVERSAMPLE: usize = 4;

#[derive(Debug, Clone)]
pub struct ItdMap {
    pub az_deg: Vec<f64>,
    pub colat_deg: Vec<f64>,
    pub truth_us: Vec<f64>,
    pub estimate_us: Vec<f64>,
    pub mae_us: f64,
    pub measured_snr_db: f64,
}

fn sphere(num_dirs: usize) -> Result<SyntheticSet> {
    rigid_sphere_set(&fibonacci_grid(num_dirs), &RigidSphere::default())
}

/// Rigid-sphere ITD map estimated with one solver, optionally from a noisy set.
pub fn itd_map(num_dirs: usize, algorithm: Algorithm, weighting: Weighting, use_cross: bool, snr_db: Option<f64>, seed: u64) -> Result<ItdMap> {
    let syn = sphere(num_dirs)?;
    let set = match snr_db {
        Some(snr) => add_white_noise(&syn.set, snr, seed)?.0,
        None => syn.set.clone(),
    };
    let config = ToaConfig { algorithm, weighting, use_cross, oversample_factor: DEMO_OVERSAMPLE, ..ToaConfig::default() };
    let sol = estimate_toa(&set, &config)?;
    let truth = syn.itd_us();
    let mae_us = truth.iter().zip(&sol.itd_us).map(|(t, e)| (t - e).abs()).sum::<f64>() / truth.len() as f64;
    let (az_deg, colat_deg) = set.directions.iter().map(|d| d.az_colat_deg()).unzip();
    Ok(ItdMap {
        az_deg,
        colat_deg,
        truth_us: truth,
        estimate_us: sol.itd_us,
        mae_us,
        measured_snr_db: hrtf_graph::synth::measurement_snr_db(&set),
    })
}

#[derive(Debug, Clone)]
pub struct OutlierDemo {
    pub az_deg: Vec<f64>,
    pub colat_deg: Vec<f64>,
    /// Left-ear arrival error per direction in microseconds, common offset removed.
    pub l1_error_us: Vec<f64>,
    pub l2_error_us: Vec<f64>,
    pub corrupted_edge: (usize, usize),
}

impl OutlierDemo {
    pub fn l1_max_us(&self) -> f64 {
        self.l1_error_us.iter().fold(0.0, |m, e| m.max(e.abs()))
    }

    pub fn l2_max_us(&self) -> f64 {
        self.l2_error_us.iter().fold(0.0, |m, e| m.max(e.abs()))
    }
}

fn left_error_us(syn: &SyntheticSet, sol: &ToaSolution) -> Vec<f64> {
    let f = sol.config.oversample_factor as f64;
    let err: Vec<f64> = syn.tau_left.iter().zip(&sol.tau_left).map(|(t, e)| e / f - t).collect();
    let mean = err.iter().sum::<f64>() / err.len() as f64;
    err.iter().map(|e| (e - mean) / syn.set.sample_rate_hz * 1e6).collect()
}

/// Corrupts one left-ear neighbour lag by `outlier_samples` and solves with L1 (EDGY) and L2 (LS).
pub fn outlier_demo(num_dirs: usize, outlier_samples: i64, seed: u64) -> Result<OutlierDemo> {
    let syn = sphere(num_dirs)?;
    let base = ToaConfig { weighting: Weighting::Exp, oversample_factor: DEMO_OVERSAMPLE, ..ToaConfig::default() };
    let mut features = measure_features(&syn.set, &base)?;
    let e = ChaCha8Rng::seed_from_u64(seed).random_range(0..features.hull.edges.len());
    features.intra_left[e].gamma += outlier_samples * DEMO_OVERSAMPLE as i64;
    let l1 = estimate_from_features(&syn.set, &features, &ToaConfig { algorithm: Algorithm::Edgy, ..base })?;
    let l2 = estimate_from_features(&syn.set, &features, &ToaConfig { algorithm: Algorithm::Ls, ..base })?;
    let (az_deg, colat_deg) = syn.set.directions.iter().map(|d| d.az_colat_deg()).unzip();
    Ok(OutlierDemo {
        az_deg,
        colat_deg,
        l1_error_us: left_error_us(&syn, &l1),
        l2_error_us: left_error_us(&syn, &l2),
        corrupted_edge: features.hull.edges[e],
    })
}

#[derive(Debug, Clone)]
pub struct MethodResult {
    pub name: &'static str,
    /// Direction-bin cells whose unwrapped phase is off by a multiple of 2 pi.
    pub wrong_cells: usize,
    pub sum_abs_k: i64,
    /// Unwrapped phase of the shown direction.
    pub curve: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct UnwrapComparison {
    pub freqs_hz: Vec<f64>,
    pub truth: Vec<f64>,
    pub wrapped: Vec<f64>,
    pub methods: Vec<MethodResult>,
    pub total_cells: usize,
}

/// Pure-delay phase field on a sphere with Gaussian phase noise, unwrapped three ways.
///
/// `radius_m` sets how far neighbouring delays differ; `show` picks the plotted direction.
pub fn unwrap_comparison(num_dirs: usize, fft_size: usize, radius_m: f64, noise_rad: f64, seed: u64, show: usize) -> Result<UnwrapComparison> {
    let dirs = fibonacci_grid(num_dirs);
    let hull = convex_hull_graph(&dirs)?;
    let fs = 44_100.0;
    let ear = Direction::new([0.0, 1.0, 0.0])?;
    let bins = fft_size / 2 + 1;
    let freqs_hz: Vec<f64> = (0..bins).map(|k| k as f64 * fs / fft_size as f64).collect();
    let noise = Normal::new(0.0, noise_rad.max(0.0)).map_err(|e| hrtf_graph::Error::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<Vec<f64>> = dirs
        .iter()
        .map(|d| {
            let tau = 6.0 + fs * woodworth_delay_s(d, &ear, radius_m, 343.0);
            (0..bins).map(|k| -2.0 * PI * k as f64 * tau / fft_size as f64 + if k == 0 { 0.0 } else { noise.sample(&mut rng) }).collect()
        })
        .collect();
    let wrapped: Vec<Vec<f64>> = truth.iter().map(|r| r.iter().map(|&x| wrap(x)).collect()).collect();
    let field = PhaseField::new(wrapped.clone(), freqs_hz.clone(), fft_size)?;
    let show = show.min(num_dirs.saturating_sub(1));
    let score = |name: &'static str, u: UnwrappedField| MethodResult {
        name,
        wrong_cells: u.phase.iter().flatten().zip(truth.iter().flatten()).filter(|(a, b)| (*a - *b).abs() > PI).count(),
        sum_abs_k: u.sum_abs_k,
        curve: u.phase[show].clone(),
    };
    let methods = vec![
        score("frequency only", unwrap_frequency(&field)?),
        score("spherical only", unwrap_spherical_sim(&field, &hull)?),
        score("joint", unwrap_joint(&field, &hull, None)?),
    ];
    Ok(UnwrapComparison {
        truth: truth[show].clone(),
        wrapped: wrapped[show].clone(),
        freqs_hz,
        methods,
        total_cells: num_dirs * bins,
    })
}

