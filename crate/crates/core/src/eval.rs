//! Spherical-harmonics reconstruction metrics and the experiment drivers.

use serde::{Deserialize, Serialize};

use crate::dsp::spectrum;
use crate::error::{Error, Result};
use crate::hrir::{EarSelector, HrirSet};
use crate::hull::convex_hull_graph;
use crate::par;
use crate::sh::{sh_decode, sh_encode, DEFAULT_REG};
use crate::synth::add_white_noise;
use crate::toa::{align, estimate_toa, ToaConfig, ToaSolution};
use crate::unwrap::{phase_delay, prealign_shifts, unwrap_frequency, unwrap_joint, unwrap_spherical_sim, PhaseField, UnwrapMethod};

/// Recorded in every report so readers know what the LSD compares.
pub const LSD_REFERENCE: &str = "magnitude of aligned originals against SH-decoded aligned responses, full band from bin 1 to Nyquist unless overridden";

/// Mean absolute difference in µs.
pub fn itd_distortion(reference: &[f64], reconstructed: &[f64]) -> Result<f64> {
    Ok(mean(&abs_diff(reference, reconstructed)?))
}

fn abs_diff(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), got: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect())
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Frequency limits covering bin 1 up to Nyquist.
pub fn full_band(sample_rate_hz: f64, fft_size: usize) -> (f64, f64) {
    (sample_rate_hz / fft_size as f64, sample_rate_hz / 2.0)
}

/// Per-direction LSD in dB, averaged over both ears.
pub fn lsd_per_direction(reference: &HrirSet, reconstructed: &HrirSet, fft_size: usize, f_lo_hz: f64, f_hi_hz: f64) -> Result<Vec<f64>> {
    if reference.num_directions() != reconstructed.num_directions() || reference.num_samples() != reconstructed.num_samples() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} against {}x{}",
            reference.num_directions(),
            reference.num_samples(),
            reconstructed.num_directions(),
            reconstructed.num_samples()
        )));
    }
    let fs = reference.sample_rate_hz;
    let bins: Vec<usize> = (1..=fft_size / 2)
        .filter(|&k| {
            let f = k as f64 * fs / fft_size as f64;
            f >= f_lo_hz - 1e-9 && f <= f_hi_hz + 1e-9
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::EmptyBand);
    }
    let rms = |a: &[f64], b: &[f64]| -> Result<f64> {
        let sa = spectrum(a, fft_size, fs)?;
        let sb = spectrum(b, fft_size, fs)?;
        let ss: f64 = bins.iter().map(|&k| (sa.magnitude_db[k] - sb.magnitude_db[k]).powi(2)).sum();
        Ok((ss / bins.len() as f64).sqrt())
    };
    (0..reference.num_directions())
        .map(|i| Ok(0.5 * (rms(&reference.left[i], &reconstructed.left[i])? + rms(&reference.right[i], &reconstructed.right[i])?)))
        .collect()
}

/// Log-spectral distance in dB, averaged over directions and ears.
pub fn lsd(reference: &HrirSet, reconstructed: &HrirSet, fft_size: usize, f_lo_hz: f64, f_hi_hz: f64) -> Result<f64> {
    Ok(mean(&lsd_per_direction(reference, reconstructed, fft_size, f_lo_hz, f_hi_hz)?))
}

/// Encodes both ears of every direction at `order` and decodes at the same directions.
pub fn sh_roundtrip_set(set: &HrirSet, order: usize, reg: f64) -> Result<HrirSet> {
    let t = set.num_samples();
    let values: Vec<Vec<f64>> = set.left.iter().zip(&set.right).map(|(l, r)| l.iter().chain(r).copied().collect()).collect();
    let field = sh_encode(&values, &set.directions, order, reg)?;
    let decoded = sh_decode(&field, &set.directions);
    let left = decoded.iter().map(|row| row[..t].to_vec()).collect();
    let right = decoded.iter().map(|row| row[t..].to_vec()).collect();
    HrirSet::new(format!("{}-sh{order}", set.name), set.sample_rate_hz, set.directions.clone(), left, right)
}

/// Encodes a scalar per direction and decodes at the same directions.
pub fn sh_roundtrip_values(values: &[f64], set: &HrirSet, order: usize, reg: f64) -> Result<Vec<f64>> {
    let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
    let field = sh_encode(&rows, &set.directions, order, reg)?;
    Ok(sh_decode(&field, &set.directions).into_iter().map(|r| r[0]).collect())
}

/// Settings shared by the reconstruction experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSettings {
    pub reg: f64,
    /// Zero selects the response length.
    pub fft_size: usize,
    /// Lower band edge; `None` selects bin 1.
    pub f_lo_hz: Option<f64>,
    /// Upper band edge; `None` selects Nyquist.
    pub f_hi_hz: Option<f64>,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        Self { reg: DEFAULT_REG, fft_size: 0, f_lo_hz: None, f_hi_hz: None }
    }
}

impl SpectralSettings {
    fn resolve(&self, set: &HrirSet) -> (usize, f64, f64) {
        let n = if self.fft_size == 0 { set.num_samples() } else { self.fft_size };
        let (lo, hi) = full_band(set.sample_rate_hz, n);
        (n, self.f_lo_hz.unwrap_or(lo), self.f_hi_hz.unwrap_or(hi))
    }
}

/// Metrics of one alignment-and-reconstruction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub config: ToaConfig,
    pub sh_order: usize,
    pub snr_db: Option<f64>,
    pub seed: Option<u64>,
    pub itd_distortion_us: f64,
    pub lsd_db: f64,
    pub per_direction_itd_us: Vec<f64>,
    pub per_direction_lsd_db: Vec<f64>,
    pub solve_time_s: f64,
    pub lsd_reference: String,
}

fn report_from_solution(
    dataset: &str,
    reference: &HrirSet,
    sol: &ToaSolution,
    sh_order: usize,
    settings: &SpectralSettings,
) -> Result<MetricReport> {
    let (fft_size, lo, hi) = settings.resolve(reference);
    let decoded = sh_roundtrip_set(&sol.aligned, sh_order, settings.reg)?;
    let per_direction_lsd_db = lsd_per_direction(reference, &decoded, fft_size, lo, hi)?;
    let itd_hat = sh_roundtrip_values(&sol.itd_us, &sol.aligned, sh_order, settings.reg)?;
    let per_direction_itd_us = abs_diff(&sol.itd_us, &itd_hat)?;
    Ok(MetricReport {
        dataset: dataset.to_string(),
        config: sol.config,
        sh_order,
        snr_db: None,
        seed: None,
        itd_distortion_us: mean(&per_direction_itd_us),
        lsd_db: mean(&per_direction_lsd_db),
        per_direction_itd_us,
        per_direction_lsd_db,
        solve_time_s: sol.diagnostics.solve_time_s,
        lsd_reference: LSD_REFERENCE.to_string(),
    })
}

/// Aligns the set, reconstructs aligned responses and ITDs through SH at
/// `sh_order`, and measures both.
pub fn run_alignment_experiment(set: &HrirSet, config: &ToaConfig, sh_order: usize, settings: &SpectralSettings) -> Result<MetricReport> {
    let sol = estimate_toa(set, config)?;
    report_from_solution(&set.name, &sol.aligned, &sol, sh_order, settings)
}

/// Alignment experiment over several orders sharing one TOA solve.
pub fn run_alignment_orders(set: &HrirSet, config: &ToaConfig, sh_orders: &[usize], settings: &SpectralSettings) -> Result<Vec<MetricReport>> {
    let sol = estimate_toa(set, config)?;
    sh_orders.iter().map(|&o| report_from_solution(&set.name, &sol.aligned, &sol, o, settings)).collect()
}

/// One row of a long-format report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub dataset: String,
    pub algorithm: String,
    pub weighting: String,
    pub use_minphase: Option<bool>,
    pub use_cross: Option<bool>,
    pub oversample_factor: Option<usize>,
    pub method: String,
    pub snr_db: Option<f64>,
    pub seed: Option<u64>,
    pub sh_order: usize,
    pub frequency_hz: Option<f64>,
    pub metric: String,
    pub value: f64,
}

impl MetricReport {
    /// Long-format rows for the scalar metrics.
    pub fn rows(&self, experiment: &str) -> Vec<ReportRow> {
        let base = ReportRow {
            experiment: experiment.to_string(),
            dataset: self.dataset.clone(),
            algorithm: self.config.algorithm.as_str().to_string(),
            weighting: self.config.weighting.as_str().to_string(),
            use_minphase: Some(self.config.use_minphase),
            use_cross: Some(self.config.use_cross),
            oversample_factor: Some(self.config.oversample_factor),
            method: self.config.label(),
            snr_db: self.snr_db,
            seed: self.seed,
            sh_order: self.sh_order,
            frequency_hz: None,
            metric: String::new(),
            value: 0.0,
        };
        [("itd_distortion_us", self.itd_distortion_us), ("lsd_db", self.lsd_db), ("solve_time_s", self.solve_time_s)]
            .into_iter()
            .map(|(metric, value)| ReportRow { metric: metric.to_string(), value, ..base.clone() })
            .collect()
    }
}

/// Grid of the noise-robustness sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseExperiment {
    /// `None` runs the clean set.
    pub snr_grid_db: Vec<Option<f64>>,
    pub configs: Vec<ToaConfig>,
    pub sh_orders: Vec<usize>,
    pub seed: u64,
    pub settings: SpectralSettings,
}

/// Seed used for one SNR cell, derived from the base seed.
pub fn cell_seed(seed: u64, snr_index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(snr_index as u64)
}

/// One cell of the noise sweep: adds noise at `snr_db` (none when `None`)
/// with `seed`, re-estimates arrival times, and measures ITD reconstruction
/// distortion and LSD of the decoded noisy aligned responses against the
/// clean set aligned by the same delays.
pub fn run_noise_cell(
    set: &HrirSet,
    snr_db: Option<f64>,
    seed: u64,
    config: &ToaConfig,
    sh_orders: &[usize],
    settings: &SpectralSettings,
) -> Result<Vec<MetricReport>> {
    let noisy = match snr_db {
        Some(s) => add_white_noise(set, s, seed)?.0,
        None => set.clone(),
    };
    let sol = estimate_toa(&noisy, config)?;
    // the clean responses shifted by the same delays keep the comparison delay-free
    let (reference, _) = align(set, &sol.tau_left, &sol.tau_right, sol.config.oversample_factor)?;
    sh_orders
        .iter()
        .map(|&o| {
            let mut r = report_from_solution(&set.name, &reference, &sol, o, settings)?;
            r.snr_db = snr_db;
            r.seed = snr_db.map(|_| seed);
            Ok(r)
        })
        .collect()
}

/// Runs every (SNR, configuration) cell of the sweep in parallel.
pub fn run_noise_experiment(set: &HrirSet, experiment: &NoiseExperiment) -> Result<Vec<MetricReport>> {
    if experiment.snr_grid_db.is_empty() || experiment.configs.is_empty() || experiment.sh_orders.is_empty() {
        return Err(Error::InvalidConfig("noise experiment needs nonempty SNR, config and order grids".into()));
    }
    let nc = experiment.configs.len();
    let cells = par::map(experiment.snr_grid_db.len() * nc, |c| {
        let (k, j) = (c / nc, c % nc);
        run_noise_cell(set, experiment.snr_grid_db[k], cell_seed(experiment.seed, k), &experiment.configs[j], &experiment.sh_orders, &experiment.settings)
    });
    let mut out = Vec::new();
    for c in cells {
        out.extend(c?);
    }
    Ok(out)
}

/// Unwrapping variants compared by the phase-delay experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseVariant {
    pub method: UnwrapMethod,
    /// Only used by the joint method.
    pub prealign: bool,
}

impl PhaseVariant {
    pub fn label(&self) -> String {
        if self.prealign && self.method == UnwrapMethod::Joint {
            format!("{}+prealign", self.method.as_str())
        } else {
            self.method.as_str().to_string()
        }
    }
}

/// Settings of the phase-delay experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseExperiment {
    pub variants: Vec<PhaseVariant>,
    pub sh_orders: Vec<usize>,
    /// Zero selects the response length.
    pub fft_size: usize,
    pub reg: f64,
    /// Arrival times for prealignment come from this configuration.
    pub toa_config: ToaConfig,
}

/// Per-frequency phase-delay reconstruction error of one variant and order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDelayCurve {
    pub dataset: String,
    pub variant: String,
    pub sh_order: usize,
    pub sum_abs_k: i64,
    pub frequency_hz: Vec<f64>,
    pub error_us: Vec<f64>,
}

impl PhaseDelayCurve {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.frequency_hz
            .iter()
            .zip(&self.error_us)
            .map(|(&f, &e)| ReportRow {
                experiment: "phase".into(),
                dataset: self.dataset.clone(),
                algorithm: String::new(),
                weighting: String::new(),
                use_minphase: None,
                use_cross: None,
                oversample_factor: None,
                method: self.variant.clone(),
                snr_db: None,
                seed: None,
                sh_order: self.sh_order,
                frequency_hz: Some(f),
                metric: "phase_delay_error_us".into(),
                value: e,
            })
            .collect()
    }
}

/// Unwraps the left-ear phase with each variant, then SH-reconstructs the
/// phase delay of every bin above DC and reports the mean absolute error.
pub fn run_phase_delay_experiment(set: &HrirSet, experiment: &PhaseExperiment) -> Result<Vec<PhaseDelayCurve>> {
    if experiment.variants.is_empty() || experiment.sh_orders.is_empty() {
        return Err(Error::InvalidConfig("phase experiment needs variants and orders".into()));
    }
    let fft_size = if experiment.fft_size == 0 { set.num_samples() } else { experiment.fft_size };
    let field = PhaseField::from_set(set, EarSelector::Left, fft_size)?;
    let hull = convex_hull_graph(&set.directions)?;
    let shifts = if experiment.variants.iter().any(|v| v.prealign && v.method == UnwrapMethod::Joint) {
        let sol = estimate_toa(set, &experiment.toa_config)?;
        Some(prealign_shifts(&sol.tau_left, experiment.toa_config.oversample_factor))
    } else {
        None
    };
    let mut out = Vec::new();
    for variant in &experiment.variants {
        let u = match variant.method {
            UnwrapMethod::FreqOnly => unwrap_frequency(&field)?,
            UnwrapMethod::SphericalOnly => unwrap_spherical_sim(&field, &hull)?,
            UnwrapMethod::Joint => unwrap_joint(&field, &hull, if variant.prealign { shifts.as_deref() } else { None })?,
        };
        let delays_us: Vec<Vec<f64>> = phase_delay(&u, &field.bin_freqs_hz)?.into_iter().map(|r| r.into_iter().map(|d| d * 1e6).collect()).collect();
        for &order in &experiment.sh_orders {
            let decoded = sh_decode(&sh_encode(&delays_us, &set.directions, order, experiment.reg)?, &set.directions);
            let bins = field.num_bins() - 1;
            let error_us = (0..bins)
                .map(|k| mean(&delays_us.iter().zip(&decoded).map(|(a, b)| (a[k] - b[k]).abs()).collect::<Vec<_>>()))
                .collect();
            out.push(PhaseDelayCurve {
                dataset: set.name.clone(),
                variant: variant.label(),
                sh_order: order,
                sum_abs_k: u.sum_abs_k,
                frequency_hz: field.bin_freqs_hz[1..].to_vec(),
                error_us,
            });
        }
    }
    Ok(out)
}
