//! Time-of-arrival pipeline: measure pairwise lags, weight them, assemble the
//! difference graph, solve, fix the gauge and align the responses.
//!
//! All delays inside this module are in oversampled ("fine") samples.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dsp::{fractional_delay, minimum_phase, oversample, Correlator};
use crate::error::{Error, Result};
use crate::graph::{add_delta, build_intra_graph, join_ears, DifferenceGraph, WEIGHT_FLOOR};
use crate::hrir::{Direction, EarSelector, HrirSet};
use crate::hull::{convex_hull_graph, HullTriangulation};
use crate::l1::{solve_l1, Formulation};
use crate::ls::{solve_ls, LsProblem};
use crate::par::{self, Stopwatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Algorithm {
    Simp,
    Edgy,
    Ls,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Simp, Algorithm::Edgy, Algorithm::Ls];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Simp => "SIMP",
            Algorithm::Edgy => "EDGY",
            Algorithm::Ls => "LS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Weighting {
    None,
    Exp,
    Corr,
}

impl Weighting {
    pub const ALL: [Weighting; 3] = [Weighting::None, Weighting::Exp, Weighting::Corr];

    pub fn as_str(self) -> &'static str {
        match self {
            Weighting::None => "NONE",
            Weighting::Exp => "EXP",
            Weighting::Corr => "CORR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToaConfig {
    pub algorithm: Algorithm,
    pub weighting: Weighting,
    pub use_minphase: bool,
    pub use_cross: bool,
    pub oversample_factor: usize,
    pub sigma_deg: f64,
    pub delta_weight: f64,
    pub lambda: f64,
}

impl Default for ToaConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Edgy,
            weighting: Weighting::Exp,
            use_minphase: true,
            use_cross: true,
            oversample_factor: 10,
            sigma_deg: 8.0,
            delta_weight: 0.1,
            lambda: 0.1,
        }
    }
}

impl ToaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_deg > 0.0) {
            return Err(Error::InvalidConfig(format!("sigma_deg must be positive, got {}", self.sigma_deg)));
        }
        if !(self.delta_weight > 0.0 && self.delta_weight <= 1.0) {
            return Err(Error::InvalidConfig(format!("delta_weight must lie in (0, 1], got {}", self.delta_weight)));
        }
        if self.oversample_factor < 1 {
            return Err(Error::InvalidConfig("oversample_factor must be at least 1".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        Ok(())
    }

    /// Short label such as `EDGY/EXP/min/cross`.
    pub fn label(&self) -> String {
        let mut s = format!("{}/{}", self.algorithm.as_str(), self.weighting.as_str());
        if self.use_minphase {
            s.push_str("/min");
        }
        if self.use_cross {
            s.push_str("/cross");
        }
        s
    }

    /// Every combination of algorithm, weighting and the two feature flags.
    pub fn grid(base: &ToaConfig) -> Vec<ToaConfig> {
        let mut out = Vec::with_capacity(36);
        for algorithm in Algorithm::ALL {
            for weighting in Weighting::ALL {
                for use_minphase in [false, true] {
                    for use_cross in [false, true] {
                        out.push(ToaConfig {
                            algorithm,
                            weighting,
                            use_minphase,
                            use_cross,
                            ..*base
                        });
                    }
                }
            }
        }
        out
    }
}

/// One measured difference: the lag and, when known, the correlation peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Datum {
    pub gamma: i64,
    pub peak: Option<f64>,
}

/// All measured differences for one HRIR set.
#[derive(Debug, Clone)]
pub struct Features {
    pub hull: HullTriangulation,
    pub oversample_factor: usize,
    /// Per hull edge `(i, j)`, `i < j`: lag of `j` relative to `i`, per ear.
    pub intra_left: Vec<Datum>,
    pub intra_right: Vec<Datum>,
    /// Per direction: lag of the right ear relative to the left.
    pub cross: Option<Vec<Datum>>,
    /// Per direction: lag of the response relative to its minimum-phase version.
    pub minphase_left: Option<Vec<Datum>>,
    pub minphase_right: Option<Vec<Datum>>,
}

fn datum(r: crate::dsp::CorrelationResult) -> Datum {
    Datum {
        gamma: r.lag,
        peak: Some(r.peak),
    }
}

fn oversampled(responses: &[Vec<f64>], factor: usize) -> Result<Vec<Vec<f64>>> {
    par::map(responses.len(), |i| oversample(&responses[i], factor)).into_iter().collect()
}

fn single_ear(ear: EarSelector) -> Result<EarSelector> {
    match ear {
        EarSelector::Both => Err(Error::InvalidConfig("select a single ear".into())),
        e => Ok(e),
    }
}

/// Lags between hull-adjacent responses of one ear.
pub fn measure_intra_gammas(set: &HrirSet, hull: &HullTriangulation, ear: EarSelector, factor: usize) -> Result<Vec<Datum>> {
    let ear = single_ear(ear)?;
    let corr = Correlator::new(&oversampled(set.ear(ear), factor)?)?;
    Ok(intra_with(&corr, hull, 0))
}

fn intra_with(corr: &Correlator, hull: &HullTriangulation, offset: usize) -> Vec<Datum> {
    par::map(hull.edges.len(), |k| {
        let (i, j) = hull.edges[k];
        datum(corr.lag(i + offset, j + offset, None))
    })
}

/// Lag of the right response relative to the left one, per direction.
pub fn measure_cross_gammas(set: &HrirSet, factor: usize) -> Result<Vec<Datum>> {
    let mut all = oversampled(&set.left, factor)?;
    all.extend(oversampled(&set.right, factor)?);
    let corr = Correlator::new(&all)?;
    Ok(cross_with(&corr, set.num_directions()))
}

fn cross_with(corr: &Correlator, n: usize) -> Vec<Datum> {
    par::map(n, |i| datum(corr.lag(i, i + n, None)))
}

/// Absolute arrival estimate: lag of each response against its minimum-phase
/// counterpart, both oversampled after the minimum-phase step.
pub fn measure_minphase_gammas(set: &HrirSet, ear: EarSelector, factor: usize) -> Result<Vec<Datum>> {
    let responses = set.ear(single_ear(ear)?);
    par::map(responses.len(), |i| -> Result<Datum> {
        let h = &responses[i];
        let min = minimum_phase(h)?.samples;
        let corr = Correlator::new(&[oversample(&min, factor)?, oversample(h, factor)?])?;
        Ok(datum(corr.lag(0, 1, None)))
    })
    .into_iter()
    .collect()
}

/// Measures every feature the configuration needs.
pub fn measure_features(set: &HrirSet, config: &ToaConfig) -> Result<Features> {
    config.validate()?;
    let hull = convex_hull_graph(&set.directions)?;
    let factor = config.oversample_factor;
    let n = set.num_directions();
    let mut all = oversampled(&set.left, factor)?;
    all.extend(oversampled(&set.right, factor)?);
    let corr = Correlator::new(&all)?;
    let intra_left = intra_with(&corr, &hull, 0);
    let intra_right = intra_with(&corr, &hull, n);
    let cross = config.use_cross.then(|| cross_with(&corr, n));
    drop(corr);
    let (minphase_left, minphase_right) = if config.use_minphase {
        (
            Some(measure_minphase_gammas(set, EarSelector::Left, factor)?),
            Some(measure_minphase_gammas(set, EarSelector::Right, factor)?),
        )
    } else {
        (None, None)
    };
    Ok(Features {
        hull,
        oversample_factor: factor,
        intra_left,
        intra_right,
        cross,
        minphase_left,
        minphase_right,
    })
}

/// Decaying weight of an angular separation.
pub fn exp_weight(angle_rad: f64, sigma_deg: f64) -> f64 {
    (-angle_rad / sigma_deg.to_radians()).exp()
}

/// Correlation peak floored to the smallest admissible weight.
pub fn corr_weight(peak: f64) -> f64 {
    peak.max(WEIGHT_FLOOR)
}

/// Per-edge weights for every edge family.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub intra_left: Vec<f64>,
    pub intra_right: Vec<f64>,
    pub cross: Vec<f64>,
    pub delta_left: Vec<f64>,
    pub delta_right: Vec<f64>,
}

pub fn compute_weights(scheme: Weighting, directions: &[Direction], features: &Features, config: &ToaConfig) -> Result<Weights> {
    let n = directions.len();
    let hull = &features.hull;
    let peaks = |data: &[Datum]| -> Result<Vec<f64>> {
        data.iter().map(|d| d.peak.map(corr_weight).ok_or(Error::MissingPeaks)).collect()
    };
    let opt_peaks = |data: &Option<Vec<Datum>>| -> Result<Vec<f64>> { data.as_deref().map_or(Ok(Vec::new()), peaks) };
    Ok(match scheme {
        Weighting::None => Weights {
            intra_left: vec![1.0; hull.edges.len()],
            intra_right: vec![1.0; hull.edges.len()],
            cross: vec![1.0; n],
            delta_left: vec![1.0; n],
            delta_right: vec![1.0; n],
        },
        Weighting::Exp => {
            let intra: Vec<f64> = hull
                .edges
                .iter()
                .map(|&(i, j)| exp_weight(directions[i].angle_to(&directions[j]), config.sigma_deg))
                .collect();
            let cross = directions
                .iter()
                .map(|d| exp_weight(d.angle_to(&d.mirrored_y()), config.sigma_deg))
                .collect();
            Weights {
                intra_left: intra.clone(),
                intra_right: intra,
                cross,
                delta_left: vec![config.delta_weight; n],
                delta_right: vec![config.delta_weight; n],
            }
        }
        Weighting::Corr => Weights {
            intra_left: peaks(&features.intra_left)?,
            intra_right: peaks(&features.intra_right)?,
            cross: opt_peaks(&features.cross)?,
            delta_left: opt_peaks(&features.minphase_left)?,
            delta_right: opt_peaks(&features.minphase_right)?,
        },
    })
}

/// How the additive constant was fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// The auxiliary vertex is zero, so values are absolute.
    Delta,
    /// Each ear has zero mean.
    ZeroMeanPerEar,
    /// Both ears together have zero mean.
    ZeroMeanJoint,
}

/// The graphs a configuration solves, with the vertex of each (direction, ear).
#[derive(Debug, Clone)]
pub struct Assembly {
    pub graphs: Vec<DifferenceGraph>,
    /// `(graph index, vertex)` of every left then every right response.
    pub slots: Vec<(usize, usize)>,
    pub gauge: Gauge,
}

fn gammas(data: &[Datum]) -> Vec<i64> {
    data.iter().map(|d| d.gamma).collect()
}

fn required<'a>(data: &'a Option<Vec<Datum>>, what: &str) -> Result<&'a [Datum]> {
    data.as_deref().ok_or_else(|| Error::InvalidConfig(format!("{what} features were not measured")))
}

/// Builds the difference graph(s) the configuration calls for.
pub fn assemble(directions: &[Direction], features: &Features, config: &ToaConfig) -> Result<Assembly> {
    let n = directions.len();
    let w = compute_weights(config.weighting, directions, features, config)?;
    let hull = &features.hull;
    let left = build_intra_graph(hull, &gammas(&features.intra_left), &w.intra_left)?;
    let right = build_intra_graph(hull, &gammas(&features.intra_right), &w.intra_right)?;
    let minphase = if config.use_minphase {
        Some((
            gammas(required(&features.minphase_left, "minimum-phase")?),
            gammas(required(&features.minphase_right, "minimum-phase")?),
        ))
    } else {
        None
    };
    let gauge = match (config.use_minphase, config.use_cross) {
        (true, _) => Gauge::Delta,
        (false, true) => Gauge::ZeroMeanJoint,
        (false, false) => Gauge::ZeroMeanPerEar,
    };
    if config.use_cross {
        let cross = required(&features.cross, "inter-aural")?;
        let mut joint = join_ears(&left, &right, &gammas(cross), &w.cross)?;
        if let Some((gl, gr)) = minphase {
            let g: Vec<i64> = gl.into_iter().chain(gr).collect();
            let wd: Vec<f64> = w.delta_left.iter().chain(&w.delta_right).copied().collect();
            joint = add_delta(&joint, &g, &wd)?;
        }
        Ok(Assembly {
            graphs: vec![joint],
            slots: (0..2 * n).map(|v| (0, v)).collect(),
            gauge,
        })
    } else {
        let (left, right) = match minphase {
            Some((gl, gr)) => (add_delta(&left, &gl, &w.delta_left)?, add_delta(&right, &gr, &w.delta_right)?),
            None => (left, right),
        };
        Ok(Assembly {
            graphs: vec![left, right],
            slots: (0..n).map(|v| (0, v)).chain((0..n).map(|v| (1, v))).collect(),
            gauge,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ToaDiagnostics {
    /// Sum of the solver objectives over all graphs.
    pub objective: f64,
    /// Count of edges per rounded residual value.
    pub residual_histogram: BTreeMap<i64, usize>,
    pub sum_abs_residual: f64,
    pub solve_time_s: f64,
    pub gauge: Option<Gauge>,
    pub num_vertices: usize,
    pub num_edges: usize,
    /// Alignment shifts that had to be limited to half the response length.
    pub clamped_shifts: usize,
}

#[derive(Debug, Clone)]
pub struct ToaSolution {
    pub config: ToaConfig,
    pub sample_rate_hz: f64,
    /// Arrival times in fine samples.
    pub tau_left: Vec<f64>,
    pub tau_right: Vec<f64>,
    pub itd_us: Vec<f64>,
    pub aligned: HrirSet,
    pub diagnostics: ToaDiagnostics,
}

/// ITD in microseconds, positive when the left ear is later.
pub fn itd_us(tau_left: &[f64], tau_right: &[f64], factor: usize, sample_rate_hz: f64) -> Vec<f64> {
    let scale = 1e6 / (factor as f64 * sample_rate_hz);
    tau_left.iter().zip(tau_right).map(|(l, r)| (l - r) * scale).collect()
}

pub fn itd_of(sol: &ToaSolution) -> Vec<f64> {
    itd_us(&sol.tau_left, &sol.tau_right, sol.config.oversample_factor, sol.sample_rate_hz)
}

/// Node values per graph with the diagnostics of the solves.
fn solve_graphs(assembly: &Assembly, config: &ToaConfig) -> Result<(Vec<Vec<f64>>, ToaDiagnostics)> {
    let clock = Stopwatch::start();
    let mut diag = ToaDiagnostics {
        gauge: Some(assembly.gauge),
        ..Default::default()
    };
    let mut values = Vec::with_capacity(assembly.graphs.len());
    for g in &assembly.graphs {
        diag.num_vertices += g.num_vertices;
        diag.num_edges += g.num_edges();
        let (node, residuals, objective): (Vec<f64>, Vec<f64>, f64) = match config.algorithm {
            Algorithm::Simp | Algorithm::Edgy => {
                let f = if config.algorithm == Algorithm::Simp {
                    Formulation::Simplices
                } else {
                    Formulation::Edgelist
                };
                let s = solve_l1(g, f)?;
                (
                    s.node_values.iter().map(|&x| x as f64).collect(),
                    s.residuals.iter().map(|&k| k as f64).collect(),
                    s.objective,
                )
            }
            Algorithm::Ls => {
                let s = solve_ls(&LsProblem {
                    graph: g,
                    lambda: config.lambda,
                })?;
                (s.node_values, s.residuals, s.objective)
            }
        };
        diag.objective += objective;
        for r in &residuals {
            *diag.residual_histogram.entry(r.round() as i64).or_default() += 1;
            diag.sum_abs_residual += r.abs();
        }
        values.push(node);
    }
    diag.solve_time_s = clock.seconds();
    Ok((values, diag))
}

fn recentre(values: &mut [f64]) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter_mut().for_each(|x| *x -= mean);
}

/// Aligns every response by its arrival relative to the earliest one over both ears.
pub fn align(set: &HrirSet, tau_left: &[f64], tau_right: &[f64], factor: usize) -> Result<(HrirSet, usize)> {
    let min = tau_left.iter().chain(tau_right).fold(f64::INFINITY, |m, &x| m.min(x));
    let limit = set.num_samples() as f64 / 2.0 - 1.0;
    let clamped = std::sync::atomic::AtomicUsize::new(0);
    let shift_all = |responses: &[Vec<f64>], taus: &[f64]| -> Result<Vec<Vec<f64>>> {
        par::map(responses.len(), |i| {
            let mut s = (taus[i] - min) / factor as f64;
            if s > limit {
                clamped.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                s = limit;
            }
            fractional_delay(&responses[i], s)
        })
        .into_iter()
        .collect()
    };
    let left = shift_all(&set.left, tau_left)?;
    let right = shift_all(&set.right, tau_right)?;
    let n = clamped.into_inner();
    if n > 0 {
        log::warn!("{n} alignment shifts limited to {limit} samples");
    }
    let aligned = HrirSet::new(format!("{}-aligned", set.name), set.sample_rate_hz, set.directions.clone(), left, right)?;
    Ok((aligned, n))
}

/// Solves for arrival times from already measured features.
pub fn estimate_from_features(set: &HrirSet, features: &Features, config: &ToaConfig) -> Result<ToaSolution> {
    config.validate()?;
    if features.oversample_factor != config.oversample_factor {
        return Err(Error::InvalidConfig("features were measured at a different oversampling factor".into()));
    }
    let n = set.num_directions();
    let assembly = assemble(&set.directions, features, config)?;
    let (mut values, mut diagnostics) = solve_graphs(&assembly, config)?;
    match assembly.gauge {
        Gauge::Delta => {}
        Gauge::ZeroMeanJoint | Gauge::ZeroMeanPerEar => {
            for (g, v) in assembly.graphs.iter().zip(values.iter_mut()) {
                debug_assert!(g.delta_vertex.is_none());
                recentre(v);
            }
        }
    }
    let tau: Vec<f64> = assembly.slots.iter().map(|&(g, v)| values[g][v]).collect();
    let (tau_left, tau_right) = (tau[..n].to_vec(), tau[n..].to_vec());
    let (aligned, clamped) = align(set, &tau_left, &tau_right, config.oversample_factor)?;
    diagnostics.clamped_shifts = clamped;
    Ok(ToaSolution {
        config: *config,
        sample_rate_hz: set.sample_rate_hz,
        itd_us: itd_us(&tau_left, &tau_right, config.oversample_factor, set.sample_rate_hz),
        tau_left,
        tau_right,
        aligned,
        diagnostics,
    })
}

/// Full pipeline from raw responses.
pub fn estimate_toa(set: &HrirSet, config: &ToaConfig) -> Result<ToaSolution> {
    let features = measure_features(set, config)?;
    estimate_from_features(set, &features, config)
}

/// One exported row per direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToaRow {
    pub index: usize,
    pub az_deg: f64,
    pub colat_deg: f64,
    pub tau_left_us: f64,
    pub tau_right_us: f64,
    pub itd_us: f64,
}

impl ToaSolution {
    pub fn rows(&self, directions: &[Direction]) -> Vec<ToaRow> {
        let scale = 1e6 / (self.config.oversample_factor as f64 * self.sample_rate_hz);
        directions
            .iter()
            .enumerate()
            .map(|(index, d)| {
                let (az_deg, colat_deg) = d.az_colat_deg();
                ToaRow {
                    index,
                    az_deg,
                    colat_deg,
                    tau_left_us: self.tau_left[index] * scale,
                    tau_right_us: self.tau_right[index] * scale,
                    itd_us: self.itd_us[index],
                }
            })
            .collect()
    }
}
