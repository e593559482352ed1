//! HRTF phase unwrapping along frequency, per frequency over the sphere, and
//! jointly over sphere and frequency with the L1 graph solver.
//!
//! Every method returns `phi = psi + 2 pi L` with integer `L`, so wrapping
//! the output reproduces the input exactly.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dsp::spectrum;
use crate::error::{Error, Result};
use crate::graph::{build_intra_graph, stack_frequencies, DifferenceGraph, WEIGHT_FLOOR};
use crate::hrir::{EarSelector, HrirSet};
use crate::hull::HullTriangulation;
use crate::l1::{solve_l1, Formulation};
use crate::par;

const TWO_PI: f64 = 2.0 * PI;

/// Edges whose raw difference lies this close to an odd multiple of pi are ambiguous.
const WRAP_TIE_GUARD: f64 = 1e-9;

/// Maps `x` into [-pi, pi).
pub fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TWO_PI) - PI;
    // rem_euclid can round up to exactly 2 pi
    if y >= PI {
        y - TWO_PI
    } else {
        y
    }
}

/// Wrapped phase of N directions at F one-sided bins.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    pub wrapped: Vec<Vec<f64>>,
    pub bin_freqs_hz: Vec<f64>,
    pub fft_size: usize,
}

impl PhaseField {
    pub fn new(wrapped: Vec<Vec<f64>>, bin_freqs_hz: Vec<f64>, fft_size: usize) -> Result<Self> {
        let f = bin_freqs_hz.len();
        if wrapped.iter().any(|row| row.len() != f) {
            return Err(Error::ShapeMismatch(format!("every direction needs {f} bins")));
        }
        if let Some(x) = wrapped.iter().flatten().find(|x| !(-PI..PI).contains(*x)) {
            return Err(Error::ShapeMismatch(format!("wrapped phase {x} outside [-pi, pi)")));
        }
        Ok(Self {
            wrapped,
            bin_freqs_hz,
            fft_size,
        })
    }

    /// Phase of one ear's responses at `fft_size` points.
    pub fn from_set(set: &HrirSet, ear: EarSelector, fft_size: usize) -> Result<Self> {
        let responses = set.ear(ear);
        let spectra: Vec<_> = par::map(responses.len(), |i| spectrum(&responses[i], fft_size, set.sample_rate_hz))
            .into_iter()
            .collect::<Result<_>>()?;
        let bin_freqs_hz = spectra.first().map(|s: &crate::dsp::Spectrum| s.bin_freqs_hz.clone()).unwrap_or_default();
        Self::new(spectra.into_iter().map(|s| s.wrapped_phase).collect(), bin_freqs_hz, fft_size)
    }

    pub fn num_directions(&self) -> usize {
        self.wrapped.len()
    }

    pub fn num_bins(&self) -> usize {
        self.bin_freqs_hz.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnwrapMethod {
    FreqOnly,
    SphericalOnly,
    Joint,
}

impl UnwrapMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            UnwrapMethod::FreqOnly => "freq",
            UnwrapMethod::SphericalOnly => "spherical",
            UnwrapMethod::Joint => "joint",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnwrappedField {
    pub phase: Vec<Vec<f64>>,
    pub residual_l: Vec<Vec<i64>>,
    pub method: UnwrapMethod,
    pub prealigned: bool,
    /// Sum of |K| over all graph edges the solver corrected; zero for frequency-only.
    pub sum_abs_k: i64,
}

/// Builds `phi` from `psi` and integer counts, recomputing the counts from
/// the rounded difference so that `phi - psi` is an exact multiple of 2 pi.
fn finish(wrapped: &[Vec<f64>], approx: &[Vec<f64>], method: UnwrapMethod, prealigned: bool, sum_abs_k: i64) -> UnwrappedField {
    let residual_l: Vec<Vec<i64>> = wrapped
        .iter()
        .zip(approx)
        .map(|(psi, phi)| psi.iter().zip(phi).map(|(p, q)| ((q - p) / TWO_PI).round() as i64).collect())
        .collect();
    let phase = wrapped
        .iter()
        .zip(&residual_l)
        .map(|(psi, l)| psi.iter().zip(l).map(|(p, &k)| p + TWO_PI * k as f64).collect())
        .collect();
    UnwrappedField {
        phase,
        residual_l,
        method,
        prealigned,
        sum_abs_k,
    }
}

/// Integrates wrapped differences along frequency, direction by direction.
pub fn unwrap_frequency(field: &PhaseField) -> Result<UnwrappedField> {
    if field.num_bins() == 0 {
        return Err(Error::ShapeMismatch("field has no bins".into()));
    }
    let approx: Vec<Vec<f64>> = field
        .wrapped
        .iter()
        .map(|psi| {
            let mut phi = Vec::with_capacity(psi.len());
            phi.push(psi[0]);
            for f in 1..psi.len() {
                phi.push(phi[f - 1] + wrap(psi[f] - psi[f - 1]));
            }
            phi
        })
        .collect();
    Ok(finish(&field.wrapped, &approx, UnwrapMethod::FreqOnly, false, 0))
}

/// Integer datum and weight of the edge from phase `a` to phase `b`.
///
/// `L_b - L_a = g + K`, where `g` is the count that makes the corrected
/// difference equal the wrapped one.
fn edge_datum(a: f64, b: f64) -> (i64, f64) {
    let raw = b - a;
    let g = ((wrap(raw) - raw) / TWO_PI).round() as i64;
    // distance of the raw difference to the nearest odd multiple of pi
    let w = if wrap(raw + PI).abs() < WRAP_TIE_GUARD { WEIGHT_FLOOR } else { 1.0 };
    (g, w)
}

fn check_hull(field: &PhaseField, hull: &HullTriangulation) -> Result<()> {
    if hull.num_vertices() != field.num_directions() {
        return Err(Error::ShapeMismatch(format!(
            "hull has {} vertices but the field has {} directions",
            hull.num_vertices(),
            field.num_directions()
        )));
    }
    if field.num_bins() == 0 {
        return Err(Error::ShapeMismatch("field has no bins".into()));
    }
    Ok(())
}

/// Adds `2 pi f shift_i / fft_size` to every bin, which advances direction `i` by `shift_i` samples.
fn apply_linear_phase(field: &PhaseField, shifts: &[f64], sign: f64) -> Vec<Vec<f64>> {
    field
        .wrapped
        .iter()
        .zip(shifts)
        .map(|(psi, &s)| {
            psi.iter()
                .enumerate()
                .map(|(f, &p)| p + sign * TWO_PI * f as f64 * s / field.fft_size as f64)
                .collect()
        })
        .collect()
}

fn spherical_base(hull: &HullTriangulation) -> Result<DifferenceGraph> {
    let m = hull.edges.len();
    build_intra_graph(hull, &vec![0; m], &vec![1.0; m])
}

/// Joint unwrapping over the sphere-by-frequency graph.
///
/// `prealign` holds per-direction advances in samples; the matching linear
/// phase is removed before unwrapping and restored afterwards.
pub fn unwrap_joint(field: &PhaseField, hull: &HullTriangulation, prealign: Option<&[f64]>) -> Result<UnwrappedField> {
    check_hull(field, hull)?;
    let n = field.num_directions();
    let num_f = field.num_bins();
    if let Some(s) = prealign {
        if s.len() != n {
            return Err(Error::ShapeMismatch(format!("{} alignment shifts for {n} directions", s.len())));
        }
    }
    let work: Vec<Vec<f64>> = match prealign {
        Some(s) => apply_linear_phase(field, s, 1.0).into_iter().map(|r| r.into_iter().map(wrap).collect()).collect(),
        None => field.wrapped.clone(),
    };
    let base = spherical_base(hull)?;
    let spherical: Vec<Vec<(i64, f64)>> = (0..num_f)
        .map(|f| base.edges.iter().map(|e| edge_datum(work[e.u][f], work[e.v][f])).collect())
        .collect();
    let freq: Vec<Vec<(i64, f64)>> = (0..num_f - 1)
        .map(|f| (0..n).map(|i| edge_datum(work[i][f], work[i][f + 1])).collect())
        .collect();
    let graph = stack_frequencies(&base, num_f, &spherical, &freq)?;
    let sol = solve_l1(&graph, Formulation::Edgelist)?;
    let sum_abs_k = sol.residuals.iter().map(|k| k.abs()).sum();
    let mut approx: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..num_f).map(|f| work[i][f] + TWO_PI * sol.node_values[f * n + i] as f64).collect())
        .collect();
    if let Some(s) = prealign {
        let restored = apply_linear_phase(
            &PhaseField {
                wrapped: approx,
                bin_freqs_hz: field.bin_freqs_hz.clone(),
                fft_size: field.fft_size,
            },
            s,
            -1.0,
        );
        approx = restored;
    }
    Ok(finish(&field.wrapped, &approx, UnwrapMethod::Joint, prealign.is_some(), sum_abs_k))
}

/// Integer `c` minimising `sum_i |cur_i + 2 pi c - prev_i|`; ties go to the smallest |c|, then to negative `c`.
pub fn concatenation_offset(prev: &[f64], cur: &[f64]) -> i64 {
    let cost = |c: i64| -> f64 { prev.iter().zip(cur).map(|(p, q)| (q + TWO_PI * c as f64 - p).abs()).sum() };
    let mut gaps: Vec<f64> = prev.iter().zip(cur).map(|(p, q)| (p - q) / TWO_PI).collect();
    gaps.sort_by(f64::total_cmp);
    if gaps.is_empty() {
        return 0;
    }
    // the convex cost is flat between the two middle gaps
    let lo = gaps[(gaps.len() - 1) / 2].floor() as i64 - 1;
    let hi = gaps[gaps.len() / 2].ceil() as i64 + 1;
    let mut best = (f64::INFINITY, 0i64);
    for c in lo..=hi {
        let v = cost(c);
        let better = v < best.0 - 1e-12 * v.abs().max(1.0)
            || ((v - best.0).abs() <= 1e-12 * v.abs().max(1.0) && (c.abs(), c) < (best.1.abs(), best.1));
        if better {
            best = (v, c);
        }
    }
    best.1
}

/// Solves each frequency over the sphere alone, then stitches neighbouring
/// frequencies with the offset that minimises the total phase jump.
pub fn unwrap_spherical_sim(field: &PhaseField, hull: &HullTriangulation) -> Result<UnwrappedField> {
    check_hull(field, hull)?;
    let n = field.num_directions();
    let num_f = field.num_bins();
    let base = spherical_base(hull)?;
    let per_freq: Vec<(Vec<f64>, i64)> = par::map(num_f, |f| -> Result<(Vec<f64>, i64)> {
        let mut g = base.clone();
        for e in g.edges.iter_mut() {
            let (gamma, w) = edge_datum(field.wrapped[e.u][f], field.wrapped[e.v][f]);
            e.gamma = gamma;
            e.weight = w;
        }
        let sol = solve_l1(&g, Formulation::Edgelist)?;
        let phi = (0..n).map(|i| field.wrapped[i][f] + TWO_PI * sol.node_values[i] as f64).collect();
        Ok((phi, sol.residuals.iter().map(|k| k.abs()).sum()))
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(num_f);
    let mut sum_abs_k = 0;
    for (f, (mut phi, k)) in per_freq.into_iter().enumerate() {
        sum_abs_k += k;
        if f > 0 {
            let c = concatenation_offset(&columns[f - 1], &phi);
            phi.iter_mut().for_each(|x| *x += TWO_PI * c as f64);
        }
        columns.push(phi);
    }
    let approx: Vec<Vec<f64>> = (0..n).map(|i| columns.iter().map(|col| col[i]).collect()).collect();
    Ok(finish(&field.wrapped, &approx, UnwrapMethod::SphericalOnly, false, sum_abs_k))
}

/// Phase delay `-phi / omega` in seconds for every bin above DC; empty rows for a DC-only field.
pub fn phase_delay(u: &UnwrappedField, bin_freqs_hz: &[f64]) -> Result<Vec<Vec<f64>>> {
    if u.phase.iter().any(|phi| phi.len() != bin_freqs_hz.len()) {
        return Err(Error::ShapeMismatch(format!("every direction needs {} bins", bin_freqs_hz.len())));
    }
    Ok(u.phase
        .iter()
        .map(|phi| phi.iter().zip(bin_freqs_hz).skip(1).map(|(p, f)| -p / (TWO_PI * f)).collect())
        .collect())
}

/// Per-direction alignment advances in original samples from fine-grid arrival times.
pub fn prealign_shifts(tau: &[f64], factor: usize) -> Vec<f64> {
    let min = tau.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    tau.iter().map(|t| (t - min) / factor as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(phi: &[Vec<f64>], fft_size: usize) -> PhaseField {
        let f = phi[0].len();
        PhaseField::new(
            phi.iter().map(|r| r.iter().map(|&x| wrap(x)).collect()).collect(),
            (0..f).map(|k| k as f64 * 44_100.0 / fft_size as f64).collect(),
            fft_size,
        )
        .unwrap()
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap(0.0), 0.0);
        assert_eq!(wrap(PI), -PI);
        assert!((wrap(1.5 * PI) + 0.5 * PI).abs() < 1e-15);
        assert_eq!(wrap(-PI), -PI);
        for k in -5..=5 {
            let x = 0.3 + TWO_PI * k as f64;
            assert!((wrap(x) - 0.3).abs() < 1e-12);
        }
        for x in [-1e6, -7.0, -PI - 1e-12, PI - 1e-9, 1e6] {
            let y = wrap(x);
            assert!((-PI..PI).contains(&y));
        }
    }

    #[test]
    fn frequency_unwrap_examples() {
        let lin: Vec<f64> = (0..20).map(|f| -0.4 * PI * f as f64).collect();
        let u = unwrap_frequency(&field(std::slice::from_ref(&lin), 38)).unwrap();
        for (a, b) in u.phase[0].iter().zip(&lin) {
            assert!((a - b).abs() < 1e-9);
        }

        let constant = field(&[vec![0.7; 5]], 8);
        let u = unwrap_frequency(&constant).unwrap();
        assert_eq!(u.phase[0], constant.wrapped[0]);
        assert!(u.residual_l[0].iter().all(|&l| l == 0));

        let psi = PhaseField::new(vec![vec![0.0, 3.0, 6.0 - TWO_PI]], vec![0.0, 1.0, 2.0], 4).unwrap();
        let u = unwrap_frequency(&psi).unwrap();
        assert!((u.phase[0][2] - 6.0).abs() < 1e-12);
        assert!(unwrap_frequency(&PhaseField::new(vec![vec![]], vec![], 1).unwrap()).is_err());
    }

    #[test]
    fn edge_datum_matches_wrapped_difference() {
        for (a, b) in [(0.1, 0.2), (3.0, -3.0), (-3.0, 3.0), (2.0, -2.5), (-PI, 0.5)] {
            let (g, w) = edge_datum(a, b);
            // the corrected difference equals the wrapped one
            assert!(((b - a) + TWO_PI * g as f64 - wrap(b - a)).abs() < 1e-12);
            assert_eq!(w, 1.0);
        }
        assert_eq!(edge_datum(-PI / 2.0, PI / 2.0).1, WEIGHT_FLOOR);
        assert_eq!(edge_datum(0.0, -PI).1, WEIGHT_FLOOR);
    }

    #[test]
    fn offset_ties_prefer_small_magnitude() {
        assert_eq!(concatenation_offset(&[0.0], &[0.0]), 0);
        assert_eq!(concatenation_offset(&[TWO_PI * 3.0], &[0.0]), 3);
        // equidistant from c = 0 and c = 1
        assert_eq!(concatenation_offset(&[PI], &[0.0]), 0);
        assert_eq!(concatenation_offset(&[-PI], &[0.0]), 0);
        assert_eq!(concatenation_offset(&[3.0 * PI], &[0.0]), 1);
    }

    #[test]
    fn phase_delay_of_linear_phase() {
        let fft_size = 64;
        let tau = 3.0;
        let phi: Vec<f64> = (0..33).map(|f| -TWO_PI * f as f64 * tau / fft_size as f64).collect();
        let fld = field(std::slice::from_ref(&phi), fft_size);
        let u = UnwrappedField {
            phase: vec![phi.clone()],
            residual_l: vec![vec![0; 33]],
            method: UnwrapMethod::FreqOnly,
            prealigned: false,
            sum_abs_k: 0,
        };
        let d = phase_delay(&u, &fld.bin_freqs_hz).unwrap();
        assert!(d[0].iter().all(|x| (x - tau / 44_100.0).abs() < 1e-15));
        let doubled = UnwrappedField {
            phase: vec![phi.iter().map(|x| 2.0 * x).collect()],
            ..u
        };
        let d2 = phase_delay(&doubled, &fld.bin_freqs_hz).unwrap();
        assert!(d2[0].iter().all(|x| (x - 2.0 * tau / 44_100.0).abs() < 1e-15));
    }

    #[test]
    fn dc_only_field_is_left_as_is() {
        let fld = PhaseField::new(vec![vec![0.5], vec![-3.0]], vec![0.0], 64).unwrap();
        let u = unwrap_frequency(&fld).unwrap();
        assert_eq!(u.phase, fld.wrapped);
        assert!(phase_delay(&u, &fld.bin_freqs_hz).unwrap().iter().all(Vec::is_empty));
        assert!(phase_delay(&u, &[0.0, 1.0]).is_err());
    }
}
