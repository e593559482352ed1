//! Signal-processing primitives shared by the TOA and unwrapping pipelines.
//!
//! All transforms run in double precision through `rustfft`. Lags are reported
//! in samples of whatever rate the inputs are at; the TOA pipeline feeds
//! oversampled signals so its lags are fine-grid samples.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// In-place forward transform.
pub fn fft(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

/// In-place inverse transform, normalized by 1/n.
pub fn ifft(buf: &mut [Complex64]) {
    let n = buf.len();
    plan(n, true).process(buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|x| *x *= scale);
}

fn padded(signal: &[f64], len: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (b, &x) in buf.iter_mut().zip(signal) {
        b.re = x;
    }
    buf
}

pub fn energy(signal: &[f64]) -> f64 {
    signal.iter().map(|x| x * x).sum()
}

/// Band-limited interpolation by zero-padding the spectrum.
///
/// Samples at indices `factor * t` reproduce the input. For even lengths the
/// Nyquist bin is split evenly between the positive and negative halves so
/// the output stays real.
pub fn oversample(signal: &[f64], factor: usize) -> Result<Vec<f64>> {
    let t = signal.len();
    if t == 0 {
        return Err(Error::EmptySignal);
    }
    if factor <= 1 {
        return Ok(signal.to_vec());
    }
    let l = factor * t;
    let mut x = padded(signal, t);
    fft(&mut x);

    let mut y = vec![Complex64::new(0.0, 0.0); l];
    let half = t / 2;
    if t.is_multiple_of(2) {
        y[..half].copy_from_slice(&x[..half]);
        for k in 1..half {
            y[l - k] = x[t - k];
        }
        y[half] = x[half] * 0.5;
        y[l - half] = x[half] * 0.5;
    } else {
        y[..=half].copy_from_slice(&x[..=half]);
        for k in 1..=half {
            y[l - k] = x[t - k];
        }
    }
    plan(l, true).process(&mut y);
    let scale = 1.0 / t as f64;
    Ok(y.into_iter().map(|c| c.re * scale).collect())
}

/// Peak of a normalized cross-correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    /// Positive when the second signal arrives later.
    pub lag: i64,
    /// Normalized correlation at `lag`, in [-1, 1].
    pub peak: f64,
}

/// Relative slack under which two correlation values count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Precomputed spectra for repeated pairwise correlation of a fixed signal set.
///
/// Every signal is normalized to unit energy and transformed once at a
/// length that makes the circular correlation equal to the linear one.
pub struct Correlator {
    len: usize,
    fft_len: usize,
    normalized: Vec<Vec<f64>>,
    spectra: Vec<Vec<Complex64>>,
}

impl Correlator {
    pub fn new(signals: &[Vec<f64>]) -> Result<Self> {
        let len = signals.iter().map(Vec::len).max().ok_or(Error::EmptySignal)?;
        if len == 0 {
            return Err(Error::EmptySignal);
        }
        let fft_len = (2 * len).next_power_of_two();
        let mut normalized = Vec::with_capacity(signals.len());
        let mut spectra = Vec::with_capacity(signals.len());
        for s in signals {
            let e = energy(s);
            if !(e > 0.0) {
                return Err(Error::ZeroEnergySignal);
            }
            let scale = 1.0 / e.sqrt();
            let mut n: Vec<f64> = s.iter().map(|x| x * scale).collect();
            n.resize(len, 0.0);
            let mut spec = padded(&n, fft_len);
            fft(&mut spec);
            normalized.push(n);
            spectra.push(spec);
        }
        Ok(Self {
            len,
            fft_len,
            normalized,
            spectra,
        })
    }

    pub fn len(&self) -> usize {
        self.normalized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normalized.is_empty()
    }

    /// Lag of signal `b` relative to signal `a`; `max_lag` defaults to full overlap.
    pub fn lag(&self, a: usize, b: usize, max_lag: Option<usize>) -> CorrelationResult {
        let max_lag = max_lag.unwrap_or(self.len - 1).min(self.len - 1);
        let mut r: Vec<Complex64> = self.spectra[a]
            .iter()
            .zip(&self.spectra[b])
            .map(|(x, y)| x.conj() * y)
            .collect();
        ifft(&mut r);
        let at = |lag: i64| -> f64 {
            let idx = if lag >= 0 {
                lag as usize
            } else {
                self.fft_len - (-lag) as usize
            };
            r[idx].re
        };
        let best = (-(max_lag as i64)..=max_lag as i64)
            .map(at)
            .fold(f64::NEG_INFINITY, f64::max);
        let tol = TIE_TOLERANCE * best.abs().max(1e-300);
        let lag = std::iter::once(0)
            .chain((1..=max_lag as i64).flat_map(|k| [-k, k]))
            .find(|&l| at(l) >= best - tol)
            .unwrap_or(0);
        CorrelationResult {
            lag,
            peak: direct_correlation(&self.normalized[a], &self.normalized[b], lag),
        }
    }
}

/// `sum_t a[t] * b[t + lag]` with zero padding outside both signals.
fn direct_correlation(a: &[f64], b: &[f64], lag: i64) -> f64 {
    a.iter()
        .enumerate()
        .filter_map(|(t, &x)| {
            let j = t as i64 + lag;
            (j >= 0 && (j as usize) < b.len()).then(|| x * b[j as usize])
        })
        .sum()
}

/// Lag maximizing the linear cross-correlation of unit-energy `a` and `b`.
///
/// Ties go to the smallest |lag|, then to the negative lag.
pub fn xcorr_lag(a: &[f64], b: &[f64], max_lag: Option<usize>) -> Result<CorrelationResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySignal);
    }
    let c = Correlator::new(&[a.to_vec(), b.to_vec()])?;
    Ok(c.lag(0, 1, max_lag))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimumPhase {
    pub samples: Vec<f64>,
    /// Bins whose magnitude was floored at 1e-12 of the peak before the log.
    pub floored_bins: usize,
}

/// Minimum-phase counterpart of `h` via real-cepstrum folding.
///
/// The cepstrum is computed at a transform length of at least 8·T and the
/// result is truncated back to T samples.
pub fn minimum_phase(h: &[f64]) -> Result<MinimumPhase> {
    let t = h.len();
    if t == 0 {
        return Err(Error::EmptySignal);
    }
    if !(energy(h) > 0.0) {
        return Err(Error::ZeroEnergySignal);
    }
    let n = (8 * t).next_power_of_two();
    let mut spec = padded(h, n);
    fft(&mut spec);
    let peak = spec.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let floor = 1e-12 * peak;
    let mut floored_bins = 0;
    let mut cep: Vec<Complex64> = spec
        .iter()
        .map(|c| {
            let m = c.norm();
            let m = if m < floor {
                floored_bins += 1;
                floor
            } else {
                m
            };
            Complex64::new(m.ln(), 0.0)
        })
        .collect();
    if floored_bins > 0 {
        log::warn!("minimum_phase: {floored_bins} spectral bins floored at 1e-12 of peak");
    }
    ifft(&mut cep);
    let half = n / 2;
    for (k, c) in cep.iter_mut().enumerate() {
        c.im = 0.0;
        if k > 0 && k < half {
            c.re *= 2.0;
        } else if k > half {
            c.re = 0.0;
        }
    }
    fft(&mut cep);
    for c in cep.iter_mut() {
        *c = c.exp();
    }
    ifft(&mut cep);
    Ok(MinimumPhase {
        samples: cep[..t].iter().map(|c| c.re).collect(),
        floored_bins,
    })
}

/// Shifts `h` by `shift` samples: positive values advance, so the output is h[t + shift].
///
/// The shift is applied as a linear phase at a transform length of at least
/// 2·T and the result truncated to T.
pub fn fractional_delay(h: &[f64], shift: f64) -> Result<Vec<f64>> {
    let t = h.len();
    if t == 0 {
        return Err(Error::EmptySignal);
    }
    if !(shift.abs() < t as f64 / 2.0) {
        return Err(Error::ShiftTooLarge { shift, len: t });
    }
    if shift == 0.0 {
        return Ok(h.to_vec());
    }
    let n = (2 * t).next_power_of_two();
    let mut x = padded(h, n);
    fft(&mut x);
    let half = n / 2;
    for (k, c) in x.iter_mut().enumerate() {
        if k == half {
            *c *= (PI * shift).cos();
            continue;
        }
        let kk = if k < half { k as f64 } else { k as f64 - n as f64 };
        let w = 2.0 * PI * kk / n as f64;
        *c *= Complex64::from_polar(1.0, w * shift);
    }
    ifft(&mut x);
    Ok(x[..t].iter().map(|c| c.re).collect())
}

/// One-sided spectrum of a real impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub magnitude_db: Vec<f64>,
    /// Four-quadrant phase in [-π, π).
    pub wrapped_phase: Vec<f64>,
    pub bin_freqs_hz: Vec<f64>,
}

pub fn spectrum(h: &[f64], fft_size: usize, sample_rate_hz: f64) -> Result<Spectrum> {
    if fft_size < h.len() || fft_size == 0 {
        return Err(Error::BadFftSize {
            fft_size,
            len: h.len(),
        });
    }
    let mut x = padded(h, fft_size);
    fft(&mut x);
    let bins = fft_size / 2 + 1;
    // Bins that are real for real input.
    x[0].im = 0.0;
    if fft_size.is_multiple_of(2) {
        x[fft_size / 2].im = 0.0;
    }
    let mut magnitude_db = Vec::with_capacity(bins);
    let mut wrapped_phase = Vec::with_capacity(bins);
    for c in &x[..bins] {
        magnitude_db.push(20.0 * c.norm().max(1e-12).log10());
        let mut p = c.im.atan2(c.re);
        if p >= PI {
            p -= 2.0 * PI;
        }
        wrapped_phase.push(p);
    }
    let bin_freqs_hz = (0..bins)
        .map(|k| k as f64 * sample_rate_hz / fft_size as f64)
        .collect();
    Ok(Spectrum {
        magnitude_db,
        wrapped_phase,
        bin_freqs_hz,
    })
}

/// Magnitudes of the length-`n` DFT, used by tests and the LSD metric.
pub fn magnitudes(h: &[f64], n: usize) -> Vec<f64> {
    let mut x = padded(h, n);
    fft(&mut x);
    x.iter().map(|c| c.norm()).collect()
}
