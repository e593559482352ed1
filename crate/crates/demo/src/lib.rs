//! WebAssembly bindings for the browser demo. Arrays cross the boundary as
//! `Float64Array`s; errors become JS exceptions carrying the message.

pub mod ops;

use hrtf_graph::toa::{Algorithm, Weighting};
use wasm_bindgen::prelude::*;

fn js_err(e: hrtf_graph::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn algorithm(name: &str) -> Result<Algorithm, JsError> {
    match name {
        "simp" => Ok(Algorithm::Simp),
        "edgy" => Ok(Algorithm::Edgy),
        "ls" => Ok(Algorithm::Ls),
        other => Err(JsError::new(&format!("unknown algorithm {other}"))),
    }
}

fn weighting(name: &str) -> Result<Weighting, JsError> {
    match name {
        "none" => Ok(Weighting::None),
        "exp" => Ok(Weighting::Exp),
        "corr" => Ok(Weighting::Corr),
        other => Err(JsError::new(&format!("unknown weighting {other}"))),
    }
}

#[wasm_bindgen]
pub struct ItdMap(ops::ItdMap);

#[wasm_bindgen]
impl ItdMap {
    pub fn az_deg(&self) -> Vec<f64> {
        self.0.az_deg.clone()
    }

    pub fn colat_deg(&self) -> Vec<f64> {
        self.0.colat_deg.clone()
    }

    pub fn truth_us(&self) -> Vec<f64> {
        self.0.truth_us.clone()
    }

    pub fn estimate_us(&self) -> Vec<f64> {
        self.0.estimate_us.clone()
    }

    pub fn mae_us(&self) -> f64 {
        self.0.mae_us
    }

    pub fn measured_snr_db(&self) -> f64 {
        self.0.measured_snr_db
    }
}

/// Estimates the ITD map of a synthetic head. A non-finite `snr_db` means no added noise.
#[wasm_bindgen]
pub fn itd_map(num_dirs: usize, algo: &str, weight: &str, use_cross: bool, snr_db: f64, seed: u32) -> Result<ItdMap, JsError> {
    let snr = snr_db.is_finite().then_some(snr_db);
    ops::itd_map(num_dirs, algorithm(algo)?, weighting(weight)?, use_cross, snr, seed as u64).map(ItdMap).map_err(js_err)
}

#[wasm_bindgen]
pub struct OutlierDemo(ops::OutlierDemo);

#[wasm_bindgen]
impl OutlierDemo {
    pub fn az_deg(&self) -> Vec<f64> {
        self.0.az_deg.clone()
    }

    pub fn colat_deg(&self) -> Vec<f64> {
        self.0.colat_deg.clone()
    }

    pub fn l1_error_us(&self) -> Vec<f64> {
        self.0.l1_error_us.clone()
    }

    pub fn l2_error_us(&self) -> Vec<f64> {
        self.0.l2_error_us.clone()
    }

    pub fn l1_max_us(&self) -> f64 {
        self.0.l1_max_us()
    }

    pub fn l2_max_us(&self) -> f64 {
        self.0.l2_max_us()
    }

    /// Endpoints of the corrupted edge as `[i, j]`.
    pub fn corrupted_edge(&self) -> Vec<u32> {
        vec![self.0.corrupted_edge.0 as u32, self.0.corrupted_edge.1 as u32]
    }
}

/// Adds an `outlier_samples` error to one neighbour lag and solves with L1 and L2.
#[wasm_bindgen]
pub fn outlier_demo(num_dirs: usize, outlier_samples: i32, seed: u32) -> Result<OutlierDemo, JsError> {
    ops::outlier_demo(num_dirs, outlier_samples as i64, seed as u64).map(OutlierDemo).map_err(js_err)
}

#[wasm_bindgen]
pub struct UnwrapComparison(ops::UnwrapComparison);

#[wasm_bindgen]
impl UnwrapComparison {
    pub fn freqs_hz(&self) -> Vec<f64> {
        self.0.freqs_hz.clone()
    }

    pub fn truth(&self) -> Vec<f64> {
        self.0.truth.clone()
    }

    pub fn wrapped(&self) -> Vec<f64> {
        self.0.wrapped.clone()
    }

    pub fn num_methods(&self) -> usize {
        self.0.methods.len()
    }

    pub fn method_name(&self, i: usize) -> String {
        self.0.methods[i].name.to_string()
    }

    pub fn wrong_cells(&self, i: usize) -> usize {
        self.0.methods[i].wrong_cells
    }

    pub fn sum_abs_k(&self, i: usize) -> f64 {
        self.0.methods[i].sum_abs_k as f64
    }

    pub fn curve(&self, i: usize) -> Vec<f64> {
        self.0.methods[i].curve.clone()
    }

    pub fn total_cells(&self) -> usize {
        self.0.total_cells
    }
}

/// Unwraps a noisy pure-delay field with the frequency-only, spherical-only and joint methods.
#[wasm_bindgen]
pub fn unwrap_comparison(num_dirs: usize, fft_size: usize, radius_m: f64, noise_rad: f64, seed: u32, show: usize) -> Result<UnwrapComparison, JsError> {
    ops::unwrap_comparison(num_dirs, fft_size, radius_m, noise_rad, seed as u64, show).map(UnwrapComparison).map_err(js_err)
}
