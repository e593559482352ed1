//! Real orthonormal spherical harmonics without the Condon-Shortley phase.
//!
//! Coefficient `(l, m)` lives at index `l² + l + m`. Negative orders carry
//! `sin(|m|φ)` and positive orders `cos(mφ)`, both scaled by √2.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hrir::Direction;

/// Regularization used by the evaluation experiments.
pub const DEFAULT_REG: f64 = 1e-5;

/// Number of coefficients up to and including `order`.
pub fn basis_size(order: usize) -> usize {
    (order + 1) * (order + 1)
}

/// Index of coefficient `(l, m)`.
pub fn index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Coefficients of a multi-channel field, one row per basis function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShField {
    pub order: usize,
    pub coeffs: Vec<Vec<f64>>,
}

impl ShField {
    pub fn num_channels(&self) -> usize {
        self.coeffs.first().map_or(0, Vec::len)
    }
}

/// Basis values at one direction.
pub fn sh_basis(direction: &Direction, order: usize) -> Vec<f64> {
    let [x, y, z] = direction.unit_vector();
    let cos_t = z.clamp(-1.0, 1.0);
    let sin_t = (x * x + y * y).sqrt();
    let phi = y.atan2(x);
    let n = order + 1;
    // fully normalized associated Legendre values, p[l][m] for m <= l
    let mut p = vec![vec![0.0; n]; n];
    p[0][0] = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
    for m in 1..n {
        let mf = m as f64;
        p[m][m] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_t * p[m - 1][m - 1];
    }
    for m in 0..n {
        let mf = m as f64;
        if m + 1 < n {
            p[m + 1][m] = (2.0 * mf + 3.0).sqrt() * cos_t * p[m][m];
        }
        for l in m + 2..n {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            p[l][m] = a * (cos_t * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    let mut out = vec![0.0; basis_size(order)];
    for l in 0..n {
        out[index(l, 0)] = p[l][0];
        for m in 1..=l {
            let s = std::f64::consts::SQRT_2 * p[l][m];
            let mphi = m as f64 * phi;
            out[index(l, m as i64)] = s * mphi.cos();
            out[index(l, -(m as i64))] = s * mphi.sin();
        }
    }
    out
}

/// Design matrix with one row per direction.
pub fn sh_matrix(directions: &[Direction], order: usize) -> DMatrix<f64> {
    let cols = basis_size(order);
    let mut y = DMatrix::zeros(directions.len(), cols);
    for (i, d) in directions.iter().enumerate() {
        for (j, v) in sh_basis(d, order).into_iter().enumerate() {
            y[(i, j)] = v;
        }
    }
    y
}

fn to_matrix(values: &[Vec<f64>], rows: usize) -> Result<DMatrix<f64>> {
    if values.len() != rows {
        return Err(Error::LengthMismatch { expected: rows, got: values.len() });
    }
    let c = values.first().map_or(0, Vec::len);
    if values.iter().any(|r| r.len() != c) {
        return Err(Error::ShapeMismatch("ragged value rows".into()));
    }
    Ok(DMatrix::from_fn(rows, c, |i, j| values[i][j]))
}

/// Regularized least-squares fit `(YᵀY + reg·I)⁻¹ Yᵀ values`.
pub fn sh_encode(values: &[Vec<f64>], directions: &[Direction], order: usize, reg: f64) -> Result<ShField> {
    if !(reg >= 0.0) || !reg.is_finite() {
        return Err(Error::InvalidConfig(format!("regularization must be nonnegative, got {reg}")));
    }
    let cols = basis_size(order);
    if reg == 0.0 && directions.len() < cols {
        return Err(Error::RankDeficient { rows: directions.len(), cols });
    }
    let v = to_matrix(values, directions.len())?;
    let y = sh_matrix(directions, order);
    let yt = y.transpose();
    let gram = &yt * &y + DMatrix::identity(cols, cols) * reg;
    let rhs = &yt * &v;
    let chol = gram.cholesky().ok_or(Error::RankDeficient { rows: directions.len(), cols })?;
    let mut x = chol.solve(&rhs);
    // one step of iterative refinement keeps the normal-equation residual tiny
    let r = &rhs - (&yt * &y + DMatrix::identity(cols, cols) * reg) * &x;
    x += chol.solve(&r);
    let coeffs = (0..cols).map(|i| x.row(i).iter().copied().collect()).collect();
    Ok(ShField { order, coeffs })
}

/// Evaluates the field at the given directions, one row per direction.
pub fn sh_decode(field: &ShField, directions: &[Direction]) -> Vec<Vec<f64>> {
    let c = field.num_channels();
    let coeffs = DMatrix::from_fn(field.coeffs.len(), c, |i, j| field.coeffs[i][j]);
    let out = sh_matrix(directions, field.order) * coeffs;
    (0..directions.len()).map(|i| out.row(i).iter().copied().collect()).collect()
}

/// Convenience for a single scalar per direction.
pub fn encode_scalar(values: &[f64], directions: &[Direction], order: usize, reg: f64) -> Result<ShField> {
    let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
    sh_encode(&rows, directions, order, reg)
}

/// Decodes a single-channel field.
pub fn decode_scalar(field: &ShField, directions: &[Direction]) -> Vec<f64> {
    sh_decode(field, directions).into_iter().map(|r| r[0]).collect()
}
