//! HRIR sets and the on-disk container (`meta.json` + `data.f32le`).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const UNIT_TOLERANCE: f64 = 1e-9;
const DUPLICATE_TOLERANCE_RAD: f64 = 1e-6;

/// A measurement direction on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    unit: [f64; 3],
}

impl Direction {
    /// Wraps an existing unit vector, rejecting anything off the sphere.
    pub fn new(unit: [f64; 3]) -> Result<Self> {
        let norm = norm3(unit);
        if (norm - 1.0).abs() > UNIT_TOLERANCE || !norm.is_finite() {
            return Err(Error::NonUnitDirection { index: 0, norm });
        }
        Ok(Self { unit })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn from_vector(v: [f64; 3]) -> Result<Self> {
        let norm = norm3(v);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NonUnitDirection { index: 0, norm });
        }
        Ok(Self {
            unit: [v[0] / norm, v[1] / norm, v[2] / norm],
        })
    }

    /// Azimuth counterclockwise from +x, colatitude from +z, both in degrees.
    pub fn from_az_colat_deg(az_deg: f64, colat_deg: f64) -> Self {
        let (az, colat) = (az_deg.to_radians(), colat_deg.to_radians());
        let unit = [colat.sin() * az.cos(), colat.sin() * az.sin(), colat.cos()];
        Self::from_vector(unit).expect("spherical coordinates give a unit vector")
    }

    pub fn unit_vector(&self) -> [f64; 3] {
        self.unit
    }

    pub fn x(&self) -> f64 {
        self.unit[0]
    }

    pub fn y(&self) -> f64 {
        self.unit[1]
    }

    pub fn z(&self) -> f64 {
        self.unit[2]
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.unit[0] * other.unit[0] + self.unit[1] * other.unit[1] + self.unit[2] * other.unit[2]
    }

    /// Great-circle angle in radians.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        self.dot(other).clamp(-1.0, 1.0).acos()
    }

    /// Reflection through the plane y = 0.
    pub fn mirrored_y(&self) -> Direction {
        Direction {
            unit: [self.unit[0], -self.unit[1], self.unit[2]],
        }
    }

    /// (azimuth, colatitude) in degrees, azimuth in [0, 360).
    pub fn az_colat_deg(&self) -> (f64, f64) {
        let [x, y, z] = self.unit;
        let mut az = y.atan2(x).to_degrees();
        if az < 0.0 {
            az += 360.0;
        }
        if az >= 360.0 {
            az -= 360.0;
        }
        (az, z.clamp(-1.0, 1.0).acos().to_degrees())
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EarSelector {
    Left,
    Right,
    Both,
}

/// HRIRs for both ears on N directions, T samples each.
#[derive(Debug, Clone, PartialEq)]
pub struct HrirSet {
    pub name: String,
    pub sample_rate_hz: f64,
    pub directions: Vec<Direction>,
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
}

impl HrirSet {
    pub fn new(
        name: impl Into<String>,
        sample_rate_hz: f64,
        directions: Vec<Direction>,
        left: Vec<Vec<f64>>,
        right: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let set = Self {
            name: name.into(),
            sample_rate_hz,
            directions,
            left,
            right,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.directions.len();
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::MalformedMeta(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if n < 4 {
            return Err(Error::ShapeMismatch(format!("need at least 4 directions, got {n}")));
        }
        if self.left.len() != n || self.right.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{n} directions but {} left / {} right responses",
                self.left.len(),
                self.right.len()
            )));
        }
        let t = self.num_samples();
        if t < 8 {
            return Err(Error::ShapeMismatch(format!("need at least 8 samples, got {t}")));
        }
        if self.left.iter().chain(&self.right).any(|h| h.len() != t) {
            return Err(Error::ShapeMismatch("ragged impulse responses".into()));
        }
        for (index, d) in self.directions.iter().enumerate() {
            let norm = norm3(d.unit);
            if (norm - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::NonUnitDirection { index, norm });
            }
        }
        let cos_tol = DUPLICATE_TOLERANCE_RAD.cos();
        for i in 0..n {
            for j in i + 1..n {
                if self.directions[i].dot(&self.directions[j]) > cos_tol {
                    return Err(Error::DuplicateDirection(i, j));
                }
            }
        }
        Ok(())
    }

    pub fn num_directions(&self) -> usize {
        self.directions.len()
    }

    pub fn num_samples(&self) -> usize {
        self.left.first().map_or(0, Vec::len)
    }

    /// Responses of one ear. `Both` is not a single ear and falls back to left.
    pub fn ear(&self, ear: EarSelector) -> &[Vec<f64>] {
        match ear {
            EarSelector::Right => &self.right,
            EarSelector::Left | EarSelector::Both => &self.left,
        }
    }

    /// Index of the direction closest to `target`.
    pub fn nearest_direction(&self, target: &Direction) -> usize {
        self.directions
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.dot(target).total_cmp(&b.1.dot(target)))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    name: String,
    sample_rate_hz: f64,
    num_directions: usize,
    num_samples: usize,
    directions: Vec<[f64; 3]>,
}

pub const META_FILE: &str = "meta.json";
pub const DATA_FILE: &str = "data.f32le";

/// Reads a container directory.
pub fn load_container(path: impl AsRef<Path>) -> Result<HrirSet> {
    let dir = path.as_ref();
    let meta_path = dir.join(META_FILE);
    let data_path = dir.join(DATA_FILE);
    for p in [&meta_path, &data_path] {
        if !p.is_file() {
            return Err(Error::MissingFile(p.clone()));
        }
    }
    let meta: Meta = serde_json::from_slice(&fs::read(&meta_path)?)
        .map_err(|e| Error::MalformedMeta(e.to_string()))?;
    if meta.directions.len() != meta.num_directions {
        return Err(Error::MalformedMeta(format!(
            "num_directions = {} but {} directions listed",
            meta.num_directions,
            meta.directions.len()
        )));
    }
    let (n, t) = (meta.num_directions, meta.num_samples);
    let bytes = fs::read(&data_path)?;
    let expected = n * 2 * t * 4;
    if bytes.len() != expected {
        return Err(Error::ShapeMismatch(format!(
            "{DATA_FILE} holds {} bytes, expected {expected}",
            bytes.len()
        )));
    }

    let mut directions = Vec::with_capacity(n);
    for (index, &v) in meta.directions.iter().enumerate() {
        let norm = norm3(v);
        if (norm - 1.0).abs() > UNIT_TOLERANCE || !norm.is_finite() {
            return Err(Error::NonUnitDirection { index, norm });
        }
        directions.push(Direction { unit: v });
    }

    let mut samples = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for _ in 0..n {
        left.push(samples.by_ref().take(t).collect());
        right.push(samples.by_ref().take(t).collect());
    }
    HrirSet::new(meta.name, meta.sample_rate_hz, directions, left, right)
}

/// Writes a container directory, creating it if needed.
pub fn save_container(set: &HrirSet, path: impl AsRef<Path>) -> Result<()> {
    let dir = path.as_ref();
    fs::create_dir_all(dir)?;
    let meta = Meta {
        name: set.name.clone(),
        sample_rate_hz: set.sample_rate_hz,
        num_directions: set.num_directions(),
        num_samples: set.num_samples(),
        directions: set.directions.iter().map(Direction::unit_vector).collect(),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::MalformedMeta(e.to_string()))?;
    fs::write(dir.join(META_FILE), json)?;

    let mut out = BufWriter::new(fs::File::create(dir.join(DATA_FILE))?);
    for (l, r) in set.left.iter().zip(&set.right) {
        for &x in l.iter().chain(r) {
            out.write_all(&(x as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}
