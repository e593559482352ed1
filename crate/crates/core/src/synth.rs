//! Synthetic ground truth: sampling grids, a rigid-sphere HRIR generator and
//! calibrated white-noise injection.
//!
//! The generator delays one shared minimum-phase prototype per direction and
//! ear by the spherical-head arrival time, so every delay is known exactly.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dsp::{fractional_delay, minimum_phase};
use crate::error::{Error, Result};
use crate::hrir::{Direction, HrirSet};

/// Near-uniform spiral of `n` points.
pub fn fibonacci_grid(n: usize) -> Vec<Direction> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Direction::from_vector([r * phi.cos(), r * phi.sin(), z]).expect("spiral point is nonzero")
        })
        .collect()
}

type Mat3 = [[f64; 3]; 3];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn mat_vec(a: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2])
}

fn rotation(axis: [f64; 3], angle: f64) -> Mat3 {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = axis.map(|a| a / n);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

/// The 60 rotations of the icosahedral group.
pub fn icosahedral_rotations() -> Vec<Mat3> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let gens = [rotation([0.0, 1.0, phi], 2.0 * PI / 5.0), rotation([0.0, 0.0, 1.0], PI)];
    let identity = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let same = |a: &Mat3, b: &Mat3| (0..3).all(|i| (0..3).all(|j| (a[i][j] - b[i][j]).abs() < 1e-9));
    let mut group = vec![identity];
    let mut frontier = vec![identity];
    while let Some(g) = frontier.pop() {
        for h in &gens {
            let p = mat_mul(h, &g);
            if !group.iter().any(|q| same(q, &p)) {
                group.push(p);
                frontier.push(p);
            }
        }
    }
    group
}

fn legendre(l: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return 1.0;
    }
    for k in 2..=l {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|a| a / n)
}

fn slerp(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    normalize([0, 1, 2].map(|i| (1.0 - s) * a[i] + s * b[i]))
}

/// Spherical 9-design made of `orbits` icosahedral orbits (60 points each).
///
/// An orbit of the rotation group averages every harmonic onto its invariant
/// part. Below degree 10 the only non-constant invariant has degree 6, so an
/// orbit through a zero of that invariant integrates degrees 1 to 9 exactly.
pub fn icosahedral_design(orbits: usize) -> Vec<Direction> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let group = icosahedral_rotations();
    let vertex = normalize([0.0, 1.0, phi]);
    let invariant = |p: [f64; 3]| -> f64 {
        group
            .iter()
            .map(|g| {
                let q = mat_vec(g, p);
                legendre(6, q[0] * vertex[0] + q[1] * vertex[1] + q[2] * vertex[2])
            })
            .sum()
    };
    let face = normalize([1.0 + phi, 1.0 + phi, 1.0 + phi].map(|x| x / 3.0));
    let face = normalize([face[0], face[1], face[2]]);
    let mut points: Vec<Direction> = Vec::with_capacity(60 * orbits);
    let mut k = 0;
    while points.len() < 60 * orbits {
        // arcs from a vertex towards slightly rotated face centres give distinct zeros
        let target = mat_vec(&rotation([1.0, -2.0, 0.5], 0.11 * (k + 1) as f64), face);
        k += 1;
        let steps = 400;
        let mut found = None;
        let mut prev = invariant(vertex);
        for s in 1..=steps {
            let t = s as f64 / steps as f64;
            let cur = invariant(slerp(vertex, target, t));
            if prev.signum() != cur.signum() {
                let (mut lo, mut hi) = ((s - 1) as f64 / steps as f64, t);
                let f_lo = prev;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let fm = invariant(slerp(vertex, target, mid));
                    if fm.signum() == f_lo.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                found = Some(slerp(vertex, target, 0.5 * (lo + hi)));
                break;
            }
            prev = cur;
        }
        let Some(p) = found else { continue };
        let orbit: Vec<Direction> =
            group.iter().map(|g| Direction::from_vector(mat_vec(g, p)).expect("rotated unit vector")).collect();
        let distinct = orbit.iter().enumerate().all(|(i, a)| {
            orbit[i + 1..].iter().chain(points.iter()).all(|b| a.angle_to(b) > 1e-4)
        });
        if distinct {
            points.extend(orbit);
        }
        if k > 100 {
            break;
        }
    }
    points
}

/// Spherical-head delay in seconds for a source direction and an ear on `ear_axis`.
///
/// Ipsilateral sources arrive early by the projected path; contralateral
/// sources travel around the head along the surface.
pub fn woodworth_delay_s(direction: &Direction, ear_axis: &Direction, radius_m: f64, speed_of_sound: f64) -> f64 {
    let alpha = direction.angle_to(ear_axis);
    let scale = radius_m / speed_of_sound;
    if alpha <= PI / 2.0 {
        -scale * alpha.cos()
    } else {
        scale * (alpha - PI / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidSphere {
    pub radius_m: f64,
    pub speed_of_sound: f64,
    pub sample_rate_hz: f64,
    pub num_samples: usize,
    /// Delay added to every arrival so the earliest still lies inside the buffer.
    pub offset_samples: f64,
}

impl Default for RigidSphere {
    fn default() -> Self {
        Self {
            radius_m: 0.0875,
            speed_of_sound: 343.0,
            sample_rate_hz: 44_100.0,
            num_samples: 256,
            offset_samples: 32.0,
        }
    }
}

/// Band-limited minimum-phase pulse shared by every synthetic response.
///
/// A Gaussian-windowed tone has a smooth spectrum that is negligible at
/// Nyquist, so fractional delays do not ring into the tail of the buffer.
pub fn prototype(num_samples: usize) -> Result<Vec<f64>> {
    let width = 2.5;
    let centre = 16.0;
    let pulse: Vec<f64> = (0..num_samples)
        .map(|t| {
            let x = t as f64 - centre;
            (-x * x / (2.0 * width * width)).exp() * (0.9 * x).cos()
        })
        .collect();
    let min = minimum_phase(&pulse)?.samples;
    let peak = min.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(min.into_iter().map(|x| x / peak).collect())
}

#[derive(Debug, Clone)]
pub struct SyntheticSet {
    pub set: HrirSet,
    /// Arrival times in samples at the original rate.
    pub tau_left: Vec<f64>,
    pub tau_right: Vec<f64>,
}

impl SyntheticSet {
    /// Ground-truth ITDs in microseconds, positive when the left ear is later.
    pub fn itd_us(&self) -> Vec<f64> {
        let fs = self.set.sample_rate_hz;
        self.tau_left.iter().zip(&self.tau_right).map(|(l, r)| (l - r) / fs * 1e6).collect()
    }
}

/// Rigid-sphere HRIRs with the left ear on +y and the right ear on -y.
pub fn rigid_sphere_set(directions: &[Direction], params: &RigidSphere) -> Result<SyntheticSet> {
    if !(params.radius_m >= 0.0 && params.speed_of_sound > 0.0 && params.sample_rate_hz > 0.0) {
        return Err(Error::InvalidConfig("head radius, speed of sound and rate must be positive".into()));
    }
    let proto = prototype(params.num_samples)?;
    let left_ear = Direction::new([0.0, 1.0, 0.0])?;
    let right_ear = Direction::new([0.0, -1.0, 0.0])?;
    let fs = params.sample_rate_hz;
    let delay = |d: &Direction, ear: &Direction| {
        params.offset_samples + fs * woodworth_delay_s(d, ear, params.radius_m, params.speed_of_sound)
    };
    let tau_left: Vec<f64> = directions.iter().map(|d| delay(d, &left_ear)).collect();
    let tau_right: Vec<f64> = directions.iter().map(|d| delay(d, &right_ear)).collect();
    let shifted = |taus: &[f64]| -> Result<Vec<Vec<f64>>> { taus.iter().map(|&t| fractional_delay(&proto, -t)).collect() };
    let set = HrirSet::new(
        "rigid-sphere".to_string(),
        fs,
        directions.to_vec(),
        shifted(&tau_left)?,
        shifted(&tau_right)?,
    )?;
    Ok(SyntheticSet {
        set,
        tau_left,
        tau_right,
    })
}

/// Signal and noise power of the front responses: the mean square of the
/// largest-magnitude tenth of samples against that of the final tenth in time.
pub fn front_powers(set: &HrirSet) -> (f64, f64) {
    let front = set.nearest_direction(&Direction::from_az_colat_deg(0.0, 90.0));
    let t = set.num_samples();
    let count = t.div_ceil(10).max(1);
    let mut signal = 0.0;
    let mut noise = 0.0;
    for h in [&set.left[front], &set.right[front]] {
        let mut mags: Vec<f64> = h.iter().map(|x| x * x).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        signal += mags[..count].iter().sum::<f64>() / count as f64;
        noise += h[t - count..].iter().map(|x| x * x).sum::<f64>() / count as f64;
    }
    (signal / 2.0, noise / 2.0)
}

/// Measurement SNR in dB from [`front_powers`].
pub fn measurement_snr_db(set: &HrirSet) -> f64 {
    let (s, n) = front_powers(set);
    10.0 * (s / n).log10()
}

/// Adds white Gaussian noise whose variance puts the front signal power
/// `snr_db` above it. Returns the noisy set and the noise standard deviation.
pub fn add_white_noise(set: &HrirSet, snr_db: f64, seed: u64) -> Result<(HrirSet, f64)> {
    let (signal, _) = front_powers(set);
    let sigma = (signal / 10f64.powf(snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(format!("noise level: {e}")))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut noisy = set.clone();
    for ear in [&mut noisy.left, &mut noisy.right] {
        for h in ear.iter_mut() {
            for x in h.iter_mut() {
                *x += normal.sample(&mut rng);
            }
        }
    }
    noisy.name = format!("{}+noise{snr_db}dB", set.name);
    Ok((noisy, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fibonacci_grid_is_unit_and_distinct() {
        let g = fibonacci_grid(300);
        assert_eq!(g.len(), 300);
        for (i, a) in g.iter().enumerate() {
            for b in &g[i + 1..] {
                assert!(a.angle_to(b) > 0.05);
            }
        }
    }

    #[test]
    fn icosahedral_group_has_sixty_rotations() {
        let g = icosahedral_rotations();
        assert_eq!(g.len(), 60);
        for r in &g {
            let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
                + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
            assert!((det - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn design_sums_vanish_through_degree_nine() {
        for orbits in [1, 3] {
            let pts = icosahedral_design(orbits);
            assert_eq!(pts.len(), 60 * orbits);
            for l in 1..=9 {
                let s: f64 = pts.iter().flat_map(|a| pts.iter().map(move |b| legendre(l, a.dot(b)))).sum();
                assert!(s.abs() < 1e-8 * (pts.len() * pts.len()) as f64, "degree {l}: {s}");
            }
            // degree 10 has an invariant, so a generic orbit does not integrate it
            let s10: f64 = pts.iter().flat_map(|a| pts.iter().map(move |b| legendre(10, a.dot(b)))).sum();
            assert!(s10.abs() > 1e-3);
        }
    }

    #[test]
    fn woodworth_is_continuous_and_antisymmetric() {
        let ear = Direction::new([0.0, 1.0, 0.0]).unwrap();
        let a = 0.0875 / 343.0;
        assert!((woodworth_delay_s(&ear, &ear, 0.0875, 343.0) + a).abs() < 1e-15);
        let side = Direction::new([1.0, 0.0, 0.0]).unwrap();
        assert!(woodworth_delay_s(&side, &ear, 0.0875, 343.0).abs() < 1e-15);
        let back = Direction::new([0.0, -1.0, 0.0]).unwrap();
        assert!((woodworth_delay_s(&back, &ear, 0.0875, 343.0) - a * PI / 2.0).abs() < 1e-15);
        assert_eq!(woodworth_delay_s(&back, &ear, 0.0, 343.0), 0.0);
    }

    #[test]
    fn rigid_sphere_responses_are_shifted_prototypes() {
        let dirs = fibonacci_grid(20);
        let syn = rigid_sphere_set(&dirs, &RigidSphere::default()).unwrap();
        let proto = prototype(256).unwrap();
        for i in [0, 7, 19] {
            let back = fractional_delay(&syn.set.left[i], syn.tau_left[i]).unwrap();
            for t in 0..200 {
                assert!((back[t] - proto[t]).abs() < 1e-6, "t={t}");
            }
        }
        let itd = syn.itd_us();
        // sources on +y reach the left ear first
        let left_most = (0..20).max_by(|&a, &b| dirs[a].y().total_cmp(&dirs[b].y())).unwrap();
        assert!(itd[left_most] < 0.0);
    }

    #[test]
    fn zero_radius_gives_equal_delays() {
        let params = RigidSphere { radius_m: 0.0, ..RigidSphere::default() };
        let syn = rigid_sphere_set(&fibonacci_grid(12), &params).unwrap();
        assert!(syn.tau_left.iter().chain(&syn.tau_right).all(|&t| t == params.offset_samples));
    }

    #[test]
    fn noise_calibration() {
        // the tail estimate averages T/10 squared samples per ear, so its spread
        // shrinks with T; 2048 samples keep it near 0.3 dB
        let params = RigidSphere { num_samples: 2048, ..RigidSphere::default() };
        let syn = rigid_sphere_set(&fibonacci_grid(8), &params).unwrap();
        assert!(measurement_snr_db(&syn.set) > 100.0);
        // at low SNR noise peaks enter the top tenth and bias the estimate upwards
        for (snr, seed) in [(60.0, 1), (60.0, 2), (60.0, 3), (40.0, 4), (24.0, 5)] {
            let (noisy, _) = add_white_noise(&syn.set, snr, seed).unwrap();
            let measured = measurement_snr_db(&noisy);
            assert!((measured - snr).abs() <= 1.0, "target {snr}, measured {measured}");
        }
    }

    #[test]
    fn halving_noise_amplitude_gains_six_db() {
        let syn = rigid_sphere_set(&fibonacci_grid(50), &RigidSphere::default()).unwrap();
        let (_, s1) = add_white_noise(&syn.set, 30.0, 4).unwrap();
        let (_, s2) = add_white_noise(&syn.set, 30.0 + 20.0 * 2f64.log10(), 4).unwrap();
        assert!((s1 / s2 - 2.0).abs() < 1e-12);
        // the estimator sees the same ratio when the noise dominates the tail
        let (quiet, _) = add_white_noise(&syn.set, 36.0206, 9).unwrap();
        let (loud, _) = add_white_noise(&syn.set, 30.0, 9).unwrap();
        let (_, nq) = front_powers(&quiet);
        let (_, nl) = front_powers(&loud);
        assert!((10.0 * (nl / nq).log10() - 6.0206).abs() < 0.01);
    }
}
