//! The dense per-point direction-vector field: for every scene point, one
//! unit vector toward each of the K keypoints. This is the quantity a trained
//! network predicts; here it can also be built exactly from geometry and
//! corrupted in controlled ways.

use nalgebra::Rotation3;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ModelKeypoints, PointCloud, UnitVec3};
use crate::rng;

/// N scene points with an N×K grid of unit direction vectors, row-major by
/// point then keypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteField {
    scene_points: PointCloud,
    vectors: Vec<UnitVec3>,
    k: usize,
}

impl VoteField {
    pub fn new(scene_points: PointCloud, vectors: Vec<UnitVec3>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k", "must be at least 1"));
        }
        if vectors.len() != scene_points.len() * k {
            return Err(Error::ShapeMismatch(format!(
                "expected {} vectors ({} points x {} keypoints), got {}",
                scene_points.len() * k,
                scene_points.len(),
                k,
                vectors.len()
            )));
        }
        for (i, v) in vectors.iter().enumerate() {
            let norm = v.as_ref().norm();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::NormViolation {
                    norm,
                    tolerance: 1e-9,
                });
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::parse(format!("vector {i}"), "non-finite component"));
            }
        }
        Ok(Self {
            scene_points,
            vectors,
            k,
        })
    }

    pub fn n(&self) -> usize {
        self.scene_points.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn scene_points(&self) -> &PointCloud {
        &self.scene_points
    }

    /// Direction vector at scene point `point_idx` toward keypoint `kp_idx`.
    pub fn vector(&self, point_idx: usize, kp_idx: usize) -> &UnitVec3 {
        &self.vectors[point_idx * self.k + kp_idx]
    }

    pub fn vectors(&self) -> &[UnitVec3] {
        &self.vectors
    }

    /// Row subsample keeping points and their vectors paired; same draw
    /// semantics as [`crate::geometry::subsample`].
    pub fn subsample_rows(&self, n: usize, rng_seed: u64) -> Result<VoteField> {
        if self.n() == 0 {
            return Err(Error::InsufficientPoints { needed: 1, got: 0 });
        }
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        let indices = crate::geometry::subsample_indices(self.n(), n, rng_seed);
        let points = PointCloud::new(indices.iter().map(|&i| self.scene_points[i]).collect())?;
        let mut vectors = Vec::with_capacity(indices.len() * self.k);
        for &i in &indices {
            vectors.extend_from_slice(&self.vectors[i * self.k..(i + 1) * self.k]);
        }
        Ok(VoteField {
            scene_points: points,
            vectors,
            k: self.k,
        })
    }
}

/// Builds the exact field: vector (p, k) = (x_k − p) / ‖x_k − p‖, pointing
/// from the scene point toward the keypoint.
pub fn ground_truth_vectors(
    scene_points: &PointCloud,
    keypoints_scene: &ModelKeypoints,
) -> Result<VoteField> {
    let k = keypoints_scene.len();
    let mut vectors = Vec::with_capacity(scene_points.len() * k);
    for (i, p) in scene_points.iter().enumerate() {
        for (j, x) in keypoints_scene.points().iter().enumerate() {
            let diff = x - p;
            let dist = diff.norm();
            if dist <= 1e-12 {
                return Err(Error::DegenerateGeometry(format!(
                    "scene point {i} coincides with keypoint {j}"
                )));
            }
            vectors.push(UnitVec3::new_unchecked(diff / dist));
        }
    }
    VoteField::new(scene_points.clone(), vectors, k)
}

/// Smooth-L1: `0.5x²` for `|x| < 1`, else `|x| − 0.5`.
pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

/// Sum over keypoints and points of the per-axis smooth-L1 of the vector
/// difference. A diagnostic scalar: zero iff the fields are equal.
pub fn vote_field_loss(predicted: &VoteField, ground_truth: &VoteField) -> Result<f64> {
    if predicted.n() != ground_truth.n() || predicted.k() != ground_truth.k() {
        return Err(Error::ShapeMismatch(format!(
            "predicted is {}x{}, ground truth is {}x{}",
            predicted.n(),
            predicted.k(),
            ground_truth.n(),
            ground_truth.k()
        )));
    }
    let mut loss = 0.0;
    for kp in 0..predicted.k() {
        for p in 0..predicted.n() {
            let delta = predicted.vector(p, kp).as_ref() - ground_truth.vector(p, kp).as_ref();
            loss += smooth_l1(delta.x) + smooth_l1(delta.y) + smooth_l1(delta.z);
        }
    }
    Ok(loss)
}

const PERTURB_STREAM: u64 = 0x5045_5254; // "PERT"

/// Corrupts a field the way an imperfect network would: each inlier vector is
/// rotated by an angle drawn from |N(0, σ)| about a random axis orthogonal to
/// it, and an `outlier_fraction` of cells (chosen independently per cell) is
/// replaced by uniform random unit vectors. Deterministic per seed and cell,
/// regardless of parallel scheduling.
pub fn perturb(
    field: &VoteField,
    angular_noise_deg: f64,
    outlier_fraction: f64,
    rng_seed: u64,
) -> Result<VoteField> {
    if angular_noise_deg < 0.0 || !angular_noise_deg.is_finite() {
        return Err(Error::invalid("angular_noise_deg", "must be finite and >= 0"));
    }
    if !(0.0..=1.0).contains(&outlier_fraction) {
        return Err(Error::invalid("outlier_fraction", "must be in [0, 1]"));
    }
    let k = field.k();
    let sigma_rad = angular_noise_deg.to_radians();
    let vectors: Vec<UnitVec3> = (0..field.n() * k)
        .into_par_iter()
        .map(|cell| {
            let point_idx = (cell / k) as u64;
            let kp_idx = (cell % k) as u64;
            let mut rng = rng::stream(rng_seed, &[PERTURB_STREAM, point_idx, kp_idx]);
            let v = field.vectors()[cell];
            if outlier_fraction > 0.0 && rng.random::<f64>() < outlier_fraction {
                return UnitVec3::new_normalize(rng::unit_vector(&mut rng));
            }
            if sigma_rad == 0.0 {
                return v;
            }
            let angle = rng
                .sample::<f64, _>(rand_distr::StandardNormal)
                .abs()
                * sigma_rad;
            let axis = loop {
                let candidate = rng::unit_vector(&mut rng);
                let orth = candidate - v.as_ref() * candidate.dot(v.as_ref());
                let norm = orth.norm();
                if norm > 1e-9 {
                    break UnitVec3::new_unchecked(orth / norm);
                }
            };
            let rotated = Rotation3::from_axis_angle(&axis, angle) * v.as_ref();
            UnitVec3::new_normalize(rotated)
        })
        .collect();
    VoteField::new(field.scene_points().clone(), vectors, k)
}
