//! Foundational 3D types and operations: rigid transforms, point clouds,
//! farthest point sampling, model diameter, and seeded subsampling.
//!
//! Units are meters throughout. All types validate their invariants at
//! construction so downstream operations never see NaN coordinates or
//! improper rotations.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = Vector3<f64>;
pub type UnitVec3 = nalgebra::Unit<Vector3<f64>>;

/// Element-wise tolerance for the SO(3) invariants `RᵀR = I`, `det R = 1`.
pub const ROTATION_TOL: f64 = 1e-9;

/// A proper rigid transform: rotation in SO(3) plus a translation in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    /// Validates orthonormality and determinant before accepting the parts.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if rotation.iter().any(|x| !x.is_finite()) || translation.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let defect = rotation_defect(&rotation);
        if defect > ROTATION_TOL {
            return Err(Error::NotARotation(format!(
                "orthonormality/determinant defect {defect:.3e} exceeds {ROTATION_TOL:.1e}"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// For internal use where the parts are rigid by construction
    /// (products of valid rotations, SVD outputs with det correction).
    pub(crate) fn new_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        debug_assert!(rotation_defect(&rotation) < 1e-7);
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rot_t = self.rotation.transpose();
        Self {
            rotation: rot_t,
            translation: -(rot_t * self.translation),
        }
    }

    /// Rotation angle in radians between this transform's rotation and `other`'s.
    pub fn rotation_angle_to(&self, other: &Self) -> f64 {
        let relative = self.rotation.transpose() * other.rotation;
        let cos = ((relative.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        cos.acos()
    }
}

/// Maximum element-wise deviation of `RᵀR` from identity, combined with the
/// determinant defect `|det R − 1|`.
fn rotation_defect(rotation: &Matrix3<f64>) -> f64 {
    let gram = rotation.transpose() * rotation;
    let ortho = (gram - Matrix3::identity()).abs().max();
    let det = (rotation.determinant() - 1.0).abs();
    ortho.max(det)
}

/// `compose(a, b)`: the transform that applies `b` first, then `a`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    RigidTransform::new_unchecked(
        a.rotation * b.rotation,
        a.rotation * b.translation + a.translation,
    )
}

/// An ordered set of 3D points in meters. All coordinates finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points
            .iter()
            .any(|p| !p.coords.iter().all(|x| x.is_finite()))
        {
            return Err(Error::NonFinite);
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point3> {
        self.points.iter()
    }

    pub fn centroid(&self) -> Option<Point3> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self
            .points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.points.len() as f64))
    }
}

impl std::ops::Index<usize> for PointCloud {
    type Output = Point3;
    fn index(&self, i: usize) -> &Point3 {
        &self.points[i]
    }
}

impl TryFrom<Vec<[f64; 3]>> for PointCloud {
    type Error = Error;
    fn try_from(rows: Vec<[f64; 3]>) -> Result<Self> {
        PointCloud::new(rows.into_iter().map(Point3::from).collect())
    }
}

impl From<PointCloud> for Vec<[f64; 3]> {
    fn from(cloud: PointCloud) -> Self {
        cloud.points.iter().map(|p| [p.x, p.y, p.z]).collect()
    }
}

/// K pairwise-distinct keypoints in the model frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelKeypoints {
    keypoints: Vec<Point3>,
}

impl ModelKeypoints {
    pub fn new(keypoints: Vec<Point3>) -> Result<Self> {
        if keypoints.is_empty() {
            return Err(Error::InsufficientPoints { needed: 1, got: 0 });
        }
        if keypoints
            .iter()
            .any(|p| !p.coords.iter().all(|x| x.is_finite()))
        {
            return Err(Error::NonFinite);
        }
        for i in 0..keypoints.len() {
            for j in (i + 1)..keypoints.len() {
                if (keypoints[i] - keypoints[j]).norm() == 0.0 {
                    return Err(Error::DegenerateGeometry(format!(
                        "keypoints {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(Self { keypoints })
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.keypoints
    }

    /// Smallest pairwise distance; `None` for a single keypoint.
    pub fn min_pairwise_distance(&self) -> Option<f64> {
        let mut min = f64::INFINITY;
        for i in 0..self.keypoints.len() {
            for j in (i + 1)..self.keypoints.len() {
                min = min.min((self.keypoints[i] - self.keypoints[j]).norm());
            }
        }
        (min < f64::INFINITY).then_some(min)
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            keypoints: self.keypoints.iter().map(|p| t.transform_point(p)).collect(),
        }
    }
}

impl std::ops::Index<usize> for ModelKeypoints {
    type Output = Point3;
    fn index(&self, i: usize) -> &Point3 {
        &self.keypoints[i]
    }
}

/// Applies `t` to every point, preserving count and order.
pub fn apply_transform(t: &RigidTransform, cloud: &PointCloud) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|p| t.transform_point(p)).collect(),
    }
}

/// Choice of the first point in farthest point sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FpsSeedRule {
    /// Start from the point with the largest distance to the centroid.
    #[default]
    FarthestFromCentroid,
    /// Start from input index 0 (useful for reproducing fixed sequences).
    FirstIndex,
}

/// Greedy farthest point sampling: each selected point maximizes its minimum
/// distance to the already-selected set. Ties break to the lowest input index,
/// so results are identical across platforms.
pub fn fps_keypoints(model: &PointCloud, k: usize, seed_rule: FpsSeedRule) -> Result<ModelKeypoints> {
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    if model.len() < k {
        return Err(Error::InsufficientPoints {
            needed: k,
            got: model.len(),
        });
    }

    let points = model.points();
    let first = match seed_rule {
        FpsSeedRule::FirstIndex => 0,
        FpsSeedRule::FarthestFromCentroid => {
            let centroid = model.centroid().expect("non-empty checked above");
            argmax_by_distance(points, |p| (p - centroid).norm_squared())
        }
    };

    let mut selected = Vec::with_capacity(k);
    selected.push(first);
    // min_sq[i] = squared distance from points[i] to the selected set
    let mut min_sq: Vec<f64> = points
        .iter()
        .map(|p| (p - points[first]).norm_squared())
        .collect();

    while selected.len() < k {
        let mut best_idx = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (i, &d) in min_sq.iter().enumerate() {
            if d > best_val {
                best_val = d;
                best_idx = i;
            }
        }
        selected.push(best_idx);
        for (i, d) in min_sq.iter_mut().enumerate() {
            let cand = (points[i] - points[best_idx]).norm_squared();
            if cand < *d {
                *d = cand;
            }
        }
    }

    ModelKeypoints::new(selected.into_iter().map(|i| points[i]).collect())
}

fn argmax_by_distance(points: &[Point3], score: impl Fn(&Point3) -> f64) -> usize {
    let mut best_idx = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        let v = score(p);
        if v > best_val {
            best_val = v;
            best_idx = i;
        }
    }
    best_idx
}

/// Maximum pairwise Euclidean distance between model points, in meters.
pub fn model_diameter(model: &PointCloud) -> Result<f64> {
    if model.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: model.len(),
        });
    }
    let points = model.points();
    let mut max_sq = 0.0f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            max_sq = max_sq.max((points[i] - points[j]).norm_squared());
        }
    }
    Ok(max_sq.sqrt())
}

/// Draws `n` points. With `cloud.len() >= n` this is uniform sampling without
/// replacement (a permutation when `n == len`). With fewer input points than
/// requested, every input point is kept once and the remainder is drawn with
/// replacement, so occluded scenes still yield fixed-size samples.
pub fn subsample(cloud: &PointCloud, n: usize, rng_seed: u64) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::InsufficientPoints { needed: 1, got: 0 });
    }
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let indices = subsample_indices(cloud.len(), n, rng_seed);
    Ok(PointCloud {
        points: indices.into_iter().map(|i| cloud.points[i]).collect(),
    })
}

/// Index form of [`subsample`], for callers that must keep rows of several
/// parallel arrays aligned.
pub fn subsample_indices(len: usize, n: usize, rng_seed: u64) -> Vec<usize> {
    let mut rng = rng::stream(rng_seed, &[0x5355_4253]); // "SUBS"
    if len >= n {
        // Partial Fisher-Yates over the index array.
        let mut indices: Vec<usize> = (0..len).collect();
        for i in 0..n {
            let j = i + rand::Rng::random_range(&mut rng, 0..len - i);
            indices.swap(i, j);
        }
        indices.truncate(n);
        indices
    } else {
        let mut indices: Vec<usize> = (0..len).collect();
        while indices.len() < n {
            indices.push(rand::Rng::random_range(&mut rng, 0..len));
        }
        indices
    }
}
