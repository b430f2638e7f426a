//! Rigid pose recovery: confidence-weighted alignment of model keypoints to
//! triangulated scene keypoints, and a point-to-point ICP refinement stage.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{compose, ModelKeypoints, Point3, PointCloud, RigidTransform};
use crate::voting::KeypointEstimate;

/// Paired model/scene points with non-negative weights.
#[derive(Debug, Clone)]
pub struct Correspondences {
    model_points: Vec<Point3>,
    scene_points: Vec<Point3>,
    weights: Vec<f64>,
}

impl Correspondences {
    /// Requires equal lengths, finite non-negative weights, and at least
    /// three entries with positive weight.
    pub fn new(model_points: Vec<Point3>, scene_points: Vec<Point3>, weights: Vec<f64>) -> Result<Self> {
        if model_points.len() != scene_points.len() || model_points.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} model points, {} scene points, {} weights",
                model_points.len(),
                scene_points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights", "must be finite and >= 0"));
        }
        let positive = weights.iter().filter(|w| **w > 0.0).count();
        if positive < 3 {
            return Err(Error::InsufficientWeight { got: positive });
        }
        Ok(Self {
            model_points,
            scene_points,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.model_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model_points.is_empty()
    }

    /// Weighted alignment objective `Σ w ‖(R m + t) − s‖²` for a candidate pose.
    pub fn objective(&self, pose: &RigidTransform) -> f64 {
        self.model_points
            .iter()
            .zip(&self.scene_points)
            .zip(&self.weights)
            .map(|((m, s), w)| w * (pose.transform_point(m) - s).norm_squared())
            .sum()
    }
}

/// Closed-form weighted orthogonal Procrustes: subtract weighted centroids,
/// factor the weighted cross-covariance by SVD, and correct the determinant
/// so the result is a proper rotation. Returns the `(R, t)` minimizing
/// `Σ w ‖(R m + t) − s‖²`.
pub fn weighted_rigid_fit(c: &Correspondences) -> Result<RigidTransform> {
    let weight_sum: f64 = c.weights.iter().sum();

    let mut centroid_m = Vector3::zeros();
    let mut centroid_s = Vector3::zeros();
    for ((m, s), w) in c.model_points.iter().zip(&c.scene_points).zip(&c.weights) {
        centroid_m += *w * m.coords;
        centroid_s += *w * s.coords;
    }
    centroid_m /= weight_sum;
    centroid_s /= weight_sum;

    // Weighted cross-covariance: scene-centered rows against model-centered columns.
    let mut covariance = Matrix3::zeros();
    for ((m, s), w) in c.model_points.iter().zip(&c.scene_points).zip(&c.weights) {
        let mc = m.coords - centroid_m;
        let sc = s.coords - centroid_s;
        covariance += *w * sc * mc.transpose();
    }

    let svd = covariance.svd(true, true);
    let u = svd.u.ok_or_else(|| {
        Error::DegenerateCorrespondences("SVD of cross-covariance failed".into())
    })?;
    let v_t = svd.v_t.ok_or_else(|| {
        Error::DegenerateCorrespondences("SVD of cross-covariance failed".into())
    })?;

    // Collinear (or coincident) weighted model points leave the rotation about
    // the line axis unconstrained: the cross-covariance drops below rank 2.
    let s_max = svd.singular_values.max();
    if s_max <= 0.0 || svd.singular_values[1] <= s_max * 1e-9 {
        return Err(Error::DegenerateCorrespondences(format!(
            "cross-covariance rank < 2 (singular values {:?})",
            svd.singular_values.as_slice()
        )));
    }

    let det = (u * v_t).determinant();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum()));
    let rotation = u * correction * v_t;
    let translation = centroid_s - rotation * centroid_m;
    Ok(RigidTransform::new_unchecked(rotation, translation))
}

/// Builds correspondences from voted keypoints — weights are the raw vote
/// counts — and solves the weighted fit.
pub fn fit_from_votes(
    estimates: &[KeypointEstimate],
    model_kp: &ModelKeypoints,
) -> Result<RigidTransform> {
    if estimates.len() != model_kp.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} estimates vs {} model keypoints",
            estimates.len(),
            model_kp.len()
        )));
    }
    if estimates.iter().all(|e| e.confidence == 0) {
        return Err(Error::AllZeroConfidence);
    }
    let correspondences = Correspondences::new(
        model_kp.points().to_vec(),
        estimates.iter().map(|e| e.position).collect(),
        estimates.iter().map(|e| e.confidence as f64).collect(),
    )?;
    weighted_rigid_fit(&correspondences)
}

/// Outcome of [`icp_refine`]. `no_correspondences` is set when some iteration
/// found no point pairs within the correspondence radius; the pose is then the
/// best one seen so far (the initial pose if matching never succeeded).
#[derive(Debug, Clone, Copy)]
pub struct IcpResult {
    pub pose: RigidTransform,
    pub iterations: usize,
    /// Mean squared distance over matched pairs at the returned pose;
    /// `None` when no pair was ever matched.
    pub mean_sq_dist: Option<f64>,
    pub no_correspondences: bool,
}

/// Point-to-point ICP: repeatedly match each transformed model point to its
/// nearest scene point within `max_corr_dist`, solve an unweighted rigid fit
/// on the matches, and compose the increment. Stops after `iters` iterations,
/// on convergence (increment below 1e-7 m / 1e-6 rad), or as soon as an
/// update would increase the matched-pair objective, so the returned
/// objective never exceeds the initial one.
pub fn icp_refine(
    initial: &RigidTransform,
    scene: &PointCloud,
    model: &PointCloud,
    iters: usize,
    max_corr_dist: f64,
) -> Result<IcpResult> {
    if iters == 0 {
        return Err(Error::invalid("iters", "must be at least 1"));
    }
    if scene.is_empty() || model.is_empty() {
        return Err(Error::InsufficientPoints {
            needed: 1,
            got: scene.len().min(model.len()),
        });
    }
    if !max_corr_dist.is_finite() || max_corr_dist < 0.0 {
        return Err(Error::invalid("max_corr_dist", "must be >= 0"));
    }

    let mut current = *initial;
    let mut current_obj = match matched_objective(&current, scene, model, max_corr_dist) {
        Some(obj) => obj,
        None => {
            return Ok(IcpResult {
                pose: *initial,
                iterations: 0,
                mean_sq_dist: None,
                no_correspondences: true,
            });
        }
    };

    let mut iterations = 0;
    let mut no_correspondences = false;
    for _ in 0..iters {
        let mut matched_model = Vec::new();
        let mut matched_scene = Vec::new();
        for m in model.iter() {
            let moved = current.transform_point(m);
            if let Some((nearest, dist_sq)) = nearest_point(&moved, scene) {
                if dist_sq.sqrt() <= max_corr_dist {
                    matched_model.push(moved);
                    matched_scene.push(nearest);
                }
            }
        }
        if matched_model.is_empty() {
            no_correspondences = true;
            break;
        }

        let weights = vec![1.0; matched_model.len()];
        let increment = match Correspondences::new(matched_model, matched_scene, weights)
            .and_then(|c| weighted_rigid_fit(&c))
        {
            Ok(t) => t,
            // Too few or degenerate matches: keep the best pose found so far.
            Err(_) => break,
        };

        let candidate = compose(&increment, &current);
        let candidate_obj = match matched_objective(&candidate, scene, model, max_corr_dist) {
            Some(obj) => obj,
            None => {
                no_correspondences = true;
                break;
            }
        };
        if candidate_obj > current_obj {
            break;
        }

        let translation_step = increment.translation().norm();
        let rotation_step = RigidTransform::identity().rotation_angle_to(&increment);
        current = candidate;
        current_obj = candidate_obj;
        iterations += 1;
        if translation_step < 1e-7 && rotation_step < 1e-6 {
            break;
        }
    }

    Ok(IcpResult {
        pose: current,
        iterations,
        mean_sq_dist: Some(current_obj),
        no_correspondences,
    })
}

/// Mean squared distance from transformed model points to their nearest scene
/// points, over pairs within the radius. `None` when nothing matches.
fn matched_objective(
    pose: &RigidTransform,
    scene: &PointCloud,
    model: &PointCloud,
    max_corr_dist: f64,
) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for m in model.iter() {
        let moved = pose.transform_point(m);
        if let Some((_, dist_sq)) = nearest_point(&moved, scene) {
            if dist_sq.sqrt() <= max_corr_dist {
                sum += dist_sq;
                count += 1;
            }
        }
    }
    (count > 0).then(|| sum / count as f64)
}

fn nearest_point(query: &Point3, cloud: &PointCloud) -> Option<(Point3, f64)> {
    cloud
        .iter()
        .map(|p| (*p, (query - p).norm_squared()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}
