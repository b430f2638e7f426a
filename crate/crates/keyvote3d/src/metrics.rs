//! ADD / ADD-S pose-error metrics and threshold evaluation.
//!
//! ADD averages the distance between the same model point under the
//! ground-truth and predicted transforms. ADD-S, for symmetric objects,
//! matches each predicted-transformed point to its nearest
//! ground-truth-transformed point before averaging. A pose counts as accurate
//! when the distance is strictly below a fraction (default 10%) of the model
//! diameter.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{model_diameter, PointCloud, RigidTransform};

/// Mean distance between corresponding model points under the two transforms.
pub fn add_metric(model: &PointCloud, gt: &RigidTransform, pred: &RigidTransform) -> f64 {
    let n = model.len();
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = model
        .iter()
        .map(|x| (gt.transform_point(x) - pred.transform_point(x)).norm())
        .sum();
    sum / n as f64
}

/// Symmetric variant: for each predicted-transformed point, the distance to
/// the nearest ground-truth-transformed point. Brute-force O(N²).
pub fn adds_metric(model: &PointCloud, gt: &RigidTransform, pred: &RigidTransform) -> f64 {
    let n = model.len();
    if n == 0 {
        return 0.0;
    }
    let gt_points: Vec<_> = model.iter().map(|x| gt.transform_point(x)).collect();
    let sum: f64 = model
        .iter()
        .map(|x| {
            let p = pred.transform_point(x);
            gt_points
                .iter()
                .map(|g| (g - p).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    sum / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "ADD")]
    Add,
    #[serde(rename = "ADD_S")]
    AddS,
}

/// One pose to score against its ground truth.
#[derive(Debug, Clone)]
pub struct EvalInstance<'a> {
    pub model: &'a PointCloud,
    pub gt: RigidTransform,
    pub pred: RigidTransform,
    /// Use ADD-S instead of ADD (rotationally ambiguous objects).
    pub symmetric: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceResult {
    /// ADD or ADD-S distance in meters.
    pub add_distance: f64,
    pub metric_kind: MetricKind,
    /// Absolute pass threshold in meters (`diameter_fraction` × diameter).
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub threshold_fraction: f64,
    /// Passed count over instance count, in [0, 1].
    pub accuracy: f64,
    pub per_instance: Vec<InstanceResult>,
}

/// Scores each instance with ADD or ADD-S per its `symmetric` flag against
/// `diameter_fraction` × model diameter. The pass rule is a strict less-than:
/// a distance exactly at the threshold fails.
pub fn evaluate(instances: &[EvalInstance<'_>], diameter_fraction: f64) -> Result<EvalReport> {
    if !diameter_fraction.is_finite() || diameter_fraction <= 0.0 {
        return Err(crate::error::Error::invalid(
            "diameter_fraction",
            "must be > 0",
        ));
    }
    let mut per_instance = Vec::with_capacity(instances.len());
    let mut passed_count = 0usize;
    for instance in instances {
        let diameter = model_diameter(instance.model)?;
        let threshold = diameter_fraction * diameter;
        let (add_distance, metric_kind) = if instance.symmetric {
            (
                adds_metric(instance.model, &instance.gt, &instance.pred),
                MetricKind::AddS,
            )
        } else {
            (
                add_metric(instance.model, &instance.gt, &instance.pred),
                MetricKind::Add,
            )
        };
        let passed = add_distance < threshold;
        passed_count += passed as usize;
        per_instance.push(InstanceResult {
            add_distance,
            metric_kind,
            threshold,
            passed,
        });
    }
    let accuracy = if per_instance.is_empty() {
        0.0
    } else {
        passed_count as f64 / per_instance.len() as f64
    };
    Ok(EvalReport {
        threshold_fraction: diameter_fraction,
        accuracy,
        per_instance,
    })
}
