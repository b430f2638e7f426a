//! Synthetic scene generation standing in for a trained vote-prediction
//! network: sample a ground-truth pose, build the exact vote field for a
//! subsampled (optionally occluded) view of the model, corrupt it in
//! controlled ways, and benchmark the full voting → fitting → metric loop.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    apply_transform, fps_keypoints, model_diameter, subsample, FpsSeedRule, ModelKeypoints,
    Point3, PointCloud, RigidTransform, UnitVec3, Vec3,
};
use crate::metrics::add_metric;
use crate::posefit::fit_from_votes;
use crate::rng;
use crate::votefield::{ground_truth_vectors, perturb, VoteField};
use crate::voting::{vote_all_keypoints, VotingConfig};

const POSE_STREAM: u64 = 0x504f_5345; // "POSE"
const OCCLUSION_STREAM: u64 = 0x4f43_434c; // "OCCL"
const SUBSAMPLE_STREAM: u64 = 0x5342_534d; // "SBSM"
const PERTURB_STREAM: u64 = 0x4e4f_4953; // "NOIS"

/// How ground-truth poses are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PoseSampling {
    /// Rotation uniform on SO(3) (normalized 4D Gaussian quaternion).
    #[default]
    UniformRotation,
    /// Rotation angle uniform in [0°, 15°] about a random axis.
    SmallAngle,
}

/// Maximum rotation angle of [`PoseSampling::SmallAngle`], degrees.
pub const SMALL_ANGLE_MAX_DEG: f64 = 15.0;

/// Default half-extent of the translation sampling box, meters.
pub const TRANSLATION_HALF_EXTENT: f64 = 0.2;

/// Default depth offset added to sampled translations, meters; keeps scenes
/// in front of a notional camera at the origin.
pub const DEPTH_OFFSET: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_points: usize,
    /// Total keypoint count: the first `k_keypoints - 1` come from farthest
    /// point sampling, the last is the model centroid.
    pub k_keypoints: usize,
    pub angular_noise_deg: f64,
    pub outlier_fraction: f64,
    pub occlusion_fraction: f64,
    pub pose_sampling: PoseSampling,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_points: 500,
            k_keypoints: 9,
            angular_noise_deg: 0.0,
            outlier_fraction: 0.0,
            occlusion_fraction: 0.0,
            pose_sampling: PoseSampling::UniformRotation,
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 {
            return Err(Error::invalid("n_points", "must be at least 1"));
        }
        if self.k_keypoints == 0 {
            return Err(Error::invalid("k_keypoints", "must be at least 1"));
        }
        if self.angular_noise_deg < 0.0 || !self.angular_noise_deg.is_finite() {
            return Err(Error::invalid("angular_noise_deg", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return Err(Error::invalid("outlier_fraction", "must be in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.occlusion_fraction) {
            return Err(Error::invalid("occlusion_fraction", "must be in [0, 1)"));
        }
        Ok(())
    }
}

/// A generated scene: the pose to recover, the (possibly corrupted) vote
/// field whose rows are the scene points, and the keypoints in model frame.
#[derive(Debug, Clone)]
pub struct SynthScene {
    pub gt_pose: RigidTransform,
    pub field: VoteField,
    pub model_kp: ModelKeypoints,
}

impl SynthScene {
    pub fn scene_points(&self) -> &PointCloud {
        self.field.scene_points()
    }
}

/// Draws a ground-truth pose with the default translation box
/// (`±0.2 m` laterally, `+1.0 m` in depth).
pub fn sample_pose(kind: PoseSampling, rng_seed: u64) -> RigidTransform {
    sample_pose_in_box(kind, TRANSLATION_HALF_EXTENT, DEPTH_OFFSET, rng_seed)
}

/// [`sample_pose`] with an explicit translation box.
pub fn sample_pose_in_box(
    kind: PoseSampling,
    half_extent: f64,
    depth_offset: f64,
    rng_seed: u64,
) -> RigidTransform {
    let mut rng = rng::stream(rng_seed, &[POSE_STREAM]);
    let rotation = match kind {
        PoseSampling::UniformRotation => {
            // Normalized 4D Gaussian quaternion is uniform on SO(3).
            let q = nalgebra::Quaternion::new(
                rng.sample::<f64, _>(rand_distr::StandardNormal),
                rng.sample::<f64, _>(rand_distr::StandardNormal),
                rng.sample::<f64, _>(rand_distr::StandardNormal),
                rng.sample::<f64, _>(rand_distr::StandardNormal),
            );
            nalgebra::UnitQuaternion::from_quaternion(q)
                .to_rotation_matrix()
                .into_inner()
        }
        PoseSampling::SmallAngle => {
            let axis = UnitVec3::new_normalize(rng::unit_vector(&mut rng));
            let angle = rng.random_range(0.0..SMALL_ANGLE_MAX_DEG.to_radians());
            nalgebra::Rotation3::from_axis_angle(&axis, angle).into_inner()
        }
    };
    let translation = Vec3::new(
        rng.random_range(-half_extent..half_extent),
        rng.random_range(-half_extent..half_extent),
        rng.random_range(-half_extent..half_extent) + depth_offset,
    );
    RigidTransform::new_unchecked(rotation, translation)
}

/// Builds a synthetic scene:
///
/// 1. `k_keypoints − 1` FPS keypoints plus the model centroid,
/// 2. a pose drawn per `pose_sampling`,
/// 3. half-space occlusion removing the `occlusion_fraction` of model points
///    farthest along a random direction (contiguous, not random dropout),
/// 4. subsample of the visible points to `n_points`,
/// 5. exact direction vectors toward the posed keypoints, then [`perturb`].
///
/// Points coinciding with a keypoint are excluded from the sample pool so
/// the exact field is always well defined.
pub fn generate(model: &PointCloud, cfg: &SynthConfig) -> Result<SynthScene> {
    cfg.validate()?;

    let model_kp = select_keypoints(model, cfg.k_keypoints)?;
    let gt_pose = sample_pose(cfg.pose_sampling, rng::derive_seed(cfg.rng_seed, &[1]));

    // Half-space occlusion in the model frame: drop the points with the
    // largest projection onto a random direction.
    let mut candidates: Vec<usize> = (0..model.len()).collect();
    if cfg.occlusion_fraction > 0.0 {
        let mut rng = rng::stream(cfg.rng_seed, &[OCCLUSION_STREAM]);
        let direction = rng::unit_vector(&mut rng);
        let n_remove = (cfg.occlusion_fraction * model.len() as f64).floor() as usize;
        candidates.sort_by(|&a, &b| {
            let da = model[a].coords.dot(&direction);
            let db = model[b].coords.dot(&direction);
            da.total_cmp(&db).then(a.cmp(&b))
        });
        candidates.truncate(model.len() - n_remove);
        candidates.sort_unstable();
    }

    // Keep the exact field well defined: no scene point may coincide with a
    // keypoint (FPS keypoints are themselves model points).
    let visible: Vec<Point3> = candidates
        .iter()
        .map(|&i| model[i])
        .filter(|p| {
            model_kp
                .points()
                .iter()
                .all(|kp| (p - kp).norm() > 1e-12)
        })
        .collect();
    if visible.len() < 3 {
        return Err(Error::DegenerateScene {
            survivors: visible.len(),
        });
    }

    let visible = PointCloud::new(visible)?;
    let sampled = subsample(
        &visible,
        cfg.n_points,
        rng::derive_seed(cfg.rng_seed, &[SUBSAMPLE_STREAM]),
    )?;

    let scene_points = apply_transform(&gt_pose, &sampled);
    let keypoints_scene = model_kp.transformed(&gt_pose);
    let exact = ground_truth_vectors(&scene_points, &keypoints_scene)?;
    let field = perturb(
        &exact,
        cfg.angular_noise_deg,
        cfg.outlier_fraction,
        rng::derive_seed(cfg.rng_seed, &[PERTURB_STREAM]),
    )?;

    Ok(SynthScene {
        gt_pose,
        field,
        model_kp,
    })
}

/// `k − 1` FPS keypoints plus the centroid as the final center keypoint.
pub fn select_keypoints(model: &PointCloud, k: usize) -> Result<ModelKeypoints> {
    if k == 0 {
        return Err(Error::invalid("k_keypoints", "must be at least 1"));
    }
    let centroid = model
        .centroid()
        .ok_or(Error::InsufficientPoints { needed: 1, got: 0 })?;
    let mut points = if k > 1 {
        fps_keypoints(model, k - 1, FpsSeedRule::FarthestFromCentroid)?
            .points()
            .to_vec()
    } else {
        Vec::new()
    };
    points.push(centroid);
    ModelKeypoints::new(points)
}

/// One row of a benchmark sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub config: SynthConfig,
    /// Fraction of trials whose ADD beat the threshold; failed trials count
    /// in the denominator.
    pub accuracy: f64,
    /// Mean ADD in meters over trials that produced a pose; `None` when all
    /// trials failed.
    pub mean_add_m: Option<f64>,
    pub mean_runtime_s: f64,
}

/// Runs `generate → vote_all_keypoints → fit_from_votes → add_metric` for
/// `trials` trials per grid cell. Per-trial seeds derive from
/// `(config seed, trial index)`, so parallel and serial runs agree exactly
/// on every value except wall-clock time. Per-trial errors are counted as
/// failed trials, never aborts.
pub fn benchmark_sweep(
    model: &PointCloud,
    grid: &[SynthConfig],
    trials: usize,
    voting: &VotingConfig,
    diameter_fraction: f64,
) -> Result<Vec<SweepRow>> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    if !diameter_fraction.is_finite() || diameter_fraction <= 0.0 {
        return Err(Error::invalid("diameter_fraction", "must be > 0"));
    }
    voting.validate()?;
    let diameter = model_diameter(model)?;
    let threshold = diameter_fraction * diameter;

    let mut rows = Vec::with_capacity(grid.len());
    for cfg in grid {
        cfg.validate()?;
        let outcomes: Vec<(Option<f64>, f64)> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let start = Instant::now();
                let add = run_trial(model, cfg, voting, trial);
                (add, start.elapsed().as_secs_f64())
            })
            .collect();

        let mut passed = 0usize;
        let mut add_sum = 0.0;
        let mut add_count = 0usize;
        let mut runtime_sum = 0.0;
        for (add, runtime) in &outcomes {
            if let Some(add) = add {
                add_count += 1;
                add_sum += add;
                if *add < threshold {
                    passed += 1;
                }
            }
            runtime_sum += runtime;
        }
        rows.push(SweepRow {
            config: *cfg,
            accuracy: passed as f64 / trials as f64,
            mean_add_m: (add_count > 0).then(|| add_sum / add_count as f64),
            mean_runtime_s: runtime_sum / trials as f64,
        });
    }
    Ok(rows)
}

fn run_trial(
    model: &PointCloud,
    cfg: &SynthConfig,
    voting: &VotingConfig,
    trial: usize,
) -> Option<f64> {
    let trial_cfg = SynthConfig {
        rng_seed: rng::derive_seed(cfg.rng_seed, &[0x5452_4941, trial as u64]), // "TRIA"
        ..*cfg
    };
    let trial_voting = VotingConfig {
        rng_seed: rng::derive_seed(voting.rng_seed, &[0x5452_4941, trial as u64]),
        ..*voting
    };
    let scene = generate(model, &trial_cfg).ok()?;
    let estimates = vote_all_keypoints(&scene.field, &trial_voting).ok()?;
    let pose = fit_from_votes(&estimates, &scene.model_kp).ok()?;
    Some(add_metric(model, &scene.gt_pose, &pose))
}

/// Serializes sweep rows as CSV: config columns, then accuracy, mean ADD,
/// mean runtime. `mean_add_m` is empty when every trial of a cell failed.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "n_points,k_keypoints,angular_noise_deg,outlier_fraction,occlusion_fraction,\
         pose_sampling,rng_seed,accuracy,mean_add_m,mean_runtime_s\n",
    );
    for row in rows {
        let pose_sampling = match row.config.pose_sampling {
            PoseSampling::UniformRotation => "uniform_rotation",
            PoseSampling::SmallAngle => "small_angle",
        };
        let mean_add = row
            .mean_add_m
            .map(|v| format!("{v}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            row.config.n_points,
            row.config.k_keypoints,
            row.config.angular_noise_deg,
            row.config.outlier_fraction,
            row.config.occlusion_fraction,
            pose_sampling,
            row.config.rng_seed,
            row.accuracy,
            mean_add,
            row.mean_runtime_s,
        ));
    }
    out
}

/// Deterministic point cloud on the surface of an axis-aligned box; a stand-in
/// for a CAD model sampled to points. Faces are drawn with probability
/// proportional to their area.
pub fn sample_box_surface(n: usize, half_extents: Vec3, rng_seed: u64) -> PointCloud {
    let mut rng = rng::stream(rng_seed, &[0x424f_5853]); // "BOXS"
    let (hx, hy, hz) = (half_extents.x, half_extents.y, half_extents.z);
    let areas = [hy * hz, hy * hz, hx * hz, hx * hz, hx * hy, hx * hy];
    let total: f64 = areas.iter().sum();
    let points = (0..n)
        .map(|_| {
            let mut pick = rng.random_range(0.0..total);
            let mut face = 0;
            for (i, a) in areas.iter().enumerate() {
                if pick < *a {
                    face = i;
                    break;
                }
                pick -= a;
            }
            let u = rng.random_range(-1.0..1.0);
            let v = rng.random_range(-1.0..1.0);
            match face {
                0 => Point3::new(hx, u * hy, v * hz),
                1 => Point3::new(-hx, u * hy, v * hz),
                2 => Point3::new(u * hx, hy, v * hz),
                3 => Point3::new(u * hx, -hy, v * hz),
                4 => Point3::new(u * hx, v * hy, hz),
                _ => Point3::new(u * hx, v * hy, -hz),
            }
        })
        .collect();
    PointCloud::new(points).expect("finite by construction")
}
