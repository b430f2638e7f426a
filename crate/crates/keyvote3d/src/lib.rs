//! 3D point-to-keypoint voting for 6D object pose estimation.
//!
//! The pipeline consumes a *vote field* — for every scene point, one unit
//! direction vector toward each of K object keypoints (typically produced by
//! a neural network; here also synthesizable) — and recovers the object's
//! rigid pose in four geometric stages:
//!
//! 1. [`voting`]: RANSAC triangulation of each keypoint from ray triplets,
//!    with a cosine-threshold inlier vote as the confidence.
//! 2. [`posefit`]: confidence-weighted rigid alignment of model keypoints to
//!    the triangulated scene keypoints, plus optional ICP refinement.
//! 3. [`metrics`]: ADD / ADD-S distances and pass/fail against a fraction of
//!    the model diameter.
//! 4. [`synth`]: a deterministic synthetic-scene generator standing in for a
//!    trained network, so the whole loop is testable end to end.
//!
//! All randomness is seeded and all per-item RNG streams are derived from
//! `(seed, indices)`, so serial and parallel runs produce identical results.

pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod posefit;
pub mod rng;
pub mod synth;
pub mod votefield;
pub mod voting;

pub use error::{Error, Result};
pub use geometry::{
    apply_transform, compose, fps_keypoints, model_diameter, subsample, FpsSeedRule,
    ModelKeypoints, Point3, PointCloud, RigidTransform, UnitVec3, Vec3,
};
pub use metrics::{add_metric, adds_metric, evaluate, EvalInstance, EvalReport, MetricKind};
pub use posefit::{fit_from_votes, icp_refine, weighted_rigid_fit, Correspondences, IcpResult};
pub use synth::{
    benchmark_sweep, generate, sample_box_surface, sample_pose, select_keypoints, sweep_to_csv,
    PoseSampling, SweepRow, SynthConfig, SynthScene,
};
pub use votefield::{ground_truth_vectors, perturb, smooth_l1, vote_field_loss, VoteField};
pub use voting::{
    closest_point_to_lines, score_hypothesis, vote_all_keypoints, vote_keypoint, KeypointEstimate,
    VotingConfig,
};
