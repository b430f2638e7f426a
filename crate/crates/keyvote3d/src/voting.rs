//! RANSAC triangulation of 3D keypoints from the vote field.
//!
//! For each keypoint: repeatedly pick three scene points, intersect their
//! direction rays in the least-squares sense to get a candidate position,
//! let every scene point vote on the candidate with a cosine-threshold test,
//! and keep the candidate with the most votes. The winning vote count is the
//! keypoint's confidence and later weights the pose fit.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point3, UnitVec3};
use crate::rng;
use crate::votefield::VoteField;

/// Condition-number limit above which the ray-bundle normal matrix is
/// treated as singular.
pub const CONDITION_LIMIT: f64 = 1e8;

const VOTE_STREAM: u64 = 0x564f_5445; // "VOTE"

/// RANSAC parameters: hypothesis count M, inlier cosine threshold θ, seed.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VotingConfig {
    pub m_hypotheses: usize,
    pub theta: f64,
    pub rng_seed: u64,
}

impl Default for VotingConfig {
    fn default() -> Self {
        Self {
            m_hypotheses: 128,
            theta: 0.999,
            rng_seed: 0,
        }
    }
}

impl VotingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_hypotheses == 0 {
            return Err(Error::invalid("m_hypotheses", "must be at least 1"));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::invalid("theta", "must be in (0, 1]"));
        }
        Ok(())
    }
}

/// A triangulated keypoint position with its vote-count confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeypointEstimate {
    pub position: Point3,
    pub confidence: usize,
}

/// Least-squares closest point to the line bundle `{p_i + t·v_i}`:
/// solves `[Σ (I − v_i v_iᵀ)] h = Σ (I − v_i v_iᵀ) p_i`.
///
/// Fails with `DegenerateLines` when the normal matrix is singular or its
/// condition number exceeds [`CONDITION_LIMIT`] (near-parallel directions).
pub fn closest_point_to_lines(points: &[Point3], directions: &[UnitVec3]) -> Result<Point3> {
    if points.len() != directions.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} points vs {} directions",
            points.len(),
            directions.len()
        )));
    }
    if points.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: points.len(),
        });
    }

    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (p, v) in points.iter().zip(directions) {
        let projector = Matrix3::identity() - v.as_ref() * v.as_ref().transpose();
        normal += projector;
        rhs += projector * p.coords;
    }

    // `normal` is symmetric PSD; its eigenvalues are its singular values.
    let eigen = normal.symmetric_eigen();
    let max = eigen.eigenvalues.max();
    let min = eigen.eigenvalues.min();
    if min <= 0.0 || max / min > CONDITION_LIMIT {
        return Err(Error::DegenerateLines {
            cond: if min <= 0.0 { f64::INFINITY } else { max / min },
            limit: CONDITION_LIMIT,
        });
    }

    let solution = normal
        .lu()
        .solve(&rhs)
        .ok_or(Error::DegenerateLines {
            cond: f64::INFINITY,
            limit: CONDITION_LIMIT,
        })?;
    Ok(Point3::from(solution))
}

/// Vote count for hypothesis `h`: the number of scene points whose predicted
/// direction agrees with the direction to `h` within `cos⁻¹(theta)`.
/// Points closer to `h` than 1e-9 m are skipped (their direction is undefined).
pub fn score_hypothesis(
    h: &Point3,
    field: &VoteField,
    keypoint_index: usize,
    theta: f64,
) -> usize {
    let mut votes = 0;
    for (i, p) in field.scene_points().iter().enumerate() {
        let to_h = h - p;
        let dist = to_h.norm();
        if dist < 1e-9 {
            continue;
        }
        let cos = to_h.dot(field.vector(i, keypoint_index).as_ref()) / dist;
        if cos >= theta {
            votes += 1;
        }
    }
    votes
}

/// RANSAC loop for one keypoint: M seeded triplet draws, each triangulated by
/// [`closest_point_to_lines`] and scored by [`score_hypothesis`]; the highest
/// vote count wins, ties broken by lowest iteration index. Degenerate triplets
/// are skipped without redraw so the iteration count stays bounded.
pub fn vote_keypoint(
    field: &VoteField,
    keypoint_index: usize,
    cfg: &VotingConfig,
) -> Result<KeypointEstimate> {
    cfg.validate()?;
    let n = field.n();
    if n < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: n });
    }
    if keypoint_index >= field.k() {
        return Err(Error::invalid(
            "keypoint_index",
            format!("{} out of range (K = {})", keypoint_index, field.k()),
        ));
    }

    let mut best: Option<KeypointEstimate> = None;
    for iteration in 0..cfg.m_hypotheses {
        let mut rng = rng::stream(
            cfg.rng_seed,
            &[VOTE_STREAM, keypoint_index as u64, iteration as u64],
        );
        let picks = rng::distinct_indices(&mut rng, n, 3);
        let points: Vec<Point3> = picks.iter().map(|&i| field.scene_points()[i]).collect();
        let directions: Vec<UnitVec3> = picks
            .iter()
            .map(|&i| *field.vector(i, keypoint_index))
            .collect();
        let hypothesis = match closest_point_to_lines(&points, &directions) {
            Ok(h) => h,
            Err(Error::DegenerateLines { .. }) => continue,
            Err(e) => return Err(e),
        };
        let confidence = score_hypothesis(&hypothesis, field, keypoint_index, cfg.theta);
        // Strict > keeps the earliest iteration on ties.
        if best.is_none_or(|b| confidence > b.confidence) {
            best = Some(KeypointEstimate {
                position: hypothesis,
                confidence,
            });
        }
    }

    best.ok_or(Error::AllHypothesesDegenerate {
        attempted: cfg.m_hypotheses,
    })
}

/// Votes all K keypoints. Per-keypoint RNG streams are derived from
/// `(seed, k, iteration)`, so the result is identical whether keypoints are
/// processed serially or in parallel. Errors carry the keypoint index.
pub fn vote_all_keypoints(field: &VoteField, cfg: &VotingConfig) -> Result<Vec<KeypointEstimate>> {
    let results: Vec<Result<KeypointEstimate>> = (0..field.k())
        .into_par_iter()
        .map(|k| vote_keypoint(field, k, cfg).map_err(|e| e.at_keypoint(k)))
        .collect();
    results.into_iter().collect()
}
