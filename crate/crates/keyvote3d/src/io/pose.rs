//! Pose JSON: a 9-element row-major rotation plus a 3-element translation in
//! meters. The loader re-validates the rotation, re-orthonormalizing inputs
//! within 1e-6 of SO(3) (serialization dust) and rejecting anything farther.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RigidTransform;

/// Defect up to which a loaded rotation is projected back onto SO(3).
const REORTHONORMALIZE_TOL: f64 = 1e-6;

#[derive(Debug, Serialize, Deserialize)]
struct PoseJson {
    /// Row-major 3×3 rotation.
    rotation: [f64; 9],
    /// Meters.
    translation: [f64; 3],
}

pub fn save_pose(t: &RigidTransform, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    write_pose(t, BufWriter::new(file))
}

pub fn write_pose<W: Write>(t: &RigidTransform, mut writer: W) -> Result<()> {
    let r = t.rotation();
    let json = PoseJson {
        rotation: [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ],
        translation: [t.translation().x, t.translation().y, t.translation().z],
    };
    serde_json::to_writer_pretty(&mut writer, &json)?;
    writer.flush()?;
    Ok(())
}

pub fn load_pose(path: impl AsRef<Path>) -> Result<RigidTransform> {
    let file = File::open(path.as_ref())?;
    read_pose(BufReader::new(file))
}

pub fn read_pose<R: Read>(reader: R) -> Result<RigidTransform> {
    let json: PoseJson = serde_json::from_reader(reader)?;
    let r = json.rotation;
    let rotation = Matrix3::new(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]);
    let translation = Vector3::new(json.translation[0], json.translation[1], json.translation[2]);

    match RigidTransform::new(rotation, translation) {
        Ok(t) => Ok(t),
        Err(Error::NotARotation(_)) => {
            let defect = so3_defect(&rotation);
            if defect > REORTHONORMALIZE_TOL {
                return Err(Error::NotARotation(format!(
                    "defect {defect:.3e} exceeds re-orthonormalization tolerance {REORTHONORMALIZE_TOL:.1e}"
                )));
            }
            let projected = project_to_so3(&rotation)?;
            RigidTransform::new(projected, translation)
        }
        Err(e) => Err(e),
    }
}

fn so3_defect(rotation: &Matrix3<f64>) -> f64 {
    let gram = rotation.transpose() * rotation;
    let ortho = (gram - Matrix3::identity()).abs().max();
    ortho.max((rotation.determinant() - 1.0).abs())
}

/// Nearest rotation in Frobenius norm: SVD with determinant correction.
fn project_to_so3(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let svd = m.svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::NotARotation("SVD failed during re-orthonormalization".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::NotARotation("SVD failed during re-orthonormalization".into()))?;
    let det = (u * v_t).determinant();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum()));
    Ok(u * correction * v_t)
}
