//! File ingestion and emission: PLY point clouds, the `KV3DVF1` vote-field
//! container (with a JSON mirror), pose JSON, camera intrinsics, and
//! single-channel depth images with pinhole backprojection.

mod depth;
mod ply;
mod pose;
mod votefield;

pub use depth::{
    backproject, load_depth, load_intrinsics, load_mask, save_intrinsics, BinaryMask,
    CameraIntrinsics, DepthImage, DepthUnit,
};
pub use ply::{load_ply, read_ply, save_ply, write_ply, PlyFormat};
pub use pose::{load_pose, read_pose, save_pose, write_pose};
pub use votefield::{
    load_vote_field, read_vote_field, save_vote_field, save_vote_field_json, write_vote_field,
    write_vote_field_json, VOTE_FIELD_MAGIC,
};
