//! Generates a self-contained demo data set under `demo/`: a box-surface
//! model cloud, a corrupted synthetic vote field for one hidden pose, and
//! the ground-truth pose — everything the CLI needs for a full run.
//!
//!     cargo run --release -p keyvote3d --example make_demo_data

use keyvote3d::io::{save_ply, save_pose, save_vote_field, PlyFormat};
use keyvote3d::{generate, sample_box_surface, SynthConfig, Vec3};

fn main() -> keyvote3d::Result<()> {
    let out_dir = std::path::Path::new("demo");
    std::fs::create_dir_all(out_dir)?;

    let model = sample_box_surface(1500, Vec3::new(0.06, 0.045, 0.09), 7);
    save_ply(&model, out_dir.join("model.ply"), PlyFormat::BinaryLittleEndian)?;

    let cfg = SynthConfig {
        angular_noise_deg: 5.0,
        outlier_fraction: 0.3,
        rng_seed: 42,
        ..Default::default()
    };
    let scene = generate(&model, &cfg)?;
    save_vote_field(&scene.field, out_dir.join("field.kv3"))?;
    save_pose(&scene.gt_pose, out_dir.join("gt_pose.json"))?;

    println!("wrote demo/model.ply ({} points)", model.len());
    println!(
        "wrote demo/field.kv3 ({} points x {} keypoints, 5 deg noise, 30% outliers)",
        scene.field.n(),
        scene.field.k()
    );
    println!("wrote demo/gt_pose.json (the pose to recover)");
    Ok(())
}
