//! End-to-end tests of the `keyvote3d` binary: artifact round trips,
//! determinism, and the documented exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use keyvote3d::io::{load_pose, save_intrinsics, save_ply, save_vote_field, CameraIntrinsics, PlyFormat};
use keyvote3d::{
    add_metric, generate, ground_truth_vectors, sample_box_surface, ModelKeypoints, Point3,
    PointCloud, SynthConfig, UnitVec3, Vec3, VoteField,
};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_keyvote3d"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_exit(output: &Output, expected: i32) {
    assert_eq!(
        output.status.code(),
        Some(expected),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn demo_model() -> PointCloud {
    sample_box_surface(1200, Vec3::new(0.05, 0.04, 0.08), 11)
}

fn write_model(dir: &Path) -> PathBuf {
    let path = dir.join("model.ply");
    save_ply(&demo_model(), &path, PlyFormat::BinaryLittleEndian).unwrap();
    path
}

struct Workspace {
    _dir: tempfile::TempDir,
    model: PathBuf,
    field: PathBuf,
    keypoints: PathBuf,
    gt: keyvote3d::RigidTransform,
}

/// Model + exact vote field + matching keypoints JSON in a temp dir.
fn exact_workspace(seed: u64) -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let model_path = write_model(dir.path());
    let scene = generate(
        &demo_model(),
        &SynthConfig {
            rng_seed: seed,
            ..Default::default()
        },
    )
    .unwrap();
    let field_path = dir.path().join("field.kv3");
    save_vote_field(&scene.field, &field_path).unwrap();

    let keypoints_path = dir.path().join("keypoints.json");
    let status = bin()
        .args([
            "keypoints",
            "--model",
            model_path.to_str().unwrap(),
            "--k",
            "8",
            "--out",
            keypoints_path.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    Workspace {
        _dir: dir,
        model: model_path,
        field: field_path,
        keypoints: keypoints_path,
        gt: scene.gt_pose,
    }
}

#[test]
fn keypoints_writes_k_plus_center_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let out = dir.path().join("kp.json");

    let output = run(&[
        "keypoints",
        "--model",
        model.to_str().unwrap(),
        "--k",
        "8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("min pairwise keypoint distance"));

    let parsed: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(parsed["keypoints"].as_array().unwrap().len(), 9);

    // Byte-identical on repeat.
    let first = std::fs::read(&out).unwrap();
    let output = run(&[
        "keypoints",
        "--model",
        model.to_str().unwrap(),
        "--k",
        "8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    assert_eq!(first, std::fs::read(&out).unwrap());
}

#[test]
fn keypoints_too_many_requested_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let output = run(&[
        "keypoints",
        "--model",
        model.to_str().unwrap(),
        "--k",
        "100000",
        "--out",
        dir.path().join("kp.json").to_str().unwrap(),
    ]);
    assert_exit(&output, 2);
    assert!(String::from_utf8_lossy(&output.stderr).contains("points"));
}

#[test]
fn pipeline_recovers_embedded_ground_truth() {
    let ws = exact_workspace(501);
    let out = ws.model.parent().unwrap().join("pose.json");
    let output = run(&[
        "pipeline",
        "--votefield",
        ws.field.to_str().unwrap(),
        "--model",
        ws.model.to_str().unwrap(),
        "--keypoints",
        ws.keypoints.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--hypotheses",
        "16",
    ]);
    assert_exit(&output, 0);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("voting+fitting wall time"));

    let pose = load_pose(&out).unwrap();
    assert!((pose.rotation() - ws.gt.rotation()).norm() < 1e-6);
    assert!((pose.translation() - ws.gt.translation()).norm() < 1e-6);
}

#[test]
fn pipeline_is_deterministic_per_seed() {
    let ws = exact_workspace(502);
    let out_a = ws.model.parent().unwrap().join("a.json");
    let out_b = ws.model.parent().unwrap().join("b.json");
    for (out, threads) in [(&out_a, "1"), (&out_b, "4")] {
        let output = bin()
            .args([
                "pipeline",
                "--votefield",
                ws.field.to_str().unwrap(),
                "--model",
                ws.model.to_str().unwrap(),
                "--keypoints",
                ws.keypoints.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--seed",
                "9",
            ])
            .env("KEYVOTE3D_THREADS", threads)
            .output()
            .unwrap();
        assert_exit(&output, 0);
    }
    // Same seed, different thread counts: byte-identical pose files.
    assert_eq!(
        std::fs::read(&out_a).unwrap(),
        std::fs::read(&out_b).unwrap()
    );
}

#[test]
fn pipeline_all_parallel_field_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());

    let cloud = PointCloud::new(
        (0..50)
            .map(|i| Point3::new(i as f64 * 0.01, (i % 7) as f64 * 0.01, 1.0))
            .collect(),
    )
    .unwrap();
    let direction = UnitVec3::new_normalize(nalgebra::Vector3::new(0.0, 0.0, 1.0));
    let field = VoteField::new(cloud, vec![direction; 50 * 9], 9).unwrap();
    let field_path = dir.path().join("parallel.kv3");
    save_vote_field(&field, &field_path).unwrap();

    let kp_path = dir.path().join("kp.json");
    assert!(bin()
        .args([
            "keypoints",
            "--model",
            model.to_str().unwrap(),
            "--k",
            "8",
            "--out",
            kp_path.to_str().unwrap(),
        ])
        .status()
        .unwrap()
        .success());

    let output = run(&[
        "pipeline",
        "--votefield",
        field_path.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--keypoints",
        kp_path.to_str().unwrap(),
        "--out",
        dir.path().join("pose.json").to_str().unwrap(),
    ]);
    assert_exit(&output, 3);
}

#[test]
fn pipeline_collinear_keypoints_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());

    // Exact field toward three collinear keypoints: voting succeeds, the
    // rigid fit cannot be constrained.
    let keypoints = vec![
        Point3::new(0.0, 0.0, 0.9),
        Point3::new(0.0, 0.0, 1.0),
        Point3::new(0.0, 0.0, 1.1),
    ];
    let scene = PointCloud::new(
        (0..60)
            .map(|i| {
                Point3::new(
                    0.1 + (i % 10) as f64 * 0.01,
                    0.1 + (i / 10) as f64 * 0.01,
                    1.0 + (i % 5) as f64 * 0.02,
                )
            })
            .collect(),
    )
    .unwrap();
    let field =
        ground_truth_vectors(&scene, &ModelKeypoints::new(keypoints.clone()).unwrap()).unwrap();
    let field_path = dir.path().join("field.kv3");
    save_vote_field(&field, &field_path).unwrap();

    let kp_path = dir.path().join("kp.json");
    std::fs::write(
        &kp_path,
        serde_json::json!({
            "keypoints": keypoints.iter().map(|p| [p.x, p.y, p.z]).collect::<Vec<_>>()
        })
        .to_string(),
    )
    .unwrap();

    let output = run(&[
        "pipeline",
        "--votefield",
        field_path.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--keypoints",
        kp_path.to_str().unwrap(),
        "--out",
        dir.path().join("pose.json").to_str().unwrap(),
        "--hypotheses",
        "16",
    ]);
    assert_exit(&output, 4);
}

#[test]
fn pipeline_with_depth_route_and_refine() {
    let ws = exact_workspace(503);
    let dir = ws.model.parent().unwrap();

    // Render the vote field's scene points into a sparse 16-bit depth map.
    let k = CameraIntrinsics {
        fx: 600.0,
        fy: 600.0,
        cx: 160.0,
        cy: 120.0,
        width: 320,
        height: 240,
    };
    let field = keyvote3d::io::load_vote_field(&ws.field).unwrap();
    let mut depth_mm = vec![0u16; k.width * k.height];
    for p in field.scene_points().iter() {
        let u = (p.x * k.fx / p.z + k.cx).round() as i64;
        let v = (p.y * k.fy / p.z + k.cy).round() as i64;
        if (0..k.width as i64).contains(&u) && (0..k.height as i64).contains(&v) {
            depth_mm[v as usize * k.width + u as usize] = (p.z * 1000.0).round() as u16;
        }
    }
    let mut pgm = format!("P5\n{} {}\n65535\n", k.width, k.height).into_bytes();
    for sample in &depth_mm {
        pgm.extend_from_slice(&sample.to_be_bytes());
    }
    let depth_path = dir.join("depth.pgm");
    std::fs::write(&depth_path, pgm).unwrap();
    let intr_path = dir.join("intrinsics.json");
    save_intrinsics(&k, &intr_path).unwrap();

    let out = dir.join("pose_refined.json");
    let output = run(&[
        "pipeline",
        "--votefield",
        ws.field.to_str().unwrap(),
        "--model",
        ws.model.to_str().unwrap(),
        "--keypoints",
        ws.keypoints.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--depth",
        depth_path.to_str().unwrap(),
        "--intrinsics",
        intr_path.to_str().unwrap(),
        "--depth-unit",
        "mm",
        "--refine",
    ]);
    assert_exit(&output, 0);

    // Pixel quantization limits the depth cloud, so judge with ADD at the
    // usual 10%-diameter threshold rather than exact recovery.
    let pose = load_pose(&out).unwrap();
    let model = demo_model();
    let add = add_metric(&model, &ws.gt, &pose);
    let threshold = 0.1 * keyvote3d::model_diameter(&model).unwrap();
    assert!(add < threshold, "refined ADD {add:.5} m vs threshold {threshold:.5} m");
}

#[test]
fn eval_single_and_batch() {
    let ws = exact_workspace(504);
    let dir = ws.model.parent().unwrap();

    let gt_path = dir.join("gt.json");
    keyvote3d::io::save_pose(&ws.gt, &gt_path).unwrap();

    // Single instance, pred == gt.
    let report_path = dir.join("report.json");
    let output = run(&[
        "eval",
        "--pred",
        gt_path.to_str().unwrap(),
        "--gt",
        gt_path.to_str().unwrap(),
        "--model",
        ws.model.to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    assert!(String::from_utf8_lossy(&output.stdout).contains("accuracy: 100.0%"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["accuracy"], 1.0);

    // Batch: two good poses and one far-off pose -> 2/3.
    let far = keyvote3d::compose(
        &keyvote3d::RigidTransform::new(
            nalgebra::Matrix3::identity(),
            nalgebra::Vector3::new(0.5, 0.0, 0.0),
        )
        .unwrap(),
        &ws.gt,
    );
    let gt_list = dir.join("gt_list.json");
    let pred_list = dir.join("pred_list.json");
    let pose_json = |t: &keyvote3d::RigidTransform| {
        let r = t.rotation();
        serde_json::json!({
            "rotation": [r[(0,0)], r[(0,1)], r[(0,2)], r[(1,0)], r[(1,1)], r[(1,2)], r[(2,0)], r[(2,1)], r[(2,2)]],
            "translation": [t.translation().x, t.translation().y, t.translation().z],
        })
    };
    std::fs::write(
        &gt_list,
        serde_json::json!([pose_json(&ws.gt), pose_json(&ws.gt), pose_json(&ws.gt)]).to_string(),
    )
    .unwrap();
    std::fs::write(
        &pred_list,
        serde_json::json!([pose_json(&ws.gt), pose_json(&far), pose_json(&ws.gt)]).to_string(),
    )
    .unwrap();
    let output = run(&[
        "eval",
        "--pred",
        pred_list.to_str().unwrap(),
        "--gt",
        gt_list.to_str().unwrap(),
        "--model",
        ws.model.to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let accuracy = report["accuracy"].as_f64().unwrap();
    assert!((accuracy - 2.0 / 3.0).abs() < 1e-12);

    // Symmetric flag: ADD-S distance never exceeds the ADD distance.
    let output = run(&[
        "eval",
        "--pred",
        pred_list.to_str().unwrap(),
        "--gt",
        gt_list.to_str().unwrap(),
        "--model",
        ws.model.to_str().unwrap(),
        "--symmetric",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let symmetric_report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    for (add_s, add) in symmetric_report["per_instance"]
        .as_array()
        .unwrap()
        .iter()
        .zip(report["per_instance"].as_array().unwrap())
    {
        assert_eq!(add_s["metric_kind"], "ADD_S");
        assert!(
            add_s["add_distance"].as_f64().unwrap()
                <= add["add_distance"].as_f64().unwrap() + 1e-12
        );
    }
}

#[test]
fn synth_bench_zero_corruption_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let spec = dir.path().join("sweep.json");
    std::fs::write(
        &spec,
        serde_json::json!({
            "trials": 10,
            "diameter_fraction": 0.1,
            "voting": {"m_hypotheses": 16, "theta": 0.999, "rng_seed": 1},
            "grid": [
                {"n_points": 200, "rng_seed": 2},
                {"n_points": 200, "angular_noise_deg": 5.0, "outlier_fraction": 0.3, "rng_seed": 2}
            ]
        })
        .to_string(),
    )
    .unwrap();
    let csv_path = dir.path().join("out.csv");
    let json_path = dir.path().join("out.json");
    let output = run(&[
        "synth-bench",
        "--model",
        model.to_str().unwrap(),
        "--sweep",
        spec.to_str().unwrap(),
        "--out",
        csv_path.to_str().unwrap(),
        "--out-json",
        json_path.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("n_points,"));
    let first_row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first_row[7], "1"); // accuracy column
    let runtime: f64 = first_row[9].parse().unwrap();
    assert!(runtime > 0.0);

    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[0]["accuracy"], 1.0);
}
