use std::fs;
use std::path::Path;
use std::time::Instant;

use keyvote3d::io::{
    backproject, load_depth, load_intrinsics, load_mask, load_ply, load_pose, load_vote_field,
    read_pose, save_pose,
};
use keyvote3d::{
    evaluate, fit_from_votes, icp_refine, model_diameter, select_keypoints, sweep_to_csv,
    vote_all_keypoints, EvalInstance, ModelKeypoints, RigidTransform, SynthConfig, VotingConfig,
};
use serde::{Deserialize, Serialize};

use crate::{fail, ingest, EvalArgs, Failure, KeypointsArgs, PipelineArgs, SynthBenchArgs};

#[derive(Debug, Serialize, Deserialize)]
struct KeypointsJson {
    keypoints: Vec<[f64; 3]>,
}

/// Pipeline tunables; file values sit between built-in defaults and CLI flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct PipelineConfig {
    n_points: usize,
    theta: f64,
    m_hypotheses: usize,
    refine: bool,
    refine_iters: usize,
    max_corr_dist: Option<f64>,
    diameter_fraction: f64,
    rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_points: 500,
            theta: 0.999,
            m_hypotheses: 128,
            refine: false,
            refine_iters: 10,
            max_corr_dist: None,
            diameter_fraction: 0.10,
            rng_seed: 0,
        }
    }
}

pub fn keypoints(args: &KeypointsArgs) -> Result<(), Failure> {
    let model = ingest(load_ply(&args.model), "loading model")?;
    let selected = select_keypoints(&model, args.k + 1).map_err(fail)?;

    let json = KeypointsJson {
        keypoints: selected.points().iter().map(|p| [p.x, p.y, p.z]).collect(),
    };
    write_json(&args.out, &json)?;

    // Exit 0 only if the artifact reloads cleanly.
    let reloaded = load_keypoints(&args.out)?;
    if reloaded.len() != selected.len() {
        return Err(Failure::new_internal("keypoints file failed validation on reload"));
    }

    println!("wrote {} keypoints to {}", selected.len(), args.out.display());
    if let Some(min_dist) = selected.min_pairwise_distance() {
        println!("min pairwise keypoint distance: {min_dist:.6} m");
    }
    Ok(())
}

pub fn pipeline(args: &PipelineArgs) -> Result<(), Failure> {
    let cfg = resolve_pipeline_config(args)?;
    let t_load = Instant::now();
    let field = ingest(load_vote_field(&args.votefield), "loading vote field")?;
    let model = ingest(load_ply(&args.model), "loading model")?;
    let model_kp = load_keypoints(&args.keypoints)?;
    if field.k() != model_kp.len() {
        return Err(Failure::new_ingest(format!(
            "vote field has K = {} but keypoints file has {}",
            field.k(),
            model_kp.len()
        )));
    }

    // Optional dense scene for refinement, backprojected from depth.
    let depth_cloud = match (&args.depth, &args.intrinsics) {
        (Some(depth_path), Some(intrinsics_path)) => {
            let intrinsics = ingest(load_intrinsics(intrinsics_path), "loading intrinsics")?;
            let depth = ingest(load_depth(depth_path, args.depth_unit), "loading depth")?;
            let mask = match &args.mask {
                Some(mask_path) => Some(ingest(load_mask(mask_path), "loading mask")?),
                None => None,
            };
            Some(ingest(
                backproject(&depth, &intrinsics, mask.as_ref()),
                "backprojecting depth",
            )?)
        }
        _ => None,
    };
    let load_time = t_load.elapsed();

    let t_sub = Instant::now();
    let working_field = if field.n() > cfg.n_points {
        field.subsample_rows(cfg.n_points, cfg.rng_seed).map_err(fail)?
    } else {
        field.clone()
    };
    let subsample_time = t_sub.elapsed();

    let voting_cfg = VotingConfig {
        m_hypotheses: cfg.m_hypotheses,
        theta: cfg.theta,
        rng_seed: cfg.rng_seed,
    };
    let t_vote = Instant::now();
    let estimates = vote_all_keypoints(&working_field, &voting_cfg).map_err(fail)?;
    let vote_time = t_vote.elapsed();

    let t_fit = Instant::now();
    let mut pose = fit_from_votes(&estimates, &model_kp).map_err(fail)?;
    let fit_time = t_fit.elapsed();

    let mut refine_time = std::time::Duration::ZERO;
    if cfg.refine {
        let radius = match cfg.max_corr_dist {
            Some(d) => d,
            None => 0.1 * model_diameter(&model).map_err(fail)?,
        };
        let scene = depth_cloud.as_ref().unwrap_or_else(|| field.scene_points());
        let t_refine = Instant::now();
        let result = icp_refine(&pose, scene, &model, cfg.refine_iters, radius).map_err(fail)?;
        refine_time = t_refine.elapsed();
        if result.no_correspondences {
            eprintln!("warning: ICP found no correspondences within {radius:.4} m; keeping unrefined pose");
        }
        pose = result.pose;
    }

    ingest(save_pose(&pose, &args.out), "writing pose")?;
    ingest(load_pose(&args.out), "validating written pose")?;

    for (k, est) in estimates.iter().enumerate() {
        println!(
            "keypoint {k}: confidence {}/{} at ({:.4}, {:.4}, {:.4})",
            est.confidence,
            working_field.n(),
            est.position.x,
            est.position.y,
            est.position.z
        );
    }
    println!(
        "timing: load {:.1} ms | subsample {:.1} ms | voting {:.1} ms | fitting {:.1} ms | refine {:.1} ms",
        load_time.as_secs_f64() * 1e3,
        subsample_time.as_secs_f64() * 1e3,
        vote_time.as_secs_f64() * 1e3,
        fit_time.as_secs_f64() * 1e3,
        refine_time.as_secs_f64() * 1e3,
    );
    println!(
        "voting+fitting wall time: {:.2} ms",
        (vote_time + fit_time).as_secs_f64() * 1e3
    );
    println!("pose written to {}", args.out.display());
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<(), Failure> {
    let model = ingest(load_ply(&args.model), "loading model")?;
    let preds = load_pose_list(&args.pred)?;
    let gts = load_pose_list(&args.gt)?;
    if preds.len() != gts.len() {
        return Err(Failure::new_ingest(format!(
            "{} predicted poses but {} ground-truth poses",
            preds.len(),
            gts.len()
        )));
    }

    let instances: Vec<EvalInstance<'_>> = preds
        .iter()
        .zip(&gts)
        .map(|(pred, gt)| EvalInstance {
            model: &model,
            gt: *gt,
            pred: *pred,
            symmetric: args.symmetric,
        })
        .collect();
    let report = evaluate(&instances, args.diameter_fraction).map_err(fail)?;

    write_json(&args.out, &report)?;
    let reloaded = fs::read_to_string(&args.out)
        .map_err(|e| Failure::new_internal(format!("re-reading report: {e}")))?;
    serde_json::from_str::<keyvote3d::EvalReport>(&reloaded)
        .map_err(|e| Failure::new_internal(format!("report failed validation on reload: {e}")))?;

    println!("accuracy: {:.1}%", report.accuracy * 100.0);
    for (i, r) in report.per_instance.iter().enumerate() {
        println!(
            "instance {i}: {} = {:.6} m (threshold {:.6} m) -> {}",
            match r.metric_kind {
                keyvote3d::MetricKind::Add => "ADD",
                keyvote3d::MetricKind::AddS => "ADD-S",
            },
            r.add_distance,
            r.threshold,
            if r.passed { "pass" } else { "fail" }
        );
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct SweepSpec {
    trials: usize,
    #[serde(default = "default_diameter_fraction")]
    diameter_fraction: f64,
    #[serde(default)]
    voting: VotingConfig,
    grid: Vec<SynthConfig>,
}

fn default_diameter_fraction() -> f64 {
    0.10
}

pub fn synth_bench(args: &SynthBenchArgs) -> Result<(), Failure> {
    let model = ingest(load_ply(&args.model), "loading model")?;
    let spec_text = fs::read_to_string(&args.sweep)
        .map_err(|e| Failure::new_ingest(format!("reading sweep spec: {e}")))?;
    let spec: SweepSpec = serde_json::from_str(&spec_text)
        .map_err(|e| Failure::new_ingest(format!("parsing sweep spec: {e}")))?;

    let rows = keyvote3d::benchmark_sweep(
        &model,
        &spec.grid,
        spec.trials,
        &spec.voting,
        spec.diameter_fraction,
    )
    .map_err(fail)?;

    let csv = sweep_to_csv(&rows);
    fs::write(&args.out, &csv).map_err(|e| Failure::new_ingest(format!("writing CSV: {e}")))?;
    let reloaded = fs::read_to_string(&args.out)
        .map_err(|e| Failure::new_internal(format!("re-reading CSV: {e}")))?;
    if reloaded.lines().count() != rows.len() + 1 {
        return Err(Failure::new_internal("CSV failed validation on reload"));
    }
    if let Some(json_path) = &args.out_json {
        write_json(json_path, &rows)?;
    }

    println!(
        "{:>8} {:>6} {:>9} {:>9} {:>6} {:>9} {:>12} {:>12}",
        "noise", "outl", "occl", "n_points", "k", "accuracy", "mean_add_m", "runtime_s"
    );
    for row in &rows {
        println!(
            "{:>8.2} {:>6.2} {:>9.2} {:>9} {:>6} {:>9.4} {:>12} {:>12.5}",
            row.config.angular_noise_deg,
            row.config.outlier_fraction,
            row.config.occlusion_fraction,
            row.config.n_points,
            row.config.k_keypoints,
            row.accuracy,
            row.mean_add_m
                .map(|v| format!("{v:.6}"))
                .unwrap_or_else(|| "-".into()),
            row.mean_runtime_s,
        );
    }
    println!("results written to {}", args.out.display());
    Ok(())
}

fn resolve_pipeline_config(args: &PipelineArgs) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::new_ingest(format!("reading config: {e}")))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::new_ingest(format!("parsing config: {e}")))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(n) = args.n_points {
        cfg.n_points = n;
    }
    if let Some(theta) = args.theta {
        cfg.theta = theta;
    }
    if let Some(m) = args.hypotheses {
        cfg.m_hypotheses = m;
    }
    if args.refine {
        cfg.refine = true;
    }
    if let Some(iters) = args.refine_iters {
        cfg.refine_iters = iters;
    }
    if let Some(d) = args.max_corr_dist {
        cfg.max_corr_dist = Some(d);
    }
    if let Some(seed) = args.seed {
        cfg.rng_seed = seed;
    }
    Ok(cfg)
}

fn load_keypoints(path: &Path) -> Result<ModelKeypoints, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::new_ingest(format!("reading keypoints: {e}")))?;
    let parsed: KeypointsJson = serde_json::from_str(&text)
        .map_err(|e| Failure::new_ingest(format!("parsing keypoints: {e}")))?;
    let points = parsed
        .keypoints
        .into_iter()
        .map(keyvote3d::Point3::from)
        .collect();
    ingest(ModelKeypoints::new(points), "validating keypoints")
}

/// Loads one pose or a JSON list of poses.
fn load_pose_list(path: &Path) -> Result<Vec<RigidTransform>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new_ingest(format!("reading poses from {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Failure::new_ingest(format!("parsing poses: {e}")))?;
    let items: Vec<serde_json::Value> = match value {
        serde_json::Value::Array(items) => items,
        other => vec![other],
    };
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            let bytes = serde_json::to_vec(&item)
                .map_err(|e| Failure::new_ingest(format!("pose {i}: {e}")))?;
            ingest(read_pose(&bytes[..]), "validating pose")
        })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::new_ingest(format!("serializing: {e}")))?;
    fs::write(path, text)
        .map_err(|e| Failure::new_ingest(format!("writing {}: {e}", path.display())))
}

impl Failure {
    fn new_ingest(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn new_internal(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}
