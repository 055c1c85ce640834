use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::Args;
use pointing_augment::boundary::{boundary_mask, estimate_floor};
use pointing_augment::eval::{
    evaluate, read_predictions, score_proposals, EvalSample, FusionWeights, HandRays, HandednessWeights,
    DEFAULT_IOU_THRESHOLDS,
};
use pointing_augment::placement::analyze;
use pointing_augment::ply::{write_ply_file, PlyEncoding};
use pointing_augment::prompt::render_prompt;
use pointing_augment::scene::{AvatarMetadata, Hand, SegmentationIndex};
use pointing_augment::synthetic::{synthetic_library, synthetic_room, RoomSpec};
use pointing_augment::visibility::visibility_grid;
use pointing_augment::voxel::{erase_object, project_xy, voxelize, GridDump};
use pointing_augment::{BBox, Record};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{config_hash, digest, load_run_config, read_json, require_dir};
use crate::impute::{load_library, load_scene_by_id, write_text};
use crate::{ensure_dir, CliResult, Failure, PlacementFlags};

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated numbers")?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok((p(a)?, p(b)?))
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| e.to_string())).collect()
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializes");
    s.push('\n');
    s
}

fn read_records(paths: &[PathBuf]) -> CliResult<Vec<Record>> {
    let mut out = Vec::new();
    for p in paths {
        let mut r: Vec<Record> = read_json(p).map_err(Failure::data)?;
        out.append(&mut r);
    }
    Ok(out)
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Imputation record files.
    #[arg(long = "records", required = true)]
    pub records: Vec<PathBuf>,
    /// JSON array of `{scene_id, target_object_id, proposals, s_conf}`.
    #[arg(long)]
    pub proposals: PathBuf,
    /// Left,right hand weights; default is one-hot on the record's hand.
    #[arg(long, value_parser = parse_pair)]
    pub w_lr: Option<(f64, f64)>,
    /// Confidence,bias fusion weights.
    #[arg(long, value_parser = parse_pair, default_value = "0.5,0.5")]
    pub w_score: (f64, f64),
    /// Draw fusion weights uniformly from the simplex per record.
    #[arg(long)]
    pub random_fusion: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
struct ProposalSet {
    scene_id: String,
    target_object_id: i32,
    proposals: Vec<[f64; 6]>,
    s_conf: Vec<f64>,
}

pub fn score(a: ScoreArgs) -> CliResult {
    let records = read_records(&a.records)?;
    let sets: Vec<ProposalSet> = read_json(&a.proposals).map_err(Failure::data)?;
    let by_key: BTreeMap<(String, i32), &ProposalSet> =
        sets.iter().map(|s| ((s.scene_id.clone(), s.target_object_id), s)).collect();
    let fixed = FusionWeights::new(a.w_score.0, a.w_score.1).map_err(Failure::usage)?;
    let w_lr_flag = a.w_lr.map(|(l, r)| HandednessWeights::new(l, r)).transpose().map_err(Failure::usage)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);

    let mut out = Vec::new();
    for r in &records {
        let set = by_key
            .get(&(r.scene_id.clone(), r.target_object_id))
            .ok_or_else(|| Failure::data(anyhow!("no proposals for {} object {}", r.scene_id, r.target_object_id)))?;
        let boxes: Vec<BBox> = set
            .proposals
            .iter()
            .map(|b| BBox::from_array(*b).ok_or_else(|| Failure::data(anyhow!("proposal box with min > max"))))
            .collect::<CliResult<_>>()?;
        // only the gesturing arm is recorded; it stands in for both hands
        let rays = HandRays {
            left_shoulder: r.shoulder_world,
            left_fingertip: r.fingertip_world,
            right_shoulder: r.shoulder_world,
            right_fingertip: r.fingertip_world,
        };
        let w_lr = w_lr_flag.unwrap_or(match r.handedness {
            Hand::Left => HandednessWeights { w_left: 1.0, w_right: 0.0 },
            Hand::Right => HandednessWeights { w_left: 0.0, w_right: 1.0 },
        });
        let w_score = if a.random_fusion { FusionWeights::random(&mut rng) } else { fixed };
        let s = score_proposals(&rays, &boxes, &set.s_conf, &w_lr, &w_score).map_err(Failure::data)?;
        out.push(json!({
            "scene_id": r.scene_id,
            "target_object_id": r.target_object_id,
            "avatar_id": r.avatar_id,
            "w_lr": [w_lr.w_left, w_lr.w_right],
            "w_score": [w_score.w_conf, w_score.w_bias],
            "bias": s.bias,
            "s_final": s.s_final,
            "argmax": s.argmax,
        }));
    }
    ensure_dir(&a.out_dir)?;
    let h = digest(format!("{:?}{:?}{}", a.w_lr, a.w_score, a.random_fusion).as_bytes());
    let path = a.out_dir.join(format!("scores_{h}_s{}.json", a.seed));
    write_text(&path, &pretty(&out))?;
    println!("scored {} records into {}", out.len(), path.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    /// Comma-separated IoU thresholds.
    #[arg(long, default_value = "0.25,0.5")]
    pub thresholds: String,
    /// Directory for the JSON report and text table.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn eval(a: EvalArgs) -> CliResult {
    let thresholds = if a.thresholds.trim().is_empty() {
        DEFAULT_IOU_THRESHOLDS.to_vec()
    } else {
        parse_list(&a.thresholds).map_err(|e| Failure::usage(anyhow!("--thresholds: {e}")))?
    };
    if thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Failure::usage(anyhow!("thresholds must lie in [0, 1]")));
    }
    let entries = read_predictions(&a.predictions).map_err(Failure::data)?;
    let samples: Vec<EvalSample<f64>> = entries.iter().map(|e| e.to_sample()).collect::<Result<_, _>>().map_err(Failure::data)?;
    let report = evaluate(&samples, &thresholds).map_err(Failure::data)?;
    let table = report.to_table();
    print!("{table}");
    if let Some(dir) = &a.out_dir {
        ensure_dir(dir)?;
        let h = digest(format!("{thresholds:?}").as_bytes());
        write_text(&dir.join(format!("report_{h}.json")), &pretty(&report.to_json()))?;
        write_text(&dir.join(format!("report_{h}.txt")), &table)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenes_dir: Option<PathBuf>,
    #[arg(long)]
    pub scene: String,
    #[arg(long)]
    pub target: i32,
    /// Reference avatar library; enables footprint and feasibility counts.
    #[arg(long)]
    pub avatars_dir: Option<PathBuf>,
    /// Layer of the visibility slice; defaults to the target center layer.
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long)]
    pub floor_label: Option<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub placement: PlacementFlags,
}

pub fn inspect(a: InspectArgs) -> CliResult {
    let mut cfg = load_run_config(a.config.as_deref())?;
    if a.scenes_dir.is_some() {
        cfg.scenes_dir = a.scenes_dir.clone();
    }
    if let Some(l) = &a.floor_label {
        cfg.floor_label = l.clone();
    }
    a.placement.apply(&mut cfg.placement);
    cfg.placement.validate().map_err(Failure::usage)?;
    let scenes_dir = require_dir(&cfg.scenes_dir, "scenes_dir")?;
    let scene = load_scene_by_id(&scenes_dir, &a.scene, &cfg.floor_label)?;
    let p = &cfg.placement;
    let target = scene
        .object(a.target)
        .ok_or_else(|| Failure::usage(anyhow!("scene {} has no object {}", a.scene, a.target)))?;

    let v1 = voxelize(&scene.cloud, p.voxel_size, 0).map_err(Failure::data)?;
    let v2 = erase_object(&v1, &scene.cloud, target).map_err(Failure::data)?;
    let boundary = boundary_mask(&project_xy(&v1)).map_err(Failure::data)?;
    let floor = estimate_floor(
        &scene.cloud,
        &scene.floor_indices,
        &v1,
        p.floor_offset_m,
        p.min_floor_voxels,
        p.floor_height_override,
    )
    .map_err(Failure::data)?;
    let bbox = pointing_augment::scene::object_bbox(&scene.cloud, target);
    let center = v2.world_to_voxel(bbox.center()).map_err(Failure::data)?;
    let scores = visibility_grid(&v2, center).map_err(Failure::data)?;
    let layer = a.layer.unwrap_or(center.k);
    if layer >= v1.dims()[2] {
        return Err(Failure::usage(anyhow!("layer {layer} outside the grid (height {})", v1.dims()[2])));
    }
    let above = scores.scores().iter().filter(|&&s| s > p.visibility_threshold).count();

    let mut summary = json!({
        "scene_id": a.scene,
        "target_object_id": a.target,
        "dims": v1.dims(),
        "voxel_size": p.voxel_size,
        "origin": v1.origin(),
        "occupied_v1": v1.count_occupied(),
        "occupied_v2": v2.count_occupied(),
        "boundary_cells": boundary.mask.count(),
        "floor": {"h_flr": floor.h_flr, "h_fv": floor.h_fv, "h_hat_fv": floor.h_hat_fv},
        "target_center_voxel": center,
        "visible_cells": above,
        "slice_layer": layer,
    });
    if let Some(dir) = &a.avatars_dir {
        let library = load_library(dir)?;
        let an = analyze(&scene, a.target, &library[0], p).map_err(Failure::data)?;
        summary["reference_avatar"] = json!(library[0].avatar_id);
        summary["footprints"] = json!(an.footprints.len());
        summary["feasible"] = json!(an.feasible.len());
        summary["shoulder_layer"] = json!(an.floor.h_hat_fv + an.volume.gesturing_shoulder_offset().k);
    }

    ensure_dir(&a.out_dir)?;
    let stem = format!("{}_obj{}_{}_s{}", a.scene, a.target, config_hash(&cfg), p.seed);
    let out = |suffix: &str| a.out_dir.join(format!("{stem}.{suffix}"));
    write_text(&out("v1.rle.json"), &pretty(&GridDump::encode(&v1)))?;
    write_text(&out("v2.rle.json"), &pretty(&GridDump::encode(&v2)))?;
    write_text(&out(&format!("visibility_k{layer}.csv")), &scores.slice_csv(layer))?;
    write_text(&out("summary.json"), &pretty(&summary))?;
    println!("{}", serde_json::to_string_pretty(&summary).expect("serializes"));
    Ok(())
}

#[derive(Args, Debug)]
pub struct PromptArgs {
    #[arg(long = "records", required = true)]
    pub records: Vec<PathBuf>,
    /// Scene directory used to look up target labels.
    #[arg(long)]
    pub scenes_dir: Option<PathBuf>,
    /// Label for every target, overriding the segmentation.
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn target_label(scenes_dir: &Path, scene_id: &str, object_id: i32) -> CliResult<String> {
    let seg: SegmentationIndex = read_json(&scenes_dir.join(format!("{scene_id}.seg.json"))).map_err(Failure::data)?;
    seg.objects
        .iter()
        .find(|o| o.id == object_id)
        .map(|o| o.label.clone())
        .ok_or_else(|| Failure::data(anyhow!("{scene_id} has no object {object_id}")))
}

pub fn prompt(a: PromptArgs) -> CliResult {
    if a.n == 0 {
        return Err(Failure::usage(anyhow!("--n must be at least 1")));
    }
    if a.label.is_none() && a.scenes_dir.is_none() {
        return Err(Failure::usage(anyhow!("either --label or --scenes-dir is required")));
    }
    let records = read_records(&a.records)?;
    ensure_dir(&a.out_dir)?;
    let h = digest(format!("{}{:?}", a.n, a.label).as_bytes());
    let mut index: BTreeMap<(String, i32), usize> = BTreeMap::new();
    for r in &records {
        let label = match &a.label {
            Some(l) => l.clone(),
            None => target_label(a.scenes_dir.as_deref().expect("checked"), &r.scene_id, r.target_object_id)?,
        };
        let prompts = render_prompt(r, &label, a.n).map_err(Failure::usage)?;
        let n = index.entry((r.scene_id.clone(), r.target_object_id)).or_insert(0);
        let path = a.out_dir.join(format!("{}_obj{}_p{}_{h}_s{}.prompt.txt", r.scene_id, r.target_object_id, n, r.rng_seed));
        *n += 1;
        write_text(&path, &(prompts.join("\n") + "\n"))?;
    }
    println!("wrote prompts for {} records to {}", records.len(), a.out_dir.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub rooms: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Surface sample spacing in meters; keep it below the voxel size.
    #[arg(long, default_value_t = 0.02)]
    pub spacing: f64,
}

pub fn synth(a: SynthArgs) -> CliResult {
    if !(a.spacing > 0.0) {
        return Err(Failure::usage(anyhow!("--spacing must be positive")));
    }
    let scenes = a.out_dir.join("scenes");
    let avatars = a.out_dir.join("avatars");
    ensure_dir(&scenes)?;
    ensure_dir(&avatars)?;
    for n in 0..a.rooms {
        let seed = a.seed + n;
        let room = synthetic_room::<f64>(&RoomSpec { spacing: a.spacing, seed, ..Default::default() }).map_err(Failure::data)?;
        let id = format!("room{seed:03}");
        write_ply_file(&room.scene.cloud, &scenes.join(format!("{id}.ply")), PlyEncoding::BinaryLittleEndian)
            .map_err(Failure::data)?;
        write_text(&scenes.join(format!("{id}.seg.json")), &pretty(&room.segmentation))?;
    }
    for (n, av) in synthetic_library::<f64>(a.spacing).map_err(Failure::data)?.iter().enumerate() {
        let ply = format!("{n:02}_{}.ply", av.avatar_id);
        write_ply_file(&av.cloud, &avatars.join(&ply), PlyEncoding::BinaryLittleEndian).map_err(Failure::data)?;
        let meta = AvatarMetadata {
            avatar_id: av.avatar_id.clone(),
            gender: av.gender_tag.clone(),
            gesturing_hand: av.gesturing_hand,
            arm_elevation_deg: av.arm_elevation_deg,
            keypoints: av.keypoints,
            ply: ply.clone().into(),
        };
        write_text(&avatars.join(format!("{n:02}_{}.json", av.avatar_id)), &pretty(&meta))?;
    }
    println!("wrote {} rooms and an avatar library to {}", a.rooms, a.out_dir.display());
    Ok(())
}
