use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::Args;
use pointing_augment::placement::{impute, job_rng, records_to_json};
use pointing_augment::ply::{write_ply_file, PlyEncoding};
use pointing_augment::scene::{load_avatar, load_scene, Scene};
use pointing_augment::{Avatar, Cloud, Error, Record};
use rayon::prelude::*;

use crate::config::{config_hash, load_run_config, require_dir, RunConfig};
use crate::{ensure_dir, CliResult, Failure, PlacementFlags, EXIT_NO_PLACEMENT};

#[derive(Args, Debug)]
pub struct ImputeArgs {
    /// JSON run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory of `<scene_id>.ply` + `<scene_id>.seg.json` pairs.
    #[arg(long)]
    pub scenes_dir: Option<PathBuf>,
    /// Directory of avatar metadata JSON files; the first by name drives
    /// the placement search.
    #[arg(long)]
    pub avatars_dir: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Target as `scene_id:object_id`; repeatable.
    #[arg(long = "target", value_parser = parse_target)]
    pub targets: Vec<(String, i32)>,
    #[arg(long)]
    pub floor_label: Option<String>,
    #[arg(long)]
    pub human_semantic_label: Option<i32>,
    /// Write ASCII instead of binary PLY.
    #[arg(long)]
    pub ascii_ply: bool,
    #[command(flatten)]
    pub placement: PlacementFlags,
}

fn parse_target(s: &str) -> Result<(String, i32), String> {
    let (scene, id) = s.rsplit_once(':').ok_or("expected scene_id:object_id")?;
    let id = id.parse().map_err(|e| format!("object id: {e}"))?;
    Ok((scene.to_string(), id))
}

pub fn resolve(args: &ImputeArgs) -> CliResult<RunConfig> {
    let mut c = load_run_config(args.config.as_deref())?;
    for (slot, v) in [(&mut c.scenes_dir, &args.scenes_dir), (&mut c.avatars_dir, &args.avatars_dir), (&mut c.out_dir, &args.out_dir)] {
        if v.is_some() {
            *slot = v.clone();
        }
    }
    if !args.targets.is_empty() {
        c.targets = args.targets.clone();
    }
    if let Some(l) = &args.floor_label {
        c.floor_label = l.clone();
    }
    if let Some(l) = args.human_semantic_label {
        c.placement.human_semantic_label = l;
    }
    c.ascii_ply |= args.ascii_ply;
    args.placement.apply(&mut c.placement);
    c.placement.validate().map_err(Failure::usage)?;
    Ok(c)
}

/// Scene ids with both files present, sorted.
pub fn discover_scenes(dir: &Path) -> CliResult<Vec<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::data(anyhow!("reading {}: {e}", dir.display())))?;
    let mut ids: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "ply"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .filter(|id| dir.join(format!("{id}.seg.json")).is_file())
        .collect();
    ids.sort();
    Ok(ids)
}

pub fn load_scene_by_id(dir: &Path, id: &str, floor_label: &str) -> CliResult<Scene<f64>> {
    load_scene(&dir.join(format!("{id}.ply")), &dir.join(format!("{id}.seg.json")), Some(floor_label))
        .map_err(Failure::data)
}

pub fn load_library(dir: &Path) -> CliResult<Vec<Avatar>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::data(anyhow!("reading {}: {e}", dir.display())))?;
    let mut metas: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    metas.sort();
    if metas.is_empty() {
        return Err(Failure::data(anyhow!("no avatar metadata in {}", dir.display())));
    }
    metas.iter().map(|p| load_avatar(p).map_err(Failure::data)).collect()
}

type JobOutcome = (i32, Result<Vec<(Cloud, Record)>, Error>);

pub fn run(args: ImputeArgs) -> CliResult {
    let cfg = resolve(&args)?;
    let scenes_dir = require_dir(&cfg.scenes_dir, "scenes_dir")?;
    let avatars_dir = require_dir(&cfg.avatars_dir, "avatars_dir")?;
    let out_dir = cfg.out_dir.clone().ok_or_else(|| Failure::usage(anyhow!("out_dir is required")))?;
    let hash = config_hash(&cfg);
    let seed = cfg.placement.seed;

    let library = load_library(&avatars_dir)?;
    let all_scenes = discover_scenes(&scenes_dir)?;
    let mut wanted: BTreeMap<String, Vec<i32>> = BTreeMap::new();
    if cfg.targets.is_empty() {
        for id in &all_scenes {
            wanted.insert(id.clone(), Vec::new());
        }
    } else {
        for (scene, obj) in &cfg.targets {
            if !all_scenes.contains(scene) {
                return Err(Failure::usage(anyhow!("target scene {scene} not found in {}", scenes_dir.display())));
            }
            wanted.entry(scene.clone()).or_default().push(*obj);
        }
    }

    let results: Vec<(String, Vec<JobOutcome>)> = wanted
        .par_iter()
        .map(|(scene_id, explicit)| -> CliResult<(String, Vec<JobOutcome>)> {
            let scene = load_scene_by_id(&scenes_dir, scene_id, &cfg.floor_label)?;
            let mut targets: Vec<i32> = if explicit.is_empty() {
                scene.objects.iter().filter(|o| o.semantic_name != cfg.floor_label).map(|o| o.object_id).collect()
            } else {
                explicit.clone()
            };
            targets.sort();
            targets.dedup();
            let jobs = targets
                .par_iter()
                .map(|&obj| {
                    let mut rng = job_rng(seed, scene_id, obj);
                    (obj, impute(scene_id, &scene, obj, &library, &cfg.placement, &mut rng))
                })
                .collect();
            Ok((scene_id.clone(), jobs))
        })
        .collect::<CliResult<_>>()?;

    ensure_dir(&out_dir)?;
    let encoding = if cfg.ascii_ply { PlyEncoding::Ascii } else { PlyEncoding::BinaryLittleEndian };
    let (mut placed, mut failed, mut total) = (0usize, 0usize, 0usize);
    let mut summary = Vec::new();
    for (scene_id, jobs) in &results {
        for (obj, res) in jobs {
            total += 1;
            match res {
                Ok(items) => {
                    placed += 1;
                    let stem = format!("{scene_id}_obj{obj}");
                    for (n, (cloud, _)) in items.iter().enumerate() {
                        let path = out_dir.join(format!("{stem}_p{n}_{hash}_s{seed}.ply"));
                        write_ply_file(cloud, &path, encoding).map_err(Failure::data)?;
                    }
                    let records: Vec<Record> = items.iter().map(|(_, r)| r.clone()).collect();
                    let path = out_dir.join(format!("{stem}_{hash}_s{seed}.records.json"));
                    write_text(&path, &records_to_json(&records))?;
                    summary.push(serde_json::json!({"scene_id": scene_id, "object_id": obj, "placements": items.len()}));
                }
                Err(Error::NoPlacement(_)) => {
                    failed += 1;
                    log::warn!("{scene_id} object {obj}: no feasible placement");
                    summary.push(serde_json::json!({"scene_id": scene_id, "object_id": obj, "placements": 0}));
                }
                Err(e) => return Err(Failure::data(anyhow!("{scene_id} object {obj}: {e}"))),
            }
        }
    }
    // paths stay out so identical runs in different directories match
    let resolved = RunConfig { scenes_dir: None, avatars_dir: None, out_dir: None, ..cfg.clone() };
    let manifest = serde_json::json!({ "config_hash": hash, "seed": seed, "config": resolved, "targets": summary });
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_text(&out_dir.join(format!("run_{hash}_s{seed}.json")), &text)?;
    println!("{placed} of {total} targets placed ({failed} without a feasible placement); outputs in {}", out_dir.display());

    if total == 0 {
        return Err(Failure::data(anyhow!("no targets to place")));
    }
    if placed == 0 {
        return Err(Failure { code: EXIT_NO_PLACEMENT, error: anyhow!("no target could be placed") });
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| Failure::data(anyhow!("writing {}: {e}", path.display())))
}
