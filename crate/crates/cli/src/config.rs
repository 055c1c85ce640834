use std::path::{Path, PathBuf};

use anyhow::anyhow;
use pointing_augment::Config;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliResult, Failure, PlacementFlags};

/// Batch configuration: placement parameters plus run plumbing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub placement: Config,
    pub scenes_dir: Option<PathBuf>,
    pub avatars_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub floor_label: String,
    /// `(scene_id, object_id)` pairs; empty means every non-floor object.
    pub targets: Vec<(String, i32)>,
    pub ascii_ply: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            placement: Config::default(),
            scenes_dir: None,
            avatars_dir: None,
            out_dir: None,
            floor_label: "floor".into(),
            targets: Vec::new(),
            ascii_ply: false,
        }
    }
}

impl PlacementFlags {
    pub fn apply(&self, c: &mut Config) {
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.voxel_size {
            c.voxel_size = v;
        }
        if let Some(v) = self.jitter_deg {
            c.jitter_deg = v;
        }
        if let Some(v) = self.num_placements {
            c.num_placements = v;
        }
        if let Some(v) = self.visibility_threshold {
            c.visibility_threshold = v;
        }
        if let Some(v) = self.margin_voxels {
            c.margin_voxels = v;
        }
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow!("reading {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| anyhow!("parsing {}: {e}", path.display()))
}

/// Parses a run configuration, rejecting keys it does not know.
pub fn parse_run_config(text: &str) -> anyhow::Result<RunConfig> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let known = serde_json::to_value(RunConfig::default())?;
    let (Some(obj), Some(known)) = (value.as_object(), known.as_object()) else {
        return Err(anyhow!("configuration must be a JSON object"));
    };
    // optional placement keys are skipped when unset
    let optional = ["floor_height_override"];
    if let Some(k) = obj.keys().find(|k| !known.contains_key(*k) && !optional.contains(&k.as_str())) {
        return Err(anyhow!("unknown configuration key {k:?}"));
    }
    Ok(serde_json::from_value(value)?)
}

pub fn load_run_config(path: Option<&Path>) -> CliResult<RunConfig> {
    let Some(p) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(p).map_err(|e| Failure::usage(anyhow!("reading {}: {e}", p.display())))?;
    parse_run_config(&text).map_err(|e| Failure::usage(anyhow!("{}: {e}", p.display())))
}

/// Short digest of everything that affects outputs (paths excluded).
pub fn config_hash(c: &RunConfig) -> String {
    let view = serde_json::json!({
        "placement": c.placement,
        "floor_label": c.floor_label,
        "targets": c.targets,
        "ascii_ply": c.ascii_ply,
    });
    digest(view.to_string().as_bytes())
}

pub fn digest(bytes: &[u8]) -> String {
    let h = Sha256::digest(bytes);
    h.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

pub fn require_dir(p: &Option<PathBuf>, what: &str) -> CliResult<PathBuf> {
    let p = p.clone().ok_or_else(|| Failure::usage(anyhow!("{what} is required")))?;
    if !p.is_dir() {
        return Err(Failure::usage(anyhow!("{what} {} does not exist", p.display())));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flattened_config_parses() {
        let c = parse_run_config(r#"{"seed": 3, "c1": 0.05, "floor_label": "ground", "targets": [["s", 2]]}"#).unwrap();
        assert_eq!(c.placement.seed, 3);
        assert_eq!(c.placement.floor_offset_m, 0.05);
        assert_eq!(c.floor_label, "ground");
        assert_eq!(c.targets, vec![("s".to_string(), 2)]);
        assert!(parse_run_config(r#"{"sead": 3}"#).is_err());
        assert!(parse_run_config(r#"{"floor_height_override": 0.1}"#).is_ok());
    }

    #[test]
    fn hash_ignores_paths() {
        let a = RunConfig::default();
        let b = RunConfig { out_dir: Some("x".into()), ..RunConfig::default() };
        assert_eq!(config_hash(&a), config_hash(&b));
        let mut c = RunConfig::default();
        c.placement.seed = 1;
        assert_ne!(config_hash(&a), config_hash(&c));
        assert_eq!(config_hash(&a).len(), 12);
    }

    #[test]
    fn flags_override() {
        let mut c = Config::default();
        PlacementFlags { seed: Some(9), num_placements: Some(2), ..Default::default() }.apply(&mut c);
        assert_eq!((c.seed, c.num_placements, c.margin_voxels), (9, 2, 10));
    }
}
