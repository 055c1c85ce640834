//! Point clouds with instance segmentation, scene objects, avatars and
//! scene composition.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{BoundingBox3D, Vec3, YawTransform};
use crate::ply::read_ply_file;
use crate::scalar::Real;

pub const UNLABELED: i32 = -1;
pub const DEFAULT_FLOOR_LABEL: &str = "floor";

const NORMAL_TOLERANCE: f64 = 1e-3;
const FOOT_TOLERANCE: f64 = 1e-6;

/// Colored points with optional normals and per-point labels.
///
/// All per-point arrays have the same length; this is checked in
/// [`PointCloud::from_parts`] and cannot be broken afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    points: Vec<Vec3<T>>,
    colors: Vec<[u8; 3]>,
    normals: Option<Vec<Vec3<T>>>,
    instance_label: Vec<i32>,
    semantic_label: Vec<i32>,
}

impl<T: Real> PointCloud<T> {
    pub fn from_parts(
        points: Vec<Vec3<T>>,
        colors: Vec<[u8; 3]>,
        normals: Option<Vec<Vec3<T>>>,
        instance_label: Vec<i32>,
        semantic_label: Vec<i32>,
    ) -> Result<Self> {
        let n = points.len();
        let lens = [
            colors.len(),
            instance_label.len(),
            semantic_label.len(),
            normals.as_ref().map_or(n, Vec::len),
        ];
        if let Some(&bad) = lens.iter().find(|&&l| l != n) {
            return Err(Error::LengthMismatch { expected: n, actual: bad });
        }
        if let Some(ns) = &normals {
            let tol = T::lit(NORMAL_TOLERANCE);
            if let Some(i) = ns.iter().position(|v| (v.norm() - T::one()).abs() > tol) {
                return Err(Error::InvalidInput(format!("normal {i} is not unit length")));
            }
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!("point {i} is not finite")));
        }
        Ok(PointCloud { points, colors, normals, instance_label, semantic_label })
    }

    /// Unlabeled, uncolored cloud.
    pub fn from_points(points: Vec<Vec3<T>>) -> Result<Self> {
        let n = points.len();
        Self::from_parts(points, vec![[0; 3]; n], None, vec![UNLABELED; n], vec![UNLABELED; n])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3<T>] {
        &self.points
    }

    pub fn colors(&self) -> &[[u8; 3]] {
        &self.colors
    }

    pub fn normals(&self) -> Option<&[Vec3<T>]> {
        self.normals.as_deref()
    }

    pub fn instance_labels(&self) -> &[i32] {
        &self.instance_label
    }

    pub fn semantic_labels(&self) -> &[i32] {
        &self.semantic_label
    }

    pub fn with_colors(mut self, colors: Vec<[u8; 3]>) -> Result<Self> {
        if colors.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), actual: colors.len() });
        }
        self.colors = colors;
        Ok(self)
    }

    pub fn with_labels(mut self, instance: Vec<i32>, semantic: Vec<i32>) -> Result<Self> {
        for l in [instance.len(), semantic.len()] {
            if l != self.len() {
                return Err(Error::LengthMismatch { expected: self.len(), actual: l });
            }
        }
        self.instance_label = instance;
        self.semantic_label = semantic;
        Ok(self)
    }

    pub fn bounds(&self) -> Option<BoundingBox3D<T>> {
        BoundingBox3D::enclosing(self.points.iter().copied())
    }

    pub fn cast<U: Real>(&self) -> PointCloud<U> {
        PointCloud {
            points: self.points.iter().map(|p| p.cast()).collect(),
            colors: self.colors.clone(),
            normals: self.normals.as_ref().map(|ns| ns.iter().map(|n| n.cast()).collect()),
            instance_label: self.instance_label.clone(),
            semantic_label: self.semantic_label.clone(),
        }
    }
}

/// A labeled subset of a scene cloud.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneObject {
    pub object_id: i32,
    pub semantic_name: String,
    pub point_indices: Vec<usize>,
}

impl SceneObject {
    pub fn validate_for<T: Real>(&self, cloud: &PointCloud<T>) -> Result<()> {
        if self.point_indices.is_empty() {
            return Err(Error::InvalidInput(format!("object {} has no points", self.object_id)));
        }
        if let Some(&i) = self.point_indices.iter().find(|&&i| i >= cloud.len()) {
            return Err(Error::format(format!(
                "object {} index {i} out of range for {} points",
                self.object_id,
                cloud.len()
            )));
        }
        Ok(())
    }
}

/// Axis-aligned box over an object's points.
pub fn object_bbox<T: Real>(cloud: &PointCloud<T>, obj: &SceneObject) -> BoundingBox3D<T> {
    BoundingBox3D::enclosing(obj.point_indices.iter().map(|&i| cloud.points[i]))
        .expect("scene object must have at least one point")
}

/// Segmentation index file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentationIndex {
    pub objects: Vec<SegmentationEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor_label: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentationEntry {
    pub id: i32,
    pub label: String,
    pub point_indices: Vec<usize>,
}

/// A loaded scene: labeled cloud, its objects, and floor points.
#[derive(Debug, Clone)]
pub struct Scene<T> {
    pub cloud: PointCloud<T>,
    pub objects: Vec<SceneObject>,
    pub floor_indices: Vec<usize>,
    /// Semantic label `k` of the cloud names `semantic_names[k]`.
    pub semantic_names: Vec<String>,
}

impl<T: Real> Scene<T> {
    pub fn object(&self, id: i32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.object_id == id)
    }
}

/// Applies a segmentation index to an unlabeled cloud.
///
/// `floor_label` overrides the index's own `floor_label`, which in turn
/// defaults to `"floor"`. A scene without floor points is not an error
/// here; it is logged and floor estimation then needs an explicit height.
pub fn label_scene<T: Real>(
    cloud: PointCloud<T>,
    seg: &SegmentationIndex,
    floor_label: Option<&str>,
) -> Result<Scene<T>> {
    let n = cloud.len();
    let names: BTreeSet<&str> = seg.objects.iter().map(|o| o.label.as_str()).collect();
    let semantic_names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let sem_id: BTreeMap<&str, i32> =
        names.iter().enumerate().map(|(i, &s)| (s, i as i32)).collect();

    let mut instance = vec![UNLABELED; n];
    let mut semantic = vec![UNLABELED; n];
    let mut seen_ids = BTreeSet::new();
    let mut objects = Vec::with_capacity(seg.objects.len());
    for e in &seg.objects {
        if !seen_ids.insert(e.id) {
            return Err(Error::format(format!("duplicate object id {}", e.id)));
        }
        let obj = SceneObject {
            object_id: e.id,
            semantic_name: e.label.clone(),
            point_indices: e.point_indices.clone(),
        };
        obj.validate_for(&cloud)?;
        for &i in &obj.point_indices {
            if instance[i] != UNLABELED {
                return Err(Error::format(format!(
                    "point {i} belongs to objects {} and {}",
                    instance[i], e.id
                )));
            }
            instance[i] = e.id;
            semantic[i] = sem_id[e.label.as_str()];
        }
        objects.push(obj);
    }

    let floor_name = floor_label
        .or(seg.floor_label.as_deref())
        .unwrap_or(DEFAULT_FLOOR_LABEL);
    let mut floor_indices: Vec<usize> = objects
        .iter()
        .filter(|o| o.semantic_name == floor_name)
        .flat_map(|o| o.point_indices.iter().copied())
        .collect();
    floor_indices.sort_unstable();
    if floor_indices.is_empty() {
        log::warn!("no object labeled `{floor_name}`; floor height needs an override");
    }

    let cloud = cloud.with_labels(instance, semantic)?;
    Ok(Scene { cloud, objects, floor_indices, semantic_names })
}

pub fn read_segmentation(path: &Path) -> Result<SegmentationIndex> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

pub fn load_scene<T: Real>(ply_path: &Path, seg_path: &Path, floor_label: Option<&str>) -> Result<Scene<T>> {
    let cloud = read_ply_file(ply_path)?;
    let seg = read_segmentation(seg_path)?;
    label_scene(cloud, &seg, floor_label)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub fn as_str(self) -> &'static str {
        match self {
            Hand::Left => "left",
            Hand::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct Keypoints<T> {
    pub left_shoulder: Vec3<T>,
    pub right_shoulder: Vec3<T>,
    pub left_fingertip: Vec3<T>,
    pub right_fingertip: Vec3<T>,
    pub foot: Vec3<T>,
}

impl<T: Real> Keypoints<T> {
    pub fn shoulder(&self, hand: Hand) -> Vec3<T> {
        match hand {
            Hand::Left => self.left_shoulder,
            Hand::Right => self.right_shoulder,
        }
    }

    pub fn fingertip(&self, hand: Hand) -> Vec3<T> {
        match hand {
            Hand::Left => self.left_fingertip,
            Hand::Right => self.right_fingertip,
        }
    }
}

/// A pre-posed human point set in its local frame (+Z up, feet at the
/// lowest point).
#[derive(Debug, Clone)]
pub struct AvatarModel<T> {
    pub avatar_id: String,
    pub cloud: PointCloud<T>,
    pub keypoints: Keypoints<T>,
    pub gesturing_hand: Hand,
    /// Angle of the pre-posed pointing arm above the local XY plane.
    pub arm_elevation_deg: T,
    pub gender_tag: String,
}

impl<T: Real> AvatarModel<T> {
    pub fn new(
        avatar_id: impl Into<String>,
        cloud: PointCloud<T>,
        keypoints: Keypoints<T>,
        gesturing_hand: Hand,
        arm_elevation_deg: T,
        gender_tag: impl Into<String>,
    ) -> Result<Self> {
        let avatar = AvatarModel {
            avatar_id: avatar_id.into(),
            cloud,
            keypoints,
            gesturing_hand,
            arm_elevation_deg,
            gender_tag: gender_tag.into(),
        };
        avatar.validate()?;
        Ok(avatar)
    }

    pub fn validate(&self) -> Result<()> {
        let bounds = self.cloud.bounds().ok_or(Error::EmptyCloud)?;
        let foot_gap = (self.keypoints.foot.z - bounds.min_corner.z).abs();
        if foot_gap > T::lit(FOOT_TOLERANCE) {
            return Err(Error::InvalidInput(format!(
                "avatar {}: foot z is {foot_gap} above the lowest point",
                self.avatar_id
            )));
        }
        if self.shoulder() == self.fingertip() {
            return Err(Error::InvalidInput(format!(
                "avatar {}: gesturing fingertip equals its shoulder",
                self.avatar_id
            )));
        }
        Ok(())
    }

    pub fn shoulder(&self) -> Vec3<T> {
        self.keypoints.shoulder(self.gesturing_hand)
    }

    pub fn fingertip(&self) -> Vec3<T> {
        self.keypoints.fingertip(self.gesturing_hand)
    }
}

/// Avatar metadata file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AvatarMetadata {
    pub avatar_id: String,
    pub gender: String,
    pub gesturing_hand: Hand,
    pub arm_elevation_deg: f64,
    pub keypoints: Keypoints<f64>,
    /// Relative to the metadata file.
    pub ply: PathBuf,
}

pub fn load_avatar<T: Real>(meta_path: &Path) -> Result<AvatarModel<T>> {
    let text = fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
    let meta: AvatarMetadata = serde_json::from_str(&text)
        .map_err(|e| Error::format(format!("{}: {e}", meta_path.display())))?;
    let ply = meta_path.parent().unwrap_or(Path::new(".")).join(&meta.ply);
    let cloud = read_ply_file(&ply)?;
    let k = meta.keypoints;
    let keypoints = Keypoints {
        left_shoulder: k.left_shoulder.cast(),
        right_shoulder: k.right_shoulder.cast(),
        left_fingertip: k.left_fingertip.cast(),
        right_fingertip: k.right_fingertip.cast(),
        foot: k.foot.cast(),
    };
    AvatarModel::new(
        meta.avatar_id,
        cloud,
        keypoints,
        meta.gesturing_hand,
        T::lit(meta.arm_elevation_deg),
        meta.gender,
    )
}

/// Appends a transformed avatar to a scene.
///
/// Avatar points get instance label `max(scene labels) + 1` and semantic
/// label `human_semantic_label`. Normals survive only when both inputs
/// carry them.
pub fn compose_scene<T: Real>(
    scene: &PointCloud<T>,
    avatar: &AvatarModel<T>,
    transform: &YawTransform<T>,
    human_semantic_label: i32,
) -> PointCloud<T> {
    let avatar_instance = scene
        .instance_label
        .iter()
        .copied()
        .max()
        .map_or(0, |m| m.max(UNLABELED) + 1);
    let a = &avatar.cloud;
    let mut out = scene.clone();
    out.points.extend(a.points.iter().map(|&p| transform.apply(p)));
    out.colors.extend_from_slice(&a.colors);
    out.instance_label.extend(std::iter::repeat_n(avatar_instance, a.len()));
    out.semantic_label.extend(std::iter::repeat_n(human_semantic_label, a.len()));
    out.normals = match (&scene.normals, &a.normals) {
        (Some(sn), Some(an)) => {
            let mut ns = sn.clone();
            ns.extend(an.iter().map(|&n| transform.rotate(n)));
            Some(ns)
        }
        (Some(_), None) => {
            log::warn!("avatar {} has no normals; dropping scene normals", avatar.avatar_id);
            None
        }
        _ => None,
    };
    out
}
