//! Procedural rooms and stick-figure avatars for tests, benchmarks and
//! demos.
//!
//! Surfaces are sampled on regular lattices no coarser than `spacing`, so
//! any voxel size at least `spacing` sees watertight walls.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geom::{BoundingBox3D, Vec3};
use crate::scalar::Real;
use crate::scene::{label_scene, AvatarModel, Hand, Keypoints, PointCloud, Scene, SegmentationEntry, SegmentationIndex};

pub const TARGET_OBJECT_ID: i32 = 1;
const FURNITURE: [&str; 4] = ["cabinet", "chair", "sofa", "shelf"];

#[derive(Debug, Clone, PartialEq)]
pub struct RoomSpec {
    /// Room extent in meters along x, y, and wall height.
    pub size: [f64; 3],
    /// Largest gap between neighboring surface samples.
    pub spacing: f64,
    pub num_furniture: usize,
    /// Amplitude of the vertical floor noise.
    pub floor_noise: f64,
    pub seed: u64,
}

impl Default for RoomSpec {
    fn default() -> Self {
        RoomSpec { size: [6.0, 5.0, 3.0], spacing: 0.02, num_furniture: 5, floor_noise: 0.003, seed: 0 }
    }
}

/// A generated room and the box of every object in it.
#[derive(Debug, Clone)]
pub struct SyntheticRoom<T> {
    pub scene: Scene<T>,
    pub segmentation: SegmentationIndex,
    pub target_object_id: i32,
    pub boxes: Vec<(i32, BoundingBox3D<f64>)>,
}

struct Builder {
    points: Vec<Vec3<f64>>,
    colors: Vec<[u8; 3]>,
    spacing: f64,
}

impl Builder {
    /// Lattice over the parallelogram `o + a·u + b·v`, `a, b ∈ [0, 1]`.
    fn patch(&mut self, o: Vec3<f64>, u: Vec3<f64>, v: Vec3<f64>, color: [u8; 3]) -> Vec<usize> {
        let nu = (u.norm() / self.spacing).ceil().max(1.0) as usize;
        let nv = (v.norm() / self.spacing).ceil().max(1.0) as usize;
        let start = self.points.len();
        for a in 0..=nu {
            for b in 0..=nv {
                self.points.push(o + u * (a as f64 / nu as f64) + v * (b as f64 / nv as f64));
                self.colors.push(color);
            }
        }
        (start..self.points.len()).collect()
    }

    /// Top and four sides of an axis-aligned box.
    fn cuboid(&mut self, b: &BoundingBox3D<f64>, color: [u8; 3]) -> Vec<usize> {
        let (lo, e) = (b.min_corner, b.extent());
        let (ex, ey, ez) = (Vec3::new(e.x, 0.0, 0.0), Vec3::new(0.0, e.y, 0.0), Vec3::new(0.0, 0.0, e.z));
        let mut idx = self.patch(lo + ez, ex, ey, color);
        idx.extend(self.patch(lo, ex, ez, color));
        idx.extend(self.patch(lo + ey, ex, ez, color));
        idx.extend(self.patch(lo, ey, ez, color));
        idx.extend(self.patch(lo + ex, ey, ez, color));
        idx
    }
}

fn overlaps(a: &BoundingBox3D<f64>, b: &BoundingBox3D<f64>, gap: f64) -> bool {
    let g = Vec3::new(gap, gap, 0.0);
    BoundingBox3D::new(a.min_corner - g, a.max_corner + g).unwrap().intersection(b).is_some()
}

/// A walled room with a floor, a table (the target) and random box
/// furniture. Deterministic in `spec.seed`.
pub fn synthetic_room<T: Real>(spec: &RoomSpec) -> Result<SyntheticRoom<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let [w, d, h] = spec.size;
    let mut b = Builder { points: Vec::new(), colors: Vec::new(), spacing: spec.spacing };

    let floor = b.patch(Vec3::zero(), Vec3::new(w, 0.0, 0.0), Vec3::new(0.0, d, 0.0), [150, 120, 90]);
    if spec.floor_noise > 0.0 {
        for &i in &floor {
            b.points[i].z += rng.random_range(-spec.floor_noise..=spec.floor_noise);
        }
    }
    let up = Vec3::new(0.0, 0.0, h);
    let wall_color = [220, 220, 210];
    let mut walls = b.patch(Vec3::zero(), Vec3::new(w, 0.0, 0.0), up, wall_color);
    walls.extend(b.patch(Vec3::new(0.0, d, 0.0), Vec3::new(w, 0.0, 0.0), up, wall_color));
    walls.extend(b.patch(Vec3::zero(), Vec3::new(0.0, d, 0.0), up, wall_color));
    walls.extend(b.patch(Vec3::new(w, 0.0, 0.0), Vec3::new(0.0, d, 0.0), up, wall_color));

    let mut boxes: Vec<(i32, BoundingBox3D<f64>)> = Vec::new();
    let mut entries = vec![
        SegmentationEntry { id: 0, label: "floor".into(), point_indices: floor },
        SegmentationEntry { id: 100, label: "wall".into(), point_indices: walls },
    ];

    // table near the middle third of the room
    let (tx, ty) = (rng.random_range(0.9..1.5), rng.random_range(0.6..1.0));
    let cx = rng.random_range(w / 3.0..2.0 * w / 3.0);
    let cy = rng.random_range(d / 3.0..2.0 * d / 3.0);
    let table = BoundingBox3D::new(
        Vec3::new(cx - tx / 2.0, cy - ty / 2.0, 0.0),
        Vec3::new(cx + tx / 2.0, cy + ty / 2.0, rng.random_range(0.7..0.8)),
    )
    .unwrap();
    entries.push(SegmentationEntry {
        id: TARGET_OBJECT_ID,
        label: "table".into(),
        point_indices: b.cuboid(&table, [120, 70, 30]),
    });
    boxes.push((TARGET_OBJECT_ID, table));

    let mut id = TARGET_OBJECT_ID + 1;
    let mut tries = 0;
    while (id - TARGET_OBJECT_ID - 1) < spec.num_furniture as i32 && tries < 200 * (spec.num_furniture + 1) {
        tries += 1;
        let (sx, sy) = (rng.random_range(0.3..1.2), rng.random_range(0.3..1.2));
        let sz = rng.random_range(0.4..1.8);
        let x0 = rng.random_range(0.05..(w - sx - 0.05).max(0.06));
        let y0 = rng.random_range(0.05..(d - sy - 0.05).max(0.06));
        let cand = BoundingBox3D::new(Vec3::new(x0, y0, 0.0), Vec3::new(x0 + sx, y0 + sy, sz)).unwrap();
        if boxes.iter().any(|(_, o)| overlaps(o, &cand, 0.6)) {
            continue;
        }
        let label = FURNITURE[rng.random_range(0..FURNITURE.len())];
        let color = [rng.random(), rng.random(), rng.random()];
        entries.push(SegmentationEntry { id, label: label.into(), point_indices: b.cuboid(&cand, color) });
        boxes.push((id, cand));
        id += 1;
    }

    let points = b.points.iter().map(|p| p.cast()).collect();
    let cloud = PointCloud::from_points(points)?.with_colors(b.colors)?;
    let segmentation = SegmentationIndex { objects: entries, floor_label: None };
    let scene = label_scene(cloud, &segmentation, None)?;
    Ok(SyntheticRoom { scene, segmentation, target_object_id: TARGET_OBJECT_ID, boxes })
}

/// Upright stick figure, 1.75 m tall, foot at the local origin, pointing
/// arm along local +x raised by `arm_elevation_deg`. The idle arm hangs
/// down.
pub fn synthetic_avatar<T: Real>(avatar_id: &str, hand: Hand, arm_elevation_deg: f64, spacing: f64) -> Result<AvatarModel<T>> {
    let mut pts: Vec<Vec3<f64>> = Vec::new();
    let mut tube = |a: Vec3<f64>, b: Vec3<f64>, r: f64| {
        let len = (b - a).norm();
        let n = (len / spacing).ceil().max(1.0) as usize;
        let ring = ((std::f64::consts::TAU * r / spacing).ceil() as usize).max(6);
        let axis = (b - a) * (1.0 / len);
        let helper = if axis.z.abs() < 0.9 { Vec3::new(0.0, 0.0, 1.0) } else { Vec3::new(1.0, 0.0, 0.0) };
        let e1 = axis.cross(helper);
        let e1 = e1 * (1.0 / e1.norm());
        let e2 = axis.cross(e1);
        for s in 0..=n {
            let c = a + (b - a) * (s as f64 / n as f64);
            for q in 0..ring {
                let t = std::f64::consts::TAU * q as f64 / ring as f64;
                pts.push(c + e1 * (r * t.cos()) + e2 * (r * t.sin()));
            }
        }
    };
    let shoulder_z = 1.45;
    let side = 0.2;
    let (left_sh, right_sh) = (Vec3::new(0.0, side, shoulder_z), Vec3::new(0.0, -side, shoulder_z));
    let e = arm_elevation_deg.to_radians();
    let arm = Vec3::new(e.cos(), 0.0, e.sin()) * 0.65;
    let hang = Vec3::new(0.0, 0.0, -0.6);
    let (left_tip, right_tip) = match hand {
        Hand::Left => (left_sh + arm, right_sh + hang),
        Hand::Right => (left_sh + hang, right_sh + arm),
    };
    // legs, torso, head, shoulder bar, arms
    tube(Vec3::new(0.0, 0.09, 0.08), Vec3::new(0.0, 0.09, 0.9), 0.07);
    tube(Vec3::new(0.0, -0.09, 0.08), Vec3::new(0.0, -0.09, 0.9), 0.07);
    tube(Vec3::new(0.0, 0.0, 0.9), Vec3::new(0.0, 0.0, shoulder_z), 0.15);
    tube(Vec3::new(0.0, 0.0, 1.55), Vec3::new(0.0, 0.0, 1.67), 0.08);
    tube(left_sh, right_sh, 0.05);
    tube(left_sh, left_tip, 0.04);
    tube(right_sh, right_tip, 0.04);
    // feet soles
    pts.push(Vec3::zero());
    for &y in &[0.09, -0.09] {
        for s in 0..=8 {
            pts.push(Vec3::new(-0.05 + 0.2 * s as f64 / 8.0, y, 0.0));
        }
    }
    pts.push(Vec3::new(0.0, 0.0, 1.75));
    let min_z = pts.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    debug_assert!(min_z >= -1e-12);

    let c = |v: Vec3<f64>| v.cast::<T>();
    let keypoints = Keypoints {
        left_shoulder: c(left_sh),
        right_shoulder: c(right_sh),
        left_fingertip: c(left_tip),
        right_fingertip: c(right_tip),
        foot: Vec3::zero(),
    };
    let n = pts.len();
    let cloud = PointCloud::from_points(pts.into_iter().map(c).collect())?.with_colors(vec![[230, 190, 160]; n])?;
    AvatarModel::new(avatar_id, cloud, keypoints, hand, T::lit(arm_elevation_deg), "neutral")
}

/// Both hands at elevations -30° through 45° in 15° steps. The first
/// entry, a right-handed level arm, serves as the search reference.
pub fn synthetic_library<T: Real>(spacing: f64) -> Result<Vec<AvatarModel<T>>> {
    let mut out = Vec::new();
    for elev in [0, -30, -15, 15, 30, 45] {
        for hand in [Hand::Right, Hand::Left] {
            out.push(synthetic_avatar(&format!("stick_{}_{elev}", hand.as_str()), hand, elev as f64, spacing)?);
        }
    }
    Ok(out)
}
