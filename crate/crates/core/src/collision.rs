//! Avatar voxelization and the sliding-volume search for collision-free
//! footprints.
//!
//! A footprint `(i, j)` places the avatar mask's `(0, 0, 0)` corner at
//! scene cell `(i, j, floor_k)`. It is collision-free when no occupied
//! mask cell lands on an occupied scene cell:
//! `Σ H(x,y,z)·V1(i+x, j+y, floor_k+z) = 0`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scalar::Real;
use crate::scene::{AvatarModel, Hand};
use crate::voxel::{bin, voxelize_points, Index3, OccupancyGrid};

pub const DEFAULT_MARGIN_VOXELS: usize = 10;

#[derive(Debug, Clone)]
pub struct AvatarVolume<T> {
    /// Avatar mask in the avatar's local frame; origin is the local min
    /// corner shifted by the margin in x and y.
    pub h: OccupancyGrid<T>,
    pub h_hv: usize,
    pub foot_offset: Index3,
    pub shoulder_offset_left: Index3,
    pub shoulder_offset_right: Index3,
    pub fingertip_offset_left: Index3,
    pub fingertip_offset_right: Index3,
    pub margin_voxels: usize,
    pub gesturing_hand: Hand,
}

impl<T: Real> AvatarVolume<T> {
    pub fn shoulder_offset(&self, hand: Hand) -> Index3 {
        match hand {
            Hand::Left => self.shoulder_offset_left,
            Hand::Right => self.shoulder_offset_right,
        }
    }

    pub fn fingertip_offset(&self, hand: Hand) -> Index3 {
        match hand {
            Hand::Left => self.fingertip_offset_left,
            Hand::Right => self.fingertip_offset_right,
        }
    }

    pub fn gesturing_shoulder_offset(&self) -> Index3 {
        self.shoulder_offset(self.gesturing_hand)
    }

    /// Mask footprint extent in cells `(x, y)`.
    pub fn footprint_dims(&self) -> [usize; 2] {
        let [x, y, _] = self.h.dims();
        [x, y]
    }

    /// Local point that maps to the min corner of footprint cell `(i, j)`
    /// at layer `floor_k`.
    pub fn local_anchor(&self) -> Vec3<T> {
        self.h.origin()
    }
}

/// Voxelizes the avatar and dilates the mask by `margin_voxels` in x and
/// y (square structuring element, z untouched).
pub fn voxelize_avatar<T: Real>(avatar: &AvatarModel<T>, voxel_size: T, margin_voxels: usize) -> Result<AvatarVolume<T>> {
    let raw = voxelize_points(avatar.cloud.points(), voxel_size, 0)?;
    let [rx, ry, rz] = raw.dims();
    let m = margin_voxels;
    let shift = T::from_usize_exact(m) * voxel_size;
    let origin = raw.origin() - Vec3::new(shift, shift, T::zero());
    let mut h = OccupancyGrid::empty(origin, voxel_size, [rx + 2 * m, ry + 2 * m, rz]);
    for c in raw.iter_occupied() {
        for di in 0..=2 * m {
            for dj in 0..=2 * m {
                h.set(Index3::new(c.i + di, c.j + dj, c.k), true);
            }
        }
    }

    let offset = |p: Vec3<T>, what: &str| -> Result<Index3> {
        let dims = h.dims();
        let mut out = [0usize; 3];
        for axis in 0..3 {
            let b = bin(p[axis], h.origin()[axis], h.voxel_size()).to_i64().unwrap_or(i64::MIN);
            // one cell of slack for keypoints sitting on the hull
            if b < -1 || b > dims[axis] as i64 {
                return Err(Error::InvalidInput(format!(
                    "avatar {}: {what} keypoint outside the avatar volume",
                    avatar.avatar_id
                )));
            }
            out[axis] = b.clamp(0, dims[axis] as i64 - 1) as usize;
        }
        Ok(out.into())
    };
    let k = &avatar.keypoints;
    Ok(AvatarVolume {
        h_hv: rz,
        foot_offset: offset(k.foot, "foot")?,
        shoulder_offset_left: offset(k.left_shoulder, "left shoulder")?,
        shoulder_offset_right: offset(k.right_shoulder, "right shoulder")?,
        fingertip_offset_left: offset(k.left_fingertip, "left fingertip")?,
        fingertip_offset_right: offset(k.right_fingertip, "right fingertip")?,
        margin_voxels,
        gesturing_hand: avatar.gesturing_hand,
        h,
    })
}

/// Collision-free footprint corners, sorted lexicographically by `(i, j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FootprintSet {
    pub floor_k: usize,
    pub cells: Vec<(usize, usize)>,
}

impl FootprintSet {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.cells.binary_search(&(i, j)).is_ok()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// A non-empty mask row, packed in 64-cell words.
struct MaskRow {
    y: usize,
    z: usize,
    words: Vec<u64>,
}

fn mask_rows<T: Real>(h: &OccupancyGrid<T>) -> Vec<MaskRow> {
    let [_, hy, hz] = h.dims();
    let mut rows = Vec::new();
    for z in 0..hz {
        for y in 0..hy {
            let words = h.row(y, z).to_vec();
            if words.iter().any(|&w| w != 0) {
                rows.push(MaskRow { y, z, words });
            }
        }
    }
    rows
}

/// Whether the mask placed at `(i, j, floor_k)` overlaps no occupied cell.
fn footprint_clear<T: Real>(scene: &OccupancyGrid<T>, rows: &[MaskRow], i: usize, j: usize, floor_k: usize) -> bool {
    rows.iter().all(|r| {
        r.words
            .iter()
            .enumerate()
            .all(|(q, &w)| w == 0 || scene.row_window(j + r.y, floor_k + r.z, i + 64 * q) & w == 0)
    })
}

/// All footprints where the avatar mask fits in free space with its
/// lowest layer at `floor_k`. Returns an empty set when the mask does not
/// fit in the grid at all.
pub fn find_noncollide<T: Real>(scene: &OccupancyGrid<T>, av: &AvatarVolume<T>, floor_k: usize) -> FootprintSet {
    let [nx, ny, nz] = scene.dims();
    let [hx, hy, hz] = av.h.dims();
    if floor_k + hz > nz || hx > nx || hy > ny {
        log::debug!("avatar mask {:?} does not fit grid {:?} at layer {floor_k}", av.h.dims(), scene.dims());
        return FootprintSet { floor_k, cells: Vec::new() };
    }
    let rows = mask_rows(&av.h);
    let mut cells: Vec<(usize, usize)> = (0..=ny - hy)
        .into_par_iter()
        .flat_map_iter(|j| {
            let rows = &rows;
            (0..=nx - hx).filter_map(move |i| footprint_clear(scene, rows, i, j, floor_k).then_some((i, j)))
        })
        .collect();
    cells.sort_unstable();
    FootprintSet { floor_k, cells }
}

/// Number of occupied scene cells under the placed mask, cell by cell.
/// Out-of-grid mask cells count as collisions.
pub fn overlap_count<T: Real>(scene: &OccupancyGrid<T>, h: &OccupancyGrid<T>, i: usize, j: usize, floor_k: usize) -> usize {
    h.iter_occupied()
        .filter(|c| {
            let s = Index3::new(i + c.i, j + c.j, floor_k + c.k);
            !scene.in_bounds(s) || scene.get(s)
        })
        .count()
}
