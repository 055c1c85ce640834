//! Dense boolean occupancy grids.
//!
//! Cells are bit-packed per x-row: each `(j, k)` row occupies
//! `row_words` consecutive `u64`s, bit `i % 64` of word `i / 64` holding
//! cell `(i, j, k)`. Row packing lets the sliding-volume collision search
//! test 64 cells per word.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scalar::Real;
use crate::scene::{PointCloud, SceneObject};

pub const DEFAULT_VOXEL_SIZE: f64 = 0.025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(from = "[usize; 3]", into = "[usize; 3]")]
pub struct Index3 {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl Index3 {
    pub const fn new(i: usize, j: usize, k: usize) -> Self {
        Index3 { i, j, k }
    }

    pub fn to_array(self) -> [usize; 3] {
        [self.i, self.j, self.k]
    }
}

impl From<[usize; 3]> for Index3 {
    fn from(a: [usize; 3]) -> Self {
        Index3::new(a[0], a[1], a[2])
    }
}

impl From<Index3> for [usize; 3] {
    fn from(v: Index3) -> Self {
        v.to_array()
    }
}

/// Cell index of coordinate `x` along one axis, half-open bins.
///
/// Values within a few ulps below a cell boundary snap up to it, so points
/// produced as `origin + n·s` land in cell `n` despite rounding. The
/// tolerance scales with the operands since `x - origin` carries their
/// rounding error.
#[inline]
pub(crate) fn bin<T: Real>(x: T, origin: T, s: T) -> T {
    let t = (x - origin) / s;
    let mag = t.abs().max(x.abs() / s).max(origin.abs() / s).max(T::one());
    (t + T::epsilon() * T::lit(8.0) * mag).floor()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid<T> {
    origin: Vec3<T>,
    voxel_size: T,
    dims: [usize; 3],
    row_words: usize,
    words: Vec<u64>,
}

impl<T: Real> OccupancyGrid<T> {
    pub fn empty(origin: Vec3<T>, voxel_size: T, dims: [usize; 3]) -> Self {
        assert!(voxel_size > T::zero(), "voxel size must be positive");
        assert!(dims.iter().all(|&d| d > 0), "grid dims must be positive");
        let row_words = dims[0].div_ceil(64);
        OccupancyGrid {
            origin,
            voxel_size,
            dims,
            row_words,
            words: vec![0; row_words * dims[1] * dims[2]],
        }
    }

    /// Same frame and shape, no occupancy.
    pub fn empty_like(&self) -> Self {
        Self::empty(self.origin, self.voxel_size, self.dims)
    }

    pub fn origin(&self) -> Vec3<T> {
        self.origin
    }

    pub fn voxel_size(&self) -> T {
        self.voxel_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn cell_count(&self) -> usize {
        self.dims.iter().product()
    }

    #[inline]
    pub fn in_bounds(&self, idx: Index3) -> bool {
        idx.i < self.dims[0] && idx.j < self.dims[1] && idx.k < self.dims[2]
    }

    #[inline]
    fn row_start(&self, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.row_words
    }

    #[inline]
    pub fn get(&self, idx: Index3) -> bool {
        debug_assert!(self.in_bounds(idx));
        let w = self.words[self.row_start(idx.j, idx.k) + idx.i / 64];
        (w >> (idx.i % 64)) & 1 == 1
    }

    /// `get` that treats out-of-range (including negative) indices as free.
    pub fn get_signed(&self, i: i64, j: i64, k: i64) -> bool {
        if i < 0 || j < 0 || k < 0 {
            return false;
        }
        let idx = Index3::new(i as usize, j as usize, k as usize);
        self.in_bounds(idx) && self.get(idx)
    }

    #[inline]
    pub fn set(&mut self, idx: Index3, value: bool) {
        assert!(self.in_bounds(idx), "{idx:?} outside {:?}", self.dims);
        let at = self.row_start(idx.j, idx.k) + idx.i / 64;
        let bit = 1u64 << (idx.i % 64);
        if value {
            self.words[at] |= bit;
        } else {
            self.words[at] &= !bit;
        }
    }

    /// Packed bits of row `(j, k)`; bits past `nx` are zero.
    pub fn row(&self, j: usize, k: usize) -> &[u64] {
        let s = self.row_start(j, k);
        &self.words[s..s + self.row_words]
    }

    /// Bits `[i, i + 64)` of row `(j, k)`, zero-filled past the row end.
    #[inline]
    pub fn row_window(&self, j: usize, k: usize, i: usize) -> u64 {
        let row = self.row(j, k);
        let (w, b) = (i / 64, i % 64);
        let lo = row.get(w).copied().unwrap_or(0) >> b;
        if b == 0 {
            lo
        } else {
            lo | (row.get(w + 1).copied().unwrap_or(0) << (64 - b))
        }
    }

    pub fn count_occupied(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_occupied(&self) -> impl Iterator<Item = Index3> + '_ {
        let [nx, ny, nz] = self.dims;
        (0..nz).flat_map(move |k| {
            (0..ny).flat_map(move |j| {
                (0..nx).filter_map(move |i| {
                    let idx = Index3::new(i, j, k);
                    self.get(idx).then_some(idx)
                })
            })
        })
    }

    /// Every occupied cell of `self` is occupied in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dims == other.dims && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Fractional cell coordinates of a world point.
    pub fn cell_coords(&self, p: Vec3<T>) -> Vec3<T> {
        (p - self.origin).scale(self.voxel_size.recip())
    }

    /// Cell containing `p`, half-open bins `[origin + i·s, origin + (i+1)·s)`.
    pub fn world_to_voxel(&self, p: Vec3<T>) -> Result<Index3> {
        let oob = || Error::OutOfBounds(p.cast::<f64>().to_array());
        let mut out = [0usize; 3];
        for (axis, slot) in out.iter_mut().enumerate() {
            let b = bin(p[axis], self.origin[axis], self.voxel_size);
            if !b.is_finite() || b < T::zero() || b >= T::from_usize_exact(self.dims[axis]) {
                return Err(oob());
            }
            *slot = b.to_usize().ok_or_else(oob)?;
        }
        Ok(out.into())
    }

    /// Signed cell index, no bounds check.
    pub fn world_to_voxel_unchecked(&self, p: Vec3<T>) -> [i64; 3] {
        [0, 1, 2].map(|a| bin(p[a], self.origin[a], self.voxel_size).to_i64().unwrap_or(i64::MIN))
    }

    pub fn voxel_min_corner(&self, idx: Index3) -> Vec3<T> {
        let s = self.voxel_size;
        self.origin
            + Vec3::new(
                T::from_usize_exact(idx.i) * s,
                T::from_usize_exact(idx.j) * s,
                T::from_usize_exact(idx.k) * s,
            )
    }

    pub fn voxel_center(&self, idx: Index3) -> Vec3<T> {
        self.voxel_min_corner(idx) + Vec3::splat(self.voxel_size * T::lit(0.5))
    }

    /// Marks the cell of every point; points outside the grid are an error.
    pub fn rasterize<I: IntoIterator<Item = Vec3<T>>>(&mut self, points: I) -> Result<()> {
        for p in points {
            let idx = self.world_to_voxel(p)?;
            self.set(idx, true);
        }
        Ok(())
    }
}

/// Point-in-cell voxelization with `padding_voxels` empty cells around the
/// points' bounding box.
pub fn voxelize<T: Real>(cloud: &PointCloud<T>, voxel_size: T, padding_voxels: usize) -> Result<OccupancyGrid<T>> {
    voxelize_points(cloud.points(), voxel_size, padding_voxels)
}

pub fn voxelize_points<T: Real>(points: &[Vec3<T>], voxel_size: T, padding_voxels: usize) -> Result<OccupancyGrid<T>> {
    if !(voxel_size > T::zero()) {
        return Err(Error::InvalidInput(format!("voxel size {voxel_size} must be positive")));
    }
    let (lo, hi) = points
        .iter()
        .fold(None, |acc: Option<(Vec3<T>, Vec3<T>)>, &p| match acc {
            None => Some((p, p)),
            Some((lo, hi)) => Some((lo.min(p), hi.max(p))),
        })
        .ok_or(Error::EmptyCloud)?;
    let pad = T::from_usize_exact(padding_voxels) * voxel_size;
    let origin = lo - Vec3::splat(pad);
    let mut dims = [0usize; 3];
    for (axis, d) in dims.iter_mut().enumerate() {
        let top = bin(hi[axis], origin[axis], voxel_size)
            .to_usize()
            .ok_or_else(|| Error::InvalidInput("scene extent overflows the grid".into()))?;
        *d = top + 1 + padding_voxels;
    }
    let mut grid = OccupancyGrid::empty(origin, voxel_size, dims);
    grid.rasterize(points.iter().copied())?;
    Ok(grid)
}

/// Re-voxelizes `cloud` into `grid`'s frame without `obj`'s points.
///
/// Cells shared between the object and anything else stay occupied.
pub fn erase_object<T: Real>(grid: &OccupancyGrid<T>, cloud: &PointCloud<T>, obj: &SceneObject) -> Result<OccupancyGrid<T>> {
    obj.validate_for(cloud)?;
    let mut skip = vec![false; cloud.len()];
    for &i in &obj.point_indices {
        skip[i] = true;
    }
    let mut out = grid.empty_like();
    out.rasterize(
        cloud
            .points()
            .iter()
            .zip(&skip)
            .filter(|(_, &s)| !s)
            .map(|(&p, _)| p),
    )?;
    Ok(out)
}

/// Dense 2D bit mask indexed `(i, j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask2 {
    dims: [usize; 2],
    bits: Vec<bool>,
}

impl Mask2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        Mask2 { dims: [nx, ny], bits: vec![false; nx * ny] }
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        i < self.dims[0] && j < self.dims[1] && self.bits[j * self.dims[0] + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        assert!(i < self.dims[0] && j < self.dims[1]);
        self.bits[j * self.dims[0] + i] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let nx = self.dims[0];
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(move |(n, _)| (n % nx, n / nx))
    }
}

/// Column-wise OR over z.
pub fn project_xy<T: Real>(grid: &OccupancyGrid<T>) -> Mask2 {
    let [nx, ny, nz] = grid.dims();
    let mut mask = Mask2::new(nx, ny);
    for j in 0..ny {
        let mut acc = vec![0u64; grid.row_words];
        for k in 0..nz {
            for (a, w) in acc.iter_mut().zip(grid.row(j, k)) {
                *a |= w;
            }
        }
        for i in 0..nx {
            if (acc[i / 64] >> (i % 64)) & 1 == 1 {
                mask.set(i, j, true);
            }
        }
    }
    mask
}

/// Run-length encoded grid dump.
///
/// Cells are visited in `(k, j, i)` order with `i` fastest. `rle` holds
/// alternating run lengths starting with a run of empty cells (which may
/// be zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDump {
    pub dims: [usize; 3],
    pub voxel_size: f64,
    pub origin: [f64; 3],
    pub rle: Vec<usize>,
}

impl GridDump {
    pub fn encode<T: Real>(grid: &OccupancyGrid<T>) -> Self {
        let [nx, ny, nz] = grid.dims();
        let mut rle = Vec::new();
        let mut current = false;
        let mut run = 0usize;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let v = grid.get(Index3::new(i, j, k));
                    if v != current {
                        rle.push(run);
                        current = v;
                        run = 0;
                    }
                    run += 1;
                }
            }
        }
        rle.push(run);
        GridDump {
            dims: grid.dims(),
            voxel_size: grid.voxel_size().to_f64_lossless(),
            origin: grid.origin().cast::<f64>().to_array(),
            rle,
        }
    }

    pub fn decode<T: Real>(&self) -> Result<OccupancyGrid<T>> {
        let total: usize = self.rle.iter().sum();
        let cells: usize = self.dims.iter().product();
        if total != cells || cells == 0 || !(self.voxel_size > 0.0) {
            return Err(Error::format(format!("rle covers {total} of {cells} cells")));
        }
        let mut g = OccupancyGrid::empty(
            Vec3::from(self.origin).cast(),
            T::lit(self.voxel_size),
            self.dims,
        );
        let [nx, ny, _] = self.dims;
        let mut n = 0usize;
        for (r, &len) in self.rle.iter().enumerate() {
            if r % 2 == 1 {
                for c in n..n + len {
                    g.set(Index3::new(c % nx, (c / nx) % ny, c / (nx * ny)), true);
                }
            }
            n += len;
        }
        Ok(g)
    }
}
