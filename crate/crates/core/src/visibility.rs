//! Path-counting visibility from a source voxel, and line-of-sight checks.
//!
//! The score of a cell is the surviving probability mass of monotone
//! lattice paths from the source. Around the source each octant uses local
//! coordinates `u = |x − cx|`, `v = |y − cy|`, `w = |z − cz|` and
//!
//! ```text
//! S(u,v,w) = [u·S(u−1,v,w) + v·S(u,v−1,w) + w·S(u,v,w−1)] / (u+v+w) · free(x,y,z)
//! S(0,0,0) = 1
//! ```
//!
//! computed over the free mask (`1 − occupancy`). Cells on the planes
//! shared by neighbouring octants get the same value from each octant.

use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, ToPrimitive};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scalar::Real;
use crate::voxel::{Index3, OccupancyGrid};

pub const DEFAULT_VISIBILITY_THRESHOLD: f64 = 0.33;

/// Largest local coordinate sum [`path_enum_oracle`] will enumerate.
pub const MAX_ENUM_SUM: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGrid<T> {
    pub origin_index: Index3,
    dims: [usize; 3],
    scores: Vec<T>,
}

impl<T: Real> ScoreGrid<T> {
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    fn linear(&self, idx: Index3) -> usize {
        (idx.k * self.dims[1] + idx.j) * self.dims[0] + idx.i
    }

    #[inline]
    pub fn get(&self, idx: Index3) -> T {
        self.scores[self.linear(idx)]
    }

    /// Score at `idx`, zero outside the grid.
    pub fn get_or_zero(&self, idx: Index3) -> T {
        if idx.i < self.dims[0] && idx.j < self.dims[1] && idx.k < self.dims[2] {
            self.get(idx)
        } else {
            T::zero()
        }
    }

    pub fn scores(&self) -> &[T] {
        &self.scores
    }

    /// Region of visibility: cells with score strictly above `tau`, in
    /// the frame of `like`.
    pub fn threshold(&self, tau: T, like: &OccupancyGrid<T>) -> OccupancyGrid<T> {
        assert_eq!(like.dims(), self.dims);
        let mut out = like.empty_like();
        let [nx, ny, nz] = self.dims;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let idx = Index3::new(i, j, k);
                    if self.get(idx) > tau {
                        out.set(idx, true);
                    }
                }
            }
        }
        out
    }

    /// One z-slice as CSV, rows are `j`, columns are `i`.
    pub fn slice_csv(&self, k: usize) -> String {
        let [nx, ny, _] = self.dims;
        let mut s = String::new();
        for j in 0..ny {
            let row: Vec<String> = (0..nx).map(|i| format!("{:.6}", self.get(Index3::new(i, j, k)))).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Visibility scores of every cell of `v2` from `center`.
pub fn visibility_grid<T: Real>(v2: &OccupancyGrid<T>, center: Index3) -> Result<ScoreGrid<T>> {
    if !v2.in_bounds(center) {
        let c = v2.voxel_center(center).cast::<f64>();
        return Err(Error::OutOfBounds(c.to_array()));
    }
    if v2.get(center) {
        return Err(Error::CenterOccupied(center.to_array()));
    }
    let dims = v2.dims();
    let [nx, ny, _] = dims;
    let mut grid = ScoreGrid { origin_index: center, dims, scores: vec![T::zero(); v2.cell_count()] };

    let c = center.to_array();
    for octant in 0..8 {
        let sign = [octant & 1, (octant >> 1) & 1, (octant >> 2) & 1].map(|b| b == 1);
        // extent of local coordinates in this octant
        let ext: [usize; 3] = std::array::from_fn(|a| if sign[a] { c[a] } else { dims[a] - 1 - c[a] });
        let to_world = |l: usize, a: usize| if sign[a] { c[a] - l } else { c[a] + l };
        // linear-index stride of one local step along each axis
        let stride: [isize; 3] = std::array::from_fn(|a| {
            let s = [1isize, nx as isize, (nx * ny) as isize][a];
            if sign[a] {
                -s
            } else {
                s
            }
        });

        for w in 0..=ext[2] {
            let z = to_world(w, 2);
            for v in 0..=ext[1] {
                let y = to_world(v, 1);
                for u in 0..=ext[0] {
                    let x = to_world(u, 0);
                    let idx = Index3::new(x, y, z);
                    let at = grid.linear(idx);
                    let n = u + v + w;
                    if n == 0 {
                        grid.scores[at] = T::one();
                        continue;
                    }
                    if v2.get(idx) {
                        grid.scores[at] = T::zero();
                        continue;
                    }
                    let mut acc = T::zero();
                    for (coord, s) in [(u, stride[0]), (v, stride[1]), (w, stride[2])] {
                        if coord > 0 {
                            let prev = grid.scores[(at as isize - s) as usize];
                            acc = acc + T::from_usize_exact(coord) * prev;
                        }
                    }
                    grid.scores[at] = acc / T::from_usize_exact(n);
                }
            }
        }
    }
    Ok(grid)
}

/// Visibility of `cell` from `center` by explicit enumeration of every
/// monotone lattice path, in the arithmetic of `N`.
///
/// A forward step into local cell `(a, b, c)` along an axis has weight
/// `coordinate / (a + b + c)`; a path counts when every visited cell
/// (both ends included) is free.
pub fn path_enum_oracle<N, T>(v2: &OccupancyGrid<T>, center: Index3, cell: Index3) -> Result<N>
where
    N: Num + Clone + FromPrimitive,
    T: Real,
{
    for idx in [center, cell] {
        if !v2.in_bounds(idx) {
            return Err(Error::OutOfBounds(v2.voxel_center(idx).cast::<f64>().to_array()));
        }
    }
    let c = center.to_array();
    let t = cell.to_array();
    let target: [usize; 3] = std::array::from_fn(|a| c[a].abs_diff(t[a]));
    let dir: [isize; 3] = std::array::from_fn(|a| if t[a] >= c[a] { 1 } else { -1 });
    let sum: usize = target.iter().sum();
    if sum > MAX_ENUM_SUM {
        return Err(Error::TooLarge(sum, MAX_ENUM_SUM));
    }
    let free = |l: [usize; 3]| {
        let w: [usize; 3] = std::array::from_fn(|a| (c[a] as isize + dir[a] * l[a] as isize) as usize);
        !v2.get(Index3::from(w))
    };
    if !free([0, 0, 0]) {
        return Ok(N::zero());
    }

    // iterative DFS over paths; each frame holds the local cell and the
    // product weight of the path so far
    let mut total = N::zero();
    let mut stack: Vec<([usize; 3], N)> = vec![([0, 0, 0], N::one())];
    while let Some((at, weight)) = stack.pop() {
        if at == target {
            total = total + weight;
            continue;
        }
        for axis in 0..3 {
            if at[axis] == target[axis] {
                continue;
            }
            let mut next = at;
            next[axis] += 1;
            if !free(next) {
                continue;
            }
            let n: usize = next.iter().sum();
            let step = N::from_usize(next[axis]).unwrap() / N::from_usize(n).unwrap();
            stack.push((next, weight.clone() * step));
        }
    }
    Ok(total)
}

/// [`path_enum_oracle`] in exact rational arithmetic.
pub fn path_enum_oracle_exact<T: Real>(v2: &OccupancyGrid<T>, center: Index3, cell: Index3) -> Result<BigRational> {
    path_enum_oracle::<BigRational, T>(v2, center, cell)
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Voxels visited by a 3D DDA walk from `a` to `b`, both ends included.
///
/// The walk makes exactly one axis step per move, so consecutive voxels
/// share a face and the last voxel is always `b`'s.
pub fn traverse<T: Real>(grid: &OccupancyGrid<T>, a: Vec3<T>, b: Vec3<T>) -> Result<Vec<Index3>> {
    let va = grid.world_to_voxel(a)?;
    let vb = grid.world_to_voxel(b)?;
    let ca = grid.cell_coords(a);
    let cb = grid.cell_coords(b);
    let d = cb - ca;
    let from = va.to_array();
    let to = vb.to_array();
    let mut remaining: [usize; 3] = std::array::from_fn(|ax| from[ax].abs_diff(to[ax]));
    let step: [isize; 3] = std::array::from_fn(|ax| if to[ax] >= from[ax] { 1 } else { -1 });

    // parametric distance to the next boundary crossing per axis
    let mut t_max = [T::infinity(); 3];
    let mut t_delta = [T::infinity(); 3];
    for ax in 0..3 {
        if remaining[ax] == 0 || d[ax] == T::zero() {
            continue;
        }
        let cell = T::from_usize_exact(from[ax]);
        let boundary = if step[ax] > 0 { cell + T::one() } else { cell };
        t_delta[ax] = (T::one() / d[ax]).abs();
        t_max[ax] = ((boundary - ca[ax]) / d[ax]).max(T::zero());
    }

    let mut cur = from;
    let mut out = Vec::with_capacity(remaining.iter().sum::<usize>() + 1);
    out.push(va);
    while remaining.iter().any(|&r| r > 0) {
        let ax = (0..3)
            .filter(|&ax| remaining[ax] > 0)
            .min_by(|&p, &q| t_max[p].partial_cmp(&t_max[q]).unwrap_or(std::cmp::Ordering::Equal).then(p.cmp(&q)))
            .unwrap();
        cur[ax] = (cur[ax] as isize + step[ax]) as usize;
        remaining[ax] -= 1;
        t_max[ax] = t_max[ax] + t_delta[ax];
        out.push(Index3::from(cur));
    }
    Ok(out)
}

/// Whether every voxel strictly between `a`'s and `b`'s voxels on the DDA
/// walk is free.
pub fn raycast_clear<T: Real>(grid: &OccupancyGrid<T>, a: Vec3<T>, b: Vec3<T>) -> Result<bool> {
    let path = traverse(grid, a, b)?;
    if path.len() <= 2 {
        return Ok(true);
    }
    Ok(path[1..path.len() - 1].iter().all(|&v| !grid.get(v)))
}
