//! Scene boundary from the XY footprint, and floor-height estimation.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scene::PointCloud;
use crate::voxel::{bin, Mask2, OccupancyGrid};

pub const DEFAULT_FLOOR_OFFSET_M: f64 = 0.04;
pub const DEFAULT_MIN_FLOOR_VOXELS: usize = 4;
pub const FLOOR_PERCENTILE: usize = 85;

/// Cells inside the largest XY contour; broadcast over z by callers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMask {
    pub mask: Mask2,
}

impl BoundaryMask {
    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.mask.get(i, j)
    }
}

const NEIGHBORS_4: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

fn neighbors(i: usize, j: usize, nx: usize, ny: usize) -> impl Iterator<Item = (usize, usize)> {
    NEIGHBORS_4.into_iter().filter_map(move |(di, dj)| {
        let (a, b) = (i.checked_add_signed(di)?, j.checked_add_signed(dj)?);
        (a < nx && b < ny).then_some((a, b))
    })
}

/// Label of every cell's 4-connected component (`usize::MAX` when empty)
/// and the component sizes.
pub fn label_components(mask: &Mask2) -> (Vec<usize>, Vec<usize>) {
    let [nx, ny] = mask.dims();
    let mut labels = vec![usize::MAX; nx * ny];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for j in 0..ny {
        for i in 0..nx {
            if !mask.get(i, j) || labels[j * nx + i] != usize::MAX {
                continue;
            }
            let id = sizes.len();
            let mut size = 0;
            labels[j * nx + i] = id;
            queue.push_back((i, j));
            while let Some((a, b)) = queue.pop_front() {
                size += 1;
                for (c, d) in neighbors(a, b, nx, ny) {
                    if mask.get(c, d) && labels[d * nx + c] == usize::MAX {
                        labels[d * nx + c] = id;
                        queue.push_back((c, d));
                    }
                }
            }
            sizes.push(size);
        }
    }
    (labels, sizes)
}

/// Largest 4-connected component with its holes filled.
///
/// Ties between equally large components go to the first in row-major
/// scan order. Holes are every cell not 4-reachable from outside the mask
/// without crossing the component.
pub fn boundary_mask(xy: &Mask2) -> Result<BoundaryMask> {
    let [nx, ny] = xy.dims();
    let (labels, sizes) = label_components(xy);
    let best = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(id, _)| id)
        .ok_or(Error::EmptyScene)?;
    let wall = |i: usize, j: usize| labels[j * nx + i] == best;

    let mut outside = vec![false; nx * ny];
    let mut queue = VecDeque::new();
    let border = (0..nx)
        .flat_map(|i| [(i, 0), (i, ny - 1)])
        .chain((0..ny).flat_map(|j| [(0, j), (nx - 1, j)]));
    for (i, j) in border {
        if !wall(i, j) && !outside[j * nx + i] {
            outside[j * nx + i] = true;
            queue.push_back((i, j));
        }
    }
    while let Some((a, b)) = queue.pop_front() {
        for (c, d) in neighbors(a, b, nx, ny) {
            if !wall(c, d) && !outside[d * nx + c] {
                outside[d * nx + c] = true;
                queue.push_back((c, d));
            }
        }
    }
    let mut mask = Mask2::new(nx, ny);
    for j in 0..ny {
        for i in 0..nx {
            if !outside[j * nx + i] {
                mask.set(i, j, true);
            }
        }
    }
    Ok(BoundaryMask { mask })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloorEstimate<T> {
    /// World floor height.
    pub h_flr: T,
    /// `h_flr` in voxel layers above the grid origin (may be negative).
    pub h_fv: i64,
    /// Floor layer used for placement, `max(min_floor_voxels, h_fv)`.
    pub h_hat_fv: usize,
}

/// Nearest-rank percentile: the `ceil(p·n/100)`-th smallest value.
pub fn nearest_rank_percentile<T: Real>(values: &[T], percent: usize) -> Option<T> {
    if values.is_empty() || percent == 0 || percent > 100 {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN floor height"));
    let rank = (percent * sorted.len()).div_ceil(100);
    Some(sorted[rank - 1])
}

/// Floor height from floor-labeled points.
///
/// `h_flr = min(mean(z) + offset_m, P85(z))`, converted once to voxel
/// layers. With no floor points, `override_h_flr` supplies `h_flr`
/// directly.
pub fn estimate_floor<T: Real>(
    cloud: &PointCloud<T>,
    floor_indices: &[usize],
    grid: &OccupancyGrid<T>,
    offset_m: T,
    min_floor_voxels: usize,
    override_h_flr: Option<T>,
) -> Result<FloorEstimate<T>> {
    let h_flr = match override_h_flr {
        Some(h) => h,
        None => {
            if floor_indices.is_empty() {
                return Err(Error::MissingFloor);
            }
            let z: Vec<T> = floor_indices
                .iter()
                .map(|&i| {
                    cloud.points().get(i).map(|p| p.z).ok_or_else(|| {
                        Error::InvalidInput(format!("floor index {i} out of range"))
                    })
                })
                .collect::<Result<_>>()?;
            let mean = z.iter().copied().sum::<T>() / T::from_usize_exact(z.len());
            let p85 = nearest_rank_percentile(&z, FLOOR_PERCENTILE).unwrap();
            (mean + offset_m).min(p85)
        }
    };
    Ok(floor_from_height(h_flr, grid, min_floor_voxels))
}

pub fn floor_from_height<T: Real>(h_flr: T, grid: &OccupancyGrid<T>, min_floor_voxels: usize) -> FloorEstimate<T> {
    let h_fv = bin(h_flr, grid.origin().z, grid.voxel_size())
        .to_i64()
        .expect("floor height out of range");
    let h_hat_fv = h_fv.max(min_floor_voxels as i64) as usize;
    FloorEstimate { h_flr, h_fv, h_hat_fv }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use proptest::prelude::*;

    fn mask_from(rows: &[&str]) -> Mask2 {
        let ny = rows.len();
        let nx = rows[0].len();
        let mut m = Mask2::new(nx, ny);
        for (j, r) in rows.iter().enumerate() {
            for (i, c) in r.chars().enumerate() {
                m.set(i, j, c == '#');
            }
        }
        m
    }

    #[test]
    fn ring_is_filled() {
        let mut m = Mask2::new(14, 14);
        for a in 2..12 {
            for (i, j) in [(a, 2), (a, 11), (2, a), (11, a)] {
                m.set(i, j, true);
            }
        }
        let b = boundary_mask(&m).unwrap();
        assert_eq!(b.mask.count(), 100);
        for i in 2..12 {
            for j in 2..12 {
                assert!(b.contains(i, j));
            }
        }
    }

    #[test]
    fn picks_largest_component() {
        let mut m = Mask2::new(20, 20);
        for i in 0..10 {
            for j in 0..5 {
                m.set(i, j, true);
            }
        }
        for (i, j) in [(15, 15), (16, 15), (15, 16)] {
            m.set(i, j, true);
        }
        let b = boundary_mask(&m).unwrap();
        assert_eq!(b.mask.count(), 50);
        assert!(!b.contains(15, 15));
    }

    #[test]
    fn single_cell_and_empty() {
        let mut m = Mask2::new(3, 3);
        assert!(matches!(boundary_mask(&m), Err(Error::EmptyScene)));
        m.set(1, 1, true);
        assert_eq!(boundary_mask(&m).unwrap().mask.iter_set().collect::<Vec<_>>(), vec![(1, 1)]);
    }

    #[test]
    fn notched_contour_is_filled() {
        // the notch at the top-right corner stays outside
        let m = mask_from(&[
            "#####.", //
            "#...#.", //
            "#...##", //
            "#....#", //
            "######",
        ]);
        let b = boundary_mask(&m).unwrap();
        assert!(b.contains(2, 2));
        assert_eq!(b.mask.count(), 5 * 6 - 2);
    }

    #[test]
    fn floor_constant() {
        let pts: Vec<Vec3<f64>> = (0..10).map(|i| Vec3::new(i as f64, 0.0, 0.30)).collect();
        let c = PointCloud::from_points(pts).unwrap();
        let g = OccupancyGrid::empty(Vec3::zero(), 0.025, [1, 1, 20]);
        let f = estimate_floor(&c, &(0..10).collect::<Vec<_>>(), &g, 0.04, 4, None).unwrap();
        assert!((f.h_flr - 0.30).abs() < 1e-12);
        assert_eq!(f.h_fv, 12);
        assert_eq!(f.h_hat_fv, 12);
    }

    #[test]
    fn floor_nearest_rank() {
        let pts: Vec<Vec3<f64>> = (0..=10).map(|i| Vec3::new(0.0, 0.0, i as f64 * 0.01)).collect();
        let c = PointCloud::from_points(pts).unwrap();
        let g = OccupancyGrid::empty(Vec3::zero(), 0.025, [1, 1, 20]);
        let f = estimate_floor(&c, &(0..=10).collect::<Vec<_>>(), &g, 0.04, 4, None).unwrap();
        assert!((f.h_flr - 0.09).abs() < 1e-12);
        assert_eq!(f.h_fv, 3);
        assert_eq!(f.h_hat_fv, 4);
    }

    #[test]
    fn floor_clamp_passthrough() {
        let g: OccupancyGrid<f64> = OccupancyGrid::empty(Vec3::zero(), 0.025, [1, 1, 20]);
        assert_eq!(floor_from_height(0.2, &g, 4).h_hat_fv, 8);
    }

    #[test]
    fn missing_floor() {
        let c = PointCloud::from_points(vec![Vec3::<f64>::zero()]).unwrap();
        let g = OccupancyGrid::empty(Vec3::zero(), 0.025, [1, 1, 1]);
        assert!(matches!(estimate_floor(&c, &[], &g, 0.04, 4, None), Err(Error::MissingFloor)));
        let f = estimate_floor(&c, &[], &g, 0.04, 4, Some(0.25)).unwrap();
        assert_eq!(f.h_fv, 10);
    }

    #[test]
    fn percentile_ranks() {
        let v: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        assert_eq!(nearest_rank_percentile(&v, 85), Some(17.0));
        assert_eq!(nearest_rank_percentile(&v[..1], 85), Some(1.0));
        assert_eq!(nearest_rank_percentile::<f64>(&[], 85), None);
    }

    proptest! {
        #[test]
        fn boundary_contains_largest_component(bits in prop::collection::vec(prop::bool::weighted(0.4), 64)) {
            let mut m = Mask2::new(8, 8);
            for (n, &b) in bits.iter().enumerate() {
                m.set(n % 8, n / 8, b);
            }
            prop_assume!(m.count() > 0);
            let (labels, sizes) = label_components(&m);
            let big = *sizes.iter().max().unwrap();
            let b = boundary_mask(&m).unwrap();
            let comp = (0..64).find(|&n| labels[n] != usize::MAX && sizes[labels[n]] == big).map(|n| labels[n]).unwrap();
            // superset of the component, within its bounding rectangle
            let cells: Vec<(usize, usize)> = (0..64).filter(|&n| labels[n] == comp).map(|n| (n % 8, n / 8)).collect();
            let (i0, i1) = (cells.iter().map(|c| c.0).min().unwrap(), cells.iter().map(|c| c.0).max().unwrap());
            let (j0, j1) = (cells.iter().map(|c| c.1).min().unwrap(), cells.iter().map(|c| c.1).max().unwrap());
            for &(i, j) in &cells {
                prop_assert!(b.contains(i, j));
            }
            for (i, j) in b.mask.iter_set() {
                prop_assert!((i0..=i1).contains(&i) && (j0..=j1).contains(&j));
            }
        }

        #[test]
        fn floor_permutation_invariant(mut z in prop::collection::vec(0.0f64..0.5, 1..40), seed in any::<u64>()) {
            let g = OccupancyGrid::empty(Vec3::zero(), 0.025, [1, 1, 40]);
            let mk = |z: &[f64]| PointCloud::from_points(z.iter().map(|&h| Vec3::new(0.0, 0.0, h)).collect()).unwrap();
            let idx: Vec<usize> = (0..z.len()).collect();
            let a = estimate_floor(&mk(&z), &idx, &g, 0.04, 4, None).unwrap();
            use rand::{seq::SliceRandom, SeedableRng};
            z.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = estimate_floor(&mk(&z), &idx, &g, 0.04, 4, None).unwrap();
            prop_assert!((a.h_flr - b.h_flr).abs() < 1e-12);
            prop_assert_eq!(a.h_hat_fv, b.h_hat_fv);
            prop_assert!(a.h_hat_fv >= 4);
        }

        #[test]
        fn floor_layer_monotone(h1 in -1.0f64..2.0, h2 in -1.0f64..2.0) {
            let g = OccupancyGrid::empty(Vec3::zero(), 0.025, [1, 1, 1]);
            let (lo, hi) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
            prop_assert!(floor_from_height(lo, &g, 4).h_hat_fv <= floor_from_height(hi, &g, 4).h_hat_fv);
        }
    }
}
