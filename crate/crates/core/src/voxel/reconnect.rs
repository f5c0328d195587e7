//! Forcing a voxel shape into a single face-connected component.
//!
//! Components are joined along a minimum spanning tree. Each candidate edge is
//! the nearest pair of voxels between two components, and its cost is the
//! number of voxels a face-connected bridge between them must switch on
//! (Manhattan distance minus one). Chosen edges are rasterized with
//! [`digital_line`] and the path voxels are set to 1.0.

use super::{digital_line, label_components, VoxelGrid};
use crate::error::{LungError, Result};

/// One MST edge between two components (labels as in the input labeling).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bridge {
    pub components: (u32, u32),
    pub from: [usize; 3],
    pub to: [usize; 3],
    /// Voxels strictly between the endpoints.
    pub cost: usize,
}

#[derive(Clone, Debug)]
pub struct Reconnection {
    pub grid: VoxelGrid,
    pub components_before: usize,
    pub bridges: Vec<Bridge>,
    /// Linear indices switched on, ascending.
    pub added: Vec<usize>,
}

impl Reconnection {
    pub fn was_clean(&self) -> bool {
        self.components_before == 1
    }
}

pub fn reconnect(grid: &VoxelGrid, threshold: f64) -> Result<VoxelGrid> {
    reconnect_detailed(grid, threshold).map(|r| r.grid)
}

pub fn reconnect_detailed(grid: &VoxelGrid, threshold: f64) -> Result<Reconnection> {
    let dims = grid.dims();
    let mask = grid.binarize(threshold);
    let labeling = label_components(&mask);
    let count = labeling.component_count();
    if count == 0 {
        return Err(LungError::EmptyNodule);
    }
    if count == 1 {
        return Ok(Reconnection {
            grid: grid.clone(),
            components_before: 1,
            bridges: Vec::new(),
            added: Vec::new(),
        });
    }

    let surfaces: Vec<Vec<[usize; 3]>> = labeling
        .members()
        .into_iter()
        .map(|m| {
            m.into_iter()
                .filter(|&i| {
                    let mut exposed = false;
                    dims.for_each_face_neighbor(i, |n| exposed |= !mask.is_on(n));
                    exposed
                })
                .map(|i| dims.coords(i))
                .collect()
        })
        .collect();

    let mut candidates = Vec::with_capacity(count * (count - 1) / 2);
    for a in 0..count {
        for b in (a + 1)..count {
            let (key, from, to) = nearest_pair(&surfaces[a], &surfaces[b]);
            candidates.push((key, a, b, from, to));
        }
    }
    candidates.sort_by_key(|&(key, a, b, ..)| (key, a, b));

    let mut forest = DisjointSet::new(count);
    let mut bridges = Vec::with_capacity(count - 1);
    for (key, a, b, from, to) in candidates {
        if forest.union(a, b) {
            bridges.push(Bridge {
                components: (a as u32 + 1, b as u32 + 1),
                from,
                to,
                cost: key.0 - 1,
            });
            if bridges.len() == count - 1 {
                break;
            }
        }
    }

    let mut values = grid.values().to_vec();
    let mut added = Vec::new();
    for bridge in &bridges {
        for [z, y, x] in digital_line(bridge.from, bridge.to) {
            let i = dims.index(z, y, x);
            if f64::from(values[i]) < threshold {
                values[i] = 1.0;
                added.push(i);
            }
        }
    }
    added.sort_unstable();

    Ok(Reconnection {
        grid: VoxelGrid::from_parts_unchecked(dims, grid.spacing(), values),
        components_before: count,
        bridges,
        added,
    })
}

/// Ordering key: Manhattan distance, then squared Euclidean distance.
type PairKey = (usize, usize);

fn nearest_pair(a: &[[usize; 3]], b: &[[usize; 3]]) -> (PairKey, [usize; 3], [usize; 3]) {
    let mut best = ((usize::MAX, usize::MAX), a[0], b[0]);
    for &p in a {
        for &q in b {
            let d: [usize; 3] = std::array::from_fn(|k| p[k].abs_diff(q[k]));
            let key = (d[0] + d[1] + d[2], d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            if key < best.0 {
                best = (key, p, q);
            }
        }
    }
    best
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::voxel::{Dims, Spacing};

    fn grid_with(dims: Dims, on: &[[usize; 3]]) -> VoxelGrid {
        let mut v = vec![0.0f32; dims.len()];
        for &[z, y, x] in on {
            v[dims.index(z, y, x)] = 1.0;
        }
        VoxelGrid::new(dims, Spacing::CT, v).unwrap()
    }

    fn components(g: &VoxelGrid) -> usize {
        label_components(&g.binarize(0.5)).component_count()
    }

    #[test]
    fn single_component_is_untouched() {
        let g = grid_with(Dims::new(3, 3, 3), &[[1, 1, 1], [1, 1, 2]]);
        let r = reconnect_detailed(&g, 0.5).unwrap();
        assert_eq!(r.grid, g);
        assert!(r.was_clean());
        assert!(r.added.is_empty());
    }

    #[test]
    fn empty_is_an_error() {
        let g = VoxelGrid::zeros(Dims::new(2, 2, 2), Spacing::CT);
        assert!(matches!(reconnect(&g, 0.5), Err(LungError::EmptyNodule)));
    }

    #[test]
    fn opposite_corners_join_along_the_line() {
        let g = grid_with(Dims::new(3, 3, 3), &[[0, 0, 0], [2, 2, 2]]);
        let r = reconnect_detailed(&g, 0.5).unwrap();
        assert_eq!(components(&r.grid), 1);
        let line = digital_line([0, 0, 0], [2, 2, 2]);
        // endpoints were already on
        assert_eq!(r.added.len(), line.len() - 2);
        let d = g.dims();
        for i in &r.added {
            assert!(line.iter().any(|&[z, y, x]| d.index(z, y, x) == *i));
        }
    }

    /// Oracle for bridge lengths: exhaustive search over every voxel pair.
    fn brute_bridge(a: &[usize], b: &[usize], dims: Dims) -> usize {
        let mut best = usize::MAX;
        for &i in a {
            for &j in b {
                let (p, q) = (dims.coords(i), dims.coords(j));
                let m: usize = (0..3).map(|k| p[k].abs_diff(q[k])).sum();
                best = best.min(m - 1);
            }
        }
        best
    }

    #[test]
    fn three_blobs_within_two_shortest_bridges() {
        let dims = Dims::new(8, 10, 10);
        let mut on = Vec::new();
        for (cz, cy, cx) in [(1, 1, 1), (6, 2, 7), (3, 8, 3)] {
            for dz in 0..2 {
                for dy in 0..2 {
                    for dx in 0..2 {
                        on.push([cz + dz, cy + dy, cx + dx]);
                    }
                }
            }
        }
        let g = grid_with(dims, &on);
        let members = label_components(&g.binarize(0.5)).members();
        assert_eq!(members.len(), 3);
        let mut bridges = vec![
            brute_bridge(&members[0], &members[1], dims),
            brute_bridge(&members[0], &members[2], dims),
            brute_bridge(&members[1], &members[2], dims),
        ];
        bridges.sort_unstable();

        let r = reconnect_detailed(&g, 0.5).unwrap();
        assert_eq!(components(&r.grid), 1);
        assert!(
            r.added.len() <= bridges[0] + bridges[1],
            "{} > {:?}",
            r.added.len(),
            bridges
        );
    }

    #[test]
    fn only_switches_off_voxels_to_one() {
        let dims = Dims::new(4, 4, 4);
        let mut v = vec![0.2f32; dims.len()];
        v[0] = 0.9;
        v[dims.len() - 1] = 0.7;
        let g = VoxelGrid::new(dims, Spacing::CT, v).unwrap();
        let out = reconnect(&g, 0.5).unwrap();
        for (a, b) in g.values().iter().zip(out.values()) {
            assert!(a == b || (*a < 0.5 && *b == 1.0));
        }
    }

    fn random_mask_grid(seed: u64) -> VoxelGrid {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dims = Dims::new(
            rng.random_range(1..=7),
            rng.random_range(1..=9),
            rng.random_range(1..=9),
        );
        let density = rng.random_range(0.02..0.4);
        let mut v: Vec<f32> = (0..dims.len())
            .map(|_| {
                if rng.random_bool(density) {
                    rng.random_range(0.5..=1.0)
                } else {
                    rng.random_range(0.0..0.5)
                }
            })
            .collect();
        v[rng.random_range(0..dims.len())] = 1.0;
        VoxelGrid::new(dims, Spacing::CT, v).unwrap()
    }

    proptest! {
        #[test]
        fn idempotent_monotone_connected(seed in any::<u64>()) {
            let g = random_mask_grid(seed);
            let once = reconnect(&g, 0.5).unwrap();
            prop_assert_eq!(components(&once), 1);
            prop_assert!(g.values().iter().zip(once.values()).all(|(a, b)| b >= a));
            let twice = reconnect(&once, 0.5).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
