use super::VoxelGrid;

/// A subset of the three grid axes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Axes {
    pub x: bool,
    pub y: bool,
    pub z: bool,
}

impl Axes {
    pub const NONE: Axes = Axes {
        x: false,
        y: false,
        z: false,
    };
    pub const X: Axes = Axes {
        x: true,
        y: false,
        z: false,
    };
    pub const Y: Axes = Axes {
        x: false,
        y: true,
        z: false,
    };
    pub const Z: Axes = Axes {
        x: false,
        y: false,
        z: true,
    };

    /// Bit 0 is X, bit 1 is Y, bit 2 is Z.
    pub const fn from_index(index: u8) -> Self {
        Self {
            x: index & 1 != 0,
            y: index & 2 != 0,
            z: index & 4 != 0,
        }
    }

    pub const fn index(self) -> u8 {
        self.x as u8 | (self.y as u8) << 1 | (self.z as u8) << 2
    }

    /// All eight subsets, identity first.
    pub fn all() -> impl Iterator<Item = Axes> {
        (0..8).map(Self::from_index)
    }
}

impl std::fmt::Display for Axes {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if *self == Axes::NONE {
            return f.write_str("-");
        }
        for (on, c) in [(self.x, 'x'), (self.y, 'y'), (self.z, 'z')] {
            if on {
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

/// Mirrors the grid along every selected axis.
pub fn reflect(grid: &VoxelGrid, axes: Axes) -> VoxelGrid {
    let d = grid.dims();
    let src = grid.values();
    let mut out = Vec::with_capacity(src.len());
    for z in 0..d.nz {
        let sz = if axes.z { d.nz - 1 - z } else { z };
        for y in 0..d.ny {
            let sy = if axes.y { d.ny - 1 - y } else { y };
            let row = d.index(sz, sy, 0);
            if axes.x {
                out.extend(src[row..row + d.nx].iter().rev());
            } else {
                out.extend_from_slice(&src[row..row + d.nx]);
            }
        }
    }
    VoxelGrid::from_parts_unchecked(d, grid.spacing(), out)
}

/// Resamples every z-plane half a voxel along +X and +Y.
///
/// Output voxel `(y, x)` is the mean of input voxels `(y..=y+1, x..=x+1)`,
/// with indices past the last row or column clamped to the edge.
pub fn shift_half_pixel(grid: &VoxelGrid) -> VoxelGrid {
    let d = grid.dims();
    let src = grid.values();
    let mut out = Vec::with_capacity(src.len());
    for z in 0..d.nz {
        for y in 0..d.ny {
            let y1 = (y + 1).min(d.ny - 1);
            for x in 0..d.nx {
                let x1 = (x + 1).min(d.nx - 1);
                let sum = src[d.index(z, y, x)]
                    + src[d.index(z, y, x1)]
                    + src[d.index(z, y1, x)]
                    + src[d.index(z, y1, x1)];
                out.push((sum * 0.25).clamp(0.0, 1.0));
            }
        }
    }
    VoxelGrid::from_parts_unchecked(d, grid.spacing(), out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::voxel::{label_components, Dims, Spacing};

    fn ramp(dims: Dims) -> VoxelGrid {
        let n = dims.len() as f32;
        VoxelGrid::new(
            dims,
            Spacing::CT,
            (0..dims.len()).map(|i| i as f32 / n).collect(),
        )
        .unwrap()
    }

    #[test]
    fn empty_axes_is_identity() {
        let g = ramp(Dims::new(3, 4, 5));
        assert_eq!(reflect(&g, Axes::NONE), g);
    }

    #[test]
    fn reflect_twice_is_identity() {
        let g = ramp(Dims::new(3, 4, 5));
        for axes in Axes::all() {
            assert_eq!(reflect(&reflect(&g, axes), axes), g);
        }
    }

    #[test]
    fn reflect_x_on_2x2x2() {
        // value = index: (z, y, x) -> 4z + 2y + x
        let g = VoxelGrid::new(
            Dims::new(2, 2, 2),
            Spacing::CT,
            (0..8).map(|i| i as f32 / 8.0).collect(),
        )
        .unwrap();
        let r = reflect(&g, Axes::X);
        let expect: Vec<f32> = [1, 0, 3, 2, 5, 4, 7, 6]
            .iter()
            .map(|&i| i as f32 / 8.0)
            .collect();
        assert_eq!(r.values(), &expect[..]);
        let r = reflect(&g, Axes::from_index(0b111));
        let expect: Vec<f32> = (0..8).rev().map(|i| i as f32 / 8.0).collect();
        assert_eq!(r.values(), &expect[..]);
    }

    #[test]
    fn axes_index_roundtrip() {
        for i in 0..8 {
            assert_eq!(Axes::from_index(i).index(), i);
        }
        assert_eq!(Axes::all().next(), Some(Axes::NONE));
    }

    #[test]
    fn shift_constant_grid() {
        let g = VoxelGrid::filled(Dims::new(2, 5, 5), Spacing::CT, 0.3);
        assert_eq!(shift_half_pixel(&g), g);
    }

    #[test]
    fn shift_single_voxel_spreads_to_four() {
        let d = Dims::new(3, 6, 6);
        let g = VoxelGrid::from_fn(d, Spacing::CT, |z, y, x| {
            if (z, y, x) == (1, 3, 2) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let s = shift_half_pixel(&g);
        let mut hits = Vec::new();
        for (i, &v) in s.values().iter().enumerate() {
            if v != 0.0 {
                hits.push((d.coords(i), v));
            }
        }
        assert_eq!(
            hits,
            vec![
                ([1, 2, 1], 0.25),
                ([1, 2, 2], 0.25),
                ([1, 3, 1], 0.25),
                ([1, 3, 2], 0.25)
            ]
        );
    }

    proptest! {
        #[test]
        fn shift_stays_in_range(values in prop::collection::vec(0.0f32..=1.0, 4 * 5 * 6)) {
            let g = VoxelGrid::new(Dims::new(4, 5, 6), Spacing::CT, values).unwrap();
            let s = shift_half_pixel(&g);
            prop_assert!(s.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn shift_preserves_interior_mass(values in prop::collection::vec(0.0f32..=1.0, 3 * 4 * 4)) {
            // embed the random block away from the last row and column
            let d = Dims::new(3, 7, 7);
            let g = VoxelGrid::from_fn(d, Spacing::CT, |z, y, x| {
                if (1..5).contains(&y) && (1..5).contains(&x) { values[(z * 4 + y - 1) * 4 + x - 1] } else { 0.0 }
            }).unwrap();
            let before = g.total_mass();
            let after = shift_half_pixel(&g).total_mass();
            prop_assert!((after - before).abs() <= 0.01 * before.max(1e-9));
        }

        #[test]
        fn reflection_preserves_counts(seed in any::<u64>(), axes in 0u8..8) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d = Dims::new(5, 6, 7);
            let g = VoxelGrid::from_fn(d, Spacing::CT, |_, _, _| if rng.random_bool(0.3) { 1.0 } else { 0.0 }).unwrap();
            let r = reflect(&g, Axes::from_index(axes));
            let (mg, mr) = (g.binarize(0.5), r.binarize(0.5));
            prop_assert_eq!(mg.count_on(), mr.count_on());
            prop_assert_eq!(label_components(&mg).component_count(), label_components(&mr).component_count());
        }
    }
}
