//! Dense voxel grids and the connectivity machinery built on them.

mod io;
mod label;
mod line;
mod reconnect;
mod transform;

pub use io::{read_grid, write_grid, GrayImage, GRID_MAGIC};
pub use label::{label_components, ComponentLabeling};
pub use line::digital_line;
pub use reconnect::{reconnect, reconnect_detailed, Bridge, Reconnection};
pub use transform::{reflect, shift_half_pixel, Axes};

use crate::error::{LungError, Result};

/// Grid extent in voxels, z outermost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub nz: usize,
    pub ny: usize,
    pub nx: usize,
}

impl Dims {
    /// Crop size used for real CT nodules.
    pub const FULL: Dims = Dims::new(20, 40, 40);
    /// Reduced size that trains in minutes on a CPU.
    pub const DESK: Dims = Dims::new(10, 16, 16);

    pub const fn new(nz: usize, ny: usize, nx: usize) -> Self {
        Self { nz, ny, nx }
    }

    pub const fn len(&self) -> usize {
        self.nz * self.ny * self.nx
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub const fn index(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.ny + y) * self.nx + x
    }

    #[inline]
    pub const fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.nx;
        let rest = index / self.nx;
        [rest / self.ny, rest % self.ny, x]
    }

    pub const fn as_array(&self) -> [usize; 3] {
        [self.nz, self.ny, self.nx]
    }

    /// Calls `f` with the linear index of every face neighbour inside the grid.
    #[inline]
    pub fn for_each_face_neighbor(&self, index: usize, mut f: impl FnMut(usize)) {
        let [z, y, x] = self.coords(index);
        let plane = self.ny * self.nx;
        if z > 0 {
            f(index - plane);
        }
        if z + 1 < self.nz {
            f(index + plane);
        }
        if y > 0 {
            f(index - self.nx);
        }
        if y + 1 < self.ny {
            f(index + self.nx);
        }
        if x > 0 {
            f(index - 1);
        }
        if x + 1 < self.nx {
            f(index + 1);
        }
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nz, self.ny, self.nx)
    }
}

/// Physical voxel size in millimetres.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spacing {
    pub z: f64,
    pub y: f64,
    pub x: f64,
}

impl Spacing {
    /// Voxel size produced by the CT processing pipeline.
    pub const CT: Spacing = Spacing::new(1.25, 0.7, 0.7);

    pub const fn new(z: f64, y: f64, x: f64) -> Self {
        Self { z, y, x }
    }

    pub fn voxel_volume(&self) -> f64 {
        self.z * self.y * self.x
    }

    pub const fn as_array(&self) -> [f64; 3] {
        [self.z, self.y, self.x]
    }
}

impl Default for Spacing {
    fn default() -> Self {
        Self::CT
    }
}

/// A dense scalar field with every value in `[0, 1]`.
///
/// Values are stored as `f32` in row-major order with z outermost, which is
/// also the on-disk layout.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    dims: Dims,
    spacing: Spacing,
    values: Vec<f32>,
}

impl VoxelGrid {
    pub fn new(dims: Dims, spacing: Spacing, values: Vec<f32>) -> Result<Self> {
        if dims.is_empty() {
            return Err(LungError::InvalidArgument(format!(
                "grid dims {dims} are empty"
            )));
        }
        if values.len() != dims.len() {
            return Err(LungError::DimensionMismatch {
                expected: dims.len(),
                found: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(LungError::InvalidArgument(format!(
                "voxel value {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            dims,
            spacing,
            values,
        })
    }

    pub fn zeros(dims: Dims, spacing: Spacing) -> Self {
        Self::filled(dims, spacing, 0.0)
    }

    /// # Panics
    /// If `value` is outside `[0, 1]`.
    pub fn filled(dims: Dims, spacing: Spacing, value: f32) -> Self {
        assert!(
            (0.0..=1.0).contains(&value),
            "fill value {value} outside [0, 1]"
        );
        Self {
            dims,
            spacing,
            values: vec![value; dims.len()],
        }
    }

    pub fn from_fn(
        dims: Dims,
        spacing: Spacing,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(dims.len());
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    values.push(f(z, y, x));
                }
            }
        }
        Self::new(dims, spacing, values)
    }

    /// Same geometry, new values.
    pub fn with_values(&self, values: Vec<f32>) -> Result<Self> {
        Self::new(self.dims, self.spacing, values)
    }

    /// Builds a grid from values the caller already knows are in range.
    pub(crate) fn from_parts_unchecked(dims: Dims, spacing: Spacing, values: Vec<f32>) -> Self {
        debug_assert_eq!(values.len(), dims.len());
        debug_assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
        Self {
            dims,
            spacing,
            values,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, z: usize, y: usize, x: usize) -> f32 {
        self.values[self.dims.index(z, y, x)]
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().map(|&v| f64::from(v)).sum()
    }

    /// On at voxel `p` iff `value[p] >= threshold`.
    pub fn binarize(&self, threshold: f64) -> BinaryMask {
        debug_assert!(
            threshold > 0.0 && threshold < 1.0,
            "threshold {threshold} outside (0, 1)"
        );
        let bits = self
            .values
            .iter()
            .map(|&v| f64::from(v) >= threshold)
            .collect();
        BinaryMask {
            dims: self.dims,
            bits,
        }
    }

    pub fn on_fraction(&self, threshold: f64) -> f64 {
        self.binarize(threshold).count_on() as f64 / self.len() as f64
    }

    /// Majority-on grid: background and foreground polarity swapped.
    pub fn is_inverted(&self, threshold: f64) -> bool {
        self.on_fraction(threshold) > 0.5
    }
}

/// On/off view of a grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    dims: Dims,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(dims: Dims, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != dims.len() {
            return Err(LungError::DimensionMismatch {
                expected: dims.len(),
                found: bits.len(),
            });
        }
        Ok(Self { dims, bits })
    }

    pub fn from_indices(dims: Dims, on: impl IntoIterator<Item = usize>) -> Self {
        let mut bits = vec![false; dims.len()];
        for i in on {
            bits[i] = true;
        }
        Self { dims, bits }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn is_on(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn count_on(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn on_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    /// Grid with 1.0 for on-voxels and 0.0 elsewhere.
    pub fn to_grid(&self, spacing: Spacing) -> VoxelGrid {
        let values = self
            .bits
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect();
        VoxelGrid::from_parts_unchecked(self.dims, spacing, values)
    }
}
