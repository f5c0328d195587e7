//! Grid files and PGM slice exports.
//!
//! Grid layout, all little-endian:
//!
//! ```text
//! magic  "LUNGVOX1"          8 bytes
//! dims   nz, ny, nx          3 x u32
//! spacing sz, sy, sx (mm)    3 x f64
//! values                     nz*ny*nx x f32, z outermost
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Dims, Spacing, VoxelGrid};
use crate::error::{LungError, Result};

pub const GRID_MAGIC: &[u8; 8] = b"LUNGVOX1";

pub fn write_grid(grid: &VoxelGrid, mut w: impl Write) -> Result<()> {
    w.write_all(GRID_MAGIC)?;
    for n in grid.dims().as_array() {
        let n = u32::try_from(n)
            .map_err(|_| LungError::Format(format!("dimension {n} exceeds u32")))?;
        w.write_all(&n.to_le_bytes())?;
    }
    for s in grid.spacing().as_array() {
        w.write_all(&s.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(grid.len() * 4);
    for v in grid.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_grid(mut r: impl Read) -> Result<VoxelGrid> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != GRID_MAGIC {
        return Err(LungError::Format("not a voxel grid file".into()));
    }
    let mut u = [0u8; 4];
    let mut dims = [0usize; 3];
    for d in &mut dims {
        r.read_exact(&mut u)?;
        *d = u32::from_le_bytes(u) as usize;
    }
    let mut f = [0u8; 8];
    let mut spacing = [0f64; 3];
    for s in &mut spacing {
        r.read_exact(&mut f)?;
        *s = f64::from_le_bytes(f);
    }
    let dims = Dims::new(dims[0], dims[1], dims[2]);
    let mut raw = vec![0u8; dims.len() * 4];
    r.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    VoxelGrid::new(
        dims,
        Spacing::new(spacing[0], spacing[1], spacing[2]),
        values,
    )
}

impl VoxelGrid {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_grid(self, &mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_grid(BufReader::new(File::open(path)?))
    }

    /// One z-slice as an 8-bit image, 0.0 black and 1.0 white.
    pub fn slice_image(&self, z: usize) -> GrayImage {
        let d = self.dims();
        assert!(z < d.nz, "slice {z} out of range for {d}");
        let start = d.index(z, 0, 0);
        let pixels = self.values()[start..start + d.ny * d.nx]
            .iter()
            .map(|&v| to_byte(v))
            .collect();
        GrayImage {
            width: d.nx,
            height: d.ny,
            pixels,
        }
    }

    /// The middle `count` z-slices (all of them if the grid is thinner).
    pub fn middle_slices(&self, count: usize) -> std::ops::Range<usize> {
        let nz = self.dims().nz;
        let count = count.min(nz);
        let start = (nz - count) / 2;
        start..start + count
    }
}

fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Minimal 8-bit grayscale raster for PGM output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, fill: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    fn blit(&mut self, src: &GrayImage, left: usize, top: usize) {
        for row in 0..src.height {
            let dst = (top + row) * self.width + left;
            self.pixels[dst..dst + src.width]
                .copy_from_slice(&src.pixels[row * src.width..(row + 1) * src.width]);
        }
    }

    /// One row per grid, showing its middle `slices` z-planes left to right,
    /// separated by a one-pixel mid-gray gutter.
    pub fn montage(grids: &[VoxelGrid], slices: usize) -> Result<Self> {
        let first = grids.first().ok_or(LungError::EmptySet)?;
        let d = first.dims();
        if let Some(g) = grids.iter().find(|g| g.dims() != d) {
            return Err(LungError::InvalidArgument(format!(
                "montage mixes {} and {}",
                d,
                g.dims()
            )));
        }
        let cols = slices.min(d.nz).max(1);
        let gap = 1;
        let width = cols * d.nx + (cols - 1) * gap;
        let height = grids.len() * d.ny + (grids.len() - 1) * gap;
        let mut img = GrayImage::new(width, height, 128);
        for (row, g) in grids.iter().enumerate() {
            for (col, z) in g.middle_slices(cols).enumerate() {
                img.blit(&g.slice_image(z), col * (d.nx + gap), row * (d.ny + gap));
            }
        }
        Ok(img)
    }

    /// Binary PGM (P5), maxval 255.
    pub fn write_pgm(&self, mut w: impl Write) -> Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)?;
        Ok(())
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_pgm(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn rejects_bad_magic() {
        let err = read_grid(&b"NOTAGRID0000"[..]).unwrap_err();
        assert!(matches!(err, LungError::Format(_)));
    }

    #[test]
    fn header_layout() {
        let g = VoxelGrid::filled(Dims::new(1, 2, 3), Spacing::new(1.25, 0.7, 0.5), 1.0);
        let mut buf = Vec::new();
        write_grid(&g, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 12 + 24 + 6 * 4);
        assert_eq!(&buf[..8], GRID_MAGIC);
        assert_eq!(&buf[8..12], &1u32.to_le_bytes());
        assert_eq!(&buf[20..28], &1.25f64.to_le_bytes());
        assert_eq!(&buf[44..48], &1.0f32.to_le_bytes());
    }

    #[test]
    fn truncated_file_is_an_error() {
        let g = VoxelGrid::filled(Dims::new(2, 2, 2), Spacing::CT, 0.5);
        let mut buf = Vec::new();
        write_grid(&g, &mut buf).unwrap();
        buf.pop();
        assert!(read_grid(&buf[..]).is_err());
    }

    #[test]
    fn pgm_header_and_size() {
        let g = VoxelGrid::from_fn(Dims::new(20, 4, 5), Spacing::CT, |z, _, _| z as f32 / 19.0)
            .unwrap();
        assert_eq!(g.middle_slices(8), 6..14);
        let img = GrayImage::montage(&[g.clone(), g], 8).unwrap();
        assert_eq!((img.width, img.height), (8 * 5 + 7, 2 * 4 + 1));
        let mut buf = Vec::new();
        img.write_pgm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n47 9\n255\n"));
        assert_eq!(buf.len(), b"P5\n47 9\n255\n".len() + 47 * 9);
        // first tile is slice 6
        assert_eq!(img.pixels[0], (6.0f32 / 19.0 * 255.0).round() as u8);
    }

    proptest! {
        #[test]
        fn roundtrip_bit_exact(
            (nz, ny, nx) in (1usize..5, 1usize..6, 1usize..6),
            seed in any::<u64>(),
            sz in 0.1f64..3.0,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d = Dims::new(nz, ny, nx);
            let g = VoxelGrid::from_fn(d, Spacing::new(sz, 0.7, 0.7), |_, _, _| rng.random::<f32>()).unwrap();
            let mut buf = Vec::new();
            write_grid(&g, &mut buf).unwrap();
            let back = read_grid(&buf[..]).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}
