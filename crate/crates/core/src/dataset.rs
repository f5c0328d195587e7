//! Seed, base and training sets.
//!
//! The base set holds 16 variants per seed: the eight axis reflections of the
//! seed and the eight axis reflections of its half-pixel-shifted copy.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{Rotation3, Vector3};
use rand::Rng as _;

use crate::analyzer;
use crate::error::{LungError, Result};
use crate::rng::{self, stream};
use crate::voxel::{label_components, reflect, shift_half_pixel, Axes, Dims, Spacing, VoxelGrid};
use crate::DEFAULT_THRESHOLD;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Seed,
    Reflection,
    ShiftedReflection,
    Generated,
    AcceptedFeedback,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Seed => "seed",
            Provenance::Reflection => "reflection",
            Provenance::ShiftedReflection => "shifted_reflection",
            Provenance::Generated => "generated",
            Provenance::AcceptedFeedback => "accepted_feedback",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = LungError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "seed" => Provenance::Seed,
            "reflection" => Provenance::Reflection,
            "shifted_reflection" => Provenance::ShiftedReflection,
            "generated" => Provenance::Generated,
            "accepted_feedback" => Provenance::AcceptedFeedback,
            other => return Err(LungError::Format(format!("unknown provenance `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoduleRecord {
    pub grid: VoxelGrid,
    pub provenance: Provenance,
    /// Originating seed index or generation batch.
    pub source_id: u32,
}

/// Ordered records sharing one geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct NoduleSet {
    dims: Dims,
    spacing: Spacing,
    records: Vec<NoduleRecord>,
}

impl NoduleSet {
    pub fn new(dims: Dims, spacing: Spacing) -> Self {
        Self {
            dims,
            spacing,
            records: Vec::new(),
        }
    }

    pub fn from_records(dims: Dims, spacing: Spacing, records: Vec<NoduleRecord>) -> Result<Self> {
        let mut set = Self::new(dims, spacing);
        for r in records {
            set.push(r)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, record: NoduleRecord) -> Result<()> {
        if record.grid.dims() != self.dims {
            return Err(LungError::DimensionMismatch {
                expected: self.dims.len(),
                found: record.grid.len(),
            });
        }
        if record.grid.spacing() != self.spacing {
            return Err(LungError::InvalidArgument(format!(
                "record spacing {:?} differs from set spacing {:?}",
                record.grid.spacing(),
                self.spacing
            )));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[NoduleRecord] {
        &self.records
    }

    pub fn iter(&self) -> std::slice::Iter<'_, NoduleRecord> {
        self.records.iter()
    }

    pub fn grids(&self) -> impl Iterator<Item = &VoxelGrid> {
        self.records.iter().map(|r| &r.grid)
    }

    /// Writes one grid file per record plus `manifest.txt`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut manifest = String::new();
        let mut paths = Vec::with_capacity(self.len());
        for (i, r) in self.records.iter().enumerate() {
            let name = format!("{i:05}.grid");
            let path = dir.join(&name);
            r.grid.save(&path)?;
            manifest.push_str(&format!("{name}\t{}\t{}\n", r.provenance, r.source_id));
            paths.push(path);
        }
        let mut f = fs::File::create(dir.join(MANIFEST))?;
        f.write_all(manifest.as_bytes())?;
        Ok(paths)
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        let mut records = Vec::new();
        for (n, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let fields: Vec<&str> = line.split('\t').collect();
            let [name, prov, source] = fields[..] else {
                return Err(LungError::Format(format!(
                    "manifest line {}: expected 3 fields",
                    n + 1
                )));
            };
            let source_id = source.parse().map_err(|_| {
                LungError::Format(format!("manifest line {}: bad source id `{source}`", n + 1))
            })?;
            records.push(NoduleRecord {
                grid: VoxelGrid::load(dir.join(name))?,
                provenance: prov.parse()?,
                source_id,
            });
        }
        let first = records.first().ok_or(LungError::EmptySet)?;
        let (dims, spacing) = (first.grid.dims(), first.grid.spacing());
        Self::from_records(dims, spacing, records)
    }
}

impl<'a> IntoIterator for &'a NoduleSet {
    type Item = &'a NoduleRecord;
    type IntoIter = std::slice::Iter<'a, NoduleRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

pub const MANIFEST: &str = "manifest.txt";

/// Procedural stand-in for segmented CT nodules.
///
/// Each seed is the union of one to four smoothly bounded ellipsoids, the
/// first centred in the grid and the others anchored inside it. Shapes that
/// touch the grid border, split into several components or fail the static
/// volume criterion are redrawn.
pub fn synth_seeds(count: usize, dims: Dims, spacing: Spacing, rng_seed: u64) -> Result<NoduleSet> {
    if count == 0 {
        return Err(LungError::InvalidArgument(
            "seed count must be positive".into(),
        ));
    }
    let mut set = NoduleSet::new(dims, spacing);
    for index in 0..count {
        let mut rng = rng::seeded(rng::derive_seed(rng_seed, index as u64), stream::SEEDS);
        let grid = (0..MAX_SEED_ATTEMPTS)
            .find_map(|_| {
                let g = blob(dims, spacing, &mut rng);
                is_valid_seed(&g).then_some(g)
            })
            .ok_or_else(|| {
                LungError::InvalidArgument(format!("grid {dims} too small for synthetic seeds"))
            })?;
        set.push(NoduleRecord {
            grid,
            provenance: Provenance::Seed,
            source_id: index as u32,
        })?;
    }
    Ok(set)
}

const MAX_SEED_ATTEMPTS: usize = 500;
/// Width of the soft boundary, in mm, over which values fall from 1 to 0.
const EDGE_WIDTH_MM: f64 = 1.4;

struct Ellipsoid {
    center: Vector3<f64>,
    semi_axes: Vector3<f64>,
    to_local: Rotation3<f64>,
}

impl Ellipsoid {
    fn random(center: Vector3<f64>, lo: f64, hi: f64, rng: &mut rng::Rng) -> Self {
        let semi_axes = Vector3::new(
            rng.random_range(lo..hi),
            rng.random_range(lo..hi),
            rng.random_range(lo..hi),
        );
        let tau = std::f64::consts::TAU;
        let rot = Rotation3::from_euler_angles(
            rng.random_range(0.0..tau),
            rng.random_range(0.0..tau),
            rng.random_range(0.0..tau),
        );
        Self {
            center,
            semi_axes,
            to_local: rot.inverse(),
        }
    }

    /// Approximate signed distance in mm, positive inside.
    fn depth(&self, p: &Vector3<f64>) -> f64 {
        let local = self.to_local * (p - self.center);
        let r = local.component_div(&self.semi_axes).norm();
        (1.0 - r) * self.semi_axes.min()
    }

    fn point_inside(&self, dir: &Vector3<f64>, frac: f64) -> Vector3<f64> {
        // scale the unit direction onto the surface in local frame, then pull in
        let local = self.to_local * dir;
        let r = local.component_div(&self.semi_axes).norm();
        self.center + dir * (frac / r)
    }
}

fn blob(dims: Dims, spacing: Spacing, rng: &mut rng::Rng) -> VoxelGrid {
    // physical coordinates (z, y, x) in mm of voxel centres
    let half = Vector3::new(
        dims.nz as f64 * spacing.z / 2.0,
        dims.ny as f64 * spacing.y / 2.0,
        dims.nx as f64 * spacing.x / 2.0,
    );
    let reach = half.min();
    let jitter = Vector3::new(
        rng.random_range(-0.5..0.5) * spacing.z,
        rng.random_range(-0.5..0.5) * spacing.y,
        rng.random_range(-0.5..0.5) * spacing.x,
    );
    let main = Ellipsoid::random(half + jitter, 0.3 * reach, 0.7 * reach, rng);
    let mut parts = vec![];
    let extra = rng.random_range(0..=3);
    for _ in 0..extra {
        let dir = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let dir = if dir.norm() < 1e-6 {
            Vector3::x()
        } else {
            dir.normalize()
        };
        let anchor = main.point_inside(&dir, rng.random_range(0.3..0.8));
        parts.push(Ellipsoid::random(anchor, 0.2 * reach, 0.45 * reach, rng));
    }
    parts.push(main);

    let values = (0..dims.len())
        .map(|i| {
            let [z, y, x] = dims.coords(i);
            let p = Vector3::new(
                (z as f64 + 0.5) * spacing.z,
                (y as f64 + 0.5) * spacing.y,
                (x as f64 + 0.5) * spacing.x,
            );
            let depth = parts
                .iter()
                .map(|e| e.depth(&p))
                .fold(f64::NEG_INFINITY, f64::max);
            (0.5 + depth / EDGE_WIDTH_MM).clamp(0.0, 1.0) as f32
        })
        .collect();
    VoxelGrid::from_parts_unchecked(dims, spacing, values)
}

fn is_valid_seed(grid: &VoxelGrid) -> bool {
    let d = grid.dims();
    let on_border = (0..d.len()).any(|i| {
        let [z, y, x] = d.coords(i);
        let border = z == 0 || y == 0 || x == 0 || z + 1 == d.nz || y + 1 == d.ny || x + 1 == d.nx;
        border && grid.values()[i] > 0.0
    });
    if on_border {
        return false;
    }
    let mask = grid.binarize(DEFAULT_THRESHOLD);
    if label_components(&mask).component_count() != 1 {
        return false;
    }
    analyzer::extract_features(grid, DEFAULT_THRESHOLD).is_ok_and(|f| analyzer::static_filter(&f))
}

/// Expands every record into its 16 base variants, seed-major.
///
/// Variant `k < 8` is reflection `Axes::from_index(k)` of the record; variant
/// `8 + k` is the same reflection of the half-pixel-shifted record. The
/// identity variant keeps the record's own provenance.
pub fn augment(seeds: &NoduleSet) -> Result<NoduleSet> {
    if seeds.is_empty() {
        return Err(LungError::EmptySet);
    }
    let mut out = NoduleSet::new(seeds.dims(), seeds.spacing());
    for r in seeds {
        let shifted = shift_half_pixel(&r.grid);
        for axes in Axes::all() {
            let provenance = if axes == Axes::NONE {
                r.provenance
            } else {
                Provenance::Reflection
            };
            out.push(NoduleRecord {
                grid: reflect(&r.grid, axes),
                provenance,
                source_id: r.source_id,
            })?;
        }
        for axes in Axes::all() {
            out.push(NoduleRecord {
                grid: reflect(&shifted, axes),
                provenance: Provenance::ShiftedReflection,
                source_id: r.source_id,
            })?;
        }
    }
    Ok(out)
}

/// Base set plus one uniformly drawn reflection of each accepted nodule.
pub fn inject_feedback(base: &NoduleSet, accepted: &NoduleSet, rng_seed: u64) -> Result<NoduleSet> {
    if !accepted.is_empty() && accepted.dims() != base.dims() {
        return Err(LungError::DimensionMismatch {
            expected: base.dims().len(),
            found: accepted.dims().len(),
        });
    }
    let mut rng = rng::seeded(rng_seed, stream::FEEDBACK);
    let mut out = base.clone();
    for r in accepted {
        let axes = Axes::from_index(rng.random_range(0..8u8));
        out.push(NoduleRecord {
            grid: reflect(&r.grid, axes),
            provenance: Provenance::AcceptedFeedback,
            source_id: r.source_id,
        })?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(dims: Dims) -> VoxelGrid {
        let c = [
            (dims.nz as f64 - 1.0) / 2.0,
            (dims.ny as f64 - 1.0) / 2.0,
            (dims.nx as f64 - 1.0) / 2.0,
        ];
        VoxelGrid::from_fn(dims, Spacing::new(1.0, 1.0, 1.0), |z, y, x| {
            let r2 =
                (z as f64 - c[0]).powi(2) + (y as f64 - c[1]).powi(2) + (x as f64 - c[2]).powi(2);
            if r2 <= 6.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    fn single(grid: VoxelGrid) -> NoduleSet {
        let (d, s) = (grid.dims(), grid.spacing());
        NoduleSet::from_records(
            d,
            s,
            vec![NoduleRecord {
                grid,
                provenance: Provenance::Seed,
                source_id: 0,
            }],
        )
        .unwrap()
    }

    #[test]
    fn seeds_are_deterministic() {
        let a = synth_seeds(1, Dims::DESK, Spacing::CT, 42).unwrap();
        let b = synth_seeds(1, Dims::DESK, Spacing::CT, 42).unwrap();
        assert_eq!(a, b);
        let c = synth_seeds(1, Dims::DESK, Spacing::CT, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn seeds_are_single_component_in_range() {
        let seeds = synth_seeds(20, Dims::DESK, Spacing::CT, 7).unwrap();
        assert_eq!(seeds.len(), 20);
        for r in &seeds {
            assert_eq!(label_components(&r.grid.binarize(0.5)).component_count(), 1);
            assert!(r.grid.values().iter().all(|v| (0.0..=1.0).contains(v)));
            let f = analyzer::extract_features(&r.grid, 0.5).unwrap();
            assert!(analyzer::static_filter(&f));
        }
    }

    #[test]
    fn seed_prefix_is_stable() {
        // per-seed substreams: asking for more seeds does not change earlier ones
        let a = synth_seeds(3, Dims::DESK, Spacing::CT, 9).unwrap();
        let b = synth_seeds(5, Dims::DESK, Spacing::CT, 9).unwrap();
        assert_eq!(a.records(), &b.records()[..3]);
    }

    #[test]
    fn augment_counts() {
        let seeds = synth_seeds(3, Dims::DESK, Spacing::CT, 1).unwrap();
        let base = augment(&seeds).unwrap();
        assert_eq!(base.len(), 48);
        assert!(augment(&NoduleSet::new(Dims::DESK, Spacing::CT)).is_err());
    }

    #[test]
    fn augment_single_seed_contains_it_once() {
        let seeds = synth_seeds(1, Dims::DESK, Spacing::CT, 5).unwrap();
        let base = augment(&seeds).unwrap();
        assert_eq!(base.len(), 16);
        let same: Vec<_> = base
            .iter()
            .enumerate()
            .filter(|(_, r)| r.grid == seeds.records()[0].grid)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(same, vec![0]);
        assert_eq!(base.records()[0].provenance, Provenance::Seed);
        assert!(base.records()[1..8]
            .iter()
            .all(|r| r.provenance == Provenance::Reflection));
        assert!(base.records()[8..]
            .iter()
            .all(|r| r.provenance == Provenance::ShiftedReflection));
    }

    #[test]
    fn symmetric_seed_reflections_coincide() {
        let base = augment(&single(sphere(Dims::new(7, 9, 9)))).unwrap();
        for r in &base.records()[1..8] {
            assert_eq!(r.grid, base.records()[0].grid);
        }
    }

    #[test]
    fn reflections_preserve_on_count() {
        let seeds = synth_seeds(2, Dims::DESK, Spacing::CT, 3).unwrap();
        let base = augment(&seeds).unwrap();
        for (k, r) in base.iter().enumerate() {
            if k % 16 < 8 {
                let seed = &seeds.records()[k / 16].grid;
                assert_eq!(
                    r.grid.binarize(0.5).count_on(),
                    seed.binarize(0.5).count_on()
                );
            }
        }
    }

    #[test]
    fn feedback_identity_and_counts() {
        let seeds = synth_seeds(2, Dims::DESK, Spacing::CT, 3).unwrap();
        let base = augment(&seeds).unwrap();
        let none = NoduleSet::new(base.dims(), base.spacing());
        assert_eq!(inject_feedback(&base, &none, 1).unwrap(), base);

        let accepted = synth_seeds(4, Dims::DESK, Spacing::CT, 11).unwrap();
        let out = inject_feedback(&base, &accepted, 1).unwrap();
        assert_eq!(out.len(), base.len() + 4);
        assert_eq!(out, inject_feedback(&base, &accepted, 1).unwrap());
        for (inj, src) in out.records()[base.len()..].iter().zip(accepted.iter()) {
            assert_eq!(inj.provenance, Provenance::AcceptedFeedback);
            assert!(Axes::all().any(|a| reflect(&src.grid, a) == inj.grid));
        }
    }

    #[test]
    fn set_dir_roundtrip() {
        let seeds = synth_seeds(3, Dims::DESK, Spacing::CT, 2).unwrap();
        let base = augment(&seeds).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = base.save_dir(dir.path()).unwrap();
        assert_eq!(paths.len(), 48);
        assert_eq!(NoduleSet::load_dir(dir.path()).unwrap(), base);
    }

    #[test]
    fn push_rejects_other_geometry() {
        let mut set = NoduleSet::new(Dims::DESK, Spacing::CT);
        let g = VoxelGrid::zeros(Dims::new(2, 2, 2), Spacing::CT);
        assert!(set
            .push(NoduleRecord {
                grid: g,
                provenance: Provenance::Seed,
                source_id: 0
            })
            .is_err());
    }
}
