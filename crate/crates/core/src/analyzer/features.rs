use std::ops::Index;

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{LungError, Result};
use crate::voxel::{label_components, VoxelGrid};

pub const FEATURE_COUNT: usize = 12;

/// Smallest volume a candidate nodule may have.
pub const MIN_VOLUME_MM3: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Feature {
    Volume,
    SurfaceArea,
    SaToVol,
    Compactness,
    ExtentX,
    ExtentY,
    ExtentZ,
    Elongation,
    Flatness,
    Sphericity,
    EquivalentDiameter,
    FillFraction,
}

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::Volume,
        Feature::SurfaceArea,
        Feature::SaToVol,
        Feature::Compactness,
        Feature::ExtentX,
        Feature::ExtentY,
        Feature::ExtentZ,
        Feature::Elongation,
        Feature::Flatness,
        Feature::Sphericity,
        Feature::EquivalentDiameter,
        Feature::FillFraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Volume => "volume",
            Feature::SurfaceArea => "surface_area",
            Feature::SaToVol => "sa_to_vol",
            Feature::Compactness => "compactness",
            Feature::ExtentX => "extent_x",
            Feature::ExtentY => "extent_y",
            Feature::ExtentZ => "extent_z",
            Feature::Elongation => "elongation",
            Feature::Flatness => "flatness",
            Feature::Sphericity => "sphericity",
            Feature::EquivalentDiameter => "equivalent_diameter",
            Feature::FillFraction => "fill_fraction",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// The twelve shape descriptors of one nodule, in [`Feature::ALL`] order.
///
/// Lengths are mm, areas mm², volumes mm³.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector([f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn from_array(values: [f64; FEATURE_COUNT]) -> Self {
        Self(values)
    }

    pub fn as_array(&self) -> &[f64; FEATURE_COUNT] {
        &self.0
    }

    pub fn volume(&self) -> f64 {
        self[Feature::Volume]
    }
}

impl Index<Feature> for FeatureVector {
    type Output = f64;

    fn index(&self, f: Feature) -> &f64 {
        &self.0[f as usize]
    }
}

/// Computes the descriptors of the on-voxels of `grid`.
///
/// - Surface area counts exposed voxel faces, each weighted by its physical
///   area; faces on the grid border count as exposed.
/// - Principal axes come from the second-moment matrix of the solid voxel
///   union (centre scatter plus each box's own `s²/12` per axis), so a
///   single voxel still has a finite elongation.
pub fn extract_features(grid: &VoxelGrid, threshold: f64) -> Result<FeatureVector> {
    let mask = grid.binarize(threshold);
    match label_components(&mask).component_count() {
        0 => return Err(LungError::EmptyNodule),
        1 => {}
        n => return Err(LungError::MultiComponent(n)),
    }
    let d = grid.dims();
    let s = grid.spacing();
    let face_area = [s.y * s.x, s.z * s.x, s.z * s.y];
    let step = [d.ny * d.nx, d.nx, 1];
    let extent = d.as_array();

    let mut count = 0usize;
    let mut faces = [0usize; 3];
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut sum = [0.0f64; 3];
    let mut centers = Vec::new();
    for i in mask.on_indices() {
        let c = d.coords(i);
        count += 1;
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
            if c[a] == 0 || !mask.is_on(i - step[a]) {
                faces[a] += 1;
            }
            if c[a] + 1 == extent[a] || !mask.is_on(i + step[a]) {
                faces[a] += 1;
            }
        }
        let p = [c[0] as f64 * s.z, c[1] as f64 * s.y, c[2] as f64 * s.x];
        for a in 0..3 {
            sum[a] += p[a];
        }
        centers.push(p);
    }

    let n = count as f64;
    let area: f64 = (0..3).map(|a| faces[a] as f64 * face_area[a]).sum();
    let volume = n * s.voxel_volume();
    let mean = sum.map(|v| v / n);
    let mut cov = Matrix3::zeros();
    for p in &centers {
        for r in 0..3 {
            for c in 0..3 {
                cov[(r, c)] += (p[r] - mean[r]) * (p[c] - mean[c]);
            }
        }
    }
    cov /= n;
    for (a, sa) in s.as_array().into_iter().enumerate() {
        cov[(a, a)] += sa * sa / 12.0;
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(cov)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(f64::total_cmp);
    let elongation = (eig[2] / eig[0]).sqrt().max(1.0);
    let flatness = (eig[1] / eig[0]).sqrt().max(1.0);

    let ext = [0, 1, 2].map(|a| (hi[a] - lo[a] + 1) as f64 * s.as_array()[a]);
    let (extent_z, extent_y, extent_x) = (ext[0], ext[1], ext[2]);

    let sphericity = std::f64::consts::PI.cbrt() * (6.0 * volume).powf(2.0 / 3.0) / area;
    let equivalent_diameter = (6.0 * volume / std::f64::consts::PI).cbrt();

    Ok(FeatureVector([
        volume,
        area,
        area / volume,
        area.powi(3) / volume.powi(2),
        extent_x,
        extent_y,
        extent_z,
        elongation,
        flatness,
        sphericity,
        equivalent_diameter,
        volume / (extent_x * extent_y * extent_z),
    ]))
}

/// Static pruning criterion: volume strictly above 4 mm³.
pub fn static_filter(features: &FeatureVector) -> bool {
    features.volume() > MIN_VOLUME_MM3
}
