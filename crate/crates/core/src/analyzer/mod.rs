//! Shape features and the statistical acceptance filter.
//!
//! Acceptance works per feature. A nodule whose feature value pulls the
//! running mean of the accepted stream back towards the seed mean is always
//! kept for that feature. Otherwise a weighted distance `d` is computed and,
//! once `d > 3`, the feature is kept with probability `0.7 + 0.9 / d`. A
//! nodule is accepted only if every feature keeps it.

mod features;
mod io;

pub use features::{
    extract_features, static_filter, Feature, FeatureVector, FEATURE_COUNT, MIN_VOLUME_MM3,
};
pub use io::{write_feature_csv, FeatureRow};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::NoduleSet;
use crate::error::{LungError, Result};
use crate::rng::{self, stream};
use crate::voxel::VoxelGrid;

/// Per-feature mean and sample standard deviation of the seed set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedStats {
    pub mu: [f64; FEATURE_COUNT],
    pub sigma: [f64; FEATURE_COUNT],
}

impl SeedStats {
    pub fn from_features(features: &[FeatureVector]) -> Result<Self> {
        if features.len() < 2 {
            return Err(LungError::InvalidArgument(format!(
                "seed statistics need at least 2 nodules, got {}",
                features.len()
            )));
        }
        let n = features.len() as f64;
        let mut mu = [0.0; FEATURE_COUNT];
        let mut sigma = [0.0; FEATURE_COUNT];
        for f in Feature::ALL {
            let i = f as usize;
            mu[i] = features.iter().map(|v| v[f]).sum::<f64>() / n;
            let ss: f64 = features.iter().map(|v| (v[f] - mu[i]).powi(2)).sum();
            sigma[i] = (ss / (n - 1.0)).sqrt();
            if !(sigma[i] > 0.0 && sigma[i].is_finite()) {
                return Err(LungError::DegenerateStats(f.name()));
            }
        }
        Ok(Self { mu, sigma })
    }

    /// Extracts features from every grid and summarises them.
    pub fn from_set(seeds: &NoduleSet, threshold: f64) -> Result<(Self, Vec<FeatureVector>)> {
        let features = seeds
            .grids()
            .map(|g| extract_features(g, threshold))
            .collect::<Result<Vec<_>>>()?;
        Ok((Self::from_features(&features)?, features))
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<_> = Feature::ALL
            .iter()
            .map(|&f| serde_json::json!({ "name": f.name(), "mu": self.mu[f as usize], "sigma": self.sigma[f as usize] }))
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "features": rows }))
            .expect("plain numbers serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            name: String,
            mu: f64,
            sigma: f64,
        }
        #[derive(Deserialize)]
        struct Doc {
            features: Vec<Row>,
        }
        let doc: Doc = serde_json::from_str(text).map_err(|e| LungError::Format(e.to_string()))?;
        let mut mu = [f64::NAN; FEATURE_COUNT];
        let mut sigma = [f64::NAN; FEATURE_COUNT];
        for row in doc.features {
            let f = Feature::from_name(&row.name)
                .ok_or_else(|| LungError::Format(format!("unknown feature `{}`", row.name)))?;
            mu[f as usize] = row.mu;
            sigma[f as usize] = row.sigma;
        }
        if let Some(f) = Feature::ALL.iter().find(|&&f| {
            mu[f as usize].is_nan() || sigma[f as usize].is_nan() || sigma[f as usize] <= 0.0
        }) {
            return Err(LungError::Format(format!(
                "feature `{}` missing or degenerate",
                f.name()
            )));
        }
        Ok(Self { mu, sigma })
    }
}

/// `|(y + 3*mean - 4*mu) / sigma|`
pub fn weighted_distance(y: f64, running_mean: f64, mu: f64, sigma: f64) -> f64 {
    ((y + 3.0 * running_mean - 4.0 * mu) / sigma).abs()
}

/// Probability of keeping a nodule on one feature.
pub fn p_keep(y: f64, running_mean: f64, mu: f64, d: f64) -> f64 {
    let same_side = (y > mu && running_mean > mu) || (y < mu && running_mean < mu);
    if same_side && d > 3.0 {
        (0.7 + 0.9 / d).min(1.0)
    } else {
        1.0
    }
}

/// Why a nodule was or was not accepted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    /// Failed the static volume criterion.
    TooSmall,
    /// Lost at least one per-feature draw.
    Rejected,
    /// No on-voxels, several components, or an inverted image.
    Illegal,
}

impl Verdict {
    pub fn is_accepted(self) -> bool {
        self == Verdict::Accepted
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Accepted => "accepted",
            Verdict::TooSmall => "too_small",
            Verdict::Rejected => "rejected",
            Verdict::Illegal => "illegal",
        }
    }
}

/// Running state of the acceptance filter over one stream of nodules.
#[derive(Clone, Debug)]
pub struct AcceptanceState {
    running_mean: [f64; FEATURE_COUNT],
    sums: [f64; FEATURE_COUNT],
    accepted_count: usize,
    draws: u64,
    rng: rng::Rng,
}

impl AcceptanceState {
    /// Fresh state; the running mean starts at the seed mean.
    pub fn new(stats: &SeedStats, rng_seed: u64) -> Self {
        Self {
            running_mean: stats.mu,
            sums: [0.0; FEATURE_COUNT],
            accepted_count: 0,
            draws: 0,
            rng: rng::seeded(rng_seed, stream::ACCEPT),
        }
    }

    pub fn running_mean(&self) -> &[f64; FEATURE_COUNT] {
        &self.running_mean
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted_count
    }

    /// Number of random draws consumed so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Per-feature keep probabilities for `features` against the current state.
    pub fn keep_probabilities(
        &self,
        features: &FeatureVector,
        stats: &SeedStats,
    ) -> [f64; FEATURE_COUNT] {
        std::array::from_fn(|i| {
            let y = features.as_array()[i];
            let d = weighted_distance(y, self.running_mean[i], stats.mu[i], stats.sigma[i]);
            p_keep(y, self.running_mean[i], stats.mu[i], d)
        })
    }

    /// One draw per feature whose keep probability is below one; accepted iff
    /// every draw keeps. Acceptance folds the features into the running mean.
    pub fn accept(&mut self, features: &FeatureVector, stats: &SeedStats) -> bool {
        let mut keep = true;
        for p in self.keep_probabilities(features, stats) {
            if p < 1.0 {
                self.draws += 1;
                keep &= self.rng.random::<f64>() < p;
            }
        }
        if keep {
            self.accepted_count += 1;
            let n = self.accepted_count as f64;
            for (i, &y) in features.as_array().iter().enumerate() {
                self.sums[i] += y;
                self.running_mean[i] = self.sums[i] / n;
            }
        }
        keep
    }

    /// Full analyzer path for one grid: legality, static filter, then [`accept`](Self::accept).
    pub fn consider(
        &mut self,
        grid: &VoxelGrid,
        stats: &SeedStats,
        threshold: f64,
    ) -> (Verdict, Option<FeatureVector>) {
        match legal_features(grid, threshold) {
            None => (Verdict::Illegal, None),
            Some(f) => (self.judge(&f, stats), Some(f)),
        }
    }

    fn judge(&mut self, f: &FeatureVector, stats: &SeedStats) -> Verdict {
        if !static_filter(f) {
            Verdict::TooSmall
        } else if self.accept(f, stats) {
            Verdict::Accepted
        } else {
            Verdict::Rejected
        }
    }
}

fn legal_features(grid: &VoxelGrid, threshold: f64) -> Option<FeatureVector> {
    if grid.is_inverted(threshold) {
        return None;
    }
    extract_features(grid, threshold).ok()
}

/// Result of screening a whole set in order.
#[derive(Clone, Debug)]
pub struct BatchAnalysis {
    pub accepted: NoduleSet,
    pub state: AcceptanceState,
    pub rows: Vec<FeatureRow>,
}

impl BatchAnalysis {
    pub fn acceptance_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.accepted.len() as f64 / self.rows.len() as f64
    }

    pub fn accepted_features(&self) -> Vec<FeatureVector> {
        self.rows
            .iter()
            .filter(|r| r.verdict.is_accepted())
            .filter_map(|r| r.features)
            .collect()
    }
}

/// Screens nodules in order. Features are extracted in parallel; the
/// acceptance pass is sequential because the running mean depends on order.
pub fn analyze_batch(
    nodules: &NoduleSet,
    stats: &SeedStats,
    rng_seed: u64,
    threshold: f64,
) -> BatchAnalysis {
    use rayon::prelude::*;

    let features: Vec<Option<FeatureVector>> = nodules
        .records()
        .par_iter()
        .map(|r| legal_features(&r.grid, threshold))
        .collect();

    let mut state = AcceptanceState::new(stats, rng_seed);
    let mut accepted = NoduleSet::new(nodules.dims(), nodules.spacing());
    let mut rows = Vec::with_capacity(nodules.len());
    for (record, f) in nodules.iter().zip(features) {
        let verdict = match &f {
            None => Verdict::Illegal,
            Some(f) => state.judge(f, stats),
        };
        if verdict.is_accepted() {
            accepted
                .push(record.clone())
                .expect("same geometry as input set");
        }
        rows.push(FeatureRow {
            provenance: record.provenance,
            source_id: record.source_id,
            features: f,
            verdict,
        });
    }
    BatchAnalysis {
        accepted,
        state,
        rows,
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::dataset::{augment, synth_seeds};
    use crate::voxel::{Dims, Spacing};

    fn stats_unit() -> SeedStats {
        SeedStats {
            mu: [10.0; FEATURE_COUNT],
            sigma: [2.0; FEATURE_COUNT],
        }
    }

    #[test]
    fn distance_anchors() {
        let (mu, s) = (10.0, 2.0);
        assert_eq!(weighted_distance(mu, mu, mu, s), 0.0);
        assert_eq!(weighted_distance(mu + s, mu + s, mu, s), 4.0);
        assert_eq!(weighted_distance(mu + 2.0 * s, mu, mu, s), 2.0);
    }

    #[test]
    fn keep_anchors() {
        let mu = 10.0;
        assert_eq!(p_keep(mu + 1.0, mu + 1.0, mu, 2.0), 1.0);
        assert_eq!(p_keep(mu - 1.0, mu + 1.0, mu, 2.0), 1.0);
        assert!((p_keep(mu + 1.0, mu + 1.0, mu, 4.0) - 0.925).abs() < 1e-12);
        assert!((p_keep(mu - 1.0, mu - 1.0, mu, 4.0) - 0.925).abs() < 1e-12);
        // pulls the running mean back: always kept
        assert_eq!(p_keep(mu + 5.0, mu - 1.0, mu, 10.0), 1.0);
        // exactly at d = 3 is not above it
        assert_eq!(p_keep(mu + 1.0, mu + 1.0, mu, 3.0), 1.0);
    }

    #[test]
    fn all_mean_nodule_is_always_accepted_without_draws() {
        let stats = stats_unit();
        let mut st = AcceptanceState::new(&stats, 3);
        let f = FeatureVector::from_array(stats.mu);
        for _ in 0..100 {
            assert!(st.accept(&f, &stats));
        }
        assert_eq!(st.draws(), 0);
        assert_eq!(st.accepted_count(), 100);
    }

    #[test]
    fn single_feature_bernoulli_rate() {
        let stats = stats_unit();
        let mut high = stats.mu;
        high[0] += 10.0 * stats.sigma[0];
        let outlier = FeatureVector::from_array(high);
        let mut nudge = stats.mu;
        nudge[0] += 0.5 * stats.sigma[0];
        let nudge = FeatureVector::from_array(nudge);

        let trials = 20_000;
        let mut kept = 0;
        let mut expected_p = 0.0;
        for t in 0..trials {
            let mut st = AcceptanceState::new(&stats, 1000 + t);
            assert!(st.accept(&nudge, &stats));
            assert!(st.running_mean()[0] > stats.mu[0]);
            let p = st.keep_probabilities(&outlier, &stats)[0];
            let d = weighted_distance(high[0], st.running_mean()[0], stats.mu[0], stats.sigma[0]);
            assert_eq!(p, 0.7 + 0.9 / d);
            expected_p = p;
            kept += st.accept(&outlier, &stats) as u32;
        }
        let rate = kept as f64 / trials as f64;
        // d = (20 + 1.5) = 21.5, p ~ 0.7419; 4 sigma binomial band
        let sd = (expected_p * (1.0 - expected_p) / trials as f64).sqrt();
        assert!(
            (rate - expected_p).abs() < 4.0 * sd,
            "rate {rate} vs p {expected_p}"
        );
    }

    #[test]
    fn rejection_leaves_state() {
        let stats = stats_unit();
        let mut st = AcceptanceState::new(&stats, 0);
        let mut above = stats.mu;
        above.iter_mut().for_each(|v| *v += 2.0);
        assert!(st.accept(&FeatureVector::from_array(above), &stats));
        let mut far = stats.mu;
        far.iter_mut().for_each(|v| *v += 200.0);
        let far = FeatureVector::from_array(far);
        let mut rejected = false;
        for _ in 0..50 {
            let n = st.accepted_count();
            let mean = *st.running_mean();
            if !st.accept(&far, &stats) {
                assert_eq!(st.accepted_count(), n);
                assert_eq!(st.running_mean(), &mean);
                rejected = true;
                break;
            }
        }
        assert!(rejected);
    }

    #[test]
    fn stats_need_spread() {
        let f = FeatureVector::from_array([1.0; FEATURE_COUNT]);
        assert!(matches!(
            SeedStats::from_features(&[f, f]),
            Err(LungError::DegenerateStats(_))
        ));
        assert!(SeedStats::from_features(&[f]).is_err());
    }

    #[test]
    fn stats_json_roundtrip() {
        let seeds = synth_seeds(6, Dims::DESK, Spacing::CT, 4).unwrap();
        let (stats, _) = SeedStats::from_set(&seeds, 0.5).unwrap();
        assert_eq!(SeedStats::from_json(&stats.to_json()).unwrap(), stats);
        assert!(SeedStats::from_json("{\"features\": []}").is_err());
    }

    #[test]
    fn empty_batch() {
        let stats = stats_unit();
        let out = analyze_batch(&NoduleSet::new(Dims::DESK, Spacing::CT), &stats, 1, 0.5);
        assert!(out.accepted.is_empty());
        assert_eq!(out.state.accepted_count(), 0);
        assert_eq!(out.state.running_mean(), &stats.mu);
    }

    #[test]
    fn seed_replay_mostly_accepted() {
        let seeds = synth_seeds(20, Dims::DESK, Spacing::CT, 21).unwrap();
        let (stats, _) = SeedStats::from_set(&seeds, 0.5).unwrap();
        let out = analyze_batch(&seeds, &stats, 5, 0.5);
        assert!(
            out.acceptance_fraction() >= 0.9,
            "{}",
            out.acceptance_fraction()
        );
    }

    #[test]
    fn batch_is_deterministic_and_order_tolerant() {
        let seeds = synth_seeds(8, Dims::DESK, Spacing::CT, 2).unwrap();
        let base = augment(&seeds).unwrap();
        let (stats, _) = SeedStats::from_set(&seeds, 0.5).unwrap();
        let a = analyze_batch(&base, &stats, 9, 0.5);
        let b = analyze_batch(&base, &stats, 9, 0.5);
        assert_eq!(a.accepted, b.accepted);

        let mut rev: Vec<_> = base.records().to_vec();
        rev.reverse();
        let rev = NoduleSet::from_records(base.dims(), base.spacing(), rev).unwrap();
        let c = analyze_batch(&rev, &stats, 9, 0.5);
        for r in c.accepted.iter() {
            assert!(static_filter(&extract_features(&r.grid, 0.5).unwrap()));
        }
    }

    #[test]
    fn inverted_grid_is_illegal() {
        let g = VoxelGrid::filled(Dims::DESK, Spacing::CT, 1.0);
        let mut st = AcceptanceState::new(&stats_unit(), 0);
        assert_eq!(
            st.consider(&g, &stats_unit(), 0.5),
            (Verdict::Illegal, None)
        );
        assert_eq!(st.draws(), 0);
    }

    proptest! {
        #[test]
        fn running_mean_is_brute_force_mean(
            rows in prop::collection::vec(prop::array::uniform12(-5.0f64..25.0), 1..40),
            seed in any::<u64>(),
        ) {
            let stats = stats_unit();
            let mut st = AcceptanceState::new(&stats, seed);
            let mut kept = Vec::new();
            for r in &rows {
                if st.accept(&FeatureVector::from_array(*r), &stats) {
                    kept.push(*r);
                }
            }
            prop_assert_eq!(st.accepted_count(), kept.len());
            if !kept.is_empty() {
                for i in 0..FEATURE_COUNT {
                    let mut s = 0.0;
                    for r in &kept {
                        s += r[i];
                    }
                    prop_assert_eq!(st.running_mean()[i], s / kept.len() as f64);
                }
            }
        }

        #[test]
        fn keep_probability_band(y in -50.0f64..50.0, m in -50.0f64..50.0, mu in -10.0f64..10.0, s in 0.1f64..5.0) {
            let d = weighted_distance(y, m, mu, s);
            let p = p_keep(y, m, mu, d);
            prop_assert!(p > 0.7 && p <= 1.0);
            prop_assert_eq!(d, ((y + 3.0 * m - 4.0 * mu) / s).abs());
        }
    }
}
