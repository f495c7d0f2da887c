//! Lebesgue volumes of score level sets `{x : s(x) >= t}` inside a reference box.
//!
//! Two providers implement [`LevelVolume`]:
//!
//! - [`VolumeEstimator`]: Monte-Carlo, with one set of uniform points drawn
//!   once and shared by every threshold and every scorer. Because all
//!   volumes are counts over the same points, estimated `λ_s(t)` is exactly
//!   nonincreasing in `t`, and `ψ∘s` yields bit-identical volumes to `s` for
//!   strictly increasing `ψ`.
//! - [`ExactPiecewiseVolume`]: closed-form volumes for dyadic piecewise scorers.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::data::{BoundingBox, CellIndex};
use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::scoring::Scorer;

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

/// Level-set volume function `t ↦ λ({s >= t})` of one scorer.
#[derive(Debug, Clone)]
pub struct LevelProfile {
    sorted_levels: Vec<f64>,
    weights: Weights,
}

#[derive(Debug, Clone)]
enum Weights {
    /// Each level carries `total / len` volume; computed as `total·count/len`.
    Uniform { total: f64 },
    /// `suffix[i]` = volume carried by `sorted_levels[i..]`.
    Suffix(Vec<f64>),
}

impl LevelProfile {
    fn uniform(mut levels: Vec<f64>, total: f64) -> Self {
        levels.par_sort_unstable_by(f64::total_cmp);
        Self {
            sorted_levels: levels,
            weights: Weights::Uniform { total },
        }
    }

    pub(crate) fn weighted(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut suffix = vec![0.0; pairs.len() + 1];
        for i in (0..pairs.len()).rev() {
            suffix[i] = suffix[i + 1] + pairs[i].1;
        }
        Self {
            sorted_levels: pairs.into_iter().map(|p| p.0).collect(),
            weights: Weights::Suffix(suffix),
        }
    }

    pub fn volume_at_least(&self, t: f64) -> f64 {
        let first = self.sorted_levels.partition_point(|&v| v < t);
        match &self.weights {
            Weights::Uniform { total } => {
                let len = self.sorted_levels.len();
                total * (len - first) as f64 / len as f64
            }
            Weights::Suffix(suffix) => suffix[first],
        }
    }

    /// Volume of the whole reference region.
    pub fn total_volume(&self) -> f64 {
        match &self.weights {
            Weights::Uniform { total } => *total,
            Weights::Suffix(suffix) => suffix[0],
        }
    }
}

pub trait LevelVolume: Sync {
    fn profile(&self, scorer: &Scorer) -> Result<Arc<LevelProfile>>;

    /// Volumes of `{s >= t}` for ascending thresholds.
    fn level_set_volumes(&self, scorer: &Scorer, thresholds: &[f64]) -> Result<Vec<f64>> {
        if thresholds.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::param("thresholds must be sorted ascending"));
        }
        let profile = self.profile(scorer)?;
        Ok(thresholds.iter().map(|&t| profile.volume_at_least(t)).collect())
    }
}

/// Monte-Carlo level-set volumes over a fixed uniform sample of a box.
#[derive(Debug)]
pub struct VolumeEstimator {
    bbox: BoundingBox,
    points: Vec<f64>,
    cache: Mutex<HashMap<String, Arc<LevelProfile>>>,
}

impl VolumeEstimator {
    /// Draws `n_points` uniform points in `bbox`, coordinates in row order.
    pub fn new(bbox: BoundingBox, n_points: usize, rng: &mut RandomSource) -> Result<Self> {
        if n_points == 0 {
            return Err(Error::param("need at least one Monte-Carlo point"));
        }
        let d = bbox.dim();
        let mut points = Vec::with_capacity(n_points * d);
        for _ in 0..n_points {
            for i in 0..d {
                points.push(rng.uniform_in(bbox.lower()[i], bbox.upper()[i]));
            }
        }
        Ok(Self {
            bbox,
            points,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn num_points(&self) -> usize {
        self.points.len() / self.bbox.dim()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

impl LevelVolume for VolumeEstimator {
    fn profile(&self, scorer: &Scorer) -> Result<Arc<LevelProfile>> {
        if scorer.dim() != self.bbox.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.bbox.dim(),
                actual: scorer.dim(),
            });
        }
        let key = scorer.to_json();
        if let Some(p) = self.cache.lock().unwrap().get(&key) {
            return Ok(Arc::clone(p));
        }
        let scores = scorer.score_flat(&self.points, self.bbox.dim())?;
        let profile = Arc::new(LevelProfile::uniform(scores, self.bbox.volume()));
        self.cache
            .lock()
            .unwrap()
            .insert(key, Arc::clone(&profile));
        Ok(profile)
    }
}

/// `volumes[i] = vol(box)·#{j : s(U_j) >= thresholds[i]}/N` over the estimator's points.
pub fn mc_level_set_volumes(est: &VolumeEstimator, scorer: &Scorer, thresholds: &[f64]) -> Result<Vec<f64>> {
    est.level_set_volumes(scorer, thresholds)
}

/// Exact volumes for [`Scorer::DyadicPiecewise`] scorers (optionally wrapped
/// in monotone transforms), measured inside the scorer's own box.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactPiecewiseVolume;

impl ExactPiecewiseVolume {
    fn groups(scorer: &Scorer) -> Result<(Vec<(f64, u64)>, f64)> {
        match scorer {
            Scorer::DyadicPiecewise(p) => Ok((p.level_groups(), p.bbox.cell_volume(p.depth))),
            Scorer::MonotoneTransformed { base, transform } => {
                let (groups, cell) = Self::groups(base)?;
                Ok((groups.into_iter().map(|(l, c)| (transform.apply(l), c)).collect(), cell))
            }
            _ => Err(Error::param("exact volumes are only available for dyadic piecewise scorers")),
        }
    }
}

impl LevelVolume for ExactPiecewiseVolume {
    fn profile(&self, scorer: &Scorer) -> Result<Arc<LevelProfile>> {
        let (groups, cell) = Self::groups(scorer)?;
        Ok(Arc::new(LevelProfile::weighted(
            groups.into_iter().map(|(l, c)| (l, c as f64 * cell)).collect(),
        )))
    }
}

/// `(#cells)·vol(box)·2^{-j·d}`.
pub fn exact_cellset_volume(cells: &[CellIndex], bbox: &BoundingBox, depth: u32) -> Result<f64> {
    let side = 1u64 << depth;
    for c in cells {
        if c.len() != bbox.dim() || c.iter().any(|&i| i as u64 >= side) {
            return Err(Error::param(format!("cell {c:?} is not a depth-{depth} cell of the box")));
        }
    }
    Ok(cells.len() as f64 * bbox.cell_volume(depth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::scoring::{CellLevel, GaussianParams, MonotoneTransform, PiecewiseParams};

    fn unit_square() -> BoundingBox {
        BoundingBox::cube(2, 0.0, 1.0).unwrap()
    }

    /// Strictly increasing in x₁ on the unit square and flat (to 1e-13) in x₂,
    /// so its level sets there are the half-planes of s(x) = x₁.
    fn first_coordinate_scorer() -> Scorer {
        Scorer::gaussian(GaussianParams::diagonal(vec![2.0, 0.5], vec![1.0, 1e12]).unwrap())
    }

    #[test]
    fn constant_scorer_volumes() {
        let est = VolumeEstimator::new(unit_square(), 1000, &mut RandomSource::new(1)).unwrap();
        let s = Scorer::DyadicPiecewise(PiecewiseParams::constant(unit_square(), 1.0).unwrap());
        assert_eq!(mc_level_set_volumes(&est, &s, &[0.5]).unwrap(), vec![1.0]);
        assert_eq!(mc_level_set_volumes(&est, &s, &[2.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn half_square_volume() {
        let est = VolumeEstimator::new(unit_square(), 1_000_000, &mut RandomSource::new(2)).unwrap();
        let s = first_coordinate_scorer();
        let t = s.score_point(&[0.5, 0.5]).unwrap();
        let v = mc_level_set_volumes(&est, &s, &[t]).unwrap()[0];
        assert!((v - 0.5).abs() < 0.002, "{v}");
    }

    #[test]
    fn half_square_unbiased_over_seeds() {
        let s = first_coordinate_scorer();
        let t = s.score_point(&[0.5, 0.5]).unwrap();
        let mean: f64 = (0..20)
            .map(|seed| {
                let est = VolumeEstimator::new(unit_square(), 200_000, &mut RandomSource::new(100 + seed)).unwrap();
                mc_level_set_volumes(&est, &s, &[t]).unwrap()[0]
            })
            .sum::<f64>()
            / 20.0;
        assert!((mean - 0.5).abs() < 1e-3, "{mean}");
    }

    #[test]
    fn volumes_nonincreasing_and_transform_exact() {
        let bbox = BoundingBox::cube(2, -4.0, 4.0).unwrap();
        let est = VolumeEstimator::new(bbox, 50_000, &mut RandomSource::new(3)).unwrap();
        let s = Scorer::gaussian(GaussianParams::diagonal(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap());
        let thresholds: Vec<f64> = (0..50).map(|i| i as f64 * 0.002).collect();
        let vols = mc_level_set_volumes(&est, &s, &thresholds).unwrap();
        assert!(vols.windows(2).all(|w| w[0] >= w[1]));
        for psi in MonotoneTransform::catalogue() {
            let ts = Scorer::transformed(s.clone(), psi);
            let mapped: Vec<f64> = thresholds.iter().map(|&t| psi.apply(t)).collect();
            let tv = mc_level_set_volumes(&est, &ts, &mapped).unwrap();
            assert_eq!(tv, vols, "{psi:?}");
        }
    }

    #[test]
    fn unsorted_thresholds_and_dimension_errors() {
        let est = VolumeEstimator::new(unit_square(), 10, &mut RandomSource::new(1)).unwrap();
        let s2 = Scorer::gaussian(GaussianParams::diagonal(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap());
        assert!(mc_level_set_volumes(&est, &s2, &[0.2, 0.1]).is_err());
        let s1 = Scorer::gaussian(GaussianParams::diagonal(vec![0.0], vec![1.0]).unwrap());
        assert!(matches!(
            mc_level_set_volumes(&est, &s1, &[0.1]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn estimator_is_seed_deterministic() {
        let a = VolumeEstimator::new(unit_square(), 100, &mut RandomSource::new(8)).unwrap();
        let b = VolumeEstimator::new(unit_square(), 100, &mut RandomSource::new(8)).unwrap();
        assert_eq!(a.points(), b.points());
        let data = Dataset::new(a.points().to_vec(), 2).unwrap();
        assert!(data.rows().all(|p| unit_square().contains(p)));
    }

    #[test]
    fn exact_piecewise_profile() {
        let bbox = BoundingBox::cube(1, 0.0, 1.0).unwrap();
        let p = PiecewiseParams::new(
            bbox,
            2,
            vec![CellLevel { index: vec![1], level: 3.0 }, CellLevel { index: vec![2], level: 2.0 }],
            1.0,
        )
        .unwrap();
        let s = Scorer::DyadicPiecewise(p);
        let v = ExactPiecewiseVolume.level_set_volumes(&s, &[0.0, 1.0, 1.5, 2.0, 3.0, 3.5]).unwrap();
        assert_eq!(v, vec![1.0, 1.0, 0.5, 0.5, 0.25, 0.0]);
        let t = Scorer::transformed(s, MonotoneTransform::Power { p: 2.0 });
        let v2 = ExactPiecewiseVolume.level_set_volumes(&t, &[1.0, 4.0, 9.0]).unwrap();
        assert_eq!(v2, vec![1.0, 0.5, 0.25]);
        let g = Scorer::gaussian(GaussianParams::diagonal(vec![0.0], vec![1.0]).unwrap());
        assert!(ExactPiecewiseVolume.profile(&g).is_err());
    }

    #[test]
    fn cellset_volume_examples() {
        let unit = unit_square();
        assert_eq!(exact_cellset_volume(&[vec![0, 1]], &unit, 1).unwrap(), 0.25);
        let all: Vec<CellIndex> = (0..4u32).flat_map(|i| (0..4u32).map(move |j| vec![i, j])).collect();
        let bbox = BoundingBox::new(vec![-1.0, 0.0], vec![2.0, 5.0]).unwrap();
        assert_eq!(exact_cellset_volume(&all, &bbox, 2).unwrap(), bbox.volume());
        assert_eq!(exact_cellset_volume(&[], &unit, 3).unwrap(), 0.0);
        assert!(exact_cellset_volume(&[vec![2, 0]], &unit, 1).is_err());
    }
}
