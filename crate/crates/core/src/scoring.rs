//! Scoring functions `s : R^d -> R_+` and the Gaussian-mixture simulator.
//!
//! Scorers come from a fixed catalogue and serialize to `{kind, params}`
//! JSON, e.g.
//!
//! ```json
//! {"kind": "gaussian_density", "params": {"mean": [0.0], "diag_cov": [1.0]}}
//! ```

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BoundingBox, CellIndex, Dataset};
use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// Gaussian with a diagonal covariance, optionally carrying a full lower
/// Cholesky factor `L` (covariance `L Lᵀ`) for correlated components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub diag_cov: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cholesky: Option<Vec<Vec<f64>>>,
}

impl GaussianParams {
    pub fn diagonal(mean: Vec<f64>, diag_cov: Vec<f64>) -> Result<Self> {
        let p = Self {
            mean,
            diag_cov,
            cholesky: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Gaussian with the given lower Cholesky factor; `diag_cov` is derived.
    pub fn with_cholesky(mean: Vec<f64>, cholesky: Vec<Vec<f64>>) -> Result<Self> {
        let diag_cov = cholesky
            .iter()
            .map(|row| row.iter().map(|v| v * v).sum())
            .collect();
        let p = Self {
            mean,
            diag_cov,
            cholesky: Some(cholesky),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.mean.len();
        if d == 0 || self.diag_cov.len() != d {
            return Err(Error::param("gaussian mean and diag_cov must be nonempty and of equal length"));
        }
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::param("gaussian mean must be finite"));
        }
        if self.diag_cov.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::param("gaussian diag_cov entries must be positive"));
        }
        if let Some(l) = &self.cholesky {
            if l.len() != d || l.iter().any(|row| row.len() != d) {
                return Err(Error::param("cholesky factor must be d x d"));
            }
            for i in 0..d {
                if !(l[i][i] > 0.0) {
                    return Err(Error::param("cholesky diagonal must be positive"));
                }
                if l[i][i + 1..].iter().any(|v| *v != 0.0) {
                    return Err(Error::param("cholesky factor must be lower triangular"));
                }
                let row_var: f64 = l[i].iter().map(|v| v * v).sum();
                if (row_var - self.diag_cov[i]).abs() > 1e-9 * self.diag_cov[i].max(1.0) {
                    return Err(Error::param("diag_cov disagrees with the cholesky factor"));
                }
            }
        }
        Ok(())
    }

    /// True when the covariance is diagonal.
    pub fn is_diagonal(&self) -> bool {
        match &self.cholesky {
            None => true,
            Some(l) => l.iter().enumerate().all(|(i, row)| row[..i].iter().all(|v| *v == 0.0)),
        }
    }

    /// Per-axis standard deviations `a_i = √diag_cov[i]`.
    pub fn axes(&self) -> Vec<f64> {
        self.diag_cov.iter().map(|v| v.sqrt()).collect()
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut sq = 0.0;
        let mut log_det_half = 0.0;
        match &self.cholesky {
            None => {
                for i in 0..d {
                    let z = (x[i] - self.mean[i]) / self.diag_cov[i].sqrt();
                    sq += z * z;
                    log_det_half += 0.5 * self.diag_cov[i].ln();
                }
            }
            Some(l) => {
                // forward substitution for z = L⁻¹ (x - μ)
                let mut z = vec![0.0; d];
                for i in 0..d {
                    let mut r = x[i] - self.mean[i];
                    for j in 0..i {
                        r -= l[i][j] * z[j];
                    }
                    z[i] = r / l[i][i];
                    sq += z[i] * z[i];
                    log_det_half += l[i][i].ln();
                }
            }
        }
        (-0.5 * sq - 0.5 * d as f64 * (2.0 * PI).ln() - log_det_half).exp()
    }

    fn sample_into(&self, rng: &mut RandomSource, out: &mut Vec<f64>) {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        match &self.cholesky {
            None => out.extend((0..d).map(|i| self.mean[i] + self.diag_cov[i].sqrt() * z[i])),
            Some(l) => out.extend((0..d).map(|i| {
                self.mean[i] + (0..=i).map(|j| l[i][j] * z[j]).sum::<f64>()
            })),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    pub components: Vec<GaussianParams>,
}

impl MixtureParams {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianParams>) -> Result<Self> {
        let p = Self {
            weights,
            components,
        };
        p.validate()?;
        Ok(p)
    }

    /// The two-component planar mixture used throughout the experiments:
    /// `0.5·N((0,0), [[2,2],[2,4]]) + 0.5·N((-1,-1), 2·I)`.
    pub fn benchmark_2d() -> Self {
        let s2 = 2f64.sqrt();
        let c1 = GaussianParams::with_cholesky(vec![0.0, 0.0], vec![vec![s2, 0.0], vec![s2, s2]])
            .expect("valid factor");
        let c2 = GaussianParams::diagonal(vec![-1.0, -1.0], vec![2.0, 2.0]).expect("valid params");
        Self {
            weights: vec![0.5, 0.5],
            components: vec![c1, c2],
        }
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() || self.weights.len() != self.components.len() {
            return Err(Error::param("mixture needs one weight per component and >= 1 component"));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::param("mixture weights must be nonnegative"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param(format!("mixture weights sum to {total}, not 1")));
        }
        let d = self.components[0].dim();
        for c in &self.components {
            c.validate()?;
            if c.dim() != d {
                return Err(Error::param("mixture components have differing dimensions"));
            }
        }
        Ok(())
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| if *w > 0.0 { w * c.pdf(x) } else { 0.0 })
            .sum()
    }

    fn pick_component(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        // u landed in the rounding slack above the last cumulative weight
        self.weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }
}

/// `n` i.i.d. draws: a component chosen by weight, then Gaussian noise.
pub fn simulate_mixture(params: &MixtureParams, n: usize, rng: &mut RandomSource) -> Result<Dataset> {
    params.validate()?;
    if n == 0 {
        return Err(Error::param("sample size must be at least 1"));
    }
    let mut points = Vec::with_capacity(n * params.dim());
    for _ in 0..n {
        let k = params.pick_component(rng.uniform());
        params.components[k].sample_into(rng, &mut points);
    }
    Dataset::new(points, params.dim())
}

/// Strictly increasing maps of `[0, ∞)` into itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MonotoneTransform {
    /// `x ↦ (2/π)·atan(x)`
    Arctan,
    /// `x ↦ x/(1+x)`
    Rational,
    /// `x ↦ a·x + b`, `a > 0`, `b >= 0`
    Affine { a: f64, b: f64 },
    /// `x ↦ x^p`, `p > 0`
    Power { p: f64 },
}

impl MonotoneTransform {
    pub fn catalogue() -> Vec<MonotoneTransform> {
        vec![
            MonotoneTransform::Arctan,
            MonotoneTransform::Rational,
            MonotoneTransform::Affine { a: 2.5, b: 1.0 },
            MonotoneTransform::Power { p: 2.0 },
            MonotoneTransform::Power { p: 0.5 },
        ]
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MonotoneTransform::Affine { a, b } if !(a > 0.0 && a.is_finite() && b >= 0.0 && b.is_finite()) => {
                Err(Error::param("affine transform needs a > 0 and b >= 0"))
            }
            MonotoneTransform::Power { p } if !(p > 0.0 && p.is_finite()) => {
                Err(Error::param("power transform needs p > 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            MonotoneTransform::Arctan => 2.0 / PI * x.atan(),
            MonotoneTransform::Rational => x / (1.0 + x),
            MonotoneTransform::Affine { a, b } => a * x + b,
            MonotoneTransform::Power { p } => x.powf(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellLevel {
    pub index: CellIndex,
    pub level: f64,
}

/// Piecewise-constant scorer on the depth-`depth` dyadic grid of a box.
/// Listed cells take their level, other cells of the box `default_level`,
/// and points outside the box score 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPiecewise")]
pub struct PiecewiseParams {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub depth: u32,
    pub cells: Vec<CellLevel>,
    #[serde(default)]
    pub default_level: f64,
    #[serde(skip)]
    lookup: std::collections::HashMap<CellIndex, f64>,
}

#[derive(Deserialize)]
struct RawPiecewise {
    #[serde(rename = "box")]
    bbox: BoundingBox,
    depth: u32,
    cells: Vec<CellLevel>,
    #[serde(default)]
    default_level: f64,
}

impl TryFrom<RawPiecewise> for PiecewiseParams {
    type Error = Error;

    fn try_from(raw: RawPiecewise) -> Result<Self> {
        PiecewiseParams::new(raw.bbox, raw.depth, raw.cells, raw.default_level)
    }
}

impl PiecewiseParams {
    pub fn new(bbox: BoundingBox, depth: u32, cells: Vec<CellLevel>, default_level: f64) -> Result<Self> {
        let mut p = Self {
            bbox,
            depth,
            cells,
            default_level,
            lookup: Default::default(),
        };
        p.validate()?;
        p.build_lookup();
        Ok(p)
    }

    /// A single level everywhere in the box.
    pub fn constant(bbox: BoundingBox, level: f64) -> Result<Self> {
        Self::new(bbox, 0, Vec::new(), level)
    }

    fn build_lookup(&mut self) {
        self.lookup = self.cells.iter().map(|c| (c.index.clone(), c.level)).collect();
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth > 30 {
            return Err(Error::param("piecewise depth must be at most 30"));
        }
        let side = 1u64 << self.depth;
        let d = self.bbox.dim();
        if !(self.default_level.is_finite() && self.default_level >= 0.0) {
            return Err(Error::param("levels must be finite and nonnegative"));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.cells {
            if c.index.len() != d || c.index.iter().any(|&i| i as u64 >= side) {
                return Err(Error::param(format!("cell index {:?} invalid at depth {}", c.index, self.depth)));
            }
            if !(c.level.is_finite() && c.level >= 0.0) {
                return Err(Error::param("levels must be finite and nonnegative"));
            }
            if !seen.insert(&c.index) {
                return Err(Error::param(format!("cell {:?} listed twice", c.index)));
            }
        }
        Ok(())
    }

    pub fn level_of(&self, x: &[f64]) -> f64 {
        match self.bbox.cell_of(self.depth, x) {
            None => 0.0,
            Some(cell) => self.lookup.get(&cell).copied().unwrap_or(self.default_level),
        }
    }

    /// Level of every cell of the box grid as `(level, count)` groups: listed
    /// cells individually plus one group for all unlisted cells.
    pub fn level_groups(&self) -> Vec<(f64, u64)> {
        let total: u64 = 1u64 << (self.depth as u64 * self.bbox.dim() as u64);
        let mut groups: Vec<(f64, u64)> = self.cells.iter().map(|c| (c.level, 1)).collect();
        let unlisted = total - self.cells.len() as u64;
        if unlisted > 0 {
            groups.push((self.default_level, unlisted));
        }
        groups
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Scorer {
    GaussianDensity(GaussianParams),
    GaussianMixtureDensity(MixtureParams),
    DyadicPiecewise(PiecewiseParams),
    /// `ψ ∘ base`
    MonotoneTransformed {
        base: Box<Scorer>,
        transform: MonotoneTransform,
    },
    /// `base(x)·1{x ∈ support}` (unnormalized restriction).
    Restricted {
        base: Box<Scorer>,
        support: BoundingBox,
    },
}

impl Scorer {
    pub fn gaussian(params: GaussianParams) -> Self {
        Scorer::GaussianDensity(params)
    }

    pub fn transformed(base: Scorer, transform: MonotoneTransform) -> Self {
        Scorer::MonotoneTransformed {
            base: Box::new(base),
            transform,
        }
    }

    pub fn restricted(base: Scorer, support: BoundingBox) -> Self {
        Scorer::Restricted {
            base: Box::new(base),
            support,
        }
    }

    /// Parses and validates a `{kind, params}` JSON object.
    pub fn from_json(text: &str) -> Result<Self> {
        let scorer: Scorer = serde_json::from_str(text)?;
        scorer.validate()?;
        Ok(scorer)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scorer serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Scorer::GaussianDensity(p) => p.validate(),
            Scorer::GaussianMixtureDensity(p) => p.validate(),
            Scorer::DyadicPiecewise(p) => p.validate(),
            Scorer::MonotoneTransformed { base, transform } => {
                transform.validate()?;
                base.validate()
            }
            Scorer::Restricted { base, support } => {
                base.validate()?;
                if support.dim() != base.dim() {
                    return Err(Error::param("restriction support has the wrong dimension"));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Scorer::GaussianDensity(p) => p.dim(),
            Scorer::GaussianMixtureDensity(p) => p.dim(),
            Scorer::DyadicPiecewise(p) => p.bbox.dim(),
            Scorer::MonotoneTransformed { base, .. } | Scorer::Restricted { base, .. } => base.dim(),
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: d,
            });
        }
        Ok(())
    }

    /// Score of a point whose dimension is already known to match.
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Scorer::GaussianDensity(p) => p.pdf(x),
            Scorer::GaussianMixtureDensity(p) => p.pdf(x),
            Scorer::DyadicPiecewise(p) => p.level_of(x),
            Scorer::MonotoneTransformed { base, transform } => transform.apply(base.eval(x)),
            Scorer::Restricted { base, support } => {
                if support.contains(x) {
                    base.eval(x)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn score_point(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.eval(x))
    }

    /// Scores of every point, in dataset order.
    pub fn score_batch(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.score_flat(data.as_flat(), data.dim())
    }

    /// Scores of row-major points of dimension `d`.
    pub fn score_flat(&self, points: &[f64], d: usize) -> Result<Vec<f64>> {
        self.check_dim(d)?;
        Ok(points.par_chunks_exact(d).map(|x| self.eval(x)).collect())
    }
}
