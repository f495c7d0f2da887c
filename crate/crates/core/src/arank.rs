//! Adaptive piecewise-constant estimation of `MV*` on a dyadic tree over the
//! mass axis, and the A-Rank scoring function stacked from the resulting
//! nested minimum-volume sets.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::StepCurve;
use crate::data::{bounding_box, BoundingBox, CellIndex, Dataset};
use crate::error::{Error, Result};
use crate::minvol::{build_histogram, phi_penalty, q_star_estimate, CellSet, DyadicHistogram, GreedyOrder};
use crate::mvcurve::exact_mv_for_partition;

/// `⌊log₂ n⌋ + 1`.
pub fn j_max(n: u64) -> u32 {
    n.max(1).ilog2() + 1
}

/// `Ê(I) = λ(Ω̂_{α₂}) - λ(Ω̂_{α₁})`.
pub fn local_error_hat(vol_hi: f64, vol_lo: f64) -> Result<f64> {
    let e = vol_hi - vol_lo;
    if e < 0.0 {
        return Err(Error::Invariant(format!(
            "minimum-volume sets not nested: {vol_hi} < {vol_lo}"
        )));
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub depth: u32,
    pub k: u64,
    pub lo: f64,
    pub hi: f64,
    /// `None` for nodes at the depth cap, which are never evaluated.
    pub error: Option<f64>,
    pub children: Option<(usize, usize)>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Tree over `[0, 1-ε]`; node `(j, k)` covers `[k(1-ε)/2^j, (k+1)(1-ε)/2^j)`.
#[derive(Debug, Clone)]
pub struct MVTree {
    pub epsilon: f64,
    pub j_max: u32,
    pub nodes: Vec<TreeNode>,
}

impl MVTree {
    /// Leaves ordered along the mass axis.
    pub fn leaves(&self) -> Vec<&TreeNode> {
        let mut leaves: Vec<&TreeNode> = self.nodes.iter().filter(|n| n.is_leaf()).collect();
        leaves.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        leaves
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }
}

/// Minimum-volume prefixes at dyadic levels, keyed by the level's numerator
/// over `2^{j_max}`.
struct LevelCache<'a> {
    order: &'a GreedyOrder,
    phi: f64,
    top: f64,
    j_max: u32,
    lens: HashMap<u64, usize>,
}

impl<'a> LevelCache<'a> {
    fn alpha(&self, depth: u32, k: u64) -> f64 {
        k as f64 * self.top / (1u64 << depth) as f64
    }

    fn prefix_len(&mut self, depth: u32, k: u64) -> usize {
        let key = k << (self.j_max - depth);
        let alpha = self.alpha(depth, k);
        let (order, phi) = (self.order, self.phi);
        *self.lens.entry(key).or_insert_with(|| order.prefix_len(alpha, phi))
    }

    fn volume(&mut self, depth: u32, k: u64) -> f64 {
        self.prefix_len(depth, k) as f64 * self.order.cell_volume()
    }
}

struct Grown {
    tree: MVTree,
    curve: StepCurve,
    /// `(α_k, prefix length)` at every leaf endpoint, `α_0 = 0` first.
    levels: Vec<(f64, usize)>,
}

fn grow(order: &GreedyOrder, n: u64, phi: f64, tau: f64, epsilon: f64) -> Result<Grown> {
    if !(tau > 0.0) {
        return Err(Error::param(format!("tolerance tau = {tau} must be positive")));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::param(format!("epsilon = {epsilon} outside [0, 1)")));
    }
    if !(phi >= 0.0 && phi.is_finite()) {
        return Err(Error::param("penalty must be finite and >= 0"));
    }
    let jm = j_max(n);
    let mut cache = LevelCache {
        order,
        phi,
        top: 1.0 - epsilon,
        j_max: jm,
        lens: HashMap::new(),
    };
    let mut nodes = vec![TreeNode {
        depth: 0,
        k: 0,
        lo: 0.0,
        hi: cache.top,
        error: None,
        children: None,
    }];
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let (j, k) = (nodes[i].depth, nodes[i].k);
        if j >= jm {
            continue;
        }
        let e = local_error_hat(cache.volume(j, k + 1), cache.volume(j, k))?;
        nodes[i].error = Some(e);
        if e > tau {
            let first = nodes.len();
            for c in [2 * k, 2 * k + 1] {
                nodes.push(TreeNode {
                    depth: j + 1,
                    k: c,
                    lo: cache.alpha(j + 1, c),
                    hi: cache.alpha(j + 1, c + 1),
                    error: None,
                    children: None,
                });
                queue.push_back(nodes.len() - 1);
            }
            nodes[i].children = Some((first, first + 1));
        }
    }
    let tree = MVTree {
        epsilon,
        j_max: jm,
        nodes,
    };
    let leaves: Vec<(u32, u64)> = tree.leaves().iter().map(|l| (l.depth, l.k)).collect();
    let mut breakpoints = vec![0.0];
    let mut values = Vec::with_capacity(leaves.len());
    let mut levels = vec![(0.0, cache.prefix_len(0, 0))];
    for &(j, k) in &leaves {
        breakpoints.push(cache.alpha(j, k + 1));
        values.push(cache.volume(j, k + 1));
        levels.push((cache.alpha(j, k + 1), cache.prefix_len(j, k + 1)));
    }
    let curve = StepCurve::new(breakpoints, values)?;
    Ok(Grown { tree, curve, levels })
}

/// Grows the tree breadth-first, splitting any node above the depth cap
/// whose estimated local error exceeds `τ`, and returns the leaf-wise
/// step estimate of `MV*` on `[0, 1-ε)`.
pub fn adaptive_estimate(hist: &DyadicHistogram, phi: f64, tau: f64, epsilon: f64) -> Result<(MVTree, StepCurve)> {
    let g = grow(&hist.greedy_order(), hist.n(), phi, tau, epsilon)?;
    Ok((g.tree, g.curve))
}

/// Cumulative unions `Ω̃_k = Ω̂_k ∪ Ω̃_{k-1}`, each returned sorted.
pub fn monotonize(sets: &[CellSet]) -> Result<Vec<Vec<CellIndex>>> {
    let Some(first) = sets.first() else {
        return Ok(Vec::new());
    };
    if sets.iter().any(|s| s.depth != first.depth || s.bbox != first.bbox) {
        return Err(Error::param("sets must share depth and box"));
    }
    let mut out: Vec<Vec<CellIndex>> = Vec::with_capacity(sets.len());
    for s in sets {
        let mut union = s.cells.clone();
        if let Some(prev) = out.last() {
            union.extend(prev.iter().cloned());
        }
        union.sort();
        union.dedup();
        out.push(union);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ARankConfig {
    pub depth: u32,
    pub epsilon: f64,
    /// Explicit penalty; otherwise `phi_penalty(n, delta, rademacher_c)`.
    pub phi: Option<f64>,
    pub delta: f64,
    pub rademacher_c: f64,
    /// Explicit tolerance; otherwise `5φ / q̂*(1-ε)`.
    pub tau: Option<f64>,
    /// Box for the histogram; otherwise the padded bounding box of the data.
    pub bbox: Option<BoundingBox>,
    pub padding: f64,
    pub strict: bool,
}

impl Default for ARankConfig {
    fn default() -> Self {
        Self {
            depth: 5,
            epsilon: 0.05,
            phi: None,
            delta: 0.05,
            rademacher_c: 0.0,
            tau: None,
            bbox: None,
            padding: 0.05,
            strict: false,
        }
    }
}

/// Nested cell sets `Ω̃_0 ⊆ ... ⊆ Ω̃_K` with their mass breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct ARankModel {
    pub epsilon: f64,
    pub depth: u32,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub phi: f64,
    pub tau: f64,
    pub breakpoints: Vec<f64>,
    pub layers: Vec<Vec<CellIndex>>,
    /// Innermost layer index containing each cell.
    #[serde(skip)]
    first_layer: HashMap<CellIndex, usize>,
}

#[derive(Deserialize)]
struct RawModel {
    epsilon: f64,
    depth: u32,
    #[serde(rename = "box")]
    bbox: BoundingBox,
    phi: f64,
    tau: f64,
    breakpoints: Vec<f64>,
    layers: Vec<Vec<CellIndex>>,
}

impl TryFrom<RawModel> for ARankModel {
    type Error = Error;

    fn try_from(r: RawModel) -> Result<Self> {
        ARankModel::new(r.epsilon, r.depth, r.bbox, r.phi, r.tau, r.breakpoints, r.layers)
    }
}

impl ARankModel {
    pub fn new(
        epsilon: f64,
        depth: u32,
        bbox: BoundingBox,
        phi: f64,
        tau: f64,
        breakpoints: Vec<f64>,
        layers: Vec<Vec<CellIndex>>,
    ) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints[0] != 0.0 || breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("model breakpoints must start at 0 and increase strictly"));
        }
        if layers.len() != breakpoints.len() {
            return Err(Error::param("model needs one layer per breakpoint"));
        }
        if depth > 30 {
            return Err(Error::param("depth must be at most 30"));
        }
        let side = 1u64 << depth;
        let mut first_layer = HashMap::new();
        for (k, layer) in layers.iter().enumerate() {
            for c in layer {
                if c.len() != bbox.dim() || c.iter().any(|&i| i as u64 >= side) {
                    return Err(Error::param(format!("cell {c:?} invalid at depth {depth}")));
                }
                first_layer.entry(c.clone()).or_insert(k);
            }
            if k > 0 && layers[k - 1].iter().any(|c| layer.binary_search(c).is_err()) {
                return Err(Error::param("model layers must be sorted and nested"));
            }
        }
        Ok(Self {
            epsilon,
            depth,
            bbox,
            phi,
            tau,
            breakpoints,
            layers,
            first_layer,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// `K̂`, the number of leaf intervals.
    pub fn k_hat(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    pub fn layer_volume(&self, k: usize) -> f64 {
        self.layers[k].len() as f64 * self.bbox.cell_volume(self.depth)
    }

    fn first_layer_of(&self, x: &[f64]) -> Result<Option<usize>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(self
            .bbox
            .cell_of(self.depth, x)
            .and_then(|c| self.first_layer.get(&c).copied()))
    }
}

pub fn fit_arank(data: &Dataset, config: &ARankConfig) -> Result<ARankModel> {
    let bbox = match &config.bbox {
        Some(b) => b.clone(),
        None => bounding_box(data, config.padding)?,
    };
    let hist = build_histogram(data, &bbox, config.depth, config.strict)?;
    let phi = match config.phi {
        Some(p) => p,
        None => phi_penalty(data.len(), config.delta, config.rademacher_c)?,
    };
    let tau = match config.tau {
        Some(t) => t,
        None => {
            if config.epsilon <= 0.0 {
                return Err(Error::param("tau must be given when epsilon = 0"));
            }
            let q = q_star_estimate(&hist, 1.0 - config.epsilon)?;
            if !(q > 0.0) {
                return Err(Error::Numerical("density estimate at 1 - epsilon is zero".into()));
            }
            5.0 * phi / q
        }
    };
    let order = hist.greedy_order();
    let grown = grow(&order, hist.n(), phi, tau, config.epsilon)?;
    let sets: Vec<CellSet> = grown
        .levels
        .iter()
        .map(|&(_, len)| order.prefix(len, &bbox, config.depth))
        .collect();
    let layers = monotonize(&sets)?;
    let breakpoints = grown.levels.iter().map(|&(a, _)| a).collect();
    ARankModel::new(config.epsilon, config.depth, bbox, phi, tau, breakpoints, layers)
}

/// `K̂ - k* + 1` for the innermost layer `k*` containing `x`; 0 outside every layer.
pub fn score_arank(model: &ARankModel, x: &[f64]) -> Result<u64> {
    Ok(match model.first_layer_of(x)? {
        Some(k) => (model.k_hat() - k + 1) as u64,
        None => 0,
    })
}

/// `Σ_{k>=1} (α_k - α_{k-1})·1{x ∈ Ω̃_k}`, which telescopes on nested layers.
pub fn density_cdf_approx(model: &ARankModel, x: &[f64]) -> Result<f64> {
    Ok(match model.first_layer_of(x)? {
        Some(k) => model.breakpoints[model.k_hat()] - model.breakpoints[k.max(1) - 1],
        None => 0.0,
    })
}

/// `(score, density_cdf)` per point.
pub fn score_batch(model: &ARankModel, data: &Dataset) -> Result<Vec<(u64, f64)>> {
    data.as_flat()
        .par_chunks_exact(data.dim())
        .map(|x| Ok((score_arank(model, x)?, density_cdf_approx(model, x)?)))
        .collect()
}

pub enum LayerMasses<'a> {
    /// Fraction of the dataset's points inside each layer.
    Empirical(&'a Dataset),
    /// One probability per layer.
    Given(Vec<f64>),
}

/// MV curve of `ŝ` from `(mass, volume)` of each layer; layers that add no
/// mass are dropped. The curve ends at the mass of the outermost layer,
/// beyond which the level set `{ŝ >= 0}` is the whole space.
pub fn mv_curve_of_model(model: &ARankModel, masses: LayerMasses) -> Result<StepCurve> {
    let masses = match masses {
        LayerMasses::Given(m) => {
            if m.len() != model.layers.len() {
                return Err(Error::param("need one mass per layer"));
            }
            m
        }
        LayerMasses::Empirical(data) => {
            if data.dim() != model.dim() {
                return Err(Error::DimensionMismatch {
                    expected: model.dim(),
                    actual: data.dim(),
                });
            }
            let mut counts = vec![0u64; model.layers.len()];
            for x in data.rows() {
                if let Some(k) = model.first_layer_of(x)? {
                    counts[k] += 1;
                }
            }
            let mut acc = 0u64;
            counts
                .iter()
                .map(|c| {
                    acc += c;
                    acc as f64 / data.len() as f64
                })
                .collect()
        }
    };
    let mut ms = Vec::new();
    let mut vs = Vec::new();
    for (k, &m) in masses.iter().enumerate() {
        if m > ms.last().copied().unwrap_or(0.0) {
            ms.push(m.min(1.0));
            vs.push(model.layer_volume(k));
        }
    }
    if ms.is_empty() {
        return Err(Error::Numerical("no layer of the model carries positive mass".into()));
    }
    exact_mv_for_partition(&ms, &vs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    use crate::minvol::min_volume_set;
    use crate::rng::RandomSource;
    use crate::scoring::{simulate_mixture, MixtureParams};
    use proptest::prelude::*;

    fn unit(d: usize) -> BoundingBox {
        BoundingBox::cube(d, 0.0, 1.0).unwrap()
    }

    fn abc() -> DyadicHistogram {
        let counts = BTreeMap::from([(vec![0, 0], 5), (vec![0, 1], 3), (vec![1, 0], 2)]);
        DyadicHistogram::from_counts(unit(2), 1, counts).unwrap()
    }

    fn cellset(cells: Vec<CellIndex>) -> CellSet {
        CellSet {
            depth: 1,
            bbox: unit(2),
            cells,
            mass: 0.0,
            volume: 0.0,
        }
    }

    #[test]
    fn j_max_values() {
        assert_eq!(j_max(1), 1);
        assert_eq!(j_max(2), 2);
        assert_eq!(j_max(500), 9);
        assert_eq!(j_max(512), 10);
        assert_eq!(j_max(2000), 11);
    }

    #[test]
    fn local_error_examples() {
        assert_eq!(local_error_hat(0.5, 0.5).unwrap(), 0.0);
        let h = abc();
        let hi = min_volume_set(&h, 0.7, 0.0).unwrap().volume;
        let lo = min_volume_set(&h, 0.2, 0.0).unwrap().volume;
        assert_eq!(local_error_hat(hi, lo).unwrap(), 0.25);
        assert!(matches!(local_error_hat(0.1, 0.2), Err(Error::Invariant(_))));
    }

    #[test]
    fn huge_tau_gives_single_leaf() {
        let h = abc();
        let (tree, curve) = adaptive_estimate(&h, 0.0, 1.0, 0.05).unwrap();
        assert_eq!(tree.leaf_count(), 1);
        assert_eq!(curve.breakpoints(), &[0.0, 0.95]);
        assert_eq!(curve.values(), &[min_volume_set(&h, 0.95, 0.0).unwrap().volume]);
    }

    #[test]
    fn tiny_tau_fills_tree() {
        // one point per cell: every interval at least 1/n wide has a jump
        for n in [5usize, 8, 13] {
            let pts: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / 16.0).collect();
            let h = build_histogram(&Dataset::new(pts, 1).unwrap(), &unit(1), 4, true).unwrap();
            let (tree, curve) = adaptive_estimate(&h, 0.0, 1e-12, 0.0).unwrap();
            assert_eq!(tree.leaf_count(), 1 << j_max(n as u64));
            assert!(tree.nodes.iter().all(|nd| nd.depth <= tree.j_max));
            assert!(curve.is_nondecreasing());
        }
    }

    #[test]
    fn uniform_data_tracks_identity() {
        let mut rng = RandomSource::new(3);
        let pts: Vec<f64> = (0..2 * 4096).map(|_| rng.uniform()).collect();
        let h = build_histogram(&Dataset::new(pts, 2).unwrap(), &unit(2), 3, true).unwrap();
        let (tree, curve) = adaptive_estimate(&h, 0.0, 0.3, 0.0).unwrap();
        // a cell holds about 1/64 of the mass; allow a few cells of sampling slack
        for leaf in tree.leaves() {
            let v = curve.eval(leaf.lo).unwrap();
            assert!((v - leaf.hi).abs() <= 4.0 / 64.0, "{} -> {v}", leaf.hi);
        }
    }

    #[test]
    fn monotonize_examples() {
        let a = vec![0u32, 0];
        let b = vec![0u32, 1];
        let c = vec![1u32, 0];
        let out = monotonize(&[cellset(vec![a.clone()]), cellset(vec![b.clone()]), cellset(vec![a.clone(), c.clone()])]).unwrap();
        assert_eq!(out, vec![vec![a.clone()], vec![a.clone(), b.clone()], vec![a.clone(), b.clone(), c.clone()]]);
        let nested = vec![vec![], vec![a.clone()], vec![a.clone(), b.clone()]];
        let sets: Vec<CellSet> = nested.iter().cloned().map(cellset).collect();
        assert_eq!(monotonize(&sets).unwrap(), nested);
        let mut other = cellset(vec![a]);
        other.depth = 2;
        assert!(monotonize(&[cellset(vec![]), other]).is_err());
    }

    fn two_layer_model() -> ARankModel {
        // 1-d unit box at depth 2; Ω̃_0 = ∅, Ω̃_1 = {1}, Ω̃_2 = {1, 2}
        ARankModel::new(0.0, 2, unit(1), 0.0, 0.1, vec![0.0, 0.4, 1.0], vec![vec![], vec![vec![1]], vec![vec![1], vec![2]]])
            .unwrap()
    }

    #[test]
    fn scoring_formula() {
        let m = two_layer_model();
        assert_eq!(m.k_hat(), 2);
        assert_eq!(score_arank(&m, &[0.3]).unwrap(), 2);
        assert_eq!(score_arank(&m, &[0.6]).unwrap(), 1);
        assert_eq!(score_arank(&m, &[0.1]).unwrap(), 0);
        assert_eq!(score_arank(&m, &[7.0]).unwrap(), 0);
        assert!(score_arank(&m, &[0.3, 0.3]).is_err());
    }

    #[test]
    fn density_cdf_examples() {
        let m = two_layer_model();
        assert_eq!(density_cdf_approx(&m, &[0.1]).unwrap(), 0.0);
        assert_eq!(density_cdf_approx(&m, &[0.3]).unwrap(), 1.0);
        assert!((density_cdf_approx(&m, &[0.6]).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn model_mv_curve_examples() {
        let single = ARankModel::new(0.0, 1, unit(1), 0.0, 1.0, vec![0.0, 1.0], vec![vec![], vec![vec![0], vec![1]]]).unwrap();
        let c = mv_curve_of_model(&single, LayerMasses::Given(vec![0.0, 1.0])).unwrap();
        assert_eq!(c, StepCurve::constant(1.0, 1.0).unwrap());

        let m = ARankModel::new(0.0, 1, BoundingBox::cube(1, 0.0, 0.6).unwrap(), 0.0, 1.0, vec![0.0, 0.5, 1.0], vec![vec![], vec![vec![0]], vec![vec![0], vec![1]]]).unwrap();
        let c = mv_curve_of_model(&m, LayerMasses::Given(vec![0.0, 0.5, 1.0])).unwrap();
        assert_eq!(c.breakpoints(), &[0.0, 0.5, 1.0]);
        assert!((c.values()[0] - 0.3).abs() < 1e-15 && (c.values()[1] - 0.6).abs() < 1e-15);

        let c = mv_curve_of_model(&m, LayerMasses::Given(vec![0.0, 0.5, 0.5])).unwrap();
        assert_eq!(c.domain_end(), 0.5);
        assert!(c.eval(0.7).is_err());
        assert!(mv_curve_of_model(&m, LayerMasses::Given(vec![0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = two_layer_model();
        let back = ARankModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        for x in [0.05, 0.3, 0.55, 0.8, 1.0] {
            assert_eq!(score_arank(&back, &[x]).unwrap(), score_arank(&m, &[x]).unwrap());
        }
        let broken = ARankModel::new(0.0, 2, unit(1), 0.0, 0.1, vec![0.0, 0.4, 1.0], vec![vec![], vec![vec![1]], vec![vec![2]]]);
        assert!(broken.is_err());
    }

    #[test]
    fn fit_on_mixture() {
        let data = simulate_mixture(&MixtureParams::benchmark_2d(), 500, &mut RandomSource::new(8)).unwrap();
        let model = fit_arank(&data, &ARankConfig::default()).unwrap();
        assert!((model.breakpoints[model.k_hat()] - 0.95).abs() < 1e-15);
        for w in model.layers.windows(2) {
            assert!(w[0].iter().all(|c| w[1].binary_search(c).is_ok()));
        }
        let curve = mv_curve_of_model(&model, LayerMasses::Empirical(&data)).unwrap();
        assert!(curve.is_nondecreasing());
        for (s, _) in score_batch(&model, &data).unwrap() {
            assert!(s <= model.k_hat() as u64);
        }

        // greedy sets are already nested, so the union step changes nothing
        let bbox = bounding_box(&data, 0.05).unwrap();
        let hist = build_histogram(&data, &bbox, 5, false).unwrap();
        let (tree, _) = adaptive_estimate(&hist, model.phi, model.tau, 0.05).unwrap();
        assert_eq!(tree.leaf_count(), model.k_hat());
        for (k, &a) in model.breakpoints.iter().enumerate() {
            assert_eq!(model.layers[k], min_volume_set(&hist, a, model.phi).unwrap().cells);
        }
    }

    #[test]
    fn training_points_covered_by_outer_layer() {
        let data = simulate_mixture(&MixtureParams::benchmark_2d(), 400, &mut RandomSource::new(2)).unwrap();
        let cfg = ARankConfig {
            epsilon: 0.0,
            phi: Some(0.0),
            tau: Some(1.0),
            ..ARankConfig::default()
        };
        let model = fit_arank(&data, &cfg).unwrap();
        for (s, f) in score_batch(&model, &data).unwrap() {
            assert!(s >= 1);
            assert!(f > 0.0);
        }
    }

    fn random_histogram() -> impl Strategy<Value = DyadicHistogram> {
        prop::collection::btree_map(prop::collection::vec(0u32..8, 2), 1u64..30, 1..40)
            .prop_map(|c| DyadicHistogram::from_counts(unit(2), 3, c).unwrap())
    }

    proptest! {
        #[test]
        fn local_error_is_additive(h in random_histogram(), j in 0u32..6, k_seed in any::<u64>(), phi in 0.0f64..0.1, eps in 0.0f64..0.2) {
            let order = h.greedy_order();
            let top = 1.0 - eps;
            let k = k_seed % (1u64 << j);
            let alpha = |j: u32, k: u64| k as f64 * top / (1u64 << j) as f64;
            let vol = |a: f64| order.prefix_len(a, phi) as f64 * order.cell_volume();
            let whole = local_error_hat(vol(alpha(j, k + 1)), vol(alpha(j, k))).unwrap();
            let left = local_error_hat(vol(alpha(j + 1, 2 * k + 1)), vol(alpha(j + 1, 2 * k))).unwrap();
            let right = local_error_hat(vol(alpha(j + 1, 2 * k + 2)), vol(alpha(j + 1, 2 * k + 1))).unwrap();
            prop_assert_eq!(whole, left + right);
        }

        #[test]
        fn tree_shape_invariants(h in random_histogram(), tau in 0.001f64..1.5, eps in 0.0f64..0.2) {
            let (tree, curve) = adaptive_estimate(&h, 0.0, tau, eps).unwrap();
            prop_assert!(curve.is_nondecreasing());
            let mut total = 0.0;
            for leaf in tree.leaves() {
                prop_assert!(leaf.depth <= tree.j_max);
                total += leaf.hi - leaf.lo;
                if leaf.depth < tree.j_max {
                    prop_assert!(leaf.error.unwrap() <= tau);
                }
            }
            prop_assert!((total - (1.0 - eps)).abs() < 1e-12);
            let visits: usize = (0..=tree.j_max).map(|j| 1usize << j).sum();
            prop_assert!(tree.nodes.len() <= visits);
        }
    }
}
