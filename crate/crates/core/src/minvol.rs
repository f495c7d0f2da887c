//! Empirical minimum-volume sets over unions of dyadic cells.
//!
//! All cells of one grid have the same volume, so the smallest union
//! carrying empirical mass `α - φ` is a prefix of the cells sorted by count.
//! Ties are broken by ascending cell index, which makes the solutions nested
//! in `α`.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BoundingBox, CellIndex, Dataset};
use crate::error::{Error, Result};

/// Slack on mass comparisons so that `α = k/n` selects exactly `k` points' worth.
const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DyadicHistogram {
    bbox: BoundingBox,
    depth: u32,
    counts: BTreeMap<CellIndex, u64>,
    n: u64,
}

impl DyadicHistogram {
    /// Histogram from explicit counts; zero counts are dropped.
    pub fn from_counts(bbox: BoundingBox, depth: u32, counts: BTreeMap<CellIndex, u64>) -> Result<Self> {
        if depth > 30 {
            return Err(Error::param("depth must be at most 30"));
        }
        let side = 1u64 << depth;
        for c in counts.keys() {
            if c.len() != bbox.dim() || c.iter().any(|&i| i as u64 >= side) {
                return Err(Error::param(format!("cell {c:?} invalid at depth {depth}")));
            }
        }
        let counts: BTreeMap<CellIndex, u64> = counts.into_iter().filter(|(_, v)| *v > 0).collect();
        let n = counts.values().sum();
        if n == 0 {
            return Err(Error::param("histogram is empty"));
        }
        Ok(Self { bbox, depth, counts, n })
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn counts(&self) -> &BTreeMap<CellIndex, u64> {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn cell_volume(&self) -> f64 {
        self.bbox.cell_volume(self.depth)
    }

    /// Nonempty cells by count descending, then index ascending.
    pub fn greedy_order(&self) -> GreedyOrder {
        let mut cells: Vec<(CellIndex, u64)> = self.counts.iter().map(|(c, v)| (c.clone(), *v)).collect();
        cells.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut cumulative = Vec::with_capacity(cells.len() + 1);
        cumulative.push(0);
        for (_, v) in &cells {
            cumulative.push(cumulative.last().unwrap() + v);
        }
        GreedyOrder {
            cells,
            cumulative,
            n: self.n,
            cell_volume: self.cell_volume(),
        }
    }
}

/// Counts per cell. Points outside the box are clamped onto the boundary
/// cells unless `strict`, in which case they are an error.
pub fn build_histogram(data: &Dataset, bbox: &BoundingBox, depth: u32, strict: bool) -> Result<DyadicHistogram> {
    if data.dim() != bbox.dim() {
        return Err(Error::DimensionMismatch {
            expected: bbox.dim(),
            actual: data.dim(),
        });
    }
    if depth > 30 {
        return Err(Error::param("depth must be at most 30"));
    }
    if strict {
        if let Some(i) = data.rows().position(|p| !bbox.contains(p)) {
            return Err(Error::data(None, format!("point {i} lies outside the box")));
        }
    }
    let counts = data
        .as_flat()
        .par_chunks(data.dim() * 4096)
        .map(|chunk| {
            let mut local: HashMap<CellIndex, u64> = HashMap::new();
            for p in chunk.chunks_exact(data.dim()) {
                *local.entry(bbox.cell_of_clamped(depth, p)).or_default() += 1;
            }
            local
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });
    DyadicHistogram::from_counts(bbox.clone(), depth, counts.into_iter().collect())
}

/// `2c/√n + √(ln(1/δ)/(2n))`.
pub fn phi_penalty(n: usize, delta: f64, rademacher_c: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("penalty needs n >= 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("delta = {delta} outside (0, 1)")));
    }
    if !(rademacher_c >= 0.0 && rademacher_c.is_finite()) {
        return Err(Error::param("rademacher constant must be >= 0"));
    }
    let n = n as f64;
    Ok(2.0 * rademacher_c / n.sqrt() + ((1.0 / delta).ln() / (2.0 * n)).sqrt())
}

/// Sorted cells with cumulative counts, shared by every `α` of one histogram.
#[derive(Debug, Clone)]
pub struct GreedyOrder {
    cells: Vec<(CellIndex, u64)>,
    cumulative: Vec<u64>,
    n: u64,
    cell_volume: f64,
}

impl GreedyOrder {
    pub fn cells(&self) -> &[(CellIndex, u64)] {
        &self.cells
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of leading cells in the minimum-volume set at `α` with penalty `φ`.
    pub fn prefix_len(&self, alpha: f64, phi: f64) -> usize {
        let target = alpha - phi;
        if target <= 0.0 {
            return 0;
        }
        let n = self.n as f64;
        let k = self.cumulative.partition_point(|&c| (c as f64) / n < target - MASS_TOL);
        k.min(self.cells.len())
    }

    pub fn prefix(&self, len: usize, bbox: &BoundingBox, depth: u32) -> CellSet {
        let mut cells: Vec<CellIndex> = self.cells[..len].iter().map(|(c, _)| c.clone()).collect();
        cells.sort();
        CellSet {
            depth,
            bbox: bbox.clone(),
            cells,
            mass: self.cumulative[len] as f64 / self.n as f64,
            volume: len as f64 * self.cell_volume,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSet {
    pub depth: u32,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub cells: Vec<CellIndex>,
    pub mass: f64,
    pub volume: f64,
}

impl CellSet {
    pub fn contains_cell(&self, cell: &CellIndex) -> bool {
        self.cells.binary_search(cell).is_ok()
    }
}

pub fn min_volume_set(hist: &DyadicHistogram, alpha: f64, phi: f64) -> Result<CellSet> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!("alpha = {alpha} outside [0, 1]")));
    }
    if !(phi >= 0.0 && phi.is_finite()) {
        return Err(Error::param("penalty must be finite and >= 0"));
    }
    let order = hist.greedy_order();
    let len = order.prefix_len(alpha, phi);
    Ok(order.prefix(len, hist.bbox(), hist.depth()))
}

/// Histogram density of the last cell taken by the unpenalized
/// minimum-volume set at `α`, or 0 when that set is empty.
pub fn q_star_estimate(hist: &DyadicHistogram, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha = {alpha} outside (0, 1)")));
    }
    let order = hist.greedy_order();
    let len = order.prefix_len(alpha, 0.0);
    if len == 0 {
        return Ok(0.0);
    }
    Ok(order.cells[len - 1].1 as f64 / (hist.n() as f64 * hist.cell_volume()))
}
