use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` observations in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<f64>,
    n: usize,
    d: usize,
}

impl Dataset {
    pub fn new(points: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("dimension must be at least 1"));
        }
        if points.is_empty() || points.len() % d != 0 {
            return Err(Error::param(format!(
                "{} coordinates do not form a nonempty set of {d}-dimensional points",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(None, format!("non-finite coordinate in point {}", i / d)));
        }
        let n = points.len() / d;
        Ok(Self { points, n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::param("rows have differing lengths"));
        }
        Self::new(rows.concat(), d)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }
}

/// Multi-index of a dyadic cell, one coordinate in `0..2^depth` per axis.
pub type CellIndex = Vec<u32>;

/// Axis-aligned box, the reference region for Lebesgue volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct BoundingBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct RawBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawBox> for BoundingBox {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        BoundingBox::new(raw.lower, raw.upper)
    }
}

impl BoundingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::param("box bounds must be nonempty and of equal length"));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::param(format!("box axis {i}: need finite lower < upper")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    /// Volume of one cell of the depth-`depth` dyadic grid over this box.
    pub fn cell_volume(&self, depth: u32) -> f64 {
        self.volume() * 0.5f64.powi((depth as usize * self.dim()) as i32)
    }

    /// Index of the depth-`depth` dyadic cell containing `x`, or `None` when
    /// `x` lies outside the closed box. Cells are half-open per axis; points on
    /// the upper face belong to the last cell.
    pub fn cell_of(&self, depth: u32, x: &[f64]) -> Option<CellIndex> {
        if !self.contains(x) {
            return None;
        }
        Some(self.cell_of_clamped(depth, x))
    }

    /// As [`BoundingBox::cell_of`] but points outside the box are clamped onto
    /// the nearest boundary cell.
    pub fn cell_of_clamped(&self, depth: u32, x: &[f64]) -> CellIndex {
        let side = 1u64 << depth;
        x.iter()
            .enumerate()
            .map(|(i, v)| {
                let t = (v - self.lower[i]) / self.width(i) * side as f64;
                (t.floor().max(0.0) as u64).min(side - 1) as u32
            })
            .collect()
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }
}

/// Per-axis `[min - p·range, max + p·range]`; an axis with zero range is
/// widened by 1 on each side instead.
pub fn bounding_box(data: &Dataset, padding_fraction: f64) -> Result<BoundingBox> {
    if !(padding_fraction >= 0.0 && padding_fraction.is_finite()) {
        return Err(Error::param("padding fraction must be finite and >= 0"));
    }
    let d = data.dim();
    let mut lower = vec![f64::INFINITY; d];
    let mut upper = vec![f64::NEG_INFINITY; d];
    for p in data.rows() {
        for i in 0..d {
            lower[i] = lower[i].min(p[i]);
            upper[i] = upper[i].max(p[i]);
        }
    }
    for i in 0..d {
        let range = upper[i] - lower[i];
        if range == 0.0 {
            lower[i] -= 1.0;
            upper[i] += 1.0;
        } else {
            lower[i] -= padding_fraction * range;
            upper[i] += padding_fraction * range;
        }
    }
    BoundingBox::new(lower, upper)
}
