//! Right-continuous step curves on [0, 1).
//!
//! Every MV curve handled by the crate (empirical, smoothed, piecewise
//! approximant, discretized oracle) is a [`StepCurve`]: breakpoints
//! `0 = a_0 < a_1 < ... < a_K <= 1` and values `v_1..v_K`, the curve being
//! equal to `v_{k+1}` on `[a_k, a_{k+1})`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCurve")]
pub struct StepCurve {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawCurve {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawCurve> for StepCurve {
    type Error = Error;

    fn try_from(raw: RawCurve) -> Result<Self> {
        StepCurve::new(raw.breakpoints, raw.values)
    }
}

impl StepCurve {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::param("a step curve needs at least two breakpoints"));
        }
        if values.len() + 1 != breakpoints.len() {
            return Err(Error::param(format!(
                "{} breakpoints require {} values, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                values.len()
            )));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::param("first breakpoint must be 0"));
        }
        if breakpoints.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::param("breakpoints must lie in [0, 1]"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("breakpoints must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::param("values must be finite and nonnegative"));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    /// A single step equal to `value` on `[0, end)`.
    pub fn constant(value: f64, end: f64) -> Result<Self> {
        Self::new(vec![0.0, end], vec![value])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_steps(&self) -> usize {
        self.values.len()
    }

    /// Right end of the domain `[0, a_K)`.
    pub fn domain_end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    /// Index of the step containing `alpha`, assuming `alpha` is in the domain.
    fn step_index(&self, alpha: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= alpha) - 1
    }

    pub fn eval(&self, alpha: f64) -> Result<f64> {
        if !(0.0..self.domain_end()).contains(&alpha) {
            return Err(Error::domain(format!(
                "alpha = {alpha} outside [0, {})",
                self.domain_end()
            )));
        }
        Ok(self.values[self.step_index(alpha)])
    }

    /// Points at which the pair of curves may change on `[a, b]`: `a` itself and
    /// every breakpoint of either curve in `(a, b]` that starts a step.
    fn merged_points(&self, other: &StepCurve, a: f64, b: f64) -> Result<Vec<f64>> {
        let end = self.domain_end().min(other.domain_end());
        if !(a >= 0.0 && a <= b && b <= end) || a >= end {
            return Err(Error::domain(format!(
                "interval [{a}, {b}] not inside the common domain [0, {end})"
            )));
        }
        let mut pts: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(other.breakpoints.iter())
            .copied()
            .filter(|&p| p > a && p <= b && p < end)
            .collect();
        pts.push(a);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        Ok(pts)
    }

    /// Exact `sup |self - other|` over `[a, b]`. When `b` is the end of the
    /// common domain the interval is read as `[a, b)`.
    pub fn sup_distance(&self, other: &StepCurve, a: f64, b: f64) -> Result<f64> {
        let pts = self.merged_points(other, a, b)?;
        Ok(pts
            .iter()
            .map(|&p| (self.values[self.step_index(p)] - other.values[other.step_index(p)]).abs())
            .fold(0.0, f64::max))
    }

    /// Exact `∫_a^b |self - other|`.
    pub fn l1_distance(&self, other: &StepCurve, a: f64, b: f64) -> Result<f64> {
        let pts = self.merged_points(other, a, b)?;
        let mut total = 0.0;
        for (i, &p) in pts.iter().enumerate() {
            let next = pts.get(i + 1).copied().unwrap_or(b);
            let diff = (self.values[self.step_index(p)] - other.values[other.step_index(p)]).abs();
            total += diff * (next - p);
        }
        Ok(total)
    }

    /// `∫_0^{a_K}` of the curve.
    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .zip(self.breakpoints.windows(2))
            .map(|(v, w)| v * (w[1] - w[0]))
            .sum()
    }

    /// CSV with header `alpha,value`, one row per breakpoint. The value on a
    /// row is the right limit at that breakpoint; the final row repeats the
    /// last step value.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("alpha,value\n");
        let last = self.values.len() - 1;
        for (k, b) in self.breakpoints.iter().enumerate() {
            out.push_str(&format!("{},{}\n", b, self.values[k.min(last)]));
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let rows = crate::io::read_numeric_csv(text.as_bytes(), Some(&["alpha", "value"]))?;
        let mut breakpoints = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len());
        for row in rows {
            breakpoints.push(row[0]);
            values.push(row[1]);
        }
        values.pop();
        Self::new(breakpoints, values)
    }
}
