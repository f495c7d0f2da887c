//! Biweight-kernel smoothing of a score sample.

use crate::error::{Error, Result};
use crate::mvcurve::ScoreSample;
use crate::rng::RandomSource;

const BIWEIGHT_MAX: f64 = 15.0 / 16.0;

/// `(15/16)(1-u²)²` on `[-1, 1]`, zero elsewhere.
pub fn biweight_pdf(u: f64) -> f64 {
    if u.abs() > 1.0 {
        return 0.0;
    }
    let w = 1.0 - u * u;
    BIWEIGHT_MAX * w * w
}

pub fn biweight_cdf(u: f64) -> f64 {
    if u <= -1.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let u3 = u * u * u;
        0.5 + BIWEIGHT_MAX * (u - 2.0 * u3 / 3.0 + u3 * u * u / 5.0)
    }
}

/// Smoothed score law `F̃(t) = (1/n) Σ K((t - s_i)/h)` integrated.
#[derive(Debug, Clone)]
pub struct KdeModel {
    sample: ScoreSample,
    h: f64,
}

impl KdeModel {
    pub fn new(sample: ScoreSample, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::param(format!("bandwidth must be positive, got {h}")));
        }
        Ok(Self { sample, h })
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn sample(&self) -> &ScoreSample {
        &self.sample
    }

    fn support(&self) -> (f64, f64) {
        let s = self.sample.sorted();
        (s[0] - self.h, s[s.len() - 1] + self.h)
    }
}

pub fn kde_cdf(model: &KdeModel, t: f64) -> f64 {
    let (lo, hi) = model.support();
    if t <= lo {
        return 0.0;
    }
    if t >= hi {
        return 1.0;
    }
    let s = model.sample.sorted();
    // scores below t - h contribute 1, above t + h contribute 0
    let full = s.partition_point(|&v| v <= t - model.h);
    let end = s.partition_point(|&v| v < t + model.h);
    let partial: f64 = s[full..end].iter().map(|&v| biweight_cdf((t - v) / model.h)).sum();
    ((full as f64 + partial) / s.len() as f64).clamp(0.0, 1.0)
}

/// Smallest-bracket bisection for `F̃(t) = p`.
pub fn kde_quantile(model: &KdeModel, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("probability {p} outside (0, 1)")));
    }
    let (mut lo, mut hi) = model.support();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = kde_cdf(model, mid);
        if (f - p).abs() <= 1e-10 {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            // bracket has collapsed to adjacent floats; the CDF jumps across p
            return Ok(mid);
        }
        if f < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numerical(format!("kde quantile for p = {p} did not converge")))
}

/// `scale·(ln n / n)^{1/5}`.
pub fn default_bandwidth(n: usize, scale: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::param("default bandwidth needs n >= 2"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::param("bandwidth scale must be positive"));
    }
    let n = n as f64;
    Ok(scale * (n.ln() / n).powf(0.2))
}

/// Biweight noise by rejection from the uniform box `[-1,1]×[0,15/16]`.
fn biweight_noise(rng: &mut RandomSource) -> f64 {
    loop {
        let u = rng.uniform_in(-1.0, 1.0);
        if rng.uniform() * BIWEIGHT_MAX <= biweight_pdf(u) {
            return u;
        }
    }
}

/// `m` draws from `F̃`: a uniformly chosen score plus `h` times biweight noise.
pub fn sample_kde(model: &KdeModel, m: usize, rng: &mut RandomSource) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::param("need at least one draw"));
    }
    let s = model.sample.sorted();
    Ok((0..m)
        .map(|_| {
            let base = s[rng.index(s.len())];
            base + model.h * biweight_noise(rng)
        })
        .collect())
}
