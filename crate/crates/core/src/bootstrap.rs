//! Smoothed-bootstrap confidence bands for an empirical MV curve.
//!
//! Each replicate draws `n` scores from the kernel-smoothed score law,
//! recomputes the MV curve from their order statistics, and records the
//! largest deviation `√n·|MV^Boot - MṼ|` from the smoothed curve over a grid
//! of `[ε, 1-ε]`. The band is centred on the raw empirical curve with radius
//! `ν_η/√n`, `ν_η` being the `1-η` quantile of those deviations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::StepCurve;
use crate::error::{Error, Result};
use crate::kde::{kde_quantile, sample_kde, KdeModel};
use crate::mvcurve::{empirical_mv_curve, order_index, ScoreSample};
use crate::rng::RandomSource;
use crate::scoring::Scorer;
use crate::volume::{LevelProfile, LevelVolume};

/// `F̃⁻¹(p)`, extended to `p = 1` by the upper end of the kernel support.
fn smoothed_threshold(model: &KdeModel, p: f64) -> Result<f64> {
    if p >= 1.0 {
        let s = model.sample().sorted();
        return Ok(s[s.len() - 1] + model.bandwidth());
    }
    kde_quantile(model, p)
}

/// `MṼ(α) = λ_s(F̃⁻¹(1-α))` sampled on breakpoints `g/G`.
pub fn smoothed_mv_curve<V: LevelVolume + ?Sized>(
    model: &KdeModel,
    scorer: &Scorer,
    volumes: &V,
    grid: usize,
) -> Result<StepCurve> {
    if grid < 2 {
        return Err(Error::param("grid needs at least 2 points"));
    }
    let profile = volumes.profile(scorer)?;
    let breakpoints: Vec<f64> = (0..=grid).map(|g| g as f64 / grid as f64).collect();
    let values = breakpoints[..grid]
        .iter()
        .map(|&a| Ok(profile.volume_at_least(smoothed_threshold(model, 1.0 - a)?)))
        .collect::<Result<Vec<f64>>>()?;
    StepCurve::new(breakpoints, values)
}

#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    pub bandwidth: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub reps: usize,
    pub grid: usize,
    /// Resample the raw scores and compare with the raw curve instead.
    pub naive: bool,
}

impl BootstrapConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::param(format!("epsilon = {} outside (0, 1/2)", self.epsilon)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::param(format!("eta = {} outside (0, 1)", self.eta)));
        }
        if self.reps == 0 {
            return Err(Error::param("need at least one bootstrap replicate"));
        }
        if self.grid < 2 {
            return Err(Error::param("grid needs at least 2 points"));
        }
        Ok(())
    }
}

/// `G` equally spaced masses from `ε` to `1-ε`.
pub fn band_grid(epsilon: f64, grid: usize) -> Vec<f64> {
    let step = (1.0 - 2.0 * epsilon) / (grid - 1) as f64;
    (0..grid).map(|g| epsilon + g as f64 * step).collect()
}

/// 1-based index `⌈(N+1)(1-η)⌉` clamped to `[1, N]`.
pub fn quantile_index(reps: usize, eta: f64) -> usize {
    let x = (reps + 1) as f64 * (1.0 - eta);
    let r = x.round();
    let k = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    (k as usize).clamp(1, reps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBand {
    pub center: StepCurve,
    pub radius: f64,
    pub nu_eta: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub replications: usize,
    pub naive: bool,
    /// Bootstrap sups, in replicate order.
    pub sups: Vec<f64>,
}

impl ConfidenceBand {
    pub fn lower(&self, alpha: f64) -> Result<f64> {
        Ok((self.center.eval(alpha)? - self.radius).max(0.0))
    }

    pub fn upper(&self, alpha: f64) -> Result<f64> {
        Ok(self.center.eval(alpha)? + self.radius)
    }

    /// Whether `curve` stays within `radius` of the center on all of `[ε, 1-ε]`.
    pub fn contains(&self, curve: &StepCurve) -> Result<bool> {
        Ok(self.center.sup_distance(curve, self.epsilon, 1.0 - self.epsilon)? <= self.radius)
    }

    /// CSV `alpha,center,lower,upper` at the given masses.
    pub fn to_csv_string(&self, alphas: &[f64]) -> Result<String> {
        let mut out = String::from("alpha,center,lower,upper\n");
        for &a in alphas {
            out.push_str(&format!("{},{},{},{}\n", a, self.center.eval(a)?, self.lower(a)?, self.upper(a)?));
        }
        Ok(out)
    }
}

fn sup_deviation(profile: &LevelProfile, boot: &mut [f64], reference: &[f64], alphas: &[f64]) -> f64 {
    boot.sort_unstable_by(f64::total_cmp);
    let n = boot.len();
    let root_n = (n as f64).sqrt();
    alphas
        .iter()
        .zip(reference)
        .map(|(&a, &r)| {
            let t = boot[order_index(n, a) - 1];
            root_n * (profile.volume_at_least(t) - r).abs()
        })
        .fold(0.0, f64::max)
}

pub fn bootstrap_band<V: LevelVolume + ?Sized>(
    sample: &ScoreSample,
    scorer: &Scorer,
    volumes: &V,
    config: &BootstrapConfig,
    rng: &RandomSource,
) -> Result<ConfidenceBand> {
    config.validate()?;
    let model = KdeModel::new(sample.clone(), config.bandwidth)?;
    let profile = volumes.profile(scorer)?;
    let center = empirical_mv_curve(sample, scorer, volumes)?;
    let alphas = band_grid(config.epsilon, config.grid);
    let reference: Vec<f64> = if config.naive {
        alphas.iter().map(|&a| center.eval(a)).collect::<Result<_>>()?
    } else {
        alphas
            .iter()
            .map(|&a| Ok(profile.volume_at_least(smoothed_threshold(&model, 1.0 - a)?)))
            .collect::<Result<_>>()?
    };
    let n = sample.len();
    let sups = (0..config.reps)
        .into_par_iter()
        .map(|j| {
            let mut r = rng.split(j as u64);
            let mut boot = if config.naive {
                let s = sample.sorted();
                (0..n).map(|_| s[r.index(n)]).collect()
            } else {
                sample_kde(&model, n, &mut r)?
            };
            Ok(sup_deviation(&profile, &mut boot, &reference, &alphas))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut sorted = sups.clone();
    sorted.sort_by(f64::total_cmp);
    let nu_eta = sorted[quantile_index(config.reps, config.eta) - 1];
    Ok(ConfidenceBand {
        center,
        radius: nu_eta / (n as f64).sqrt(),
        nu_eta,
        epsilon: config.epsilon,
        eta: config.eta,
        replications: config.reps,
        naive: config.naive,
        sups,
    })
}
