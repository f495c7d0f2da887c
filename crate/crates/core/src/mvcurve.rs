//! Empirical MV curves and the closed-form optimal curves of Gaussian laws.
//!
//! The MV curve of a scorer `s` is `α ↦ λ_s(α_s⁻¹(α))`: the volume of the
//! smallest upper level set of `s` carrying mass `α`. Lower is better, and
//! the density itself attains the pointwise minimum `MV*`.
//!
//! Curves are only produced on `[0, 1)`; every catalogue scorer is bounded
//! so the left end `α = 0` is always well defined.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use statrs::function::gamma::{gamma, gamma_lr};

use crate::curve::StepCurve;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::scoring::{simulate_mixture, GaussianParams, MixtureParams, Scorer};
use crate::volume::LevelVolume;

/// Scores of the sample points, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSample {
    sorted: Vec<f64>,
}

impl ScoreSample {
    pub fn new(mut scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::param("score sample is empty"));
        }
        if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::param("scores must be finite and nonnegative"));
        }
        scores.sort_by(f64::total_cmp);
        Ok(Self { sorted: scores })
    }

    pub fn from_scorer(scorer: &Scorer, data: &Dataset) -> Result<Self> {
        Self::new(scorer.score_batch(data)?)
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// `s_(k)`, 1-based.
    pub fn order_statistic(&self, k: usize) -> f64 {
        self.sorted[k - 1]
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.len() as f64
    }

    /// Sample standard deviation (divisor `n - 1`); 0 when `n = 1`.
    pub fn std_dev(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.sorted.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

/// `k = ⌈n(1-α)⌉` clamped to `[1, n]`. Products within 1e-9 of an integer are
/// snapped to it so that `α = j/n` lands on the intended order statistic.
pub(crate) fn order_index(n: usize, alpha: f64) -> usize {
    let x = n as f64 * (1.0 - alpha);
    let r = x.round();
    let k = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    (k as usize).clamp(1, n)
}

/// `α̂_s⁻¹(α) = s_(⌈n(1-α)⌉)`, the generalized inverse of the empirical mass.
pub fn empirical_mass_inverse(sample: &ScoreSample, alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::domain(format!("alpha = {alpha} outside [0, 1)")));
    }
    Ok(sample.order_statistic(order_index(sample.len(), alpha)))
}

/// Step curve on breakpoints `k/n` whose value on `[k/n, (k+1)/n)` is the
/// volume of `{s >= s_(n-k)}`.
pub fn empirical_mv_curve<V: LevelVolume + ?Sized>(
    sample: &ScoreSample,
    scorer: &Scorer,
    volumes: &V,
) -> Result<StepCurve> {
    let n = sample.len();
    let profile = volumes.profile(scorer)?;
    let mut breakpoints = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        breakpoints.push(k as f64 / n as f64);
        values.push(profile.volume_at_least(sample.order_statistic(n - k)));
    }
    breakpoints.push(1.0);
    StepCurve::new(breakpoints, values)
}

/// The MV curve of a piecewise-constant scorer whose nested level sets have
/// masses `α_1 < ... < α_K` and volumes `λ_1 <= ... <= λ_K`: `λ_{k+1}` on
/// `[α_k, α_{k+1})` with `α_0 = 0`.
pub fn exact_mv_for_partition(masses: &[f64], volumes: &[f64]) -> Result<StepCurve> {
    if masses.is_empty() || masses.len() != volumes.len() {
        return Err(Error::param("need one volume per mass and at least one layer"));
    }
    if masses[0] <= 0.0 || masses.iter().any(|m| *m > 1.0) || masses.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("masses must be strictly increasing in (0, 1]"));
    }
    if volumes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("volumes must be nondecreasing"));
    }
    let mut breakpoints = Vec::with_capacity(masses.len() + 1);
    breakpoints.push(0.0);
    breakpoints.extend_from_slice(masses);
    StepCurve::new(breakpoints, volumes.to_vec())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::domain(format!("alpha = {alpha} outside [0, 1)")));
    }
    Ok(())
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// `MV*(α) = 2Φ⁻¹((1+α)/2)` for the standard normal law. Multiply by `σ`
/// for `N(μ, σ²)`.
pub fn mv_star_gaussian_1d(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * std_normal().inverse_cdf((1.0 + alpha) / 2.0))
}

/// Density level `Q*(α)` of the standard normal at mass `α`.
pub fn q_star_gaussian_1d(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let z = std_normal().inverse_cdf((1.0 + alpha) / 2.0);
    Ok(std_normal().pdf(z))
}

/// Quantile of order `p` of the χ² law with `d` degrees of freedom, by
/// bisection on the regularized lower incomplete gamma function to 1e-12.
pub fn chi_square_quantile(d: usize, p: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::param("chi-square needs d >= 1"));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::domain(format!("probability {p} outside [0, 1)")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let shape = d as f64 / 2.0;
    let cdf = |x: f64| gamma_lr(shape, x / 2.0);
    let mut lo = 0.0;
    let mut hi = d as f64 + 1.0;
    while cdf(hi) < p {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numerical("chi-square bracket overflow".into()));
        }
    }
    for _ in 0..400 {
        if hi - lo <= 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn unit_ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    std::f64::consts::PI.powf(h) / gamma(h + 1.0)
}

fn require_diagonal(params: &GaussianParams) -> Result<()> {
    params.validate()?;
    if !params.is_diagonal() {
        return Err(Error::param("closed-form MV* needs a diagonal covariance"));
    }
    Ok(())
}

/// `MV*(α) = π^{d/2}/Γ(d/2+1)·χ²_d(α)^{d/2}·∏a_i`, the volume of the
/// Mahalanobis ellipsoid carrying mass `α`.
pub fn mv_star_gaussian_diag(alpha: f64, params: &GaussianParams) -> Result<f64> {
    check_alpha(alpha)?;
    require_diagonal(params)?;
    let d = params.dim();
    let c = chi_square_quantile(d, alpha)?;
    Ok(unit_ball_volume(d) * c.powf(d as f64 / 2.0) * params.axes().iter().product::<f64>())
}

/// Density value on the boundary of the mass-`α` ellipsoid.
pub fn q_star_gaussian_diag(alpha: f64, params: &GaussianParams) -> Result<f64> {
    check_alpha(alpha)?;
    require_diagonal(params)?;
    let d = params.dim() as f64;
    let c = chi_square_quantile(params.dim(), alpha)?;
    let norm = (2.0 * std::f64::consts::PI).powf(d / 2.0) * params.axes().iter().product::<f64>();
    Ok((-0.5 * c).exp() / norm)
}

/// `MV*'(α) = 1/Q*(α)`.
pub fn mv_star_derivative(_alpha: f64, q_star: f64) -> Result<f64> {
    if !(q_star > 0.0) {
        return Err(Error::domain(format!("density level {q_star} must be positive")));
    }
    Ok(1.0 / q_star)
}

/// Excess mass at the optimal level: `α - Q*(α)·MV*(α)`.
pub fn excess_mass(alpha: f64, mv_star_value: f64, q_star: f64) -> f64 {
    alpha - q_star * mv_star_value
}

/// Samples a closed-form curve on breakpoints `g/G`; the value on
/// `[g/G, (g+1)/G)` is `f(g/G)`.
pub fn discretize<F: Fn(f64) -> Result<f64>>(f: F, grid: usize) -> Result<StepCurve> {
    if grid < 1 {
        return Err(Error::param("grid must have at least one step"));
    }
    let breakpoints: Vec<f64> = (0..=grid).map(|g| g as f64 / grid as f64).collect();
    let values = breakpoints[..grid].iter().map(|&a| f(a)).collect::<Result<Vec<_>>>()?;
    StepCurve::new(breakpoints, values)
}

/// Numerical `MV*` of a mixture: the empirical MV curve of the true density
/// on `n_ref` fresh draws.
pub fn mixture_reference_curve<V: LevelVolume + ?Sized>(
    params: &MixtureParams,
    n_ref: usize,
    volumes: &V,
    rng: &mut RandomSource,
) -> Result<StepCurve> {
    let data = simulate_mixture(params, n_ref, rng)?;
    let scorer = Scorer::GaussianMixtureDensity(params.clone());
    empirical_mv_curve(&ScoreSample::from_scorer(&scorer, &data)?, &scorer, volumes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::data::BoundingBox;
    use crate::scoring::{MonotoneTransform, PiecewiseParams};
    use crate::volume::{LevelProfile, VolumeEstimator};
    use proptest::prelude::*;

    #[test]
    fn mass_inverse_examples() {
        let s = ScoreSample::new(vec![4.0, 2.0, 1.0, 3.0]).unwrap();
        assert_eq!(empirical_mass_inverse(&s, 0.25).unwrap(), 3.0);
        assert_eq!(empirical_mass_inverse(&s, 0.0).unwrap(), 4.0);
        assert_eq!(empirical_mass_inverse(&s, 0.5).unwrap(), 2.0);
        assert_eq!(empirical_mass_inverse(&s, 0.99).unwrap(), 1.0);
        assert!(matches!(empirical_mass_inverse(&s, 1.0), Err(Error::Domain(_))));
        assert!(empirical_mass_inverse(&s, -0.1).is_err());
    }

    #[test]
    fn order_index_snaps_grid_points() {
        for n in 1..200usize {
            for j in 0..n {
                assert_eq!(order_index(n, j as f64 / n as f64), n - j);
            }
        }
    }

    /// s = 2 on [0, 0.3], s = 1 on (0.3, 1]: λ(s >= 2) = 0.3, λ(s >= 1) = 1.
    struct TwoLevelVolumes;

    impl LevelVolume for TwoLevelVolumes {
        fn profile(&self, _: &Scorer) -> Result<Arc<LevelProfile>> {
            Ok(Arc::new(LevelProfile::weighted(vec![(2.0, 0.3), (1.0, 0.7)])))
        }
    }

    #[test]
    fn two_level_hand_example() {
        let sample = ScoreSample::new(vec![1.0, 2.0, 1.0, 2.0]).unwrap();
        let any = Scorer::gaussian(GaussianParams::diagonal(vec![0.0], vec![1.0]).unwrap());
        let c = empirical_mv_curve(&sample, &any, &TwoLevelVolumes).unwrap();
        for a in [0.0, 0.1, 0.25, 0.49] {
            assert_eq!(c.eval(a).unwrap(), 0.3);
        }
        for a in [0.5, 0.75, 0.99] {
            assert_eq!(c.eval(a).unwrap(), 1.0);
        }
        let exact = exact_mv_for_partition(&[0.5, 1.0], &[0.3, 1.0]).unwrap();
        assert_eq!(exact.sup_distance(&c, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn two_level_through_exact_piecewise_volumes() {
        // same shape on dyadic cells: s = 2 on [0, 0.25), 1 elsewhere
        use crate::scoring::CellLevel;
        use crate::volume::ExactPiecewiseVolume;
        let bbox = BoundingBox::cube(1, 0.0, 1.0).unwrap();
        let p = PiecewiseParams::new(bbox, 2, vec![CellLevel { index: vec![0], level: 2.0 }], 1.0).unwrap();
        let s = Scorer::DyadicPiecewise(p);
        let data = Dataset::new(vec![0.1, 0.6, 0.2, 0.9], 1).unwrap();
        let sample = ScoreSample::from_scorer(&s, &data).unwrap();
        let c = empirical_mv_curve(&sample, &s, &ExactPiecewiseVolume).unwrap();
        assert_eq!(c, exact_mv_for_partition(&[0.25, 0.5, 0.75, 1.0], &[0.25, 0.25, 1.0, 1.0]).unwrap());
    }

    #[test]
    fn constant_and_single_point_curves() {
        let bbox = BoundingBox::cube(2, -1.0, 1.0).unwrap();
        let est = VolumeEstimator::new(bbox.clone(), 1000, &mut RandomSource::new(1)).unwrap();
        let s = Scorer::DyadicPiecewise(PiecewiseParams::constant(bbox, 2.0).unwrap());
        let data = Dataset::from_rows(&[vec![0.0, 0.0], vec![0.5, -0.5], vec![0.9, 0.1]]).unwrap();
        let c = empirical_mv_curve(&ScoreSample::from_scorer(&s, &data).unwrap(), &s, &est).unwrap();
        assert!(c.values().iter().all(|v| *v == 4.0));
        assert_eq!(c.breakpoints().len(), 4);

        let g = Scorer::gaussian(GaussianParams::diagonal(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap());
        let one = Dataset::new(vec![0.3, 0.3], 2).unwrap();
        let sample = ScoreSample::from_scorer(&g, &one).unwrap();
        let c = empirical_mv_curve(&sample, &g, &est).unwrap();
        assert_eq!(c.num_steps(), 1);
        let expect = est.level_set_volumes(&g, &[sample.order_statistic(1)]).unwrap()[0];
        assert_eq!(c.values()[0], expect);
    }

    #[test]
    fn exact_partition_examples() {
        let c = exact_mv_for_partition(&[1.0], &[5.0]).unwrap();
        assert_eq!(c, StepCurve::constant(5.0, 1.0).unwrap());
        assert!(exact_mv_for_partition(&[0.5, 0.4], &[1.0, 2.0]).is_err());
        assert!(exact_mv_for_partition(&[0.5, 0.8], &[2.0, 1.0]).is_err());
        assert!(exact_mv_for_partition(&[0.0, 0.8], &[1.0, 2.0]).is_err());
        // uniform law on the unit cube: 10 equal-mass cells of volume 0.1 each
        let masses: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        let c = exact_mv_for_partition(&masses, &masses).unwrap();
        for k in 0..10 {
            assert_eq!(c.eval(k as f64 / 10.0).unwrap(), masses[k]);
        }
    }

    #[test]
    fn gaussian_1d_values() {
        assert_eq!(mv_star_gaussian_1d(0.0).unwrap(), 0.0);
        // 2·Φ⁻¹(0.75), 2·Φ⁻¹(0.95) from scipy.stats.norm.ppf
        assert!((mv_star_gaussian_1d(0.5).unwrap() - 1.348_979_500_392_163_4).abs() < 1e-9);
        assert!((mv_star_gaussian_1d(0.9).unwrap() - 3.289_707_253_902_944_4).abs() < 1e-9);
        assert!(mv_star_gaussian_1d(1.0).is_err());
    }

    #[test]
    fn gaussian_diag_values() {
        let p = GaussianParams::diagonal(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let closed = -2.0 * std::f64::consts::PI * 0.5f64.ln();
        assert!((mv_star_gaussian_diag(0.5, &p).unwrap() - closed).abs() < 1e-10);
        assert!((closed - 4.355_172_180_607_204).abs() < 1e-12);
        assert_eq!(mv_star_gaussian_diag(0.0, &p).unwrap(), 0.0);

        let one = GaussianParams::diagonal(vec![0.0], vec![1.0]).unwrap();
        for a in [0.25, 0.5, 0.75] {
            let diff = mv_star_gaussian_diag(a, &one).unwrap() - mv_star_gaussian_1d(a).unwrap();
            assert!(diff.abs() < 1e-10, "{a}: {diff}");
        }

        // d = 2 closed form χ²₂(α) = -2 ln(1-α)
        for a in [0.1, 0.37, 0.8, 0.99] {
            let c = chi_square_quantile(2, a).unwrap();
            assert!((c + 2.0 * (1.0f64 - a).ln()).abs() < 1e-10);
        }

        let corr = MixtureParams::benchmark_2d().components[0].clone();
        assert!(mv_star_gaussian_diag(0.5, &corr).is_err());
    }

    #[test]
    fn derivative_and_excess_mass() {
        let q = q_star_gaussian_1d(0.5).unwrap();
        assert!((q - 0.317_776_572_684_107).abs() < 1e-12);
        assert!((mv_star_derivative(0.5, q).unwrap() - 3.146_865_080_561_092).abs() < 1e-9);
        assert_eq!(mv_star_derivative(0.1, 1.0).unwrap(), 1.0);
        assert!(mv_star_derivative(0.1, 0.0).is_err());

        let h = 1e-5;
        let fd = (mv_star_gaussian_1d(0.5 + h).unwrap() - mv_star_gaussian_1d(0.5 - h).unwrap()) / (2.0 * h);
        assert!((fd / mv_star_derivative(0.5, q).unwrap() - 1.0).abs() < 1e-6);

        let em = excess_mass(0.5, mv_star_gaussian_1d(0.5).unwrap(), q);
        assert!((em - 0.071_325_917_744_259_39).abs() < 1e-9);
        assert_eq!(excess_mass(0.0, 0.0, q_star_gaussian_1d(0.0).unwrap()), 0.0);
        for a in [0.1, 0.5, 0.9] {
            assert_eq!(excess_mass(a, a, 1.0), 0.0);
        }
    }

    #[test]
    fn q_star_diag_matches_1d() {
        let one = GaussianParams::diagonal(vec![0.0], vec![1.0]).unwrap();
        for a in [0.2, 0.6] {
            assert!((q_star_gaussian_diag(a, &one).unwrap() - q_star_gaussian_1d(a).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn mv_star_is_convex() {
        let p = GaussianParams::diagonal(vec![0.0, 0.0, 0.0], vec![1.0, 2.25, 0.5]).unwrap();
        let grid: Vec<f64> = (0..200).map(|i| 0.99 * i as f64 / 199.0).collect();
        let v1: Vec<f64> = grid.iter().map(|&a| mv_star_gaussian_1d(a).unwrap()).collect();
        let vd: Vec<f64> = grid.iter().map(|&a| mv_star_gaussian_diag(a, &p).unwrap()).collect();
        for v in [v1, vd] {
            for w in v.windows(3) {
                assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
            }
        }
    }

    #[test]
    fn density_beats_competitor() {
        let params = GaussianParams::diagonal(vec![0.0], vec![1.0]).unwrap();
        let truth = Scorer::gaussian(params.clone());
        let mix = MixtureParams::new(vec![1.0], vec![params]).unwrap();
        let data = simulate_mixture(&mix, 2000, &mut RandomSource::new(21)).unwrap();
        let est = VolumeEstimator::new(BoundingBox::cube(1, -6.0, 6.0).unwrap(), 200_000, &mut RandomSource::new(22)).unwrap();
        let competitor = Scorer::transformed(
            Scorer::gaussian(GaussianParams::diagonal(vec![0.6], vec![1.5]).unwrap()),
            MonotoneTransform::Arctan,
        );
        let best = empirical_mv_curve(&ScoreSample::from_scorer(&truth, &data).unwrap(), &truth, &est).unwrap();
        let other = empirical_mv_curve(&ScoreSample::from_scorer(&competitor, &data).unwrap(), &competitor, &est).unwrap();
        for i in 1..10 {
            let a = i as f64 / 10.0;
            assert!(best.eval(a).unwrap() <= other.eval(a).unwrap() + 0.02, "alpha {a}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn empirical_curves_nondecreasing_and_invariant(seed in 0u64..1000, n in 1usize..300) {
            let mix = MixtureParams::benchmark_2d();
            let data = simulate_mixture(&mix, n, &mut RandomSource::new(seed)).unwrap();
            let bbox = crate::data::bounding_box(&data, 0.05).unwrap();
            let est = VolumeEstimator::new(bbox, 5000, &mut RandomSource::new(seed + 1)).unwrap();
            let s = Scorer::GaussianMixtureDensity(mix);
            let base = empirical_mv_curve(&ScoreSample::from_scorer(&s, &data).unwrap(), &s, &est).unwrap();
            prop_assert!(base.is_nondecreasing());
            prop_assert_eq!(base.breakpoints().len(), n + 1);
            for psi in MonotoneTransform::catalogue() {
                let t = Scorer::transformed(s.clone(), psi);
                let c = empirical_mv_curve(&ScoreSample::from_scorer(&t, &data).unwrap(), &t, &est).unwrap();
                prop_assert_eq!(&c, &base);
            }
        }
    }
}
