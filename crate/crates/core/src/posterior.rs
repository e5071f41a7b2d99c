//! Jeffreys posteriors over the natural parameter.
//!
//! With prior `π(θ) ∝ √F″(θ)`, the posterior after `n` observations with
//! `s = Σ T(yᵢ)` has log-density `½ ln F″(θ) + θ s − n F(θ)` up to a constant.
//! Each of the six families has an exact conjugate form in its conventional
//! parameter λ; [`sample_mh`] covers the same target by random-walk Metropolis.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};

use crate::error::{Error, Result};
use crate::exp_family::{FamilyDescriptor, FamilyKind, NaturalParam};

/// Sufficient statistics `(n, s)` of one arm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArmPosterior {
    n: u64,
    s: f64,
}

impl ArmPosterior {
    pub fn new() -> Self {
        Self::default()
    }

    /// State with `n` observations summing to `s` in T-space.
    pub fn from_stats(n: u64, s: f64) -> Self {
        ArmPosterior { n, s }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn update(&self, fam: &FamilyDescriptor, x: f64) -> Result<Self> {
        let t = fam.suff_stat(x)?;
        Ok(ArmPosterior {
            n: self.n + 1,
            s: self.s + t,
        })
    }
}

/// Minimal `n` that makes the Jeffreys posterior integrable.
pub fn properness_threshold(fam: &FamilyDescriptor) -> u64 {
    match fam.kind() {
        FamilyKind::Bernoulli => 0,
        _ => 1,
    }
}

fn check_proper(fam: &FamilyDescriptor, post: &ArmPosterior) -> Result<()> {
    let threshold = properness_threshold(fam);
    if post.n < threshold {
        return Err(Error::ImproperPosterior {
            family: fam.to_string(),
            threshold,
            n: post.n,
        });
    }
    Ok(())
}

/// `½ ln F″(θ) + θ s − n F(θ)`.
pub fn log_posterior_unnorm(fam: &FamilyDescriptor, post: &ArmPosterior, theta: NaturalParam) -> Result<f64> {
    check_proper(fam, post)?;
    let h = fam.hess(theta)?;
    let f = fam.log_partition(theta)?;
    Ok(0.5 * h.ln() + theta.0 * post.s - post.n as f64 * f)
}

/// Rate of the Gamma posterior on λ for the families where it is a rate.
fn gamma_rate(fam: &FamilyDescriptor, post: &ArmPosterior) -> Result<f64> {
    let rate = match fam.kind() {
        FamilyKind::Pareto { xm } => post.s - post.n as f64 * xm.ln(),
        FamilyKind::Poisson => post.n as f64,
        _ => post.s,
    };
    if rate > 0.0 && rate.is_finite() {
        Ok(rate)
    } else {
        Err(Error::State(format!(
            "{fam} posterior with n = {}, s = {} has non-positive rate {rate}",
            post.n, post.s
        )))
    }
}

/// Exact draw of θ from the Jeffreys posterior.
///
/// | family     | posterior                                  |
/// |------------|--------------------------------------------|
/// | Bernoulli  | λ ~ Beta(½ + s, ½ + n − s)                 |
/// | Gaussian   | λ ~ N(s/n, σ²/n)                           |
/// | Gamma(k)   | λ ~ Gamma(kn, rate s)                      |
/// | Poisson    | λ ~ Gamma(½ + s, rate n)                   |
/// | Pareto     | λ ~ Gamma(n, rate s − n ln x_m)            |
/// | Weibull(k) | λᵏ ~ Gamma(n, rate s)                      |
pub fn sample_conjugate<R: Rng + ?Sized>(fam: &FamilyDescriptor, post: &ArmPosterior, rng: &mut R) -> Result<NaturalParam> {
    check_proper(fam, post)?;
    let n = post.n as f64;
    let s = post.s;
    let gamma = |shape: f64, rate: f64, rng: &mut R| -> Result<f64> {
        Gamma::new(shape, 1.0 / rate)
            .map(|g| g.sample(rng))
            .map_err(|e| Error::State(format!("gamma({shape}, rate {rate}): {e}")))
    };
    let theta = match fam.kind() {
        FamilyKind::Bernoulli => {
            let beta = Beta::new(0.5 + s, 0.5 + n - s).map_err(|e| Error::State(format!("beta posterior: {e}")))?;
            let lam: f64 = beta.sample(rng);
            let lam = lam.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
            (lam / (1.0 - lam)).ln()
        }
        FamilyKind::Gaussian { sigma2 } => {
            let lam = Normal::new(s / n, (sigma2 / n).sqrt())
                .map_err(|e| Error::State(format!("normal posterior: {e}")))?
                .sample(rng);
            lam / sigma2
        }
        FamilyKind::GammaShape { k } => -gamma(k * n, gamma_rate(fam, post)?, rng)?.max(f64::MIN_POSITIVE),
        FamilyKind::Poisson => gamma(0.5 + s, gamma_rate(fam, post)?, rng)?.max(f64::MIN_POSITIVE).ln(),
        FamilyKind::Pareto { .. } => -gamma(n, gamma_rate(fam, post)?, rng)?.max(f64::MIN_POSITIVE) - 1.0,
        // u = λ^k = -θ
        FamilyKind::Weibull { .. } => -gamma(n, gamma_rate(fam, post)?, rng)?.max(f64::MIN_POSITIVE),
    };
    Ok(NaturalParam(theta))
}

/// Random-walk Metropolis settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhConfig {
    /// Steps per adaptation round and per final burn-in.
    pub burn_in: usize,
    /// Proposal scale in units of the posterior's curvature at the start point.
    pub step_scale: f64,
    pub max_adapt_rounds: usize,
}

impl Default for MhConfig {
    fn default() -> Self {
        MhConfig {
            burn_in: 100,
            step_scale: 2.4,
            max_adapt_rounds: 3,
        }
    }
}

impl MhConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in < 1 {
            return Err(Error::Config("MH burn_in must be >= 1".into()));
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return Err(Error::Config(format!("MH step_scale must be positive, got {}", self.step_scale)));
        }
        Ok(())
    }
}

/// Maximizer of `θ s − n F(θ)`, pulled inside the domain when `s/n` sits on the
/// edge of the range of F′ (e.g. a Bernoulli arm with no successes).
fn start_point(fam: &FamilyDescriptor, post: &ArmPosterior) -> Result<NaturalParam> {
    let range = fam.grad_range();
    let n = post.n as f64;
    let mut m = if post.n == 0 {
        match (range.lo.is_finite(), range.hi.is_finite()) {
            (true, true) => 0.5 * (range.lo + range.hi),
            (true, false) => range.lo + 1.0,
            (false, true) => range.hi - 1.0,
            (false, false) => 0.0,
        }
    } else {
        post.s / n
    };
    let nudge = 0.5 / (n + 1.0);
    if m <= range.lo {
        m = range.lo + nudge;
        if range.hi.is_finite() {
            m = m.min(0.5 * (range.lo + range.hi));
        }
    }
    if m >= range.hi {
        m = range.hi - nudge;
        if range.lo.is_finite() {
            m = m.max(0.5 * (range.lo + range.hi));
        }
    }
    fam.grad_inverse(m)
}

/// Approximate draw of θ by a fresh random-walk Metropolis chain started at the
/// likelihood maximizer with a Gaussian proposal of scale `step_scale / √(n F″(θ₀))`.
///
/// Each adaptation round runs `burn_in` steps and halves (acceptance < 0.2) or
/// doubles (acceptance > 0.5) the scale; a final `burn_in` steps precede the draw.
pub fn sample_mh<R: Rng + ?Sized>(
    fam: &FamilyDescriptor,
    post: &ArmPosterior,
    cfg: &MhConfig,
    rng: &mut R,
) -> Result<NaturalParam> {
    check_proper(fam, post)?;
    cfg.validate()?;
    let dom = fam.natural_domain();
    let log_target = |t: f64| -> f64 {
        if dom.contains(t) {
            log_posterior_unnorm(fam, post, NaturalParam(t)).unwrap_or(f64::NEG_INFINITY)
        } else {
            f64::NEG_INFINITY
        }
    };

    let theta0 = start_point(fam, post)?;
    let mut current = theta0.0;
    let mut current_lp = log_target(current);
    if !current_lp.is_finite() {
        return Err(Error::State(format!("non-finite log posterior {current_lp} at chain start {current}")));
    }
    let curvature = post.n.max(1) as f64 * fam.hess(theta0)?;
    let mut scale = cfg.step_scale / curvature.sqrt();
    let unit = Normal::new(0.0, 1.0).expect("standard normal");

    let mut run = |steps: usize, scale: f64, current: &mut f64, current_lp: &mut f64| -> Result<usize> {
        let mut accepted = 0;
        for _ in 0..steps {
            let proposal = *current + scale * unit.sample(rng);
            let lp = log_target(proposal);
            if lp.is_nan() {
                return Err(Error::State(format!("non-finite log posterior at {proposal}")));
            }
            let log_u = rng.random::<f64>().ln();
            if log_u < lp - *current_lp {
                *current = proposal;
                *current_lp = lp;
                accepted += 1;
            }
        }
        if !current_lp.is_finite() {
            return Err(Error::State(format!("chain reached non-finite log posterior at {current}")));
        }
        Ok(accepted)
    };

    for _ in 0..cfg.max_adapt_rounds {
        let acc = run(cfg.burn_in, scale, &mut current, &mut current_lp)? as f64 / cfg.burn_in as f64;
        if acc < 0.2 {
            scale *= 0.5;
        } else if acc > 0.5 {
            scale *= 2.0;
        } else {
            break;
        }
    }
    run(cfg.burn_in, scale, &mut current, &mut current_lp)?;
    Ok(NaturalParam(current))
}

/// How posterior draws are produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler {
    Conjugate,
    Mh(MhConfig),
}

/// Source of posterior draws; the bandit loop is generic over it so tests can
/// substitute fixed draws.
pub trait PosteriorSampler {
    fn draw<R: Rng + ?Sized>(&self, arm: usize, fam: &FamilyDescriptor, post: &ArmPosterior, rng: &mut R) -> Result<NaturalParam>;
}

impl PosteriorSampler for Sampler {
    fn draw<R: Rng + ?Sized>(&self, _arm: usize, fam: &FamilyDescriptor, post: &ArmPosterior, rng: &mut R) -> Result<NaturalParam> {
        match self {
            Sampler::Conjugate => sample_conjugate(fam, post, rng),
            Sampler::Mh(cfg) => sample_mh(fam, post, cfg, rng),
        }
    }
}

/// Jeffreys prior mass `∫ₐᵇ √F″(θ) dθ` by composite Simpson quadrature.
pub fn jeffreys_prior_mass(fam: &FamilyDescriptor, a: f64, b: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && a <= b) {
        return Err(Error::domain("interval end", b, format!("finite interval with start {a}")));
    }
    const PANELS: usize = 2000;
    let h = (b - a) / PANELS as f64;
    let f = |t: f64| fam.hess(NaturalParam(t)).map(f64::sqrt);
    let mut acc = f(a)? + f(b)?;
    for i in 1..PANELS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64)?;
    }
    Ok(acc * h / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_statistic;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn update_examples() {
        let b = FamilyDescriptor::bernoulli();
        assert_eq!(ArmPosterior::new().update(&b, 1.0).unwrap(), ArmPosterior::from_stats(1, 1.0));
        let p = FamilyDescriptor::pareto(1.0).unwrap();
        let post = ArmPosterior::from_stats(2, 0.7).update(&p, std::f64::consts::E).unwrap();
        assert_eq!(post.n(), 3);
        assert_relative_eq!(post.s(), 1.7, epsilon = 1e-15);
        let w = FamilyDescriptor::weibull(2.0).unwrap();
        assert_eq!(ArmPosterior::from_stats(1, 4.0).update(&w, 3.0).unwrap(), ArmPosterior::from_stats(2, 13.0));
        assert!(ArmPosterior::new().update(&p, 0.5).is_err());
    }

    #[test]
    fn log_posterior_examples() {
        let b = FamilyDescriptor::bernoulli();
        let v = log_posterior_unnorm(&b, &ArmPosterior::new(), NaturalParam(0.0)).unwrap();
        assert_relative_eq!(v, -(2f64.ln()), epsilon = 1e-15);

        let g = FamilyDescriptor::gaussian(1.0).unwrap();
        let post = ArmPosterior::from_stats(4, 2.0);
        let d = log_posterior_unnorm(&g, &post, NaturalParam(0.5)).unwrap() - log_posterior_unnorm(&g, &post, NaturalParam(0.0)).unwrap();
        assert_relative_eq!(d, 0.5, epsilon = 1e-15);

        // d/dθ (½θ + 0·θ − e^θ) = 0 at θ = ln ½
        let p = FamilyDescriptor::poisson();
        let post = ArmPosterior::from_stats(1, 0.0);
        let f = |t: f64| log_posterior_unnorm(&p, &post, NaturalParam(t)).unwrap();
        let best = (0..20_001).map(|i| -3.0 + 3.0 * i as f64 / 20_000.0).fold((f64::NAN, f64::NEG_INFINITY), |acc, t| {
            let v = f(t);
            if v > acc.1 {
                (t, v)
            } else {
                acc
            }
        });
        assert!((best.0 - 0.5f64.ln()).abs() < 2e-4);

        assert!(matches!(
            log_posterior_unnorm(&g, &ArmPosterior::new(), NaturalParam(0.0)),
            Err(Error::ImproperPosterior { .. })
        ));
    }

    #[test]
    fn properness_thresholds() {
        assert_eq!(properness_threshold(&FamilyDescriptor::bernoulli()), 0);
        assert_eq!(properness_threshold(&FamilyDescriptor::gaussian(1.0).unwrap()), 1);
        assert_eq!(properness_threshold(&FamilyDescriptor::weibull(2.0).unwrap()), 1);
        assert_eq!(properness_threshold(&FamilyDescriptor::weibull(0.5).unwrap()), 1);
    }

    #[test]
    fn conjugate_bernoulli_is_beta() {
        let b = FamilyDescriptor::bernoulli();
        let post = ArmPosterior::from_stats(3, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws: Vec<f64> = (0..5000)
            .map(|_| b.lambda_from_theta(sample_conjugate(&b, &post, &mut rng).unwrap()).unwrap())
            .collect();
        let beta = Beta::new(2.5, 1.5).unwrap();
        let reference: Vec<f64> = (0..5000).map(|_| beta.sample(&mut rng)).collect();
        assert!(ks_statistic(&draws, &reference) < 0.05);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 2.5 / 4.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn conjugate_poisson_is_gamma() {
        let p = FamilyDescriptor::poisson();
        let post = ArmPosterior::from_stats(4, 7.0);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let draws: Vec<f64> = (0..20_000)
            .map(|_| p.lambda_from_theta(sample_conjugate(&p, &post, &mut rng).unwrap()).unwrap())
            .collect();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // Gamma(7.5, rate 4): mean 1.875, variance 0.46875
        assert!((mean - 1.875).abs() < 4.0 * (0.46875f64 / n).sqrt(), "{mean}");
        assert!((var - 0.46875).abs() < 0.03, "{var}");
    }

    #[test]
    fn conjugate_weibull_matches_numeric_normalization() {
        // prior × likelihood in θ, normalized on a grid, against u = -θ ~ Gamma(3, 5)
        let w = FamilyDescriptor::weibull(2.0).unwrap();
        let post = ArmPosterior::from_stats(3, 5.0);
        let grid: Vec<f64> = (1..=40_000).map(|i| -(i as f64) * 5e-4).collect();
        let dens: Vec<f64> = grid
            .iter()
            .map(|&t| log_posterior_unnorm(&w, &post, NaturalParam(t)).unwrap().exp())
            .collect();
        let z: f64 = dens.iter().sum();
        let numeric_mean_u: f64 = grid.iter().zip(&dens).map(|(t, d)| -t * d).sum::<f64>() / z;
        assert_relative_eq!(numeric_mean_u, 3.0 / 5.0, max_relative = 1e-4);

        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let draws: Vec<f64> = (0..5000).map(|_| -sample_conjugate(&w, &post, &mut rng).unwrap().0).collect();
        // CDF of the grid density at sorted draws, vs uniform order statistics
        let mut cdf_pts: Vec<(f64, f64)> = Vec::new();
        let mut acc = 0.0;
        for (t, d) in grid.iter().zip(&dens) {
            acc += d / z;
            cdf_pts.push((-t, acc));
        }
        let cdf = |u: f64| -> f64 {
            match cdf_pts.binary_search_by(|p| p.0.partial_cmp(&u).unwrap()) {
                Ok(i) => cdf_pts[i].1,
                Err(0) => 0.0,
                Err(i) => cdf_pts[i - 1].1,
            }
        };
        let mut sorted = draws.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len() as f64;
        let d = sorted
            .iter()
            .enumerate()
            .map(|(i, &u)| {
                let c = cdf(u);
                (c - i as f64 / n).abs().max((c - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 0.03, "KS vs numeric posterior {d}");
    }

    #[test]
    fn mh_matches_conjugate_bernoulli() {
        let b = FamilyDescriptor::bernoulli();
        let post = ArmPosterior::from_stats(3, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cfg = MhConfig::default();
        let mh: Vec<f64> = (0..5000).map(|_| sample_mh(&b, &post, &cfg, &mut rng).unwrap().0).collect();
        let cj: Vec<f64> = (0..5000).map(|_| sample_conjugate(&b, &post, &mut rng).unwrap().0).collect();
        assert!(ks_statistic(&mh, &cj) < 0.05);
    }

    #[test]
    fn mh_gaussian_mean() {
        let g = FamilyDescriptor::gaussian(1.0).unwrap();
        let post = ArmPosterior::from_stats(10, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let cfg = MhConfig::default();
        let draws: Vec<f64> = (0..5000).map(|_| sample_mh(&g, &post, &cfg, &mut rng).unwrap().0).collect();
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((m - 0.5).abs() < 0.05, "{m}");
    }

    #[test]
    fn mh_rejects_improper_state() {
        let g = FamilyDescriptor::gaussian(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let err = sample_mh(&g, &ArmPosterior::new(), &MhConfig::default(), &mut rng).unwrap_err();
        assert!(err.to_string().contains("posterior improper"));
        assert!(sample_conjugate(&g, &ArmPosterior::new(), &mut rng).is_err());
    }

    #[test]
    fn mh_handles_boundary_statistics() {
        // zero successes and zero Poisson counts put s/n on the edge of F'
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let cfg = MhConfig::default();
        let b = FamilyDescriptor::bernoulli();
        for post in [ArmPosterior::new(), ArmPosterior::from_stats(5, 0.0), ArmPosterior::from_stats(5, 5.0)] {
            assert!(sample_mh(&b, &post, &cfg, &mut rng).unwrap().0.is_finite());
        }
        let p = FamilyDescriptor::poisson();
        assert!(sample_mh(&p, &ArmPosterior::from_stats(3, 0.0), &cfg, &mut rng).unwrap().0.is_finite());
    }

    #[test]
    fn posterior_concentrates_at_root_n() {
        let fams = [
            (FamilyDescriptor::bernoulli(), 0.3),
            (FamilyDescriptor::poisson(), 2.0),
            (FamilyDescriptor::pareto(1.0).unwrap(), 3.0),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for (fam, lam) in fams {
            let theta = fam.param_from_lambda(lam).unwrap();
            let g = fam.grad(theta).unwrap();
            let sd = |n: u64, rng: &mut ChaCha8Rng| {
                let post = ArmPosterior::from_stats(n, n as f64 * g);
                let xs: Vec<f64> = (0..20_000)
                    .map(|_| fam.mean_extended(sample_conjugate(&fam, &post, rng).unwrap()).unwrap())
                    .collect();
                let m = xs.iter().sum::<f64>() / xs.len() as f64;
                (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
            };
            let ratio = sd(100, &mut rng) / sd(400, &mut rng);
            assert!((1.6..=2.5).contains(&ratio), "{fam}: {ratio}");
        }
    }

    #[test]
    fn prior_mass_quadrature() {
        // Gaussian: √F″ = σ, mass is σ·width
        let g = FamilyDescriptor::gaussian(4.0).unwrap();
        assert_relative_eq!(jeffreys_prior_mass(&g, -1.0, 2.0).unwrap(), 6.0, epsilon = 1e-12);
        // Bernoulli: ∫ √(σ(1-σ)) dθ = 2 asin(√λ) in λ; whole line gives π
        let b = FamilyDescriptor::bernoulli();
        let (a, c) = (-1.0, 2.0);
        let oracle = 2.0 * (b.lambda_from_theta(NaturalParam(c)).unwrap().sqrt().asin() - b.lambda_from_theta(NaturalParam(a)).unwrap().sqrt().asin());
        assert_relative_eq!(jeffreys_prior_mass(&b, a, c).unwrap(), oracle, max_relative = 1e-10);
    }
}
