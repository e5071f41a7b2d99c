//! Monte Carlo checks of the concentration results behind Thompson Sampling's
//! optimality: tails of the empirical sufficient statistic against
//! `2 exp(−u K̃(θ, δ))`, and posterior tails conditioned on the event Ẽ against
//! the rate `(1 − δ C₂) K(θ, μ⁻¹(μ + Δ))`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::exp_family::{FamilyDescriptor, NaturalParam};
use crate::posterior::{sample_conjugate, ArmPosterior};
use crate::rng;
use crate::stats::ls_slope;

/// Slack on `|dev| >= δ` so lattice points sitting exactly at δ count as deviations.
const DEVIATION_SLACK: f64 = 1e-12;

/// Smallest passing fraction of datasets accepted by the posterior experiment.
pub const MIN_EVENT_FRACTION: f64 = 0.1;

/// Posterior draws per retained dataset in the posterior experiment.
pub const DEFAULT_POSTERIOR_DRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct LabConfig {
    pub fam: FamilyDescriptor,
    pub theta: NaturalParam,
    pub delta: f64,
    /// Mean gap Δ; only the posterior experiment needs it.
    pub gap: Option<f64>,
    pub sample_sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub posterior_draws: usize,
}

impl LabConfig {
    pub fn new(
        fam: FamilyDescriptor,
        theta: NaturalParam,
        delta: f64,
        gap: f64,
        sample_sizes: Vec<usize>,
        trials: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut cfg = Self::tail_only(fam, theta, delta, sample_sizes, trials, seed)?;
        if !(gap > 0.0 && gap.is_finite()) {
            return Err(Error::Config(format!("gap must be positive, got {gap}")));
        }
        let target = fam.mean(theta)? + gap;
        if !fam.mean_domain().contains(target) {
            return Err(Error::Config(format!(
                "mu(theta) + gap = {target} is outside the mean domain {}",
                fam.mean_domain()
            )));
        }
        let c2 = c2_constant(&fam, theta, gap)?;
        if 1.0 - delta * c2 <= 0.0 {
            return Err(Error::Config(format!(
                "admissibility 1 − δC₂ > 0 violated: δ = {delta}, C₂ = {c2}, 1 − δC₂ = {}",
                1.0 - delta * c2
            )));
        }
        cfg.gap = Some(gap);
        Ok(cfg)
    }

    /// Configuration for the sufficient-statistic experiment alone, with no gap
    /// and hence no admissibility condition.
    pub fn tail_only(
        fam: FamilyDescriptor,
        theta: NaturalParam,
        delta: f64,
        sample_sizes: Vec<usize>,
        trials: usize,
        seed: u64,
    ) -> Result<Self> {
        fam.param(theta.0)?;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("delta must be positive, got {delta}")));
        }
        if sample_sizes.is_empty() || sample_sizes.contains(&0) {
            return Err(Error::Config("sample sizes must be a non-empty list of positive integers".into()));
        }
        if trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        Ok(LabConfig {
            fam,
            theta,
            delta,
            gap: None,
            sample_sizes,
            trials,
            seed,
            posterior_draws: DEFAULT_POSTERIOR_DRAWS,
        })
    }

    pub fn with_posterior_draws(mut self, draws: usize) -> Result<Self> {
        if draws == 0 {
            return Err(Error::Config("posterior_draws must be positive".into()));
        }
        self.posterior_draws = draws;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub u: usize,
    pub empirical_prob: f64,
    /// Upper bound (sufficient-statistic experiment) or decay rate (posterior experiment).
    pub bound: f64,
    /// Datasets that entered the estimate.
    pub trials_used: usize,
    /// Fraction of generated datasets satisfying the conditioning event (1 when unconditioned).
    pub passed_fraction: f64,
}

impl TailEstimate {
    /// `empirical <= bound + 3 √(bound / trials)`.
    pub fn within_bound(&self) -> bool {
        self.empirical_prob <= self.bound + 3.0 * (self.bound / self.trials_used as f64).sqrt()
    }
}

/// `C₂(F, θ, Δ) = [ (F(θ_Δ) − F(θ)) / (θ_Δ − θ) − F′(θ) ]⁻¹` with `θ_Δ = μ⁻¹(μ(θ) + Δ)`.
pub fn c2_constant(fam: &FamilyDescriptor, theta: NaturalParam, gap: f64) -> Result<f64> {
    let target = fam.mean(theta)? + gap;
    let theta_gap = fam.mean_inverse(target)?;
    let chord = (fam.log_partition(theta_gap)? - fam.log_partition(theta)?) / (theta_gap.0 - theta.0);
    let inv = chord - fam.grad(theta)?;
    if inv > 0.0 {
        Ok(1.0 / inv)
    } else {
        Err(Error::State(format!("chord-minus-slope {inv} is not positive for gap {gap}")))
    }
}

/// Decay rate `(1 − δ C₂) K(θ, μ⁻¹(μ + Δ))`.
pub fn posterior_rate(fam: &FamilyDescriptor, theta: NaturalParam, delta: f64, gap: f64) -> Result<f64> {
    let c2 = c2_constant(fam, theta, gap)?;
    let theta_gap = fam.mean_inverse(fam.mean(theta)? + gap)?;
    Ok((1.0 - delta * c2) * fam.kl(theta, theta_gap)?)
}

/// KL ball `{θ′ : K(θ, θ′) <= ε}` as an interval, endpoints clamped to the parameter domain.
pub fn kl_ball(fam: &FamilyDescriptor, theta: NaturalParam, eps: f64) -> Result<(f64, f64)> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::domain("epsilon", eps, "(0, inf)"));
    }
    let dom = fam.theta_domain();
    let k = |t: f64| fam.kl(theta, NaturalParam(t)).unwrap_or(f64::INFINITY);
    // walk outward from θ until K exceeds ε or the domain edge stalls the walk
    let side = |dir: f64| -> f64 {
        let edge = if dir > 0.0 { dom.hi } else { dom.lo };
        let mut inner = theta.0;
        let mut step = 1.0;
        let mut outer = None;
        for _ in 0..200 {
            let mut next = inner + dir * step;
            if edge.is_finite() && (next - edge) * dir >= 0.0 {
                next = inner + 0.5 * (edge - inner);
            }
            if next == inner {
                break;
            }
            if k(next) > eps {
                outer = Some(next);
                break;
            }
            inner = next;
            step *= 2.0;
        }
        let Some(mut outer) = outer else {
            return edge;
        };
        for _ in 0..200 {
            let mid = 0.5 * (inner + outer);
            if mid == inner || mid == outer || (outer - inner).abs() <= 1e-12 * mid.abs().max(1.0) * 1e-3 {
                break;
            }
            if k(mid) <= eps {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        inner
    };
    Ok((side(-1.0), side(1.0)))
}

/// Index `s′` witnessing Ẽ: `p(y_{s′} | θ) >= L(θ)` and the mean of T over the
/// other points within δ of F′(θ). Scans `s′` in order.
pub fn event_witness(fam: &FamilyDescriptor, theta: NaturalParam, delta: f64, data: &[f64]) -> Result<Option<usize>> {
    if data.is_empty() {
        return Err(Error::Config("event check needs at least one observation".into()));
    }
    if data.len() < 2 {
        return Ok(None);
    }
    let level = fam.likely_level(theta)?;
    let center = fam.grad(theta)?;
    let stats = data.iter().map(|&x| fam.suff_stat(x)).collect::<Result<Vec<_>>>()?;
    let total: f64 = stats.iter().sum();
    let rest = (data.len() - 1) as f64;
    for (i, &x) in data.iter().enumerate() {
        if fam.log_density(theta, x)? < level.ln() {
            continue;
        }
        if ((total - stats[i]) / rest - center).abs() <= delta {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

pub fn event_check(fam: &FamilyDescriptor, theta: NaturalParam, delta: f64, data: &[f64]) -> Result<bool> {
    Ok(event_witness(fam, theta, delta, data)?.is_some())
}

/// Run `trials` independent jobs, each with its own stream, and sum their counts.
fn sum_over_trials<F>(seed: u64, tag: u64, trials: usize, job: F) -> Result<(u64, u64)>
where
    F: Fn(&mut rng::StreamRng) -> Result<(u64, u64)> + Sync,
{
    let one = |i: usize| {
        let mut r = rng::stream(seed, rng::TAG_TRIAL ^ tag, i as u64);
        job(&mut r)
    };
    let add = |a: (u64, u64), b: (u64, u64)| (a.0 + b.0, a.1 + b.1);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(one).try_reduce(|| (0, 0), |a, b| Ok(add(a, b)))
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials).map(one).try_fold((0, 0), |acc, r| r.map(|b| add(acc, b)))
    }
}

fn mean_suff_stat_deviation<R: Rng>(fam: &FamilyDescriptor, theta: NaturalParam, u: usize, rng: &mut R) -> f64 {
    let sum: f64 = (0..u)
        .map(|_| fam.suff_stat_unchecked(fam.sample_reward(theta, rng)))
        .sum();
    sum / u as f64
}

/// For each `u`, the frequency of `|mean of T over u draws − F′(θ)| >= δ` over
/// `trials` datasets, with bound `2 exp(−u K̃(θ, δ))`.
pub fn suffstat_tail_experiment(cfg: &LabConfig) -> Result<Vec<TailEstimate>> {
    let fam = cfg.fam;
    let theta = cfg.theta;
    let center = fam.grad(theta)?;
    let rate = fam.chernoff_rate(theta, cfg.delta)?;
    let threshold = cfg.delta - DEVIATION_SLACK * center.abs().max(1.0);
    cfg.sample_sizes
        .iter()
        .map(|&u| {
            let (hits, _) = sum_over_trials(cfg.seed, u as u64, cfg.trials, |r| {
                let m = mean_suff_stat_deviation(&fam, theta, u, r);
                Ok((((m - center).abs() >= threshold) as u64, 0))
            })?;
            Ok(TailEstimate {
                u,
                empirical_prob: hits as f64 / cfg.trials as f64,
                bound: 2.0 * (-(u as f64) * rate).exp(),
                trials_used: cfg.trials,
                passed_fraction: 1.0,
            })
        })
        .collect()
}

/// For each `u`: draw datasets of size `u`, keep those satisfying Ẽ, and average
/// the posterior probability of `μ(θ′) > μ(θ) + Δ` estimated with
/// `posterior_draws` conjugate draws. `bound` carries the predicted decay rate.
pub fn posterior_tail_experiment(cfg: &LabConfig) -> Result<Vec<TailEstimate>> {
    let fam = cfg.fam;
    let theta = cfg.theta;
    let gap = cfg
        .gap
        .ok_or_else(|| Error::Config("the posterior experiment needs a gap".into()))?;
    let cut = fam.mean(theta)? + gap;
    let rate = posterior_rate(&fam, theta, cfg.delta, gap)?;
    let draws = cfg.posterior_draws;
    cfg.sample_sizes
        .iter()
        .map(|&u| {
            let (kept, exceed) = sum_over_trials(cfg.seed, (1 << 32) | u as u64, cfg.trials, |r| {
                let data: Vec<f64> = (0..u).map(|_| fam.sample_reward(theta, r)).collect();
                if !event_check(&fam, theta, cfg.delta, &data)? {
                    return Ok((0, 0));
                }
                let post = data
                    .iter()
                    .try_fold(ArmPosterior::new(), |p, &x| p.update(&fam, x))?;
                let mut count = 0u64;
                for _ in 0..draws {
                    if fam.mean_extended(sample_conjugate(&fam, &post, r)?)? > cut {
                        count += 1;
                    }
                }
                Ok((1, count))
            })?;
            let passed = kept as f64 / cfg.trials as f64;
            if passed < MIN_EVENT_FRACTION {
                return Err(Error::Config(format!(
                    "only {:.1}% of datasets of size {u} satisfy the conditioning event; use a larger delta",
                    100.0 * passed
                )));
            }
            Ok(TailEstimate {
                u,
                empirical_prob: exceed as f64 / (kept as f64 * draws as f64),
                bound: rate,
                trials_used: kept as usize,
                passed_fraction: passed,
            })
        })
        .collect()
}

/// Least-squares slope of `−ln(tail)` against `u`, over estimates resolved by at
/// least ten exceedances (`tail >= 10 / (datasets × draws)`).
pub fn fit_decay_slope(estimates: &[TailEstimate], draws_per_dataset: usize) -> Option<f64> {
    let points: Vec<(f64, f64)> = estimates
        .iter()
        .filter(|e| e.empirical_prob > 0.0 && e.empirical_prob >= 10.0 / (e.trials_used as f64 * draws_per_dataset as f64))
        .map(|e| (e.u as f64, -e.empirical_prob.ln()))
        .collect();
    ls_slope(&points)
}

/// Families and parameters used by the default sufficient-statistic grid, each
/// with three deviations δ at ¼, ½ and 1 standard deviation of T.
pub fn default_tail_grid() -> Vec<(FamilyDescriptor, NaturalParam, [f64; 3])> {
    let entries = [
        (FamilyDescriptor::bernoulli(), 0.3),
        (FamilyDescriptor::gaussian(1.0).expect("valid"), 0.0),
        (FamilyDescriptor::gamma_shape(2.0).expect("valid"), 1.0),
        (FamilyDescriptor::poisson(), 2.0),
        (FamilyDescriptor::pareto(1.0).expect("valid"), 3.0),
        (FamilyDescriptor::weibull(2.0).expect("valid"), 1.0),
    ];
    entries
        .iter()
        .map(|&(fam, lam)| {
            let theta = fam.param_from_lambda(lam).expect("grid parameter in domain");
            let sd = fam.hess(theta).expect("in domain").sqrt();
            (fam, theta, [0.25 * sd, 0.5 * sd, sd])
        })
        .collect()
}
