//! Bandit environments, policies and regret accounting.
//!
//! An episode owns one reward stream and one posterior-draw stream per arm, both
//! keyed by the arm's stream id, plus a policy stream used only to break ties.
//! Relabeling arms together with their stream ids therefore relabels the trace.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::exp_family::{FamilyDescriptor, NaturalParam};
use crate::posterior::{properness_threshold, ArmPosterior, MhConfig, PosteriorSampler, Sampler};
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    arms: Vec<(FamilyDescriptor, NaturalParam)>,
    means: Vec<f64>,
    best: usize,
}

impl BanditInstance {
    pub fn new(arms: Vec<(FamilyDescriptor, NaturalParam)>) -> Result<Self> {
        if arms.len() < 2 {
            return Err(Error::Config(format!("a bandit needs at least 2 arms, got {}", arms.len())));
        }
        let mut means = Vec::with_capacity(arms.len());
        for (fam, theta) in &arms {
            means.push(fam.mean(*theta)?);
        }
        let best_mean = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<usize> = (0..means.len()).filter(|&a| means[a] == best_mean).collect();
        if winners.len() != 1 {
            return Err(Error::Config(format!("best arm is not unique: arms {winners:?} share mean {best_mean}")));
        }
        Ok(BanditInstance {
            arms,
            means,
            best: winners[0],
        })
    }

    /// Arms given in each family's conventional parameter.
    pub fn from_lambdas(arms: &[(FamilyDescriptor, f64)]) -> Result<Self> {
        let arms = arms
            .iter()
            .map(|(fam, lam)| Ok((*fam, fam.param_from_lambda(*lam)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(arms)
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn arms(&self) -> &[(FamilyDescriptor, NaturalParam)] {
        &self.arms
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn best_arm(&self) -> usize {
        self.best
    }

    pub fn gaps(&self) -> Vec<f64> {
        let best = self.means[self.best];
        self.means.iter().map(|m| best - m).collect()
    }

    /// Same environment with arm `i` of the result equal to arm `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        Self::new(perm.iter().map(|&i| self.arms[i]).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    TsJeffreys { sampler: Sampler },
    Ucb1 { exploration_c: f64 },
    KlUcb { horizon_aware: bool },
}

impl PolicyKind {
    pub fn ts() -> Self {
        PolicyKind::TsJeffreys { sampler: Sampler::Conjugate }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PolicyKind::TsJeffreys { sampler: Sampler::Mh(cfg) } => cfg.validate(),
            PolicyKind::Ucb1 { exploration_c } if !(*exploration_c > 0.0 && exploration_c.is_finite()) => {
                Err(Error::Config(format!("UCB1 exploration constant must be positive, got {exploration_c}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::TsJeffreys { sampler: Sampler::Conjugate } => write!(f, "ts-jeffreys"),
            PolicyKind::TsJeffreys { sampler: Sampler::Mh(cfg) } => write!(
                f,
                "ts-jeffreys:sampler=mh,burn_in={},step_scale={:?},adapt_rounds={}",
                cfg.burn_in, cfg.step_scale, cfg.max_adapt_rounds
            ),
            PolicyKind::Ucb1 { exploration_c } => write!(f, "ucb1:c={exploration_c:?}"),
            PolicyKind::KlUcb { horizon_aware } => write!(f, "kl-ucb:horizon_aware={horizon_aware}"),
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    /// `ts-jeffreys[:sampler=conjugate|mh,burn_in=N,step_scale=X,adapt_rounds=N]`,
    /// `ucb1[:c=X]`, `kl-ucb[:horizon_aware=true|false]`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut pairs = Vec::new();
        for pair in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value in policy {s:?}, got {pair:?}")))?;
            pairs.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
        let num = |v: &str| -> Result<f64> { v.parse().map_err(|_| Error::Parse(format!("bad number {v:?} in policy {s:?}"))) };
        let int = |v: &str| -> Result<usize> { v.parse().map_err(|_| Error::Parse(format!("bad integer {v:?} in policy {s:?}"))) };
        let unknown = |k: &str| Error::Parse(format!("unknown key {k:?} for policy {name:?}"));
        let policy = match name.trim().to_ascii_lowercase().as_str() {
            "ts-jeffreys" | "ts" => {
                let mut mh = false;
                let mut cfg = MhConfig::default();
                for (k, v) in &pairs {
                    match k.as_str() {
                        "sampler" => {
                            mh = match v.as_str() {
                                "mh" => true,
                                "conjugate" => false,
                                other => return Err(Error::Parse(format!("unknown sampler {other:?}"))),
                            }
                        }
                        "burn_in" => cfg.burn_in = int(v)?,
                        "step_scale" => cfg.step_scale = num(v)?,
                        "adapt_rounds" => cfg.max_adapt_rounds = int(v)?,
                        _ => return Err(unknown(k)),
                    }
                }
                let sampler = if mh { Sampler::Mh(cfg) } else { Sampler::Conjugate };
                PolicyKind::TsJeffreys { sampler }
            }
            "ucb1" => {
                let mut c = 1.0;
                for (k, v) in &pairs {
                    match k.as_str() {
                        "c" => c = num(v)?,
                        _ => return Err(unknown(k)),
                    }
                }
                PolicyKind::Ucb1 { exploration_c: c }
            }
            "kl-ucb" | "klucb" => {
                let mut horizon_aware = false;
                for (k, v) in &pairs {
                    match k.as_str() {
                        "horizon_aware" => {
                            horizon_aware = v.parse().map_err(|_| Error::Parse(format!("bad flag {v:?}")))?;
                        }
                        _ => return Err(unknown(k)),
                    }
                }
                PolicyKind::KlUcb { horizon_aware }
            }
            other => return Err(Error::Parse(format!("unknown policy {other:?}"))),
        };
        policy.validate()?;
        Ok(policy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub horizon: usize,
    /// Arm pulled at round `t + 1`.
    pub chosen: Vec<usize>,
    pub rewards: Vec<f64>,
    pub pulls: Vec<u64>,
    /// Pseudo-regret `Σ_a (μ* − μ_a) N_{a,t}` after round `t + 1`.
    pub cum_pseudo_regret: Vec<f64>,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        *self.cum_pseudo_regret.last().unwrap_or(&0.0)
    }

    /// Regret after `t` rounds (1-based).
    pub fn regret_at(&self, t: usize) -> f64 {
        self.cum_pseudo_regret[t - 1]
    }
}

/// Per-arm statistics kept by every policy.
#[derive(Debug, Clone, Copy, Default)]
pub struct ArmStats {
    pub post: ArmPosterior,
    pub reward_sum: f64,
}

impl ArmStats {
    pub fn empirical_mean(&self) -> f64 {
        self.reward_sum / self.post.n() as f64
    }
}

/// Index of a maximum of `values`, uniform among exact ties. Draws from `rng`
/// only when there is a tie.
pub fn argmax_uniform<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> usize {
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
    match ties.len() {
        0 => 0,
        1 => ties[0],
        n => ties[rng.random_range(0..n)],
    }
}

/// One Thompson Sampling decision: a posterior draw per arm, then the arm whose
/// draw has the largest mean. Draws with infinite mean (Pareto λ <= 1) rank first.
pub fn ts_step<S, R>(
    instance: &BanditInstance,
    states: &[ArmPosterior],
    sampler: &S,
    draw_rngs: &mut [R],
    tie_rng: &mut R,
) -> Result<usize>
where
    S: PosteriorSampler,
    R: Rng,
{
    let mut scores = Vec::with_capacity(states.len());
    for (a, ((fam, _), post)) in instance.arms().iter().zip(states).enumerate() {
        if post.n() < properness_threshold(fam) {
            return Err(Error::State(format!("arm {a} sampled before initialization (n = {})", post.n())));
        }
        let theta = sampler.draw(a, fam, post, &mut draw_rngs[a])?;
        scores.push(fam.mean_extended(theta)?);
    }
    Ok(argmax_uniform(&scores, tie_rng))
}

/// UCB1: empirical mean plus `c √(2 ln t / N_a)`.
pub fn ucb_step<R: Rng + ?Sized>(stats: &[ArmStats], t: usize, exploration_c: f64, tie_rng: &mut R) -> usize {
    let log_t = (t as f64).ln();
    let idx: Vec<f64> = stats
        .iter()
        .map(|s| s.empirical_mean() + exploration_c * (2.0 * log_t / s.post.n() as f64).sqrt())
        .collect();
    argmax_uniform(&idx, tie_rng)
}

/// Largest mean `m` with `n K(μ⁻¹(m̂), μ⁻¹(m)) <= level`, by bisection in `m`.
pub fn klucb_index(fam: &FamilyDescriptor, empirical_mean: f64, n: u64, level: f64) -> Result<f64> {
    let dom = fam.mean_domain();
    let edge = |x: f64| 1e-9 * x.abs().max(1.0);
    let mut m_hat = empirical_mean;
    if m_hat <= dom.lo {
        m_hat = dom.lo + edge(dom.lo);
    }
    if m_hat >= dom.hi {
        m_hat = dom.hi - edge(dom.hi);
    }
    let theta_hat = fam.mean_inverse(m_hat)?;
    let n = n as f64;
    let excess = |m: f64| -> Result<f64> { Ok(n * fam.kl(theta_hat, fam.mean_inverse(m)?)? - level) };

    let lo = m_hat;
    let mut hi = dom.hi;
    if !hi.is_finite() {
        let mut step = m_hat.abs().max(1.0);
        hi = m_hat + step;
        let mut iters = 0;
        while excess(hi)? <= 0.0 {
            step *= 2.0;
            hi = m_hat + step;
            iters += 1;
            if iters > 200 {
                return Ok(f64::INFINITY);
            }
        }
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

pub fn klucb_step<R: Rng + ?Sized>(
    instance: &BanditInstance,
    stats: &[ArmStats],
    level: f64,
    tie_rng: &mut R,
) -> Result<usize> {
    let idx = instance
        .arms()
        .iter()
        .zip(stats)
        .map(|((fam, _), s)| klucb_index(fam, s.empirical_mean(), s.post.n(), level))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmax_uniform(&idx, tie_rng))
}

/// One episode with stream ids `0..K`.
pub fn run_episode(instance: &BanditInstance, policy: &PolicyKind, horizon: usize, seed: u64) -> Result<RegretTrace> {
    let ids: Vec<u64> = (0..instance.k() as u64).collect();
    run_episode_with_streams(instance, policy, horizon, seed, &ids)
}

/// One episode where arm `a` reads its rewards and posterior draws from streams
/// keyed by `stream_ids[a]`.
pub fn run_episode_with_streams(
    instance: &BanditInstance,
    policy: &PolicyKind,
    horizon: usize,
    seed: u64,
    stream_ids: &[u64],
) -> Result<RegretTrace> {
    let k = instance.k();
    if horizon < k {
        return Err(Error::Config(format!("horizon {horizon} is shorter than the number of arms {k}")));
    }
    if stream_ids.len() != k {
        return Err(Error::Config(format!("{} stream ids for {k} arms", stream_ids.len())));
    }
    policy.validate()?;
    let mut reward_rngs: Vec<StreamRng> = stream_ids.iter().map(|&i| rng::stream(seed, rng::TAG_REWARD, i)).collect();
    let mut draw_rngs: Vec<StreamRng> = stream_ids.iter().map(|&i| rng::stream(seed, rng::TAG_DRAW, i)).collect();
    let mut tie_rng = rng::stream(seed, rng::TAG_POLICY, 0);

    let gaps = instance.gaps();
    let mut stats = vec![ArmStats::default(); k];
    let mut trace = RegretTrace {
        horizon,
        chosen: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
        pulls: vec![0; k],
        cum_pseudo_regret: Vec::with_capacity(horizon),
    };
    let mut posts = vec![ArmPosterior::new(); k];

    for t in 1..=horizon {
        let arm = if t <= k {
            t - 1
        } else {
            match policy {
                PolicyKind::TsJeffreys { sampler } => ts_step(instance, &posts, sampler, &mut draw_rngs, &mut tie_rng)?,
                PolicyKind::Ucb1 { exploration_c } => ucb_step(&stats, t, *exploration_c, &mut tie_rng),
                PolicyKind::KlUcb { horizon_aware } => {
                    let level = if *horizon_aware { (horizon as f64).ln() } else { (t as f64).ln() };
                    klucb_step(instance, &stats, level, &mut tie_rng)?
                }
            }
        };
        let (fam, theta) = instance.arms()[arm];
        let x = fam.sample_reward(theta, &mut reward_rngs[arm]);
        let post = posts[arm].update(&fam, x)?;
        posts[arm] = post;
        stats[arm].post = post;
        stats[arm].reward_sum += x;
        trace.pulls[arm] += 1;
        trace.chosen.push(arm);
        trace.rewards.push(x);
        let regret: f64 = gaps.iter().zip(&trace.pulls).map(|(g, &n)| g * n as f64).sum();
        trace.cum_pseudo_regret.push(regret);
    }
    Ok(trace)
}

/// Episodes for runs `0..runs`, seeded from `master_seed`, in run order.
pub fn run_batch(
    instance: &BanditInstance,
    policy: &PolicyKind,
    horizon: usize,
    runs: usize,
    master_seed: u64,
) -> Result<Vec<RegretTrace>> {
    let one = |r: usize| run_episode(instance, policy, horizon, rng::run_seed(master_seed, r as u64));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..runs).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..runs).map(one).collect()
    }
}

/// `Σ_{a ≠ a*} (μ* − μ_a) / K(θ_a, θ*)`, the optimal asymptotic regret per `ln T`.
pub fn lai_robbins_coefficient(instance: &BanditInstance) -> Result<f64> {
    let (best_fam, best_theta) = instance.arms()[instance.best_arm()];
    let best_mean = instance.means()[instance.best_arm()];
    let mut total = 0.0;
    for (a, (fam, theta)) in instance.arms().iter().enumerate() {
        if *fam != best_fam {
            return Err(Error::Config(format!(
                "Lai-Robbins coefficient needs a single family, arm {a} is {fam} but the best arm is {best_fam}"
            )));
        }
        if a == instance.best_arm() {
            continue;
        }
        total += (best_mean - instance.means()[a]) / fam.kl(*theta, best_theta)?;
    }
    Ok(total)
}
