//! wasm-bindgen entry points for the static page in `www/`.
//!
//! Each export takes plain numbers and strings and returns a JSON document; the
//! `*_json` functions behind them are ordinary Rust and are what the tests call.

use expfam_ts::bandit::{lai_robbins_coefficient, run_batch, BanditInstance, PolicyKind};
use expfam_ts::cli::{checkpoints, ArmSpec};
use expfam_ts::exp_family::{FamilyDescriptor, NaturalParam};
use expfam_ts::posterior::{sample_conjugate, sample_mh, ArmPosterior, MhConfig};
use expfam_ts::rng;
use expfam_ts::stats::ks_statistic;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

const MAX_POINTS: usize = 2000;
const MAX_DRAWS: usize = 20_000;
const MAX_WORK: usize = 2_000_000;

type Out = Result<Value, String>;

fn err(e: impl ToString) -> String {
    e.to_string()
}

/// K(θ, ·) on a grid around θ and the Chernoff rate K̃(θ, δ) on a grid of δ.
pub fn kl_profile_json(family: &str, lambda: f64, points: usize) -> Out {
    let fam: FamilyDescriptor = family.parse().map_err(err)?;
    let theta = fam.param_from_lambda(lambda).map_err(err)?;
    let points = points.clamp(10, MAX_POINTS);
    let sd = fam.hess(theta).map_err(err)?.sqrt();
    let width = 4.0 / sd;
    let dom = fam.natural_domain();
    let (lo, hi) = ((theta.0 - width).max(dom.lo), (theta.0 + width).min(dom.hi));
    let mut grid = Vec::new();
    let mut kl = Vec::new();
    for i in 1..points {
        let t = lo + (hi - lo) * i as f64 / points as f64;
        if let Ok(k) = fam.kl(theta, NaturalParam(t)) {
            grid.push(t);
            kl.push(k);
        }
    }
    let mut deltas = Vec::new();
    let mut rates = Vec::new();
    for i in 1..=points / 4 {
        let d = 2.0 * sd * i as f64 / (points / 4) as f64;
        if let Ok(r) = fam.chernoff_rate(theta, d) {
            deltas.push(d);
            rates.push(r);
        }
    }
    Ok(json!({
        "family": fam.to_string(),
        "theta": theta.0,
        "mean": fam.mean(theta).map_err(err)?,
        "theta_grid": grid,
        "kl": kl,
        "delta": deltas,
        "chernoff": rates,
    }))
}

fn histogram(a: &[f64], b: &[f64], bins: usize) -> (Vec<f64>, Vec<usize>, Vec<usize>) {
    let finite = a.iter().chain(b).copied().filter(|x| x.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(x), h.max(x)));
    let w = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
    let count = |xs: &[f64]| {
        let mut c = vec![0; bins];
        for &x in xs.iter().filter(|x| x.is_finite()) {
            c[(((x - lo) / w) as usize).min(bins - 1)] += 1;
        }
        c
    };
    let edges = (0..=bins).map(|i| lo + w * i as f64).collect();
    (edges, count(a), count(b))
}

/// Posterior of the mean after `n` observations from the arm `family@lambda`,
/// drawn by the conjugate sampler and by Metropolis, with the KS distance.
pub fn posterior_histogram_json(family: &str, lambda: f64, n: u32, draws: usize, seed: u64) -> Out {
    let fam: FamilyDescriptor = family.parse().map_err(err)?;
    let theta = fam.param_from_lambda(lambda).map_err(err)?;
    let draws = draws.clamp(100, MAX_DRAWS);
    let mut data_rng = rng::stream(seed, rng::TAG_REWARD, 0);
    let mut post = ArmPosterior::new();
    for _ in 0..n.max(1) {
        post = post.update(&fam, fam.sample_reward(theta, &mut data_rng)).map_err(err)?;
    }
    let mut rc = rng::stream(seed, rng::TAG_DRAW, 0);
    let mut rm = rng::stream(seed, rng::TAG_DRAW, 1);
    let cfg = MhConfig::default();
    let mut conj = Vec::with_capacity(draws);
    let mut mh = Vec::with_capacity(draws);
    for _ in 0..draws {
        conj.push(fam.mean_extended(sample_conjugate(&fam, &post, &mut rc).map_err(err)?).map_err(err)?);
        mh.push(fam.mean_extended(sample_mh(&fam, &post, &cfg, &mut rm).map_err(err)?).map_err(err)?);
    }
    let (edges, c_conj, c_mh) = histogram(&conj, &mh, 40);
    Ok(json!({
        "family": fam.to_string(),
        "true_mean": fam.mean(theta).map_err(err)?,
        "n": post.n(),
        "s": post.s(),
        "edges": edges,
        "conjugate": c_conj,
        "mh": c_mh,
        "ks": ks_statistic(&conj, &mh),
    }))
}

/// Mean pseudo-regret of TS-Jeffreys, UCB1 and KL-UCB on the same seeds at
/// log-spaced checkpoints, with the Lai-Robbins line `c ln T`.
pub fn regret_race_json(arms: &str, horizon: usize, runs: usize, seed: u64) -> Out {
    let arms: Vec<(FamilyDescriptor, f64)> = arms
        .split(';')
        .filter(|a| !a.trim().is_empty())
        .map(|a| a.parse::<ArmSpec>().map(|s| (s.fam, s.lambda)))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let instance = BanditInstance::from_lambdas(&arms).map_err(err)?;
    let runs = runs.max(1);
    if horizon.saturating_mul(runs) > MAX_WORK {
        return Err(format!("horizon x runs is limited to {MAX_WORK} in the browser"));
    }
    let ts = t_grid(horizon);
    let lr = lai_robbins_coefficient(&instance).ok();
    let policies = [
        ("ts-jeffreys", PolicyKind::ts()),
        ("ucb1", PolicyKind::Ucb1 { exploration_c: 1.0 }),
        ("kl-ucb", PolicyKind::KlUcb { horizon_aware: false }),
    ];
    let mut curves = serde_json::Map::new();
    for (name, policy) in policies {
        let traces = run_batch(&instance, &policy, horizon, runs, seed).map_err(err)?;
        let mean: Vec<f64> = ts
            .iter()
            .map(|&t| traces.iter().map(|tr| tr.regret_at(t)).sum::<f64>() / runs as f64)
            .collect();
        curves.insert(name.into(), json!(mean));
    }
    let lr_line: Option<Vec<f64>> = lr.map(|c| ts.iter().map(|&t| c * (t as f64).ln()).collect());
    Ok(json!({
        "t": ts,
        "curves": curves,
        "lai_robbins": lr,
        "lai_robbins_line": lr_line,
        "best_arm": instance.best_arm(),
    }))
}

fn t_grid(horizon: usize) -> Vec<usize> {
    // the CLI's quarter-decade checkpoints are too sparse for a plot; use twentieths
    let mut out: Vec<usize> = (1..)
        .map(|j| (10f64.powf(j as f64 / 20.0)).ceil() as usize)
        .take_while(|&t| t < horizon)
        .collect();
    out.dedup();
    out.push(horizon);
    if out.len() < 2 {
        return checkpoints(horizon);
    }
    out
}

#[wasm_bindgen]
pub fn kl_profile(family: &str, lambda: f64, points: usize) -> Result<String, String> {
    kl_profile_json(family, lambda, points).map(|v| v.to_string())
}

#[wasm_bindgen]
pub fn posterior_histogram(family: &str, lambda: f64, n: u32, draws: usize, seed: u64) -> Result<String, String> {
    posterior_histogram_json(family, lambda, n, draws, seed).map(|v| v.to_string())
}

#[wasm_bindgen]
pub fn regret_race(arms: &str, horizon: usize, runs: usize, seed: u64) -> Result<String, String> {
    regret_race_json(arms, horizon, runs, seed).map(|v| v.to_string())
}

#[wasm_bindgen]
pub fn family_grammars() -> String {
    expfam_ts::cli::family_grammars().join("\n")
}
