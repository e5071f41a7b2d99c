//! Experiment specs and the runners behind the `expfam-ts` binary.
//!
//! A spec is a flat `key=value` file. Lines starting with `#` are comments.
//! Values are layered as defaults, then the file, then command-line overrides.
//!
//! ```text
//! command=simulate
//! arms=bernoulli@0.5;bernoulli@0.25
//! policy=ts-jeffreys
//! horizon=20000
//! runs=200
//! seed=7
//! out=results
//! ```
//!
//! Arms are `family@lambda` entries separated by `;`, where `lambda` is the
//! family's conventional parameter (success probability, mean, rate, shape or
//! scale). The concentration keys are `family`, `lambda`, `delta`, `gap`,
//! `sample_sizes` (comma separated), `trials`, `posterior_draws` and
//! `experiment` (`suffstat`, `posterior` or `tail-grid`).

use std::fmt::{self, Write as _};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bandit::{lai_robbins_coefficient, run_batch, BanditInstance, PolicyKind, RegretTrace};
use crate::concentration::{
    default_tail_grid, posterior_tail_experiment, suffstat_tail_experiment, LabConfig, TailEstimate,
};
use crate::error::{Error, Result};
use crate::exp_family::{FamilyDescriptor, FAMILY_GRAMMARS};
use crate::rng;

pub const TRACE_HEADER: &str = "run,t,arm,reward,cum_pseudo_regret";
pub const SUMMARY_HEADER: &str = "T,mean_regret,stderr_regret,lr_coefficient,regret_over_logT";
pub const CONCENTRATION_HEADER: &str = "u,empirical,bound_or_rate,trials,passed_event_fraction";
pub const GRID_CELLS_HEADER: &str = "first_row,family,theta,delta";

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CONCENTRATION_FILE: &str = "concentration.csv";
pub const GRID_CELLS_FILE: &str = "concentration_cells.csv";

/// Sample sizes used by `tail-grid`.
pub const GRID_SAMPLE_SIZES: [usize; 3] = [10, 50, 200];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Concentration,
    LowerBound,
    ListFamilies,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Concentration => "concentration",
            Command::LowerBound => "lower-bound",
            Command::ListFamilies => "list-families",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "simulate" => Ok(Command::Simulate),
            "concentration" => Ok(Command::Concentration),
            "lower-bound" => Ok(Command::LowerBound),
            "list-families" => Ok(Command::ListFamilies),
            other => Err(Error::Parse(format!("unknown command {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabExperiment {
    Suffstat,
    Posterior,
    TailGrid,
}

impl LabExperiment {
    pub fn as_str(self) -> &'static str {
        match self {
            LabExperiment::Suffstat => "suffstat",
            LabExperiment::Posterior => "posterior",
            LabExperiment::TailGrid => "tail-grid",
        }
    }
}

impl FromStr for LabExperiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "suffstat" => Ok(LabExperiment::Suffstat),
            "posterior" => Ok(LabExperiment::Posterior),
            "tail-grid" => Ok(LabExperiment::TailGrid),
            other => Err(Error::Parse(format!("unknown experiment {other:?}"))),
        }
    }
}

/// One arm of a spec: a family and its conventional parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmSpec {
    pub fam: FamilyDescriptor,
    pub lambda: f64,
}

impl fmt::Display for ArmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{:?}", self.fam, self.lambda)
    }
}

impl FromStr for ArmSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (fam, lambda) = s
            .trim()
            .rsplit_once('@')
            .ok_or_else(|| Error::Parse(format!("arm {s:?} is not of the form family@lambda")))?;
        Ok(ArmSpec {
            fam: fam.parse()?,
            lambda: parse_f64("arm parameter", lambda)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub command: Command,
    pub arms: Vec<ArmSpec>,
    pub policy: PolicyKind,
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Write the per-round trace file (it grows as runs × horizon).
    pub trace: bool,
    pub family: FamilyDescriptor,
    pub lambda: f64,
    pub delta: f64,
    pub gap: f64,
    pub sample_sizes: Vec<usize>,
    pub trials: usize,
    pub experiment: LabExperiment,
    pub posterior_draws: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let bern = FamilyDescriptor::bernoulli();
        ExperimentSpec {
            command: Command::Simulate,
            arms: vec![ArmSpec { fam: bern, lambda: 0.5 }, ArmSpec { fam: bern, lambda: 0.25 }],
            policy: PolicyKind::ts(),
            horizon: 1000,
            runs: 10,
            seed: 0,
            out: PathBuf::from("out"),
            trace: true,
            family: bern,
            lambda: 0.5,
            delta: 0.05,
            gap: 0.25,
            sample_sizes: GRID_SAMPLE_SIZES.to_vec(),
            trials: 10_000,
            experiment: LabExperiment::Suffstat,
            posterior_draws: crate::concentration::DEFAULT_POSTERIOR_DRAWS,
        }
    }
}

/// Command-line values that take precedence over the spec file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub horizon: Option<usize>,
    pub runs: Option<usize>,
    pub out: Option<PathBuf>,
}

fn parse_f64(what: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{what}: expected a real number, got {v:?}")))
}

fn parse_int<T: FromStr>(what: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{what}: expected a nonnegative integer, got {v:?}")))
}

impl ExperimentSpec {
    /// Defaults overlaid with the keys of `text`, validated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = ExperimentSpec::default();
        spec.apply_text(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Defaults, then the optional file, then `overrides`.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut spec = ExperimentSpec::default();
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            spec.apply_text(&text)?;
        }
        spec.apply_overrides(overrides);
        spec.validate()?;
        Ok(spec)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value, got {line:?}", lineno + 1)))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(Error::Parse(format!("line {}: duplicate key {key:?}", lineno + 1)));
            }
            seen.push(key);
            self.set(key, value.trim())
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "command" => self.command = value.parse()?,
            "arms" => {
                self.arms = value
                    .split(';')
                    .filter(|a| !a.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "policy" => self.policy = value.parse()?,
            "horizon" => self.horizon = parse_int(key, value)?,
            "runs" => self.runs = parse_int(key, value)?,
            "seed" => self.seed = parse_int(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "trace" => {
                self.trace = value
                    .parse()
                    .map_err(|_| Error::Parse(format!("trace: expected true or false, got {value:?}")))?
            }
            "family" => self.family = value.parse()?,
            "lambda" => self.lambda = parse_f64(key, value)?,
            "delta" => self.delta = parse_f64(key, value)?,
            "gap" => self.gap = parse_f64(key, value)?,
            "sample_sizes" => {
                self.sample_sizes = value
                    .split(',')
                    .filter(|u| !u.trim().is_empty())
                    .map(|u| parse_int(key, u))
                    .collect::<Result<_>>()?
            }
            "trials" => self.trials = parse_int(key, value)?,
            "experiment" => self.experiment = value.parse()?,
            "posterior_draws" => self.posterior_draws = parse_int(key, value)?,
            other => return Err(Error::Parse(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, o: &Overrides) {
        if let Some(c) = o.command {
            self.command = c;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(h) = o.horizon {
            self.horizon = h;
        }
        if let Some(r) = o.runs {
            self.runs = r;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms.len() < 2 {
            return Err(Error::Config(format!("need at least 2 arms, got {}", self.arms.len())));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.horizon < self.arms.len() {
            return Err(Error::Config(format!(
                "horizon {} is shorter than the number of arms {}",
                self.horizon,
                self.arms.len()
            )));
        }
        if self.trials == 0 || self.posterior_draws == 0 {
            return Err(Error::Config("trials and posterior_draws must be positive".into()));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(Error::Config("sample_sizes must list positive integers".into()));
        }
        let out = self.out.to_string_lossy();
        if out.is_empty() || out.contains('\n') {
            return Err(Error::Config("out must be a non-empty single-line path".into()));
        }
        self.policy.validate()
    }

    /// The spec as a config file that [`ExperimentSpec::parse`] maps back to `self`.
    pub fn to_config_string(&self) -> String {
        let arms: Vec<String> = self.arms.iter().map(ToString::to_string).collect();
        let sizes: Vec<String> = self.sample_sizes.iter().map(ToString::to_string).collect();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("command", self.command.as_str().into());
        kv("arms", arms.join(";"));
        kv("policy", self.policy.to_string());
        kv("horizon", self.horizon.to_string());
        kv("runs", self.runs.to_string());
        kv("seed", self.seed.to_string());
        kv("out", self.out.to_string_lossy().into_owned());
        kv("trace", self.trace.to_string());
        kv("family", self.family.to_string());
        kv("lambda", format!("{:?}", self.lambda));
        kv("delta", format!("{:?}", self.delta));
        kv("gap", format!("{:?}", self.gap));
        kv("sample_sizes", sizes.join(","));
        kv("trials", self.trials.to_string());
        kv("experiment", self.experiment.as_str().into());
        kv("posterior_draws", self.posterior_draws.to_string());
        s
    }

    pub fn instance(&self) -> Result<BanditInstance> {
        let arms: Vec<(FamilyDescriptor, f64)> = self.arms.iter().map(|a| (a.fam, a.lambda)).collect();
        BanditInstance::from_lambdas(&arms)
    }
}

/// Reals in CSV output: 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// `⌈10^{j/4}⌉` for `j >= 1` below `horizon`, then `horizon` itself.
pub fn checkpoints(horizon: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for j in 1.. {
        let t = (10f64.powf(j as f64 / 4.0) - 1e-9).ceil() as usize;
        if t >= horizon {
            break;
        }
        if out.last() != Some(&t) {
            out.push(t);
        }
    }
    if horizon >= 2 {
        out.push(horizon);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub t: usize,
    pub mean_regret: f64,
    pub stderr_regret: f64,
    /// NaN when the instance mixes families.
    pub lr_coefficient: f64,
    pub regret_over_log_t: f64,
}

pub fn summarize(instance: &BanditInstance, traces: &[RegretTrace]) -> Vec<SummaryRow> {
    let lr = lai_robbins_coefficient(instance).unwrap_or(f64::NAN);
    let horizon = traces.first().map_or(0, |t| t.horizon);
    checkpoints(horizon)
        .into_iter()
        .map(|t| {
            let values: Vec<f64> = traces.iter().map(|tr| tr.regret_at(t)).collect();
            let (mean, var) = crate::stats::mean_var(&values);
            SummaryRow {
                t,
                mean_regret: mean,
                stderr_regret: (var / values.len() as f64).sqrt(),
                lr_coefficient: lr,
                regret_over_log_t: mean / (t as f64).ln(),
            }
        })
        .collect()
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<fs::File>)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok((path, BufWriter::new(file)))
}

fn write_lines<I: IntoIterator<Item = String>>(dir: &Path, name: &str, header: &str, rows: I) -> Result<PathBuf> {
    let (path, mut w) = create(dir, name)?;
    let io = |e| Error::io(&path, e);
    writeln!(w, "{header}").map_err(io)?;
    for row in rows {
        writeln!(w, "{row}").map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub summary: Vec<SummaryRow>,
    pub files: Vec<PathBuf>,
}

pub fn run_simulate(spec: &ExperimentSpec) -> Result<SimulateReport> {
    spec.validate()?;
    let instance = spec.instance()?;
    let traces = run_batch(&instance, &spec.policy, spec.horizon, spec.runs, spec.seed)?;
    let mut files = Vec::new();
    if spec.trace {
        let rows = traces.iter().enumerate().flat_map(|(r, tr)| {
            (0..tr.horizon).map(move |i| {
                format!(
                    "{r},{},{},{},{}",
                    i + 1,
                    tr.chosen[i],
                    fmt_real(tr.rewards[i]),
                    fmt_real(tr.cum_pseudo_regret[i])
                )
            })
        });
        files.push(write_lines(&spec.out, TRACE_FILE, TRACE_HEADER, rows)?);
    }
    let summary = summarize(&instance, &traces);
    let rows = summary.iter().map(|s| {
        format!(
            "{},{},{},{},{}",
            s.t,
            fmt_real(s.mean_regret),
            fmt_real(s.stderr_regret),
            fmt_real(s.lr_coefficient),
            fmt_real(s.regret_over_log_t)
        )
    });
    files.push(write_lines(&spec.out, SUMMARY_FILE, SUMMARY_HEADER, rows)?);
    Ok(SimulateReport { summary, files })
}

#[derive(Debug, Clone)]
pub struct ConcentrationReport {
    pub rows: Vec<TailEstimate>,
    /// Rows whose empirical tail exceeds the bound plus slack. Always empty for
    /// the posterior experiment, whose third column is a rate.
    pub violations: Vec<usize>,
    pub files: Vec<PathBuf>,
}

pub fn run_concentration(spec: &ExperimentSpec) -> Result<ConcentrationReport> {
    spec.validate()?;
    let mut files = Vec::new();
    let rows = match spec.experiment {
        LabExperiment::Suffstat | LabExperiment::Posterior => {
            let theta = spec.family.param_from_lambda(spec.lambda)?;
            let cfg = LabConfig::new(
                spec.family,
                theta,
                spec.delta,
                spec.gap,
                spec.sample_sizes.clone(),
                spec.trials,
                spec.seed,
            )?
            .with_posterior_draws(spec.posterior_draws)?;
            if spec.experiment == LabExperiment::Suffstat {
                suffstat_tail_experiment(&cfg)?
            } else {
                posterior_tail_experiment(&cfg)?
            }
        }
        LabExperiment::TailGrid => {
            let mut rows = Vec::new();
            let mut cells = Vec::new();
            for (i, (fam, theta, deltas)) in default_tail_grid().into_iter().enumerate() {
                for (j, delta) in deltas.into_iter().enumerate() {
                    let seed = rng::run_seed(spec.seed, (3 * i + j) as u64);
                    let cfg = LabConfig::tail_only(fam, theta, delta, GRID_SAMPLE_SIZES.to_vec(), spec.trials, seed)?;
                    cells.push(format!("{},{},{},{}", rows.len(), csv_field(&fam.to_string()), fmt_real(theta.0), fmt_real(delta)));
                    rows.extend(suffstat_tail_experiment(&cfg)?);
                }
            }
            files.push(write_lines(&spec.out, GRID_CELLS_FILE, GRID_CELLS_HEADER, cells)?);
            rows
        }
    };
    let violations = if spec.experiment == LabExperiment::Posterior {
        Vec::new()
    } else {
        (0..rows.len()).filter(|&i| !rows[i].within_bound()).collect()
    };
    let lines = rows.iter().map(|e| {
        format!(
            "{},{},{},{},{}",
            e.u,
            fmt_real(e.empirical_prob),
            fmt_real(e.bound),
            e.trials_used,
            fmt_real(e.passed_fraction)
        )
    });
    files.insert(0, write_lines(&spec.out, CONCENTRATION_FILE, CONCENTRATION_HEADER, lines)?);
    Ok(ConcentrationReport { rows, violations, files })
}

fn csv_field(s: &str) -> String {
    if s.contains(',') {
        format!("\"{s}\"")
    } else {
        s.to_string()
    }
}

pub fn run_lower_bound(spec: &ExperimentSpec) -> Result<f64> {
    lai_robbins_coefficient(&spec.instance()?)
}

pub fn family_grammars() -> &'static [&'static str] {
    &FAMILY_GRAMMARS
}
