//! One-dimensional canonical exponential families.
//!
//! Every family has density `A(x) exp(T(x) θ - F(θ))` with respect to Lebesgue
//! measure (continuous families) or counting measure (Bernoulli, Poisson). The
//! natural parameter θ is the internal coordinate; each family also has a
//! conventional parameter λ (probability, location, rate, tail index) reachable
//! through [`FamilyDescriptor::theta_from_lambda`] and
//! [`FamilyDescriptor::lambda_from_theta`].
//!
//! | family          | T(x)  | θ        | F(θ)                        |
//! |-----------------|-------|----------|-----------------------------|
//! | Bernoulli       | x     | logit λ  | ln(1 + e^θ)                 |
//! | Gaussian(σ²)    | x     | λ/σ²     | σ²θ²/2                      |
//! | Gamma(k)        | x     | -λ       | -k ln(-θ)                   |
//! | Poisson         | x     | ln λ     | e^θ                         |
//! | Pareto(x_m)     | ln x  | -λ - 1   | -ln(-1-θ) + (1+θ) ln x_m    |
//! | Weibull(k)      | x^k   | -λ^k     | -ln(-θ)                     |

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::roots;

/// Open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub const REAL: Interval = Interval::new(f64::NEG_INFINITY, f64::INFINITY);

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

/// Natural parameter θ.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NaturalParam(pub f64);

impl NaturalParam {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<f64> for NaturalParam {
    fn from(v: f64) -> Self {
        NaturalParam(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyKind {
    Bernoulli,
    Gaussian { sigma2: f64 },
    GammaShape { k: f64 },
    Poisson,
    Pareto { xm: f64 },
    Weibull { k: f64 },
}

/// A canonical exponential family with its known nuisance constant.
///
/// `theta_domain` is where the family is used as a reward distribution (finite
/// mean); `natural_domain` is where `F` is finite. They differ only for Pareto,
/// whose posterior puts mass on tail indices `λ <= 1` with infinite mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyDescriptor {
    kind: FamilyKind,
    theta_domain: Interval,
    natural_domain: Interval,
    mean_domain: Interval,
}

const NEG_HALF_LINE: Interval = Interval::new(f64::NEG_INFINITY, 0.0);
const POS_HALF_LINE: Interval = Interval::new(0.0, f64::INFINITY);

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn positive_finite(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::domain(name, v, "(0, inf)"))
    }
}

impl FamilyDescriptor {
    pub fn new(kind: FamilyKind) -> Result<Self> {
        let (theta_domain, natural_domain, mean_domain) = match kind {
            FamilyKind::Bernoulli => (Interval::REAL, Interval::REAL, Interval::new(0.0, 1.0)),
            FamilyKind::Gaussian { sigma2 } => {
                positive_finite("sigma2", sigma2)?;
                (Interval::REAL, Interval::REAL, Interval::REAL)
            }
            FamilyKind::GammaShape { k } => {
                positive_finite("k", k)?;
                (NEG_HALF_LINE, NEG_HALF_LINE, POS_HALF_LINE)
            }
            FamilyKind::Poisson => (Interval::REAL, Interval::REAL, POS_HALF_LINE),
            FamilyKind::Pareto { xm } => {
                positive_finite("xm", xm)?;
                (
                    Interval::new(f64::NEG_INFINITY, -2.0),
                    Interval::new(f64::NEG_INFINITY, -1.0),
                    Interval::new(xm, f64::INFINITY),
                )
            }
            FamilyKind::Weibull { k } => {
                positive_finite("k", k)?;
                (NEG_HALF_LINE, NEG_HALF_LINE, POS_HALF_LINE)
            }
        };
        Ok(FamilyDescriptor {
            kind,
            theta_domain,
            natural_domain,
            mean_domain,
        })
    }

    pub fn bernoulli() -> Self {
        Self::new(FamilyKind::Bernoulli).expect("valid")
    }

    pub fn gaussian(sigma2: f64) -> Result<Self> {
        Self::new(FamilyKind::Gaussian { sigma2 })
    }

    pub fn gamma_shape(k: f64) -> Result<Self> {
        Self::new(FamilyKind::GammaShape { k })
    }

    pub fn poisson() -> Self {
        Self::new(FamilyKind::Poisson).expect("valid")
    }

    pub fn pareto(xm: f64) -> Result<Self> {
        Self::new(FamilyKind::Pareto { xm })
    }

    pub fn weibull(k: f64) -> Result<Self> {
        Self::new(FamilyKind::Weibull { k })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn theta_domain(&self) -> Interval {
        self.theta_domain
    }

    pub fn natural_domain(&self) -> Interval {
        self.natural_domain
    }

    pub fn mean_domain(&self) -> Interval {
        self.mean_domain
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FamilyKind::Bernoulli => "bernoulli",
            FamilyKind::Gaussian { .. } => "gaussian",
            FamilyKind::GammaShape { .. } => "gamma",
            FamilyKind::Poisson => "poisson",
            FamilyKind::Pareto { .. } => "pareto",
            FamilyKind::Weibull { .. } => "weibull",
        }
    }

    fn support_desc(&self) -> &'static str {
        match self.kind {
            FamilyKind::Bernoulli => "{0, 1}",
            FamilyKind::Gaussian { .. } => "finite reals",
            FamilyKind::GammaShape { .. } => "(0, inf)",
            FamilyKind::Poisson => "nonnegative integers",
            FamilyKind::Pareto { .. } => "[x_m, inf)",
            FamilyKind::Weibull { .. } => "[0, inf)",
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        if !x.is_finite() {
            return false;
        }
        match self.kind {
            FamilyKind::Bernoulli => x == 0.0 || x == 1.0,
            FamilyKind::Gaussian { .. } => true,
            FamilyKind::GammaShape { .. } => x > 0.0,
            FamilyKind::Poisson => x >= 0.0 && x.fract() == 0.0,
            FamilyKind::Pareto { xm } => x >= xm,
            FamilyKind::Weibull { .. } => x >= 0.0,
        }
    }

    fn check_support(&self, x: f64) -> Result<()> {
        if self.in_support(x) {
            Ok(())
        } else {
            Err(Error::Support {
                x,
                family: self.to_string(),
                support: self.support_desc(),
            })
        }
    }

    fn check_natural(&self, theta: f64) -> Result<()> {
        if self.natural_domain.contains(theta) {
            Ok(())
        } else {
            Err(Error::domain("theta", theta, self.natural_domain))
        }
    }

    fn check_theta(&self, theta: f64) -> Result<()> {
        if self.theta_domain.contains(theta) {
            Ok(())
        } else {
            Err(Error::domain("theta", theta, self.theta_domain))
        }
    }

    /// Validated natural parameter for an environment arm.
    pub fn param(&self, theta: f64) -> Result<NaturalParam> {
        self.check_theta(theta)?;
        Ok(NaturalParam(theta))
    }

    /// Natural parameter of the arm with conventional parameter `lambda`.
    pub fn param_from_lambda(&self, lambda: f64) -> Result<NaturalParam> {
        self.param(self.theta_from_lambda(lambda)?)
    }

    pub fn theta_from_lambda(&self, lambda: f64) -> Result<f64> {
        let bad = |dom: &str| Err(Error::domain("lambda", lambda, dom));
        match self.kind {
            FamilyKind::Bernoulli => {
                if lambda > 0.0 && lambda < 1.0 {
                    Ok((lambda / (1.0 - lambda)).ln())
                } else {
                    bad("(0, 1)")
                }
            }
            FamilyKind::Gaussian { sigma2 } => {
                if lambda.is_finite() {
                    Ok(lambda / sigma2)
                } else {
                    bad("finite reals")
                }
            }
            FamilyKind::GammaShape { .. } => {
                if lambda > 0.0 && lambda.is_finite() {
                    Ok(-lambda)
                } else {
                    bad("(0, inf)")
                }
            }
            FamilyKind::Poisson => {
                if lambda > 0.0 && lambda.is_finite() {
                    Ok(lambda.ln())
                } else {
                    bad("(0, inf)")
                }
            }
            FamilyKind::Pareto { .. } => {
                if lambda > 0.0 && lambda.is_finite() {
                    Ok(-lambda - 1.0)
                } else {
                    bad("(0, inf)")
                }
            }
            FamilyKind::Weibull { k } => {
                if lambda > 0.0 && lambda.is_finite() {
                    Ok(-lambda.powf(k))
                } else {
                    bad("(0, inf)")
                }
            }
        }
    }

    pub fn lambda_from_theta(&self, theta: NaturalParam) -> Result<f64> {
        let t = theta.0;
        self.check_natural(t)?;
        Ok(match self.kind {
            FamilyKind::Bernoulli => sigmoid(t),
            FamilyKind::Gaussian { sigma2 } => sigma2 * t,
            FamilyKind::GammaShape { .. } => -t,
            FamilyKind::Poisson => t.exp(),
            FamilyKind::Pareto { .. } => -t - 1.0,
            FamilyKind::Weibull { k } => (-t).powf(1.0 / k),
        })
    }

    /// Log-partition function F(θ).
    pub fn log_partition(&self, theta: NaturalParam) -> Result<f64> {
        let t = theta.0;
        self.check_natural(t)?;
        Ok(match self.kind {
            FamilyKind::Bernoulli => softplus(t),
            FamilyKind::Gaussian { sigma2 } => 0.5 * sigma2 * t * t,
            FamilyKind::GammaShape { k } => -k * (-t).ln(),
            FamilyKind::Poisson => t.exp(),
            FamilyKind::Pareto { xm } => -(-1.0 - t).ln() + (1.0 + t) * xm.ln(),
            FamilyKind::Weibull { .. } => -(-t).ln(),
        })
    }

    /// F′(θ) = E[T(X)].
    pub fn grad(&self, theta: NaturalParam) -> Result<f64> {
        let t = theta.0;
        self.check_natural(t)?;
        Ok(match self.kind {
            FamilyKind::Bernoulli => sigmoid(t),
            FamilyKind::Gaussian { sigma2 } => sigma2 * t,
            FamilyKind::GammaShape { k } => -k / t,
            FamilyKind::Poisson => t.exp(),
            FamilyKind::Pareto { xm } => 1.0 / (-1.0 - t) + xm.ln(),
            FamilyKind::Weibull { .. } => -1.0 / t,
        })
    }

    /// F″(θ) = Var[T(X)].
    pub fn hess(&self, theta: NaturalParam) -> Result<f64> {
        let t = theta.0;
        self.check_natural(t)?;
        Ok(match self.kind {
            FamilyKind::Bernoulli => {
                let p = sigmoid(t);
                p * (1.0 - p)
            }
            FamilyKind::Gaussian { sigma2 } => sigma2,
            FamilyKind::GammaShape { k } => k / (t * t),
            FamilyKind::Poisson => t.exp(),
            FamilyKind::Pareto { .. } => 1.0 / ((1.0 + t) * (1.0 + t)),
            FamilyKind::Weibull { .. } => 1.0 / (t * t),
        })
    }

    /// Fisher information I(θ) = F″(θ).
    pub fn fisher_info(&self, theta: NaturalParam) -> Result<f64> {
        self.hess(theta)
    }

    /// Open range of F′ over the natural domain.
    pub fn grad_range(&self) -> Interval {
        match self.kind {
            FamilyKind::Bernoulli => Interval::new(0.0, 1.0),
            FamilyKind::Gaussian { .. } => Interval::REAL,
            FamilyKind::GammaShape { .. } | FamilyKind::Poisson | FamilyKind::Weibull { .. } => POS_HALF_LINE,
            FamilyKind::Pareto { xm } => Interval::new(xm.ln(), f64::INFINITY),
        }
    }

    /// Closed-form (F′)⁻¹.
    pub fn grad_inverse(&self, m: f64) -> Result<NaturalParam> {
        let range = self.grad_range();
        if !range.contains(m) {
            return Err(Error::domain("F'(theta)", m, range));
        }
        Ok(NaturalParam(match self.kind {
            FamilyKind::Bernoulli => (m / (1.0 - m)).ln(),
            FamilyKind::Gaussian { sigma2 } => m / sigma2,
            FamilyKind::GammaShape { k } => -k / m,
            FamilyKind::Poisson => m.ln(),
            FamilyKind::Pareto { xm } => -1.0 - 1.0 / (m - xm.ln()),
            FamilyKind::Weibull { .. } => -1.0 / m,
        }))
    }

    /// T(x).
    pub fn suff_stat(&self, x: f64) -> Result<f64> {
        self.check_support(x)?;
        Ok(self.suff_stat_unchecked(x))
    }

    pub(crate) fn suff_stat_unchecked(&self, x: f64) -> f64 {
        match self.kind {
            FamilyKind::Pareto { .. } => x.ln(),
            FamilyKind::Weibull { k } => x.powf(k),
            _ => x,
        }
    }

    /// ln A(x).
    pub fn log_base_measure(&self, x: f64) -> Result<f64> {
        self.check_support(x)?;
        Ok(match self.kind {
            FamilyKind::Bernoulli => 0.0,
            FamilyKind::Gaussian { sigma2 } => -x * x / (2.0 * sigma2) - 0.5 * (2.0 * std::f64::consts::PI * sigma2).ln(),
            FamilyKind::GammaShape { k } => (k - 1.0) * x.ln() - ln_gamma(k),
            FamilyKind::Poisson => -ln_gamma(x + 1.0),
            FamilyKind::Pareto { .. } => 0.0,
            FamilyKind::Weibull { k } => k.ln() + (k - 1.0) * x.ln(),
        })
    }

    /// ln p(x | θ) = ln A(x) + T(x) θ − F(θ).
    pub fn log_density(&self, theta: NaturalParam, x: f64) -> Result<f64> {
        let log_a = self.log_base_measure(x)?;
        let f = self.log_partition(theta)?;
        let tx = self.suff_stat_unchecked(x);
        // avoid 0 * inf at the boundary of continuous supports
        let linear = if tx == 0.0 { 0.0 } else { tx * theta.0 };
        Ok(log_a + linear - f)
    }

    /// μ(θ) = E[X] for an environment parameter.
    pub fn mean(&self, theta: NaturalParam) -> Result<f64> {
        self.check_theta(theta.0)?;
        Ok(self.mean_unchecked(theta.0))
    }

    /// μ(θ) over the whole natural domain; infinite means (Pareto λ <= 1) map to +∞.
    pub fn mean_extended(&self, theta: NaturalParam) -> Result<f64> {
        self.check_natural(theta.0)?;
        Ok(self.mean_unchecked(theta.0))
    }

    fn mean_unchecked(&self, t: f64) -> f64 {
        match self.kind {
            FamilyKind::Bernoulli => sigmoid(t),
            FamilyKind::Gaussian { sigma2 } => sigma2 * t,
            FamilyKind::GammaShape { k } => k / (-t),
            FamilyKind::Poisson => t.exp(),
            FamilyKind::Pareto { xm } => {
                let lambda = -t - 1.0;
                if lambda <= 1.0 {
                    f64::INFINITY
                } else {
                    lambda * xm / (lambda - 1.0)
                }
            }
            FamilyKind::Weibull { k } => gamma(1.0 + 1.0 / k) / (-t).powf(1.0 / k),
        }
    }

    /// μ⁻¹(m), closed form with a bisection fallback when the closed form misses
    /// the tolerance `1e-10 max(1, |m|)`.
    pub fn mean_inverse(&self, m: f64) -> Result<NaturalParam> {
        if !self.mean_domain.contains(m) {
            return Err(Error::domain("mean", m, self.mean_domain));
        }
        let closed = match self.kind {
            FamilyKind::Bernoulli => (m / (1.0 - m)).ln(),
            FamilyKind::Gaussian { sigma2 } => m / sigma2,
            FamilyKind::GammaShape { k } => -k / m,
            FamilyKind::Poisson => m.ln(),
            FamilyKind::Pareto { xm } => -m / (m - xm) - 1.0,
            FamilyKind::Weibull { k } => -(gamma(1.0 + 1.0 / k) / m).powf(k),
        };
        let tol = 1e-10 * m.abs().max(1.0);
        if self.theta_domain.contains(closed) && (self.mean_unchecked(closed) - m).abs() <= tol {
            return Ok(NaturalParam(closed));
        }
        self.mean_inverse_bisect(m)
    }

    /// μ⁻¹(m) by monotone bisection on θ.
    pub fn mean_inverse_bisect(&self, m: f64) -> Result<NaturalParam> {
        if !self.mean_domain.contains(m) {
            return Err(Error::domain("mean", m, self.mean_domain));
        }
        let dom = self.theta_domain;
        let start = match (dom.lo.is_finite(), dom.hi.is_finite()) {
            (false, false) => 0.0,
            (false, true) => dom.hi - 1.0,
            (true, false) => dom.lo + 1.0,
            (true, true) => 0.5 * (dom.lo + dom.hi),
        };
        roots::invert_increasing(|t| self.mean_unchecked(t), m, &dom, start)
            .map(NaturalParam)
            .ok_or_else(|| Error::State(format!("mean inversion failed for m = {m}")))
    }

    /// K(θ, θ′) = KL(p_θ ‖ p_θ′) in Bregman form F(θ′) − F(θ) − F′(θ)(θ′ − θ).
    pub fn kl(&self, theta: NaturalParam, theta_prime: NaturalParam) -> Result<f64> {
        if theta == theta_prime {
            self.check_natural(theta.0)?;
            return Ok(0.0);
        }
        let f_p = self.log_partition(theta_prime)?;
        let f = self.log_partition(theta)?;
        let g = self.grad(theta)?;
        Ok((f_p - f - g * (theta_prime.0 - theta.0)).max(0.0))
    }

    /// K̃(θ, δ): exponential rate of the two-sided tail of the empirical mean of T.
    ///
    /// Each branch solves `F′(θ ± step) = F′(θ) ± δ` by bisection; a branch whose
    /// target lies outside the range of F′ is dropped.
    pub fn chernoff_rate(&self, theta: NaturalParam, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::domain("delta", delta, "(0, inf)"));
        }
        let center = self.grad(theta)?;
        let range = self.grad_range();
        let dom = self.natural_domain;
        let solve = |target: f64| -> Option<f64> {
            if !range.contains(target) {
                return None;
            }
            roots::invert_increasing(|t| self.grad(NaturalParam(t)).unwrap_or(f64::NAN), target, &dom, theta.0)
        };
        let mut rate = f64::INFINITY;
        let mut any = false;
        for target in [center + delta, center - delta] {
            if let Some(t) = solve(target) {
                any = true;
                rate = rate.min(self.kl(NaturalParam(t), theta)?);
            }
        }
        if any {
            Ok(rate)
        } else {
            Err(Error::domain("delta", delta, format!("deviations attainable by F' around {center} within {range}")))
        }
    }

    /// One reward draw from p(· | θ).
    pub fn sample_reward<R: Rng + ?Sized>(&self, theta: NaturalParam, rng: &mut R) -> f64 {
        let lambda = self.lambda_from_theta(theta).expect("theta in natural domain");
        match self.kind {
            FamilyKind::Bernoulli => {
                if rng.random::<f64>() < lambda {
                    1.0
                } else {
                    0.0
                }
            }
            FamilyKind::Gaussian { sigma2 } => Normal::new(lambda, sigma2.sqrt()).expect("valid normal").sample(rng),
            FamilyKind::GammaShape { k } => Gamma::new(k, 1.0 / lambda).expect("valid gamma").sample(rng),
            FamilyKind::Poisson => Poisson::new(lambda).expect("valid poisson").sample(rng),
            FamilyKind::Pareto { xm } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                xm * u.powf(-1.0 / lambda)
            }
            FamilyKind::Weibull { k } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                (-u.ln()).powf(1.0 / k) / lambda
            }
        }
    }

    /// sup_x p(x | θ); `+∞` when the density is unbounded (Gamma or Weibull with k < 1).
    pub fn mode_density(&self, theta: NaturalParam) -> Result<f64> {
        let lambda = self.lambda_from_theta(theta)?;
        Ok(match self.kind {
            FamilyKind::Bernoulli => lambda.max(1.0 - lambda),
            FamilyKind::Gaussian { sigma2 } => 1.0 / (2.0 * std::f64::consts::PI * sigma2).sqrt(),
            FamilyKind::GammaShape { k } => {
                if k < 1.0 {
                    f64::INFINITY
                } else if k == 1.0 {
                    lambda
                } else {
                    self.log_density(theta, (k - 1.0) / lambda)?.exp()
                }
            }
            FamilyKind::Poisson => self.log_density(theta, lambda.floor())?.exp(),
            FamilyKind::Pareto { xm } => lambda / xm,
            FamilyKind::Weibull { k } => {
                if k < 1.0 {
                    f64::INFINITY
                } else if k == 1.0 {
                    lambda
                } else {
                    let x = ((k - 1.0) / k).powf(1.0 / k) / lambda;
                    self.log_density(theta, x)?.exp()
                }
            }
        })
    }

    /// L(θ) = ½ min(sup p(· | θ), 1).
    pub fn likely_level(&self, theta: NaturalParam) -> Result<f64> {
        Ok(0.5 * self.mode_density(theta)?.min(1.0))
    }
}

impl fmt::Display for FamilyDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FamilyKind::Bernoulli => write!(f, "bernoulli"),
            FamilyKind::Gaussian { sigma2 } => write!(f, "gaussian:sigma2={sigma2:?}"),
            FamilyKind::GammaShape { k } => write!(f, "gamma:k={k:?}"),
            FamilyKind::Poisson => write!(f, "poisson"),
            FamilyKind::Pareto { xm } => write!(f, "pareto:xm={xm:?}"),
            FamilyKind::Weibull { k } => write!(f, "weibull:k={k:?}"),
        }
    }
}

/// Grammar of each supported family spec string.
pub const FAMILY_GRAMMARS: [&str; 6] = [
    "bernoulli",
    "gaussian:sigma2=<positive real>",
    "gamma:k=<positive real>",
    "poisson",
    "pareto:xm=<positive real>",
    "weibull:k=<positive real>",
];

impl FromStr for FamilyDescriptor {
    type Err = Error;

    /// Parses `kind[:key=value{,key=value}]`. Omitted constants default to 1.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k.trim(), Some(r)),
            None => (s, None),
        };
        let mut params: Vec<(String, f64)> = Vec::new();
        if let Some(rest) = rest {
            for pair in rest.split(',') {
                let (key, value) = pair
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("expected key=value in family spec {s:?}, got {pair:?}")))?;
                let value: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number {value:?} in family spec {s:?}")))?;
                params.push((key.trim().to_ascii_lowercase(), value));
            }
        }
        let take = |allowed: &[&str]| -> Result<f64> {
            let mut v = 1.0;
            for (key, value) in &params {
                if allowed.contains(&key.as_str()) {
                    v = *value;
                } else {
                    return Err(Error::Parse(format!("unknown key {key:?} for family {kind:?}")));
                }
            }
            Ok(v)
        };
        match kind.to_ascii_lowercase().as_str() {
            "bernoulli" => {
                take(&[])?;
                Ok(Self::bernoulli())
            }
            "gaussian" | "normal" => Self::gaussian(take(&["sigma2"])?),
            "gamma" => Self::gamma_shape(take(&["k"])?),
            "poisson" => {
                take(&[])?;
                Ok(Self::poisson())
            }
            "pareto" => Self::pareto(take(&["xm"])?),
            "weibull" => Self::weibull(take(&["k"])?),
            other => Err(Error::Parse(format!("unknown family {other:?}"))),
        }
    }
}
