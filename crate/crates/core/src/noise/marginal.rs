//! One-dimensional marginals and their convolutions.

use std::fmt;
use std::str::FromStr;

use statrs::distribution::{Continuous, ContinuousCDF, Exp, Normal, Uniform};

use crate::error::{Error, Result};
use crate::quad;

/// A continuous distribution on the real line.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalModel {
    Uniform { a: f64, b: f64 },
    Normal { mu: f64, sigma: f64 },
    Exponential { rate: f64 },
}

impl MarginalModel {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Uniform::new(a, b).map_err(|e| Error::InvalidParameter(format!("uniform({a}, {b}): {e}")))?;
        Ok(MarginalModel::Uniform { a, b })
    }

    pub fn unit_uniform() -> Self {
        MarginalModel::Uniform { a: 0.0, b: 1.0 }
    }

    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        Normal::new(mu, sigma)
            .map_err(|e| Error::InvalidParameter(format!("normal({mu}, {sigma}): {e}")))?;
        Ok(MarginalModel::Normal { mu, sigma })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Exp::new(rate).map_err(|e| Error::InvalidParameter(format!("exponential({rate}): {e}")))?;
        Ok(MarginalModel::Exponential { rate })
    }

    /// Support endpoints (possibly infinite).
    pub fn support(&self) -> (f64, f64) {
        match *self {
            MarginalModel::Uniform { a, b } => (a, b),
            MarginalModel::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            MarginalModel::Exponential { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        match *self {
            MarginalModel::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            MarginalModel::Normal { mu, sigma } => Normal::new(mu, sigma).unwrap().cdf(x),
            MarginalModel::Exponential { rate } => Exp::new(rate).unwrap().cdf(x),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            MarginalModel::Uniform { a, b } => Uniform::new(a, b).unwrap().pdf(x),
            MarginalModel::Normal { mu, sigma } => Normal::new(mu, sigma).unwrap().pdf(x),
            MarginalModel::Exponential { rate } => Exp::new(rate).unwrap().pdf(x),
        }
    }

    /// Generalized inverse; `0` and `1` map to the support endpoints.
    pub fn inv_cdf(&self, q: f64) -> f64 {
        let (lo, hi) = self.support();
        if q <= 0.0 {
            return lo;
        }
        if q >= 1.0 {
            return hi;
        }
        match *self {
            MarginalModel::Uniform { a, b } => a + q * (b - a),
            MarginalModel::Normal { mu, sigma } => Normal::new(mu, sigma).unwrap().inverse_cdf(q),
            MarginalModel::Exponential { rate } => -(-q).ln_1p() / rate,
        }
    }
}

impl fmt::Display for MarginalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarginalModel::Uniform { a, b } => write!(f, "uniform:{a},{b}"),
            MarginalModel::Normal { mu, sigma } => write!(f, "normal:{mu},{sigma}"),
            MarginalModel::Exponential { rate } => write!(f, "exponential:{rate}"),
        }
    }
}

/// `uniform:a,b`, `normal:mu,sigma`, `exponential:rate`.
impl FromStr for MarginalModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s
            .split_once(':')
            .ok_or_else(|| Error::spec("marginals", format!("`{s}`: expected name:params")))?;
        let params: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::spec("marginals", format!("`{s}`: parameters must be numbers")))?;
        let arity = |k: usize| {
            if params.len() == k {
                Ok(())
            } else {
                Err(Error::spec(
                    "marginals",
                    format!("`{s}`: `{name}` takes {k} parameter(s), got {}", params.len()),
                ))
            }
        };
        let built = match name.trim().to_ascii_lowercase().as_str() {
            "uniform" => {
                arity(2)?;
                MarginalModel::uniform(params[0], params[1])
            }
            "normal" => {
                arity(2)?;
                MarginalModel::normal(params[0], params[1])
            }
            "exponential" => {
                arity(1)?;
                MarginalModel::exponential(params[0])
            }
            other => {
                return Err(Error::spec(
                    "marginals",
                    format!("unknown marginal `{other}` (uniform, normal, exponential)"),
                ))
            }
        };
        built.map_err(|e| match e {
            Error::InvalidParameter(m) => Error::spec("marginals", m),
            other => other,
        })
    }
}

/// Irwin–Hall CDF for the sum of two independent `U(0, 1)`.
pub fn irwin_hall2_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < 1.0 {
        0.5 * x * x
    } else if x < 2.0 {
        1.0 - 0.5 * (x - 2.0) * (x - 2.0)
    } else {
        1.0
    }
}

pub fn irwin_hall2_inv(q: f64) -> f64 {
    let q = q.clamp(0.0, 1.0);
    if q <= 0.5 {
        (2.0 * q).sqrt()
    } else {
        2.0 - (2.0 * (1.0 - q)).sqrt()
    }
}

const CONV_PANELS: usize = 32;
const CONV_TOL: f64 = 1e-13;
const INV_TOL: f64 = 1e-12;

/// Distribution of `base + noise` for independent summands:
/// `F(x) = ∫₀¹ F_base(x - F_noise⁻¹(q)) dq`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolvedMarginal {
    pub base: MarginalModel,
    pub noise: MarginalModel,
}

impl ConvolvedMarginal {
    pub fn new(base: MarginalModel, noise: MarginalModel) -> Self {
        ConvolvedMarginal { base, noise }
    }

    pub fn support(&self) -> (f64, f64) {
        let (a, b) = self.base.support();
        let (c, d) = self.noise.support();
        (a + c, b + d)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let f = |q: f64| self.base.cdf(x - self.noise.inv_cdf(q));
        quad::adaptive_simpson(&f, 0.0, 1.0, CONV_PANELS, CONV_TOL).clamp(0.0, 1.0)
    }

    /// Generalized inverse by bisection. `0` and `1` map to the support
    /// endpoints.
    pub fn inv_cdf(&self, q: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        if q <= 0.0 {
            return Ok(lo);
        }
        if q >= 1.0 {
            return Ok(hi);
        }
        let mismatch = |what: &str| {
            Error::MarginalMismatch(format!(
                "inverting {} + {} at {q}: {what}",
                self.base, self.noise
            ))
        };
        // bracket
        let scale = 1.0 + lo.abs().min(1e6) + hi.abs().min(1e6);
        let mut a = if lo.is_finite() { lo } else { -scale };
        let mut b = if hi.is_finite() { hi } else { scale };
        let mut step = scale;
        let mut tries = 0;
        while self.cdf(a) > q {
            a -= step;
            step *= 2.0;
            tries += 1;
            if tries > 200 {
                return Err(mismatch("no lower bracket"));
            }
        }
        step = scale;
        while self.cdf(b) < q {
            b += step;
            step *= 2.0;
            tries += 1;
            if tries > 400 {
                return Err(mismatch("no upper bracket"));
            }
        }
        for _ in 0..200 {
            if b - a <= INV_TOL * (1.0 + a.abs().max(b.abs())) {
                return Ok(b);
            }
            let mid = 0.5 * (a + b);
            if self.cdf(mid) >= q {
                b = mid;
            } else {
                a = mid;
            }
        }
        Err(mismatch("bisection did not converge"))
    }
}
