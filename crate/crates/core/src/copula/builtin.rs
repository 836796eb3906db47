//! Closed-form parametric families.

use crate::error::{Error, Result};

/// Frank copula with parameter `lambda != 0`.
///
/// Uses the standard form `-(1/λ) ln(1 + (e^{-λu}-1)(e^{-λv}-1)/(e^{-λ}-1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frank {
    lambda: f64,
    /// `e^{-λ} - 1`
    denom: f64,
}

/// Beyond this the exponentials overflow for negative parameters.
const FRANK_MAX_ABS: f64 = 500.0;

impl Frank {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda == 0.0 || lambda.abs() > FRANK_MAX_ABS {
            return Err(Error::InvalidParameter(format!(
                "Frank parameter must be finite, nonzero and |lambda| <= {FRANK_MAX_ABS}, got {lambda}"
            )));
        }
        Ok(Frank {
            lambda,
            denom: (-lambda).exp_m1(),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        // exact margins; the log form loses digits near them for large lambda
        if u >= 1.0 {
            return v;
        }
        if v >= 1.0 {
            return u;
        }
        let a = (-self.lambda * u).exp_m1();
        let b = (-self.lambda * v).exp_m1();
        let c = -(a * b / self.denom).ln_1p() / self.lambda;
        c.clamp(0.0, 1.0)
    }

    pub fn partial_u(&self, u: f64, v: f64) -> f64 {
        let a = (-self.lambda * u).exp_m1();
        let b = (-self.lambda * v).exp_m1();
        ((-self.lambda * u).exp() * b / (self.denom + a * b)).clamp(0.0, 1.0)
    }

    pub fn partial_v(&self, u: f64, v: f64) -> f64 {
        self.partial_u(v, u)
    }

    pub fn density(&self, u: f64, v: f64) -> f64 {
        let a = (-self.lambda * u).exp_m1();
        let b = (-self.lambda * v).exp_m1();
        let q = self.denom + a * b;
        -self.lambda * self.denom * (-self.lambda * (u + v)).exp() / (q * q)
    }
}

/// Farlie–Gumbel–Morgenstern copula `uv + θ uv(1-u)(1-v)`, θ ∈ [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fgm {
    theta: f64,
}

impl Fgm {
    pub fn new(theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!(
                "FGM parameter must lie in [0, 1], got {theta}"
            )));
        }
        Ok(Fgm { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        u * v * (1.0 + self.theta * (1.0 - u) * (1.0 - v))
    }

    pub fn partial_u(&self, u: f64, v: f64) -> f64 {
        v + self.theta * v * (1.0 - v) * (1.0 - 2.0 * u)
    }

    pub fn partial_v(&self, u: f64, v: f64) -> f64 {
        self.partial_u(v, u)
    }

    pub fn density(&self, u: f64, v: f64) -> f64 {
        1.0 + self.theta * (1.0 - 2.0 * u) * (1.0 - 2.0 * v)
    }
}
