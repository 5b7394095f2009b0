//! Scalar special functions used by the limit theory.
//!
//! `g_fn` and `gamma_fn` are the Gaussian expectations that appear when the
//! log acceptance ratio is approximated by a normal variable: for
//! `G ~ N(mu, sigma2)`, `E[1 ∧ e^G] = gamma_fn(sigma2, -2 mu)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A value in `[0, +∞]`, with infinity kept as a distinguished element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtendedNonneg {
    Finite(f64),
    Infinity,
}

impl ExtendedNonneg {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value < 0.0 {
            return Err(Error::Domain(format!("expected a nonnegative value, got {value}")));
        }
        if value == f64::INFINITY {
            Ok(ExtendedNonneg::Infinity)
        } else {
            Ok(ExtendedNonneg::Finite(value))
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtendedNonneg::Infinity)
    }
}

impl From<f64> for ExtendedNonneg {
    /// Panics on negative or NaN input; use [`ExtendedNonneg::new`] for checked construction.
    fn from(value: f64) -> Self {
        ExtendedNonneg::new(value).expect("ExtendedNonneg requires value >= 0")
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    if x < -8.0 {
        return ln_normal_cdf(x).exp();
    }
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Natural log of the standard normal CDF, accurate far into the left tail.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x >= -8.0 {
        return (0.5 * libm::erfc(-x * FRAC_1_SQRT_2)).ln();
    }
    // Phi(x) = phi(x) * R(-x) with the Mills ratio R given by the Laplace
    // continued fraction R(t) = 1/(t + 1/(t + 2/(t + 3/(t + ...)))).
    let t = -x;
    let ln_phi = -0.5 * x * x - 0.5 * (2.0 * PI).ln();
    ln_phi + mills_ratio(t).ln()
}

// Modified Lentz evaluation; converges fast for t >= 8.
fn mills_ratio(t: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = t;
    let mut c = t;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64;
        d = t + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = t + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// `exp(s) * Phi(u)` evaluated in log space when either factor is extreme.
fn exp_times_cdf(s: f64, u: f64) -> f64 {
    if s.abs() < 700.0 && u > -37.0 {
        return s.exp() * normal_cdf(u);
    }
    (s + ln_normal_cdf(u)).exp()
}

/// The function 𝒢(a, b).
pub fn g_fn(a: ExtendedNonneg, b: f64) -> f64 {
    match a {
        ExtendedNonneg::Infinity => 0.0,
        ExtendedNonneg::Finite(0.0) => {
            if b > 0.0 {
                (-b / 2.0).exp()
            } else {
                0.0
            }
        }
        ExtendedNonneg::Finite(a) => {
            let root = a.sqrt();
            exp_times_cdf((a - b) / 2.0, b / (2.0 * root) - root)
        }
    }
}

/// The function Γ(a, b) = Φ(-b / (2√a)) + 𝒢(a, b) on the finite positive branch.
pub fn gamma_fn(a: ExtendedNonneg, b: f64) -> f64 {
    match a {
        ExtendedNonneg::Infinity => 0.5,
        ExtendedNonneg::Finite(0.0) => (-b.max(0.0) / 2.0).exp(),
        ExtendedNonneg::Finite(a) => {
            normal_cdf(-b / (2.0 * a.sqrt())) + g_fn(ExtendedNonneg::Finite(a), b)
        }
    }
}

/// `E[1 ∧ exp(G)]` for `G ~ N(mu, sigma2)`.
pub fn expected_min_one_exp(mu: f64, sigma2: f64) -> f64 {
    assert!(sigma2 >= 0.0, "sigma2 must be nonnegative");
    if sigma2 == 0.0 {
        return mu.exp().min(1.0);
    }
    let sigma = sigma2.sqrt();
    normal_cdf(mu / sigma) + exp_times_cdf(mu + sigma2 / 2.0, -sigma - mu / sigma)
}
