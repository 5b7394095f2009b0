//! One-dimensional target families `π(x) ∝ exp(-V(x))` on an open interval.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::{beta::ln_beta, gamma::ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadResult, QuadratureCfg, TailTransform};
use crate::rng::SeedStream;
use crate::special_fn::ln_normal_cdf;

/// Open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SupportInterval {
    pub const REAL_LINE: SupportInterval = SupportInterval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::Domain(format!("support requires lo < hi, got ({lo}, {hi})")));
        }
        Ok(SupportInterval { lo, hi })
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn is_real_line(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }
}

/// Smooth part `U` of a Bayesian-Lasso potential `V = U + λ|x|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SmoothPart {
    Zero,
    /// `U(x) = coef · x² / 2`.
    Quadratic { coef: f64 },
}

impl SmoothPart {
    fn coef(self) -> f64 {
        match self {
            SmoothPart::Zero => 0.0,
            SmoothPart::Quadratic { coef } => coef,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Gaussian { mean: f64, variance: f64 },
    BayesianLasso { lambda: f64, smooth: SmoothPart },
    GeneralizedGamma { a1: f64, a2: f64 },
    Beta { a1: f64, a2: f64 },
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Family::Gaussian { mean, variance } => write!(f, "gaussian(mean={mean};variance={variance})"),
            Family::BayesianLasso { lambda, smooth: SmoothPart::Zero } => write!(f, "lasso(lambda={lambda})"),
            Family::BayesianLasso { lambda, smooth: SmoothPart::Quadratic { coef } } => {
                write!(f, "lasso(lambda={lambda};quad={coef})")
            }
            Family::GeneralizedGamma { a1, a2 } => write!(f, "gengamma(a1={a1};a2={a2})"),
            Family::Beta { a1, a2 } => write!(f, "beta(a1={a1};a2={a2})"),
        }
    }
}

impl Family {
    fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite")))
            }
        };
        match *self {
            Family::Gaussian { mean, variance } => {
                finite("mean", mean)?;
                finite("variance", variance)?;
                if variance <= 0.0 {
                    return Err(Error::Config("variance must be positive".into()));
                }
            }
            Family::BayesianLasso { lambda, smooth } => {
                finite("lambda", lambda)?;
                if lambda < 0.0 {
                    return Err(Error::Config("lambda must be nonnegative".into()));
                }
                match smooth {
                    SmoothPart::Zero if lambda == 0.0 => {
                        return Err(Error::Config(
                            "lambda must be positive when the smooth part is zero".into(),
                        ))
                    }
                    SmoothPart::Quadratic { coef } if !(coef > 0.0 && coef.is_finite()) => {
                        return Err(Error::Config("quadratic coefficient must be positive".into()))
                    }
                    _ => {}
                }
            }
            Family::GeneralizedGamma { a1, a2 } => {
                finite("a1", a1)?;
                finite("a2", a2)?;
                if a1 <= 6.0 {
                    return Err(Error::Config("a1 must exceed 6".into()));
                }
                if a2 <= 0.0 {
                    return Err(Error::Config("a2 must be positive".into()));
                }
            }
            Family::Beta { a1, a2 } => {
                finite("a1", a1)?;
                finite("a2", a2)?;
                if a1 <= 6.0 {
                    return Err(Error::Config("a1 must exceed 6".into()));
                }
                if a2 <= 6.0 {
                    return Err(Error::Config("a2 must exceed 6".into()));
                }
            }
        }
        Ok(())
    }

    fn support(&self) -> SupportInterval {
        match self {
            Family::GeneralizedGamma { .. } => SupportInterval { lo: 0.0, hi: f64::INFINITY },
            Family::Beta { .. } => SupportInterval { lo: 0.0, hi: 1.0 },
            _ => SupportInterval::REAL_LINE,
        }
    }

    fn log_norm(&self) -> f64 {
        use std::f64::consts::{LN_2, PI};
        match *self {
            Family::Gaussian { variance, .. } => 0.5 * (2.0 * PI * variance).ln(),
            Family::BayesianLasso { lambda, smooth: SmoothPart::Zero } => LN_2 - lambda.ln(),
            Family::BayesianLasso { lambda, smooth: SmoothPart::Quadratic { coef } } => {
                // 2 √(2π/c) exp(λ²/2c) Φ(-λ/√c)
                LN_2 + 0.5 * (2.0 * PI / coef).ln() + lambda * lambda / (2.0 * coef)
                    + ln_normal_cdf(-lambda / coef.sqrt())
            }
            Family::GeneralizedGamma { a1, a2 } => ln_gamma(a1 / a2) - a2.ln(),
            Family::Beta { a1, a2 } => ln_beta(a1, a2),
        }
    }
}

/// An immutable, validated target density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub family: Family,
    pub support: SupportInterval,
    /// `ln ∫ exp(-V)` over the support.
    pub log_norm: f64,
    /// Split parameter `r > 1` of the interval-support remainder; `None` on ℝ.
    pub r_split: Option<f64>,
}

/// Relative tolerance for the construction-time normalization check.
const NORMALIZATION_TOL: f64 = 1e-8;

impl TargetSpec {
    pub fn new(family: Family) -> Result<Self> {
        family.validate()?;
        let support = family.support();
        let r_split = if support.is_real_line() { None } else { Some(1.5) };
        let spec = TargetSpec {
            family,
            support,
            log_norm: family.log_norm(),
            r_split,
        };
        let total = spec.integrate_density(|_| 1.0, &[], &spec.default_quad())?;
        if (total.value - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Numeric {
                context: format!("normalization check for {family}"),
                estimate: total.value,
                error_bound: total.error,
            });
        }
        Ok(spec)
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        Self::new(Family::Gaussian { mean, variance })
    }

    pub fn standard_gaussian() -> Self {
        Self::gaussian(0.0, 1.0).expect("standard normal is valid")
    }

    pub fn lasso(lambda: f64) -> Result<Self> {
        Self::new(Family::BayesianLasso { lambda, smooth: SmoothPart::Zero })
    }

    pub fn lasso_quadratic(lambda: f64, coef: f64) -> Result<Self> {
        Self::new(Family::BayesianLasso { lambda, smooth: SmoothPart::Quadratic { coef } })
    }

    pub fn generalized_gamma(a1: f64, a2: f64) -> Result<Self> {
        Self::new(Family::GeneralizedGamma { a1, a2 })
    }

    pub fn beta(a1: f64, a2: f64) -> Result<Self> {
        Self::new(Family::Beta { a1, a2 })
    }

    pub fn tag(&self) -> String {
        self.family.to_string()
    }

    /// Potential `V(x)`, `+∞` outside the support.
    #[inline]
    pub fn potential(&self, x: f64) -> f64 {
        if !self.support.contains(x) {
            return f64::INFINITY;
        }
        match self.family {
            Family::Gaussian { mean, variance } => {
                let u = x - mean;
                0.5 * u * u / variance
            }
            Family::BayesianLasso { lambda, smooth } => 0.5 * smooth.coef() * x * x + lambda * x.abs(),
            Family::GeneralizedGamma { a1, a2 } => x.powf(a2) - (a1 - 1.0) * x.ln(),
            Family::Beta { a1, a2 } => -(a1 - 1.0) * x.ln() - (a2 - 1.0) * (-x).ln_1p(),
        }
    }

    /// Mean derivative `V̇(x)`; `x` must lie strictly inside the support.
    pub fn grad_potential(&self, x: f64) -> Result<f64> {
        if !self.support.contains(x) {
            return Err(Error::Domain(format!("V̇ requested at {x}, outside {}", self.tag())));
        }
        Ok(self.grad_inside(x))
    }

    /// `V̇(x)` without the support check.
    #[inline]
    pub(crate) fn grad_inside(&self, x: f64) -> f64 {
        match self.family {
            Family::Gaussian { mean, variance } => (x - mean) / variance,
            Family::BayesianLasso { lambda, smooth } => {
                let sign = if x <= 0.0 { -1.0 } else { 1.0 };
                smooth.coef() * x + lambda * sign
            }
            Family::GeneralizedGamma { a1, a2 } => a2 * x.powf(a2 - 1.0) - (a1 - 1.0) / x,
            Family::Beta { a1, a2 } => -(a1 - 1.0) / x + (a2 - 1.0) / (1.0 - x),
        }
    }

    /// Normalized density `π(x)`.
    #[inline]
    pub fn density(&self, x: f64) -> f64 {
        (-self.potential(x) - self.log_norm).exp()
    }

    /// `V(x) - V(y) = ln π(y)/π(x)`; `-∞` when `y` leaves the support.
    pub fn log_density_ratio(&self, x: f64, y: f64) -> Result<f64> {
        if !self.support.contains(x) {
            return Err(Error::Domain(format!("chain state {x} outside the support of {}", self.tag())));
        }
        if !self.support.contains(y) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.potential(x) - self.potential(y))
    }

    /// Points where `V` or `V̇` is not smooth (plus the Gaussian center).
    pub fn kinks(&self) -> Vec<f64> {
        match self.family {
            Family::Gaussian { mean, .. } => vec![mean],
            Family::BayesianLasso { .. } => vec![0.0],
            _ => Vec::new(),
        }
    }

    /// Typical length scale of the bulk of `π`, used by the tail maps.
    pub fn length_scale(&self) -> f64 {
        match self.family {
            Family::Gaussian { variance, .. } => variance.sqrt(),
            Family::BayesianLasso { lambda, smooth } => {
                let c = smooth.coef();
                if c > 0.0 {
                    (1.0 / c.sqrt()).min(if lambda > 0.0 { 1.0 / lambda } else { f64::INFINITY })
                } else {
                    1.0 / lambda
                }
            }
            Family::GeneralizedGamma { a1, a2 } => (ln_gamma((a1 + 1.0) / a2) - ln_gamma(a1 / a2)).exp(),
            Family::Beta { .. } => 1.0,
        }
    }

    /// Quadrature settings suited to this family's support.
    pub fn default_quad(&self) -> QuadratureCfg {
        let transform = match self.family {
            Family::Beta { .. } => TailTransform::LogitMap,
            _ => TailTransform::ExpMap,
        };
        QuadratureCfg::default().with_transform(transform)
    }

    /// `∫ f(x) π(x) dx` over the support, split at the family kinks and `extra_breaks`.
    pub fn integrate_density<F>(&self, f: F, extra_breaks: &[f64], quad: &QuadratureCfg) -> Result<QuadResult>
    where
        F: Fn(f64) -> f64,
    {
        let mut breaks = self.kinks();
        breaks.extend_from_slice(extra_breaks);
        integrate(
            |x| {
                let p = self.density(x);
                if p == 0.0 {
                    0.0
                } else {
                    f(x) * p
                }
            },
            self.support.lo,
            self.support.hi,
            &breaks,
            self.length_scale(),
            quad,
        )
    }

    /// Fisher information of the translation model, `I = ∫ V̇² π`.
    pub fn fisher_information(&self, quad: &QuadratureCfg) -> Result<f64> {
        if let Family::BayesianLasso { lambda, smooth: SmoothPart::Zero } = self.family {
            // V̇² ≡ λ² everywhere
            return Ok(lambda * lambda);
        }
        let r = self.integrate_density(
            |x| {
                let g = self.grad_inside(x);
                g * g
            },
            &[],
            quad,
        )?;
        Ok(r.value)
    }

    /// Raw moment `E[X^k]` by quadrature.
    ///
    /// The tolerance is taken relative to `E|X|^k`, so moments that vanish by
    /// symmetry still converge.
    pub fn moment(&self, k: i32, quad: &QuadratureCfg) -> Result<f64> {
        let scale = self.integrate_density(|x| x.abs().powi(k), &[], quad)?.value;
        let cfg = QuadratureCfg { abs_tol: quad.abs_tol.max(quad.rel_tol * scale), ..*quad };
        Ok(self.integrate_density(|x| x.powi(k), &[], &cfg)?.value)
    }

    /// One exact draw from `π`.
    pub fn sample_one(&self, rng: &mut SeedStream) -> f64 {
        match self.family {
            Family::Gaussian { mean, variance } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + variance.sqrt() * z
            }
            Family::BayesianLasso { lambda, smooth: SmoothPart::Zero } => {
                let e: f64 = Exp1.sample(rng);
                let m = e / lambda;
                if rng.random::<bool>() {
                    m
                } else {
                    -m
                }
            }
            Family::BayesianLasso { lambda, smooth: SmoothPart::Quadratic { coef } } => {
                // On each half-line the density is a normal N(-λ/c, 1/c) cut at 0.
                let sd = 1.0 / coef.sqrt();
                let w = sample_normal_tail(lambda * sd, rng);
                let m = sd * w - lambda / coef;
                if rng.random::<bool>() {
                    m
                } else {
                    -m
                }
            }
            Family::GeneralizedGamma { a1, a2 } => {
                let g = Gamma::new(a1 / a2, 1.0).expect("shape > 0").sample(rng);
                g.powf(1.0 / a2)
            }
            Family::Beta { a1, a2 } => loop {
                let g1: f64 = Gamma::new(a1, 1.0).expect("shape > 0").sample(rng);
                let g2: f64 = Gamma::new(a2, 1.0).expect("shape > 0").sample(rng);
                let x = g1 / (g1 + g2);
                if self.support.contains(x) {
                    break x;
                }
            },
        }
    }

    /// `n` i.i.d. draws from `π`.
    pub fn sample_stationary(&self, rng: &mut SeedStream, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }
}

/// Standard normal conditioned on `W > a`, for `a ≥ 0`.
fn sample_normal_tail(a: f64, rng: &mut SeedStream) -> f64 {
    if a < 0.5 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z > a {
                return z;
            }
        }
    }
    // Exponential proposal with the optimal rate.
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let z = a + e / alpha;
        let u: f64 = rng.random();
        if u <= (-0.5 * (z - alpha) * (z - alpha)).exp() {
            return z;
        }
    }
}
