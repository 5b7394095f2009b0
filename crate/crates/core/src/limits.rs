//! Limiting acceptance rate `a(ℓ)`, diffusion speed `h(ℓ)` and the
//! speed-maximizing scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special_fn::normal_cdf;

/// Grid points used to bracket the maximizer of `h` before refinement.
pub const BRACKET_POINTS: usize = 1024;
/// Upper end of the search interval in units of `1/√I`; `a(20/√I) < 1e-22`.
pub const SEARCH_UPPER: f64 = 20.0;
/// Width of the final golden-section interval.
pub const GOLDEN_TOL: f64 = 1e-10;

fn check(fisher: f64, ell: f64) -> Result<()> {
    if !(fisher > 0.0 && fisher.is_finite()) {
        return Err(Error::Domain(format!("Fisher information must be positive, got {fisher}")));
    }
    if !(ell >= 0.0) {
        return Err(Error::Domain(format!("scale must be nonnegative, got {ell}")));
    }
    Ok(())
}

/// `a(ℓ) = 2Φ(-ℓ√I/2)`.
pub fn acceptance_limit(fisher: f64, ell: f64) -> Result<f64> {
    check(fisher, ell)?;
    Ok(2.0 * normal_cdf(-0.5 * ell * fisher.sqrt()))
}

/// `h(ℓ) = ℓ² a(ℓ)`.
pub fn speed(fisher: f64, ell: f64) -> Result<f64> {
    Ok(ell * ell * acceptance_limit(fisher, ell)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalScaling {
    pub ell_star: f64,
    pub h_star: f64,
    pub acc_at_star: f64,
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Maximizes `h` over `(0, 20/√I]`.
pub fn optimal_scaling(fisher: f64) -> Result<OptimalScaling> {
    check(fisher, 0.0)?;
    let upper = SEARCH_UPPER / fisher.sqrt();
    let h = |l: f64| l * l * 2.0 * normal_cdf(-0.5 * l * fisher.sqrt());
    let step = upper / BRACKET_POINTS as f64;
    let best = (1..=BRACKET_POINTS)
        .map(|i| (i, h(i as f64 * step)))
        .fold((1, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc })
        .0;
    let lo = (best - 1) as f64 * step;
    let hi = ((best + 1) as f64 * step).min(upper);
    let ell_star = golden_section_max(h, lo, hi, GOLDEN_TOL);
    Ok(OptimalScaling {
        ell_star,
        h_star: h(ell_star),
        acc_at_star: acceptance_limit(fisher, ell_star)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub ell: f64,
    pub acceptance: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub fisher_info: f64,
    pub ell_star: f64,
    pub h_star: f64,
    pub acc_at_star: f64,
    pub curve: Vec<CurvePoint>,
}

/// Star point plus the `(ℓ, a(ℓ), h(ℓ))` curve on `n` evenly spaced scales in `(0, ell_max]`.
pub fn limit_report(fisher: f64, ell_max: f64, n: usize) -> Result<LimitReport> {
    let star = optimal_scaling(fisher)?;
    let curve = (1..=n)
        .map(|i| {
            let ell = ell_max * i as f64 / n as f64;
            let acceptance = acceptance_limit(fisher, ell)?;
            Ok(CurvePoint { ell, acceptance, speed: ell * ell * acceptance })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LimitReport {
        fisher_info: fisher,
        ell_star: star.ell_star,
        h_star: star.h_star,
        acc_at_star: star.acc_at_star,
        curve,
    })
}
