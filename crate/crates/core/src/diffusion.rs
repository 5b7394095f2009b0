//! Euler–Maruyama simulation of the limiting Langevin diffusion
//! `dY = √h dB - ½ h V̇(Y) dt` and its comparison with the rescaled chain.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::limits::speed;
use crate::rng::StreamKey;
use crate::rwm::{interpolated_first_coord_with, RwmConfig};
use crate::stats::{ks_bootstrap_se, ks_critical};
use crate::targets::TargetSpec;

pub use crate::stats::ks_distance;

/// Margin by which the support is shrunk before a move is accepted.
pub const BOUNDARY_MARGIN: f64 = 1e-9;
/// Rejection fraction above which the output carries a warning.
pub const REJECTION_WARN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub dt: f64,
    pub t_end: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl SdeConfig {
    pub fn new(t_end: f64, n_paths: usize, seed: u64) -> Self {
        SdeConfig { dt: 1e-3, t_end, n_paths, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.dt > 0.0 && self.dt <= self.t_end) {
            return Err(Error::Config(format!("dt must lie in (0, t_end], got {}", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSample {
    pub terminal: Vec<f64>,
    pub speed: f64,
    pub steps_per_path: usize,
    pub rejected: u64,
    pub rejection_fraction: f64,
    /// Set when more than 5% of moves were rejected at the boundary.
    pub warning: bool,
}

/// Terminal values of `n_paths` Euler–Maruyama paths started from `π`, with
/// `h = h(ℓ)` computed from the target's Fisher information.
pub fn euler_maruyama_paths(target: &TargetSpec, ell: f64, cfg: &SdeConfig) -> Result<DiffusionSample> {
    let fisher = target.fisher_information(&target.default_quad())?;
    euler_maruyama_with_speed(target, speed(fisher, ell)?, cfg)
}

/// As [`euler_maruyama_paths`] with the diffusion speed `h` given directly.
pub fn euler_maruyama_with_speed(target: &TargetSpec, h: f64, cfg: &SdeConfig) -> Result<DiffusionSample> {
    cfg.validate()?;
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("speed must be finite and nonnegative, got {h}")));
    }
    let steps = cfg.n_steps();
    let dt = cfg.t_end / steps as f64;
    let drift = 0.5 * h * dt;
    let noise = (h * dt).sqrt();
    let lo = target.support.lo + BOUNDARY_MARGIN;
    let hi = target.support.hi - BOUNDARY_MARGIN;
    let tag = target.tag();

    let paths = exec::map_indexed(cfg.n_paths, |i| {
        let mut rng = StreamKey::new(cfg.seed)
            .with_str("diffusion", &tag)
            .with_u64("path", i as u64)
            .stream();
        let mut y = target.sample_one(&mut rng);
        let mut rejected = 0u64;
        for _ in 0..steps {
            let z: f64 = StandardNormal.sample(&mut rng);
            let next = y - drift * target.grad_inside(y) + noise * z;
            if next >= lo && next <= hi {
                y = next;
            } else {
                rejected += 1;
            }
        }
        assert!(target.support.contains(y), "diffusion left the support");
        (y, rejected)
    });

    let rejected: u64 = paths.iter().map(|p| p.1).sum();
    let fraction = rejected as f64 / (steps as f64 * cfg.n_paths as f64);
    Ok(DiffusionSample {
        terminal: paths.into_iter().map(|p| p.0).collect(),
        speed: h,
        steps_per_path: steps,
        rejected,
        rejection_fraction: fraction,
        warning: fraction > REJECTION_WARN,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub d: usize,
    pub t: f64,
    pub ks: f64,
    pub ks_se: f64,
    pub critical_1pct: f64,
    pub n_chain: usize,
    pub n_diffusion: usize,
    pub seed: u64,
    pub diffusion_warning: bool,
    #[serde(skip)]
    pub chain_sample: Vec<f64>,
    #[serde(skip)]
    pub diffusion_sample: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareCfg {
    pub dt: f64,
    pub n_replicas: usize,
    pub seed: u64,
    /// Bootstrap resamples for the KS standard error; 0 skips it.
    pub bootstrap: usize,
}

impl CompareCfg {
    pub fn new(n_replicas: usize, seed: u64) -> Self {
        CompareCfg { dt: 1e-3, n_replicas, seed, bootstrap: 200 }
    }
}

/// KS distance between `n_replicas` draws of `Y^d_{t,1}` and the diffusion
/// marginal at time `t`. Chains and diffusion use independent substreams.
pub fn compare_chain_to_diffusion(target: &TargetSpec, ell: f64, d: usize, t: f64, cfg: &CompareCfg) -> Result<Comparison> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be finite and nonnegative, got {t}")));
    }
    let tag = target.tag();
    let n_steps = ((d as f64 * t).ceil() as usize).max(1);
    let chain_cfg = RwmConfig::new(d, ell, n_steps, cfg.seed);
    let chain = exec::map_indexed(cfg.n_replicas, |r| {
        let mut rng = StreamKey::new(cfg.seed)
            .with_str("compare-chain", &tag)
            .with_u64("d", d as u64)
            .with_u64("replica", r as u64)
            .stream();
        interpolated_first_coord_with(target, &chain_cfg, &[t], &mut rng).map(|v| v[0])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let (diffusion, warning) = if t == 0.0 {
        let draws = exec::map_indexed(cfg.n_replicas, |i| {
            let mut rng = StreamKey::new(cfg.seed)
                .with_str("diffusion", &tag)
                .with_u64("path", i as u64)
                .stream();
            target.sample_one(&mut rng)
        });
        (draws, false)
    } else {
        let sde = SdeConfig { dt: cfg.dt.min(t), t_end: t, n_paths: cfg.n_replicas, seed: cfg.seed };
        let s = euler_maruyama_paths(target, ell, &sde)?;
        (s.terminal, s.warning)
    };

    let ks = ks_distance(&chain, &diffusion)?;
    let ks_se = if cfg.bootstrap > 0 {
        let mut rng = StreamKey::new(cfg.seed).with_str("bootstrap", &tag).with_u64("d", d as u64).stream();
        ks_bootstrap_se(&chain, &diffusion, cfg.bootstrap, &mut rng)?
    } else {
        0.0
    };
    Ok(Comparison {
        d,
        t,
        ks,
        ks_se,
        critical_1pct: ks_critical(chain.len(), diffusion.len(), 0.01),
        n_chain: chain.len(),
        n_diffusion: diffusion.len(),
        seed: cfg.seed,
        diffusion_warning: warning,
        chain_sample: chain,
        diffusion_sample: diffusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_se;

    fn var_se(xs: &[f64]) -> (f64, f64) {
        let m = mean_se(xs).mean;
        let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
        let r = mean_se(&sq);
        (r.mean, r.se)
    }

    #[test]
    fn zero_speed_keeps_initial_state() {
        let t = TargetSpec::beta(10.0, 10.0).unwrap();
        let cfg = SdeConfig { dt: 0.1, t_end: 1.0, n_paths: 50, seed: 3 };
        let s = euler_maruyama_paths(&t, 0.0, &cfg).unwrap();
        let start: Vec<f64> = (0..50)
            .map(|i| {
                let mut rng = StreamKey::new(3).with_str("diffusion", &t.tag()).with_u64("path", i).stream();
                t.sample_one(&mut rng)
            })
            .collect();
        assert_eq!(s.terminal, start);
        assert_eq!(s.rejected, 0);
    }

    #[test]
    fn gaussian_marginal_is_invariant() {
        let t = TargetSpec::standard_gaussian();
        let s = euler_maruyama_paths(&t, 2.38, &SdeConfig::new(1.0, 20_000, 1)).unwrap();
        let m = mean_se(&s.terminal);
        assert!(m.mean.abs() < 5.0 * m.se);
        let (v, vse) = var_se(&s.terminal);
        assert!((v - 1.0).abs() < 5.0 * vse);
    }

    #[test]
    fn beta_marginal_mean_and_support() {
        let t = TargetSpec::beta(10.0, 10.0).unwrap();
        let s = euler_maruyama_paths(&t, 2.38 / 85.5f64.sqrt(), &SdeConfig::new(1.0, 20_000, 2)).unwrap();
        let m = mean_se(&s.terminal);
        assert!((m.mean - 0.5).abs() < 5.0 * m.se);
        assert!(s.terminal.iter().all(|&y| y > 0.0 && y < 1.0));
        assert!(!s.warning);
    }

    #[test]
    fn halving_dt_is_stable() {
        let t = TargetSpec::standard_gaussian();
        let a = euler_maruyama_paths(&t, 2.38, &SdeConfig { dt: 2e-3, t_end: 1.0, n_paths: 20_000, seed: 4 }).unwrap();
        let b = euler_maruyama_paths(&t, 2.38, &SdeConfig { dt: 1e-3, t_end: 1.0, n_paths: 20_000, seed: 5 }).unwrap();
        let (ma, mb) = (mean_se(&a.terminal), mean_se(&b.terminal));
        assert!((ma.mean - mb.mean).abs() < 3.0 * (ma.se.powi(2) + mb.se.powi(2)).sqrt());
        let ((va, sa), (vb, sb)) = (var_se(&a.terminal), var_se(&b.terminal));
        assert!((va - vb).abs() < 3.0 * (sa * sa + sb * sb).sqrt());
    }

    #[test]
    fn coarse_steps_near_boundary_raise_warning() {
        let t = TargetSpec::beta(10.0, 10.0).unwrap();
        let s = euler_maruyama_with_speed(&t, 50.0, &SdeConfig { dt: 0.01, t_end: 0.5, n_paths: 200, seed: 6 }).unwrap();
        assert!(s.warning && s.rejection_fraction > REJECTION_WARN);
        assert!(s.terminal.iter().all(|&y| y > 0.0 && y < 1.0));
    }

    #[test]
    fn config_errors() {
        let t = TargetSpec::standard_gaussian();
        assert!(euler_maruyama_paths(&t, 1.0, &SdeConfig { dt: 2.0, t_end: 1.0, n_paths: 1, seed: 0 }).is_err());
        assert!(euler_maruyama_paths(&t, 1.0, &SdeConfig { dt: 0.1, t_end: 0.0, n_paths: 1, seed: 0 }).is_err());
        assert!(euler_maruyama_paths(&t, 1.0, &SdeConfig { dt: 0.1, t_end: 1.0, n_paths: 0, seed: 0 }).is_err());
    }

    #[test]
    fn comparison_at_time_zero_is_null() {
        let t = TargetSpec::standard_gaussian();
        let c = compare_chain_to_diffusion(&t, 2.38, 20, 0.0, &CompareCfg { bootstrap: 0, ..CompareCfg::new(2000, 8) }).unwrap();
        assert!(c.ks < c.critical_1pct);
        assert_eq!((c.n_chain, c.n_diffusion), (2000, 2000));
    }

    #[test]
    fn comparison_is_deterministic() {
        let t = TargetSpec::lasso(1.0).unwrap();
        let cfg = CompareCfg { bootstrap: 20, ..CompareCfg::new(300, 9) };
        let a = compare_chain_to_diffusion(&t, 2.0, 10, 0.5, &cfg).unwrap();
        let b = compare_chain_to_diffusion(&t, 2.0, 10, 0.5, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.ks_se > 0.0);
    }
}
