//! Random Walk Metropolis on the product target `π^{⊗d}` with proposal
//! `y = x + ℓ d^{-1/2} Z`, started from stationarity.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::rng::{SeedStream, StreamKey};
use crate::stats::{pool, BatchMeans, MeanSe};
use crate::targets::TargetSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwmConfig {
    pub d: usize,
    pub ell: f64,
    pub n_steps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub record_first_coord: bool,
    /// Diffusion times `t` at which `Y^d_t` of the first coordinate is recorded.
    pub record_times: Vec<f64>,
}

impl RwmConfig {
    pub fn new(d: usize, ell: f64, n_steps: usize, seed: u64) -> Self {
        RwmConfig {
            d,
            ell,
            n_steps,
            burn_in: 0,
            seed,
            record_first_coord: false,
            record_times: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("d must be at least 1".into()));
        }
        if !(self.ell > 0.0 && self.ell.is_finite()) {
            return Err(Error::Config(format!("ell must be positive, got {}", self.ell)));
        }
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be at least 1".into()));
        }
        if self.record_first_coord {
            if self.record_times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                return Err(Error::Config("record_times must be finite and nonnegative".into()));
            }
            if self.record_times.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Config("record_times must be sorted ascending".into()));
            }
            if let Some(&last) = self.record_times.last() {
                if last * self.d as f64 > self.n_steps as f64 {
                    return Err(Error::Range {
                        what: format!(
                            "record time {last} needs {} steps, chain has {}",
                            (last * self.d as f64).ceil(),
                            self.n_steps
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub acc_rate: f64,
    pub acc_se: f64,
    pub esjd: f64,
    pub esjd_se: f64,
    pub n_steps: usize,
    pub d: usize,
    pub ell: f64,
    /// `(t, Y^d_t)` pairs for the first coordinate, when recording is on.
    pub first_coord_marginals: Option<Vec<(f64, f64)>>,
}

/// One ESJD/acceptance grid cell, pooled over replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub family: String,
    pub d: usize,
    pub ell: f64,
    pub acc_rate: f64,
    pub acc_se: f64,
    pub esjd: f64,
    pub esjd_se: f64,
    pub n_steps: usize,
    pub replicas: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    pub sq_jump: f64,
}

/// Chain state with cached per-coordinate potentials and proposal buffers.
struct Kernel<'a> {
    target: &'a TargetSpec,
    step: f64,
    x: Vec<f64>,
    vx: Vec<f64>,
    y: Vec<f64>,
    vy: Vec<f64>,
    z: Vec<f64>,
}

impl<'a> Kernel<'a> {
    fn new(target: &'a TargetSpec, x: Vec<f64>, ell: f64) -> Self {
        let d = x.len();
        let vx = x.iter().map(|&v| target.potential(v)).collect();
        Kernel {
            target,
            step: ell / (d as f64).sqrt(),
            x,
            vx,
            y: vec![0.0; d],
            vy: vec![0.0; d],
            z: vec![0.0; d],
        }
    }

    fn draw_noise(&mut self, rng: &mut SeedStream) {
        for z in self.z.iter_mut() {
            *z = StandardNormal.sample(rng);
        }
    }

    /// Proposes from the noise in `self.z` and accepts against `log_u`,
    /// which is only drawn when the log ratio is finite and negative.
    fn advance<U: FnOnce() -> f64>(&mut self, log_u: U) -> StepOutcome {
        let mut log_ratio = 0.0;
        let mut z2 = 0.0;
        for i in 0..self.x.len() {
            let zi = self.z[i];
            z2 += zi * zi;
            let yi = self.x[i] + self.step * zi;
            let v = self.target.potential(yi);
            if v == f64::INFINITY {
                return StepOutcome { accepted: false, sq_jump: 0.0 };
            }
            self.y[i] = yi;
            self.vy[i] = v;
            log_ratio += self.vx[i] - v;
        }
        let accepted = log_ratio >= 0.0 || log_u() < log_ratio;
        if !accepted {
            return StepOutcome { accepted: false, sq_jump: 0.0 };
        }
        std::mem::swap(&mut self.x, &mut self.y);
        std::mem::swap(&mut self.vx, &mut self.vy);
        debug_assert!(self.x.iter().all(|&v| self.target.support.contains(v)));
        StepOutcome { accepted: true, sq_jump: self.step * self.step * z2 }
    }

    fn step(&mut self, rng: &mut SeedStream) -> StepOutcome {
        self.draw_noise(rng);
        self.advance(|| rng.random::<f64>().ln())
    }
}

/// One RWM transition from `state`: returns the new state, the accept flag
/// and the squared jump `‖y - x‖²` (zero on rejection).
pub fn rwm_step(target: &TargetSpec, state: &[f64], ell: f64, rng: &mut SeedStream) -> (Vec<f64>, bool, f64) {
    let mut k = Kernel::new(target, state.to_vec(), ell);
    let out = k.step(rng);
    (k.x, out.accepted, out.sq_jump)
}

/// RWM transition with the proposal noise `z` and `log U` supplied by the caller.
pub fn rwm_step_with_noise(target: &TargetSpec, state: &[f64], ell: f64, z: &[f64], log_u: f64) -> (Vec<f64>, bool, f64) {
    assert_eq!(z.len(), state.len(), "noise length must equal the dimension");
    let mut k = Kernel::new(target, state.to_vec(), ell);
    k.z.copy_from_slice(z);
    let out = k.advance(|| log_u);
    (k.x, out.accepted, out.sq_jump)
}

/// Acceptance probability `1 ∧ exp(Σ V(x_i) - V(y_i))` of a given proposal.
pub fn acceptance_probability(target: &TargetSpec, x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let vb = target.potential(b);
        if vb == f64::INFINITY {
            return 0.0;
        }
        s += target.potential(a) - vb;
    }
    s.exp().min(1.0)
}

/// Runs a chain from a stationary start with substreams derived from `cfg.seed`.
pub fn run_chain(target: &TargetSpec, cfg: &RwmConfig) -> Result<ChainSummary> {
    let mut rng = StreamKey::new(cfg.seed).with_str("chain", &target.tag()).stream();
    run_chain_with(target, cfg, &mut rng)
}

/// Runs a chain drawing all randomness (initial state included) from `rng`.
pub fn run_chain_with(target: &TargetSpec, cfg: &RwmConfig, rng: &mut SeedStream) -> Result<ChainSummary> {
    cfg.validate()?;
    let x0 = target.sample_stationary(rng, cfg.d);
    let mut k = Kernel::new(target, x0, cfg.ell);
    for _ in 0..cfg.burn_in {
        k.step(rng);
    }

    let mut rec = cfg.record_first_coord.then(|| Recorder::new(&cfg.record_times, cfg.d));
    if let Some(r) = rec.as_mut() {
        r.observe(0, k.x[0]);
    }

    let mut acc = BatchMeans::new(cfg.n_steps);
    let mut jump = BatchMeans::new(cfg.n_steps);
    for n in 1..=cfg.n_steps {
        let out = k.step(rng);
        acc.push(if out.accepted { 1.0 } else { 0.0 });
        jump.push(out.sq_jump);
        if let Some(r) = rec.as_mut() {
            if n <= r.last_index {
                r.observe(n, k.x[0]);
            }
        }
    }
    let a = acc.finish();
    let j = jump.finish();
    Ok(ChainSummary {
        acc_rate: a.mean,
        acc_se: a.se,
        esjd: j.mean,
        esjd_se: j.se,
        n_steps: cfg.n_steps,
        d: cfg.d,
        ell: cfg.ell,
        first_coord_marginals: rec.map(|r| r.finish()),
    })
}

/// Captures `X_{k,1}` at the indices needed to interpolate `Y^d_t`.
struct Recorder {
    times: Vec<f64>,
    d: f64,
    /// Sorted, deduplicated chain indices and their recorded values.
    wanted: Vec<usize>,
    values: Vec<f64>,
    last_index: usize,
}

impl Recorder {
    fn new(times: &[f64], d: usize) -> Self {
        let df = d as f64;
        let mut wanted: Vec<usize> = times
            .iter()
            .flat_map(|t| {
                let s = t * df;
                [s.floor() as usize, s.ceil() as usize]
            })
            .collect();
        wanted.sort_unstable();
        wanted.dedup();
        let last_index = wanted.last().copied().unwrap_or(0);
        Recorder {
            times: times.to_vec(),
            d: df,
            values: vec![f64::NAN; wanted.len()],
            wanted,
            last_index,
        }
    }

    fn observe(&mut self, n: usize, x1: f64) {
        if let Ok(i) = self.wanted.binary_search(&n) {
            self.values[i] = x1;
        }
    }

    fn value_at(&self, n: usize) -> f64 {
        self.values[self.wanted.binary_search(&n).expect("index recorded")]
    }

    fn finish(self) -> Vec<(f64, f64)> {
        self.times
            .iter()
            .map(|&t| {
                let s = t * self.d;
                let (lo, hi) = (s.floor(), s.ceil());
                let y = if lo == hi {
                    self.value_at(lo as usize)
                } else {
                    (hi - s) * self.value_at(lo as usize) + (s - lo) * self.value_at(hi as usize)
                };
                (t, y)
            })
            .collect()
    }
}

/// `Y^d_t` of the first coordinate at each of `times` along one chain.
pub fn interpolated_first_coord(target: &TargetSpec, cfg: &RwmConfig, times: &[f64]) -> Result<Vec<f64>> {
    let mut rng = StreamKey::new(cfg.seed).with_str("chain", &target.tag()).stream();
    interpolated_first_coord_with(target, cfg, times, &mut rng)
}

pub fn interpolated_first_coord_with(
    target: &TargetSpec,
    cfg: &RwmConfig,
    times: &[f64],
    rng: &mut SeedStream,
) -> Result<Vec<f64>> {
    let mut c = cfg.clone();
    c.record_first_coord = true;
    c.record_times = times.to_vec();
    let summary = run_chain_with(target, &c, rng)?;
    Ok(summary
        .first_coord_marginals
        .expect("recording enabled")
        .into_iter()
        .map(|(_, y)| y)
        .collect())
}

/// Seed key of replica `replica` at grid position `ell_index`.
pub fn cell_key(base_seed: u64, family: &str, d: usize, ell_index: usize, replica: usize) -> StreamKey {
    StreamKey::new(base_seed)
        .with_str("family", family)
        .with_u64("d", d as u64)
        .with_u64("ell", ell_index as u64)
        .with_u64("replica", replica as u64)
}

/// Replica-pooled row for one grid cell.
pub fn curve_cell(
    target: &TargetSpec,
    d: usize,
    ell_index: usize,
    ell: f64,
    replicas: usize,
    n_steps: usize,
    base_seed: u64,
) -> Result<CurveRow> {
    let tag = target.tag();
    let cfg = RwmConfig::new(d, ell, n_steps, base_seed);
    let parts = exec::map_indexed(replicas, |r| {
        let mut rng = cell_key(base_seed, &tag, d, ell_index, r).stream();
        run_chain_with(target, &cfg, &mut rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(pooled_row(&tag, d, ell, n_steps, base_seed, &parts))
}

fn pooled_row(tag: &str, d: usize, ell: f64, n_steps: usize, seed: u64, parts: &[ChainSummary]) -> CurveRow {
    let acc: Vec<MeanSe> = parts.iter().map(|p| MeanSe { mean: p.acc_rate, se: p.acc_se }).collect();
    let jump: Vec<MeanSe> = parts.iter().map(|p| MeanSe { mean: p.esjd, se: p.esjd_se }).collect();
    let (a, j) = (pool(&acc), pool(&jump));
    CurveRow {
        family: tag.to_string(),
        d,
        ell,
        acc_rate: a.mean,
        acc_se: a.se,
        esjd: j.mean,
        esjd_se: j.se,
        n_steps,
        replicas: parts.len(),
        seed,
    }
}

/// Acceptance and ESJD over an ascending `ell_grid`, one pooled row per scale.
///
/// All `(ℓ, replica)` chains run as independent parallel tasks.
pub fn esjd_curve(
    target: &TargetSpec,
    d: usize,
    ell_grid: &[f64],
    replicas: usize,
    n_steps: usize,
    base_seed: u64,
) -> Result<Vec<CurveRow>> {
    if ell_grid.is_empty() {
        return Err(Error::Config("ell_grid must be nonempty".into()));
    }
    if ell_grid.iter().any(|l| !(*l > 0.0)) || ell_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("ell_grid must be positive and strictly ascending".into()));
    }
    if replicas == 0 {
        return Err(Error::Config("replicas must be at least 1".into()));
    }
    let tag = target.tag();
    let cells = ell_grid.len() * replicas;
    let runs = exec::map_indexed(cells, |c| {
        let (li, r) = (c / replicas, c % replicas);
        let cfg = RwmConfig::new(d, ell_grid[li], n_steps, base_seed);
        let mut rng = cell_key(base_seed, &tag, d, li, r).stream();
        run_chain_with(target, &cfg, &mut rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(runs
        .chunks(replicas)
        .zip(ell_grid)
        .map(|(parts, &ell)| pooled_row(&tag, d, ell, n_steps, base_seed, parts))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::acceptance_limit;
    use crate::stats::{ks_critical, ks_distance};

    #[test]
    fn zero_noise_is_accepted_without_moving() {
        let t = TargetSpec::beta(10.0, 10.0).unwrap();
        let x = vec![0.3, 0.6, 0.5];
        let (y, acc, j) = rwm_step_with_noise(&t, &x, 1.0, &[0.0; 3], 0.0_f64.ln());
        assert!(acc);
        assert_eq!(j, 0.0);
        assert_eq!(y, x);
    }

    #[test]
    fn proposals_leaving_support_are_rejected() {
        let t = TargetSpec::beta(10.0, 10.0).unwrap();
        let x = vec![0.999; 4];
        let (y, acc, j) = rwm_step_with_noise(&t, &x, 10.0, &[0.0, 0.0, 0.5, 0.0], f64::NEG_INFINITY);
        assert!(!acc);
        assert_eq!(j, 0.0);
        assert_eq!(y, x);
        let mut rng = SeedStream::from_seed(1);
        for _ in 0..200 {
            let (y, _, _) = rwm_step(&t, &x, 50.0, &mut rng);
            assert!(y.iter().all(|v| t.support.contains(*v)));
        }
    }

    #[test]
    fn gaussian_unit_step_probability() {
        let t = TargetSpec::standard_gaussian();
        let p = acceptance_probability(&t, &[0.0], &[1.0]);
        assert!((p - (-0.5f64).exp()).abs() < 1e-15);
        // accepted iff log U < -1/2
        let (_, acc, j) = rwm_step_with_noise(&t, &[0.0], 1.0, &[1.0], -0.51);
        assert!(acc && j == 1.0);
        let (_, acc, _) = rwm_step_with_noise(&t, &[0.0], 1.0, &[1.0], -0.49);
        assert!(!acc);
    }

    #[test]
    fn tiny_scale_accepts_almost_everything() {
        for t in [TargetSpec::standard_gaussian(), TargetSpec::beta(10.0, 10.0).unwrap(), TargetSpec::lasso(1.0).unwrap()] {
            let s = run_chain(&t, &RwmConfig::new(10, 1e-4, 2000, 9)).unwrap();
            assert!(s.acc_rate >= 0.999, "{}: {}", t.tag(), s.acc_rate);
        }
    }

    #[test]
    fn run_chain_is_deterministic() {
        let t = TargetSpec::generalized_gamma(7.0, 1.0).unwrap();
        let cfg = RwmConfig::new(20, 0.8, 3000, 42);
        let a = run_chain(&t, &cfg).unwrap();
        let b = run_chain(&t, &cfg).unwrap();
        assert_eq!(a, b);
        let c = run_chain(&t, &RwmConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.acc_rate.to_bits(), c.acc_rate.to_bits());
    }

    #[test]
    fn gaussian_acceptance_near_limit() {
        let t = TargetSpec::standard_gaussian();
        let rows = esjd_curve(&t, 50, &[1.0], 4, 20_000, 7).unwrap();
        let a = acceptance_limit(1.0, 1.0).unwrap();
        assert!((rows[0].acc_rate - a).abs() < 0.02);
        assert!(rows[0].acc_se > 0.0 && rows[0].esjd_se > 0.0);
    }

    #[test]
    fn single_point_grid_equals_pooled_chains() {
        let t = TargetSpec::standard_gaussian();
        let rows = esjd_curve(&t, 8, &[1.5], 3, 1000, 5).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0], curve_cell(&t, 8, 0, 1.5, 3, 1000, 5).unwrap());
    }

    #[test]
    fn acceptance_nonincreasing_in_scale() {
        let t = TargetSpec::lasso(1.0).unwrap();
        let grid = [0.5, 1.0, 2.0, 3.0, 4.0];
        let rows = esjd_curve(&t, 20, &grid, 4, 5000, 3).unwrap();
        for w in rows.windows(2) {
            let tol = 3.0 * (w[0].acc_se.powi(2) + w[1].acc_se.powi(2)).sqrt();
            assert!(w[1].acc_rate <= w[0].acc_rate + tol);
        }
    }

    #[test]
    fn bad_grids_and_configs_rejected() {
        let t = TargetSpec::standard_gaussian();
        assert!(esjd_curve(&t, 5, &[], 2, 10, 0).is_err());
        assert!(esjd_curve(&t, 5, &[2.0, 1.0], 2, 10, 0).is_err());
        assert!(run_chain(&t, &RwmConfig::new(0, 1.0, 10, 0)).is_err());
        assert!(run_chain(&t, &RwmConfig::new(5, 0.0, 10, 0)).is_err());
        assert!(run_chain(&t, &RwmConfig::new(5, 1.0, 0, 0)).is_err());
    }

    #[test]
    fn interpolation_hits_chain_states() {
        let t = TargetSpec::standard_gaussian();
        let d = 4;
        let cfg = RwmConfig::new(d, 1.0, 12, 11);
        // chain states at every index, from a full recording
        let all: Vec<f64> = (0..=12).map(|k| k as f64 / d as f64).collect();
        let xs = interpolated_first_coord(&t, &cfg, &all).unwrap();
        let ys = interpolated_first_coord(&t, &cfg, &[0.0, 0.5, 0.625, 3.0]).unwrap();
        assert_eq!(ys[0], xs[0]);
        assert_eq!(ys[1], xs[2]);
        assert_eq!(ys[2], 0.5 * (xs[2] + xs[3]));
        assert_eq!(ys[3], xs[12]);
        match interpolated_first_coord(&t, &cfg, &[3.5]) {
            Err(Error::Range { .. }) => {}
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn chain_preserves_stationarity() {
        // X_{0,1} vs X_{n,1} across 2000 replicas, d = 10, n = 1000 d
        let d = 10;
        let families = [
            TargetSpec::standard_gaussian(),
            TargetSpec::lasso(1.0).unwrap(),
            TargetSpec::generalized_gamma(7.0, 1.0).unwrap(),
            TargetSpec::beta(10.0, 10.0).unwrap(),
        ];
        for t in &families {
            let ell = 2.38 / t.fisher_information(&t.default_quad()).unwrap().sqrt();
            // One trial per family at 0.1%; the 20-trial 1% protocol runs in the acceptance suite.
            let cfg = RwmConfig::new(d, ell, 1000 * d, 0);
            let pairs = exec::map_indexed(2000, |r| {
                let mut rng = StreamKey::new(0).with_str("t", &t.tag()).with_u64("r", r as u64).stream();
                let v = interpolated_first_coord_with(t, &cfg, &[0.0, 1000.0], &mut rng).unwrap();
                (v[0], v[1])
            });
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let ks = ks_distance(&a, &b).unwrap();
            assert!(ks < ks_critical(a.len(), b.len(), 0.001), "{}: ks {ks}", t.tag());
        }
    }
}
