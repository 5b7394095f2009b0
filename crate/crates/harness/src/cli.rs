//! Command-line front end.
//!
//! Exit codes: 0 success, 1 i/o failure, 2 configuration error, 3 numeric
//! failure. On exit code 3 every output already produced is left in place.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rwmlab::diffusion::{compare_chain_to_diffusion, euler_maruyama_paths, CompareCfg, Comparison, SdeConfig};
use rwmlab::limits::{limit_report, optimal_scaling};
use rwmlab::rwm::esjd_curve;
use rwmlab::stats::geometric_grid;
use rwmlab::verify::{assumption_report, VerifyCfg};
use rwmlab::TargetSpec;
use serde::Serialize;
use serde_json::json;

use crate::config::{parse_config, EllGrid, Workers, WORKERS_ENV};
use crate::error::{HarnessError, Result, EXIT_NUMERIC, EXIT_OK};
use crate::figure1::{run_figure1, RunOptions};
use crate::output::{curve_csv, fmt_f64, hash_json, json_with_meta, Metadata};

#[derive(Debug, Parser)]
#[command(name = "rwmlab", version, about = "Optimal-scaling experiments for Random Walk Metropolis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Limiting acceptance a(l), speed h(l) and the optimal scale.
    Limits(LimitsArgs),
    /// Acceptance rate and ESJD of RWM chains over a grid of scales.
    Esjd(EsjdArgs),
    /// Numerical checks of the differentiability-in-mean conditions.
    Verify(VerifyArgs),
    /// KS distance between the rescaled chain and the limiting diffusion.
    Compare(CompareArgs),
    /// Euler-Maruyama simulation of the limiting diffusion.
    Diffusion(DiffusionArgs),
    /// Full ESJD-versus-acceptance experiment from a config file.
    Figure1(Figure1Args),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Lasso,
    Gengamma,
    Beta,
}

#[derive(Debug, Clone, Args)]
pub struct TargetArgs {
    /// Target family.
    #[arg(long, value_enum, default_value = "gaussian")]
    pub target: FamilyArg,
    /// Gaussian mean.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub mean: f64,
    /// Gaussian variance.
    #[arg(long, default_value_t = 1.0)]
    pub variance: f64,
    /// Lasso penalty.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Lasso quadratic coefficient; 0 means no smooth part.
    #[arg(long, default_value_t = 0.0)]
    pub quad: f64,
    /// First shape parameter [default: 10 for beta, 7 for gengamma].
    #[arg(long)]
    pub a1: Option<f64>,
    /// Second shape parameter [default: 10 for beta, 1 for gengamma].
    #[arg(long)]
    pub a2: Option<f64>,
}

impl TargetArgs {
    pub fn build(&self) -> Result<TargetSpec> {
        let t = match self.target {
            FamilyArg::Gaussian => TargetSpec::gaussian(self.mean, self.variance),
            FamilyArg::Lasso if self.quad == 0.0 => TargetSpec::lasso(self.lambda),
            FamilyArg::Lasso => TargetSpec::lasso_quadratic(self.lambda, self.quad),
            FamilyArg::Gengamma => TargetSpec::generalized_gamma(self.a1.unwrap_or(7.0), self.a2.unwrap_or(1.0)),
            FamilyArg::Beta => TargetSpec::beta(self.a1.unwrap_or(10.0), self.a2.unwrap_or(10.0)),
        }?;
        Ok(t)
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Worker threads [default: $RWMLAB_WORKERS, else all cores].
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    /// Leave the creation time out of the metadata header.
    #[arg(long)]
    pub no_timestamp: bool,
    /// Main output file [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LimitsArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// Fisher information; 0 computes it from the target.
    #[arg(long, default_value_t = 0.0)]
    pub fisher: f64,
    /// Largest scale on the curve; 0 means 8/sqrt(I).
    #[arg(long, default_value_t = 0.0)]
    pub ell_max: f64,
    /// Points on the curve.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Write the (l, a, h) curve as CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EsjdArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// Dimension.
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    /// Explicit comma-separated scales; overrides the range flags.
    #[arg(long, value_delimiter = ',')]
    pub ell: Option<Vec<f64>>,
    /// First scale; 0 picks 0.5/sqrt(I).
    #[arg(long, default_value_t = 0.0)]
    pub ell_start: f64,
    /// Last scale; 0 picks 6/sqrt(I).
    #[arg(long, default_value_t = 0.0)]
    pub ell_stop: f64,
    /// Number of scales.
    #[arg(long, default_value_t = 20)]
    pub ell_count: usize,
    /// Post-burn-in steps per chain.
    #[arg(long, default_value_t = 100_000)]
    pub n_steps: usize,
    /// Independent chains per scale.
    #[arg(long, default_value_t = 4)]
    pub replicas: usize,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// Norm exponent, must exceed 4.
    #[arg(long, default_value_t = 5.0)]
    pub p: f64,
    /// Smallest shift.
    #[arg(long, default_value_t = 1e-3)]
    pub theta_min: f64,
    /// Largest shift.
    #[arg(long, default_value_t = 1e-1)]
    pub theta_max: f64,
    /// Shifts per decade.
    #[arg(long, default_value_t = 12)]
    pub theta_per_decade: usize,
    /// Scale for the zeta check.
    #[arg(long, default_value_t = 2.0)]
    pub ell: f64,
    /// Comma-separated dimensions for the zeta check.
    #[arg(long, value_delimiter = ',', default_value = "100,10000,1000000")]
    pub zeta_dims: Vec<f64>,
    /// Monte Carlo draws per zeta dimension.
    #[arg(long, default_value_t = 1_000_000)]
    pub zeta_samples: usize,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the per-shift remainders as CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// Proposal scale.
    #[arg(long, default_value_t = 2.38)]
    pub ell: f64,
    /// Dimension.
    #[arg(long, default_value_t = 100)]
    pub d: usize,
    /// Diffusion time.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Independent chains and diffusion paths.
    #[arg(long, default_value_t = 2000)]
    pub replicas: usize,
    /// Euler-Maruyama step.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Bootstrap resamples for the KS standard error.
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write both samples as CSV here.
    #[arg(long)]
    pub samples_csv: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DiffusionArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    /// Proposal scale setting the speed h(l).
    #[arg(long, default_value_t = 2.38)]
    pub ell: f64,
    /// Final time.
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    /// Euler-Maruyama step.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Number of paths.
    #[arg(long, default_value_t = 2000)]
    pub paths: usize,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write terminal values as CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct Figure1Args {
    /// Experiment config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads, overriding the config [default: config, then $RWMLAB_WORKERS, then all cores].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Leave the creation time out of the metadata headers.
    #[arg(long)]
    pub no_timestamp: bool,
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Limits(a) => limits(&a),
        Command::Esjd(a) => esjd(&a),
        Command::Verify(a) => verify(&a),
        Command::Compare(a) => compare(&a),
        Command::Diffusion(a) => diffusion(&a),
        Command::Figure1(a) => figure1(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("rwmlab: {e}");
            e.exit_code()
        }
    }
}

fn emit(path: &Option<PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| HarnessError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &PathBuf, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let n = workers.map(Workers::Count).unwrap_or(Workers::Auto).resolve().max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start {n} workers: {e}")))?;
    Ok(pool.install(f))
}

fn meta(common: &CommonArgs, fields: serde_json::Value, seeds: Vec<u64>) -> Metadata {
    Metadata::new(hash_json(&fields), seeds, !common.no_timestamp)
}

fn fisher_of(t: &TargetSpec) -> Result<f64> {
    Ok(t.fisher_information(&t.default_quad())?)
}

fn limits(a: &LimitsArgs) -> Result<i32> {
    let target = a.target.build()?;
    let fisher = if a.fisher > 0.0 { a.fisher } else { fisher_of(&target)? };
    if a.points == 0 {
        return Err(HarnessError::Config("--points must be positive".into()));
    }
    let ell_max = if a.ell_max > 0.0 { a.ell_max } else { 8.0 / fisher.sqrt() };
    let report = limit_report(fisher, ell_max, a.points)?;
    let m = meta(
        &a.common,
        json!({"cmd": "limits", "target": target.tag(), "fisher": fisher, "ell_max": ell_max, "points": a.points}),
        vec![],
    );
    if let Some(p) = &a.csv {
        let mut s = m.comment_block();
        s.push_str("ell,acceptance,speed\n");
        for c in &report.curve {
            s.push_str(&format!("{},{},{}\n", fmt_f64(c.ell), fmt_f64(c.acceptance), fmt_f64(c.speed)));
        }
        write_file(p, &s)?;
    }
    let star = optimal_scaling(fisher)?;
    let body = json!({
        "family": target.tag(),
        "fisher_info": fisher,
        "ell_star": star.ell_star,
        "h_star": star.h_star,
        "acc_at_star": star.acc_at_star,
        "ell_star_scaled": star.ell_star * fisher.sqrt(),
    });
    emit(&a.common.out, &json_with_meta(&m, &body))?;
    Ok(EXIT_OK)
}

fn esjd(a: &EsjdArgs) -> Result<i32> {
    let target = a.target.build()?;
    let fisher = fisher_of(&target)?;
    let grid = match &a.ell {
        Some(v) => EllGrid::List(v.clone()),
        None if a.ell_start > 0.0 || a.ell_stop > 0.0 => {
            let s = fisher.sqrt();
            let start = if a.ell_start > 0.0 { a.ell_start } else { 0.5 / s };
            let stop = if a.ell_stop > 0.0 { a.ell_stop } else { 6.0 / s };
            EllGrid::Range { start, stop, count: a.ell_count }
        }
        None => EllGrid::Auto { count: a.ell_count },
    };
    let ells = grid.values(fisher);
    if a.d == 0 || a.n_steps == 0 {
        return Err(HarnessError::Config("--d and --n-steps must be positive".into()));
    }
    let rows = in_pool(a.common.workers, || esjd_curve(&target, a.d, &ells, a.replicas, a.n_steps, a.seed))??;
    let m = meta(
        &a.common,
        json!({"cmd": "esjd", "target": target.tag(), "d": a.d, "ell": ells, "n_steps": a.n_steps,
               "replicas": a.replicas, "seed": a.seed}),
        vec![a.seed],
    );
    emit(&a.common.out, &curve_csv(&m, &rows))?;
    Ok(EXIT_OK)
}

fn verify(a: &VerifyArgs) -> Result<i32> {
    let target = a.target.build()?;
    if !(a.theta_min > 0.0 && a.theta_max > a.theta_min) || a.theta_per_decade == 0 {
        return Err(HarnessError::Config("need 0 < theta-min < theta-max and a positive density".into()));
    }
    let cfg = VerifyCfg {
        p: a.p,
        theta_grid: geometric_grid(a.theta_min, a.theta_max, a.theta_per_decade),
        ell: a.ell,
        zeta_dims: a.zeta_dims.clone(),
        zeta_samples: a.zeta_samples,
        seed: a.seed,
    };
    let report = in_pool(a.common.workers, || assumption_report(&target, &cfg))??;
    let m = meta(&a.common, json!({"cmd": "verify", "target": target.tag(), "cfg": cfg}), vec![a.seed]);
    if let Some(p) = &a.csv {
        let mut s = m.comment_block();
        s.push_str("theta,lp_remainder,dqm_remainder,boundary_mass\n");
        for r in &report.rows {
            let bm = r.boundary_mass.map(fmt_f64).unwrap_or_default();
            s.push_str(&format!("{},{},{},{}\n", fmt_f64(r.theta), fmt_f64(r.lp_remainder), fmt_f64(r.dqm_remainder), bm));
        }
        write_file(p, &s)?;
    }
    emit(&a.common.out, &json_with_meta(&m, &report))?;
    if !report.moment6.is_finite() || !report.beta_hat.is_finite() {
        eprintln!("rwmlab: non-finite result in assumption report");
        return Ok(EXIT_NUMERIC);
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CompareJson<'a> {
    #[serde(flatten)]
    cmp: &'a Comparison,
    n: usize,
    ell: f64,
}

fn compare(a: &CompareArgs) -> Result<i32> {
    let target = a.target.build()?;
    let cfg = CompareCfg { dt: a.dt, n_replicas: a.replicas, seed: a.seed, bootstrap: a.bootstrap };
    let cmp = in_pool(a.common.workers, || compare_chain_to_diffusion(&target, a.ell, a.d, a.t, &cfg))??;
    let m = meta(
        &a.common,
        json!({"cmd": "compare", "target": target.tag(), "ell": a.ell, "d": a.d, "t": a.t, "replicas": a.replicas,
               "dt": a.dt, "bootstrap": a.bootstrap, "seed": a.seed}),
        vec![a.seed],
    );
    if let Some(p) = &a.samples_csv {
        let mut s = m.comment_block();
        s.push_str("source,value\n");
        for x in &cmp.chain_sample {
            s.push_str(&format!("chain,{}\n", fmt_f64(*x)));
        }
        for x in &cmp.diffusion_sample {
            s.push_str(&format!("diffusion,{}\n", fmt_f64(*x)));
        }
        write_file(p, &s)?;
    }
    let body = CompareJson { cmp: &cmp, n: cmp.n_chain, ell: a.ell };
    emit(&a.common.out, &json_with_meta(&m, &body))?;
    if cmp.diffusion_warning {
        eprintln!("rwmlab: diffusion boundary rejections above threshold");
        return Ok(EXIT_NUMERIC);
    }
    Ok(EXIT_OK)
}

fn diffusion(a: &DiffusionArgs) -> Result<i32> {
    let target = a.target.build()?;
    let cfg = SdeConfig { dt: a.dt, t_end: a.t_end, n_paths: a.paths, seed: a.seed };
    let sample = in_pool(a.common.workers, || euler_maruyama_paths(&target, a.ell, &cfg))??;
    let m = meta(
        &a.common,
        json!({"cmd": "diffusion", "target": target.tag(), "ell": a.ell, "t_end": a.t_end, "dt": a.dt,
               "paths": a.paths, "seed": a.seed}),
        vec![a.seed],
    );
    if let Some(p) = &a.csv {
        let mut s = m.comment_block();
        s.push_str("value\n");
        for x in &sample.terminal {
            s.push_str(&fmt_f64(*x));
            s.push('\n');
        }
        write_file(p, &s)?;
    }
    let n = sample.terminal.len() as f64;
    let mean = sample.terminal.iter().sum::<f64>() / n;
    let var = sample.terminal.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let body = json!({
        "family": target.tag(),
        "ell": a.ell,
        "speed": sample.speed,
        "t_end": a.t_end,
        "dt": a.dt,
        "n_paths": sample.terminal.len(),
        "steps_per_path": sample.steps_per_path,
        "mean": mean,
        "variance": var,
        "rejected": sample.rejected,
        "rejection_fraction": sample.rejection_fraction,
        "warning": sample.warning,
    });
    emit(&a.common.out, &json_with_meta(&m, &body))?;
    if sample.warning {
        eprintln!("rwmlab: diffusion boundary rejections above threshold");
        return Ok(EXIT_NUMERIC);
    }
    Ok(EXIT_OK)
}

fn figure1(a: &Figure1Args) -> Result<i32> {
    let text = fs::read_to_string(&a.config).map_err(|e| HarnessError::io(&a.config, e))?;
    let mut cfg = parse_config(&text)?;
    if let Some(dir) = &a.out_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(w) = a.workers {
        cfg.workers = Workers::Count(w.max(1));
    }
    let out = run_figure1(&cfg, RunOptions { timestamp: !a.no_timestamp, max_new_cells: None })?;
    eprintln!(
        "rwmlab: {} rows ({} resumed) -> {}, {}, {}",
        out.rows.len(),
        out.resumed,
        out.csv.display(),
        out.json.display(),
        out.plot.display()
    );
    Ok(EXIT_OK)
}
