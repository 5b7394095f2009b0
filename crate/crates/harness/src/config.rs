//! Experiment configuration in a line-oriented `key = value` format.
//!
//! ```text
//! # Figure 1 recipe
//! [target]
//! family = beta
//! a1 = 10
//! a2 = 10
//!
//! [grid]
//! d_list = [10, 50, 100]
//! ell_start = 0.05
//! ell_stop = 0.65
//! ell_count = 20
//!
//! [run]
//! n_steps = 20000
//! replicas = 8
//! base_seed = 2024
//! workers = auto
//!
//! [output]
//! dir = out/figure1
//! ```
//!
//! Keys may also appear before any section header when their name is
//! unambiguous; `target = gaussian` is shorthand for `[target] family`.
//! Every problem in a file is reported, each with its line number or key path.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use rwmlab::TargetSpec;
use serde::Serialize;

pub const DEFAULT_N_STEPS: usize = 100_000;
pub const DEFAULT_REPLICAS: usize = 4;
pub const DEFAULT_BASE_SEED: u64 = 0;
pub const DEFAULT_ELL_COUNT: usize = 20;
/// Automatic grids span `ℓ√I` over this range.
pub const AUTO_SCALED_RANGE: (f64, f64) = (0.5, 6.0);
pub const WORKERS_ENV: &str = "RWMLAB_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EllGrid {
    Range { start: f64, stop: f64, count: usize },
    List(Vec<f64>),
    Auto { count: usize },
}

impl EllGrid {
    /// Concrete ascending scales for a target of Fisher information `fisher`.
    pub fn values(&self, fisher: f64) -> Vec<f64> {
        let linspace = |a: f64, b: f64, n: usize| -> Vec<f64> {
            if n == 1 {
                return vec![a];
            }
            (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
        };
        match self {
            EllGrid::Range { start, stop, count } => linspace(*start, *stop, *count),
            EllGrid::List(v) => v.clone(),
            EllGrid::Auto { count } => {
                let s = fisher.sqrt();
                linspace(AUTO_SCALED_RANGE.0 / s, AUTO_SCALED_RANGE.1 / s, *count)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Workers {
    Auto,
    Count(usize),
}

impl Workers {
    /// Resolves `auto` through the environment, then the machine.
    pub fn resolve(self) -> usize {
        match self {
            Workers::Count(n) => n,
            Workers::Auto => std::env::var(WORKERS_ENV)
                .ok()
                .and_then(|v| v.trim().parse::<usize>().ok())
                .filter(|&n| n > 0)
                .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    pub d_list: Vec<usize>,
    pub ell_grid: EllGrid,
    pub n_steps: usize,
    pub replicas: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub workers: Workers,
}

/// The fields that determine results; workers and paths are excluded.
#[derive(Serialize)]
struct HashedFields<'a> {
    target: String,
    d_list: &'a [usize],
    ell_grid: &'a EllGrid,
    n_steps: usize,
    replicas: usize,
    base_seed: u64,
}

impl ExperimentConfig {
    pub fn config_hash(&self) -> String {
        crate::output::hash_json(&HashedFields {
            target: self.target.tag(),
            d_list: &self.d_list,
            ell_grid: &self.ell_grid,
            n_steps: self.n_steps,
            replicas: self.replicas,
            base_seed: self.base_seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.key) {
            (Some(l), Some(k)) => write!(f, "line {l}: {k}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "{k}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const SECTIONS: &[(&str, &[&str])] = &[
    ("target", &["family", "mean", "variance", "lambda", "quad", "a1", "a2"]),
    ("grid", &["d_list", "ell_start", "ell_stop", "ell_count", "ell_list"]),
    ("run", &["n_steps", "replicas", "base_seed", "workers"]),
    ("output", &["dir"]),
];

struct Entry {
    value: String,
    line: usize,
}

/// Parses and validates a configuration file.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let mut errors = Vec::new();
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    let mut section: Option<&str> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            match rest.strip_suffix(']').map(str::trim) {
                Some(name) => match SECTIONS.iter().find(|(s, _)| *s == name) {
                    Some((s, _)) => section = Some(s),
                    None => errors.push(line_err(line_no, format!("unknown section [{name}]"))),
                },
                None => errors.push(line_err(line_no, "unterminated section header".into())),
            }
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            errors.push(line_err(line_no, format!("expected `key = value`, found `{line}`")));
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            errors.push(line_err(line_no, "missing key before `=`".into()));
            continue;
        }
        if v.is_empty() {
            errors.push(line_err(line_no, format!("missing value for `{k}`")));
            continue;
        }
        let path = match section {
            Some(s) => {
                let keys = SECTIONS.iter().find(|(n, _)| *n == s).map(|(_, k)| *k).unwrap_or(&[]);
                if !keys.contains(&k) {
                    errors.push(line_err(line_no, format!("unknown key `{k}` in [{s}]")));
                    continue;
                }
                format!("{s}.{k}")
            }
            None if k == "target" => "target.family".to_string(),
            None => match SECTIONS.iter().find(|(_, keys)| keys.contains(&k)) {
                Some((s, _)) => format!("{s}.{k}"),
                None => {
                    errors.push(line_err(line_no, format!("unknown key `{k}`")));
                    continue;
                }
            },
        };
        if let Some(prev) = entries.get(&path) {
            errors.push(ConfigError {
                line: Some(line_no),
                key: Some(path.clone()),
                message: format!("duplicate key `{k}` (lines {} and {line_no})", prev.line),
            });
            continue;
        }
        entries.insert(path, Entry { value: v.to_string(), line: line_no });
    }

    let mut b = Builder { entries: &entries, errors: &mut errors };
    let cfg = b.build();
    match cfg {
        Some(cfg) if errors.is_empty() => Ok(cfg),
        _ => {
            if errors.is_empty() {
                errors.push(ConfigError { line: None, key: None, message: "invalid configuration".into() });
            }
            Err(ConfigErrors(errors))
        }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn line_err(line: usize, message: String) -> ConfigError {
    ConfigError { line: Some(line), key: None, message }
}

struct Builder<'a> {
    entries: &'a BTreeMap<String, Entry>,
    errors: &'a mut Vec<ConfigError>,
}

impl Builder<'_> {
    fn err(&mut self, path: &str, message: String) {
        let line = self.entries.get(path).map(|e| e.line);
        self.errors.push(ConfigError { line, key: Some(path.to_string()), message });
    }

    fn raw(&self, path: &str) -> Option<&str> {
        self.entries.get(path).map(|e| e.value.as_str())
    }

    fn real(&mut self, path: &str) -> Option<f64> {
        let v = self.raw(path)?.to_string();
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Some(x),
            _ => {
                self.err(path, format!("expected a finite number, found `{v}`"));
                None
            }
        }
    }

    fn count(&mut self, path: &str) -> Option<usize> {
        let v = self.raw(path)?.to_string();
        match parse_count(&v) {
            Some(n) => Some(n),
            None => {
                self.err(path, format!("expected a nonnegative integer, found `{v}`"));
                None
            }
        }
    }

    fn positive(&mut self, path: &str, default: usize) -> usize {
        match self.count(path) {
            Some(0) => {
                self.err(path, "must be positive".into());
                default
            }
            Some(n) => n,
            None => default,
        }
    }

    fn list<T>(&mut self, path: &str, parse: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
        let v = self.raw(path)?.to_string();
        let inner = v.trim();
        let inner = inner.strip_prefix('[').and_then(|s| s.strip_suffix(']')).unwrap_or(inner);
        let items: Vec<&str> = inner.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        if items.is_empty() {
            self.err(path, "list must be nonempty".into());
            return None;
        }
        let mut out = Vec::with_capacity(items.len());
        for it in items {
            match parse(it) {
                Some(x) => out.push(x),
                None => {
                    self.err(path, format!("invalid list element `{it}`"));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn target(&mut self) -> Option<TargetSpec> {
        let Some(family) = self.raw("target.family").map(str::to_ascii_lowercase) else {
            self.errors.push(ConfigError {
                line: None,
                key: Some("target.family".into()),
                message: "missing required key".into(),
            });
            return None;
        };
        let allowed: &[&str] = match family.as_str() {
            "gaussian" => &["mean", "variance"],
            "lasso" => &["lambda", "quad"],
            "gengamma" | "beta" => &["a1", "a2"],
            other => {
                self.err(
                    "target.family",
                    format!("unknown family `{other}` (expected gaussian, lasso, gengamma or beta)"),
                );
                return None;
            }
        };
        let stray: Vec<String> = self
            .entries
            .keys()
            .filter_map(|k| k.strip_prefix("target."))
            .filter(|k| *k != "family" && !allowed.contains(k))
            .map(str::to_string)
            .collect();
        for k in stray {
            self.err(&format!("target.{k}"), format!("unknown key for family {family}"));
        }
        let built = match family.as_str() {
            "gaussian" => {
                let mean = self.real("target.mean").unwrap_or(0.0);
                let var = self.real("target.variance").unwrap_or(1.0);
                ("target.variance", TargetSpec::gaussian(mean, var))
            }
            "lasso" => {
                let lambda = self.real("target.lambda").unwrap_or(1.0);
                match self.real("target.quad") {
                    Some(c) => ("target.quad", TargetSpec::lasso_quadratic(lambda, c)),
                    None => ("target.lambda", TargetSpec::lasso(lambda)),
                }
            }
            "gengamma" => {
                let a1 = self.real("target.a1").unwrap_or(7.0);
                let a2 = self.real("target.a2").unwrap_or(1.0);
                ("target.a1", TargetSpec::generalized_gamma(a1, a2))
            }
            _ => {
                let a1 = self.real("target.a1").unwrap_or(10.0);
                let a2 = self.real("target.a2").unwrap_or(10.0);
                ("target.a1", TargetSpec::beta(a1, a2))
            }
        };
        match built {
            (_, Ok(t)) => Some(t),
            (fallback, Err(e)) => {
                let msg = match e {
                    rwmlab::Error::Config(m) | rwmlab::Error::Domain(m) => m,
                    other => other.to_string(),
                };
                let path = msg
                    .split_whitespace()
                    .next()
                    .map(|w| format!("target.{w}"))
                    .filter(|p| self.entries.contains_key(p))
                    .unwrap_or_else(|| fallback.to_string());
                self.err(&path, msg);
                None
            }
        }
    }

    fn build(&mut self) -> Option<ExperimentConfig> {
        let target = self.target();

        let d_list = match self.list("grid.d_list", parse_count) {
            Some(v) if v.contains(&0) => {
                self.err("grid.d_list", "dimensions must be positive".into());
                None
            }
            Some(v) => Some(v),
            None if self.raw("grid.d_list").is_none() => {
                self.errors.push(ConfigError {
                    line: None,
                    key: Some("grid.d_list".into()),
                    message: "missing required key".into(),
                });
                None
            }
            None => None,
        };

        let range_keys = ["grid.ell_start", "grid.ell_stop", "grid.ell_count"];
        let has_range = range_keys.iter().any(|k| self.raw(k).is_some());
        let ell_grid = if self.raw("grid.ell_list").is_some() {
            if has_range {
                self.err("grid.ell_list", "give either ell_list or ell_start/ell_stop/ell_count, not both".into());
            }
            self.list("grid.ell_list", |s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
                .and_then(|v| self.check_scales("grid.ell_list", v))
                .map(EllGrid::List)
        } else if has_range {
            let start = self.real("grid.ell_start");
            let stop = self.real("grid.ell_stop");
            let count = self.positive("grid.ell_count", DEFAULT_ELL_COUNT);
            match (start, stop) {
                (Some(a), Some(b)) => {
                    if !(a > 0.0) {
                        self.err("grid.ell_start", "must be positive".into());
                        None
                    } else if count > 1 && !(b > a) {
                        self.err("grid.ell_stop", "must exceed ell_start".into());
                        None
                    } else {
                        Some(EllGrid::Range { start: a, stop: b, count })
                    }
                }
                (a, b) => {
                    for (k, v) in [("grid.ell_start", a), ("grid.ell_stop", b)] {
                        if v.is_none() && self.raw(k).is_none() {
                            self.errors.push(ConfigError {
                                line: None,
                                key: Some(k.into()),
                                message: "required when an ell range is given".into(),
                            });
                        }
                    }
                    None
                }
            }
        } else {
            Some(EllGrid::Auto { count: DEFAULT_ELL_COUNT })
        };

        let n_steps = self.positive("run.n_steps", DEFAULT_N_STEPS);
        let replicas = self.positive("run.replicas", DEFAULT_REPLICAS);
        let base_seed = match self.raw("run.base_seed").map(str::to_string) {
            Some(v) => match parse_count(&v).map(|n| n as u64).or_else(|| v.replace('_', "").parse::<u64>().ok()) {
                Some(s) => s,
                None => {
                    self.err("run.base_seed", format!("expected a nonnegative integer, found `{v}`"));
                    DEFAULT_BASE_SEED
                }
            },
            None => DEFAULT_BASE_SEED,
        };
        let workers = match self.raw("run.workers").map(str::to_string) {
            None => Workers::Auto,
            Some(v) if v.eq_ignore_ascii_case("auto") => Workers::Auto,
            Some(_) => Workers::Count(self.positive("run.workers", 1)),
        };
        let output_dir = PathBuf::from(self.raw("output.dir").unwrap_or("."));

        Some(ExperimentConfig {
            target: target?,
            d_list: d_list?,
            ell_grid: ell_grid?,
            n_steps,
            replicas,
            base_seed,
            output_dir,
            workers,
        })
    }

    fn check_scales(&mut self, path: &str, v: Vec<f64>) -> Option<Vec<f64>> {
        if v.iter().any(|x| !(*x > 0.0)) {
            self.err(path, "scales must be positive".into());
            None
        } else if v.windows(2).any(|w| w[0] >= w[1]) {
            self.err(path, "scales must be strictly ascending".into());
            None
        } else {
            Some(v)
        }
    }
}

/// Integers, with `_` separators and integral scientific notation (`2e4`).
fn parse_count(s: &str) -> Option<usize> {
    let s = s.trim().replace('_', "");
    if let Ok(n) = s.parse::<usize>() {
        return Some(n);
    }
    let x: f64 = s.parse().ok()?;
    (x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x < 9.0e15).then_some(x as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("target = gaussian\nd_list = [10]\n").unwrap();
        assert_eq!(c.n_steps, 100_000);
        assert_eq!(c.replicas, 4);
        assert_eq!(c.d_list, vec![10]);
        assert_eq!(c.base_seed, 0);
        assert_eq!(c.workers, Workers::Auto);
        assert_eq!(c.ell_grid, EllGrid::Auto { count: 20 });
        assert_eq!(c.target, TargetSpec::standard_gaussian());
    }

    #[test]
    fn beta_bound_is_reported_with_key() {
        let e = parse_config("[target]\nfamily = beta\na1 = 5\na2 = 10\n[grid]\nd_list = 10\n").unwrap_err();
        assert_eq!(e.0.len(), 1);
        assert_eq!(e.0[0].message, "a1 must exceed 6");
        assert_eq!(e.0[0].key.as_deref(), Some("target.a1"));
        assert_eq!(e.0[0].line, Some(3));
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let e = parse_config("target = gaussian\nd_list = 10\n[run]\nn_steps = 5\nn_steps = 6\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("n_steps"), "{msg}");
        assert!(msg.contains("lines 4 and 5"), "{msg}");
    }

    #[test]
    fn all_errors_are_collected() {
        let text = "target = beta\na1 = 3\nbogus = 1\n[grid]\nd_list = [10, x]\nno equals sign\n[nowhere]\n";
        let e = parse_config(text).unwrap_err();
        let lines: Vec<_> = e.0.iter().filter_map(|x| x.line).collect();
        for l in [2, 3, 5, 6, 7] {
            assert!(lines.contains(&l), "missing line {l} in {e}");
        }
    }

    #[test]
    fn keys_foreign_to_the_family_are_unknown() {
        let e = parse_config("[target]\nfamily = gaussian\nlambda = 1\n[grid]\nd_list = 10\n").unwrap_err();
        assert_eq!(e.0[0].key.as_deref(), Some("target.lambda"));
        assert_eq!(e.0[0].line, Some(3));
    }

    #[test]
    fn full_config_round_trip() {
        let text = "\
# recipe
[target]
family = beta
a1 = 10
a2 = 10   # symmetric
[grid]
d_list = [10, 50, 100]
ell_start = 0.05
ell_stop = 0.65
ell_count = 20
[run]
n_steps = 2e4
replicas = 8
base_seed = 2_024
workers = 3
[output]
dir = out/fig
";
        let c = parse_config(text).unwrap();
        assert_eq!(c.d_list, vec![10, 50, 100]);
        assert_eq!(c.n_steps, 20_000);
        assert_eq!(c.base_seed, 2024);
        assert_eq!(c.workers, Workers::Count(3));
        assert_eq!(c.output_dir, PathBuf::from("out/fig"));
        let g = c.ell_grid.values(85.5);
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 0.05);
        assert!((g[19] - 0.65).abs() < 1e-15);
    }

    #[test]
    fn explicit_list_must_ascend() {
        let e = parse_config("target = gaussian\nd_list = 10\nell_list = 2, 1\n").unwrap_err();
        assert_eq!(e.0[0].key.as_deref(), Some("grid.ell_list"));
        let c = parse_config("target = gaussian\nd_list = 10\nell_list = 2.38\n").unwrap();
        assert_eq!(c.ell_grid.values(1.0), vec![2.38]);
    }

    #[test]
    fn missing_required_keys() {
        let e = parse_config("").unwrap_err();
        let keys: Vec<_> = e.0.iter().filter_map(|x| x.key.clone()).collect();
        assert!(keys.contains(&"target.family".to_string()));
        assert!(keys.contains(&"grid.d_list".to_string()));
    }

    #[test]
    fn hash_ignores_workers_and_paths() {
        let a = parse_config("target = gaussian\nd_list = 10\nworkers = 1\ndir = a\n").unwrap();
        let b = parse_config("target = gaussian\nd_list = 10\nworkers = 8\ndir = b\n").unwrap();
        let c = parse_config("target = gaussian\nd_list = 10\nbase_seed = 1\n").unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        assert_ne!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn automatic_grid_scales_with_information() {
        let g = EllGrid::Auto { count: 3 }.values(4.0);
        assert_eq!(g, vec![0.25, 1.625, 3.0]);
    }
}
