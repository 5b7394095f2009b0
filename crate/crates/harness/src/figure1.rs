//! ESJD against mean acceptance over a `(d, ℓ)` grid, with a limit overlay.
//!
//! Cells are computed in lexicographic `(d, ℓ)` order and each finished row is
//! appended to `curve.csv` at once. A rerun with the same configuration picks
//! up after the last complete row; every cell draws from its own seed stream,
//! so the resumed file is byte-identical to an uninterrupted one.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rwmlab::exec;
use rwmlab::limits::{limit_report, LimitReport};
use rwmlab::rwm::{curve_cell, CurveRow};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::output::{curve_line, fmt_f64, json_with_meta, parse_curve_line, Metadata, CURVE_HEADER};

pub const CURVE_CSV: &str = "curve.csv";
pub const CURVE_JSON: &str = "curve.json";
pub const PLOT_SCRIPT: &str = "plot.gp";
const LIMIT_POINTS: usize = 400;

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub timestamp: bool,
    /// Stop after this many newly computed cells.
    pub max_new_cells: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { timestamp: true, max_new_cells: None }
    }
}

#[derive(Debug, Clone)]
pub struct Figure1Output {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub plot: PathBuf,
    pub rows: Vec<CurveRow>,
    pub resumed: usize,
    pub complete: bool,
}

#[derive(Serialize)]
struct CurveJson<'a> {
    family: String,
    fisher_info: f64,
    d_list: &'a [usize],
    ell_grid: &'a [f64],
    n_steps: usize,
    replicas: usize,
    rows: &'a [CurveRow],
    limit: &'a LimitReport,
}

struct Cell {
    d: usize,
    ell_index: usize,
    ell: f64,
}

pub fn run_figure1(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Figure1Output> {
    let target = &cfg.target;
    let fisher = target.fisher_information(&target.default_quad())?;
    let ells = cfg.ell_grid.values(fisher);
    if ells.is_empty() || ells.iter().any(|l| !(*l > 0.0)) || ells.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HarnessError::Config("ell grid must be positive and strictly ascending".into()));
    }
    let dir = &cfg.output_dir;
    ensure_writable(dir)?;

    let hash = cfg.config_hash();
    let meta = Metadata::new(hash.clone(), vec![cfg.base_seed], opts.timestamp);
    let cells: Vec<Cell> = cfg
        .d_list
        .iter()
        .flat_map(|&d| ells.iter().enumerate().map(move |(ell_index, &ell)| Cell { d, ell_index, ell }))
        .collect();

    let csv_path = dir.join(CURVE_CSV);
    let mut rows = load_existing(&csv_path, &hash, &cells)?;
    let resumed = rows.len();
    if resumed == 0 {
        let mut head = meta.comment_block();
        head.push_str(CURVE_HEADER);
        head.push('\n');
        fs::write(&csv_path, head).map_err(|e| HarnessError::io(&csv_path, e))?;
    }
    let mut file = OpenOptions::new().append(true).open(&csv_path).map_err(|e| HarnessError::io(&csv_path, e))?;

    let workers = cfg.workers.resolve().max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start {workers} workers: {e}")))?;

    let todo = &cells[resumed..];
    let budget = opts.max_new_cells.unwrap_or(usize::MAX).min(todo.len());
    let tag = target.tag();
    for chunk in todo[..budget].chunks(workers) {
        let results = pool.install(|| {
            exec::map_slice(chunk, |c| curve_cell(target, c.d, c.ell_index, c.ell, cfg.replicas, cfg.n_steps, cfg.base_seed))
        });
        for r in results {
            let row = r?;
            debug_assert_eq!(row.family, tag);
            let mut line = curve_line(&row);
            line.push('\n');
            file.write_all(line.as_bytes()).map_err(|e| HarnessError::io(&csv_path, e))?;
            file.flush().map_err(|e| HarnessError::io(&csv_path, e))?;
            rows.push(row);
        }
    }
    drop(file);

    let complete = rows.len() == cells.len();
    let ell_max = ells[ells.len() - 1].max(8.0 / fisher.sqrt());
    let limit = limit_report(fisher, ell_max, LIMIT_POINTS)?;
    let json_path = dir.join(CURVE_JSON);
    let body = CurveJson {
        family: tag,
        fisher_info: fisher,
        d_list: &cfg.d_list,
        ell_grid: &ells,
        n_steps: cfg.n_steps,
        replicas: cfg.replicas,
        rows: &rows,
        limit: &limit,
    };
    fs::write(&json_path, json_with_meta(&meta, &body)).map_err(|e| HarnessError::io(&json_path, e))?;
    let plot_path = dir.join(PLOT_SCRIPT);
    fs::write(&plot_path, plot_script(&meta, &cfg.d_list, &limit)).map_err(|e| HarnessError::io(&plot_path, e))?;

    Ok(Figure1Output { csv: csv_path, json: json_path, plot: plot_path, rows, resumed, complete })
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let probe = dir.join(".rwmlab-write-probe");
    File::create(&probe).map_err(|e| HarnessError::io(dir, e))?;
    fs::remove_file(&probe).map_err(|e| HarnessError::io(&probe, e))
}

/// Rows of a previous run that form a valid prefix of `cells`.
///
/// A trailing partial line is cut off. A file written under another
/// configuration is refused rather than overwritten.
fn load_existing(path: &Path, hash: &str, cells: &[Cell]) -> Result<Vec<CurveRow>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(HarnessError::io(path, e)),
    };
    let mut offset = 0;
    let mut header_seen = false;
    let mut rows = Vec::new();
    let mut keep = 0;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let Some(body) = line.strip_suffix('\n') else { break };
        if let Some(c) = body.strip_prefix('#') {
            if let Some(h) = c.trim().strip_prefix("config_hash=") {
                if h != hash {
                    return Err(HarnessError::Config(format!(
                        "{} was written by a different configuration (hash {h}); remove it or use another output dir",
                        path.display()
                    )));
                }
            }
            keep = offset;
            continue;
        }
        if !header_seen {
            if body != CURVE_HEADER {
                break;
            }
            header_seen = true;
            keep = offset;
            continue;
        }
        let expected = cells.get(rows.len());
        match (parse_curve_line(body), expected) {
            (Some(r), Some(c)) if r.d == c.d && r.ell == c.ell => {
                rows.push(r);
                keep = offset;
            }
            _ => {
                keep = start;
                break;
            }
        }
    }
    if !header_seen || !text[..keep].contains("config_hash=") {
        return Ok(Vec::new());
    }
    if keep < text.len() {
        let f = OpenOptions::new().write(true).open(path).map_err(|e| HarnessError::io(path, e))?;
        f.set_len(keep as u64).map_err(|e| HarnessError::io(path, e))?;
    }
    Ok(rows)
}

/// Gnuplot script: ESJD against acceptance per `d`, plus the limit curve.
pub fn plot_script(meta: &Metadata, d_list: &[usize], limit: &LimitReport) -> String {
    let mut s = meta.comment_block();
    s.push_str(
        "set datafile separator ','\n\
         set terminal pngcairo size 900,600\n\
         set output 'figure1.png'\n\
         set xlabel 'mean acceptance rate'\n\
         set ylabel 'expected squared jump distance'\n\
         set key top right\n\
         $limit << EOD\n",
    );
    for p in &limit.curve {
        s.push_str(&format!("{},{}\n", fmt_f64(p.acceptance), fmt_f64(p.speed)));
    }
    s.push_str("EOD\nplot \\\n");
    for d in d_list {
        s.push_str(&format!(
            "  '{CURVE_CSV}' using ($2 == {d} ? $4 : 1/0):6 with linespoints title 'd = {d}', \\\n"
        ));
    }
    s.push_str("  $limit using 1:2 with lines dashtype 2 title 'limit'\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn tiny(dir: &Path) -> ExperimentConfig {
        let text = format!(
            "target = gaussian\nd_list = [2, 3]\nell_list = [1, 2]\nn_steps = 64\nreplicas = 2\nbase_seed = 5\nworkers = 1\ndir = {}\n",
            dir.display()
        );
        parse_config(&text).unwrap()
    }

    #[test]
    fn writes_all_three_files() {
        let tmp = tempfile::tempdir().unwrap();
        let out = run_figure1(&tiny(tmp.path()), RunOptions { timestamp: false, max_new_cells: None }).unwrap();
        assert!(out.complete);
        assert_eq!(out.rows.len(), 4);
        let csv = fs::read_to_string(&out.csv).unwrap();
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 5);
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out.json).unwrap()).unwrap();
        assert_eq!(json["rows"].as_array().unwrap().len(), 4);
        assert!((json["limit"]["acc_at_star"].as_f64().unwrap() - 0.234).abs() < 5e-4);
        let plot = fs::read_to_string(&out.plot).unwrap();
        assert!(plot.contains("title 'd = 2'") && plot.contains("title 'd = 3'"));
        assert!(plot.contains("$limit using 1:2"));
    }

    #[test]
    fn truncated_tail_is_recomputed() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tiny(tmp.path());
        let opts = RunOptions { timestamp: false, max_new_cells: None };
        let full = fs::read(run_figure1(&cfg, opts).unwrap().csv).unwrap();
        let path = tmp.path().join(CURVE_CSV);
        fs::write(&path, &full[..full.len() - 10]).unwrap();
        let again = run_figure1(&cfg, opts).unwrap();
        assert_eq!(again.resumed, 3);
        assert_eq!(fs::read(path).unwrap(), full);
    }

    #[test]
    fn foreign_file_is_refused() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tiny(tmp.path());
        fs::write(tmp.path().join(CURVE_CSV), format!("# config_hash=deadbeef\n{CURVE_HEADER}\n")).unwrap();
        let err = run_figure1(&cfg, RunOptions::default()).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_CONFIG);
    }
}
