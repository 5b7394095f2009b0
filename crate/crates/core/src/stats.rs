//! Small statistical helpers: batch means, log-log slope fits and the
//! two-sample Kolmogorov–Smirnov distance.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SeedStream;

/// Number of batches used for batch-means standard errors.
pub const N_BATCHES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample mean and the plain i.i.d. standard error.
pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len() as f64;
    let m = mean(xs);
    if xs.len() < 2 {
        return MeanSe { mean: m, se: 0.0 };
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    MeanSe { mean: m, se: (var / n).sqrt() }
}

/// Streaming accumulator for the batch-means estimator of a time average.
///
/// The series length must be known up front so batch boundaries are fixed.
#[derive(Debug, Clone)]
pub struct BatchMeans {
    batch_len: usize,
    batches: usize,
    in_batch: usize,
    current: f64,
    sums: Vec<f64>,
    total: f64,
    count: usize,
}

impl BatchMeans {
    pub fn new(n: usize) -> Self {
        let batches = N_BATCHES.min(n.max(1));
        BatchMeans {
            batch_len: (n / batches).max(1),
            batches,
            in_batch: 0,
            current: 0.0,
            sums: Vec::with_capacity(batches),
            total: 0.0,
            count: 0,
        }
    }

    pub fn push(&mut self, x: f64) {
        self.total += x;
        self.count += 1;
        if self.sums.len() < self.batches {
            self.current += x;
            self.in_batch += 1;
            if self.in_batch == self.batch_len {
                self.sums.push(self.current);
                self.current = 0.0;
                self.in_batch = 0;
            }
        }
    }

    /// Overall mean and batch-means standard error. Samples beyond the last
    /// full batch enter the mean but not the error estimate.
    pub fn finish(&self) -> MeanSe {
        let mean = if self.count == 0 { 0.0 } else { self.total / self.count as f64 };
        let b = self.sums.len();
        if b < 2 {
            return MeanSe { mean, se: 0.0 };
        }
        let means: Vec<f64> = self.sums.iter().map(|s| s / self.batch_len as f64).collect();
        let bm = mean_of(&means);
        let var = means.iter().map(|m| (m - bm) * (m - bm)).sum::<f64>() / (b as f64 - 1.0);
        MeanSe { mean, se: (var / b as f64).sqrt() }
    }
}

fn mean_of(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pools equally weighted independent estimates.
pub fn pool(parts: &[MeanSe]) -> MeanSe {
    let r = parts.len() as f64;
    let mean = parts.iter().map(|p| p.mean).sum::<f64>() / r;
    let se = parts.iter().map(|p| p.se * p.se).sum::<f64>().sqrt() / r;
    MeanSe { mean, se }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Ordinary least-squares fit of `log y` against `log x` over points with
/// `y > 0`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len();
    if n < 3 {
        return Err(Error::Domain(format!("slope fit needs at least 3 positive points, got {n}")));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>();
    let stderr = (rss / (nf - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, stderr, intercept, points: n })
}

/// Geometric grid with `per_decade` points per decade on `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round() as usize + 1;
    (0..n)
        .map(|i| lo * 10f64.powf(decades * i as f64 / (n - 1) as f64))
        .collect()
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_distance(sample_a: &[f64], sample_b: &[f64]) -> Result<f64> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::Domain("ks_distance requires nonempty samples".into()));
    }
    let mut a = sample_a.to_vec();
    let mut b = sample_b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(ks_sorted(&a, &b))
}

fn ks_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        // Advance past all ties so the CDFs are compared after each jump.
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value, `c(α) √((n+m)/(nm))`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Bootstrap standard error of the KS statistic from `resamples` paired
/// resamples of both inputs.
pub fn ks_bootstrap_se(a: &[f64], b: &[f64], resamples: usize, rng: &mut SeedStream) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("ks_bootstrap_se requires nonempty samples".into()));
    }
    let mut stats = Vec::with_capacity(resamples);
    let mut ra = vec![0.0; a.len()];
    let mut rb = vec![0.0; b.len()];
    for _ in 0..resamples {
        for x in ra.iter_mut() {
            *x = a[rng.random_range(0..a.len())];
        }
        for x in rb.iter_mut() {
            *x = b[rng.random_range(0..b.len())];
        }
        ra.sort_by(f64::total_cmp);
        rb.sort_by(f64::total_cmp);
        stats.push(ks_sorted(&ra, &rb));
    }
    let ms = mean_se(&stats);
    Ok(ms.se * (resamples as f64).sqrt())
}
