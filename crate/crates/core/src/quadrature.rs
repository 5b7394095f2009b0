//! Globally adaptive Gauss–Kronrod (10/21) quadrature over finite,
//! semi-infinite and infinite intervals.
//!
//! The domain is first cut at caller-supplied breakpoints (kinks, indicator
//! jumps). Infinite pieces are pulled back onto `(0, 1)` by a change of
//! variables chosen by [`TailTransform`]; all pieces then share one priority
//! queue and the piece with the largest error estimate is bisected until the
//! global tolerance is met.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailTransform {
    /// Rational map `x = a + s t / (1 - t)` on infinite pieces, identity on finite ones.
    None,
    /// Exponential map `x = a - s ln(1 - t)` on infinite pieces.
    ExpMap,
    /// Exponential map on infinite pieces; finite pieces are integrated in
    /// logit coordinates so nodes cluster at both ends.
    LogitMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureCfg {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub tail_transform: TailTransform,
}

impl Default for QuadratureCfg {
    fn default() -> Self {
        QuadratureCfg {
            rel_tol: 1e-11,
            abs_tol: 1e-300,
            max_subdivisions: 4000,
            tail_transform: TailTransform::ExpMap,
        }
    }
}

impl QuadratureCfg {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Config("quadrature tolerances must be positive".into()));
        }
        if self.max_subdivisions < 16 {
            return Err(Error::Config("max_subdivisions must be at least 16".into()));
        }
        Ok(())
    }

    pub fn with_transform(mut self, t: TailTransform) -> Self {
        self.tail_transform = t;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// One 21-point Kronrod evaluation: (estimate, error estimate, ∫|g| estimate).
fn qk21(g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = g(center);
    let mut res_g = 0.0;
    let mut res_k = fc * WGK[10];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = g(center - dx);
        let f2 = g(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        // Gauss nodes are the odd-indexed Kronrod nodes.
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (1.0f64).min((200.0 * err / res_asc).powf(1.5));
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    // An exact zero at an outer node next to nonzero values marks a support
    // edge inside the segment, which the Gauss/Kronrod difference can miss.
    let outer_zero = fv1[0] == 0.0 || fv2[0] == 0.0;
    if outer_zero && res_abs > 0.0 {
        err = err.max(res_abs);
    }
    (result, err, res_abs)
}

/// End of a segment that borders a zero/nonzero transition, where a support
/// edge may hide between the end and the outer node.
#[derive(Clone, Copy, PartialEq)]
enum Edge {
    None,
    Left,
    Right,
}

struct Segment {
    piece: usize,
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    edge: Edge,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

type Piece<'a> = Box<dyn Fn(f64) -> f64 + 'a>;

fn guarded<F>(f: &F, x: f64, jac: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let fx = f(x);
    if fx == 0.0 {
        0.0
    } else {
        fx * jac
    }
}

fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Builds the (pulled-back integrand, parameter interval) for a piece `[a, b]`.
fn make_pieces<'a, F>(
    f: &'a F,
    a: f64,
    b: f64,
    scale: f64,
    transform: TailTransform,
    out: &mut Vec<(Piece<'a>, f64, f64)>,
) where
    F: Fn(f64) -> f64,
{
    let s = scale;
    match (a.is_finite(), b.is_finite()) {
        (true, true) => match transform {
            TailTransform::LogitMap => {
                // u in (-inf, 0] and [0, inf), each pulled back by u = ±t/(1-t).
                let w = b - a;
                for sign in [-1.0f64, 1.0] {
                    let g = move |t: f64| {
                        let one_m = 1.0 - t;
                        let u = sign * t / one_m;
                        let sig = logistic(u);
                        let x = if sig <= 0.5 { a + w * sig } else { b - w * logistic(-u) };
                        if x <= a || x >= b {
                            return 0.0;
                        }
                        let jac = w * sig * (1.0 - sig) / (one_m * one_m);
                        guarded(f, x, jac)
                    };
                    out.push((Box::new(g), 0.0, 1.0));
                }
            }
            _ => out.push((Box::new(move |x: f64| f(x)), a, b)),
        },
        (true, false) => {
            let g: Piece<'a> = match transform {
                TailTransform::None => Box::new(move |t: f64| {
                    let one_m = 1.0 - t;
                    guarded(f, a + s * t / one_m, s / (one_m * one_m))
                }),
                _ => Box::new(move |t: f64| {
                    let one_m = 1.0 - t;
                    guarded(f, a - s * (-t).ln_1p(), s / one_m)
                }),
            };
            out.push((g, 0.0, 1.0));
        }
        (false, true) => {
            let g: Piece<'a> = match transform {
                TailTransform::None => Box::new(move |t: f64| {
                    let one_m = 1.0 - t;
                    guarded(f, b - s * t / one_m, s / (one_m * one_m))
                }),
                _ => Box::new(move |t: f64| {
                    let one_m = 1.0 - t;
                    guarded(f, b + s * (-t).ln_1p(), s / one_m)
                }),
            };
            out.push((g, 0.0, 1.0));
        }
        (false, false) => {
            make_pieces(f, a, 0.0, scale, transform, out);
            make_pieces(f, 0.0, b, scale, transform, out);
        }
    }
}

/// Integrates `f` over `(lo, hi)`, cutting the domain at `breakpoints`.
///
/// `scale` is the length scale used by the tail maps (roughly the width of
/// the integrand's bulk). Breakpoints outside `(lo, hi)` are ignored.
pub fn integrate<F>(
    f: F,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    scale: f64,
    cfg: &QuadratureCfg,
) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    cfg.validate()?;
    if !(lo < hi) {
        return Err(Error::Domain(format!("empty integration interval ({lo}, {hi})")));
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > lo && *p < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    if !lo.is_finite() && !hi.is_finite() && cuts.is_empty() {
        cuts.push(0.0);
    }
    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(lo);
    nodes.extend(cuts);
    nodes.push(hi);

    let mut pieces: Vec<(Piece<'_>, f64, f64)> = Vec::new();
    for w in nodes.windows(2) {
        make_pieces(&f, w[0], w[1], scale, cfg.tail_transform, &mut pieces);
    }

    let mut heap = BinaryHeap::new();
    let mut finished_value = 0.0;
    let mut finished_error = 0.0;
    let mut total = 0.0;
    let mut total_err = 0.0;
    for (i, (g, a, b)) in pieces.iter().enumerate() {
        let (v, e, _) = qk21(g.as_ref(), *a, *b);
        total += v;
        total_err += e;
        heap.push(Segment { piece: i, a: *a, b: *b, value: v, error: e, edge: Edge::None });
    }
    let mut subdivisions = pieces.len();
    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::Numeric {
                context: "quadrature: integrand not finite".into(),
                estimate: total,
                error_bound: total_err,
            });
        }
        if total_err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            break;
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        // Segment too narrow to split further; its error is what it is.
        if mid <= seg.a || mid >= seg.b {
            finished_value += seg.value;
            finished_error += seg.error;
            continue;
        }
        if subdivisions >= cfg.max_subdivisions {
            heap.push(seg);
            return Err(Error::Numeric {
                context: format!("quadrature: {} subdivisions exhausted", cfg.max_subdivisions),
                estimate: total,
                error_bound: total_err,
            });
        }
        let g = pieces[seg.piece].0.as_ref();
        let (v1, mut e1, abs1) = qk21(g, seg.a, mid);
        let (v2, mut e2, abs2) = qk21(g, mid, seg.b);
        // A zero/nonzero transition may hide between an end and the outer
        // node on either side of it; keep bisecting toward it from both sides.
        let (mut edge1, mut edge2) = (Edge::None, Edge::None);
        let inherited = 0.5 * seg.error;
        if (abs1 == 0.0) != (abs2 == 0.0) {
            edge1 = Edge::Right;
            edge2 = Edge::Left;
        }
        match seg.edge {
            Edge::Left => edge1 = Edge::Left,
            Edge::Right => edge2 = Edge::Right,
            Edge::None => {}
        }
        if edge1 != Edge::None {
            e1 = e1.max(inherited);
        }
        if edge2 != Edge::None {
            e2 = e2.max(inherited);
        }
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        subdivisions += 1;
        heap.push(Segment { piece: seg.piece, a: seg.a, b: mid, value: v1, error: e1, edge: edge1 });
        heap.push(Segment { piece: seg.piece, a: mid, b: seg.b, value: v2, error: e2, edge: edge2 });
    }
    // Re-sum from the pieces to shed accumulated rounding in the running totals.
    let value = finished_value + heap.iter().map(|s| s.value).sum::<f64>();
    let error = finished_error + heap.iter().map(|s| s.error).sum::<f64>();
    Ok(QuadResult { value, error, subdivisions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg() -> QuadratureCfg {
        QuadratureCfg::default()
    }

    #[test]
    fn jump_to_zero_without_breakpoint() {
        // integrand vanishes beyond an edge that is not passed as a breakpoint
        let edge = 0.731_234_567;
        let f = |x: f64| if x < edge { x * x } else { 0.0 };
        let r = integrate(f, 0.0, 1.0, &[], 1.0, &cfg()).unwrap();
        assert!((r.value - edge.powi(3) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x * x, 0.0, 3.0, &[], 1.0, &cfg()).unwrap();
        assert!((r.value - 9.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_over_real_line_all_transforms() {
        for t in [TailTransform::None, TailTransform::ExpMap, TailTransform::LogitMap] {
            let c = cfg().with_transform(t);
            let r = integrate(|x| (-0.5 * x * x).exp(), f64::NEG_INFINITY, f64::INFINITY, &[], 1.0, &c)
                .unwrap();
            assert!((r.value - (2.0 * PI).sqrt()).abs() < 1e-11, "{t:?}: {}", r.value);
        }
    }

    #[test]
    fn semi_infinite_gamma_integral() {
        // ∫_0^∞ x^6 e^{-x} dx = 720; the exp map needs a scale at least the decay length
        let f = |x: f64| x.powi(6) * (-x).exp();
        let r = integrate(f, 0.0, f64::INFINITY, &[], 7.0, &cfg()).unwrap();
        assert!((r.value - 720.0).abs() / 720.0 < 1e-11);
        let rational = cfg().with_transform(TailTransform::None);
        let r = integrate(f, 0.0, f64::INFINITY, &[], 1.0, &rational).unwrap();
        assert!((r.value - 720.0).abs() / 720.0 < 1e-11);
    }

    #[test]
    fn logit_map_handles_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let c = cfg().with_transform(TailTransform::LogitMap);
        let r = integrate(|x| x.powf(-0.5), 0.0, 1.0, &[], 1.0, &c).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn kink_with_and_without_breakpoint() {
        let f = |x: f64| (-x.abs()).exp() * (x.abs() < 0.3) as u8 as f64;
        let exact = 2.0 * (1.0 - (-0.3f64).exp());
        let split = integrate(f, -1.0, 1.0, &[-0.3, 0.0, 0.3], 1.0, &cfg()).unwrap();
        let plain = integrate(f, -1.0, 1.0, &[], 1.0, &cfg()).unwrap();
        assert!((split.value - exact).abs() < 1e-13);
        assert!((plain.value - exact).abs() < 1e-10);
        assert!(split.subdivisions < plain.subdivisions);
    }

    #[test]
    fn divergent_integral_reports_numeric_error() {
        let c = QuadratureCfg { max_subdivisions: 200, ..cfg() };
        let err = integrate(|x| 1.0 / x, 0.0, 1.0, &[], 1.0, &c).unwrap_err();
        assert!(matches!(err, Error::Numeric { .. }), "{err:?}");
    }

    #[test]
    fn config_validation() {
        let bad = QuadratureCfg { max_subdivisions: 8, ..cfg() };
        assert!(integrate(|x| x, 0.0, 1.0, &[], 1.0, &bad).is_err());
        let bad = QuadratureCfg { rel_tol: 0.0, ..cfg() };
        assert!(bad.validate().is_err());
    }
}
