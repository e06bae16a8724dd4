//! Adaptive Gauss–Kronrod quadrature, bisection, and the truncation-sweep
//! divergence test shared by the Lévy-measure integrals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// 15-point Kronrod abscissae and weights; every other node carries the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_subdivisions: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return integrate_unbounded(&f, a, b, cfg);
    }
    integrate_finite(f, a, b, cfg)
}

fn integrate_finite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<f64> {
    if a > b {
        return integrate_finite(f, b, a, cfg).map(|v| -v);
    }
    let (value, error) = gk15(&f, a, b);
    let mut segments = vec![Segment { a, b, value, error }];
    let mut total = value;
    let mut total_err = error;
    loop {
        if !total.is_finite() {
            return Err(Error::numeric_with(
                "non-finite integrand value during quadrature",
                total,
                total_err,
            ));
        }
        if total_err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            return Ok(total);
        }
        if segments.len() >= cfg.max_subdivisions {
            return Err(Error::numeric_with(
                format!("quadrature on [{a}, {b}] did not converge"),
                total,
                total_err,
            ));
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("non-empty");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval exhausted at machine precision; accept what we have.
            total_err -= seg.error;
            segments.push(Segment { error: 0.0, ..seg });
            continue;
        }
        let (v1, e1) = gk15(&f, seg.a, mid);
        let (v2, e2) = gk15(&f, mid, seg.b);
        segments.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        segments.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
        total += v1 + v2 - seg.value;
        total_err = (total_err + e1 + e2 - seg.error).max(0.0);
    }
}

/// Integrates over `[a, b]` where one or both ends are infinite, by the
/// substitution `x = c + t / (1 - t)`.
fn integrate_unbounded(f: &dyn Fn(f64) -> f64, a: f64, b: f64, cfg: &QuadConfig) -> Result<f64> {
    match (a.is_finite(), b.is_finite()) {
        (true, false) if b > 0.0 => integrate_finite(
            |t| {
                let s = 1.0 - t;
                f(a + t / s) / (s * s)
            },
            0.0,
            1.0,
            cfg,
        ),
        (false, true) if a < 0.0 => integrate_finite(
            |t| {
                let s = 1.0 - t;
                f(b - t / s) / (s * s)
            },
            0.0,
            1.0,
            cfg,
        ),
        (false, false) if a < 0.0 && b > 0.0 => {
            Ok(integrate_unbounded(f, a, 0.0, cfg)? + integrate_unbounded(f, 0.0, b, cfg)?)
        }
        _ => Err(Error::domain(format!("invalid integration range [{a}, {b}]"))),
    }
}

/// Integrates over `[a, b]`, splitting at the given interior breakpoints.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    cfg: &QuadConfig,
) -> Result<f64> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = 0.0;
    let mut lo = a;
    for &p in pts.iter().chain(std::iter::once(&b)) {
        total += integrate(&f, lo, p, cfg)?;
        lo = p;
    }
    Ok(total)
}

/// Finds a root of `f` in `[lo, hi]` by bisection; `f(lo)` and `f(hi)` must
/// have opposite signs (or one of them is zero).
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::numeric_with(
            format!("bisection bracket [{lo}, {hi}] does not change sign"),
            flo,
            fhi,
        ));
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Parameters of the geometric truncation sweep used to decide whether an
/// improper integral over an unbounded (or singular) region diverges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Number of doubling bands examined.
    pub max_level: usize,
    /// Number of trailing band increments inspected.
    pub window: usize,
    /// Increments shrinking slower than this ratio count as non-decaying.
    /// Faster geometric decay is extrapolated past the last band.
    pub ratio: f64,
    /// Increments below this absolute size never signal divergence.
    pub divergence_threshold: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            max_level: 30,
            window: 4,
            ratio: 0.999,
            divergence_threshold: 1e-9,
        }
    }
}

/// Outcome of judging a sequence of band increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepVerdict {
    Finite(f64),
    Divergent,
}

/// Judges a sequence of per-band increments: divergence when the trailing
/// `window` increments are all above threshold, of one sign, and not decaying.
pub fn judge_sweep(increments: &[f64], cfg: &SweepConfig) -> Result<SweepVerdict> {
    let total: f64 = increments.iter().sum();
    let w = cfg.window.max(2);
    if increments.len() < w {
        return Ok(SweepVerdict::Finite(total));
    }
    let tail = &increments[increments.len() - w..];
    let all_big = tail.iter().all(|v| v.abs() >= cfg.divergence_threshold);
    if !all_big {
        return Ok(SweepVerdict::Finite(total));
    }
    let same_sign = tail.iter().all(|v| v.signum() == tail[0].signum());
    let non_decaying = tail
        .windows(2)
        .all(|p| p[1].abs() >= cfg.ratio * p[0].abs());
    if same_sign && non_decaying {
        return Ok(SweepVerdict::Divergent);
    }
    if !same_sign && non_decaying {
        return Err(Error::numeric_with(
            "oscillatory non-convergence in truncation sweep",
            total,
            tail[w - 1],
        ));
    }
    if same_sign {
        let r = tail
            .windows(2)
            .map(|p| p[1].abs() / p[0].abs())
            .fold(0.0, f64::max);
        if r < 1.0 {
            return Ok(SweepVerdict::Finite(total + tail[w - 1] * r / (1.0 - r)));
        }
    }
    Ok(SweepVerdict::Finite(total))
}
