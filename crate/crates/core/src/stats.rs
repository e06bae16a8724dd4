//! Empirical checks on sample pools: atom detection, Kolmogorov-Smirnov tests
//! and the distributional fixed-point test.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::criteria::{check_convergence, ConvergenceVerdict};
use crate::error::{Error, Result};
use crate::exfun::{ExpSampler, HorizonPolicy, SamplePool};
use crate::levy::{IntegrationConfig, LevyTriplet2D};
use crate::path::{RngStream, SimConfig};

/// Significance of the local cluster test.
pub const ATOM_ALPHA: f64 = 0.01;
/// The null neighbourhood is this many window widths wide.
const NEIGHBOURHOOD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomCandidate {
    pub location: f64,
    pub mass_estimate: f64,
    pub count: usize,
    pub window_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtomVerdict {
    AtomsFound,
    NoAtomsDetected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomReport {
    pub candidates: Vec<AtomCandidate>,
    pub null_max_mass: f64,
    pub verdict: AtomVerdict,
}

impl AtomReport {
    pub fn atoms(&self) -> impl Iterator<Item = &AtomCandidate> {
        self.candidates.iter().filter(move |c| c.mass_estimate > self.null_max_mass)
    }
}

/// Ten times the pool's integration tolerance.
pub fn default_resolution(pool: &SamplePool) -> f64 {
    10.0 * pool.meta.tail_tolerance
}

fn binomial_tail(n: usize, q: f64, c: usize) -> Result<f64> {
    if c == 0 {
        return Ok(1.0);
    }
    let b = Binomial::new(q.clamp(0.0, 1.0), n as u64).map_err(|e| Error::numeric(format!("binomial: {e}")))?;
    Ok(b.sf(c as u64 - 1))
}

/// Smallest count whose upper tail is below `level`.
fn critical_count(n: usize, q: f64, level: f64) -> Result<usize> {
    let (mut lo, mut hi) = (0usize, n + 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if binomial_tail(n, q, mid)? < level {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

struct Window {
    start: usize,
    count: usize,
    q: f64,
}

/// Scans the pool for clusters of width `2·resolution` that a locally
/// uniform density cannot explain.
///
/// The null mass of a window is the count of a ten times wider neighbourhood,
/// with the window removed and one pseudo-sample added, scaled to the window
/// width. A window with binomial tail below 0.01 is a candidate; the verdict
/// compares candidate masses against a Bonferroni-corrected null bound.
pub fn detect_atoms(pool: &SamplePool, resolution: f64) -> Result<AtomReport> {
    let v = &pool.values;
    let n = v.len();
    if n < 100 {
        return Err(Error::domain(format!("atom detection needs at least 100 samples, got {n}")));
    }
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(resolution.is_finite() && resolution > 0.0) || resolution <= 4.0 * f64::EPSILON * scale {
        return Err(Error::domain(format!(
            "resolution {resolution} is below float granularity at magnitude {scale}"
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("pool contains non-finite values"));
    }
    let width = 2.0 * resolution;
    let half_nb = 0.5 * NEIGHBOURHOOD * width;
    let scale_down = width / (NEIGHBOURHOOD * width - width);

    let mut windows = Vec::new();
    let (mut end, mut nb_lo, mut nb_hi) = (0usize, 0usize, 0usize);
    for start in 0..n {
        let a = v[start];
        let centre = a + resolution;
        end = end.max(start);
        while end < n && v[end] <= a + width {
            end += 1;
        }
        while v[nb_lo] < centre - half_nb {
            nb_lo += 1;
        }
        nb_hi = nb_hi.max(end);
        while nb_hi < n && v[nb_hi] <= centre + half_nb {
            nb_hi += 1;
        }
        let count = end - start;
        let outside = (nb_hi - nb_lo) - count;
        let q = (outside + 1) as f64 / n as f64 * scale_down;
        windows.push(Window { start, count, q });
    }

    let tested: Vec<(usize, f64, usize)> = windows
        .par_iter()
        .enumerate()
        .filter(|(_, w)| w.count >= 2)
        .map(|(i, w)| -> Result<Option<(usize, f64, usize)>> {
            if binomial_tail(n, w.q, w.count)? < ATOM_ALPHA {
                let crit = critical_count(n, w.q, ATOM_ALPHA / n as f64)?;
                Ok(Some((i, w.q, crit)))
            } else {
                Ok(None)
            }
        })
        .filter_map(|r| r.transpose())
        .collect::<Result<_>>()?;

    let null_max_mass = if tested.is_empty() {
        let densest = windows.iter().max_by_key(|w| w.count).expect("non-empty");
        (critical_count(n, densest.q, ATOM_ALPHA / n as f64)?.saturating_sub(1)) as f64 / n as f64
    } else {
        tested.iter().map(|t| t.2.saturating_sub(1) as f64 / n as f64).fold(0.0, f64::max)
    };

    // Merge overlapping candidate windows, keeping the fullest.
    let mut candidates: Vec<AtomCandidate> = Vec::new();
    let mut group_end = f64::NEG_INFINITY;
    let mut best: Option<&Window> = None;
    let flush = |best: Option<&Window>, out: &mut Vec<AtomCandidate>| {
        if let Some(w) = best {
            let slice = &v[w.start..w.start + w.count];
            out.push(AtomCandidate {
                location: slice.iter().sum::<f64>() / w.count as f64,
                mass_estimate: w.count as f64 / n as f64,
                count: w.count,
                window_width: width,
            });
        }
    };
    for &(i, _, _) in &tested {
        let w = &windows[i];
        let a = v[w.start];
        if a > group_end {
            flush(best.take(), &mut candidates);
        }
        group_end = group_end.max(a + width);
        if best.is_none_or(|b| w.count > b.count) {
            best = Some(w);
        }
    }
    flush(best, &mut candidates);

    let verdict = if candidates.iter().any(|c| c.mass_estimate > null_max_mass) {
        AtomVerdict::AtomsFound
    } else {
        AtomVerdict::NoAtomsDetected
    };
    Ok(AtomReport { candidates, null_max_mass, verdict })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.3 {
        // The alternating series converges slowly here; the dual form is exact.
        let s: f64 = (1..=50)
            .map(|k| {
                let k = (2 * k - 1) as f64;
                (-k * k * std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp()
            })
            .sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        s += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

/// One-sample KS test against `cdf`.
pub fn ks_test(pool: &SamplePool, cdf: &dyn Fn(f64) -> f64) -> Result<KsResult> {
    ks_test_values(&pool.values, cdf)
}

/// One-sample KS test on sorted values.
pub fn ks_test_values(sorted: &[f64], cdf: &dyn Fn(f64) -> f64) -> Result<KsResult> {
    let n = sorted.len();
    if n < 10 {
        return Err(Error::domain(format!("KS test needs at least 10 samples, got {n}")));
    }
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::domain(format!("cdf({x}) = {f} is outside [0, 1]")));
        }
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    Ok(KsResult { statistic: d, p_value: ks_p(d, nf), n })
}

/// Two-sample KS test on sorted values.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let (n, m) = (a.len(), b.len());
    if n < 10 || m < 10 {
        return Err(Error::domain(format!("KS test needs at least 10 samples per pool, got {n} and {m}")));
    }
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n * m) as f64 / (n + m) as f64;
    Ok(KsResult { statistic: d, p_value: ks_p(d, n_eff), n: n.min(m) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub t: f64,
    pub n: usize,
    pub seed: u64,
    pub p_value: f64,
    /// KS statistic; absent when both pools are constant.
    pub statistic: Option<f64>,
    pub constant_pools: bool,
}

/// Relative spread under which a pool counts as constant.
const CONSTANT_TOL: f64 = 1e-6;

fn is_constant(v: &[f64]) -> bool {
    let (lo, hi) = (v[0], v[v.len() - 1]);
    hi - lo <= CONSTANT_TOL * lo.abs().max(hi.abs()).max(1.0)
}

/// Compares n samples of `I` with n samples of `I_t + e^{−ξ_t} I'`, where
/// `I'` is an independent copy of `I`, by a two-sample KS test.
pub fn fixed_point_test(
    t2: &LevyTriplet2D,
    t: f64,
    n: usize,
    seed: u64,
    sim: &SimConfig,
    policy: &HorizonPolicy,
    cfg: &IntegrationConfig,
) -> Result<FixedPointResult> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("fixed-point time must be non-negative, got {t}")));
    }
    let conv = check_convergence(t2, cfg);
    if conv.verdict != ConvergenceVerdict::Converges {
        return Err(Error::domain(format!(
            "fixed-point test needs a convergent integral, checker says {:?}",
            conv.verdict
        )));
    }
    let sampler = ExpSampler::new(t2, sim, policy)?;
    let a = sampler.pool(n, seed)?;
    let b_seed = RngStream::new(seed, 0).derive(0x6669_7865_6470).seed;
    let mut b: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let s = RngStream::new(b_seed, i);
            let (it, m) = sampler.prefix(t, s)?;
            let rest = sampler.sample(s.derive(1))?;
            Ok(it + m * rest.value)
        })
        .collect::<Result<_>>()?;
    b.sort_by(f64::total_cmp);
    if n >= 1 && is_constant(&a.values) && is_constant(&b) {
        let (ma, mb) = (a.values[0], b[0]);
        let agree = (ma - mb).abs() <= CONSTANT_TOL * ma.abs().max(mb.abs()).max(1.0);
        return Ok(FixedPointResult {
            t,
            n,
            seed,
            p_value: if agree { 1.0 } else { 0.0 },
            statistic: None,
            constant_pools: true,
        });
    }
    let ks = ks_two_sample(&a.values, &b)?;
    Ok(FixedPointResult {
        t,
        n,
        seed,
        p_value: ks.p_value,
        statistic: Some(ks.statistic),
        constant_pools: false,
    })
}

/// Writes `bin_lo,bin_hi,count,density` rows for an equal-width histogram.
pub fn write_histogram(values: &[f64], bins: usize, path: &Path) -> Result<()> {
    if bins == 0 {
        return Err(Error::domain("histogram needs at least one bin"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "bin_lo,bin_hi,count,density")?;
    let finite: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if finite.is_empty() {
        w.flush()?;
        return Ok(());
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let step = span / bins as f64;
    let mut counts = vec![0usize; bins];
    for x in &finite {
        let i = (((x - lo) / step) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let total = finite.len() as f64;
    for (i, c) in counts.iter().enumerate() {
        let a = lo + i as f64 * step;
        writeln!(w, "{:?},{:?},{},{:?}", a, a + step, c, *c as f64 / (total * step))?;
    }
    w.flush()?;
    Ok(())
}
