//! One-dimensional Lévy measures: atoms, absolutely continuous parts and
//! (for convergence checks) infinite sequences of atoms located in log scale.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::density::{DensityPart, Side};
use crate::error::{Error, Result};
use crate::quad::{integrate, judge_sweep, QuadConfig, SweepConfig, SweepVerdict};

/// A point mass of the Lévy measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub loc: f64,
    pub mass: f64,
}

/// Term generator of an atom sequence: index ↦ (log|location|, mass).
pub type TermFn = Arc<dyn Fn(u64) -> (f64, f64) + Send + Sync>;

/// Countably many atoms on one side, located at `sign · exp(u_n)` with `u_n`
/// increasing. Locations are kept in log scale so sequences may run far
/// beyond the range of `f64`.
#[derive(Clone)]
pub struct AtomSequence {
    pub label: String,
    pub sign: f64,
    pub first: u64,
    terms: TermFn,
}

impl fmt::Debug for AtomSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AtomSequence")
            .field("label", &self.label)
            .field("sign", &self.sign)
            .field("first", &self.first)
            .finish()
    }
}

const MAX_SEQUENCE_TERMS: u64 = 1_000_000;

impl AtomSequence {
    pub fn new(label: impl Into<String>, side: Side, first: u64, terms: TermFn) -> Self {
        AtomSequence {
            label: label.into(),
            sign: side.sign(),
            first,
            terms,
        }
    }

    /// Atoms at `sign · exp(base^n)` with mass `ratio^n`, `n ≥ first`.
    pub fn log_geometric(side: Side, base: f64, ratio: f64, first: u64) -> Result<Self> {
        if !(base > 1.0 && ratio > 0.0 && ratio < 1.0) {
            return Err(Error::domain("log-geometric atoms need base > 1 and ratio in (0,1)"));
        }
        Ok(AtomSequence::new(
            format!("log_geometric(base={base}, ratio={ratio})"),
            side,
            first,
            Arc::new(move |n| (base.powf(n as f64), ratio.powf(n as f64))),
        ))
    }

    pub fn term(&self, n: u64) -> (f64, f64) {
        (self.terms)(n)
    }

    /// Visits terms with `log|loc|` in `(u_lo, u_hi]` until the masses become
    /// negligible relative to what has been accumulated.
    fn visit(&self, u_lo: f64, u_hi: f64, mut visit: impl FnMut(f64, f64)) {
        let mut acc = 0.0;
        for n in self.first..self.first + MAX_SEQUENCE_TERMS {
            let (u, m) = self.term(n);
            if u > u_hi || !u.is_finite() {
                break;
            }
            if u > u_lo {
                visit(u, m);
                acc += m;
            }
            if m < 1e-300 || (acc > 0.0 && m < 1e-18 * acc && u > u_lo) {
                break;
            }
        }
    }

    /// Mass of terms with `|loc| > z`.
    fn mass_beyond(&self, z: f64) -> f64 {
        let mut s = 0.0;
        self.visit(z.ln(), f64::INFINITY, |_, m| s += m);
        s
    }
}

/// A subset of ℝ∖{0} over which to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    All,
    /// `lo < x ≤ hi`
    Interval { lo: f64, hi: f64 },
    /// `lo ≤ x ≤ hi`
    Closed { lo: f64, hi: f64 },
    /// `lo ≤ x < hi`
    HalfOpen { lo: f64, hi: f64 },
    /// `lo < |x| ≤ hi`
    Abs { lo: f64, hi: f64 },
}

impl Region {
    pub fn contains(&self, x: f64) -> bool {
        if x == 0.0 {
            return false;
        }
        match *self {
            Region::All => true,
            Region::Interval { lo, hi } => x > lo && x <= hi,
            Region::Closed { lo, hi } => x >= lo && x <= hi,
            Region::HalfOpen { lo, hi } => x >= lo && x < hi,
            Region::Abs { lo, hi } => x.abs() > lo && x.abs() <= hi,
        }
    }

    /// Signed open intervals, none straddling 0, covering the region up to endpoints.
    fn pieces(&self) -> Vec<(f64, f64)> {
        let split = |lo: f64, hi: f64| -> Vec<(f64, f64)> {
            let mut v = Vec::new();
            if lo < 0.0 {
                v.push((lo, hi.min(0.0)));
            }
            if hi > 0.0 {
                v.push((lo.max(0.0), hi));
            }
            v.retain(|(a, b)| a < b);
            v
        };
        match *self {
            Region::All => split(f64::NEG_INFINITY, f64::INFINITY),
            Region::Interval { lo, hi } | Region::Closed { lo, hi } | Region::HalfOpen { lo, hi } => {
                split(lo, hi)
            }
            Region::Abs { lo, hi } => {
                let lo = lo.max(0.0);
                if lo >= hi {
                    Vec::new()
                } else {
                    vec![(-hi, -lo), (lo, hi)]
                }
            }
        }
    }
}

/// Integrand for [`LevyMeasure1D::integrate_against`].
#[derive(Clone, Copy)]
pub enum Integrand<'a> {
    Plain(&'a (dyn Fn(f64) -> f64 + Sync)),
    /// Evaluated as `h(log|y|, sign y)`; usable for atoms beyond `f64` range.
    LogAbs(&'a (dyn Fn(f64, f64) -> f64 + Sync)),
}

impl Integrand<'_> {
    fn at(&self, y: f64) -> f64 {
        match self {
            Integrand::Plain(f) => f(y),
            Integrand::LogAbs(h) => h(y.abs().ln(), y.signum()),
        }
    }

    fn at_log(&self, u: f64, sign: f64) -> f64 {
        match self {
            Integrand::Plain(f) => f(sign * u.exp()),
            Integrand::LogAbs(h) => h(u, sign),
        }
    }
}

/// Tolerances for integrals against a Lévy measure.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub quad: QuadConfig,
    pub sweep: SweepConfig,
}

/// Whether the measure has finite total mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Finite(f64),
    Infinite,
}

/// Whether `∫_{|x|≤1} |x| Π(dx)` is finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallJumpVariation {
    FiniteVariation,
    InfiniteVariation,
}

/// A Lévy measure on ℝ∖{0}.
#[derive(Debug, Clone, Default)]
pub struct LevyMeasure1D {
    pub atoms: Vec<Atom>,
    pub parts: Vec<DensityPart>,
    pub sequences: Vec<AtomSequence>,
}

// log of f64::MAX, minus a margin; ac parts are not integrated beyond this.
const LOG_MAX: f64 = 709.0;
const MAX_INNER_LEVELS: usize = 200;

impl LevyMeasure1D {
    pub fn zero() -> Self {
        LevyMeasure1D::default()
    }

    pub fn from_atoms(atoms: Vec<Atom>) -> Result<Self> {
        LevyMeasure1D::new(atoms, Vec::new())
    }

    pub fn from_parts(parts: Vec<DensityPart>) -> Result<Self> {
        LevyMeasure1D::new(Vec::new(), parts)
    }

    pub fn new(atoms: Vec<Atom>, parts: Vec<DensityPart>) -> Result<Self> {
        for a in &atoms {
            if !(a.loc.is_finite() && a.loc != 0.0 && a.mass.is_finite() && a.mass > 0.0) {
                return Err(Error::domain(format!(
                    "atom at {} with mass {} is not admissible",
                    a.loc, a.mass
                )));
            }
        }
        let m = LevyMeasure1D {
            atoms,
            parts,
            sequences: Vec::new(),
        };
        Ok(m)
    }

    pub fn with_sequence(mut self, seq: AtomSequence) -> Self {
        self.sequences.push(seq);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.parts.is_empty() && self.sequences.is_empty()
    }

    /// `Π((z, ∞))` for `z ≥ 0`.
    pub fn tail_plus(&self, z: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().filter(|a| a.loc > z).map(|a| a.mass).sum();
        let parts: f64 = self.parts.iter().map(|p| p.mass_in(z, f64::INFINITY)).sum();
        let seqs: f64 = self
            .sequences
            .iter()
            .filter(|s| s.sign > 0.0)
            .map(|s| s.mass_beyond(z))
            .sum();
        atoms + parts + seqs
    }

    /// `Π((−∞, −z))` for `z ≥ 0`.
    pub fn tail_minus(&self, z: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().filter(|a| a.loc < -z).map(|a| a.mass).sum();
        let parts: f64 = self.parts.iter().map(|p| p.mass_in(f64::NEG_INFINITY, -z)).sum();
        let seqs: f64 = self
            .sequences
            .iter()
            .filter(|s| s.sign < 0.0)
            .map(|s| s.mass_beyond(z))
            .sum();
        atoms + parts + seqs
    }

    /// `Π({|x| > eps})`
    pub fn mass_beyond(&self, eps: f64) -> f64 {
        self.tail_plus(eps) + self.tail_minus(eps)
    }

    pub fn has_positive_jumps(&self) -> bool {
        self.tail_plus(0.0) > 0.0
    }

    pub fn has_negative_jumps(&self) -> bool {
        self.tail_minus(0.0) > 0.0
    }

    pub fn activity(&self) -> Activity {
        let m = self.mass_beyond(0.0);
        if m.is_finite() {
            Activity::Finite(m)
        } else {
            Activity::Infinite
        }
    }

    pub fn small_jump_variation(&self, cfg: &IntegrationConfig) -> Result<SmallJumpVariation> {
        let v = self.integrate_against(Integrand::Plain(&|x: f64| x.abs()), Region::Abs { lo: 0.0, hi: 1.0 }, cfg)?;
        Ok(if v.is_finite() {
            SmallJumpVariation::FiniteVariation
        } else {
            SmallJumpVariation::InfiniteVariation
        })
    }

    /// Checks `∫ min(1, x²) Π(dx) < ∞` on the declared representation.
    pub fn validate(&self, cfg: &IntegrationConfig) -> Result<()> {
        let v = self.integrate_against(Integrand::Plain(&|x: f64| (x * x).min(1.0)), Region::All, cfg)?;
        if !v.is_finite() {
            return Err(Error::domain("Lévy measure violates ∫ min(1, x²) Π(dx) < ∞"));
        }
        Ok(())
    }

    /// Integrates `f` against the measure over `region`.
    ///
    /// Atoms are summed directly. Absolutely continuous parts are integrated by
    /// adaptive quadrature, over dyadic bands towards the origin and over bands
    /// doubling in `log|x|` towards infinity; when the band increments stop
    /// decaying the integral is reported as `+∞`.
    pub fn integrate_against(&self, f: Integrand<'_>, region: Region, cfg: &IntegrationConfig) -> Result<f64> {
        let mut total: f64 = self
            .atoms
            .iter()
            .filter(|a| region.contains(a.loc))
            .map(|a| f.at(a.loc) * a.mass)
            .sum();
        for (a, b) in region.pieces() {
            let (side, m1, m2) = if a >= 0.0 { (Side::Positive, a, b) } else { (Side::Negative, -b, -a) };
            let v = self.integrate_side(f, side, m1, m2, cfg)?;
            if v.is_infinite() {
                return Ok(f64::INFINITY);
            }
            total += v;
        }
        Ok(total)
    }

    fn integrate_side(&self, f: Integrand<'_>, side: Side, m1: f64, m2: f64, cfg: &IntegrationConfig) -> Result<f64> {
        let sign = side.sign();
        let parts: Vec<&DensityPart> = self
            .parts
            .iter()
            .filter(|p| {
                let (lo, hi) = p.support();
                let (plo, phi) = if sign > 0.0 { (lo, hi) } else { (-hi, -lo) };
                plo < m2 && phi > m1 && phi > 0.0
            })
            .collect();
        let seqs: Vec<&AtomSequence> = self.sequences.iter().filter(|s| s.sign == sign).collect();
        if parts.is_empty() && seqs.is_empty() {
            return Ok(0.0);
        }
        // Integral of the ac parts over magnitudes (lo, hi), lo < hi < ∞.
        let band = |lo: f64, hi: f64, log_coords: bool| -> Result<f64> {
            let mut s = 0.0;
            for p in &parts {
                let (slo, shi) = p.support();
                let (plo, phi) = if sign > 0.0 { (slo, shi) } else { (-shi, -slo) };
                let (l, h) = (lo.max(plo), hi.min(phi));
                if !(l < h) {
                    continue;
                }
                if log_coords && l > 0.0 {
                    s += integrate(
                        |u: f64| {
                            let x = sign * u.exp();
                            f.at(x) * p.density(x) * u.exp()
                        },
                        l.ln(),
                        h.ln(),
                        &cfg.quad,
                    )?;
                } else {
                    s += integrate(|m: f64| f.at(sign * m) * p.density(sign * m), l, h, &cfg.quad)?;
                }
            }
            Ok(s)
        };

        // Mass past e^LOG_MAX, taking the log-coordinate integrand as exponential there.
        let beyond_log_max = || -> f64 {
            let h = |u: f64| -> f64 {
                let x = sign * u.exp();
                parts
                    .iter()
                    .filter(|p| {
                        let (lo, hi) = p.support();
                        if sign > 0.0 { hi > x } else { lo < x }
                    })
                    .map(|p| f.at(x) * p.density(x) * u.exp())
                    .sum()
            };
            let (h1, h2) = (h(LOG_MAX - 1.0), h(LOG_MAX));
            if !(h1.is_finite() && h2.is_finite()) || h2 == 0.0 || h1 * h2 <= 0.0 || h2.abs() >= h1.abs() {
                return 0.0;
            }
            h2 / (h1 / h2).ln()
        };

        let mut total = 0.0;
        let touches_zero = m1 == 0.0
            && parts.iter().any(|p| {
                let (lo, hi) = p.support();
                if sign > 0.0 {
                    lo <= 0.0
                } else {
                    hi >= 0.0
                }
            });
        let inner_top = if m1 == 0.0 { m2.min(1.0) } else { m1 };
        let outer_start = if m2.is_infinite() { m1.max(1.0) } else { m2 };

        if touches_zero {
            let mut incs = Vec::new();
            let mut hi = inner_top;
            let mut quiet = 0;
            for _ in 0..MAX_INNER_LEVELS {
                let lo = 0.5 * hi;
                let v = band(lo, hi, false)?;
                incs.push(v);
                hi = lo;
                let acc: f64 = incs.iter().sum();
                if v.abs() <= 1e-17 * acc.abs().max(1e-300) {
                    quiet += 1;
                    if quiet >= 3 {
                        break;
                    }
                } else {
                    quiet = 0;
                }
            }
            match judge_sweep(&incs, &cfg.sweep)? {
                SweepVerdict::Finite(v) => total += v,
                SweepVerdict::Divergent => return Ok(f64::INFINITY),
            }
        }
        if inner_top < outer_start {
            total += band(inner_top, outer_start, false)?;
        }
        if m2.is_infinite() {
            let u0 = outer_start.ln();
            let mut incs = Vec::new();
            let mut complete = 0usize;
            for level in 0..cfg.sweep.max_level {
                let ulo = u0 + (2f64.powi(level as i32) - 1.0);
                let uhi = u0 + (2f64.powi(level as i32 + 1) - 1.0);
                let mut v = 0.0;
                if ulo < LOG_MAX {
                    match band(ulo.exp(), uhi.min(LOG_MAX).exp(), true) {
                        Ok(b) => v += b,
                        // Quadrature gives up on bands of astronomically growing mass.
                        Err(e) => {
                            if judge_sweep(&incs, &cfg.sweep)? == SweepVerdict::Divergent {
                                return Ok(f64::INFINITY);
                            }
                            return Err(e);
                        }
                    }
                    if uhi <= LOG_MAX {
                        complete = level + 1;
                    }
                }
                for s in &seqs {
                    s.visit(ulo, uhi, |u, m| v += f.at_log(u, sign) * m);
                }
                incs.push(v);
                if seqs.is_empty() && ulo >= LOG_MAX {
                    break;
                }
            }
            let judged = if seqs.is_empty() { &incs[..complete.max(1).min(incs.len())] } else { &incs[..] };
            match judge_sweep(judged, &cfg.sweep)? {
                // Atom sequences may continue past the last band; extrapolate them.
                SweepVerdict::Finite(v) if !seqs.is_empty() => total += v,
                SweepVerdict::Finite(_) => total += incs.iter().sum::<f64>() + beyond_log_max(),
                SweepVerdict::Divergent => return Ok(f64::INFINITY),
            }
        } else {
            for s in &seqs {
                s.visit(m1.max(f64::MIN_POSITIVE).ln(), m2.ln(), |u, m| total += f.at_log(u, sign) * m);
            }
        }
        Ok(total)
    }

    /// Builds a sampler for the jumps with `|x| > eps`.
    pub fn jump_sampler(&self, eps: f64) -> Result<JumpSampler> {
        let mut comps = Vec::new();
        for a in &self.atoms {
            if a.loc.abs() > eps {
                comps.push((a.mass, JumpComponent::Fixed(a.loc)));
            }
        }
        for s in &self.sequences {
            let mut err = None;
            s.visit(eps.max(f64::MIN_POSITIVE).ln(), f64::INFINITY, |u, m| {
                let loc = s.sign * u.exp();
                if loc.is_finite() {
                    comps.push((m, JumpComponent::Fixed(loc)));
                } else if m > 0.0 {
                    err = Some(u);
                }
            });
            if let Some(u) = err {
                return Err(Error::numeric_with("atom sequence location overflows f64", u, eps));
            }
        }
        for p in &self.parts {
            for (a, b) in [(eps, f64::INFINITY), (f64::NEG_INFINITY, -eps)] {
                let m = p.mass_in(a, b);
                if m > 0.0 {
                    comps.push((m, JumpComponent::Part { part: p.clone(), a, b }));
                }
            }
        }
        let rate: f64 = comps.iter().map(|c| c.0).sum();
        if !rate.is_finite() {
            return Err(Error::domain(format!(
                "infinite jump rate above cutoff {eps}; use a positive epsilon for infinite-activity measures"
            )));
        }
        let mut cum = Vec::with_capacity(comps.len());
        let mut acc = 0.0;
        for c in &comps {
            acc += c.0;
            cum.push(acc);
        }
        Ok(JumpSampler {
            rate,
            cum,
            comps: comps.into_iter().map(|c| c.1).collect(),
        })
    }

    /// Representative support points: every atom plus a grid over each part.
    pub fn probe_points(&self, per_part: usize) -> Vec<f64> {
        let mut pts: Vec<f64> = self.atoms.iter().map(|a| a.loc).collect();
        for p in &self.parts {
            pts.extend(p.probe_points(per_part));
        }
        for s in &self.sequences {
            for n in s.first..s.first + 4 {
                let (u, _) = s.term(n);
                let loc = s.sign * u.exp();
                if loc.is_finite() {
                    pts.push(loc);
                }
            }
        }
        pts
    }
}

#[derive(Debug, Clone)]
enum JumpComponent {
    Fixed(f64),
    Part { part: DensityPart, a: f64, b: f64 },
}

/// Samples jumps of a Lévy measure restricted to `|x| > eps`.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    rate: f64,
    cum: Vec<f64>,
    comps: Vec<JumpComponent>,
}

impl JumpSampler {
    /// Total rate of jumps above the cutoff.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let target = open_unit(rng) * self.rate;
        let idx = self.cum.partition_point(|&c| c <= target).min(self.comps.len() - 1);
        match &self.comps[idx] {
            JumpComponent::Fixed(x) => Ok(*x),
            JumpComponent::Part { part, a, b } => part.quantile_in(*a, *b, open_unit(rng)),
        }
    }
}

/// Uniform on the open interval (0, 1).
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}
