//! Exponential functionals `∫ e^{−ξ_{s−}} dη_s` and integrals `∫ g(ξ_t) dY_t`
//! computed along simulated paths.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::{IntegrationConfig, JumpSampler, LevyTriplet1D, LevyTriplet2D, Mean};
use crate::path::{PathGrid, RngStream, SimConfig, SimPlan};
use crate::quad::{integrate_with_breaks, QuadConfig};

// e^{700} is close to the largest finite f64.
const MAX_NEG_XI: f64 = 700.0;

/// `(1 − e^{−u}) / u`, continuous at 0.
fn phi(u: f64) -> f64 {
    if u.abs() < 1e-12 {
        1.0 - 0.5 * u
    } else {
        -(-u).exp_m1() / u
    }
}

fn exp_neg(xi: f64) -> Result<f64> {
    if -xi > MAX_NEG_XI {
        return Err(Error::numeric_with("e^{-xi} overflows", xi, -MAX_NEG_XI));
    }
    Ok((-xi).exp())
}

/// Running value of `∫_0^t e^{−ξ_{s−}} dη_s` over a growing path grid.
#[derive(Debug, Clone)]
pub struct ExpAccumulator {
    value: f64,
    t: f64,
    xi: f64,
    eta: f64,
    next: usize,
    sxi2: f64,
    c: f64,
    min_xi: f64,
}

impl ExpAccumulator {
    pub fn new(sigma: [[f64; 2]; 2]) -> Self {
        let sxi2 = sigma[0][0];
        ExpAccumulator {
            value: 0.0,
            t: 0.0,
            xi: 0.0,
            eta: 0.0,
            next: 0,
            sxi2,
            c: if sxi2 > 0.0 { sigma[0][1] / sxi2 } else { 0.0 },
            min_xi: 0.0,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Processes grid points not seen yet.
    pub fn consume(&mut self, path: &PathGrid) -> Result<()> {
        let (eta_left, eta) = match (&path.eta_left, &path.eta) {
            (Some(l), Some(e)) => (l, e),
            _ => return Err(Error::domain("exponential functional needs a bivariate path")),
        };
        for i in self.next..path.len() {
            let (b, eb) = (path.xi_left[i], eta_left[i]);
            let h = path.times[i] - self.t;
            let deta = eb - self.eta;
            let ea = exp_neg(self.xi)?;
            let ebx = exp_neg(b).map_err(|_| self.overflow(b))?;
            self.min_xi = self.min_xi.min(b);
            let seg = if self.sxi2 > 0.0 {
                // η = cξ + R with R uncorrelated with ξ; Itô's formula handles the cξ part exactly.
                let dxi = b - self.xi;
                self.c * (ea - ebx) + 0.5 * (ea + ebx) * (deta - self.c * (dxi - 0.5 * self.sxi2 * h))
            } else {
                deta * ea * phi(b - self.xi)
            };
            self.value += seg;
            if let Some((_, dy)) = path.jumps[i] {
                self.value += ebx * dy;
            }
            self.t = path.times[i];
            self.xi = path.xi[i];
            self.eta = eta[i];
            self.min_xi = self.min_xi.min(self.xi);
        }
        self.next = path.len();
        Ok(())
    }

    fn overflow(&self, xi: f64) -> Error {
        Error::numeric_with("e^{-xi} overflows along the path", self.min_xi.min(xi), xi)
    }
}

/// `I_T = ∫_0^T e^{−ξ_{s−}} dη_s` over the whole grid.
pub fn integrate_exponential(path: &PathGrid) -> Result<f64> {
    let mut acc = ExpAccumulator::new(path.meta.sigma);
    acc.consume(path)?;
    Ok(acc.value())
}

/// How far to extend paths for functionals over `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HorizonPolicy {
    pub tail_tolerance: f64,
    pub min_horizon: f64,
    pub max_horizon: f64,
    /// Horizon increment between stopping checks.
    pub chunk: f64,
}

impl Default for HorizonPolicy {
    fn default() -> Self {
        HorizonPolicy {
            tail_tolerance: 1e-8,
            min_horizon: 5.0,
            max_horizon: 1e4,
            chunk: 5.0,
        }
    }
}

impl HorizonPolicy {
    fn validate(&self) -> Result<()> {
        let ok = self.tail_tolerance > 0.0
            && self.min_horizon > 0.0
            && self.max_horizon >= self.min_horizon
            && self.chunk > 0.0
            && self.max_horizon.is_finite();
        if !ok {
            return Err(Error::domain(format!("invalid horizon policy {self:?}")));
        }
        Ok(())
    }

    fn next_horizon(&self, t: f64) -> f64 {
        if t == 0.0 {
            self.min_horizon
        } else {
            (t + self.chunk.max(0.5 * t)).min(self.max_horizon)
        }
    }
}

/// One functional sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSample {
    pub value: f64,
    pub horizon: f64,
    /// The stopping rule was not met before the maximal horizon.
    pub partial: bool,
}

/// Samples the exponential functional of a pair (ξ, η).
#[derive(Debug, Clone)]
pub struct ExpSampler {
    plan: SimPlan,
    policy: HorizonPolicy,
}

impl ExpSampler {
    pub fn new(t: &LevyTriplet2D, sim: &SimConfig, policy: &HorizonPolicy) -> Result<Self> {
        policy.validate()?;
        Ok(ExpSampler {
            plan: SimPlan::bivariate(t, sim)?,
            policy: *policy,
        })
    }

    pub fn plan(&self) -> &SimPlan {
        &self.plan
    }

    /// Runs one path until `e^{−ξ_T} < tail_tolerance` and `T ≥ min_horizon`.
    pub fn sample(&self, stream: RngStream) -> Result<FunctionalSample> {
        let mut sim = self.plan.simulator(stream)?;
        let mut acc = ExpAccumulator::new(self.plan.sigma());
        let mut t = 0.0;
        loop {
            t = self.policy.next_horizon(t);
            sim.advance_to(t)?;
            acc.consume(sim.grid())?;
            let done = (-sim.xi()).exp() < self.policy.tail_tolerance;
            if done || t >= self.policy.max_horizon {
                return Ok(FunctionalSample {
                    value: acc.value(),
                    horizon: t,
                    partial: !done,
                });
            }
        }
    }

    /// `(I_t, e^{−ξ_t})` on one path.
    pub fn prefix(&self, t: f64, stream: RngStream) -> Result<(f64, f64)> {
        if t == 0.0 {
            return Ok((0.0, 1.0));
        }
        let mut sim = self.plan.simulator(stream)?;
        sim.advance_to(t)?;
        let mut acc = ExpAccumulator::new(self.plan.sigma());
        acc.consume(sim.grid())?;
        Ok((acc.value(), exp_neg(sim.xi())?))
    }

    pub fn pool(&self, n: usize, seed: u64) -> Result<SamplePool> {
        let samples = run_parallel(n, seed, |s| self.sample(s))?;
        Ok(SamplePool::from_samples("exponential", samples, seed, self.plan_epsilon(), &self.policy))
    }

    fn plan_epsilon(&self) -> f64 {
        self.plan.config().epsilon
    }
}

fn run_parallel<F>(n: usize, seed: u64, f: F) -> Result<Vec<FunctionalSample>>
where
    F: Fn(RngStream) -> Result<FunctionalSample> + Sync,
{
    (0..n as u64).into_par_iter().map(|i| f(RngStream::new(seed, i))).collect()
}

/// n samples of the exponential functional.
pub fn sample_exponential_functional(
    t: &LevyTriplet2D,
    n: usize,
    sim: &SimConfig,
    policy: &HorizonPolicy,
    seed: u64,
) -> Result<SamplePool> {
    ExpSampler::new(t, sim, policy)?.pool(n, seed)
}

/// Level-set condition on a window `J` of shifts beyond `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSetFlag {
    pub j: (f64, f64),
    pub t0: f64,
}

/// Caller-declared properties of g.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GFlags {
    pub nonneg: bool,
    pub compact_support: Option<(f64, f64)>,
    pub support_interior_contains_0: bool,
    pub positive_on_interior: bool,
    pub boundary_countable: bool,
    pub boundary_finite: bool,
    pub g0_nonzero: bool,
    pub positive_near_0: bool,
    pub countable_discontinuities: bool,
    pub strictly_monotone_near_0: bool,
    pub level_set_nondegenerate: Option<LevelSetFlag>,
    pub level_set_nondegenerate_near_0: Option<f64>,
    /// g is exactly the indicator of this closed interval.
    pub indicator_of: Option<(f64, f64)>,
}

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A test function g with declared properties.
#[derive(Clone)]
pub struct GDescriptor {
    pub name: String,
    eval: RealFn,
    primitive: Option<RealFn>,
    /// Points where g is not smooth.
    pub breakpoints: Vec<f64>,
    pub flags: GFlags,
}

impl fmt::Debug for GDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GDescriptor")
            .field("name", &self.name)
            .field("breakpoints", &self.breakpoints)
            .field("flags", &self.flags)
            .finish()
    }
}

impl GDescriptor {
    pub fn new(name: impl Into<String>, eval: RealFn, flags: GFlags) -> Self {
        GDescriptor {
            name: name.into(),
            eval,
            primitive: None,
            breakpoints: Vec::new(),
            flags,
        }
    }

    /// Adds an antiderivative, used for exact integration along linear segments.
    pub fn with_primitive(mut self, p: RealFn) -> Self {
        self.primitive = Some(p);
        self
    }

    pub fn with_breakpoints(mut self, b: Vec<f64>) -> Self {
        self.breakpoints = b;
        self
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn primitive(&self, x: f64) -> Option<f64> {
        self.primitive.as_ref().map(|p| p(x))
    }

    pub fn is_zero(&self) -> bool {
        self.name == "zero"
    }

    /// `c · g`, with flags adjusted for the sign of `c`.
    pub fn scaled(&self, c: f64) -> GDescriptor {
        let e = self.eval.clone();
        let mut flags = self.flags.clone();
        if c < 0.0 {
            flags.nonneg = false;
            flags.positive_on_interior = false;
            flags.positive_near_0 = false;
        }
        if c != 1.0 {
            flags.indicator_of = None;
        }
        GDescriptor {
            name: format!("{c}*{}", self.name),
            eval: Arc::new(move |x| c * e(x)),
            primitive: self.primitive.clone().map(|p| Arc::new(move |x| c * p(x)) as RealFn),
            breakpoints: self.breakpoints.clone(),
            flags,
        }
    }

    /// `∫_0^h g(x0 + (x1 − x0) s / h) w(s) ds` along a linear segment, with
    /// `w ≡ 1` when no weight is given.
    fn segment(&self, x0: f64, x1: f64, h: f64, weight: Option<(&RealFn, f64)>, q: &QuadConfig) -> Result<f64> {
        if h <= 0.0 {
            return Ok(0.0);
        }
        if let Some((lo, hi)) = self.flags.compact_support {
            if x0.max(x1) < lo || x0.min(x1) > hi {
                return Ok(0.0);
            }
        }
        let v = x1 - x0;
        if weight.is_none() {
            if let Some(p) = &self.primitive {
                if v.abs() > 1e-12 * (1.0 + x0.abs()) {
                    return Ok((p(x1) - p(x0)) / v * h);
                }
                return Ok(self.eval(0.5 * (x0 + x1)) * h);
            }
            if v == 0.0 {
                return Ok(self.eval(x0) * h);
            }
        }
        let breaks: Vec<f64> = if v != 0.0 {
            self.breakpoints.iter().map(|&b| (b - x0) / v * h).collect()
        } else {
            Vec::new()
        };
        let f = |s: f64| {
            let g = self.eval(x0 + v * s / h);
            match weight {
                Some((w, t0)) => g * w(t0 + s),
                None => g,
            }
        };
        integrate_with_breaks(f, 0.0, h, &breaks, q)
    }
}

/// The integrator Y in `∫ g(ξ_t) dY_t`.
#[derive(Clone)]
pub enum YKind {
    Identity,
    Subordinator(LevyTriplet1D),
    /// `Y_t = ∫_0^t rate(s) ds`.
    DeterministicIncreasing { name: String, rate: RealFn },
}

impl fmt::Debug for YKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            YKind::Identity => write!(f, "Identity"),
            YKind::Subordinator(t) => write!(f, "Subordinator({t:?})"),
            YKind::DeterministicIncreasing { name, .. } => write!(f, "DeterministicIncreasing({name})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct YProcessSpec {
    pub kind: YKind,
    pub strictly_increasing: bool,
    pub ac_density_nonvanishing: bool,
}

impl YProcessSpec {
    pub fn identity() -> Self {
        YProcessSpec {
            kind: YKind::Identity,
            strictly_increasing: true,
            ac_density_nonvanishing: true,
        }
    }

    pub fn subordinator(t: LevyTriplet1D) -> Result<Self> {
        if !t.is_subordinator() {
            return Err(Error::domain("Y must have no Gaussian part, no negative jumps and non-negative drift"));
        }
        let drift = t.drift_bv.unwrap_or(0.0);
        let infinite = matches!(t.measure.activity(), crate::levy::Activity::Infinite);
        Ok(YProcessSpec {
            strictly_increasing: drift > 0.0 || infinite,
            ac_density_nonvanishing: drift > 0.0,
            kind: YKind::Subordinator(t),
        })
    }

    pub fn deterministic(name: impl Into<String>, rate: RealFn, strictly_increasing: bool, ac_density_nonvanishing: bool) -> Self {
        YProcessSpec {
            kind: YKind::DeterministicIncreasing { name: name.into(), rate },
            strictly_increasing,
            ac_density_nonvanishing,
        }
    }
}

/// Running value of `∫_0^t g(ξ_s) dY_s` over a growing path grid.
pub struct GAccumulator<'a> {
    g: &'a GDescriptor,
    y: YState<'a>,
    value: f64,
    t: f64,
    xi: f64,
    next: usize,
    quad: QuadConfig,
}

enum YState<'a> {
    Identity,
    Rate(&'a RealFn),
    Jumps {
        drift: f64,
        sampler: &'a Option<JumpSampler>,
        clock: Option<Exp<f64>>,
        next_jump: f64,
        rng: ChaCha8Rng,
    },
}

/// Precomputed pieces of a subordinator integrator.
#[derive(Debug, Clone)]
struct YPlan {
    drift: f64,
    sampler: Option<JumpSampler>,
}

impl<'a> GAccumulator<'a> {
    fn new(g: &'a GDescriptor, y: &'a YKind, yplan: &'a Option<YPlan>, stream: RngStream) -> Result<Self> {
        let state = match (y, yplan) {
            (YKind::Identity, _) => YState::Identity,
            (YKind::DeterministicIncreasing { rate, .. }, _) => YState::Rate(rate),
            (YKind::Subordinator(_), Some(p)) => {
                let mut rng = stream.derive(0x5955_4255).rng();
                let rate = p.sampler.as_ref().map_or(0.0, |s| s.rate());
                let clock = if rate > 0.0 {
                    Some(Exp::new(rate).map_err(|e| Error::numeric(e.to_string()))?)
                } else {
                    None
                };
                let next_jump = clock.as_ref().map_or(f64::INFINITY, |c| c.sample(&mut rng));
                YState::Jumps {
                    drift: p.drift,
                    sampler: &p.sampler,
                    clock,
                    next_jump,
                    rng,
                }
            }
            (YKind::Subordinator(_), None) => return Err(Error::domain("subordinator plan missing")),
        };
        Ok(GAccumulator {
            g,
            y: state,
            value: 0.0,
            t: 0.0,
            xi: 0.0,
            next: 0,
            quad: QuadConfig::default(),
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn consume(&mut self, path: &PathGrid) -> Result<()> {
        for i in self.next..path.len() {
            let (t1, x1) = (path.times[i], path.xi_left[i]);
            let h = t1 - self.t;
            let (t0, x0) = (self.t, self.xi);
            self.value += match &mut self.y {
                YState::Identity => self.g.segment(x0, x1, h, None, &self.quad)?,
                YState::Rate(r) => self.g.segment(x0, x1, h, Some((r, t0)), &self.quad)?,
                YState::Jumps {
                    drift,
                    sampler,
                    clock,
                    next_jump,
                    rng,
                } => {
                    let mut v = if *drift > 0.0 { *drift * self.g.segment(x0, x1, h, None, &self.quad)? } else { 0.0 };
                    // Y jumps inside (t0, t1]; ξ is continuous there except possibly at t1,
                    // where the right value is ξ at t1.
                    while *next_jump <= t1 {
                        let tj = *next_jump;
                        let xj = if tj == t1 { path.xi[i] } else { x0 + (x1 - x0) * (tj - t0) / h };
                        let s = sampler.as_ref().expect("jump clock without sampler");
                        v += self.g.eval(xj) * s.sample(rng)?;
                        let c = clock.as_ref().expect("jump clock");
                        *next_jump = tj + c.sample(rng);
                    }
                    v
                }
            };
            self.t = t1;
            self.xi = path.xi[i];
        }
        self.next = path.len();
        Ok(())
    }
}

/// `∫_{(0,T]} g(ξ_t) dY_t` over the whole grid of a univariate path.
pub fn integrate_g(path: &PathGrid, g: &GDescriptor, y: &YProcessSpec, epsilon: f64, stream: RngStream) -> Result<f64> {
    let yplan = y_plan(&y.kind, epsilon)?;
    let mut acc = GAccumulator::new(g, &y.kind, &yplan, stream)?;
    acc.consume(path)?;
    Ok(acc.value())
}

fn y_plan(y: &YKind, epsilon: f64) -> Result<Option<YPlan>> {
    Ok(match y {
        YKind::Subordinator(t) => {
            let icfg = IntegrationConfig::default();
            let small = t.measure.integrate_against(
                crate::levy::Integrand::Plain(&|x| x),
                crate::levy::Region::Interval { lo: 0.0, hi: epsilon },
                &icfg,
            )?;
            let sampler = t.measure.jump_sampler(epsilon)?;
            Some(YPlan {
                drift: t.drift_bv.unwrap_or(0.0) + small,
                sampler: (sampler.rate() > 0.0).then_some(sampler),
            })
        }
        _ => None,
    })
}

/// Samples `∫_0^∞ g(ξ_t) dY_t`.
#[derive(Debug)]
pub struct GSampler {
    plan: SimPlan,
    g: GDescriptor,
    y: YProcessSpec,
    yplan: Option<YPlan>,
    policy: HorizonPolicy,
    /// +1 / −1 when ξ drifts to ±∞, from the sign of its mean.
    direction: Option<f64>,
}

impl GSampler {
    pub fn new(xi: &LevyTriplet1D, g: &GDescriptor, y: &YProcessSpec, sim: &SimConfig, policy: &HorizonPolicy) -> Result<Self> {
        policy.validate()?;
        let direction = match xi.mean(&IntegrationConfig::default())? {
            Mean::Finite(m) if m > 0.0 => Some(1.0),
            Mean::Finite(m) if m < 0.0 => Some(-1.0),
            Mean::PlusInfinity => Some(1.0),
            Mean::MinusInfinity => Some(-1.0),
            _ => None,
        };
        Ok(GSampler {
            plan: SimPlan::univariate(xi, sim)?,
            g: g.clone(),
            y: y.clone(),
            yplan: y_plan(&y.kind, sim.epsilon)?,
            policy: *policy,
            direction,
        })
    }

    fn exited(&self, xi: f64) -> bool {
        let (Some((lo, hi)), Some(d)) = (self.g.flags.compact_support, self.direction) else {
            return false;
        };
        let margin = 10.0 * (hi - lo).max(f64::MIN_POSITIVE);
        if d > 0.0 {
            xi > hi + margin
        } else {
            xi < lo - margin
        }
    }

    pub fn sample(&self, stream: RngStream) -> Result<FunctionalSample> {
        if self.g.is_zero() {
            return Ok(FunctionalSample { value: 0.0, horizon: 0.0, partial: false });
        }
        let mut sim = self.plan.simulator(stream)?;
        let mut acc = GAccumulator::new(&self.g, &self.y.kind, &self.yplan, stream)?;
        let compact = self.g.flags.compact_support.is_some() && self.direction.is_some();
        let mut t = 0.0;
        let mut quiet = 0;
        loop {
            t = self.policy.next_horizon(t);
            let before = acc.value();
            sim.advance_to(t)?;
            acc.consume(sim.grid())?;
            let done = if compact {
                self.exited(sim.xi())
            } else {
                let small = (acc.value() - before).abs() <= self.policy.tail_tolerance * (1.0 + acc.value().abs());
                quiet = if small { quiet + 1 } else { 0 };
                quiet >= 2
            };
            if done || t >= self.policy.max_horizon {
                return Ok(FunctionalSample {
                    value: acc.value(),
                    horizon: t,
                    partial: !done,
                });
            }
        }
    }

    pub fn pool(&self, n: usize, seed: u64) -> Result<SamplePool> {
        let samples = run_parallel(n, seed, |s| self.sample(s))?;
        Ok(SamplePool::from_samples(
            &format!("g_integral:{}", self.g.name),
            samples,
            seed,
            self.plan.config().epsilon,
            &self.policy,
        ))
    }
}

/// n samples of `∫ g(ξ_t) dY_t`.
pub fn sample_g_functional(
    xi: &LevyTriplet1D,
    g: &GDescriptor,
    y: &YProcessSpec,
    n: usize,
    sim: &SimConfig,
    policy: &HorizonPolicy,
    seed: u64,
) -> Result<SamplePool> {
    GSampler::new(xi, g, y, sim, policy)?.pool(n, seed)
}

/// Summary of per-sample truncation horizons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationSummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub partial: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolMeta {
    pub functional: String,
    pub n: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub horizon_policy: HorizonPolicy,
    pub tail_tolerance: f64,
    pub truncation: TruncationSummary,
}

/// Functional samples, sorted, with their simulation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePool {
    pub values: Vec<f64>,
    pub meta: PoolMeta,
}

impl SamplePool {
    fn from_samples(functional: &str, samples: Vec<FunctionalSample>, seed: u64, epsilon: f64, policy: &HorizonPolicy) -> Self {
        let n = samples.len();
        let hs = samples.iter().map(|s| s.horizon);
        let truncation = TruncationSummary {
            min: hs.clone().fold(f64::INFINITY, f64::min),
            mean: if n > 0 { hs.clone().sum::<f64>() / n as f64 } else { 0.0 },
            max: hs.fold(f64::NEG_INFINITY, f64::max),
            partial: samples.iter().filter(|s| s.partial).count(),
        };
        let mut values: Vec<f64> = samples.into_iter().map(|s| s.value).collect();
        values.sort_by(f64::total_cmp);
        SamplePool {
            values,
            meta: PoolMeta {
                functional: functional.to_string(),
                n,
                seed,
                epsilon,
                horizon_policy: *policy,
                tail_tolerance: policy.tail_tolerance,
                truncation,
            },
        }
    }

    /// A pool of given values with placeholder metadata.
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let policy = HorizonPolicy::default();
        SamplePool {
            values,
            meta: PoolMeta {
                functional: "external".into(),
                n,
                seed: 0,
                epsilon: 0.0,
                horizon_policy: policy,
                tail_tolerance: policy.tail_tolerance,
                truncation: TruncationSummary { min: 0.0, mean: 0.0, max: 0.0, partial: 0 },
            },
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_partial(&self) -> bool {
        self.meta.truncation.partial > 0
    }

    pub fn sidecar_path(csv: &Path) -> PathBuf {
        let mut s = csv.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    /// Writes one value per line, plus metadata in `<csv>.json`.
    pub fn write(&self, csv: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(csv)?);
        for v in &self.values {
            writeln!(w, "{v:?}")?;
        }
        w.flush()?;
        let meta = serde_json::to_string_pretty(&self.meta)?;
        std::fs::write(Self::sidecar_path(csv), meta + "\n")?;
        Ok(())
    }

    /// Reads a pool; metadata is taken from the sidecar when present.
    pub fn read(csv: &Path) -> Result<Self> {
        let r = BufReader::new(File::open(csv)?);
        let mut values = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let s = line.trim();
            if s.is_empty() || (i == 0 && s.parse::<f64>().is_err() && s.chars().any(|c| c.is_alphabetic())) {
                continue;
            }
            let v: f64 = s
                .split(',')
                .next()
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::Spec(format!("{}:{}: not a number: {s}", csv.display(), i + 1)))?;
            values.push(v);
        }
        let mut pool = SamplePool::from_values(values);
        let side = Self::sidecar_path(csv);
        if side.exists() {
            let meta: PoolMeta = serde_json::from_str(&std::fs::read_to_string(side)?)?;
            pool.meta = meta;
            pool.meta.n = pool.values.len();
        }
        Ok(pool)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{doleans_xi_from_eta, Atom, DensityPart, LevyMeasure1D};
    use crate::path::{simulate_bivariate, simulate_path};

    fn indicator01() -> GDescriptor {
        GDescriptor::new(
            "indicator",
            Arc::new(|x| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }),
            GFlags {
                nonneg: true,
                compact_support: Some((0.0, 1.0)),
                indicator_of: Some((0.0, 1.0)),
                ..GFlags::default()
            },
        )
        .with_primitive(Arc::new(|x: f64| x.clamp(0.0, 1.0)))
        .with_breakpoints(vec![0.0, 1.0])
    }

    fn cpp_plus_drift(drift: f64) -> LevyTriplet1D {
        let m = LevyMeasure1D::from_atoms(vec![Atom { loc: 1.0, mass: 1.0 }]).unwrap();
        LevyTriplet1D::from_bv_drift(drift, 0.0, m).unwrap()
    }

    #[test]
    fn drift_with_unit_clock() {
        let t = LevyTriplet2D::independent(&LevyTriplet1D::drift(1.0).unwrap(), &LevyTriplet1D::drift(1.0).unwrap()).unwrap();
        for horizon in [0.5, 2.0, 7.0] {
            let p = simulate_bivariate(&t, horizon, &SimConfig::default(), RngStream::new(0, 0)).unwrap();
            let v = integrate_exponential(&p).unwrap();
            assert!((v + (-horizon).exp_m1()).abs() < 1e-14, "{v}");
        }
    }

    #[test]
    fn degenerate_pair_identity_on_every_grid_point() {
        let part = DensityPart::uniform(0.0, 0.5, 1.0).unwrap();
        let eta = LevyTriplet1D::from_bv_drift(0.0, 0.0, LevyMeasure1D::from_parts(vec![part]).unwrap()).unwrap();
        let t = doleans_xi_from_eta(&eta, 1.0, &IntegrationConfig::default()).unwrap();
        let cfg = SimConfig { epsilon: 0.0, ..SimConfig::default() };
        let p = simulate_bivariate(&t, 30.0, &cfg, RngStream::new(5, 2)).unwrap();
        let mut acc = ExpAccumulator::new(p.meta.sigma);
        for i in 0..p.len() {
            acc.consume(&prefix_grid(&p, i + 1)).unwrap();
            let want = -(-p.xi[i]).exp_m1();
            assert!((acc.value() - want).abs() < 1e-12, "{i}: {} vs {want}", acc.value());
        }
    }

    fn prefix_grid(p: &PathGrid, n: usize) -> PathGrid {
        let mut q = p.clone();
        q.times.truncate(n);
        q.xi_left.truncate(n);
        q.xi.truncate(n);
        q.eta_left.as_mut().unwrap().truncate(n);
        q.eta.as_mut().unwrap().truncate(n);
        q.jumps.truncate(n);
        q
    }

    #[test]
    fn independent_cpp_pair_is_a_jump_sum() {
        let m = |x: f64| LevyMeasure1D::from_atoms(vec![Atom { loc: x, mass: 1.0 }]).unwrap();
        let xi = LevyTriplet1D::from_bv_drift(0.0, 0.0, m(0.7)).unwrap();
        let eta = LevyTriplet1D::from_bv_drift(0.0, 0.0, m(-0.3)).unwrap();
        let t = LevyTriplet2D::independent(&xi, &eta).unwrap();
        let cfg = SimConfig { epsilon: 0.0, ..SimConfig::default() };
        let p = simulate_bivariate(&t, 10.0, &cfg, RngStream::new(1, 0)).unwrap();
        let direct: f64 = (0..p.len())
            .filter_map(|i| p.jumps[i].map(|(_, dy)| (-p.xi_left[i]).exp() * dy))
            .sum();
        assert_eq!(integrate_exponential(&p).unwrap(), direct);
    }

    #[test]
    fn overflow_reports_error() {
        let t = LevyTriplet2D::independent(&LevyTriplet1D::drift(-1.0).unwrap(), &LevyTriplet1D::drift(1.0).unwrap()).unwrap();
        let p = simulate_bivariate(&t, 800.0, &SimConfig::default(), RngStream::new(0, 0)).unwrap();
        assert!(matches!(integrate_exponential(&p), Err(Error::Numeric { .. })));
    }

    #[test]
    fn first_jump_time_capped_at_one() {
        let xi = cpp_plus_drift(1.0);
        let cfg = SimConfig { epsilon: 0.0, ..SimConfig::default() };
        for i in 0..200 {
            let p = simulate_path(&xi, 5.0, &cfg, RngStream::new(3, i)).unwrap();
            let t1 = p.jumps.iter().position(|j| j.is_some()).map_or(f64::INFINITY, |k| p.times[k]);
            let v = integrate_g(&p, &indicator01(), &YProcessSpec::identity(), 0.0, RngStream::new(3, i)).unwrap();
            assert!((v - t1.min(1.0)).abs() < 1e-12, "{v} vs {t1}");
        }
    }

    #[test]
    fn zero_g_gives_zero() {
        let g = GDescriptor::new("zero", Arc::new(|_| 0.0), GFlags::default());
        let s = GSampler::new(&cpp_plus_drift(1.0), &g, &YProcessSpec::identity(), &SimConfig::default(), &HorizonPolicy::default()).unwrap();
        assert_eq!(s.sample(RngStream::new(1, 1)).unwrap().value, 0.0);
    }

    #[test]
    fn sample_determinism_and_empty_pool() {
        let s = GSampler::new(
            &cpp_plus_drift(1.0),
            &indicator01(),
            &YProcessSpec::identity(),
            &SimConfig { epsilon: 0.0, ..SimConfig::default() },
            &HorizonPolicy::default(),
        )
        .unwrap();
        assert_eq!(s.pool(1, 42).unwrap().values, s.pool(1, 42).unwrap().values);
        assert!(s.pool(0, 42).unwrap().is_empty());
    }

    #[test]
    fn subordinator_y_weights_jumps() {
        // ξ ≡ 0 on [0, T] would be the zero process, so use a tiny drift and g ≡ 1 on the range
        let xi = LevyTriplet1D::drift(1e-9).unwrap();
        let g = GDescriptor::new("one", Arc::new(|_| 1.0), GFlags { nonneg: true, ..GFlags::default() });
        let m = LevyMeasure1D::from_atoms(vec![Atom { loc: 2.0, mass: 1.5 }]).unwrap();
        let y = YProcessSpec::subordinator(LevyTriplet1D::from_bv_drift(0.5, 0.0, m).unwrap()).unwrap();
        let p = simulate_path(&xi, 4.0, &SimConfig::default(), RngStream::new(2, 0)).unwrap();
        let v = integrate_g(&p, &g, &y, 0.0, RngStream::new(2, 0)).unwrap();
        // value is 0.5·4 + 2·(number of Y jumps)
        let jumps = (v - 2.0) / 2.0;
        assert!((jumps - jumps.round()).abs() < 1e-9, "{v}");
    }

    #[test]
    fn pool_csv_roundtrip() {
        let pool = SamplePool::from_values(vec![0.3, 0.1, 0.2]);
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("pool.csv");
        pool.write(&f).unwrap();
        let back = SamplePool::read(&f).unwrap();
        assert_eq!(back, pool);
        assert_eq!(back.values, vec![0.1, 0.2, 0.3]);
    }
}
