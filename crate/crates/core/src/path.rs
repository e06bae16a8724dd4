//! Jump-adapted simulation of univariate and bivariate Lévy paths.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::triplet::sym_sqrt;
use crate::levy::{
    curve_region, open_unit, Integrand, IntegrationConfig, JointAtom, JumpSampler, LevyMeasure1D, LevyMeasure2D,
    LevyTriplet1D, LevyTriplet2D, Region,
};

/// A reproducible random stream: one seed, many independent stream ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_id);
        r
    }

    /// A stream on an unrelated seed, for randomness that must stay independent
    /// of this one (e.g. an integrator process).
    pub fn derive(&self, salt: u64) -> RngStream {
        RngStream {
            seed: splitmix64(self.seed ^ splitmix64(salt)),
            stream_id: self.stream_id,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Jumps with `|Δξ| ≤ epsilon` (or `|Δη| ≤ epsilon` for η-only jumps) are
    /// replaced by their compensator. Zero is allowed for finite activity.
    pub epsilon: f64,
    /// Largest time step between grid points when a Gaussian part is present.
    pub gauss_step: f64,
    /// Adds the small-jump second moment to the Gaussian covariance.
    pub gaussian_proxy: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            epsilon: 1e-3,
            gauss_step: 0.01,
            gaussian_proxy: false,
        }
    }
}

/// Simulation metadata carried by a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathMeta {
    pub seed: u64,
    pub stream_id: u64,
    pub epsilon: f64,
    pub horizon: f64,
    /// Drift of the continuous part, per coordinate.
    pub drift: [f64; 2],
    /// Covariance of the continuous part.
    pub sigma: [[f64; 2]; 2],
}

/// Event-driven skeleton of a path started at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    pub times: Vec<f64>,
    pub xi_left: Vec<f64>,
    pub xi: Vec<f64>,
    pub eta_left: Option<Vec<f64>>,
    pub eta: Option<Vec<f64>>,
    pub jumps: Vec<Option<(f64, f64)>>,
    pub meta: PathMeta,
}

impl PathGrid {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn xi_at_horizon(&self) -> f64 {
        self.xi.last().copied().unwrap_or(0.0)
    }

    /// Writes the path as CSV with columns time, xi_left, xi, eta_left, eta, dxi, deta.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "time,xi_left,xi,eta_left,eta,dxi,deta")?;
        for i in 0..self.len() {
            let (el, e) = match (&self.eta_left, &self.eta) {
                (Some(l), Some(v)) => (l[i].to_string(), v[i].to_string()),
                _ => (String::new(), String::new()),
            };
            let (dx, de) = match self.jumps[i] {
                Some((a, b)) => (a.to_string(), b.to_string()),
                None => (String::new(), String::new()),
            };
            writeln!(w, "{},{},{},{el},{e},{dx},{de}", self.times[i], self.xi_left[i], self.xi[i])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Source {
    Xi(JumpSampler),
    Eta(JumpSampler),
    Curve { k: f64, sampler: JumpSampler },
    Joint { cum: Vec<f64>, atoms: Vec<JointAtom> },
}

impl Source {
    fn rate(&self) -> f64 {
        match self {
            Source::Xi(s) | Source::Eta(s) | Source::Curve { sampler: s, .. } => s.rate(),
            Source::Joint { cum, .. } => cum.last().copied().unwrap_or(0.0),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        match self {
            Source::Xi(s) => Ok((s.sample(rng)?, 0.0)),
            Source::Eta(s) => Ok((0.0, s.sample(rng)?)),
            Source::Curve { k, sampler } => {
                let x = sampler.sample(rng)?;
                Ok((x, -k * (-x).exp_m1()))
            }
            Source::Joint { cum, atoms } => {
                let target = open_unit(rng) * cum[cum.len() - 1];
                let i = cum.partition_point(|&c| c <= target).min(atoms.len() - 1);
                Ok((atoms[i].x, atoms[i].y))
            }
        }
    }
}

/// Precomputed simulation scheme for a triplet: jump sources, effective
/// drift and Gaussian square root. Shared read-only across workers.
#[derive(Debug, Clone)]
pub struct SimPlan {
    bivariate: bool,
    drift: [f64; 2],
    sigma: [[f64; 2]; 2],
    sqrt: [[f64; 2]; 2],
    sources: Vec<Source>,
    rate: f64,
    cfg: SimConfig,
}

fn compensator(m: &LevyMeasure1D, eps: f64, f: &(dyn Fn(f64) -> f64 + Sync), icfg: &IntegrationConfig) -> Result<f64> {
    if eps >= 1.0 {
        return Ok(0.0);
    }
    let v = m.integrate_against(Integrand::Plain(f), Region::Abs { lo: eps, hi: 1.0 }, icfg)?;
    if !v.is_finite() {
        return Err(Error::numeric_with("small-jump compensator diverges", v, eps));
    }
    Ok(v)
}

fn small_second_moment(m: &LevyMeasure1D, eps: f64, f: &(dyn Fn(f64) -> f64 + Sync), icfg: &IntegrationConfig) -> Result<f64> {
    if eps == 0.0 {
        return Ok(0.0);
    }
    m.integrate_against(Integrand::Plain(f), Region::Abs { lo: 0.0, hi: eps }, icfg)
}

fn check_cfg(cfg: &SimConfig) -> Result<()> {
    if !(cfg.epsilon.is_finite() && cfg.epsilon >= 0.0) {
        return Err(Error::domain(format!("epsilon must be non-negative, got {}", cfg.epsilon)));
    }
    if !(cfg.gauss_step.is_finite() && cfg.gauss_step > 0.0) {
        return Err(Error::domain(format!("gauss_step must be positive, got {}", cfg.gauss_step)));
    }
    Ok(())
}

impl SimPlan {
    pub fn univariate(t: &LevyTriplet1D, cfg: &SimConfig) -> Result<Self> {
        check_cfg(cfg)?;
        let icfg = IntegrationConfig::default();
        let eps = cfg.epsilon;
        let drift = t.gamma - compensator(&t.measure, eps, &|x| x, &icfg)?;
        let mut s2 = t.sigma2;
        if cfg.gaussian_proxy {
            s2 += small_second_moment(&t.measure, eps, &|x| x * x, &icfg)?;
        }
        let sampler = t.measure.jump_sampler(eps)?;
        let sigma = [[s2, 0.0], [0.0, 0.0]];
        Self::assemble(false, [drift, 0.0], sigma, vec![Source::Xi(sampler)], cfg)
    }

    pub fn bivariate(t: &LevyTriplet2D, cfg: &SimConfig) -> Result<Self> {
        check_cfg(cfg)?;
        let icfg = IntegrationConfig::default();
        let eps = cfg.epsilon;
        let mut sigma = t.sigma;
        let (drift, sources) = match &t.measure {
            LevyMeasure2D::ProductIndependent { xi, eta } => {
                let d = [
                    t.gamma[0] - compensator(xi, eps, &|x| x, &icfg)?,
                    t.gamma[1] - compensator(eta, eps, &|y| y, &icfg)?,
                ];
                if cfg.gaussian_proxy {
                    sigma[0][0] += small_second_moment(xi, eps, &|x| x * x, &icfg)?;
                    sigma[1][1] += small_second_moment(eta, eps, &|y| y * y, &icfg)?;
                }
                (d, vec![Source::Xi(xi.jump_sampler(eps)?), Source::Eta(eta.jump_sampler(eps)?)])
            }
            LevyMeasure2D::JointAtoms(atoms) => {
                let mut d = t.gamma;
                let mut cum = Vec::with_capacity(atoms.len());
                let mut acc = 0.0;
                for a in atoms {
                    if a.x.hypot(a.y) <= 1.0 {
                        d[0] -= a.x * a.mass;
                        d[1] -= a.y * a.mass;
                    }
                    acc += a.mass;
                    cum.push(acc);
                }
                let src = if atoms.is_empty() {
                    vec![]
                } else {
                    vec![Source::Joint { cum, atoms: atoms.clone() }]
                };
                (d, src)
            }
            LevyMeasure2D::CurveSupported { k, base } => {
                let k = *k;
                let (lo, hi) = curve_region(k)?;
                let y = move |x: f64| -k * (-x).exp_m1();
                // jumps inside the truncation region with |x| > eps are simulated
                let comp = |f: &(dyn Fn(f64) -> f64 + Sync)| -> Result<f64> {
                    let mut s = 0.0;
                    if -eps > lo {
                        s += base.integrate_against(Integrand::Plain(f), Region::HalfOpen { lo, hi: -eps }, &icfg)?;
                    }
                    if eps < hi {
                        s += base.integrate_against(Integrand::Plain(f), Region::Interval { lo: eps, hi }, &icfg)?;
                    }
                    Ok(s)
                };
                let d_eta = t.gamma[1] - comp(&y)?;
                if cfg.gaussian_proxy {
                    let q = |f: &(dyn Fn(f64) -> f64 + Sync)| small_second_moment(base, eps, f, &icfg);
                    sigma[0][0] += q(&|x| x * x)?;
                    let c = q(&|x| x * y(x))?;
                    sigma[0][1] += c;
                    sigma[1][0] += c;
                    sigma[1][1] += q(&|x| y(x) * y(x))?;
                }
                // Tying the ξ drift to the η drift keeps every simulated pair on
                // the degenerate relation; the offset from the exact
                // compensator is ∫_{|x|≤ε} (e^{−x} − 1 + x) Π(dx) = O(ε²).
                let d_xi = d_eta / k + 0.5 * t.sigma[0][0];
                let sampler = base.jump_sampler(eps)?;
                ([d_xi, d_eta], vec![Source::Curve { k, sampler }])
            }
        };
        Self::assemble(true, drift, sigma, sources, cfg)
    }

    fn assemble(bivariate: bool, drift: [f64; 2], sigma: [[f64; 2]; 2], sources: Vec<Source>, cfg: &SimConfig) -> Result<Self> {
        let sources: Vec<Source> = sources.into_iter().filter(|s| s.rate() > 0.0).collect();
        let rate: f64 = sources.iter().map(|s| s.rate()).sum();
        if !rate.is_finite() {
            return Err(Error::numeric("jump rate above the cutoff is not finite"));
        }
        Ok(SimPlan {
            bivariate,
            drift,
            sigma,
            sqrt: sym_sqrt(&sigma),
            sources,
            rate,
            cfg: *cfg,
        })
    }

    pub fn drift(&self) -> [f64; 2] {
        self.drift
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn sigma(&self) -> [[f64; 2]; 2] {
        self.sigma
    }

    /// Rate of simulated jumps.
    pub fn jump_rate(&self) -> f64 {
        self.rate
    }

    pub fn has_gaussian(&self) -> bool {
        self.sigma[0][0] > 0.0 || self.sigma[1][1] > 0.0
    }

    pub fn simulator(&self, stream: RngStream) -> Result<PathSimulator<'_>> {
        PathSimulator::new(self, stream)
    }

    pub fn simulate(&self, horizon: f64, stream: RngStream) -> Result<PathGrid> {
        let mut sim = self.simulator(stream)?;
        sim.advance_to(horizon)?;
        Ok(sim.into_grid())
    }
}

/// Extends a single path incrementally, so callers can grow the horizon
/// until a stopping rule is met.
pub struct PathSimulator<'a> {
    plan: &'a SimPlan,
    rng: ChaCha8Rng,
    clock: Option<Exp<f64>>,
    t: f64,
    x: [f64; 2],
    next_jump: f64,
    grid: PathGrid,
}

impl<'a> PathSimulator<'a> {
    fn new(plan: &'a SimPlan, stream: RngStream) -> Result<Self> {
        let mut rng = stream.rng();
        let clock = if plan.rate > 0.0 {
            Some(Exp::new(plan.rate).map_err(|e| Error::numeric(e.to_string()))?)
        } else {
            None
        };
        let next_jump = match &clock {
            Some(c) => c.sample(&mut rng),
            None => f64::INFINITY,
        };
        let meta = PathMeta {
            seed: stream.seed,
            stream_id: stream.stream_id,
            epsilon: plan.cfg.epsilon,
            horizon: 0.0,
            drift: plan.drift,
            sigma: plan.sigma,
        };
        let grid = PathGrid {
            times: Vec::new(),
            xi_left: Vec::new(),
            xi: Vec::new(),
            eta_left: plan.bivariate.then(Vec::new),
            eta: plan.bivariate.then(Vec::new),
            jumps: Vec::new(),
            meta,
        };
        Ok(PathSimulator {
            plan,
            rng,
            clock,
            t: 0.0,
            x: [0.0; 2],
            next_jump,
            grid,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn xi(&self) -> f64 {
        self.x[0]
    }

    pub fn eta(&self) -> f64 {
        self.x[1]
    }

    pub fn grid(&self) -> &PathGrid {
        &self.grid
    }

    pub fn into_grid(self) -> PathGrid {
        self.grid
    }

    fn push(&mut self, left: [f64; 2], jump: Option<(f64, f64)>) {
        let g = &mut self.grid;
        g.times.push(self.t);
        g.xi_left.push(left[0]);
        g.xi.push(self.x[0]);
        if let (Some(el), Some(e)) = (g.eta_left.as_mut(), g.eta.as_mut()) {
            el.push(left[1]);
            e.push(self.x[1]);
        }
        g.jumps.push(jump);
        g.meta.horizon = self.t;
    }

    /// Continuous evolution up to time `to`, recording Gaussian sub-steps.
    fn flow(&mut self, to: f64) {
        let p = self.plan;
        if !p.has_gaussian() {
            let h = to - self.t;
            self.x[0] += p.drift[0] * h;
            self.x[1] += p.drift[1] * h;
            self.t = to;
            return;
        }
        let span = to - self.t;
        let steps = (span / p.cfg.gauss_step).ceil().max(1.0) as usize;
        let start = self.t;
        for i in 1..=steps {
            let next = if i == steps { to } else { start + span * i as f64 / steps as f64 };
            let h = next - self.t;
            let sh = h.sqrt();
            let z1: f64 = self.rng.sample(StandardNormal);
            let z2: f64 = if p.bivariate { self.rng.sample(StandardNormal) } else { 0.0 };
            self.x[0] += p.drift[0] * h + sh * (p.sqrt[0][0] * z1 + p.sqrt[0][1] * z2);
            self.x[1] += p.drift[1] * h + sh * (p.sqrt[1][0] * z1 + p.sqrt[1][1] * z2);
            self.t = next;
            if i < steps {
                self.push(self.x, None);
            }
        }
    }

    /// Simulates up to `horizon`, leaving a grid point exactly at `horizon`.
    pub fn advance_to(&mut self, horizon: f64) -> Result<()> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::domain(format!("horizon must be positive and finite, got {horizon}")));
        }
        if horizon <= self.t {
            return Ok(());
        }
        while self.next_jump <= horizon {
            let tj = self.next_jump;
            self.flow(tj);
            let left = self.x;
            let src = pick(&self.plan.sources, self.plan.rate, &mut self.rng);
            let (dx, dy) = self.plan.sources[src].sample(&mut self.rng)?;
            self.x[0] += dx;
            self.x[1] += dy;
            self.push(left, Some((dx, dy)));
            let clock = self.clock.as_ref().expect("jump without clock");
            self.next_jump = tj + clock.sample(&mut self.rng);
        }
        self.flow(horizon);
        if self.grid.times.last() != Some(&horizon) {
            self.push(self.x, None);
        }
        Ok(())
    }
}

fn pick<R: Rng + ?Sized>(sources: &[Source], rate: f64, rng: &mut R) -> usize {
    if sources.len() == 1 {
        return 0;
    }
    let target = open_unit(rng) * rate;
    let mut acc = 0.0;
    for (i, s) in sources.iter().enumerate() {
        acc += s.rate();
        if target < acc {
            return i;
        }
    }
    sources.len() - 1
}

/// Simulates ξ on `[0, horizon]`.
pub fn simulate_path(t: &LevyTriplet1D, horizon: f64, cfg: &SimConfig, stream: RngStream) -> Result<PathGrid> {
    SimPlan::univariate(t, cfg)?.simulate(horizon, stream)
}

/// Simulates (ξ, η) on `[0, horizon]`.
pub fn simulate_bivariate(t: &LevyTriplet2D, horizon: f64, cfg: &SimConfig, stream: RngStream) -> Result<PathGrid> {
    SimPlan::bivariate(t, cfg)?.simulate(horizon, stream)
}
