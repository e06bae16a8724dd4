//! Named building blocks for experiment specifications: processes, couplings,
//! test functions g, integrators Y and reference distributions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::exfun::{GDescriptor, GFlags, RealFn, YProcessSpec};
use crate::levy::{
    doleans_xi_from_eta, Atom, AtomSequence, DensityPart, IntegrationConfig, JointAtom, LevyMeasure1D,
    LevyMeasure2D, LevyTriplet1D, LevyTriplet2D, Side, TabulatedDensity,
};

pub const PROCESSES: &[(&str, &str)] = &[
    ("drift", "deterministic drift: rate"),
    ("brownian_drift", "Brownian motion with drift: drift, sigma2"),
    ("cpp", "compound Poisson: rate, law {const | uniform | exponential}, optional drift"),
    ("stable_tail_alpha", "density coef·x^(-1-alpha) on (0, inf): alpha, coef, side, drift"),
    ("levy", "general triplet: gamma or drift, sigma2, jumps [...]"),
];

pub const JUMPS: &[(&str, &str)] = &[
    ("atom", "point mass: loc, mass"),
    ("uniform", "flat density: lo, hi, mass"),
    ("exponential", "exponential density: mass, rate, side"),
    ("power_law", "coef·|x|^(-1-alpha) on (lo, hi): coef, alpha, side, lo, hi"),
    ("log_atoms", "atoms at ±exp(base^n) with mass ratio^n: side, base, ratio, first"),
    ("tabulated", "user density file: name, scale"),
];

pub const COUPLINGS: &[(&str, &str)] = &[
    ("independent", "independent xi and eta"),
    ("correlated", "independent jumps, Gaussian parts with correlation rho"),
    ("curve_degenerate", "xi built from eta so that the integral is the constant k"),
    ("joint_atoms", "common jumps at listed points: gamma, sigma, atoms"),
];

pub const G_FUNCTIONS: &[(&str, &str)] = &[
    ("indicator", "1 on [lo, hi]"),
    ("bump", "smooth bump on (lo, hi), peak 1 at the midpoint"),
    ("gaussian", "exp(-x²/(2·scale²))"),
    ("exp_neg", "exp(-rate·x)"),
    ("tent", "piecewise linear on [lo, hi], peak 1 at 0 when 0 is inside, else at the midpoint"),
    ("zero", "g ≡ 0"),
];

pub const Y_PROCESSES: &[(&str, &str)] = &[
    ("identity", "Y_t = t"),
    ("subordinator", "Y a subordinator given as a process definition"),
    ("deterministic", "Y_t = rate·t"),
];

pub const ORACLES: &[(&str, &str)] = &[
    ("dufresne", "law of 2/(sigma2·Gamma(2mu/sigma2, 1))"),
    ("exponential", "Exp(rate)"),
    ("truncated_exponential", "Exp(rate) conditioned on being below cap"),
    ("gamma", "Gamma(shape, scale)"),
    ("uniform", "uniform on [lo, hi]"),
];

/// Built-ins plus user densities loaded from a directory of `x,density` CSV files.
#[derive(Debug, Clone, Default)]
pub struct Catalogue {
    user: BTreeMap<String, Arc<TabulatedDensity>>,
}

impl Catalogue {
    pub fn builtin() -> Self {
        Catalogue::default()
    }

    /// Loads every `*.csv` in `dir`, named by file stem.
    pub fn with_user_dir(dir: &Path) -> Result<Self> {
        let mut user = BTreeMap::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.path());
        for e in entries {
            let p = e.path();
            if p.extension().and_then(|s| s.to_str()) != Some("csv") {
                continue;
            }
            let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            user.insert(name, Arc::new(read_density_csv(&p)?));
        }
        Ok(Catalogue { user })
    }

    pub fn user_names(&self) -> impl Iterator<Item = &str> {
        self.user.keys().map(String::as_str)
    }

    fn user_density(&self, name: &str) -> Result<Arc<TabulatedDensity>> {
        self.user
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Spec(format!("unknown user density '{name}'")))
    }
}

fn read_density_csv(path: &Path) -> Result<TabulatedDensity> {
    let text = std::fs::read_to_string(path)?;
    let (mut xs, mut ds) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split(',').map(str::trim);
        let (a, b) = (it.next().unwrap_or(""), it.next().unwrap_or(""));
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(d)) => {
                xs.push(x);
                ds.push(d);
            }
            _ if xs.is_empty() => continue,
            _ => {
                return Err(Error::Spec(format!("{}:{}: expected 'x,density'", path.display(), i + 1)));
            }
        }
    }
    TabulatedDensity::new(xs, ds)
}

/// Deterministic listing of everything a spec can name.
pub fn list_catalogue(cat: &Catalogue) -> String {
    let mut s = String::new();
    for (title, items) in [
        ("processes", PROCESSES),
        ("jumps", JUMPS),
        ("couplings", COUPLINGS),
        ("g", G_FUNCTIONS),
        ("y", Y_PROCESSES),
        ("oracles", ORACLES),
    ] {
        let _ = writeln!(s, "[{title}]");
        for (name, doc) in items {
            let _ = writeln!(s, "  {name:<22} {doc}");
        }
    }
    let _ = writeln!(s, "[user densities]");
    for name in cat.user_names() {
        let _ = writeln!(s, "  {name}");
    }
    s
}

fn default_one() -> f64 {
    1.0
}

fn default_positive() -> Side {
    Side::Positive
}

/// Jump law of a compound Poisson process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpLaw {
    Const { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64, #[serde(default = "default_positive")] side: Side },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpDef {
    Atom { loc: f64, mass: f64 },
    Uniform { lo: f64, hi: f64, mass: f64 },
    Exponential { mass: f64, rate: f64, #[serde(default = "default_positive")] side: Side },
    PowerLaw {
        coef: f64,
        alpha: f64,
        #[serde(default = "default_positive")]
        side: Side,
        #[serde(default)]
        lo: f64,
        #[serde(default)]
        hi: Option<f64>,
    },
    LogAtoms {
        #[serde(default = "default_positive")]
        side: Side,
        base: f64,
        ratio: f64,
        #[serde(default)]
        first: u64,
    },
    Tabulated { name: String, #[serde(default = "default_one")] scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessDef {
    Drift { rate: f64 },
    BrownianDrift { drift: f64, sigma2: f64 },
    Cpp {
        rate: f64,
        law: JumpLaw,
        #[serde(default)]
        drift: f64,
    },
    StableTailAlpha {
        alpha: f64,
        #[serde(default = "default_one")]
        coef: f64,
        #[serde(default = "default_positive")]
        side: Side,
        #[serde(default)]
        drift: f64,
    },
    Levy {
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default)]
        drift: Option<f64>,
        #[serde(default)]
        sigma2: f64,
        #[serde(default)]
        jumps: Vec<JumpDef>,
    },
}

fn build_measure(jumps: &[JumpDef], cat: &Catalogue) -> Result<LevyMeasure1D> {
    let mut atoms = Vec::new();
    let mut parts = Vec::new();
    let mut seqs = Vec::new();
    for j in jumps {
        match j {
            JumpDef::Atom { loc, mass } => atoms.push(Atom { loc: *loc, mass: *mass }),
            JumpDef::Uniform { lo, hi, mass } => parts.push(DensityPart::uniform(*lo, *hi, *mass)?),
            JumpDef::Exponential { mass, rate, side } => parts.push(DensityPart::exponential(*mass, *rate, *side)?),
            JumpDef::PowerLaw { coef, alpha, side, lo, hi } => {
                parts.push(DensityPart::power_law(*coef, *alpha, *side, *lo, hi.unwrap_or(f64::INFINITY))?)
            }
            JumpDef::LogAtoms { side, base, ratio, first } => {
                seqs.push(AtomSequence::log_geometric(*side, *base, *ratio, *first)?)
            }
            JumpDef::Tabulated { name, scale } => {
                let t = cat.user_density(name)?;
                if !(*scale > 0.0) {
                    return Err(Error::Spec(format!("tabulated '{name}' needs a positive scale")));
                }
                let (xs, ds): (Vec<f64>, Vec<f64>) = t.nodes().iter().map(|&x| (x, scale * t.density(x))).unzip();
                parts.push(DensityPart::Tabulated(Arc::new(TabulatedDensity::new(xs, ds)?)));
            }
        }
    }
    let mut m = LevyMeasure1D::new(atoms, parts)?;
    for s in seqs {
        m = m.with_sequence(s);
    }
    m.validate(&IntegrationConfig::default())?;
    Ok(m)
}

impl ProcessDef {
    pub fn build(&self, cat: &Catalogue) -> Result<LevyTriplet1D> {
        match self {
            ProcessDef::Drift { rate } => LevyTriplet1D::drift(*rate),
            ProcessDef::BrownianDrift { drift, sigma2 } => LevyTriplet1D::brownian(*drift, *sigma2),
            ProcessDef::Cpp { rate, law, drift } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(Error::domain(format!("cpp rate must be positive, got {rate}")));
                }
                let m = match law {
                    JumpLaw::Const { value } => LevyMeasure1D::from_atoms(vec![Atom { loc: *value, mass: *rate }])?,
                    JumpLaw::Uniform { lo, hi } => LevyMeasure1D::from_parts(vec![DensityPart::uniform(*lo, *hi, *rate)?])?,
                    JumpLaw::Exponential { rate: r, side } => {
                        LevyMeasure1D::from_parts(vec![DensityPart::exponential(*rate, *r, *side)?])?
                    }
                };
                LevyTriplet1D::from_bv_drift(*drift, 0.0, m)
            }
            ProcessDef::StableTailAlpha { alpha, coef, side, drift } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::domain(format!(
                        "stable_tail_alpha takes alpha in (0, 1) so that the drift is defined, got {alpha}"
                    )));
                }
                let p = DensityPart::power_law(*coef, *alpha, *side, 0.0, f64::INFINITY)?;
                LevyTriplet1D::from_bv_drift(*drift, 0.0, LevyMeasure1D::from_parts(vec![p])?)
            }
            ProcessDef::Levy { gamma, drift, sigma2, jumps } => {
                let m = build_measure(jumps, cat)?;
                match (gamma, drift) {
                    (Some(g), None) => LevyTriplet1D::new(*g, *sigma2, m),
                    (None, Some(d)) => LevyTriplet1D::from_bv_drift(*d, *sigma2, m),
                    (None, None) => LevyTriplet1D::new(0.0, *sigma2, m),
                    (Some(_), Some(_)) => Err(Error::Spec("give either gamma or drift, not both".into())),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "coupling", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairDef {
    Independent { xi: ProcessDef, eta: ProcessDef },
    Correlated { xi: ProcessDef, eta: ProcessDef, rho: f64 },
    CurveDegenerate { eta: ProcessDef, k: f64 },
    JointAtoms {
        gamma: [f64; 2],
        #[serde(default)]
        sigma: [[f64; 2]; 2],
        atoms: Vec<JointAtom>,
    },
}

impl PairDef {
    pub fn build(&self, cat: &Catalogue) -> Result<LevyTriplet2D> {
        match self {
            PairDef::Independent { xi, eta } => LevyTriplet2D::independent(&xi.build(cat)?, &eta.build(cat)?),
            PairDef::Correlated { xi, eta, rho } => {
                if !(-1.0..=1.0).contains(rho) {
                    return Err(Error::domain(format!("correlation must lie in [-1, 1], got {rho}")));
                }
                let (x, e) = (xi.build(cat)?, eta.build(cat)?);
                let c = rho * (x.sigma2 * e.sigma2).sqrt();
                LevyTriplet2D::new(
                    [x.gamma, e.gamma],
                    [[x.sigma2, c], [c, e.sigma2]],
                    LevyMeasure2D::ProductIndependent { xi: x.measure, eta: e.measure },
                )
            }
            PairDef::CurveDegenerate { eta, k } => doleans_xi_from_eta(&eta.build(cat)?, *k, &IntegrationConfig::default()),
            PairDef::JointAtoms { gamma, sigma, atoms } => {
                LevyTriplet2D::new(*gamma, *sigma, LevyMeasure2D::joint_atoms(atoms.clone())?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum GDef {
    Indicator { lo: f64, hi: f64 },
    Bump { lo: f64, hi: f64 },
    Gaussian { #[serde(default = "default_one")] scale: f64 },
    ExpNeg { #[serde(default = "default_one")] rate: f64 },
    Tent { lo: f64, hi: f64 },
    Zero,
}

fn support_flags(lo: f64, hi: f64) -> GFlags {
    let inside = lo < 0.0 && 0.0 < hi;
    GFlags {
        nonneg: true,
        compact_support: Some((lo, hi)),
        support_interior_contains_0: inside,
        positive_on_interior: true,
        boundary_countable: true,
        boundary_finite: true,
        g0_nonzero: inside,
        positive_near_0: inside,
        countable_discontinuities: true,
        ..GFlags::default()
    }
}

impl GDef {
    pub fn build(&self) -> Result<GDescriptor> {
        let interval = |lo: f64, hi: f64| {
            if lo < hi && lo.is_finite() && hi.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(format!("g needs a bounded interval, got [{lo}, {hi}]")))
            }
        };
        Ok(match *self {
            GDef::Indicator { lo, hi } => {
                interval(lo, hi)?;
                let mut flags = support_flags(lo, hi);
                flags.g0_nonzero = lo <= 0.0 && 0.0 <= hi;
                flags.indicator_of = Some((lo, hi));
                GDescriptor::new(
                    "indicator",
                    Arc::new(move |x| if (lo..=hi).contains(&x) { 1.0 } else { 0.0 }),
                    flags,
                )
                .with_primitive(Arc::new(move |x: f64| x.clamp(lo, hi) - lo))
                .with_breakpoints(vec![lo, hi])
            }
            GDef::Bump { lo, hi } => {
                interval(lo, hi)?;
                let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                let mut flags = support_flags(lo, hi);
                flags.strictly_monotone_near_0 = flags.support_interior_contains_0 && c != 0.0;
                let f: RealFn = Arc::new(move |x: f64| {
                    let u = (x - c) / h;
                    if u.abs() < 1.0 {
                        (1.0 - 1.0 / (1.0 - u * u)).exp()
                    } else {
                        0.0
                    }
                });
                GDescriptor::new("bump", f, flags).with_breakpoints(vec![lo, hi])
            }
            GDef::Tent { lo, hi } => {
                interval(lo, hi)?;
                let peak = if lo < 0.0 && 0.0 < hi { 0.0 } else { 0.5 * (lo + hi) };
                let mut flags = support_flags(lo, hi);
                flags.strictly_monotone_near_0 = flags.support_interior_contains_0 && peak != 0.0;
                let f: RealFn = Arc::new(move |x: f64| {
                    if x <= lo || x >= hi {
                        0.0
                    } else if x <= peak {
                        (x - lo) / (peak - lo)
                    } else {
                        (hi - x) / (hi - peak)
                    }
                });
                GDescriptor::new("tent", f, flags).with_breakpoints(vec![lo, peak, hi])
            }
            GDef::Gaussian { scale } => {
                if !(scale > 0.0) {
                    return Err(Error::domain("gaussian g needs a positive scale"));
                }
                let flags = GFlags {
                    nonneg: true,
                    g0_nonzero: true,
                    positive_near_0: true,
                    countable_discontinuities: true,
                    ..GFlags::default()
                };
                let w = scale * std::f64::consts::SQRT_2;
                GDescriptor::new("gaussian", Arc::new(move |x: f64| (-0.5 * (x / scale).powi(2)).exp()), flags)
                    .with_primitive(Arc::new(move |x: f64| 0.5 * w * std::f64::consts::PI.sqrt() * erf(x / w)))
            }
            GDef::ExpNeg { rate } => {
                if !(rate > 0.0) {
                    return Err(Error::domain("exp_neg g needs a positive rate"));
                }
                let flags = GFlags {
                    nonneg: true,
                    g0_nonzero: true,
                    positive_near_0: true,
                    countable_discontinuities: true,
                    strictly_monotone_near_0: true,
                    level_set_nondegenerate_near_0: Some(1.0),
                    ..GFlags::default()
                };
                GDescriptor::new("exp_neg", Arc::new(move |x: f64| (-rate * x).exp()), flags)
                    .with_primitive(Arc::new(move |x: f64| -(-rate * x).exp() / rate))
            }
            GDef::Zero => GDescriptor::new(
                "zero",
                Arc::new(|_| 0.0),
                GFlags { nonneg: true, countable_discontinuities: true, ..GFlags::default() },
            )
            .with_primitive(Arc::new(|_| 0.0)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum YDef {
    Identity,
    Subordinator { process: ProcessDef },
    Deterministic { rate: f64 },
}

impl YDef {
    pub fn build(&self, cat: &Catalogue) -> Result<YProcessSpec> {
        match self {
            YDef::Identity => Ok(YProcessSpec::identity()),
            YDef::Subordinator { process } => YProcessSpec::subordinator(process.build(cat)?),
            YDef::Deterministic { rate } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(Error::domain(format!("deterministic Y needs a positive rate, got {rate}")));
                }
                let r = *rate;
                Ok(YProcessSpec::deterministic(format!("{r}*t"), Arc::new(move |_| r), true, true))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleDef {
    Dufresne { sigma2: f64, mu: f64 },
    Exponential { rate: f64 },
    TruncatedExponential { rate: f64, cap: f64 },
    Gamma { shape: f64, #[serde(default = "default_one")] scale: f64 },
    Uniform { lo: f64, hi: f64 },
}

pub type Cdf = Box<dyn Fn(f64) -> f64 + Send + Sync>;

impl OracleDef {
    pub fn cdf(&self) -> Result<Cdf> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(format!("oracle parameter {name} must be positive, got {v}")))
            }
        };
        Ok(match *self {
            OracleDef::Dufresne { sigma2, mu } => {
                positive("sigma2", sigma2)?;
                positive("mu", mu)?;
                let g = Gamma::new(2.0 * mu / sigma2, 1.0).map_err(|e| Error::domain(e.to_string()))?;
                Box::new(move |x: f64| if x <= 0.0 { 0.0 } else { g.sf(2.0 / (sigma2 * x)) })
            }
            OracleDef::Exponential { rate } => {
                positive("rate", rate)?;
                Box::new(move |x: f64| if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() })
            }
            OracleDef::TruncatedExponential { rate, cap } => {
                positive("rate", rate)?;
                positive("cap", cap)?;
                let z = -(-rate * cap).exp_m1();
                Box::new(move |x: f64| {
                    if x <= 0.0 {
                        0.0
                    } else if x >= cap {
                        1.0
                    } else {
                        -(-rate * x).exp_m1() / z
                    }
                })
            }
            OracleDef::Gamma { shape, scale } => {
                positive("shape", shape)?;
                positive("scale", scale)?;
                let g = Gamma::new(shape, 1.0 / scale).map_err(|e| Error::domain(e.to_string()))?;
                Box::new(move |x: f64| if x <= 0.0 { 0.0 } else { g.cdf(x) })
            }
            OracleDef::Uniform { lo, hi } => {
                if !(lo < hi) {
                    return Err(Error::domain("uniform oracle needs lo < hi"));
                }
                Box::new(move |x: f64| ((x - lo) / (hi - lo)).clamp(0.0, 1.0))
            }
        })
    }
}
