//! Analytic checks on characteristic triplets: convergence of the exponential
//! functional, degeneracy to a constant, and the continuity classifiers.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exfun::{GDescriptor, YKind, YProcessSpec};
use crate::levy::{
    curve_region, Activity, Integrand, IntegrationConfig, LevyTriplet1D, LevyTriplet2D, Mean, Region,
    SmallJumpVariation,
};

/// Whether ξ drifts to +∞, decided by the sign of a finite or infinite mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "answer", rename_all = "snake_case")]
pub enum DriftVerdict {
    Yes { mean: MeanValue },
    No { mean: MeanValue },
    Unknown,
}

/// A mean that may be infinite; serialized without non-finite floats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanValue {
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
}

/// Value of an integral that may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralValue {
    Finite(f64),
    Infinite,
}

impl IntegralValue {
    fn from_f64(v: f64) -> Self {
        if v.is_finite() {
            IntegralValue::Finite(v)
        } else {
            IntegralValue::Infinite
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, IntegralValue::Finite(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceVerdict {
    Converges,
    Diverges,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub xi_drifts_to_infinity: DriftVerdict,
    /// `∫_{|y|>e} log|y| / A_ξ(log|y|) Π_η(dy)`, absent when it could not be evaluated.
    pub eta_log_integral: Option<IntegralValue>,
    pub verdict: ConvergenceVerdict,
    pub diagnostics: Vec<String>,
}

fn drift_verdict(xi: &LevyTriplet1D, cfg: &IntegrationConfig) -> Result<DriftVerdict> {
    Ok(match xi.mean(cfg)? {
        Mean::Finite(m) if m > 0.0 => DriftVerdict::Yes { mean: MeanValue::Finite(m) },
        Mean::Finite(m) => DriftVerdict::No { mean: MeanValue::Finite(m) },
        Mean::PlusInfinity => DriftVerdict::Yes { mean: MeanValue::PlusInfinity },
        Mean::MinusInfinity => DriftVerdict::No { mean: MeanValue::MinusInfinity },
        Mean::Undefined => DriftVerdict::Unknown,
    })
}

/// Decides whether `∫_0^t e^{−ξ_{s−}} dη_s` converges as `t → ∞`.
pub fn check_convergence(t: &LevyTriplet2D, cfg: &IntegrationConfig) -> ConvergenceReport {
    let mut diagnostics = Vec::new();
    let marginals = t.xi_marginal(cfg).and_then(|x| Ok((x, t.eta_marginal(cfg)?)));
    let (xi, eta) = match marginals {
        Ok(m) => m,
        Err(e) => {
            return ConvergenceReport {
                xi_drifts_to_infinity: DriftVerdict::Unknown,
                eta_log_integral: None,
                verdict: ConvergenceVerdict::Inconclusive,
                diagnostics: vec![format!("marginals: {e}")],
            }
        }
    };
    let drift = drift_verdict(&xi, cfg).unwrap_or_else(|e| {
        diagnostics.push(format!("mean of xi: {e}"));
        DriftVerdict::Unknown
    });
    if drift == DriftVerdict::Unknown {
        diagnostics.push("mean of xi does not exist; drift to +infinity not decided".into());
    }
    let integral = match eta_log_integral(&xi, &eta, cfg) {
        Ok(v) => Some(IntegralValue::from_f64(v)),
        Err(e) => {
            diagnostics.push(format!("eta log integral: {e}"));
            None
        }
    };
    let verdict = match (&drift, integral) {
        (DriftVerdict::No { .. }, _) => ConvergenceVerdict::Diverges,
        (DriftVerdict::Yes { .. }, Some(IntegralValue::Finite(_))) => ConvergenceVerdict::Converges,
        (DriftVerdict::Yes { .. }, Some(IntegralValue::Infinite)) => ConvergenceVerdict::Diverges,
        _ => ConvergenceVerdict::Inconclusive,
    };
    ConvergenceReport {
        xi_drifts_to_infinity: drift,
        eta_log_integral: integral,
        verdict,
        diagnostics,
    }
}

fn eta_log_integral(xi: &LevyTriplet1D, eta: &LevyTriplet1D, cfg: &IntegrationConfig) -> Result<f64> {
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let h = |u: f64, _sign: f64| match xi.a_xi(u, cfg) {
        Ok(a) => u / a,
        Err(e) => {
            failure.lock().expect("poisoned").get_or_insert(e);
            f64::NAN
        }
    };
    let v = eta.measure.integrate_against(
        Integrand::LogAbs(&h),
        Region::Abs { lo: std::f64::consts::E, hi: f64::INFINITY },
        cfg,
    );
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    v
}

/// Tolerances of the degeneracy check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegeneracyTolerances {
    pub sigma: f64,
    pub curve: f64,
    pub gamma: f64,
    /// Points per absolutely continuous part in the curve probe.
    pub probe_points: usize,
}

impl Default for DegeneracyTolerances {
    fn default() -> Self {
        DegeneracyTolerances {
            sigma: 1e-10,
            curve: 1e-9,
            gamma: 1e-8,
            probe_points: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum DegeneracyOutcome {
    Degenerate,
    NotDegenerate { clause: String },
    /// No Gaussian part and no jumps: nothing determines k.
    NoProbe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyCheck {
    pub k: Option<f64>,
    pub sigma_residual: Option<f64>,
    pub curve_residual: Option<f64>,
    pub gamma_residual: Option<f64>,
    pub outcome: DegeneracyOutcome,
}

impl DegeneracyCheck {
    pub fn degenerate_k(&self) -> Option<f64> {
        match self.outcome {
            DegeneracyOutcome::Degenerate => self.k,
            _ => None,
        }
    }

    fn fail(k: Option<f64>, clause: &str, s: Option<f64>, c: Option<f64>, g: Option<f64>) -> Self {
        DegeneracyCheck {
            k,
            sigma_residual: s,
            curve_residual: c,
            gamma_residual: g,
            outcome: DegeneracyOutcome::NotDegenerate { clause: clause.into() },
        }
    }
}

/// Tests whether the pair has the form under which `∫_0^∞ e^{−ξ_{s−}} dη_s`
/// is the constant k: rank-one Gaussian part, jumps on the curve
/// `y = k(1 − e^{−x})`, and the matching drift identity.
pub fn check_degenerate(t: &LevyTriplet2D, tol: &DegeneracyTolerances, cfg: &IntegrationConfig) -> Result<DegeneracyCheck> {
    let s = t.sigma;
    let probe = t.measure.support_probe(tol.probe_points)?;
    let k = if s[0][0] > 0.0 {
        s[0][1] / s[0][0]
    } else {
        match probe.iter().find(|p| p.0 != 0.0) {
            Some(&(x, y)) => y / -(-x).exp_m1(),
            None if probe.is_empty() => {
                return Ok(DegeneracyCheck {
                    k: None,
                    sigma_residual: None,
                    curve_residual: None,
                    gamma_residual: None,
                    outcome: DegeneracyOutcome::NoProbe,
                })
            }
            None => return Ok(DegeneracyCheck::fail(None, "curve", None, None, None)),
        }
    };
    if !(k.is_finite() && k != 0.0) {
        return Ok(DegeneracyCheck::fail(Some(k), "sigma", None, None, None));
    }
    let sig_res = (s[0][1] - k * s[0][0])
        .abs()
        .max((s[1][0] - k * s[0][0]).abs())
        .max((s[1][1] - k * k * s[0][0]).abs());
    if sig_res > tol.sigma {
        return Ok(DegeneracyCheck::fail(Some(k), "sigma", Some(sig_res), None, None));
    }
    let curve_res = probe
        .iter()
        .map(|&(x, y)| (y + k * (-x).exp_m1()).abs())
        .fold(0.0, f64::max);
    if !(curve_res <= tol.curve) {
        return Ok(DegeneracyCheck::fail(Some(k), "curve", Some(sig_res), Some(curve_res), None));
    }
    let (mx, _) = t.measure.marginal_tails()?;
    let (lo, hi) = curve_region(k)?;
    let claim = mx.integrate_against(
        Integrand::Plain(&|x: f64| (-x).exp_m1() + x),
        Region::Closed { lo, hi },
        cfg,
    )?;
    let gamma_res = (t.gamma[0] - t.gamma[1] / k - 0.5 * s[0][0] - claim).abs();
    if !(gamma_res <= tol.gamma) {
        return Ok(DegeneracyCheck::fail(Some(k), "gamma", Some(sig_res), Some(curve_res), Some(gamma_res)));
    }
    Ok(DegeneracyCheck {
        k: Some(k),
        sigma_residual: Some(sig_res),
        curve_residual: Some(curve_res),
        gamma_residual: Some(gamma_res),
        outcome: DegeneracyOutcome::Degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    ConstantAtom { k: f64 },
    HasAtoms,
    NoAtoms,
    AbsolutelyContinuous,
    LebesgueDensity,
    Unknown,
}

impl Verdict {
    /// Whether the law of the functional has an atom.
    pub fn predicts_atoms(&self) -> Option<bool> {
        match self {
            Verdict::ConstantAtom { .. } | Verdict::HasAtoms => Some(true),
            Verdict::NoAtoms | Verdict::AbsolutelyContinuous | Verdict::LebesgueDensity => Some(false),
            Verdict::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Premise {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleTrace {
    pub rule: String,
    /// The result the rule encodes, in words.
    pub statement: String,
    pub premises: Vec<Premise>,
    pub fired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub trace: Vec<RuleTrace>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

struct Rule {
    name: &'static str,
    statement: &'static str,
    premises: Vec<Premise>,
}

impl Rule {
    fn new(name: &'static str, statement: &'static str) -> Self {
        Rule { name, statement, premises: Vec::new() }
    }

    fn check(&mut self, name: &str, passed: bool) -> &mut Self {
        self.premises.push(Premise { name: name.into(), passed, detail: None });
        self
    }

    fn check_with(&mut self, name: &str, passed: bool, detail: String) -> &mut Self {
        self.premises.push(Premise { name: name.into(), passed, detail: Some(detail) });
        self
    }

    fn passed(&self) -> bool {
        self.premises.iter().all(|p| p.passed)
    }

    fn into_trace(self, fired: bool) -> RuleTrace {
        RuleTrace {
            rule: self.name.into(),
            statement: self.statement.into(),
            premises: self.premises,
            fired,
        }
    }
}

/// Classifies the law of `∫_0^∞ e^{−ξ_{s−}} dη_s`.
pub fn classify_exponential(t: &LevyTriplet2D, cfg: &IntegrationConfig) -> Result<Classification> {
    let conv = check_convergence(t, cfg);
    let mut trace = Vec::new();
    let mut pre = Rule::new("convergence", "the integral converges almost surely");
    pre.check_with(
        "converges",
        conv.verdict == ConvergenceVerdict::Converges,
        format!("{:?}", conv.verdict),
    );
    let converges = pre.passed();
    trace.push(pre.into_trace(converges));
    if !converges {
        return Ok(Classification { verdict: Verdict::Unknown, trace, warnings: conv.diagnostics });
    }

    let deg = check_degenerate(t, &DegeneracyTolerances::default(), cfg)?;
    let mut r1 = Rule::new("degenerate", "jumps on an exponential curve with matching drift give a constant limit");
    r1.check_with("degenerate pair", deg.degenerate_k().is_some(), format!("{:?}", deg.outcome));
    if let Some(k) = deg.degenerate_k() {
        trace.push(r1.into_trace(true));
        return Ok(Classification { verdict: Verdict::ConstantAtom { k }, trace, warnings: vec![] });
    }
    trace.push(r1.into_trace(false));

    let xi = t.xi_marginal(cfg)?;
    let eta = t.eta_marginal(cfg)?;
    let mut r3 = Rule::new(
        "self_decomposable",
        "no positive jumps in xi and a log moment of eta give a self-decomposable limit with a Lebesgue density",
    );
    r3.check("xi has no positive jumps", !xi.measure.has_positive_jumps());
    r3.check("xi drifts to +infinity", matches!(conv.xi_drifts_to_infinity, DriftVerdict::Yes { .. }));
    let log_moment = eta.measure.integrate_against(
        Integrand::LogAbs(&|u, _| u),
        Region::Abs { lo: std::f64::consts::E, hi: f64::INFINITY },
        cfg,
    )?;
    r3.check_with("log moment of eta finite", log_moment.is_finite(), format!("{log_moment}"));
    let refine = r3.passed();

    let mut r2 = Rule::new("non_degenerate", "a convergent non-degenerate integral has no atoms");
    r2.check("not degenerate", true);
    if refine {
        trace.push(r2.into_trace(false));
        trace.push(r3.into_trace(true));
        Ok(Classification { verdict: Verdict::LebesgueDensity, trace, warnings: vec![] })
    } else {
        trace.push(r2.into_trace(true));
        trace.push(r3.into_trace(false));
        Ok(Classification { verdict: Verdict::NoAtoms, trace, warnings: vec![] })
    }
}

/// Properties of ξ used by the g-integral rules.
struct XiFacts {
    cpp: bool,
    drift_bv: Option<f64>,
    infinite_activity: bool,
    finite_variation: bool,
    sigma2: f64,
    no_positive_jumps: bool,
    subordinator: bool,
    measure_nonzero: bool,
    mean: Mean,
}

impl XiFacts {
    fn new(xi: &LevyTriplet1D, cfg: &IntegrationConfig) -> Result<Self> {
        let infinite_activity = matches!(xi.measure.activity(), Activity::Infinite);
        let finite_variation = xi.sigma2 == 0.0
            && xi.measure.small_jump_variation(cfg)? == SmallJumpVariation::FiniteVariation;
        Ok(XiFacts {
            cpp: xi.sigma2 == 0.0 && !infinite_activity,
            drift_bv: xi.drift_bv,
            infinite_activity,
            finite_variation,
            sigma2: xi.sigma2,
            no_positive_jumps: !xi.measure.has_positive_jumps(),
            subordinator: xi.is_subordinator(),
            measure_nonzero: !xi.measure.is_zero(),
            mean: xi.mean(cfg)?,
        })
    }

    fn transient(&self) -> bool {
        match self.mean {
            Mean::Finite(m) => m != 0.0,
            Mean::PlusInfinity | Mean::MinusInfinity => true,
            Mean::Undefined => false,
        }
    }

    fn drift_sign(&self) -> f64 {
        match self.mean {
            Mean::Finite(m) => m.signum(),
            Mean::PlusInfinity => 1.0,
            Mean::MinusInfinity => -1.0,
            Mean::Undefined => f64::NAN,
        }
    }
}

const SPOT_GRID: usize = 400;
const LEVEL_SET_Z: usize = 64;
const LEVEL_SET_T: usize = 200;
const LEVEL_SET_MAX_FRACTION: f64 = 0.01;

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64)
}

/// Fraction of `t` in the grid with `g(t) = g(t + z)`, maximised over the z grid.
fn level_set_fraction(g: &GDescriptor, ts: &[f64], zs: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for &z in zs {
        let eq = ts
            .iter()
            .filter(|&&t| {
                let (a, b) = (g.eval(t), g.eval(t + z));
                (a - b).abs() <= 1e-13 * a.abs().max(b.abs())
            })
            .count();
        worst = worst.max(eq as f64 / ts.len() as f64);
    }
    worst
}

/// Spot-checks declared g flags; contradictions are errors.
pub fn validate_g_flags(g: &GDescriptor) -> Result<Vec<String>> {
    let f = &g.flags;
    let mut notes = Vec::new();
    let bad = |msg: String| Err(Error::domain(format!("g '{}': {msg}", g.name)));
    if let (Some(ind), Some(cs)) = (f.indicator_of, f.compact_support) {
        if ind != cs {
            return bad(format!("indicator of {ind:?} but declared support {cs:?}"));
        }
    }
    if let Some((lo, hi)) = f.compact_support {
        if !(lo < hi) {
            return bad(format!("empty support ({lo}, {hi})"));
        }
        if f.support_interior_contains_0 && !(lo < 0.0 && 0.0 < hi) {
            return bad("support interior does not contain 0".into());
        }
        let span = hi - lo;
        for x in grid(lo - 5.0 * span, lo, SPOT_GRID).chain(grid(hi, hi + 5.0 * span, SPOT_GRID)) {
            if x != lo && x != hi && g.eval(x) != 0.0 {
                return bad(format!("g({x}) = {} outside the declared support", g.eval(x)));
            }
        }
        if f.positive_on_interior {
            for x in grid(lo, hi, SPOT_GRID) {
                if !(g.eval(x) > 0.0) {
                    return bad(format!("g({x}) = {} is not positive on the support interior", g.eval(x)));
                }
            }
        }
    } else if f.support_interior_contains_0 || f.positive_on_interior {
        return bad("support flags need a declared compact support".into());
    }
    if f.boundary_finite && !f.boundary_countable {
        notes.push("boundary_finite implies boundary_countable".into());
    }
    if f.nonneg {
        let (lo, hi) = f.compact_support.unwrap_or((-20.0, 20.0));
        if let Some(x) = grid(lo, hi, SPOT_GRID).find(|&x| g.eval(x) < 0.0) {
            return bad(format!("declared nonneg but g({x}) < 0"));
        }
    }
    if f.g0_nonzero && g.eval(0.0) == 0.0 {
        return bad("declared g(0) != 0 but g(0) = 0".into());
    }
    if f.positive_near_0 && [-1e-6, 0.0, 1e-6].iter().any(|&x| !(g.eval(x) > 0.0)) {
        return bad("declared positive near 0 but g is not positive at 0".into());
    }
    if let Some((lo, hi)) = f.indicator_of {
        for x in grid(lo, hi, 16) {
            if g.eval(x) != 1.0 {
                return bad(format!("declared indicator but g({x}) = {}", g.eval(x)));
            }
        }
    }
    if f.strictly_monotone_near_0 {
        let v: Vec<f64> = grid(-1e-4, 1e-4, 21).map(|x| g.eval(x)).collect();
        let inc = v.windows(2).all(|w| w[1] > w[0]);
        let dec = v.windows(2).all(|w| w[1] < w[0]);
        if !(inc || dec) {
            return bad("declared strictly monotone near 0 but the spot grid disagrees".into());
        }
    }
    if let Some(ls) = f.level_set_nondegenerate {
        let (a, b) = ls.j;
        if !(a < b && (b < 0.0 || a > 0.0) && ls.t0 > 0.0) {
            return bad(format!("level-set window {:?} must be a compact interval away from 0, t0 > 0", ls.j));
        }
        let ts: Vec<f64> = grid(ls.t0, ls.t0 + 10.0, LEVEL_SET_T / 2)
            .chain(grid(-ls.t0 - 10.0, -ls.t0, LEVEL_SET_T / 2))
            .collect();
        let zs: Vec<f64> = grid(a, b, LEVEL_SET_Z).collect();
        let frac = level_set_fraction(g, &ts, &zs);
        if frac > LEVEL_SET_MAX_FRACTION {
            return bad(format!("level-set condition fails on {:.1}% of the spot grid", 100.0 * frac));
        }
    }
    if let Some(eps) = f.level_set_nondegenerate_near_0 {
        if !(eps > 0.0) {
            return bad(format!("level-set radius must be positive, got {eps}"));
        }
        let ts: Vec<f64> = grid(-eps, eps, LEVEL_SET_T).collect();
        // z = 0 is excluded: g(t) = g(t) holds trivially.
        let zs: Vec<f64> = grid(-eps, eps, LEVEL_SET_Z).filter(|&z| z != 0.0).collect();
        let frac = level_set_fraction(g, &ts, &zs);
        if frac > LEVEL_SET_MAX_FRACTION {
            return bad(format!("level-set condition near 0 fails on {:.1}% of the spot grid", 100.0 * frac));
        }
    }
    Ok(notes)
}

/// Classifies the law of `∫_0^∞ g(ξ_t) dY_t`; the caller asserts that the
/// integral is finite almost surely.
pub fn classify_g_integral(
    xi: &LevyTriplet1D,
    g: &GDescriptor,
    y: &YProcessSpec,
    cfg: &IntegrationConfig,
) -> Result<Classification> {
    let mut warnings = validate_g_flags(g)?;
    let f = &g.flags;
    let facts = XiFacts::new(xi, cfg)?;
    match facts.mean {
        Mean::Finite(m) if m == 0.0 => {
            warnings.push("xi has zero mean and is recurrent; rules needing transience do not apply".into())
        }
        Mean::Undefined => warnings.push("mean of xi does not exist; transience not decided".into()),
        _ => {}
    }
    let identity = matches!(y.kind, YKind::Identity);
    let boundary_countable = f.boundary_countable || f.boundary_finite;
    let mut trace = Vec::new();

    let mut rules: Vec<(Rule, Verdict)> = Vec::new();

    let mut r = Rule::new("cpp_without_drift", "a compound Poisson xi without drift and g(0) != 0 give a Lebesgue density");
    r.check("Y is the identity", identity)
        .check("xi is compound Poisson", facts.cpp && facts.measure_nonzero)
        .check_with("xi has zero drift", facts.drift_bv == Some(0.0), format!("{:?}", facts.drift_bv))
        .check("g(0) != 0", f.g0_nonzero);
    rules.push((r, Verdict::LebesgueDensity));

    let mut r = Rule::new(
        "cpp_with_drift",
        "a compound Poisson xi with non-zero drift, drifting away, and compactly supported g give atoms",
    );
    let a = facts.drift_bv.unwrap_or(0.0);
    r.check("Y is the identity", identity)
        .check("xi is compound Poisson", facts.cpp && facts.measure_nonzero)
        .check_with("drift a != 0", a != 0.0, format!("{a}"))
        .check_with("xi drifts to sgn(a)·infinity", facts.transient() && facts.drift_sign() == a.signum(), format!("{:?}", facts.mean))
        .check("g has compact support", f.compact_support.is_some());
    rules.push((r, Verdict::HasAtoms));

    let mut r = Rule::new(
        "subordinator_indicator",
        "a subordinator with infinite Levy measure or no drift spends an atomless time in [0, x]",
    );
    r.check("Y is the identity", identity)
        .check("xi is a non-zero subordinator", facts.subordinator)
        .check_with(
            "infinite Levy measure or zero drift",
            facts.infinite_activity || (facts.drift_bv == Some(0.0) && facts.measure_nonzero),
            format!("infinite={}, drift={:?}", facts.infinite_activity, facts.drift_bv),
        )
        .check_with(
            "g is the indicator of [0, x]",
            matches!(f.indicator_of, Some((lo, hi)) if lo == 0.0 && hi > 0.0),
            format!("{:?}", f.indicator_of),
        );
    rules.push((r, Verdict::NoAtoms));

    let mut r = Rule::new(
        "compact_support_transient",
        "a transient xi and non-negative compactly supported g positive around 0 give no atoms",
    );
    let unbounded_var = !facts.finite_variation;
    let case_i = unbounded_var && f.boundary_finite;
    let case_ii = facts.finite_variation && facts.drift_bv == Some(0.0) && boundary_countable;
    r.check("Y is the identity", identity)
        .check("xi is transient", facts.transient())
        .check("g is non-negative", f.nonneg)
        .check("g has compact support", f.compact_support.is_some())
        .check("0 is interior to the support", f.support_interior_contains_0)
        .check("g > 0 on the support interior", f.positive_on_interior)
        .check_with(
            "unbounded variation with finite boundary, or bounded variation, zero drift and countable boundary",
            case_i || case_ii,
            format!("unbounded_variation={unbounded_var}, drift={:?}", facts.drift_bv),
        );
    rules.push((r, Verdict::NoAtoms));

    let mut r = Rule::new("regular_point", "a transient xi for which 0 is regular and g > 0 near 0 give no atoms");
    let regular = facts.sigma2 > 0.0 || (unbounded_var && facts.no_positive_jumps);
    r.check("Y is the identity", identity)
        .check("xi is transient", facts.transient())
        .check_with(
            "0 is regular for itself (Gaussian part, or unbounded variation without positive jumps)",
            regular,
            format!("sigma2={}, unbounded_variation={unbounded_var}", facts.sigma2),
        )
        .check("g is non-negative", f.nonneg)
        .check("g > 0 near 0", f.positive_near_0);
    rules.push((r, Verdict::NoAtoms));

    let mut r = Rule::new(
        "drift_minus_subordinator",
        "xi = at - (driftless subordinator with infinite Levy measure), a != E sigma_1, and g > 0 near 0 give no atoms",
    );
    r.check("Y is the identity", identity)
        .check("xi has no Gaussian part and no positive jumps", facts.sigma2 == 0.0 && facts.no_positive_jumps)
        .check("jump part has infinite Levy measure", facts.infinite_activity)
        .check_with(
            "jump part is a driftless subordinator and a > 0",
            facts.finite_variation && a > 0.0,
            format!("a={a}"),
        )
        .check_with("a != E sigma_1", facts.transient(), format!("{:?}", facts.mean))
        .check("g is non-negative", f.nonneg)
        .check("g > 0 near 0", f.positive_near_0);
    rules.push((r, Verdict::NoAtoms));

    for (name, near0) in [("level_set_shift", false), ("level_set_near_0", true)] {
        let statement = if near0 {
            "infinite activity and a non-degenerate level set of g near 0 give absolute continuity or no atoms"
        } else {
            "jumps in a window J and a non-degenerate level set of g at large |t| give absolute continuity or no atoms"
        };
        let mut r = Rule::new(name, statement);
        r.check("xi is transient", facts.transient())
            .check("xi has non-zero Levy measure", facts.measure_nonzero);
        if near0 {
            r.check("Levy measure of xi is infinite", facts.infinite_activity).check(
                "level-set condition near 0 (declared or via strict monotonicity)",
                f.level_set_nondegenerate_near_0.is_some() || f.strictly_monotone_near_0,
            );
        } else {
            match f.level_set_nondegenerate {
                Some(ls) => {
                    let mass = xi.measure.integrate_against(
                        Integrand::Plain(&|_| 1.0),
                        Region::Closed { lo: ls.j.0, hi: ls.j.1 },
                        cfg,
                    )?;
                    r.check("level-set condition on J", true)
                        .check_with("Levy measure charges J", mass > 0.0, format!("{mass}"));
                }
                None => {
                    r.check("level-set condition on J", false);
                }
            }
        }
        let base_ok = r.passed();
        let mut ac = Rule::new(name, statement);
        ac.premises = r.premises.clone();
        ac.check("Y has a non-vanishing density", y.ac_density_nonvanishing);
        let mut na = r;
        na.check("Y strictly increasing", y.strictly_increasing)
            .check("g has countably many discontinuities", f.countable_discontinuities);
        if base_ok && ac.passed() {
            rules.push((ac, Verdict::AbsolutelyContinuous));
        } else {
            rules.push((na, Verdict::NoAtoms));
        }
    }

    let mut verdict = Verdict::Unknown;
    for (rule, v) in rules {
        let fire = verdict == Verdict::Unknown && rule.passed();
        if fire {
            verdict = v;
        }
        trace.push(rule.into_trace(fire));
    }
    Ok(Classification { verdict, trace, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exfun::GFlags;
    use crate::levy::{doleans_xi_from_eta, Atom, DensityPart, LevyMeasure1D, LevyMeasure2D, Side};
    use std::sync::Arc;

    fn cfg() -> IntegrationConfig {
        IntegrationConfig::default()
    }

    fn pair(xi: LevyTriplet1D, eta: LevyTriplet1D) -> LevyTriplet2D {
        LevyTriplet2D::independent(&xi, &eta).unwrap()
    }

    #[test]
    fn convergence_with_inverse_square_eta() {
        let p = DensityPart::power_law(1.0, 1.0, Side::Positive, 1.0, f64::INFINITY).unwrap();
        let eta = LevyTriplet1D::new(0.0, 0.0, LevyMeasure1D::from_parts(vec![p]).unwrap()).unwrap();
        let r = check_convergence(&pair(LevyTriplet1D::drift(1.0).unwrap(), eta), &cfg());
        assert_eq!(r.verdict, ConvergenceVerdict::Converges);
        match r.eta_log_integral {
            Some(IntegralValue::Finite(v)) => assert!((v - 2.0 / std::f64::consts::E).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_mean_diverges() {
        let r = check_convergence(&pair(LevyTriplet1D::drift(-1.0).unwrap(), LevyTriplet1D::drift(1.0).unwrap()), &cfg());
        assert_eq!(r.verdict, ConvergenceVerdict::Diverges);
    }

    #[test]
    fn degenerate_roundtrip_and_product_rejection() {
        let part = DensityPart::uniform(0.0, 0.5, 1.0).unwrap();
        let eta = LevyTriplet1D::new(0.1, 0.3, LevyMeasure1D::from_parts(vec![part]).unwrap()).unwrap();
        for k in [1.0, -2.5, 4.0] {
            let t = doleans_xi_from_eta(&eta, k, &cfg()).unwrap();
            let d = check_degenerate(&t, &DegeneracyTolerances::default(), &cfg()).unwrap();
            let kk = d.degenerate_k().unwrap();
            assert!((kk - k).abs() <= 1e-12 * k.abs(), "{kk} vs {k}");
        }
        let cpp = |x: f64| {
            LevyTriplet1D::from_bv_drift(0.0, 0.0, LevyMeasure1D::from_atoms(vec![Atom { loc: x, mass: 1.0 }]).unwrap()).unwrap()
        };
        let d = check_degenerate(&pair(cpp(1.0), cpp(0.5)), &DegeneracyTolerances::default(), &cfg()).unwrap();
        assert!(d.degenerate_k().is_none());
    }

    #[test]
    fn brownian_degenerate_pair() {
        // η_t = k(ξ_t − σ²t/2) with ξ = B + t, k = 2
        let k = 2.0;
        let t = LevyTriplet2D::new(
            [1.0, k * (1.0 - 0.5)],
            [[1.0, k], [k, k * k]],
            LevyMeasure2D::ProductIndependent { xi: LevyMeasure1D::zero(), eta: LevyMeasure1D::zero() },
        )
        .unwrap();
        let d = check_degenerate(&t, &DegeneracyTolerances::default(), &cfg()).unwrap();
        assert_eq!(d.degenerate_k(), Some(2.0));
        let c = classify_exponential(&t, &cfg()).unwrap();
        assert_eq!(c.verdict, Verdict::ConstantAtom { k: 2.0 });
    }

    #[test]
    fn no_probe_when_nothing_random() {
        let t = pair(LevyTriplet1D::drift(1.0).unwrap(), LevyTriplet1D::drift(1.0).unwrap());
        let d = check_degenerate(&t, &DegeneracyTolerances::default(), &cfg()).unwrap();
        assert_eq!(d.outcome, DegeneracyOutcome::NoProbe);
    }

    #[test]
    fn spectrally_negative_gets_density() {
        let p = DensityPart::exponential(1.0, 2.0, Side::Negative).unwrap();
        let xi = LevyTriplet1D::from_bv_drift(1.0, 0.0, LevyMeasure1D::from_parts(vec![p]).unwrap()).unwrap();
        let c = classify_exponential(&pair(xi, LevyTriplet1D::drift(1.0).unwrap()), &cfg()).unwrap();
        assert_eq!(c.verdict, Verdict::LebesgueDensity);
        assert!(c.trace.iter().any(|r| r.fired && r.premises.iter().all(|p| p.passed)));
    }

    fn indicator(lo: f64, hi: f64) -> GDescriptor {
        GDescriptor::new(
            "indicator",
            Arc::new(move |x| if (lo..=hi).contains(&x) { 1.0 } else { 0.0 }),
            GFlags {
                nonneg: true,
                compact_support: Some((lo, hi)),
                indicator_of: Some((lo, hi)),
                g0_nonzero: lo <= 0.0 && hi >= 0.0,
                countable_discontinuities: true,
                boundary_finite: true,
                ..GFlags::default()
            },
        )
    }

    fn cpp_plus(drift: f64) -> LevyTriplet1D {
        LevyTriplet1D::from_bv_drift(drift, 0.0, LevyMeasure1D::from_atoms(vec![Atom { loc: 1.0, mass: 1.0 }]).unwrap()).unwrap()
    }

    #[test]
    fn g_rules_on_small_cases() {
        let y = YProcessSpec::identity();
        let c = classify_g_integral(&cpp_plus(0.0), &indicator(0.0, 1.0), &y, &cfg()).unwrap();
        assert_eq!(c.verdict, Verdict::LebesgueDensity);
        let c = classify_g_integral(&cpp_plus(1.0), &indicator(0.0, 1.0), &y, &cfg()).unwrap();
        assert_eq!(c.verdict, Verdict::HasAtoms);
        let stable = DensityPart::power_law(1.0, 0.5, Side::Positive, 0.0, f64::INFINITY).unwrap();
        let sub = LevyTriplet1D::from_bv_drift(0.0, 0.0, LevyMeasure1D::from_parts(vec![stable]).unwrap()).unwrap();
        let c = classify_g_integral(&sub, &indicator(0.0, 1.0), &y, &cfg()).unwrap();
        assert_eq!(c.verdict, Verdict::NoAtoms);
        assert!(c.trace.iter().any(|r| r.fired && r.rule == "subordinator_indicator"));
    }

    #[test]
    fn contradictory_flags_are_errors() {
        let mut g = indicator(0.5, 1.0);
        g.flags.g0_nonzero = true;
        assert!(classify_g_integral(&cpp_plus(1.0), &g, &YProcessSpec::identity(), &cfg()).is_err());
        let mut g = indicator(0.0, 1.0);
        g.flags.compact_support = Some((0.0, 0.5));
        assert!(validate_g_flags(&g).is_err());
    }

    #[test]
    fn level_set_spot_check() {
        let exp_neg = GDescriptor::new(
            "exp_neg",
            Arc::new(|x: f64| (-x).exp()),
            GFlags { level_set_nondegenerate_near_0: Some(0.5), ..GFlags::default() },
        );
        assert!(validate_g_flags(&exp_neg).is_ok());
        let flat = GDescriptor::new(
            "flat",
            Arc::new(|_| 1.0),
            GFlags { level_set_nondegenerate_near_0: Some(0.5), ..GFlags::default() },
        );
        assert!(validate_g_flags(&flat).is_err());
    }
}
