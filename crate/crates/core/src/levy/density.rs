//! Absolutely continuous building blocks of a one-dimensional Lévy measure.
//!
//! Every part lives on one side of the origin. Each variant knows its mass on
//! any interval in closed form (or via an exact cumulative table), which is
//! what the tails, the sampler and the drift compensators are built on.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{bisect, integrate, QuadConfig};

/// Which half-line a part is supported on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Positive,
    Negative,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Positive => 1.0,
            Side::Negative => -1.0,
        }
    }
}

/// Monotone jump transformations relating the two coordinates of a
/// curve-supported bivariate measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpMap {
    /// `x ↦ k (1 − e^{−x})`
    Curve { k: f64 },
    /// `y ↦ −log(1 − y/k)`, the inverse of `Curve`; `+∞` when `y/k ≥ 1`.
    LogDoleans { k: f64 },
}

impl JumpMap {
    pub fn apply(&self, v: f64) -> f64 {
        match *self {
            JumpMap::Curve { k } => -k * (-v).exp_m1(),
            JumpMap::LogDoleans { k } => {
                let r = v / k;
                if r >= 1.0 {
                    f64::INFINITY
                } else {
                    -(-r).ln_1p()
                }
            }
        }
    }

    pub fn inverse(&self) -> JumpMap {
        match *self {
            JumpMap::Curve { k } => JumpMap::LogDoleans { k },
            JumpMap::LogDoleans { k } => JumpMap::Curve { k },
        }
    }

    /// |d/dv inverse(v)|
    fn inverse_jacobian(&self, v: f64) -> f64 {
        match *self {
            // inverse is LogDoleans: d/dy[-ln(1-y/k)] = 1/(k-y)
            JumpMap::Curve { k } => 1.0 / (k - v).abs(),
            // inverse is Curve: d/dx[k(1-e^{-x})] = k e^{-x}
            JumpMap::LogDoleans { k } => (k * (-v).exp()).abs(),
        }
    }

    /// Image of an interval, as an ordered pair.
    fn image(&self, a: f64, b: f64) -> (f64, f64) {
        let (fa, fb) = (self.apply(a), self.apply(b));
        if fa <= fb {
            (fa, fb)
        } else {
            (fb, fa)
        }
    }
}

/// Piecewise-linear density on a grid of nodes, all on one side of 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedDensity {
    xs: Vec<f64>,
    ds: Vec<f64>,
    cum: Vec<f64>,
}

impl TabulatedDensity {
    pub fn new(xs: Vec<f64>, ds: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ds.len() {
            return Err(Error::domain("tabulated density needs ≥ 2 nodes and matching lengths"));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::domain("tabulated density nodes must be strictly increasing"));
        }
        if ds.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::domain("tabulated density values must be finite and non-negative"));
        }
        let first = xs[0];
        let last = *xs.last().expect("len ≥ 2");
        if first < 0.0 && last > 0.0 {
            return Err(Error::domain("tabulated density must not straddle 0"));
        }
        let mut cum = Vec::with_capacity(xs.len());
        cum.push(0.0);
        for i in 1..xs.len() {
            let cell = 0.5 * (ds[i - 1] + ds[i]) * (xs[i] - xs[i - 1]);
            cum.push(cum[i - 1] + cell);
        }
        Ok(TabulatedDensity { xs, ds, cum })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    fn support(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().expect("non-empty"))
    }

    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        let i = self.cell(x);
        let w = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ds[i] * (1.0 - w) + self.ds[i + 1] * w
    }

    fn cell(&self, x: f64) -> usize {
        let idx = self.xs.partition_point(|&n| n <= x);
        idx.saturating_sub(1).min(self.xs.len() - 2)
    }

    /// Mass on (lo, x].
    fn cumulative(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return *self.cum.last().expect("non-empty");
        }
        let i = self.cell(x);
        self.cum[i] + 0.5 * (self.ds[i] + self.density(x)) * (x - self.xs[i])
    }
}

/// One absolutely continuous component of a Lévy measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityPart {
    /// `coef · |x|^{-1-alpha}` for `|x|` in `(lo, hi)` on one side.
    PowerLaw {
        coef: f64,
        alpha: f64,
        side: Side,
        lo: f64,
        hi: f64,
    },
    /// Total mass `mass` spread uniformly over `(lo, hi)`, not straddling 0.
    Uniform { lo: f64, hi: f64, mass: f64 },
    /// `mass · rate · e^{−rate |x|}` on one side.
    Exponential { mass: f64, rate: f64, side: Side },
    Tabulated(Arc<TabulatedDensity>),
    /// Image of `inner` under a monotone jump map.
    Mapped { inner: Box<DensityPart>, map: JumpMap },
}

fn power_mass(coef: f64, alpha: f64, m1: f64, m2: f64) -> f64 {
    if m1 >= m2 {
        return 0.0;
    }
    if alpha == 0.0 {
        coef * (m2 / m1).ln()
    } else {
        coef / alpha * (m1.powf(-alpha) - m2.powf(-alpha))
    }
}

impl DensityPart {
    pub fn power_law(coef: f64, alpha: f64, side: Side, lo: f64, hi: f64) -> Result<Self> {
        if !(coef > 0.0 && alpha.is_finite() && alpha < 2.0 && lo >= 0.0 && hi > lo) {
            return Err(Error::domain(format!(
                "invalid power-law part: coef {coef}, alpha {alpha}, range ({lo}, {hi})"
            )));
        }
        if hi.is_infinite() && alpha <= 0.0 {
            return Err(Error::domain("power-law part with alpha ≤ 0 needs a finite upper cutoff"));
        }
        Ok(DensityPart::PowerLaw { coef, alpha, side, lo, hi })
    }

    pub fn uniform(lo: f64, hi: f64, mass: f64) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite() && mass > 0.0) || (lo < 0.0 && hi > 0.0) {
            return Err(Error::domain(format!(
                "invalid uniform part on ({lo}, {hi}) with mass {mass}"
            )));
        }
        Ok(DensityPart::Uniform { lo, hi, mass })
    }

    pub fn exponential(mass: f64, rate: f64, side: Side) -> Result<Self> {
        if !(mass > 0.0 && rate > 0.0) {
            return Err(Error::domain("exponential part needs positive mass and rate"));
        }
        Ok(DensityPart::Exponential { mass, rate, side })
    }

    /// Pushes `inner` forward through `map`, collapsing a map followed by its inverse.
    pub fn mapped(inner: DensityPart, map: JumpMap) -> DensityPart {
        if let DensityPart::Mapped { inner: ref base, map: prev } = inner {
            if prev.inverse() == map {
                return (**base).clone();
            }
        }
        DensityPart::Mapped {
            inner: Box::new(inner),
            map,
        }
    }

    /// Signed support interval `(lo, hi)`.
    pub fn support(&self) -> (f64, f64) {
        match self {
            DensityPart::PowerLaw { side, lo, hi, .. } => match side {
                Side::Positive => (*lo, *hi),
                Side::Negative => (-*hi, -*lo),
            },
            DensityPart::Uniform { lo, hi, .. } => (*lo, *hi),
            DensityPart::Exponential { side, .. } => match side {
                Side::Positive => (0.0, f64::INFINITY),
                Side::Negative => (f64::NEG_INFINITY, 0.0),
            },
            DensityPart::Tabulated(t) => t.support(),
            DensityPart::Mapped { inner, map } => {
                let (a, b) = inner.support();
                map.image(a, b)
            }
        }
    }

    pub fn side(&self) -> Side {
        let (lo, hi) = self.support();
        if lo >= 0.0 || (hi > 0.0 && lo > -hi) {
            Side::Positive
        } else {
            Side::Negative
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x > lo && x < hi) {
            return 0.0;
        }
        match self {
            DensityPart::PowerLaw { coef, alpha, .. } => coef * x.abs().powf(-1.0 - alpha),
            DensityPart::Uniform { lo, hi, mass } => mass / (hi - lo),
            DensityPart::Exponential { mass, rate, .. } => mass * rate * (-rate * x.abs()).exp(),
            DensityPart::Tabulated(t) => t.density(x),
            DensityPart::Mapped { inner, map } => {
                let pre = map.inverse().apply(x);
                let d = if pre.is_finite() { inner.density(pre) } else { 0.0 };
                if d == 0.0 {
                    0.0
                } else {
                    d * map.inverse_jacobian(x)
                }
            }
        }
    }

    /// Mass on the signed interval `(a, b)`.
    pub fn mass_in(&self, a: f64, b: f64) -> f64 {
        let (slo, shi) = self.support();
        let (a, b) = (a.max(slo), b.min(shi));
        if !(a < b) {
            return 0.0;
        }
        match self {
            DensityPart::PowerLaw { coef, alpha, side, .. } => {
                let (m1, m2) = match side {
                    Side::Positive => (a, b),
                    Side::Negative => (-b, -a),
                };
                power_mass(*coef, *alpha, m1, m2)
            }
            DensityPart::Uniform { lo, hi, mass } => mass * (b - a) / (hi - lo),
            DensityPart::Exponential { mass, rate, side } => {
                let (m1, m2) = match side {
                    Side::Positive => (a, b),
                    Side::Negative => (-b, -a),
                };
                mass * ((-rate * m1).exp() - (-rate * m2).exp())
            }
            DensityPart::Tabulated(t) => t.cumulative(b) - t.cumulative(a),
            DensityPart::Mapped { inner, map } => {
                let inv = map.inverse();
                let (pa, pb) = inv.image(a, b);
                inner.mass_in(pa, pb)
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.mass_in(f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Whether the part carries infinite mass near the origin.
    pub fn infinite_near_zero(&self) -> bool {
        self.total_mass().is_infinite()
    }

    /// Draws the point of `(a, b) ∩ support` whose mass from the lower end is
    /// `u` times the interval mass. `u ∈ (0, 1)`.
    pub fn quantile_in(&self, a: f64, b: f64, u: f64) -> Result<f64> {
        let (slo, shi) = self.support();
        let (a, b) = (a.max(slo), b.min(shi));
        if !(a < b) {
            return Err(Error::domain("quantile requested on an empty interval"));
        }
        let x = match self {
            DensityPart::PowerLaw { alpha, side, .. } => {
                // measured from the lower magnitude, which is the upper end on the negative side
                let (m1, m2, u) = match side {
                    Side::Positive => (a, b, u),
                    Side::Negative => (-b, -a, 1.0 - u),
                };
                let m = if *alpha == 0.0 {
                    m1 * (m2 / m1).powf(u)
                } else {
                    let p1 = m1.powf(-alpha);
                    let p2 = m2.powf(-alpha);
                    (p1 - u * (p1 - p2)).powf(-1.0 / alpha)
                };
                side.sign() * m
            }
            DensityPart::Uniform { .. } => a + u * (b - a),
            DensityPart::Exponential { rate, side, .. } => {
                let (m1, m2, u) = match side {
                    Side::Positive => (a, b, u),
                    Side::Negative => (-b, -a, 1.0 - u),
                };
                let span = -(-rate * (m2 - m1)).exp_m1();
                let m = m1 - (-u * span).ln_1p() / rate;
                side.sign() * m
            }
            DensityPart::Tabulated(t) => {
                let base = t.cumulative(a);
                let target = base + u * (t.cumulative(b) - base);
                bisect(|x| t.cumulative(x) - target, a, b)?
            }
            DensityPart::Mapped { inner, map } => {
                let inv = map.inverse();
                let (pa, pb) = inv.image(a, b);
                // An increasing map keeps the orientation of u; a decreasing one flips it.
                let increasing = map.apply(pa) <= map.apply(pb);
                let uu = if increasing { u } else { 1.0 - u };
                map.apply(inner.quantile_in(pa, pb, uu)?)
            }
        };
        if !x.is_finite() {
            return Err(Error::numeric_with("jump quantile is not finite", x, u));
        }
        Ok(x)
    }

    /// `∫ f(x) density(x) dx` over `(a, b) ∩ support`; the range must be finite.
    pub fn integrate(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64, cfg: &QuadConfig) -> Result<f64> {
        let (slo, shi) = self.support();
        let (a, b) = (a.max(slo), b.min(shi));
        if !(a < b) {
            return Ok(0.0);
        }
        match self {
            DensityPart::Tabulated(t) => {
                let breaks: Vec<f64> = t.nodes().to_vec();
                crate::quad::integrate_with_breaks(|x| f(x) * self.density(x), a, b, &breaks, cfg)
            }
            _ => integrate(|x| f(x) * self.density(x), a, b, cfg),
        }
    }

    /// A few representative support points (used for curve-support probes).
    pub fn probe_points(&self, count: usize) -> Vec<f64> {
        let (lo, hi) = self.support();
        let lo_f = if lo.is_finite() { lo } else { hi.min(0.0) - 50.0 };
        let hi_f = if hi.is_finite() { hi } else { lo.max(0.0) + 50.0 };
        (1..=count)
            .map(|i| lo_f + (hi_f - lo_f) * i as f64 / (count + 1) as f64)
            .filter(|x| *x != 0.0 && self.density(*x) > 0.0)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_mass_and_quantile() {
        let p = DensityPart::power_law(1.0, 0.5, Side::Positive, 0.0, f64::INFINITY).unwrap();
        assert!((p.mass_in(1.0, f64::INFINITY) - 2.0).abs() < 1e-15);
        assert!(p.total_mass().is_infinite());
        let x = p.quantile_in(0.01, 4.0, 0.5).unwrap();
        let half = p.mass_in(0.01, 4.0) * 0.5;
        assert!((p.mass_in(0.01, x) - half).abs() < 1e-12);
    }

    #[test]
    fn negative_side_power_law() {
        let p = DensityPart::power_law(2.0, 1.0, Side::Negative, 1.0, 2.0).unwrap();
        assert_eq!(p.support(), (-2.0, -1.0));
        assert!((p.total_mass() - 1.0).abs() < 1e-15);
        let x = p.quantile_in(-5.0, 0.0, 0.3).unwrap();
        assert!((-2.0..=-1.0).contains(&x));
    }

    #[test]
    fn exponential_quantile_inverts_mass() {
        let p = DensityPart::exponential(3.0, 2.0, Side::Negative).unwrap();
        let x = p.quantile_in(f64::NEG_INFINITY, -0.1, 0.25).unwrap();
        let m = p.mass_in(f64::NEG_INFINITY, -0.1);
        assert!((p.mass_in(f64::NEG_INFINITY, x) - 0.25 * m).abs() < 1e-12);
    }

    #[test]
    fn tabulated_cumulative_is_exact_for_linear_density() {
        let t = TabulatedDensity::new(vec![1.0, 3.0], vec![0.0, 2.0]).unwrap();
        let p = DensityPart::Tabulated(Arc::new(t));
        assert!((p.total_mass() - 2.0).abs() < 1e-15);
        assert!((p.mass_in(1.0, 2.0) - 0.5).abs() < 1e-15);
        let q = p.quantile_in(1.0, 3.0, 0.25).unwrap();
        assert!((q - 2.0).abs() < 1e-9);
    }

    #[test]
    fn mapped_part_preserves_mass_and_collapses() {
        let base = DensityPart::uniform(0.0, 0.5, 1.0).unwrap();
        let img = DensityPart::mapped(base.clone(), JumpMap::LogDoleans { k: 1.0 });
        let (lo, hi) = img.support();
        assert!(lo.abs() < 1e-15 && (hi - 2f64.ln()).abs() < 1e-15);
        assert!((img.total_mass() - 1.0).abs() < 1e-14);
        let back = DensityPart::mapped(img.clone(), JumpMap::Curve { k: 1.0 });
        assert_eq!(back, base);
        // density integrates to the mass
        let cfg = QuadConfig::default();
        let m = img.integrate(&|_| 1.0, lo, hi, &cfg).unwrap();
        assert!((m - 1.0).abs() < 1e-9);
    }

    #[test]
    fn decreasing_map_quantile() {
        let base = DensityPart::uniform(0.0, 1.0, 1.0).unwrap();
        let img = DensityPart::mapped(base, JumpMap::Curve { k: -2.0 });
        let (lo, hi) = img.support();
        assert!(lo < hi && hi <= 0.0);
        let q = img.quantile_in(lo, hi, 0.3).unwrap();
        assert!((img.mass_in(lo, q) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn invalid_parts_rejected() {
        assert!(DensityPart::uniform(-1.0, 1.0, 1.0).is_err());
        assert!(DensityPart::power_law(1.0, 2.5, Side::Positive, 0.0, 1.0).is_err());
        assert!(DensityPart::power_law(1.0, -0.5, Side::Positive, 1.0, f64::INFINITY).is_err());
        assert!(TabulatedDensity::new(vec![-1.0, 1.0], vec![1.0, 1.0]).is_err());
    }
}
