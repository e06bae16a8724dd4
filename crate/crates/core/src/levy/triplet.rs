//! Characteristic triplets in one and two dimensions, truncation `1_{|z| ≤ 1}`.

use serde::{Deserialize, Serialize};

use super::density::{DensityPart, JumpMap};
use super::measure::{Atom, Integrand, IntegrationConfig, LevyMeasure1D, Region, SmallJumpVariation};
use crate::error::{Error, Result};
use crate::quad::{bisect, integrate_with_breaks};

/// Existence and sign of `E ξ₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mean {
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
    Undefined,
}

/// A one-dimensional characteristic triplet.
#[derive(Debug, Clone)]
pub struct LevyTriplet1D {
    pub gamma: f64,
    pub sigma2: f64,
    pub measure: LevyMeasure1D,
    /// `gamma − ∫_{|z|≤1} z Π(dz)`, present when small jumps have finite variation.
    pub drift_bv: Option<f64>,
}

impl LevyTriplet1D {
    pub fn new(gamma: f64, sigma2: f64, measure: LevyMeasure1D) -> Result<Self> {
        Self::with_config(gamma, sigma2, measure, &IntegrationConfig::default())
    }

    pub fn with_config(gamma: f64, sigma2: f64, measure: LevyMeasure1D, cfg: &IntegrationConfig) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::domain(format!("gamma must be finite, got {gamma}")));
        }
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return Err(Error::domain(format!("sigma2 must be finite and non-negative, got {sigma2}")));
        }
        measure.validate(cfg)?;
        if gamma == 0.0 && sigma2 == 0.0 && measure.is_zero() {
            return Err(Error::domain("the zero triplet is not admissible"));
        }
        let drift_bv = match measure.small_jump_variation(cfg)? {
            SmallJumpVariation::FiniteVariation => Some(gamma - small_jump_mean(&measure, cfg)?),
            SmallJumpVariation::InfiniteVariation => None,
        };
        Ok(LevyTriplet1D {
            gamma,
            sigma2,
            measure,
            drift_bv,
        })
    }

    /// Builds a finite-variation triplet from its true drift.
    pub fn from_bv_drift(drift: f64, sigma2: f64, measure: LevyMeasure1D) -> Result<Self> {
        let cfg = IntegrationConfig::default();
        if measure.small_jump_variation(&cfg)? != SmallJumpVariation::FiniteVariation {
            return Err(Error::domain("a true drift needs small jumps of finite variation"));
        }
        let gamma = drift + small_jump_mean(&measure, &cfg)?;
        Self::with_config(gamma, sigma2, measure, &cfg)
    }

    pub fn drift(gamma: f64) -> Result<Self> {
        Self::new(gamma, 0.0, LevyMeasure1D::zero())
    }

    pub fn brownian(drift: f64, sigma2: f64) -> Result<Self> {
        Self::new(drift, sigma2, LevyMeasure1D::zero())
    }

    pub fn is_pure_jump_cpp(&self) -> bool {
        self.sigma2 == 0.0 && matches!(self.measure.activity(), super::measure::Activity::Finite(_))
    }

    pub fn is_subordinator(&self) -> bool {
        self.sigma2 == 0.0
            && !self.measure.has_negative_jumps()
            && self.drift_bv.is_some_and(|d| d >= 0.0)
    }

    /// `E ξ₁ = γ + ∫_{|x|>1} x Π(dx)`, or the sign of the divergent tail.
    pub fn mean(&self, cfg: &IntegrationConfig) -> Result<Mean> {
        let m = &self.measure;
        let pos = m.integrate_against(Integrand::Plain(&|x| x), Region::Interval { lo: 1.0, hi: f64::INFINITY }, cfg)?;
        let neg = m.integrate_against(
            Integrand::Plain(&|x: f64| -x),
            Region::HalfOpen { lo: f64::NEG_INFINITY, hi: -1.0 },
            cfg,
        )?;
        Ok(match (pos.is_finite(), neg.is_finite()) {
            (true, true) => Mean::Finite(self.gamma + pos - neg),
            (false, true) => Mean::PlusInfinity,
            (true, false) => Mean::MinusInfinity,
            (false, false) => Mean::Undefined,
        })
    }

    /// `A_ξ(y) = 1 + ∫_1^y Π((z, ∞)) dz` for `y ≥ 1`.
    pub fn a_xi(&self, y: f64, cfg: &IntegrationConfig) -> Result<f64> {
        if !(y >= 1.0) {
            return Err(Error::domain(format!("A_xi needs y >= 1, got {y}")));
        }
        let m = &self.measure;
        if y == 1.0 || m.tail_plus(1.0) == 0.0 {
            return Ok(1.0);
        }
        if y.is_infinite() {
            return Err(Error::domain("A_xi evaluated at infinity"));
        }
        let mut breaks: Vec<f64> = m.atoms.iter().map(|a| a.loc).filter(|&x| x > 1.0).collect();
        for p in &m.parts {
            let (lo, hi) = p.support();
            breaks.extend([lo, hi].into_iter().filter(|x| x.is_finite()));
            if let DensityPart::Tabulated(t) = p {
                breaks.extend_from_slice(t.nodes());
            }
        }
        for s in &m.sequences {
            if s.sign > 0.0 {
                for n in s.first..s.first + 64 {
                    let (u, _) = s.term(n);
                    if u > y.ln() {
                        break;
                    }
                    breaks.push(u.exp());
                }
            }
        }
        let v = integrate_with_breaks(|z| m.tail_plus(z), 1.0, y, &breaks, &cfg.quad)?;
        Ok(1.0 + v)
    }
}

/// `∫_{|z|≤1} z Π(dz)`, finite for measures of finite variation.
fn small_jump_mean(m: &LevyMeasure1D, cfg: &IntegrationConfig) -> Result<f64> {
    let pos = m.integrate_against(Integrand::Plain(&|x| x), Region::Interval { lo: 0.0, hi: 1.0 }, cfg)?;
    let neg = m.integrate_against(Integrand::Plain(&|x: f64| -x), Region::Closed { lo: -1.0, hi: 0.0 }, cfg)?;
    if !(pos.is_finite() && neg.is_finite()) {
        return Err(Error::domain("small jumps have infinite variation"));
    }
    Ok(pos - neg)
}

/// `∫_{[a1,a2]} f dΠ − ∫_{[b1,b2]} f dΠ` for closed intervals around 0, computed
/// on the symmetric difference so that neither integral needs to exist alone.
fn interval_difference(
    m: &LevyMeasure1D,
    f: &(dyn Fn(f64) -> f64 + Sync),
    a: (f64, f64),
    b: (f64, f64),
    cfg: &IntegrationConfig,
) -> Result<f64> {
    let mut s = 0.0;
    if a.0 < b.0 {
        s += m.integrate_against(Integrand::Plain(f), Region::HalfOpen { lo: a.0, hi: b.0 }, cfg)?;
    } else if b.0 < a.0 {
        s -= m.integrate_against(Integrand::Plain(f), Region::HalfOpen { lo: b.0, hi: a.0 }, cfg)?;
    }
    if a.1 > b.1 {
        s += m.integrate_against(Integrand::Plain(f), Region::Interval { lo: b.1, hi: a.1 }, cfg)?;
    } else if b.1 > a.1 {
        s -= m.integrate_against(Integrand::Plain(f), Region::Interval { lo: a.1, hi: b.1 }, cfg)?;
    }
    if !s.is_finite() {
        return Err(Error::numeric("truncation correction is not finite"));
    }
    Ok(s)
}

/// A point mass of a bivariate Lévy measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointAtom {
    pub x: f64,
    pub y: f64,
    pub mass: f64,
}

/// A bivariate Lévy measure for the pair (ξ, η).
#[derive(Debug, Clone)]
pub enum LevyMeasure2D {
    /// ξ and η never jump together.
    ProductIndependent { xi: LevyMeasure1D, eta: LevyMeasure1D },
    JointAtoms(Vec<JointAtom>),
    /// Mass on `{(x, k(1 − e^{−x}))}`, with `base` the distribution of the x-coordinate.
    CurveSupported { k: f64, base: LevyMeasure1D },
}

/// The x-interval `{x : x² + k²(1 − e^{−x})² ≤ 1}`.
pub fn curve_region(k: f64) -> Result<(f64, f64)> {
    if !(k.is_finite() && k != 0.0) {
        return Err(Error::domain(format!("curve parameter must be finite and non-zero, got {k}")));
    }
    let h = |x: f64| {
        let y = k * (-x).exp_m1();
        x * x + y * y - 1.0
    };
    Ok((bisect(h, -1.0, 0.0)?, bisect(h, 0.0, 1.0)?))
}

/// The x-interval `{x : |k(1 − e^{−x})| ≤ 1}`.
fn curve_eta_unit(k: f64) -> (f64, f64) {
    let r = 1.0 / k.abs();
    let lo = -r.ln_1p();
    let hi = if r >= 1.0 { f64::INFINITY } else { -(-r).ln_1p() };
    (lo, hi)
}

fn curve_y(k: f64, x: f64) -> f64 {
    -k * (-x).exp_m1()
}

impl LevyMeasure2D {
    pub fn curve(k: f64, base: LevyMeasure1D) -> Result<Self> {
        curve_region(k)?;
        if !base.sequences.is_empty() {
            return Err(Error::domain("curve-supported measures take atoms and densities only"));
        }
        Ok(LevyMeasure2D::CurveSupported { k, base })
    }

    pub fn joint_atoms(atoms: Vec<JointAtom>) -> Result<Self> {
        for a in &atoms {
            if !(a.x.is_finite() && a.y.is_finite() && (a.x, a.y) != (0.0, 0.0) && a.mass > 0.0 && a.mass.is_finite()) {
                return Err(Error::domain(format!("joint atom {a:?} is not admissible")));
            }
        }
        Ok(LevyMeasure2D::JointAtoms(atoms))
    }

    /// The (ξ, η) marginal measures.
    pub fn marginal_tails(&self) -> Result<(LevyMeasure1D, LevyMeasure1D)> {
        match self {
            LevyMeasure2D::ProductIndependent { xi, eta } => Ok((xi.clone(), eta.clone())),
            LevyMeasure2D::JointAtoms(atoms) => {
                let xs = atoms.iter().filter(|a| a.x != 0.0).map(|a| Atom { loc: a.x, mass: a.mass }).collect();
                let ys = atoms.iter().filter(|a| a.y != 0.0).map(|a| Atom { loc: a.y, mass: a.mass }).collect();
                Ok((LevyMeasure1D::from_atoms(xs)?, LevyMeasure1D::from_atoms(ys)?))
            }
            LevyMeasure2D::CurveSupported { k, base } => {
                let atoms = base.atoms.iter().map(|a| Atom { loc: curve_y(*k, a.loc), mass: a.mass }).collect();
                let parts = base
                    .parts
                    .iter()
                    .map(|p| DensityPart::mapped(p.clone(), JumpMap::Curve { k: *k }))
                    .collect();
                Ok((base.clone(), LevyMeasure1D::new(atoms, parts)?))
            }
        }
    }

    /// Points on the support, as `(x, y)` pairs, for curve probes.
    pub fn support_probe(&self, per_part: usize) -> Result<Vec<(f64, f64)>> {
        Ok(match self {
            LevyMeasure2D::ProductIndependent { xi, eta } => xi
                .probe_points(per_part)
                .into_iter()
                .map(|x| (x, 0.0))
                .chain(eta.probe_points(per_part).into_iter().map(|y| (0.0, y)))
                .collect(),
            LevyMeasure2D::JointAtoms(atoms) => atoms.iter().map(|a| (a.x, a.y)).collect(),
            LevyMeasure2D::CurveSupported { k, base } => base
                .probe_points(per_part)
                .into_iter()
                .map(|x| (x, curve_y(*k, x)))
                .collect(),
        })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            LevyMeasure2D::ProductIndependent { xi, eta } => xi.is_zero() && eta.is_zero(),
            LevyMeasure2D::JointAtoms(a) => a.is_empty(),
            LevyMeasure2D::CurveSupported { base, .. } => base.is_zero(),
        }
    }
}

/// A bivariate characteristic triplet for (ξ, η).
#[derive(Debug, Clone)]
pub struct LevyTriplet2D {
    pub gamma: [f64; 2],
    pub sigma: [[f64; 2]; 2],
    pub measure: LevyMeasure2D,
}

impl LevyTriplet2D {
    pub fn new(gamma: [f64; 2], sigma: [[f64; 2]; 2], measure: LevyMeasure2D) -> Result<Self> {
        if !gamma.iter().all(|g| g.is_finite()) || !sigma.iter().flatten().all(|s| s.is_finite()) {
            return Err(Error::domain("triplet entries must be finite"));
        }
        let scale = sigma[0][0].abs().max(sigma[1][1].abs()).max(1.0);
        if (sigma[0][1] - sigma[1][0]).abs() > 1e-12 * scale {
            return Err(Error::domain("Sigma is not symmetric"));
        }
        let (l1, l2) = eigenvalues(&sigma);
        if l1.min(l2) < -1e-12 * scale {
            return Err(Error::domain(format!("Sigma is not positive semi-definite (eigenvalues {l1}, {l2})")));
        }
        let t = LevyTriplet2D { gamma, sigma, measure };
        let (mx, my) = t.measure.marginal_tails()?;
        let cfg = IntegrationConfig::default();
        mx.validate(&cfg)?;
        my.validate(&cfg)?;
        if gamma[0] == 0.0 && sigma[0][0] == 0.0 && mx.is_zero() {
            return Err(Error::domain("xi is the zero process"));
        }
        if gamma[1] == 0.0 && sigma[1][1] == 0.0 && my.is_zero() {
            return Err(Error::domain("eta is the zero process"));
        }
        Ok(t)
    }

    /// Independent pair from two one-dimensional triplets.
    pub fn independent(xi: &LevyTriplet1D, eta: &LevyTriplet1D) -> Result<Self> {
        Self::new(
            [xi.gamma, eta.gamma],
            [[xi.sigma2, 0.0], [0.0, eta.sigma2]],
            LevyMeasure2D::ProductIndependent {
                xi: xi.measure.clone(),
                eta: eta.measure.clone(),
            },
        )
    }

    /// Symmetric square root of Sigma.
    pub fn sigma_sqrt(&self) -> [[f64; 2]; 2] {
        sym_sqrt(&self.sigma)
    }

    pub fn xi_marginal(&self, cfg: &IntegrationConfig) -> Result<LevyTriplet1D> {
        let (mx, _) = self.measure.marginal_tails()?;
        let gamma = self.gamma[0] + self.gamma_correction(0, cfg)?;
        LevyTriplet1D::with_config(gamma, self.sigma[0][0], mx, cfg)
    }

    pub fn eta_marginal(&self, cfg: &IntegrationConfig) -> Result<LevyTriplet1D> {
        let (_, my) = self.measure.marginal_tails()?;
        let gamma = self.gamma[1] + self.gamma_correction(1, cfg)?;
        LevyTriplet1D::with_config(gamma, self.sigma[1][1], my, cfg)
    }

    /// `∫ z_i (1{|z_i| ≤ 1} − 1{|z| ≤ 1}) Π(dz)`: the shift between the joint
    /// and the marginal truncation.
    fn gamma_correction(&self, i: usize, cfg: &IntegrationConfig) -> Result<f64> {
        match &self.measure {
            LevyMeasure2D::ProductIndependent { .. } => Ok(0.0),
            LevyMeasure2D::JointAtoms(atoms) => Ok(atoms
                .iter()
                .map(|a| {
                    let z = if i == 0 { a.x } else { a.y };
                    let marg = if z.abs() <= 1.0 { 1.0 } else { 0.0 };
                    let joint = if a.x.hypot(a.y) <= 1.0 { 1.0 } else { 0.0 };
                    z * (marg - joint) * a.mass
                })
                .sum()),
            LevyMeasure2D::CurveSupported { k, base } => {
                let k = *k;
                let region = curve_region(k)?;
                if i == 0 {
                    interval_difference(base, &|x| x, (-1.0, 1.0), region, cfg)
                } else {
                    interval_difference(base, &move |x| curve_y(k, x), curve_eta_unit(k), region, cfg)
                }
            }
        }
    }

    pub fn sigma_xi2(&self) -> f64 {
        self.sigma[0][0]
    }
}

fn eigenvalues(s: &[[f64; 2]; 2]) -> (f64, f64) {
    let tr = s[0][0] + s[1][1];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    (0.5 * tr - disc, 0.5 * tr + disc)
}

// sqrt(A) = (A + √det · I) / √(tr + 2√det) for 2×2 PSD A.
pub(crate) fn sym_sqrt(a: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = (a[0][0] * a[1][1] - a[0][1] * a[1][0]).max(0.0);
    let s = det.sqrt();
    let t = (a[0][0] + a[1][1] + 2.0 * s).sqrt();
    if t == 0.0 {
        return [[0.0; 2]; 2];
    }
    [[(a[0][0] + s) / t, a[0][1] / t], [a[1][0] / t, (a[1][1] + s) / t]]
}

/// Builds the pair (ξ, η) with `e^{−ξ} = 𝓔(−η/k)`, so that
/// `∫_0^t e^{−ξ_{s−}} dη_s = k(1 − e^{−ξ_t})`.
pub fn doleans_xi_from_eta(eta: &LevyTriplet1D, k: f64, cfg: &IntegrationConfig) -> Result<LevyTriplet2D> {
    curve_region(k)?;
    let m = &eta.measure;
    if !m.sequences.is_empty() {
        return Err(Error::domain("atom sequences are not supported in the Doléans construction"));
    }
    let beyond = if k > 0.0 { (k, f64::INFINITY) } else { (f64::NEG_INFINITY, k) };
    let offending: f64 = m.atoms.iter().filter(|a| a.loc / k >= 1.0).map(|a| a.mass).sum::<f64>()
        + m.parts.iter().map(|p| p.mass_in(beyond.0, beyond.1)).sum::<f64>();
    if offending > 0.0 {
        return Err(Error::domain(format!(
            "eta puts mass {offending} on {{y : y/k >= 1}} for k = {k}"
        )));
    }
    let map = JumpMap::LogDoleans { k };
    let atoms = m.atoms.iter().map(|a| Atom { loc: map.apply(a.loc), mass: a.mass }).collect();
    let parts = m.parts.iter().map(|p| DensityPart::mapped(p.clone(), map)).collect();
    let base = LevyMeasure1D::new(atoms, parts)?;

    let sxi2 = eta.sigma2 / (k * k);
    let region = curve_region(k)?;
    let shift = interval_difference(&base, &move |x| curve_y(k, x), curve_eta_unit(k), region, cfg)?;
    let gamma2 = eta.gamma - shift;
    let claim = base.integrate_against(
        Integrand::Plain(&|x: f64| (-x).exp_m1() + x),
        Region::Closed { lo: region.0, hi: region.1 },
        cfg,
    )?;
    let gamma1 = gamma2 / k + 0.5 * sxi2 + claim;
    // σ_ξη and σ_η² are written from σ_η² directly so the rank-one pattern holds to rounding.
    let sigma = [[sxi2, eta.sigma2 / k], [eta.sigma2 / k, eta.sigma2]];
    LevyTriplet2D::new([gamma1, gamma2], sigma, LevyMeasure2D::curve(k, base)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::density::Side;

    fn cfg() -> IntegrationConfig {
        IntegrationConfig::default()
    }

    #[test]
    fn a_xi_piecewise_constant_tail() {
        let m = LevyMeasure1D::from_atoms(vec![Atom { loc: 2.0, mass: 3.0 }]).unwrap();
        let t = LevyTriplet1D::new(0.0, 0.0, m).unwrap();
        let v = t.a_xi(1.5, &cfg()).unwrap();
        assert!((v - 2.5).abs() < 1e-12);
        assert_eq!(t.a_xi(3.0, &cfg()).unwrap(), 1.0 + 3.0);

        let m = LevyMeasure1D::from_atoms(vec![Atom { loc: 1.0, mass: 2.0 }]).unwrap();
        let t = LevyTriplet1D::new(0.0, 0.0, m).unwrap();
        assert_eq!(t.a_xi(3.0, &cfg()).unwrap(), 1.0);
        assert_eq!(LevyTriplet1D::drift(1.0).unwrap().a_xi(10.0, &cfg()).unwrap(), 1.0);
        assert!(t.a_xi(0.5, &cfg()).is_err());
    }

    #[test]
    fn a_xi_exponential_tail_closed_form() {
        // Π((z,∞)) = e^{−z}: A(y) = 1 + e^{−1} − e^{−y}
        let p = DensityPart::exponential(1.0, 1.0, Side::Positive).unwrap();
        let t = LevyTriplet1D::new(0.0, 0.0, LevyMeasure1D::from_parts(vec![p]).unwrap()).unwrap();
        for y in [1.0, 2.0, 7.5, 40.0] {
            let v = t.a_xi(y, &cfg()).unwrap();
            let want = 1.0 + (-1f64).exp() - (-y).exp();
            assert!((v - want).abs() < 1e-10, "{y}: {v} vs {want}");
        }
    }

    #[test]
    fn bv_drift_and_mean() {
        let m = LevyMeasure1D::from_atoms(vec![Atom { loc: 0.5, mass: 2.0 }, Atom { loc: 3.0, mass: 1.0 }]).unwrap();
        let t = LevyTriplet1D::from_bv_drift(1.0, 0.0, m).unwrap();
        assert!((t.gamma - 2.0).abs() < 1e-15);
        assert_eq!(t.drift_bv, Some(1.0));
        assert_eq!(t.mean(&cfg()).unwrap(), Mean::Finite(5.0));
        assert!(t.is_subordinator());
        assert!(LevyTriplet1D::drift(0.0).is_err());
    }

    #[test]
    fn curve_marginal_image() {
        let base = LevyMeasure1D::from_atoms(vec![Atom { loc: 2f64.ln(), mass: 1.0 }]).unwrap();
        let m = LevyMeasure2D::curve(1.0, base).unwrap();
        let (_, eta) = m.marginal_tails().unwrap();
        assert_eq!(eta.atoms.len(), 1);
        assert!((eta.atoms[0].loc - 0.5).abs() < 1e-15);
        assert_eq!(eta.atoms[0].mass, 1.0);
    }

    #[test]
    fn joint_atom_projection() {
        let m = LevyMeasure2D::joint_atoms(vec![JointAtom { x: 1.0, y: 2.0, mass: 0.7 }]).unwrap();
        let (x, y) = m.marginal_tails().unwrap();
        assert_eq!(x.atoms, vec![Atom { loc: 1.0, mass: 0.7 }]);
        assert_eq!(y.atoms, vec![Atom { loc: 2.0, mass: 0.7 }]);
    }

    #[test]
    fn curve_region_boundary() {
        for k in [-5.0, -0.3, 0.1, 1.0, 4.0] {
            let (lo, hi) = curve_region(k).unwrap();
            for x in [lo, hi] {
                let y = curve_y(k, x);
                assert!((x * x + y * y - 1.0).abs() < 1e-12);
            }
            assert!(lo < 0.0 && hi > 0.0);
        }
    }

    #[test]
    fn doleans_brownian_eta() {
        let eta = LevyTriplet1D::brownian(0.0, 1.0).unwrap();
        let t = doleans_xi_from_eta(&eta, 1.0, &cfg()).unwrap();
        assert_eq!(t.sigma, [[1.0, 1.0], [1.0, 1.0]]);
        assert!((t.gamma[0] - 0.5).abs() < 1e-15);
        assert!(t.measure.is_zero());
    }

    #[test]
    fn doleans_cpp_eta() {
        let m = LevyMeasure1D::from_atoms(vec![Atom { loc: 0.5, mass: 1.0 }]).unwrap();
        let eta = LevyTriplet1D::new(0.5, 0.0, m).unwrap();
        let t = doleans_xi_from_eta(&eta, 1.0, &cfg()).unwrap();
        let LevyMeasure2D::CurveSupported { base, .. } = &t.measure else {
            panic!("expected a curve measure")
        };
        assert!((base.atoms[0].loc - 2f64.ln()).abs() < 1e-15);
        assert_eq!(t.sigma_xi2(), 0.0);
        // the η-marginal recovers the original triplet
        let back = t.eta_marginal(&cfg()).unwrap();
        assert!((back.gamma - 0.5).abs() < 1e-14);
        assert!((back.measure.atoms[0].loc - 0.5).abs() < 1e-15);
    }

    #[test]
    fn doleans_rejects_big_jumps() {
        let m = LevyMeasure1D::from_atoms(vec![Atom { loc: 2.0, mass: 1.0 }]).unwrap();
        let eta = LevyTriplet1D::new(0.0, 0.0, m).unwrap();
        let err = doleans_xi_from_eta(&eta, 1.0, &cfg()).unwrap_err();
        assert!(err.to_string().contains("mass 1"), "{err}");
    }

    #[test]
    fn non_psd_sigma_rejected() {
        let r = LevyTriplet2D::new(
            [1.0, 1.0],
            [[1.0, 2.0], [2.0, 1.0]],
            LevyMeasure2D::ProductIndependent { xi: LevyMeasure1D::zero(), eta: LevyMeasure1D::zero() },
        );
        assert!(r.is_err());
    }

    #[test]
    fn rank_one_sqrt_rows_coincide() {
        let s = sym_sqrt(&[[1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(s[0], s[1]);
        let s = sym_sqrt(&[[2.0, 0.5], [0.5, 1.0]]);
        let p00 = s[0][0] * s[0][0] + s[0][1] * s[1][0];
        let p01 = s[0][0] * s[0][1] + s[0][1] * s[1][1];
        assert!((p00 - 2.0).abs() < 1e-14 && (p01 - 0.5).abs() < 1e-14);
    }
}
