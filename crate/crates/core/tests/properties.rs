use std::sync::Arc;

use proptest::prelude::*;

use levy_atoms::criteria::{check_convergence, check_degenerate, ConvergenceVerdict, DegeneracyTolerances};
use levy_atoms::exfun::{integrate_g, GDescriptor, GFlags, YProcessSpec};
use levy_atoms::levy::{
    doleans_xi_from_eta, Atom, DensityPart, Integrand, IntegrationConfig, JointAtom, LevyMeasure1D, LevyMeasure2D,
    LevyTriplet1D, LevyTriplet2D, Region, Side,
};
use levy_atoms::path::{simulate_bivariate, RngStream, SimConfig, SimPlan};

fn cfg() -> IntegrationConfig {
    IntegrationConfig::default()
}

/// An η whose jumps y all satisfy y/k < 1.
fn admissible_eta(k: f64, frac_lo: f64, frac_hi: f64, mass: f64, atom: f64, sigma2: f64, gamma: f64) -> LevyTriplet1D {
    let reach = 0.95 * k.abs();
    let (lo, hi) = (frac_lo * reach, (frac_lo + 0.01).max(frac_hi) * reach);
    let (a, b) = if k > 0.0 { (lo, hi) } else { (-hi, -lo) };
    let toward = if k > 0.0 { Side::Negative } else { Side::Positive };
    let m = LevyMeasure1D::new(
        vec![Atom { loc: -k.signum() * atom, mass }],
        vec![
            DensityPart::uniform(a, b, mass).unwrap(),
            DensityPart::exponential(mass, 1.0 + atom, toward).unwrap(),
        ],
    )
    .unwrap();
    LevyTriplet1D::new(gamma, sigma2, m).unwrap()
}

fn k_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![-5.0..-0.1f64, 0.1..5.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn degeneracy_round_trip(
        k in k_strategy(),
        lo in 0.0..0.5f64,
        hi in 0.1..1.0f64,
        mass in 0.1..3.0f64,
        atom in 0.05..4.0f64,
        sigma2 in 0.0..2.0f64,
        gamma in -1.0..1.0f64,
    ) {
        let eta = admissible_eta(k, lo, hi, mass, atom, sigma2, gamma);
        let t = doleans_xi_from_eta(&eta, k, &cfg()).unwrap();
        let d = check_degenerate(&t, &DegeneracyTolerances::default(), &cfg()).unwrap();
        let kk = d.degenerate_k().expect("constructed pair must be degenerate");
        prop_assert!(((kk - k) / k).abs() <= 1e-9);
        prop_assert!(d.gamma_residual.unwrap() <= 1e-9);
    }

    #[test]
    fn a_xi_is_monotone_and_at_least_one(
        alpha in 0.2..1.9f64,
        coef in 0.1..3.0f64,
        atom in 1.0..20.0f64,
        ys in proptest::collection::vec(1.0..1e4f64, 2..6),
    ) {
        let m = LevyMeasure1D::new(
            vec![Atom { loc: atom, mass: 0.5 }],
            vec![DensityPart::power_law(coef, alpha, Side::Positive, 0.0, f64::INFINITY).unwrap()],
        )
        .unwrap();
        let xi = LevyTriplet1D::new(0.0, 0.0, m).unwrap();
        let mut ys = ys;
        ys.sort_by(f64::total_cmp);
        let mut prev = 1.0;
        for y in ys {
            let a = xi.a_xi(y, &cfg()).unwrap();
            prop_assert!(a >= 1.0);
            prop_assert!(a >= prev * (1.0 - 1e-12));
            prev = a;
        }
    }

    #[test]
    fn marginal_tails_match_integration(
        k in k_strategy(),
        mass in 0.1..3.0f64,
        atom in 0.05..4.0f64,
        z in 0.0..3.0f64,
        x in -2.0..2.0f64,
        y in 0.1..2.0f64,
    ) {
        let eta = admissible_eta(k, 0.1, 0.8, mass, atom, 0.0, 0.0);
        let curve = doleans_xi_from_eta(&eta, k, &cfg()).unwrap();
        let joint = LevyTriplet2D::new(
            [0.0, 0.0],
            [[0.0, 0.0], [0.0, 0.0]],
            LevyMeasure2D::joint_atoms(vec![JointAtom { x, y, mass }, JointAtom { x: 1.5, y: -y, mass: 0.3 }]).unwrap(),
        )
        .unwrap();
        for t in [curve, joint] {
            let (mx, my) = t.measure.marginal_tails().unwrap();
            for m in [mx, my] {
                let v = m
                    .integrate_against(Integrand::Plain(&|_| 1.0), Region::Interval { lo: z, hi: f64::INFINITY }, &cfg())
                    .unwrap();
                prop_assert!((v - m.tail_plus(z)).abs() <= 1e-8, "{} vs {}", v, m.tail_plus(z));
            }
        }
    }

    #[test]
    fn heavier_eta_tail_never_helps_convergence(
        alpha in 0.01..1.5f64,
        extra in 0.0..2.0f64,
        drift in prop_oneof![-1.0..-0.01f64, 0.01..1.0f64],
    ) {
        let tail = |c: f64| {
            LevyTriplet1D::new(
                0.0,
                0.0,
                LevyMeasure1D::from_parts(vec![DensityPart::power_law(c, alpha, Side::Positive, 1.0, f64::INFINITY).unwrap()])
                    .unwrap(),
            )
            .unwrap()
        };
        let xi = LevyTriplet1D::drift(drift).unwrap();
        let light = check_convergence(&LevyTriplet2D::independent(&xi, &tail(1.0)).unwrap(), &cfg());
        let heavy = check_convergence(&LevyTriplet2D::independent(&xi, &tail(1.0 + extra)).unwrap(), &cfg());
        if light.verdict == ConvergenceVerdict::Diverges {
            prop_assert_eq!(heavy.verdict, ConvergenceVerdict::Diverges);
        }
    }

    #[test]
    fn curve_jumps_satisfy_the_curve_exactly(k in k_strategy(), seed in 0u64..1000) {
        let eta = admissible_eta(k, 0.1, 0.9, 1.0, 0.5, 0.0, 0.0);
        let t = doleans_xi_from_eta(&eta, k, &cfg()).unwrap();
        let p = simulate_bivariate(&t, 5.0, &SimConfig::default(), RngStream::new(seed, 0)).unwrap();
        for (dx, dy) in p.jumps.iter().flatten() {
            prop_assert_eq!(*dy, -k * (-dx).exp_m1());
        }
    }

    #[test]
    fn g_integral_is_linear_and_monotone(c in -3.0..3.0f64, seed in 0u64..1000) {
        let xi = LevyTriplet1D::new(
            0.5,
            1.0,
            LevyMeasure1D::from_atoms(vec![Atom { loc: 0.7, mass: 1.0 }, Atom { loc: -0.4, mass: 0.5 }]).unwrap(),
        )
        .unwrap();
        let g = GDescriptor::new(
            "bumpish",
            Arc::new(|x: f64| 1.0 / (1.0 + x * x)),
            GFlags { nonneg: true, ..GFlags::default() },
        );
        let y = YProcessSpec::identity();
        let sim = SimConfig::default();
        let plan = SimPlan::univariate(&xi, &sim).unwrap();
        let stream = RngStream::new(seed, 3);
        let mut s = plan.simulator(stream).unwrap();
        let mut prev = 0.0;
        for h in [0.5, 1.0, 2.0, 4.0] {
            s.advance_to(h).unwrap();
            let base = integrate_g(s.grid(), &g, &y, sim.epsilon, stream).unwrap();
            let scaled = integrate_g(s.grid(), &g.scaled(c), &y, sim.epsilon, stream).unwrap();
            prop_assert!((scaled - c * base).abs() <= 1e-12 * (1.0 + base.abs()));
            prop_assert!(base >= prev);
            prev = base;
        }
    }
}
