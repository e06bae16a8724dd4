//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use levy_atoms::catalogue::{Catalogue, OracleDef};
use levy_atoms::criteria::{
    check_convergence, check_degenerate, classify_g_integral, ConvergenceVerdict, DegeneracyTolerances,
    IntegralValue, Verdict,
};
use levy_atoms::exfun::{
    sample_exponential_functional, sample_g_functional, GDescriptor, GFlags, HorizonPolicy, YProcessSpec,
};
use levy_atoms::experiment::{self, EXIT_CONTRADICTION};
use levy_atoms::levy::{
    doleans_xi_from_eta, Atom, AtomSequence, DensityPart, IntegrationConfig, LevyMeasure1D, LevyTriplet1D,
    LevyTriplet2D, Side,
};
use levy_atoms::path::SimConfig;
use levy_atoms::stats::{detect_atoms, fixed_point_test, ks_test_values, AtomVerdict};

struct Outcome {
    pass: bool,
    detail: String,
}

fn cfg() -> IntegrationConfig {
    IntegrationConfig::default()
}

fn indicator01() -> GDescriptor {
    GDescriptor::new(
        "indicator",
        std::sync::Arc::new(|x| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }),
        GFlags {
            nonneg: true,
            compact_support: Some((0.0, 1.0)),
            positive_on_interior: true,
            boundary_countable: true,
            boundary_finite: true,
            g0_nonzero: true,
            countable_discontinuities: true,
            indicator_of: Some((0.0, 1.0)),
            ..GFlags::default()
        },
    )
    .with_primitive(std::sync::Arc::new(|x: f64| x.clamp(0.0, 1.0)))
    .with_breakpoints(vec![0.0, 1.0])
}

fn degenerate_constant() -> Outcome {
    let eta = LevyTriplet1D::from_bv_drift(
        0.0,
        0.0,
        LevyMeasure1D::from_parts(vec![DensityPart::uniform(0.0, 0.5, 1.0).unwrap()]).unwrap(),
    )
    .unwrap();
    let t = doleans_xi_from_eta(&eta, 1.0, &cfg()).unwrap();
    let policy = HorizonPolicy { tail_tolerance: 1e-8, ..HorizonPolicy::default() };
    let pool = sample_exponential_functional(&t, 1000, &SimConfig::default(), &policy, 101).unwrap();
    let worst = pool.values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let rep = detect_atoms(&pool, 1e-7).unwrap();
    let single = rep.candidates.len() == 1 && rep.candidates[0].mass_estimate == 1.0;
    Outcome {
        pass: worst <= 1e-3 && single && rep.verdict == AtomVerdict::AtomsFound,
        detail: format!("max |I - 1| = {worst:.2e}, candidates {}", rep.candidates.len()),
    }
}

fn random_eta(rng: &mut ChaCha8Rng, k: f64) -> LevyTriplet1D {
    // Jumps y with y/k < 1: below k on the positive side for k > 0, above k for k < 0.
    let toward = if k > 0.0 { Side::Negative } else { Side::Positive };
    let mut atoms = Vec::new();
    let mut parts = Vec::new();
    let reach = 0.95 * k.abs();
    let n_atoms = rng.random_range(0..3);
    for _ in 0..n_atoms {
        let mag = rng.random_range(0.05..reach);
        let loc = if rng.random::<bool>() { k.signum() * mag } else { -k.signum() * rng.random_range(0.05..3.0) };
        atoms.push(Atom { loc, mass: rng.random_range(0.1..2.0) });
    }
    let lo = rng.random_range(0.0..0.5 * reach);
    let hi = rng.random_range(lo + 0.01..reach);
    let (a, b) = if k > 0.0 { (lo, hi) } else { (-hi, -lo) };
    parts.push(DensityPart::uniform(a, b, rng.random_range(0.1..2.0)).unwrap());
    if rng.random::<bool>() {
        parts.push(DensityPart::exponential(rng.random_range(0.1..2.0), rng.random_range(0.5..3.0), toward).unwrap());
    }
    let m = LevyMeasure1D::new(atoms, parts).unwrap();
    let sigma2 = if rng.random::<bool>() { rng.random_range(0.0..2.0) } else { 0.0 };
    LevyTriplet1D::new(rng.random_range(-1.0..1.0), sigma2, m).unwrap()
}

fn degeneracy_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_k: f64 = 0.0;
    let mut worst_claim: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..50 {
        let k = loop {
            let k: f64 = rng.random_range(-5.0..5.0);
            if k.abs() >= 0.1 {
                break k;
            }
        };
        let eta = random_eta(&mut rng, k);
        let t = doleans_xi_from_eta(&eta, k, &cfg()).unwrap();
        match check_degenerate(&t, &DegeneracyTolerances::default(), &cfg()).unwrap().degenerate_k() {
            Some(kk) => {
                let d = check_degenerate(&t, &DegeneracyTolerances::default(), &cfg()).unwrap();
                worst_k = worst_k.max(((kk - k) / k).abs());
                worst_claim = worst_claim.max(d.gamma_residual.unwrap());
            }
            None => failures += 1,
        }
    }
    Outcome {
        pass: failures == 0 && worst_k <= 1e-9 && worst_claim <= 1e-8,
        detail: format!("misses {failures}, max rel k error {worst_k:.1e}, max drift residual {worst_claim:.1e}"),
    }
}

fn cpp_drift_closed_form() -> Outcome {
    let xi = LevyTriplet1D::from_bv_drift(
        1.0,
        0.0,
        LevyMeasure1D::from_atoms(vec![Atom { loc: 1.0, mass: 1.0 }]).unwrap(),
    )
    .unwrap();
    let g = indicator01();
    let pool = sample_g_functional(
        &xi,
        &g,
        &YProcessSpec::identity(),
        10_000,
        &SimConfig::default(),
        &HorizonPolicy::default(),
        22,
    )
    .unwrap();
    let res = 1e-7;
    let rep = detect_atoms(&pool, res).unwrap();
    let at_one = rep.atoms().find(|c| (c.location - 1.0).abs() <= res);
    let mass = at_one.map(|c| c.mass_estimate).unwrap_or(0.0);
    let below: Vec<f64> = pool.values.iter().copied().filter(|&v| v < 1.0 - res).collect();
    let cdf = OracleDef::TruncatedExponential { rate: 1.0, cap: 1.0 }.cdf().unwrap();
    let ks = ks_test_values(&below, &cdf).unwrap();
    let e1 = (-1.0f64).exp();
    Outcome {
        pass: (mass - e1).abs() <= 0.015 && ks.p_value > 0.01,
        detail: format!("atom mass {mass:.4} (oracle {e1:.4}), ks p {:.3} on {} samples", ks.p_value, below.len()),
    }
}

fn stable_subordinator_no_atoms() -> Outcome {
    let xi = LevyTriplet1D::from_bv_drift(
        0.0,
        0.0,
        LevyMeasure1D::from_parts(vec![DensityPart::power_law(1.0, 0.5, Side::Positive, 0.0, f64::INFINITY).unwrap()])
            .unwrap(),
    )
    .unwrap();
    let g = indicator01();
    let y = YProcessSpec::identity();
    let class = classify_g_integral(&xi, &g, &y, &cfg()).unwrap();
    let fired = class.trace.iter().find(|r| r.fired).map(|r| r.rule.clone()).unwrap_or_default();
    let sim = SimConfig { epsilon: 1e-4, ..SimConfig::default() };
    let pool = sample_g_functional(&xi, &g, &y, 10_000, &sim, &HorizonPolicy::default(), 23).unwrap();
    let rep = detect_atoms(&pool, 1e-7).unwrap();
    let contra = experiment::contradiction(&class, &rep);
    Outcome {
        pass: class.verdict == Verdict::NoAtoms
            && fired == "subordinator_indicator"
            && rep.verdict == AtomVerdict::NoAtomsDetected
            && contra.is_none(),
        detail: format!("classifier {:?} via {fired}, detector {:?}", class.verdict, rep.verdict),
    }
}

fn dufresne_pair() -> LevyTriplet2D {
    LevyTriplet2D::independent(&LevyTriplet1D::brownian(1.0, 2.0).unwrap(), &LevyTriplet1D::drift(1.0).unwrap())
        .unwrap()
}

fn dufresne_oracle() -> Outcome {
    let t = dufresne_pair();
    let sim = SimConfig { gauss_step: 0.002, ..SimConfig::default() };
    // Independent of the oracle implementation: P(1/Gamma(1,1) <= x) = e^{-1/x}.
    let cdf = |x: f64| if x <= 0.0 { 0.0 } else { (-1.0 / x).exp() };
    let mut ps = Vec::new();
    for seed in 0..5 {
        let pool = sample_exponential_functional(&t, 10_000, &sim, &HorizonPolicy::default(), 500 + seed).unwrap();
        ps.push(ks_test_values(&pool.values, &cdf).unwrap().p_value);
    }
    let ok = ps.iter().filter(|&&p| p > 0.01).count();
    Outcome {
        pass: ok >= 3,
        detail: format!("{ok}/5 seeds with p > 0.01, p = {:?}", ps.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>()),
    }
}

fn convergence_examples() -> Outcome {
    let unit = LevyTriplet1D::drift(1.0).unwrap();
    let inv_sq = DensityPart::power_law(1.0, 1.0, Side::Positive, 1.0, f64::INFINITY).unwrap();
    let eta_a = LevyTriplet1D::new(0.0, 0.0, LevyMeasure1D::from_parts(vec![inv_sq]).unwrap()).unwrap();
    let a = check_convergence(&LevyTriplet2D::independent(&unit, &eta_a).unwrap(), &cfg());
    let seq = AtomSequence::log_geometric(Side::Positive, 2.0, 0.5, 1).unwrap();
    let eta_b = LevyTriplet1D::new(0.0, 0.0, LevyMeasure1D::zero().with_sequence(seq)).unwrap();
    let b = check_convergence(&LevyTriplet2D::independent(&unit, &eta_b).unwrap(), &cfg());
    let c = check_convergence(
        &LevyTriplet2D::independent(&LevyTriplet1D::drift(-1.0).unwrap(), &unit).unwrap(),
        &cfg(),
    );
    let value = match a.eta_log_integral {
        Some(IntegralValue::Finite(v)) => v,
        _ => f64::NAN,
    };
    let two_e = 2.0 / std::f64::consts::E;
    Outcome {
        pass: a.verdict == ConvergenceVerdict::Converges
            && (value - two_e).abs() <= 1e-6
            && b.verdict == ConvergenceVerdict::Diverges
            && c.verdict == ConvergenceVerdict::Diverges,
        detail: format!("{:?} ({value:.9}), {:?}, {:?}", a.verdict, b.verdict, c.verdict),
    }
}

fn fixed_point() -> Outcome {
    let t = dufresne_pair();
    let mut ok = 0;
    let mut ps = Vec::new();
    for &time in &[0.5, 1.0, 2.0] {
        for seed in 0..3 {
            let r = fixed_point_test(&t, time, 10_000, 700 + seed, &SimConfig::default(), &HorizonPolicy::default(), &cfg())
                .unwrap();
            if r.p_value > 0.01 {
                ok += 1;
            }
            ps.push(format!("{:.3}", r.p_value));
        }
    }
    Outcome { pass: ok >= 8, detail: format!("{ok}/9 with p > 0.01, p = {ps:?}") }
}

fn corpus_never_contradicts() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml" || e == "json"))
        .collect();
    files.sort();
    let out = tempfile::tempdir().unwrap();
    let cat = Catalogue::builtin();
    let mut bad = Vec::new();
    for f in &files {
        let name = f.file_stem().unwrap().to_string_lossy().to_string();
        let result = experiment::load_spec(f).and_then(|s| experiment::verify(&s, &cat, &out.path().join(&name)));
        match result {
            Ok(r) if r.exit_code == EXIT_CONTRADICTION => bad.push(format!("{name}: {:?}", r.contradiction)),
            Ok(_) => {}
            Err(e) => bad.push(format!("{name}: error {e}")),
        }
    }
    Outcome {
        pass: files.len() >= 10 && bad.is_empty(),
        detail: format!("{} specs, problems {bad:?}", files.len()),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("degenerate constant", degenerate_constant),
        ("degeneracy round trip", degeneracy_round_trip),
        ("compound Poisson with drift, closed form", cpp_drift_closed_form),
        ("stable subordinator, no atoms", stable_subordinator_no_atoms),
        ("Dufresne oracle", dufresne_oracle),
        ("convergence checker", convergence_examples),
        ("fixed-point property", fixed_point),
        ("bundled corpus never contradicts", corpus_never_contradicts),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let label = format!("criterion {} ({name})", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| label.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        println!("{label}: {} in {secs:.1}s: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
