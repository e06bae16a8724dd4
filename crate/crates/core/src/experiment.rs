//! Experiment specifications and the classify / simulate / verify pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalogue::{Catalogue, GDef, OracleDef, PairDef, ProcessDef, YDef};
use crate::criteria::{
    check_convergence, check_degenerate, classify_exponential, classify_g_integral, Classification,
    ConvergenceReport, DegeneracyCheck, DegeneracyTolerances,
};
use crate::error::{Error, Result};
use crate::exfun::{
    sample_exponential_functional, sample_g_functional, GDescriptor, GFlags, HorizonPolicy, SamplePool,
    TruncationSummary, YProcessSpec,
};
use crate::levy::{IntegrationConfig, LevyTriplet1D, LevyTriplet2D};
use crate::path::SimConfig;
use crate::stats::{
    default_resolution, detect_atoms, fixed_point_test, ks_test_values, write_histogram, AtomReport, AtomVerdict,
    FixedPointResult, KsResult,
};

/// Exit code for a classifier/detector disagreement.
pub const EXIT_CONTRADICTION: i32 = 2;
/// Exit code for an execution error.
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub functional: FunctionalSpec,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub analyses: AnalysesSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalSpec {
    Exponential {
        pair: PairDef,
    },
    GIntegral {
        xi: ProcessDef,
        g: GDef,
        /// Replaces the built-in flags of g when given.
        #[serde(default)]
        g_flags: Option<GFlags>,
        #[serde(default = "identity")]
        y: YDef,
    },
}

fn identity() -> YDef {
    YDef::Identity
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSpec {
    pub n: usize,
    pub seed: u64,
    pub sim: SimConfig,
    pub horizon: HorizonPolicy,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec {
            n: 1000,
            seed: 1,
            sim: SimConfig::default(),
            horizon: HorizonPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysesSpec {
    pub classify: bool,
    pub atoms: Option<AtomsSpec>,
    pub ks: Vec<KsSpec>,
    pub fixed_point: Option<FixedPointSpec>,
    pub histogram_bins: Option<usize>,
}

impl Default for AnalysesSpec {
    fn default() -> Self {
        AnalysesSpec {
            classify: true,
            atoms: Some(AtomsSpec::default()),
            ks: Vec::new(),
            fixed_point: None,
            histogram_bins: Some(50),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomsSpec {
    /// Defaults to ten times the tail tolerance.
    pub resolution: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KsSpec {
    pub oracle: OracleDef,
    /// Restricts the test to samples below this value by more than the atom
    /// resolution, so that a rounded atom at the cutoff stays out.
    #[serde(default)]
    pub below: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointSpec {
    pub t: Vec<f64>,
    /// Defaults to the sampler's n.
    #[serde(default)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Defaults to `out/<name>`.
    pub dir: Option<PathBuf>,
}

/// Reads a spec; `.json` files are JSON, everything else TOML.
pub fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_spec(&text, path.extension().and_then(|e| e.to_str()) == Some("json"))
        .map_err(|e| Error::Spec(format!("{}: {e}", path.display())))
}

pub fn parse_spec(text: &str, json: bool) -> std::result::Result<ExperimentSpec, String> {
    if json {
        serde_json::from_str(text).map_err(|e| e.to_string())
    } else {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

/// A functional with its processes built.
#[derive(Debug, Clone)]
pub enum Built {
    Exponential(LevyTriplet2D),
    GIntegral { xi: LevyTriplet1D, g: GDescriptor, y: YProcessSpec },
}

impl ExperimentSpec {
    pub fn build(&self, cat: &Catalogue) -> Result<Built> {
        Ok(match &self.functional {
            FunctionalSpec::Exponential { pair } => Built::Exponential(pair.build(cat)?),
            FunctionalSpec::GIntegral { xi, g, g_flags, y } => {
                let mut gd = g.build()?;
                if let Some(f) = g_flags {
                    gd.flags = f.clone();
                }
                Built::GIntegral { xi: xi.build(cat)?, g: gd, y: y.build(cat)? }
            }
        })
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("out").join(&self.name))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReport {
    pub classification: Classification,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degeneracy: Option<DegeneracyCheck>,
}

/// Classifies without simulating.
pub fn classify(built: &Built) -> Result<AnalyticReport> {
    let cfg = IntegrationConfig::default();
    Ok(match built {
        Built::Exponential(t) => AnalyticReport {
            classification: classify_exponential(t, &cfg)?,
            convergence: Some(check_convergence(t, &cfg)),
            degeneracy: Some(check_degenerate(t, &DegeneracyTolerances::default(), &cfg)?),
        },
        Built::GIntegral { xi, g, y } => AnalyticReport {
            classification: classify_g_integral(xi, g, y, &cfg)?,
            convergence: None,
            degeneracy: None,
        },
    })
}

/// Draws the sample pool of the functional.
pub fn simulate(built: &Built, sampler: &SamplerSpec) -> Result<SamplePool> {
    match built {
        Built::Exponential(t) => {
            sample_exponential_functional(t, sampler.n, &sampler.sim, &sampler.horizon, sampler.seed)
        }
        Built::GIntegral { xi, g, y } => {
            sample_g_functional(xi, g, y, sampler.n, &sampler.sim, &sampler.horizon, sampler.seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub oracle: OracleDef,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub below: Option<f64>,
    pub result: KsResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSummary {
    pub path: PathBuf,
    pub n: usize,
    pub seed: u64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub truncation: TruncationSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic: Option<AnalyticReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool: Option<PoolSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atoms: Option<AtomReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ks: Vec<KsReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed_point: Vec<FixedPointResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contradiction: Option<String>,
    pub exit_code: i32,
}

/// Classifier/detector disagreement, if any.
pub fn contradiction(c: &Classification, atoms: &AtomReport) -> Option<String> {
    let predicted = c.verdict.predicts_atoms()?;
    let found = atoms.verdict == AtomVerdict::AtomsFound;
    (predicted != found).then(|| {
        format!(
            "classifier verdict {:?} but detector reports {:?} (null max mass {})",
            c.verdict, atoms.verdict, atoms.null_max_mass
        )
    })
}

/// Writes the pool CSV (with sidecar) and optional histogram under `dir`.
pub fn write_pool(pool: &SamplePool, dir: &Path, bins: Option<usize>) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("pool.csv");
    pool.write(&path)?;
    if let Some(b) = bins {
        write_histogram(&pool.values, b, &dir.join("histogram.csv"))?;
    }
    Ok(path)
}

/// Runs the full pipeline and writes `report.json` under `dir`.
pub fn verify(spec: &ExperimentSpec, cat: &Catalogue, dir: &Path) -> Result<Report> {
    let built = spec.build(cat)?;
    let a = &spec.analyses;
    let mut warnings = Vec::new();
    let analytic = if a.classify { Some(classify(&built)?) } else { None };
    if let Some(r) = &analytic {
        warnings.extend(r.classification.warnings.iter().cloned());
    }

    let pool = simulate(&built, &spec.sampler)?;
    if pool.is_partial() {
        warnings.push(format!(
            "{} of {} paths hit the maximal horizon before the stopping rule",
            pool.meta.truncation.partial,
            pool.len()
        ));
    }
    let pool_path = write_pool(&pool, dir, a.histogram_bins)?;
    let n = pool.len();
    let summary = PoolSummary {
        path: pool_path,
        n,
        seed: spec.sampler.seed,
        min: pool.values.first().copied().unwrap_or(f64::NAN),
        max: pool.values.last().copied().unwrap_or(f64::NAN),
        mean: pool.values.iter().sum::<f64>() / n.max(1) as f64,
        truncation: pool.meta.truncation,
    };

    let resolution = a
        .atoms
        .as_ref()
        .and_then(|s| s.resolution)
        .unwrap_or_else(|| default_resolution(&pool));
    let atoms = match &a.atoms {
        Some(_) => Some(detect_atoms(&pool, resolution)?),
        None => None,
    };

    let mut ks = Vec::new();
    for k in &a.ks {
        let cdf = k.oracle.cdf()?;
        let vals: Vec<f64> = match k.below {
            Some(b) => pool.values.iter().copied().filter(|&v| v < b - resolution).collect(),
            None => pool.values.clone(),
        };
        ks.push(KsReport {
            oracle: k.oracle.clone(),
            below: k.below,
            result: ks_test_values(&vals, &cdf)?,
        });
    }

    let mut fixed_point = Vec::new();
    if let Some(fp) = &a.fixed_point {
        let Built::Exponential(t) = &built else {
            return Err(Error::Spec("fixed_point applies to exponential functionals only".into()));
        };
        for &t_fp in &fp.t {
            fixed_point.push(fixed_point_test(
                t,
                t_fp,
                fp.n.unwrap_or(spec.sampler.n),
                spec.sampler.seed,
                &spec.sampler.sim,
                &spec.sampler.horizon,
                &IntegrationConfig::default(),
            )?);
        }
    }

    let contra = match (&analytic, &atoms) {
        (Some(r), Some(at)) => contradiction(&r.classification, at),
        _ => None,
    };
    let report = Report {
        name: spec.name.clone(),
        analytic,
        pool: Some(summary),
        atoms,
        ks,
        fixed_point,
        warnings,
        exit_code: if contra.is_some() { EXIT_CONTRADICTION } else { 0 },
        contradiction: contra,
    };
    write_report(&report, dir)?;
    Ok(report)
}

pub fn write_report(report: &Report, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let s = serde_json::to_string_pretty(report)?;
    std::fs::write(dir.join("report.json"), s + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
name = "small"
[functional]
kind = "g_integral"
xi = { type = "cpp", rate = 1.0, drift = 1.0, law = { type = "const", value = 1.0 } }
g = { name = "indicator", lo = 0.0, hi = 1.0 }
[sampler]
n = 2000
seed = 3
[analyses]
ks = [{ oracle = { name = "truncated_exponential", rate = 1.0, cap = 1.0 }, below = 1.0 }]
"#;

    #[test]
    fn verify_small_spec() {
        let spec = parse_spec(SMALL, false).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let r = verify(&spec, &Catalogue::builtin(), dir.path()).unwrap();
        assert_eq!(r.exit_code, 0, "{:?}", r.contradiction);
        assert!(dir.path().join("report.json").exists());
        assert!(dir.path().join("pool.csv.json").exists());
        assert!(dir.path().join("histogram.csv").exists());
        assert_eq!(r.atoms.unwrap().verdict, AtomVerdict::AtomsFound);
    }

    #[test]
    fn malformed_spec_names_the_field() {
        let bad = SMALL.replace("seed = 3", "seed = 3\nbogus = 1");
        let e = parse_spec(&bad, false).unwrap_err();
        assert!(e.contains("bogus"), "{e}");
    }

    #[test]
    fn json_spec_round_trip() {
        let spec = parse_spec(SMALL, false).unwrap();
        let js = serde_json::to_string(&spec).unwrap();
        assert_eq!(parse_spec(&js, true).unwrap(), spec);
    }
}
