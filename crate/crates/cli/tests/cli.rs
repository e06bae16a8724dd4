use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_levy-atoms"));
    c.env("LEVY_THREADS", "1");
    c
}

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name)
}

fn run(c: &mut Command) -> Output {
    c.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_names_the_builtin_families() {
    let o = run(bin().arg("list"));
    assert!(o.status.success());
    let s = stdout(&o);
    for name in ["brownian_drift", "cpp", "stable_tail_alpha", "curve_degenerate", "indicator", "dufresne"] {
        assert!(s.contains(name), "missing {name} in\n{s}");
    }
}

#[test]
fn user_densities_show_up_in_the_listing() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bumpy.csv"), "x,density\n0.1,1.0\n0.5,2.0\n1.0,0.5\n").unwrap();
    let o = run(bin().arg("--user-dir").arg(dir.path()).arg("list"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("bumpy"));
}

#[test]
fn malformed_spec_exits_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(
        &p,
        "name = \"bad\"\n[functional]\nkind = \"exponential\"\n[functional.pair]\ncoupling = \"independent\"\n\
         xi = { type = \"drift\", rate = 1.0 }\neta = { type = \"drift\", rate = 1.0 }\n[sampler]\nsamples = 10\n",
    )
    .unwrap();
    let o = run(bin().arg("classify").arg(&p));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("samples"), "{}", stderr(&o));
}

#[test]
fn missing_spec_file_exits_one() {
    let o = run(bin().arg("classify").arg("/nonexistent/spec.toml"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn classify_reports_the_constant() {
    let o = run(bin().arg("classify").arg(spec("degenerate.toml")));
    assert!(o.status.success(), "{}", stderr(&o));
    let rep: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rep["classification"]["verdict"]["kind"], "constant_atom");
    assert_eq!(rep["classification"]["verdict"]["k"], 1.0);
}

#[test]
fn verify_degenerate_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin().arg("verify").arg(spec("degenerate.toml")).arg("--out").arg(dir.path()));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(report["contradiction"].is_null());
    assert_eq!(report["analytic"]["classification"]["verdict"]["kind"], "constant_atom");
    assert_eq!(report["atoms"]["verdict"], "AtomsFound");
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("pool.csv").exists());
}

fn simulate(seed: Option<u64>, out: &Path) -> Vec<u8> {
    let mut c = bin();
    if let Some(s) = seed {
        c.arg("--seed").arg(s.to_string());
    }
    let o = run(c.arg("simulate").arg(spec("brownian_gaussian.toml")).arg("--out").arg(out));
    assert!(o.status.success(), "{}", stderr(&o));
    std::fs::read(out.join("pool.csv")).unwrap()
}

#[test]
fn pools_are_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(None, &dir.path().join("a"));
    let b = simulate(None, &dir.path().join("b"));
    assert_eq!(a, b);
    let c = simulate(Some(12345), &dir.path().join("c"));
    assert_ne!(a, c);
    let d = simulate(Some(12345), &dir.path().join("d"));
    assert_eq!(c, d);
}

#[test]
fn atoms_subcommand_reads_a_pool() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("deg");
    let o = run(bin().arg("simulate").arg(spec("degenerate.toml")).arg("--out").arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(bin().arg("atoms").arg(out.join("pool.csv")).arg("--resolution").arg("1e-7"));
    assert!(o.status.success(), "{}", stderr(&o));
    let rep: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rep["verdict"], "AtomsFound");
}
