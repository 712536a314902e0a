use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_poissonstab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn out_path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn schema_check(doc: &Value) {
    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schema/report.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "schema violations: {errors:#?}");
}

const RIKITAKE1_INLINE: &str = r#"
[model]
variables = ["x", "y", "z"]
field = ["y*z + 2*y", "x*z - 2*x", "-x*y"]
integrals = ["(x^2 + y^2)/2 + z^2", "(-x^2 + y^2)/4 - 2*z"]
"#;

#[test]
fn validate_builtin_passes() {
    let dir = TempDir::new().unwrap();
    let out = out_path(&dir, "v.json");
    let o = run(&["validate", "--builtin", "rikitake1", "--param", "beta=2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = read_json(&out);
    assert_eq!(doc["validation"]["pass"], true);
    assert!(doc["validation"]["first_integrals"]["max_residual"][1].as_f64().unwrap() <= 1e-9);
    schema_check(&doc);
}

#[test]
fn validate_inline_model_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "m.toml", RIKITAKE1_INLINE);
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn corrupted_integral_is_named() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "m.toml", &RIKITAKE1_INLINE.replace("- 2*z\"", "- 2*z + 0.1*x\""));
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let text = stdout(&o);
    let failing: Vec<&str> = text.lines().filter(|l| l.ends_with("FAIL")).collect();
    assert!(failing.iter().any(|l| l.starts_with("C2") && l.contains("0.1*x")), "{text}");
    assert!(!failing.iter().any(|l| l.starts_with("C1")), "{text}");
}

#[test]
fn malformed_expression_reports_position() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "m.toml", &RIKITAKE1_INLINE.replace("-x*y", "-x*(y"));
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("field[2]") && err.contains(" at "), "{err}");
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "m.toml", "[model]\nbuiltin = \"rikitake1\"\n[orbitz]\n");
    assert_eq!(code(&run(&["classify", "--config", cfg.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["classify", "--builtin", "nope"])), 2);
}

#[test]
fn classify_stable_rikitake() {
    let dir = TempDir::new().unwrap();
    let out = out_path(&dir, "c.json");
    let o = run(&[
        "classify", "--builtin", "rikitake1", "--param", "beta=2", "--seed", "0,0,1", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = read_json(&out);
    let inv = &doc["equilibria"][0]["analysis"]["invariant"];
    assert!((inv["I_value"].as_f64().unwrap() - 3.0).abs() < 1e-9);
    assert_eq!(inv["verdict"], "LyapunovStable");
    assert_eq!(inv["eigen_check"]["passed"], true);
    assert_eq!(inv["arnold"]["definite"], true);
    schema_check(&doc);
}

#[test]
fn classify_unstable_rikitake() {
    let dir = TempDir::new().unwrap();
    let out = out_path(&dir, "c.json");
    let o = run(&[
        "classify", "--builtin", "rikitake1", "--param", "beta=1", "--seed", "0,0,2", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let inv = &read_json(&out)["equilibria"][0]["analysis"]["invariant"];
    assert!((inv["I_value"].as_f64().unwrap() + 3.0).abs() < 1e-9);
    assert_eq!(inv["verdict"], "Unstable");
}

#[test]
fn classify_with_hamiltonian_permutations() {
    let dir = TempDir::new().unwrap();
    let out = out_path(&dir, "c.json");
    let o = run(&[
        "classify", "--builtin", "rikitake1", "--param", "beta=2", "--seed", "0,0,1",
        "--try-hamiltonian-permutations", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let doc = read_json(&out);
    let alt = &doc["equilibria"][0]["alternates"][0];
    assert_eq!(alt["hamiltonian_index"], 0);
    assert!((alt["invariant"]["I_value"].as_f64().unwrap() - 3.0).abs() < 1e-8);
    schema_check(&doc);
}

#[test]
fn seed_without_equilibrium_fails() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "flow.toml",
        "[model]\nvariables = [\"x\", \"y\", \"z\"]\nfield = [\"1\", \"0\", \"0\"]\nintegrals = [\"y\", \"z\"]\nnu = \"-1\"\n",
    );
    let out = out_path(&dir, "c.json");
    let o = run(&["classify", "--config", cfg.to_str().unwrap(), "--seed", "5,5,5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let doc = read_json(&out);
    assert_eq!(doc["equilibria"][0]["status"], "failed: no equilibrium");
    assert!(doc["equilibria"][0]["analysis"].is_null());
    schema_check(&doc);
}

#[test]
fn orbits_rikitake_periods_and_csv() {
    let dir = TempDir::new().unwrap();
    let out = out_path(&dir, "orb.json");
    let o = run(&[
        "orbits", "--builtin", "rikitake1", "--param", "beta=2", "--seed", "0,0,1", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = read_json(&out);
    let fam = &doc["orbits"]["family"];
    let limit = 2.0 * std::f64::consts::PI / 3f64.sqrt();
    assert!((fam["predicted_limit"].as_f64().unwrap() - limit).abs() < 1e-12);
    let periods: Vec<f64> = fam["entries"].as_array().unwrap().iter().map(|e| e["period"].as_f64().unwrap()).collect();
    assert_eq!(periods.len(), 3);
    // periods approach the limit from below as the amplitude shrinks
    assert!(periods.windows(2).all(|w| (w[1] - limit).abs() < (w[0] - limit).abs()));
    assert!((periods[2] - limit).abs() / limit < 1e-3);
    let files = doc["orbits"]["csv_files"].as_array().unwrap();
    assert_eq!(files.len(), 3);
    let csv = std::fs::read_to_string(files[0].as_str().unwrap()).unwrap();
    assert_eq!(csv.lines().next(), Some("t,x1,x2,x3"));
    assert!(csv.lines().count() > 100);
    schema_check(&doc);
}

#[test]
fn orbits_rotation_has_period_two_pi() {
    let dir = TempDir::new().unwrap();
    let out = out_path(&dir, "orb.json");
    let o = run(&["orbits", "--builtin", "rotation", "--seed", "0,0,1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for e in read_json(&out)["orbits"]["family"]["entries"].as_array().unwrap() {
        assert!((e["period"].as_f64().unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-8);
    }
}

#[test]
fn orbits_refuse_unstable_target() {
    let o = run(&["orbits", "--builtin", "rikitake1", "--param", "beta=1", "--seed", "0,0,2"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("invariant negative"), "{}", stdout(&o));
}

#[test]
fn probe_random_family_passes() {
    let dir = TempDir::new().unwrap();
    let out = out_path(&dir, "p.json");
    let o = run(&[
        "probe", "--builtin", "rikitake1", "--param", "beta=2", "--seed", "0,0,1", "--probes", "20", "--rng-seed",
        "42", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let doc = read_json(&out);
    let p = &doc["probes"];
    assert_eq!(p["results"].as_array().unwrap().len(), 20);
    assert!(p["max_relative_change"].as_f64().unwrap() <= 1e-6);
    assert!(p["max_eigen_mismatch"].as_f64().unwrap() <= 1e-6);
    schema_check(&doc);
}

#[test]
fn probe_edge_cases() {
    let dir = TempDir::new().unwrap();
    let none = out_path(&dir, "none.json");
    let o = run(&[
        "probe", "--builtin", "rikitake1", "--param", "beta=2", "--seed", "0,0,1", "--probes", "0", "--out",
        none.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(read_json(&none)["probes"]["results"].as_array().unwrap().is_empty());

    let ident = out_path(&dir, "id.json");
    let o = run(&[
        "probe", "--builtin", "rikitake1", "--param", "beta=2", "--seed", "0,0,1", "--probes", "0",
        "--identity-probe", "--out", ident.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let doc = read_json(&ident);
    let r = &doc["probes"]["results"][0];
    assert_eq!(r["diffeo_id"], "identity");
    assert_eq!(r["relative_change"].as_f64(), Some(0.0));
}

#[test]
fn reports_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let mut texts = Vec::new();
    for k in 0..2 {
        let out = out_path(&dir, &format!("r{k}.json"));
        let o = run(&[
            "probe", "--builtin", "rikitake2", "--param", "beta=-2", "--seed", "0,0,1", "--probes", "5", "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stdout(&o));
        texts.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn config_file_drives_a_run() {
    let dir = TempDir::new().unwrap();
    let out = out_path(&dir, "cfg.json");
    let cfg = write(
        &dir,
        "run.toml",
        &format!(
            "[model]\nbuiltin = \"rikitake1\"\nparameters = {{ beta = 2.0 }}\n[seeds]\npoints = [[0.1, 0.0, 0.9], [0.0, 0.0, -1.1]]\n[output]\nreport = {:?}\n",
            out.to_str().unwrap()
        ),
    );
    let o = run(&["classify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let doc = read_json(&out);
    let eq = doc["equilibria"].as_array().unwrap();
    assert_eq!(eq.len(), 2);
    for e in eq {
        assert_eq!(e["analysis"]["invariant"]["verdict"], "LyapunovStable");
    }
}

#[test]
fn report_subcommand_renders_saved_json() {
    let dir = TempDir::new().unwrap();
    let out = out_path(&dir, "c.json");
    let o = run(&[
        "classify", "--builtin", "rikitake1", "--param", "beta=2", "--seed", "0,0,1", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let r = run(&["report", "--in", out.to_str().unwrap()]);
    assert_eq!(code(&r), 0);
    assert_eq!(stdout(&r), stdout(&o));
    assert_eq!(code(&run(&["report", "--in", dir.path().join("missing.json").to_str().unwrap()])), 2);
}

#[test]
fn shipped_configs_validate() {
    let dir = TempDir::new().unwrap();
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["rikitake1.toml", "inline_rotation.toml"] {
        let out = out_path(&dir, "v.json");
        let o = run(&["validate", "--config", configs.join(name).to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{name}: {}", stdout(&o));
    }
}
