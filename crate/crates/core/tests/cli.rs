use casimir_core::cli::parse_config;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn casimir(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_casimir"))
        .args(args)
        .env("CASIMIR_CACHE_DIR", cache)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn without_runtime(s: &str) -> Value {
    let mut v: Value = serde_json::from_str(s).unwrap();
    v.as_object_mut().unwrap().remove("runtime");
    v
}

#[test]
fn two_disc_fixture_round_trips() {
    let l = parse_config(&fixture("two_discs.toml")).unwrap();
    assert_eq!((l.config.len(), l.config.dimension), (2, 2));
    assert_eq!(l.numerics.n_per_obstacle, Some(64));
    let j = parse_config(&fixture("disc_ellipse.json")).unwrap();
    assert_eq!(j.config.mass, 0.5);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let overlap = write(
        dir.path(),
        "overlap.toml",
        "schema_version = 1\ndimension = 1\n[[obstacles]]\nkind = \"interval\"\na = 0.0\nb = 1.0\n[[obstacles]]\nkind = \"interval\"\na = 0.5\nb = 2.0\n",
    );
    let unknown = write(dir.path(), "unknown.toml", "schema_version = 1\ndimension = 2\n[[obstacles]]\nkind = \"square\"\nside = 1.0\n");
    let version = write(dir.path(), "v9.toml", "schema_version = 9\ndimension = 2\nobstacles = []\n");
    let typo = write(
        dir.path(),
        "typo.json",
        r#"{"schema_version": 1, "dimension": 2, "obstacles": [{"kind": "circle", "center": [0, 0], "raduis": 1}]}"#,
    );
    let mismatch = write(
        dir.path(),
        "mismatch.toml",
        "schema_version = 1\ndimension = 1\n[[obstacles]]\nkind = \"circle\"\ncenter = [0.0, 0.0]\nradius = 1.0\n",
    );
    let cases = [(&overlap, 3, "overlap"), (&unknown, 2, "square"), (&version, 2, "schema_version"), (&typo, 2, "raduis"), (&mismatch, 3, "dimension")];
    for (path, code, needle) in cases {
        let o = casimir(dir.path(), &["energy", "-c", path.to_str().unwrap()]);
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(o.status.code(), Some(code), "{}: {err}", path.display());
        assert!(err.contains(needle), "{err}");
    }
    let o = casimir(dir.path(), &["energy", "-c", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_obstacle_xi_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let one = write(dir.path(), "one.toml", "schema_version = 1\ndimension = 2\n[[obstacles]]\nkind = \"circle\"\ncenter = [0.0, 0.0]\nradius = 1.0\n");
    let o = casimir(dir.path(), &["xi", "-c", one.to_str().unwrap(), "--n", "32", "--kappa", "0.1:3:5"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("kappa,xi"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.split(',').nth(1).unwrap().parse::<f64>().unwrap() == 0.0));
}

#[test]
fn validate_1d_suite() {
    let dir = tempfile::tempdir().unwrap();
    let o = casimir(dir.path(), &["validate", "--suite", "1d", "-c", fixture("gap1.toml").to_str().unwrap()]);
    let out = stdout(&o);
    assert!(o.status.success(), "{out}");
    let energy = out.lines().find(|l| l.starts_with("1d energy")).unwrap();
    assert!(energy.contains("-1.308996938995747e-1") && energy.contains("1e-8") && energy.ends_with("PASS"), "{energy}");
    assert!(!out.contains("FAIL"));
}

#[test]
fn validate_pw_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let o = casimir(dir.path(), &["validate", "--oracle", "pw", "-c", fixture("two_discs.toml").to_str().unwrap(), "--n", "64"]);
    let out = stdout(&o);
    assert!(o.status.success(), "{out}");
    assert_eq!(out.lines().filter(|l| l.ends_with("PASS")).count(), 5);
}

#[test]
fn energy_cache_is_transparent() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let cfg = fixture("two_discs.toml");
    let args = ["energy", "-c", cfg.to_str().unwrap(), "--n", "32", "--tol", "1e-6"];
    let a = casimir(&cache, &args);
    let b = casimir(&cache, &args);
    assert!(a.status.success() && b.status.success());
    let (ja, jb) = (stdout(&a), stdout(&b));
    assert_eq!(without_runtime(&ja), without_runtime(&jb));
    let ra: Value = serde_json::from_str(&ja).unwrap();
    let rb: Value = serde_json::from_str(&jb).unwrap();
    assert_eq!(ra["runtime"]["cache_hits"], 0);
    assert_eq!(rb["runtime"]["cache_misses"], 0);
    assert_eq!(rb["runtime"]["cache_hits"], ra["runtime"]["cache_misses"]);

    // a corrupt line is dropped, the file rebuilt and the result unchanged
    let file = std::fs::read_dir(&cache).unwrap().next().unwrap().unwrap().path();
    let mut body = std::fs::read_to_string(&file).unwrap();
    body.push_str("{not json\n");
    std::fs::write(&file, body).unwrap();
    let c = casimir(&cache, &args);
    assert!(String::from_utf8_lossy(&c.stderr).contains("corrupt"));
    assert_eq!(without_runtime(&stdout(&c)), without_runtime(&ja));
    assert!(!std::fs::read_to_string(&file).unwrap().contains("{not json"));
}

#[test]
fn results_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("disc_ellipse.json");
    let run = |t: &str| {
        let o = casimir(dir.path(), &["--no-cache", "--threads", t, "energy", "-c", cfg.to_str().unwrap(), "--n", "32", "--tol", "1e-6"]);
        assert!(o.status.success());
        without_runtime(&stdout(&o))
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn digest_ignores_field_order() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(
        dir.path(),
        "a.toml",
        "schema_version = 1\ndimension = 1\nmass = 0.0\n[[obstacles]]\nkind = \"interval\"\na = 0.0\nb = 1.0\n[[obstacles]]\nkind = \"interval\"\na = 2.0\nb = 3.0\n",
    );
    let b = write(
        dir.path(),
        "b.toml",
        "mass = 0.0\ndimension = 1\nschema_version = 1\n[[obstacles]]\nb = 1.0\nkind = \"interval\"\na = 0.0\n[[obstacles]]\na = 2.0\nb = 3.0\nkind = \"interval\"\n",
    );
    let digest = |p: &Path| {
        let o = casimir(dir.path(), &["energy", "-c", p.to_str().unwrap()]);
        serde_json::from_str::<Value>(&stdout(&o)).unwrap()["digest"].clone()
    };
    assert_eq!(digest(&a), digest(&b));
}

#[test]
fn force_all_routes_agree() {
    let dir = tempfile::tempdir().unwrap();
    let o = casimir(
        dir.path(),
        &["force", "-c", fixture("two_discs.toml").to_str().unwrap(), "--route", "all", "--n", "48", "--tol", "1e-7"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["result"]["agreement"]["pass"], true, "{}", v["result"]["agreement"]);
    let routes: Vec<&str> = v["result"]["routes"].as_array().unwrap().iter().map(|r| r["route"].as_str().unwrap()).collect();
    assert_eq!(routes, ["finite-difference", "surface-integral", "boundary-hadamard"]);
}

#[test]
fn sweep_and_tensor_field_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("gap1.toml");
    let out_path = dir.path().join("sweep.csv");
    let o = casimir(
        dir.path(),
        &["sweep", "-c", cfg.to_str().unwrap(), "--obstacle", "1", "--direction", "1,0", "--grid", "-0.5,0,1", "-o", out_path.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(csv.lines().next(), Some("s,energy,abs_error_estimate"));
    for r in &rows {
        let g = 1.0 + r[0];
        assert!((r[1] + std::f64::consts::PI / (24.0 * g)).abs() < 1e-8);
    }
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "sweep");

    let o = casimir(dir.path(), &["tensor-field", "-c", cfg.to_str().unwrap(), "--x=-1:4:6"]);
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("x,y,t00,t11,t12,t22,half_h_rel"));
    // x = 0..3 are boundary points
    assert_eq!(out.lines().filter(|l| l.contains("nan")).count(), 4);
}
