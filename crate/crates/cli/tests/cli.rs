use std::path::{Path, PathBuf};

use disslab_cli::manifest::read_manifest;
use disslab_cli::{run, EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_OK};

fn cli(args: &[&str]) -> i32 {
    let mut v = vec!["disslab"];
    v.extend_from_slice(args);
    run(v)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const TG_MOVIE: &str = r#"
[generate]
grid = { d = 2, n = 32 }
field = { kind = "taylor_green" }
solver = { equation = "ns2d", nu = 0.01, t_final = 0.5, stride = 1 }
"#;

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(cli(&["frobnicate"]), EXIT_ERROR);
    assert_eq!(cli(&["bounds", "--out", s(&out)]), EXIT_ERROR, "no [bounds] section");
    let missing = config(dir.path(), "missing.toml", "input = \"nope.dlf\"\n[besov]\np = 2.0\n");
    assert_eq!(cli(&["besov", "--config", s(&missing), "--out", s(&out)]), EXIT_ERROR);
    let unknown = config(dir.path(), "unknown.toml", "[bounds]\ngamma = 3.85\ncolour = 1\n");
    assert_eq!(cli(&["bounds", "--config", s(&unknown), "--out", s(&out)]), EXIT_ERROR);
    let b = config(dir.path(), "b.toml", "[bounds]\ngamma = 3.85\n");
    assert_eq!(cli(&["bounds", "--config", s(&b), "--out", s(&out), "--threads", "0"]), EXIT_ERROR);
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(cli(&["--help"]), EXIT_OK);
    assert_eq!(cli(&["--version"]), EXIT_OK);
}

#[test]
fn random_fields_require_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[generate]\ngrid = { d = 1, n = 64 }\nfield = { kind = \"random_phase_besov\", sigma = 0.3, p_target = 3.0 }\n";
    let cfg = config(dir.path(), "gen.toml", text);
    let out = dir.path().join("out");
    assert_eq!(cli(&["generate", "--config", s(&cfg), "--out", s(&out)]), EXIT_ERROR);
    assert_eq!(cli(&["generate", "--config", s(&cfg), "--out", s(&out), "--seed", "9"]), EXIT_OK);
    assert_eq!(read_manifest(&out).unwrap().seed, Some(9));
    assert!(out.join("field.dlf").exists());
}

#[test]
fn bounds_verdicts_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let consistent = config(dir.path(), "ok.toml", "[bounds]\ngamma = 3.85\nentries = [{ p = 4.0, zeta = 1.2 }]\n");
    assert_eq!(cli(&["bounds", "--config", s(&consistent), "--out", s(&out)]), EXIT_OK);
    let boundary = config(dir.path(), "edge.toml", "[bounds]\ngamma = 3.85\nentries = [{ p = 3.0, zeta = 1.0 }]\n");
    assert_eq!(cli(&["bounds", "--config", s(&boundary), "--out", s(&out)]), EXIT_OK);
    assert_eq!(cli(&["bounds", "--config", s(&boundary), "--out", s(&out), "--strict"]), EXIT_CHECK_FAILED);
    let violates = config(dir.path(), "bad.toml", "[bounds]\ngamma = 3.85\nentries = [{ p = 6.0, zeta = 2.0 }]\n");
    assert_eq!(cli(&["bounds", "--config", s(&violates), "--out", s(&out)]), EXIT_CHECK_FAILED);
    let m = read_manifest(&out).unwrap();
    assert!(m.checks.iter().any(|c| !c.pass));
    assert!(out.join("consistency.csv").exists() && out.join("zeta_star.csv").exists());
}

#[test]
fn exponent_table_is_read_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("table.csv"), "p,zeta,stderr\n3,1.0,0.0\n4,1.28,0.01\n").unwrap();
    let cfg = config(dir.path(), "t.toml", "[bounds]\ngamma = 3.85\ntable = \"table.csv\"\n");
    let out = dir.path().join("out");
    assert_eq!(cli(&["bounds", "--config", s(&cfg), "--out", s(&out)]), EXIT_OK);
    let m = read_manifest(&out).unwrap();
    assert_eq!(m.inputs.len(), 1);
    assert_eq!(m.inputs[0].path, "table.csv");
}

#[test]
fn identity_pipeline_on_taylor_green() {
    let dir = tempfile::tempdir().unwrap();
    let gen = config(dir.path(), "gen.toml", TG_MOVIE);
    let movie = dir.path().join("movie");
    assert_eq!(cli(&["generate", "--config", s(&gen), "--out", s(&movie)]), EXIT_OK);
    let body = "seed = 1\ninput = \"movie/field.dlf\"\n[identity]\nell_cells = [2.0, 4.0]\ntests = { count = 3 }\n";
    // Both sides are quadrature-level on a 32² grid, so the default tolerance fails.
    let strict = config(dir.path(), "strict.toml", body);
    assert_eq!(cli(&["verify-identity", "--config", s(&strict), "--out", s(&dir.path().join("strict"))]), EXIT_CHECK_FAILED);
    let text = format!("{body}tolerance = 0.1\n\n[decompose]\nell_cells = [2.0, 4.0]\n");
    let cfg = config(dir.path(), "id.toml", &text);
    let out = dir.path().join("id");
    assert_eq!(cli(&["verify-identity", "--config", s(&cfg), "--out", s(&out)]), EXIT_OK);
    let m = read_manifest(&out).unwrap();
    let csv = std::fs::read_to_string(out.join("identity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    let worst = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!((m.values["max_residual"] - worst).abs() < 1e-12);
    let dec = dir.path().join("dec");
    assert_eq!(cli(&["decompose", "--config", s(&cfg), "--out", s(&dec)]), EXIT_OK);
    assert!(std::fs::read_to_string(dec.join("decomposition.csv")).unwrap().starts_with("ell,t,energy,flux_c,q_l1,r_l1"));
}

#[test]
fn identical_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let gen = config(dir.path(), "gen.toml", TG_MOVIE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(cli(&["generate", "--config", s(&gen), "--out", s(&a)]), EXIT_OK);
    assert_eq!(cli(&["generate", "--config", s(&gen), "--out", s(&b)]), EXIT_OK);
    for name in ["field.dlf", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert!(a.join("manifest.timestamp").exists());
}

#[test]
fn report_collects_failed_checks() {
    let dir = tempfile::tempdir().unwrap();
    let bad = config(dir.path(), "bad.toml", "[bounds]\ngamma = 3.85\nentries = [{ p = 6.0, zeta = 2.0 }]\n");
    assert_eq!(cli(&["bounds", "--config", s(&bad), "--out", s(&dir.path().join("runs/bounds"))]), EXIT_CHECK_FAILED);
    let rep = config(dir.path(), "rep.toml", "[report]\n");
    let root = dir.path().join("runs");
    assert_eq!(cli(&["report", "--config", s(&rep), "--out", s(&root)]), EXIT_CHECK_FAILED);
    let md = std::fs::read_to_string(root.join("report.md")).unwrap();
    assert!(md.contains("bounds"));
    assert!(root.join("report.json").exists());
}
