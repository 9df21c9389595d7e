use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use greenlab_cli::commands::SpecialValue;
use greenlab_cli::config::FileConfig;
use greenlab_cli::VerifySummary;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_greenlab"));
    c.env_remove("GREENLAB_WORKERS");
    c
}

fn packaged(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn special(args: &[&str]) -> SpecialValue {
    let mut all = vec!["special"];
    all.extend_from_slice(args);
    let o = run(&all);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

/// Summary JSON with the wall-clock fields blanked.
fn summary_without_clock(path: &Path) -> VerifySummary {
    let mut s: VerifySummary = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    s.manifest.started.clear();
    s.manifest.finished.clear();
    s
}

#[test]
fn special_functions_match_closed_forms() {
    let ml = special(&["ml", "--beta", "1", "--t", "2"]);
    assert!((ml.value - 0.135_335_283_236_612_7).abs() < 1e-14);
    assert_eq!(special(&["u", "--a", "0", "--t", "5"]).value, 1.0);
    let chi = special(&["chi", "--a", "0", "--lam", "7"]);
    assert!((chi.value - 7.0).abs() <= 1e-8);
    let g = special(&["g", "--a", "0", "--r", "1"]);
    assert!((g.value * 4.0 * std::f64::consts::PI - 1.0).abs() < 1e-6);
}

#[test]
fn special_usage_errors_exit_2() {
    assert_eq!(code(&run(&["special", "chi", "--a", "0"])), 2);
    assert_eq!(code(&run(&["special", "ml", "--beta", "-1", "--t", "1"])), 2);
    assert_eq!(code(&run(&["special", "nope"])), 2);
}

#[test]
fn bounds_csv_schema_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let o = run(&[
        "bounds",
        "--config",
        packaged("disk_bounds.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(out.join("bounds.csv")).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["x1", "x2", "y1", "y2", "g", "branch", "same_component"]);
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    // 3 x 4 grid, one coincident pair
    assert_eq!(rows.len(), 11);
    for row in &rows {
        let g: f64 = row[4].parse().unwrap();
        assert!(g > 0.0 && g.is_finite());
        assert_eq!(&row[5], "d2");
        assert_eq!(&row[6], "true");
    }
    let m: greenlab_cli::RunManifest =
        serde_json::from_str(&fs::read_to_string(out.join("bounds_manifest.json")).unwrap()).unwrap();
    assert_eq!(m.skipped_pairs, 1);
    let fc = FileConfig::load(&packaged("disk_bounds.toml")).unwrap();
    assert_eq!(m.config_hash, fc.hash().unwrap());
}

#[test]
fn bounds_rejects_empty_grid_and_malformed_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    let text = fs::read_to_string(packaged("disk_bounds.toml")).unwrap();
    let cut = text.split("[grid]").next().unwrap().to_string();
    fs::write(&cfg, &cut).unwrap();
    let out = dir.path().join("o");
    let o = run(&["bounds", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    fs::write(&cfg, "[process]\nd = \"two\"\n").unwrap();
    let o = run(&["bounds", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = run(&["bounds", "--config", "/nonexistent/x.toml", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_capacity_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cap");
    let o = run(&[
        "verify",
        "capacity",
        "--config",
        packaged("capacity.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary_without_clock(&out.join("capacity.json"));
    assert_eq!(s.theorem, "capacity");
    assert!(s.pass);
    assert!(s.band.min > 0.0 && s.band.max >= s.band.min);
    assert!(Path::new(&s.details_path).exists());
    for f in &s.manifest.outputs {
        assert!(Path::new(f).exists(), "{f}");
    }
    let svg = fs::read_to_string(out.join("capacity.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("</svg>"));
}

#[test]
fn verify_perturbation_with_wide_gap_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "verify",
        "perturbation",
        "--config",
        packaged("perturbation_gap.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_is_deterministic_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = packaged("exit_time_interval.toml");
    let mut summaries = Vec::new();
    let mut reports = Vec::new();
    for (k, workers) in ["1", "3", "1"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let o = bin()
            .args(["verify", "exit_time", "--config", cfg.to_str().unwrap(), "--paths", "4000", "--seed", "9"])
            .args(["--out", out.to_str().unwrap()])
            .env("GREENLAB_WORKERS", workers)
            .output()
            .unwrap();
        assert!(matches!(code(&o), 0 | 1 | 3), "{}", String::from_utf8_lossy(&o.stderr));
        let mut s = summary_without_clock(&out.join("exit_time.json"));
        s.details_path.clear();
        s.manifest.outputs.clear();
        summaries.push(s);
        reports.push(fs::read(out.join("exit_time_report.json")).unwrap());
        assert_eq!(summaries[k].manifest.seed, 9);
    }
    assert_eq!(summaries[0], summaries[1]);
    assert_eq!(summaries[0], summaries[2]);
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0], reports[2]);
}

#[test]
fn simulate_writes_exit_and_green_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    fs::write(
        &cfg,
        r#"
[process]
d = 1
alpha = 1.0
a = 0.0

[domain]
kind = "interval_union"
intervals = [[-1.0, 1.0]]

[grid]
xs = [[0.0]]
ys = [[0.5], [0.01]]

[run]
n_paths = 4000
seed = 3
"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(out.join("exit_times.csv")).unwrap();
    let row = r.records().next().unwrap().unwrap();
    let mean: f64 = row[1].parse().unwrap();
    let se: f64 = row[2].parse().unwrap();
    // E tau = (1 - x^2) / 2 for generator Delta on (-1, 1)
    assert!((mean - 0.5).abs() < 4.0 * se + 0.01, "{mean} +- {se}");
    let mut r = csv::Reader::from_path(out.join("green.csv")).unwrap();
    let rows: Vec<_> = r.records().map(|x| x.unwrap()).collect();
    // the pair 0.01 apart is inside three bandwidths and is skipped
    assert_eq!(rows.len(), 1);
    let est: f64 = rows[0][3].parse().unwrap();
    let se: f64 = rows[0][4].parse().unwrap();
    // (x - lo)(hi - y) / L on (-1, 1) with x = 0, y = 0.5
    let exact = 1.0 * 0.5 / 2.0;
    assert!((est - exact).abs() < 4.0 * se + 0.02, "{est} vs {exact}");
}

#[test]
fn packaged_configs_parse() {
    let dir = packaged("");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let fc = FileConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            fc.spec().unwrap();
            n += 1;
        }
    }
    assert!(n >= 10);
}
