use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dwlab::manifest::Manifest;
use tempfile::TempDir;

const SMALL: &str = r#"
[grid]
half_length = 64.0
points = 512

[run]
t_max = 40.0
fit_window = [3.0, 40.0]
"#;

fn dwlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dwlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("DWLAB_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// The single output directory of `command` under `out`.
fn only_dir(out: &Path, command: &str) -> PathBuf {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(command))
        .collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.pop().unwrap()
}

fn manifest(dir: &Path) -> Manifest {
    Manifest::parse(&std::fs::read_to_string(dir.join("manifest.toml")).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&dwlab(tmp.path(), &[])), 1);
    assert_eq!(code(&dwlab(tmp.path(), &["frobnicate"])), 1);
    assert_eq!(code(&dwlab(tmp.path(), &["run", "--workers", "0"])), 1);
    assert_eq!(code(&dwlab(tmp.path(), &["--help"])), 0);
    assert_eq!(code(&dwlab(tmp.path(), &["run", "--config", "absent.toml"])), 1);
}

#[test]
fn classify_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let o = dwlab(tmp.path(), &["classify", "invlog:p=1", "--out", "o"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("dini: Divergent"));
    assert!(stdout(&o).contains("oracle: Divergent"));
    let o = dwlab(tmp.path(), &["classify", "invlog:p=2", "--dim", "2", "--out", "o"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("dini: Convergent"));
    // the borderline iterated logarithm is left undecided
    assert_eq!(code(&dwlab(tmp.path(), &["classify", "iterlog:p=1,depth=2", "--out", "o"])), 3);
    assert_eq!(code(&dwlab(tmp.path(), &["classify", "invlog:p", "--out", "o"])), 1);
    assert_eq!(code(&dwlab(tmp.path(), &["classify", "invlog:p=1", "--dim", "3"])), 1);
    assert_eq!(code(&dwlab(tmp.path(), &["classify", "custom:nothing.txt"])), 1);
}

#[test]
fn classify_custom_table() {
    let tmp = TempDir::new().unwrap();
    let mut table = String::from("# s mu\n");
    for i in 0..200 {
        let s = 10f64.powf(-12.0 + 12.0 * i as f64 / 199.0);
        table.push_str(&format!("{s:e} {:e}\n", s.sqrt()));
    }
    write(tmp.path(), "sqrt.txt", &table);
    let o = dwlab(tmp.path(), &["classify", "custom:sqrt.txt", "--out", "o"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("oracle: none"));
    let dir = only_dir(&tmp.path().join("o"), "classify");
    assert!(dir.join("dini.csv").exists() && dir.join("slow_variation.csv").exists());
}

#[test]
fn config_validation_happens_before_work() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "typo.toml", "[grid]\npoint = 512\n");
    write(tmp.path(), "wrap.toml", "[grid]\nhalf_length = 40.0\npoints = 512\n[run]\nt_max = 40.0\n");
    write(tmp.path(), "npot.toml", "[grid]\npoints = 500\n");
    write(tmp.path(), "forcing.toml", "[run]\nforcing = \"pow:q=0.5\"\n");
    for cfg in ["typo.toml", "wrap.toml", "npot.toml", "forcing.toml"] {
        let o = dwlab(tmp.path(), &["run", "--config", cfg, "--out", "o"]);
        assert_eq!(code(&o), 1, "{cfg}");
    }
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn linear_fits_and_mismatch() {
    let tmp = TempDir::new().unwrap();
    let o = dwlab(tmp.path(), &["linear", "--out", "o"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = only_dir(&tmp.path().join("o"), "linear");
    for f in ["norms.csv", "fits.csv", "plot_decay.py", "manifest.toml"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let m = manifest(&dir);
    assert!((m.report.values["exponent_Linf"] + 0.5).abs() < 0.1);
    assert!((m.report.values["exponent_L2"] + 0.25).abs() < 0.1);
    assert!((m.report.values["exponent_H1dot"] + 0.75).abs() < 0.1);

    // an impossible tolerance turns the comparison into a mismatch
    write(tmp.path(), "tight.toml", "[linear]\ntolerance = 1e-9\n");
    let o = dwlab(tmp.path(), &["linear", "--config", "tight.toml", "--out", "t"]);
    assert_eq!(code(&o), 2);
    let m = manifest(&only_dir(&tmp.path().join("t"), "linear"));
    assert!(m.report.status.starts_with("mismatch"));
}

#[test]
fn linear_zero_data_is_not_an_error() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "zero.toml", "[data]\nepsilon = 0.0\n");
    let o = dwlab(tmp.path(), &["linear", "--config", "zero.toml", "--out", "o"]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(only_dir(&tmp.path().join("o"), "linear").join("norms.csv")).unwrap();
    for line in csv.lines().skip(1) {
        assert!(line.split(',').skip(1).all(|v| v.parse::<f64>().unwrap() == 0.0), "{line}");
    }
}

#[test]
fn run_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "run.toml", &SMALL.replace("[run]\n", "[run]\nforcing = \"invlog:p=1\"\n"));
    let a = dwlab(tmp.path(), &["run", "--config", "run.toml", "--out", "a", "--workers", "1"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let b = dwlab(tmp.path(), &["run", "--config", "run.toml", "--out", "b", "--workers", "1"]);
    assert_eq!(code(&b), 0);
    let (da, db) = (only_dir(&tmp.path().join("a"), "run"), only_dir(&tmp.path().join("b"), "run"));
    assert_eq!(da.file_name(), db.file_name());
    let ta = std::fs::read(da.join("trajectory.csv")).unwrap();
    assert_eq!(ta, std::fs::read(db.join("trajectory.csv")).unwrap());

    // replaying the manifest repeats the scalars
    let ma = manifest(&da);
    assert!(ma.hash_matches());
    assert_eq!(ma.report.outcome.as_deref(), Some("CompletedHorizon"));
    let mpath = da.join("manifest.toml");
    let c = dwlab(tmp.path(), &["run", "--config", mpath.to_str().unwrap(), "--out", "c", "--workers", "1"]);
    assert_eq!(code(&c), 0);
    let mc = manifest(&only_dir(&tmp.path().join("c"), "run"));
    assert_eq!(ma.config_hash, mc.config_hash);
    for (k, v) in &ma.report.values {
        let w = mc.report.values[k];
        assert!((v - w).abs() <= 1e-12 * v.abs().max(1.0), "{k}: {v} vs {w}");
    }
}

#[test]
fn output_root_from_environment() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "pow.toml", &SMALL.replace("[run]\n", "[run]\nforcing = \"pow:q=1.5\"\n"));
    let o = Command::new(env!("CARGO_BIN_EXE_dwlab"))
        .args(["run", "--config", "pow.toml"])
        .current_dir(tmp.path())
        .env("DWLAB_OUT", "from-env")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let m = manifest(&only_dir(&tmp.path().join("from-env"), "run"));
    assert_eq!(m.report.outcome.as_deref(), Some("BlewUpAt"));
    assert!(m.report.t_est.unwrap() < 40.0);
}

#[test]
fn seed_is_recorded_and_hashed() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "c.toml", &SMALL.replace("[run]\n", "[run]\nforcing = \"zero\"\n"));
    assert_eq!(code(&dwlab(tmp.path(), &["run", "--config", "c.toml", "--out", "a", "--seed", "11"])), 0);
    let m = manifest(&only_dir(&tmp.path().join("a"), "run"));
    assert_eq!(m.config.seed, 11);
    assert!(m.hash_matches());
}

#[test]
fn sweep_writes_summary_and_isolated_runs() {
    let tmp = TempDir::new().unwrap();
    let cfg = format!(
        "{SMALL}\n[sweep]\nforcings = [\"invlog:p=2\", \"pow:q=1.5\"]\nepsilons = [0.1, 0.3, 1.0]\n"
    );
    write(tmp.path(), "sweep.toml", &cfg);
    let o = dwlab(tmp.path(), &["sweep", "--config", "sweep.toml", "--out", "o", "--workers", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = only_dir(&tmp.path().join("o"), "sweep");
    let summary = std::fs::read_to_string(dir.join("summary.csv")).unwrap();
    let rows: Vec<Vec<&str>> = summary.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0], i.to_string());
        assert_eq!(r[9], "ok");
        let sub = dir.join(format!("run_{i:03}"));
        assert!(sub.join("trajectory.csv").exists());
        let m = manifest(&sub);
        assert_eq!(m.config.run.forcing, r[1]);
    }
    assert!(rows.iter().filter(|r| r[1] == "invlog:p=2").all(|r| r[2] == "Convergent" && r[4] == "CompletedHorizon"));
    // sub-critical power: lifespan shrinks as the amplitude grows
    let t: Vec<f64> = rows.iter().filter(|r| r[1] == "pow:q=1.5").map(|r| r[5].parse().unwrap()).collect();
    assert!(t[2].is_finite() && t.windows(2).all(|w| w[1] <= w[0]), "{t:?}");
    let table = std::fs::read_to_string(dir.join("dichotomy.txt")).unwrap();
    assert!(table.contains("invlog:p=2"));
    assert!(dir.join("plot_sweep.py").exists());
}

#[test]
fn sweep_rejects_empty_lists() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "a.toml", "[sweep]\nforcings = []\nepsilons = [0.1]\n");
    write(tmp.path(), "b.toml", "[sweep]\nforcings = [\"zero\"]\n");
    write(tmp.path(), "c.toml", "[sweep]\nforcings = [\"zero\"]\nepsilons = [-1.0]\n");
    for cfg in ["a.toml", "b.toml", "c.toml"] {
        assert_eq!(code(&dwlab(tmp.path(), &["sweep", "--config", cfg, "--out", "o"])), 1, "{cfg}");
    }
}

#[test]
fn certificate_runs_then_loads_saved_states() {
    let tmp = TempDir::new().unwrap();
    let cfg = SMALL.replace("[run]\n", "[run]\nforcing = \"invlog:p=1\"\nsave_states = true\n")
        + "\n[certificate]\nr_grid = [16.0, 24.0, 32.0]\nr0_sweep = [16.0, 24.0]\n";
    write(tmp.path(), "cert.toml", &cfg);
    let o = dwlab(tmp.path(), &["certificate", "--config", "cert.toml", "--out", "o"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("witness"));
    let dir = only_dir(&tmp.path().join("o"), "certificate");
    let m = manifest(&dir);
    assert!(m.report.values["Y_R0"] > 0.0);
    assert!(m.report.values["max_bound_ratio"] <= 1.0);
    assert!(m.report.values["lhs_limit"].is_infinite());
    let text = std::fs::read_to_string(dir.join("certificate.txt")).unwrap();
    assert!(text.contains("bound Y <= log2 I_R holds = true"));
    let sens = std::fs::read_to_string(dir.join("r0_sensitivity.csv")).unwrap();
    assert_eq!(sens.lines().count(), 3);

    let states = dir.join("states");
    let load = format!(
        "[run]\nforcing = \"invlog:p=1\"\n[certificate]\nr_grid = [16.0, 24.0, 32.0]\nr0_sweep = [16.0]\nstates = {:?}\n",
        states.to_str().unwrap()
    );
    write(tmp.path(), "load.toml", &load);
    let o = dwlab(tmp.path(), &["certificate", "--config", "load.toml", "--out", "l"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let loaded = manifest(&only_dir(&tmp.path().join("l"), "certificate"));
    let (a, b) = (m.report.values["Y_R0"], loaded.report.values["Y_R0"]);
    assert!((a - b).abs() <= 1e-12 * a, "{a} vs {b}");
}

#[test]
fn certificate_input_errors() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "missing.toml", "[run]\nforcing = \"invlog:p=1\"\n[certificate]\nstates = \"nowhere\"\n");
    std::fs::create_dir(tmp.path().join("empty")).unwrap();
    write(tmp.path(), "empty.toml", "[run]\nforcing = \"invlog:p=1\"\n[certificate]\nstates = \"empty\"\n");
    write(tmp.path(), "pow.toml", "[run]\nforcing = \"pow:q=1.5\"\n");
    let zero_mean = SMALL.replace("[run]\n", "[run]\nforcing = \"invlog:p=1\"\n")
        + "[data]\nshape = \"dgaussian\"\n[certificate]\nr_grid = [16.0, 32.0]\nr0_sweep = []\n";
    write(tmp.path(), "zm.toml", &zero_mean);
    write(tmp.path(), "short.toml", &SMALL.replace("[run]\n", "[run]\nforcing = \"invlog:p=1\"\n"));
    for cfg in ["missing.toml", "empty.toml", "pow.toml", "zm.toml", "short.toml"] {
        let o = dwlab(tmp.path(), &["certificate", "--config", cfg, "--out", "o"]);
        assert_eq!(code(&o), 1, "{cfg}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
