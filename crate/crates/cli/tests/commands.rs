use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hdpid_cli::config::RunConfig;

fn hdpid(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdpid"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn shipped_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn shipped_configs_parse_and_default_matches_builtin() {
    let default = RunConfig::load(&shipped_config("default.toml")).unwrap();
    assert_eq!(default, RunConfig::default());
    let fixture = RunConfig::load(&shipped_config("fixture_gains.toml")).unwrap().validate().unwrap();
    assert!(fixture.fixed_gains().is_some());
    assert!(fixture.fixed_compensation().is_some());
}

#[test]
fn tune_reports_gains_level_and_abscissa() {
    let dir = tempfile::tempdir().unwrap();
    let out = hdpid(&["tune"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("tune.json"));
    assert_eq!(report["K_p"].as_array().unwrap().len(), 2);
    assert_eq!(report["K_i"][0].as_array().unwrap().len(), 2);
    assert!(report["evp"]["lambda_star"].as_f64().unwrap() >= -1e-6);
    assert!(report["spectral_abscissa"].as_f64().unwrap() < 0.0);
    assert!(report["hinf"].is_null());
}

#[test]
fn hinf_flag_adds_bounded_real_section() {
    let dir = tempfile::tempdir().unwrap();
    let out = hdpid(&["tune", "--hinf"], dir.path());
    assert!(out.status.success());
    let report = json(&dir.path().join("tune.json"));
    let hinf = &report["hinf"];
    assert_eq!(hinf["status"], "Infeasible");
    assert!(hinf.get("lambda_star").is_some());
    assert!(hinf["constraint_level"].as_f64().unwrap() > 0.0);
}

#[test]
fn malformed_config_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let out_dir = dir.path().join("out");
    for text in ["T = \"long\"", "unknown_key = 1", "[sim]\ndt = 0.0", "phi = 2.0"] {
        std::fs::write(&bad, text).unwrap();
        let out = hdpid(&["run", "--config", bad.to_str().unwrap()], &out_dir);
        assert_eq!(out.status.code(), Some(2), "{text}");
        assert!(!out_dir.exists(), "{text}");
    }
    let out = hdpid(&["run", "--schedule", "sometimes"], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    std::fs::write(&cfg, "T = 1.0\n").unwrap();
    let out = hdpid(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let header = "t,chi,gamma,e_chi,e_gamma,de_chi,de_gamma,phi,nz,d_chi,d_gamma,lyap_norm";
    for name in ["run_K.csv", "run_KdK.csv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert_eq!(text.lines().next().unwrap(), header);
        assert_eq!(text.lines().count(), 1002);
    }
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 13);
    let eigs = std::fs::read_to_string(dir.path().join("eigs.csv")).unwrap();
    assert_eq!(eigs.lines().count(), 9);
    let report = json(&dir.path().join("report.json"));
    assert_eq!(report["compensation"]["source"], "solved");
    assert!(report["compensation"]["lambda_star"].as_f64().unwrap() >= -1.0 - 1e-6);
    assert!(report["abscissa_KdK"].as_f64().unwrap() < 0.0);
}

#[test]
fn zero_disturbance_at_equilibrium_gives_zero_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rest.toml");
    std::fs::write(
        &cfg,
        "T = 1.0\ngamma = 0.0\nchi = 0.0\nphi = 0.0\nn_z = 1.0\nL_d_chi = 0.0\nL_d_gamma = 0.0\n",
    )
    .unwrap();
    let out = hdpid(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["run_K.csv", "run_KdK.csv"] {
        let mut reader = csv::Reader::from_path(dir.path().join(name)).unwrap();
        let headers = reader.headers().unwrap().clone();
        let columns: Vec<usize> = ["e_chi", "e_gamma", "de_chi", "de_gamma"]
            .iter()
            .map(|c| headers.iter().position(|h| h == *c).unwrap())
            .collect();
        for row in reader.records() {
            let row = row.unwrap();
            for &c in &columns {
                assert_eq!(row[c].parse::<f64>().unwrap(), 0.0);
            }
        }
    }
}

#[test]
fn compare_and_eigs_on_fixture_gains() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = shipped_config("fixture_gains.toml");
    let out = hdpid(
        &["compare", "--config", cfg.to_str().unwrap(), "--seeds", "2", "--jobs", "2"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 2 * 12);
    assert!(String::from_utf8_lossy(&out.stdout).contains("2 seeds"));

    let out = hdpid(&["eigs", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let mut reader = csv::Reader::from_path(dir.path().join("eigs.csv")).unwrap();
    let re: Vec<f64> = reader.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(re.len(), 8);
    assert!(re.iter().all(|v| *v < 0.0));
    // K = diag gains gives a repeated pair near −0.1993.
    assert!((re[0] + 0.19932).abs() < 1e-4);
}

#[test]
fn reruns_overwrite_with_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    std::fs::write(&cfg, "T = 0.5\n[sim]\nseed = 9\n").unwrap();
    let args = ["run", "--config", cfg.to_str().unwrap()];
    assert!(hdpid(&args, dir.path()).status.success());
    let first = std::fs::read(dir.path().join("run_KdK.csv")).unwrap();
    assert!(hdpid(&args, dir.path()).status.success());
    assert_eq!(first, std::fs::read(dir.path().join("run_KdK.csv")).unwrap());
}
