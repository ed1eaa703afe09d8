use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use etlab::{execute, Config, ExperimentReport, HarnessError, Mode};

fn etlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_etlab"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("exp.cfg");
    fs::write(&p, text).unwrap();
    p
}

fn config(text: &str, out: &Path) -> Config {
    let mut c = Config::parse(text).unwrap();
    c.set("output_dir", out.display());
    c
}

#[test]
fn unknown_experiment_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "experiment = E9\n");
    let status = etlab().arg("run").arg(&cfg).output().unwrap().status;
    assert_eq!(status.code(), Some(2));
}

#[test]
fn config_errors_exit_2_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for text in [
        "experiment = E1\nmesh_hh = 0.1\n",
        "experiment = E1\nmesh_h = 5\n",
        "experiment = E4\nspectral_n = 100\n",
        "experiment = E1\ndiffeo = bump:0.9,0,0.5,0,0\n",
        "experiment = E3\nkappa = exp\n",
    ] {
        let cfg = write_config(tmp.path(), &format!("{text}output_dir = {}\n", out.display()));
        let status = etlab().arg("run").arg(&cfg).output().unwrap().status;
        assert_eq!(status.code(), Some(2), "{text}");
    }
    assert!(!out.exists());
}

#[test]
fn overrides_replace_file_values() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        &format!("experiment = E1\nmesh_h = 0.3\ndiffeo = identity\nt_final = 0.01\noutput_dir = {}\n", out.display()),
    );
    let status = etlab()
        .args(["run", cfg.to_str().unwrap(), "--override", "mesh_h=0.25", "--override", "tol_gauge=1e-12"])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let r: ExperimentReport = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(r.config["mesh_h"], "0.25");
    assert_eq!(r.check("gauge_max_discrepancy").unwrap().threshold, etlab::Threshold::AtMost { limit: 1e-12 });
}

#[test]
fn identity_diffeo_gives_zero_gauge_discrepancy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("experiment = E1\nmesh_h = 0.1\ndiffeo = identity\nt_final = 0.02\n", tmp.path());
    let r = execute(&cfg, Mode::Run).unwrap();
    let c = r.check("gauge_max_discrepancy").unwrap();
    assert!(c.value <= 1e-10, "{}", c.value);
    assert!(r.pass);
    for f in ["report.json", "gauge.csv", "flux_reference.csv"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
}

#[test]
fn energy_report_contains_the_linear_trace_check() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("experiment = E2\nmesh_h = 0.05\n", tmp.path());
    let r = execute(&cfg, Mode::Run).unwrap();
    let c = r.check("energy_identity_f=x").unwrap();
    assert!((c.value - PI).abs() < 0.02 * PI, "{}", c.value);
    assert_eq!(r.pass, r.checks.iter().all(|c| c.pass));
    let text = fs::read_to_string(tmp.path().join("energy.csv")).unwrap();
    assert!(text.starts_with("case, triple_id, reference, recovered"));
}

#[test]
fn failing_checks_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        &format!("experiment = E6\nspectral_n = 128\ntol_closed_form = 1e-9\noutput_dir = {}\n", out.display()),
    );
    let status = etlab().arg("run").arg(&cfg).output().unwrap().status;
    assert_eq!(status.code(), Some(3));
    let r: ExperimentReport = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(!r.pass);
    assert!(!r.check("disk_closed_form_interior").unwrap().pass);
}

const SMALL_E5: &str = "experiment = E5\nmesh_h = 0.15\nm_max = 3\nk_sweep = 10, 20, 40\n";

#[test]
fn baselines_freeze_then_reproduce() {
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path().join("baselines");
    let mk = |extra: &str| {
        let mut c = config(&format!("{SMALL_E5}{extra}"), &tmp.path().join("out"));
        c.set("baselines_dir", base.display());
        c
    };
    assert!(matches!(execute(&mk(""), Mode::Run), Err(HarnessError::Baseline(_))));

    let frozen = execute(&mk(""), Mode::Freeze).unwrap();
    assert!(frozen.checks.iter().all(|c| !c.name.starts_with("baseline:")));
    assert!(base.join("E5.json").exists());

    let r = execute(&mk(""), Mode::Run).unwrap();
    let n = r.checks.iter().filter(|c| c.name.starts_with("baseline:")).count();
    assert_eq!(n, frozen.frozen.len());
    assert!(r.pass);

    let changed = execute(&mk("tol_member = 2e-6\n"), Mode::Run);
    assert!(matches!(changed, Err(HarnessError::Baseline(_))), "{changed:?}");
    assert!(execute(&mk("check_baseline = false\ntol_member = 2e-6\n"), Mode::Run).unwrap().pass);
}

#[test]
fn tampered_baseline_fails_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path().join("baselines");
    let mut c = config(SMALL_E5, &tmp.path().join("out"));
    c.set("baselines_dir", base.display());
    execute(&c, Mode::Freeze).unwrap();
    let path = base.join("E5.json");
    let mut b: etlab::Baseline = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    *b.values.get_mut("norm_ratio").unwrap() += 1e-5;
    fs::write(&path, serde_json::to_string(&b).unwrap()).unwrap();
    let r = execute(&c, Mode::Run).unwrap();
    assert!(!r.pass);
    let failed: Vec<&str> = r.failed_checks().map(|c| c.name.as_str()).collect();
    assert_eq!(failed, ["baseline:norm_ratio"]);
    assert_eq!(etlab::exit_code(&Ok(r)), 3);
}

#[test]
fn freezing_is_refused_when_checks_fail_or_nothing_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path().join("baselines");
    let mut c = config(&format!("{SMALL_E5}tol_member = 0\ntol_certificate = 0\n"), &tmp.path().join("out"));
    c.set("baselines_dir", base.display());
    let e = execute(&c, Mode::Freeze).unwrap_err();
    assert!(matches!(e, HarnessError::FreezeRefused(_)), "{e:?}");
    assert_eq!(e.exit_code(), 3);
    assert!(!base.join("E5.json").exists());

    let c = config("experiment = E1\n", &tmp.path().join("out1"));
    let e = execute(&c, Mode::Freeze).unwrap_err();
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn output_directory_is_exclusive() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join(".etlab.lock"), "").unwrap();
    let c = config("experiment = E6\nspectral_n = 128\n", tmp.path());
    assert!(matches!(execute(&c, Mode::Run), Err(HarnessError::Config(_))));
}

#[test]
fn list_experiments_names_all_six() {
    let out = etlab().arg("list-experiments").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for id in ["E1", "E2", "E3", "E4", "E5", "E6"] {
        assert!(text.lines().any(|l| l.starts_with(id)), "{id}");
    }
}

#[test]
fn small_cgo_run_writes_the_sweep_table() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(
        "experiment = E4\nspectral_n = 128\npotentials = bump:0.1,-0.2,0.5,0.8\nk_sweep = 20, 30, 40\n",
        tmp.path(),
    );
    let r = execute(&c, Mode::Run).unwrap();
    assert!(r.check("q0_exact").unwrap().pass);
    let text = fs::read_to_string(tmp.path().join("cgo_sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("potential, abs_k, r_norm"));
}
