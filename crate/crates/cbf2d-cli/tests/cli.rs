//! End-to-end tests of the batch binary: exit codes, artifact layout,
//! byte-level determinism, and the direct -> inverse data round trip.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn run_with_config(dir: &Path, body: &str, extra: &[&str]) -> Output {
    let path = dir.join("run.ini");
    fs::write(&path, body).unwrap();
    Command::new(env!("CARGO_BIN_EXE_cbf2d"))
        .arg("--config")
        .arg(&path)
        .args(extra)
        .output()
        .unwrap()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process terminated by signal")
}

fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn report_of(path: &Path) -> serde_json::Value {
    let text = fs::read_to_string(path).unwrap();
    let artifact: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(artifact["format_version"], 1, "artifact must declare its format");
    assert!(
        artifact["config"]["case"].is_string(),
        "artifact must embed the resolved configuration"
    );
    artifact["report"].clone()
}

/// Parses a two-column time-series CSV written by the binary (comment lines
/// start with `#`, then a header, then `t,value` rows).
fn read_series_csv(path: &Path) -> Vec<(f64, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .skip(1)
        .map(|l| {
            let (t, v) = l.split_once(',').unwrap();
            (t.trim().parse().unwrap(), v.trim().parse().unwrap())
        })
        .collect()
}

fn out_dir(tmp: &TempDir, name: &str) -> PathBuf {
    tmp.path().join(name)
}

#[test]
fn verify_mode_passes_all_checks_on_the_default_case() {
    let tmp = TempDir::new().unwrap();
    let out = out_dir(&tmp, "out");
    let cfg = format!(
        "[run]\ncase = taylor-vortex-r2\nmode = verify\nout = {}\n\
         [grid]\nnx = 24\nny = 24\n[time]\ndt = 1e-3\nt_final = 0.05\n",
        out.display()
    );
    let res = run_with_config(tmp.path(), &cfg, &[]);
    assert_eq!(exit_code(&res), 0, "stderr: {}", stderr_text(&res));

    let ledger = report_of(&out.join("check_ledger.json"));
    assert_eq!(ledger["all_passed"], true);
    assert_eq!(ledger["self_tests_ok"], true);
    let checks = ledger["checks"].as_array().unwrap();
    assert!(checks.len() >= 20, "expected a full ledger, got {}", checks.len());
    assert!(checks.iter().all(|c| c["passed"] == true));
    let self_tests = ledger["self_tests"].as_array().unwrap();
    assert!(!self_tests.is_empty());
    assert!(self_tests.iter().all(|t| t["ok"] == true));
    assert!(out.join("stability_slopes.csv").exists());
    assert!(out.join("admissibility_report.json").exists());
}

#[test]
fn missing_mode_is_a_configuration_error() {
    let tmp = TempDir::new().unwrap();
    let res = run_with_config(tmp.path(), "[run]\ncase = taylor-vortex-r2\n", &[]);
    assert_eq!(exit_code(&res), 2);
    assert!(stderr_text(&res).contains("mode"), "stderr: {}", stderr_text(&res));
}

#[test]
fn unknown_config_key_reports_its_line_number() {
    let tmp = TempDir::new().unwrap();
    let res = run_with_config(
        tmp.path(),
        "[run]\nmode = direct\n[grid]\nmx = 32\n",
        &[],
    );
    assert_eq!(exit_code(&res), 2);
    let err = stderr_text(&res);
    assert!(err.contains("line 4"), "stderr: {err}");
    assert!(err.contains("unknown key `mx`"), "stderr: {err}");
}

#[test]
fn rejected_worker_count_is_a_configuration_error() {
    let tmp = TempDir::new().unwrap();
    let res = run_with_config(
        tmp.path(),
        "[run]\nmode = direct\n",
        &["--jobs", "0"],
    );
    assert_eq!(exit_code(&res), 2);
    assert!(stderr_text(&res).contains("jobs"), "stderr: {}", stderr_text(&res));
}

#[test]
fn mode_flag_overrides_the_configuration() {
    let tmp = TempDir::new().unwrap();
    let out = out_dir(&tmp, "out");
    let cfg = format!(
        "[run]\ncase = taylor-vortex-r2\nout = {}\n\
         [grid]\nnx = 16\nny = 16\n[time]\ndt = 1e-3\nt_final = 0.02\n",
        out.display()
    );
    let res = run_with_config(tmp.path(), &cfg, &["--mode", "direct"]);
    assert_eq!(exit_code(&res), 0, "stderr: {}", stderr_text(&res));
    assert!(out.join("trajectory.bin").exists());
}

#[test]
fn repeated_runs_write_byte_identical_artifacts() {
    let tmp = TempDir::new().unwrap();
    let out = out_dir(&tmp, "out");
    let cfg = format!(
        "[run]\ncase = taylor-vortex-r1.5\nmode = direct\nout = {}\n\
         [grid]\nnx = 16\nny = 16\n[time]\ndt = 1e-3\nt_final = 0.05\n",
        out.display()
    );
    let res = run_with_config(tmp.path(), &cfg, &[]);
    assert_eq!(exit_code(&res), 0, "stderr: {}", stderr_text(&res));
    let first = out_dir(&tmp, "first");
    fs::rename(&out, &first).unwrap();

    let res = run_with_config(tmp.path(), &cfg, &[]);
    assert_eq!(exit_code(&res), 0, "stderr: {}", stderr_text(&res));

    let mut names: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.contains(&"trajectory.bin".to_string()));
    assert!(names.contains(&"direct_report.json".to_string()));
    for name in names {
        let a = fs::read(first.join(&name)).unwrap();
        let b = fs::read(out.join(&name)).unwrap();
        assert!(a == b, "artifact {name} differs between identical runs");
    }
}

#[test]
fn direct_artifacts_feed_inverse_recovery() {
    let tmp = TempDir::new().unwrap();
    let direct_out = out_dir(&tmp, "direct");
    let cfg = format!(
        "[run]\ncase = taylor-vortex-r2\nmode = direct\nout = {}\n\
         [grid]\nnx = 24\nny = 24\n[time]\ndt = 1e-3\nt_final = 0.1\n",
        direct_out.display()
    );
    let res = run_with_config(tmp.path(), &cfg, &[]);
    assert_eq!(exit_code(&res), 0, "stderr: {}", stderr_text(&res));

    let inverse_out = out_dir(&tmp, "inverse");
    let cfg = format!(
        "[run]\nmode = inverse\nout = {out}\n\
         [grid]\nnx = 24\nny = 24\n[time]\ndt = 1e-3\nt_final = 0.1\n\
         [physics]\nmu = 0.1\nalpha = 1.0\nbeta = 0.5\nr = 2.0\n\
         [data]\nu0 = {dir}/u0.csv\nomega = {dir}/omega.csv\n\
         phi = {dir}/observation.csv\ng = {dir}/g.bin\n",
        out = inverse_out.display(),
        dir = direct_out.display()
    );
    let res = run_with_config(tmp.path(), &cfg, &[]);
    assert_eq!(exit_code(&res), 0, "stderr: {}", stderr_text(&res));

    let report = report_of(&inverse_out.join("recovery_report.json"));
    assert_eq!(report["converged"], true);
    assert!(report["observation_residual_sup"].as_f64().unwrap() < 1e-8);

    // The recovered amplitude must match the one that generated the data.
    // Past the first level the reconstruction identity is exact on its own
    // scheme data; the opening value comes from a one-sided difference and
    // carries an O(dt) seed error.
    let truth = read_series_csv(&direct_out.join("f_true.csv"));
    let recovered = read_series_csv(&inverse_out.join("f_rec.csv"));
    assert_eq!(truth.len(), recovered.len());
    let gaps: Vec<f64> = truth
        .iter()
        .zip(&recovered)
        .map(|((_, a), (_, b))| (a - b).abs())
        .collect();
    assert!(gaps[0] < 0.05, "seed gap {:.3e}", gaps[0]);
    let sup = gaps[1..].iter().fold(0.0_f64, |m, g| m.max(*g));
    assert!(sup < 1e-6, "sup amplitude gap past the seed {sup:.3e}");

    // The independent marching reconstruction is written alongside.
    let marching = read_series_csv(&inverse_out.join("f_rec_marching.csv"));
    assert_eq!(marching.len(), truth.len());
}

#[test]
fn time_step_constraint_violation_exits_three() {
    let tmp = TempDir::new().unwrap();
    let out = out_dir(&tmp, "out");
    let cfg = format!(
        "[run]\ncase = taylor-vortex-r2\nmode = direct\nout = {}\n\
         [grid]\nnx = 32\nny = 32\n[time]\ndt = 0.1\nt_final = 0.2\n",
        out.display()
    );
    let res = run_with_config(tmp.path(), &cfg, &[]);
    assert_eq!(exit_code(&res), 3, "stderr: {}", stderr_text(&res));
    assert!(!stderr_text(&res).is_empty());
}

#[test]
fn sweep_table_is_ordered_and_certificates_grow_with_horizon() {
    let tmp = TempDir::new().unwrap();
    let out = out_dir(&tmp, "out");
    let cfg = format!(
        "[run]\ncase = taylor-vortex-r2\nmode = sweep\nout = {}\n\
         [grid]\nnx = 16\nny = 16\n[time]\ndt = 1e-3\n\
         [sweep]\nhorizons = 0.02, 0.04, 0.08\n",
        out.display()
    );
    let res = run_with_config(tmp.path(), &cfg, &[]);
    assert_eq!(exit_code(&res), 0, "stderr: {}", stderr_text(&res));

    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(
        lines.next().unwrap(),
        "horizon,r,self_map_label,self_map_constant,self_map_ok,kappa,k0,\
         median_contraction_ratio,converged,iterations,amplitude_error_rel,status"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let column = |idx: usize| -> Vec<f64> {
        rows.iter().map(|r| r[idx].parse().unwrap()).collect()
    };
    let (horizon, self_map, kappa) = (column(0), column(3), column(5));
    assert!(horizon.windows(2).all(|w| w[0] < w[1]));
    assert!(
        self_map.windows(2).all(|w| w[0] < w[1]),
        "self-map constant must grow with the horizon: {self_map:?}"
    );
    assert!(kappa.windows(2).all(|w| w[0] < w[1]));
    assert!(rows.iter().all(|r| *r.last().unwrap() == "ok"));

    let report = report_of(&out.join("sweep_report.json"));
    assert_eq!(report["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn inverse_mode_on_a_catalog_case_reports_amplitude_error() {
    let tmp = TempDir::new().unwrap();
    let out = out_dir(&tmp, "out");
    let cfg = format!(
        "[run]\ncase = taylor-vortex-r3\nmode = inverse\nout = {}\n\
         [grid]\nnx = 24\nny = 24\n[time]\ndt = 1e-3\nt_final = 0.05\n",
        out.display()
    );
    let res = run_with_config(tmp.path(), &cfg, &[]);
    assert_eq!(exit_code(&res), 0, "stderr: {}", stderr_text(&res));
    let report = report_of(&out.join("recovery_report.json"));
    assert_eq!(report["converged"], true);
    let err = report["amplitude_error_rel"].as_f64().unwrap();
    assert!(err < 0.05, "amplitude error {err:.3e}");
    assert!(report["picard_marching_sup_gap"].as_f64().unwrap() < 1e-6);
}
