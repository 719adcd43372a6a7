use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const HEADER: &str = "family,M,K,alpha,r,delta,cutoff,attenuation_db_per_km,L_tot_km,L0_km,n_links,eta,P0,F0,P_tot,F_tot,skr_bpcu,cost_coeff,bound_model,flags";

fn rsbc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsbc"))
        .args(args)
        .env_remove("RSBC_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run_to(dir: &TempDir, command: &str, config: &str, out: &str) -> (Output, PathBuf) {
    let cfg = write_config(dir, &format!("{out}.conf"), config);
    let out = dir.path().join(out);
    let o = rsbc(&[
        command,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    (o, out)
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const CAT_SWEEP: &str = "\
# cat key rate against alpha
family = cat
M = 2
L_tot = 500
L0 = 0.4
grid.alpha = 0.8:2.0:0.2
";

#[test]
fn sweep_writes_schema_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_to(&dir, "sweep", CAT_SWEEP, "cat.csv");
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), HEADER);
    let rows = rows(&out);
    assert_eq!(rows.len(), 7);
    assert!(rows
        .iter()
        .all(|r| r.len() == 20 && r[0] == "cat" && r[2].is_empty()));
    assert_eq!(rows[0][3], "8.00000000000e-1");

    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(sidecar["command"], "sweep");
    assert_eq!(sidecar["config"]["t0"], "1e-5");
    assert_eq!(sidecar["config"]["cutoff"], "40");
    assert_eq!(sidecar["config_hash"].as_str().unwrap().len(), 64);
    assert!(sidecar["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(sidecar["version"].is_string());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let config = format!("{CAT_SWEEP}optimize.alpha = 0.05:3\ngrid.L0 = 0.4, 0.8\n")
        .replace("grid.alpha = 0.8:2.0:0.2\n", "");
    let (a, out_a) = run_to(&dir, "sweep", &config, "a.csv");
    let (b, out_b) = run_to(&dir, "sweep", &config, "b.csv");
    let serial = format!("{config}execution = serial\n");
    let (c, out_c) = run_to(&dir, "sweep", &serial, "c.csv");
    assert!(a.status.success() && b.status.success() && c.status.success());
    let bytes = fs::read(&out_a).unwrap();
    assert_eq!(bytes, fs::read(&out_b).unwrap());
    assert_eq!(bytes, fs::read(&out_c).unwrap());
}

#[test]
fn bounds_emit_three_models_per_distance() {
    let dir = TempDir::new().unwrap();
    let config = "family = binomial\nM = 2\nK = 2\nL_tot = 1\ngrid.L_tot = 0.2:1.0:0.2\n";
    let (o, out) = run_to(&dir, "bounds", config, "bounds.csv");
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = rows(&out);
    assert_eq!(rows.len(), 15);
    for chunk in rows.chunks(3) {
        let models: Vec<&str> = chunk.iter().map(|r| r[18].as_str()).collect();
        assert_eq!(
            models,
            ["exact_proportional", "overlap_bound", "worst_case"]
        );
        assert!(chunk.iter().all(|r| r[10] == "1" && r[8] == chunk[0][8]));
        let skr: Vec<f64> = chunk.iter().map(|r| r[16].parse().unwrap()).collect();
        assert!(skr[2] <= skr[1] && skr[1] <= skr[0]);
    }
}

#[test]
fn link_and_optimize() {
    let dir = TempDir::new().unwrap();
    let base = "family = cat\nM = 2\nalpha = 1.2649\nL_tot = 500\nL0 = 0.4\n";
    let (o, out) = run_to(&dir, "link", base, "link.csv");
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(rows(&out).len(), 1);
    assert_eq!(rows(&out)[0][10], "1250");

    let (o, out) = run_to(
        &dir,
        "optimize",
        &format!("{base}optimize.alpha = 0.05:3\n"),
        "opt.csv",
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let skr: f64 = rows(&out)[0][16].parse().unwrap();
    assert!((2.5e-8..=2.3e-7).contains(&skr), "{skr}");
}

#[test]
fn codewords_table() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_to(
        &dir,
        "codewords",
        "family = binomial\nM = 2\nK = 1\n",
        "cw.csv",
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,zero_re,zero_im,one_re,one_im");
    assert_eq!(lines.len(), 42);
    assert!(lines[3].starts_with("2,7.07106781187e-1,"));
}

#[test]
fn resources_and_cost() {
    let dir = TempDir::new().unwrap();
    let config = "family = binomial\nM = 2\nK = 2\nL_tot = 50\nL0 = 1\ntarget_skr = 1e-2\n";
    let (o, out) = run_to(&dir, "resources", config, "res.csv");
    assert!(o.status.success(), "{}", stderr(&o));
    let n: usize = rows(&out)[0][10].parse().unwrap();
    let skr: f64 = rows(&out)[0][16].parse().unwrap();
    assert!(n >= 1 && skr >= 1e-2);

    let config = "family = binomial\nM = 2\nL_tot = 1000\noptimize.K = 1:10\ntarget_cost = 100\ncalibrate_L0 = 0.642\n";
    let (o, out) = run_to(&dir, "cost", config, "cost.csv");
    assert!(o.status.success(), "{}", stderr(&o));
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    let l0 = sidecar["results"]["L0_target_km"].as_f64().unwrap();
    assert!((l0 - 0.642).abs() < 1e-3, "{l0}");
    assert_eq!(rows(&out).len(), 2);
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let dir = TempDir::new().unwrap();
    let (o, _) = run_to(
        &dir,
        "link",
        &CAT_SWEEP.replace("L0", "alhpa = 1\nL0"),
        "bad.csv",
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alhpa"));

    let (o, _) = run_to(
        &dir,
        "link",
        "family = binomial\nM = 2\nK = 2\nr = 0.1\nL_tot = 1\nL0 = 1\n",
        "r.csv",
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`r`"));
}

#[test]
fn computation_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let config =
        "family = binomial\nM = 2\nK = 2\nL_tot = 1\nL0 = 1\ntarget_skr = 10\nn_max = 16\n";
    let (o, _) = run_to(&dir, "resources", config, "unreachable.csv");
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("unreachable"));
}

#[test]
fn io_errors_exit_4() {
    let o = rsbc(&["link", "--config", "/nonexistent/run.conf"]);
    assert_eq!(o.status.code(), Some(4));
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "ok.conf",
        "family = cat\nM = 2\nalpha = 1\nL_tot = 10\nL0 = 1\n",
    );
    let o = rsbc(&[
        "link",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        "/nonexistent/dir/out.csv",
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn stdout_without_out_and_thread_env() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "ok.conf",
        "family = cat\nM = 2\nalpha = 1\nL_tot = 10\nL0 = 1\n",
    );
    let o = Command::new(env!("CARGO_BIN_EXE_rsbc"))
        .args(["link", "--config", cfg.to_str().unwrap()])
        .env("RSBC_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with(HEADER));
    let o = Command::new(env!("CARGO_BIN_EXE_rsbc"))
        .args(["link", "--config", cfg.to_str().unwrap()])
        .env("RSBC_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
