use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stofv(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stofv"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("STOFV_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: [&str; 2] = ["--set", "grid.m=16"];

#[test]
fn run_is_byte_identical_across_invocations_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["run", SMALL[0], SMALL[1], "--set", "output.snapshot_times=[0.1,0.25]"];
    let oa = stofv(&args, a.path());
    assert!(oa.status.success(), "{}", stderr(&oa));
    let mut args_b = args.to_vec();
    args_b.extend(["--threads", "1"]);
    assert!(stofv(&args_b, b.path()).status.success());
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4, "{names:?}");
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
    let snap = fs::read_to_string(a.path().join("snapshot_000.csv")).unwrap();
    let lines: Vec<&str> = snap.lines().collect();
    assert!(lines[0].starts_with("# config_hash="));
    assert!(lines[0].contains(",master_seed=0"));
    assert_eq!(lines[1], "i,value");
    assert_eq!(lines.len(), 2 + 16);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["grid"]["m"], 16);
    assert_eq!(manifest["snapshots"].as_array().unwrap().len(), 3);
}

#[test]
fn diagnose_constant_state_has_zero_residuals() {
    let d = tempfile::tempdir().unwrap();
    let o = stofv(
        &[
            "diagnose",
            SMALL[0],
            SMALL[1],
            "--set",
            "initial.name=constant",
            "--set",
            "initial.value=0.3",
            "--set",
            "noise.modes=[]",
        ],
        d.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let ledger = fs::read_to_string(d.path().join("ledger.csv")).unwrap();
    let mut lines = ledger.lines().skip(1);
    assert_eq!(lines.next().unwrap(), stofv::diagnostics::LEDGER_COLUMNS);
    for line in lines {
        let residual: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(residual, 0.0);
    }
}

#[test]
fn converge_on_shock_gives_decreasing_errors() {
    let d = tempfile::tempdir().unwrap();
    let o = stofv(
        &[
            "converge",
            "--set",
            "initial.name=riemann",
            "--set",
            "initial.left=1",
            "--set",
            "initial.right=0",
            "--set",
            "time.t_final=0.3",
        ],
        d.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(d.path().join("convergence.csv")).unwrap();
    let errors: Vec<f64> = csv.lines().skip(2).map(|l| l.split(',').nth(6).unwrap().parse().unwrap()).collect();
    assert_eq!(errors.len(), 4);
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}

#[test]
fn mc_and_couple_write_tables() {
    let d = tempfile::tempdir().unwrap();
    let common = ["--set", "ensemble.paths=4", "--set", "time.t_final=0.1", "--set", "refinement.levels=[8,16]"];
    let mut mc = vec!["mc"];
    mc.extend(common);
    assert!(stofv(&mc, d.path()).status.success());
    let mut couple = vec!["couple"];
    couple.extend(common);
    assert!(stofv(&couple, d.path()).status.success());
    let paths = fs::read_to_string(d.path().join("paths.csv")).unwrap();
    assert_eq!(paths.lines().count(), 2 + 4);
    let coupled = fs::read_to_string(d.path().join("coupled.csv")).unwrap();
    assert_eq!(coupled.lines().nth(1).unwrap(), "level,m,h,dt,M,p,error,stderr,order");
}

#[test]
fn config_errors_exit_with_2() {
    let d = tempfile::tempdir().unwrap();
    let o = stofv(&["run", "--set", "time.theta=2"], d.path());
    assert_eq!(o.status.code(), Some(2));
    let line = stderr(&o);
    assert!(line.starts_with("error kind=config:"), "{line}");
    assert_eq!(line.lines().count(), 1);

    let o = stofv(&["run", "--config", "/nonexistent.toml"], d.path());
    assert_eq!(o.status.code(), Some(2));
    // no exact solution for the default sine data
    assert_eq!(stofv(&["converge"], d.path()).status.code(), Some(2));
}

#[test]
fn cfl_violation_exits_with_3() {
    let d = tempfile::tempdir().unwrap();
    let o = stofv(&["run", "--set", "time.dt=0.1"], d.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error kind=cfl:"));
}

#[test]
fn blowup_exits_with_4() {
    let d = tempfile::tempdir().unwrap();
    // noise amplitudes far beyond any sensible scale overflow within a few steps
    let o = stofv(
        &["run", SMALL[0], SMALL[1], "--set", "noise.modes=[{\"sigma\":1e300,\"kappa\":[1],\"trig\":\"sin\"}]"],
        d.path(),
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error kind=blowup:"));
}

#[test]
fn validate_flux_reports_axioms() {
    let d = tempfile::tempdir().unwrap();
    for kind in ["godunov", "rusanov", "engquist_osher"] {
        let o = stofv(&["validate-flux", "--set", &format!("flux.numerical={kind}")], d.path());
        assert!(o.status.success(), "{kind}: {}", stderr(&o));
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(d.path().join("flux_validation.json")).unwrap()).unwrap();
        assert_eq!(v["all_ok"], true);
        assert_eq!(v["config"]["flux"]["numerical"], kind);
    }
}

#[test]
fn toml_config_files_are_accepted() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    fs::write(
        &cfg,
        "[grid]\nm = 8\n\n[time]\nt_final = 0.05\n\n[initial]\nname = \"riemann\"\nleft = 1.0\nright = 0.0\n",
    )
    .unwrap();
    let o = stofv(&["run", "--config", cfg.to_str().unwrap()], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["initial"]["name"], "riemann");
}
