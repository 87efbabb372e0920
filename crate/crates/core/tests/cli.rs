use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn decolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decolab")).args(args).output().expect("spawn decolab")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = "# kicks only\nomega_half = 150\nalpha = 0.1727\ngamma = 52\nT = 0.3\nrealizations = 16\nseed = 4\n";

#[test]
fn run_writes_time_series() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write(dir.path(), "s.txt", SMALL);
    let out = dir.path().join("out.csv");
    let o = decolab(&["run", &scen, "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("rho00(T)="));
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,re_f01,im_f01,abs_f01,stderr_abs_f01,rho00,rho11,stderr_rho00");
    let first = lines.find(|l| !l.starts_with('#')).unwrap();
    let abs: f64 = first.split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(abs, 1.0);
}

#[test]
fn output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write(dir.path(), "s.txt", &format!("{SMALL}kondo = on\n"));
    let mut outputs = Vec::new();
    for threads in ["1", "4", "4"] {
        let out = dir.path().join(format!("out{}.csv", outputs.len()));
        let o = decolab(&["--threads", threads, "run", &scen, "-o", out.to_str().unwrap(), "--realizations", "70"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn bad_gamma_names_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write(dir.path(), "s.txt", "omega_half = 150\nalpha = 0.1\ngamma = -3\nT = 1\n");
    let o = decolab(&["run", &scen, "-o", dir.path().join("x.csv").to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("gamma"), "{err}");
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn figure_writes_one_file_per_curve() {
    let dir = tempfile::tempdir().unwrap();
    let o = decolab(&["figure", "fig3b", "-o", dir.path().to_str().unwrap(), "--realizations", "8", "--horizon", "0.2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["fig3b_dd_42hz.csv", "fig3b_kicks.csv", "fig3b_kondo.csv"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}

#[test]
fn unknown_figure_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = decolab(&["figure", "fig9z", "-o", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("fig9z"));
}

#[test]
fn integer_check_scan_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.txt", "omega_half = 150\nalpha = 0.1727\nT = 1\nrealizations = 8\np = 1:3:1\n");
    let out = dir.path().join("scan.csv");
    let o = decolab(&["scan", "integer-check", &cfg, "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.ends_with(",pass")), "{csv}");
}
