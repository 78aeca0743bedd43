use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_isabc-sim");
const HEADER: &str = "point_id,param_name,param_value,snr_db,alpha,p_pilot_db,n,z,metric,value,ci99,trials,seed";

fn sim(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_inputs(dir: &Path) -> (String, String) {
    let config = dir.join("base.cfg");
    let sweep = dir.join("sweep.cfg");
    fs::write(&config, "snr_db = 15\nz = 2\n").unwrap();
    fs::write(&sweep, "trials = 200\nseed = 9\nsweep.alpha = 0.25, 1\nsweep.snr_db = 5, 25\n").unwrap();
    (config.display().to_string(), sweep.display().to_string())
}

fn run_sweep(config: &str, sweep: &str, out: &Path, workers: &str) -> Output {
    sim(&["run", "--config", config, "--sweep", sweep, "--out", out.to_str().unwrap(), "--workers", workers])
}

#[test]
fn sweep_csv_has_contract_header_and_all_points() {
    let dir = tempfile::tempdir().unwrap();
    let (config, sweep) = write_inputs(dir.path());
    let out = dir.path().join("r.csv");
    let o = run_sweep(&config, &sweep, &out, "2");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    let ids: std::collections::BTreeSet<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ids.into_iter().collect::<Vec<_>>(), ["0", "1", "2", "3"]);
}

#[test]
fn worker_count_does_not_change_output_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (config, sweep) = write_inputs(dir.path());
    let outs: Vec<Vec<u8>> = ["1", "3", "8"]
        .iter()
        .map(|w| {
            let out = dir.path().join(format!("w{w}.csv"));
            assert!(run_sweep(&config, &sweep, &out, w).status.success());
            fs::read(out).unwrap()
        })
        .collect();
    assert!(outs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn seed_flag_overrides_sweep_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (config, sweep) = write_inputs(dir.path());
    let out = dir.path().join("s.csv");
    let o = sim(&["run", "--config", &config, "--sweep", &sweep, "--out", out.to_str().unwrap(), "--seed", "44"]);
    assert!(o.status.success());
    let text = fs::read_to_string(out).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",44")));
}

#[test]
fn interrupted_sweep_resumes_to_identical_file() {
    let dir = tempfile::tempdir().unwrap();
    let (config, sweep) = write_inputs(dir.path());
    let full = dir.path().join("full.csv");
    assert!(run_sweep(&config, &sweep, &full, "2").status.success());
    let text = fs::read_to_string(&full).unwrap();

    // keep the first point and a torn fragment of the second
    let first_rows = text.lines().take_while(|l| !l.starts_with("1,")).count();
    let mut cut: String = text.lines().take(first_rows + 2).map(|l| format!("{l}\n")).collect();
    cut.push_str("1,alpha;snr");
    let partial = dir.path().join("partial.csv");
    fs::write(&partial, cut).unwrap();

    let o = run_sweep(&config, &sweep, &partial, "2");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("3 points run, 1 already complete"));
    assert_eq!(fs::read_to_string(&partial).unwrap(), text);
}

#[test]
fn resume_refuses_a_file_from_another_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let (config, sweep) = write_inputs(dir.path());
    let out = dir.path().join("r.csv");
    assert!(run_sweep(&config, &sweep, &out, "1").status.success());
    let o = sim(&["run", "--config", &config, "--sweep", &sweep, "--out", out.to_str().unwrap(), "--seed", "1"]);
    assert!(!o.status.success());
}

#[test]
fn selftest_passes_every_check() {
    let o = sim(&["selftest"]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().count() >= 7);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")), "{stdout}");
}

#[test]
fn point_prints_metrics_for_requested_operating_point() {
    let o = sim(&["point", "--snr-db", "-5", "--alpha", "0.5", "--trials", "300", "--set", "sensing=false"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some(HEADER));
    let pmd = lines.find(|l| l.split(',').nth(8) == Some("pmd")).expect("pmd row");
    let f: Vec<&str> = pmd.split(',').collect();
    assert_eq!((f[3], f[4]), ("-5", "0.5"));
    assert!(!stdout.contains("rmse_m"));
}

#[test]
fn unknown_keys_and_malformed_overrides_fail() {
    assert!(!sim(&["point", "--set", "no_such_key=1", "--trials", "10"]).status.success());
    assert!(!sim(&["point", "--set", "alpha", "--trials", "10"]).status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    let sw = dir.path().join("s.cfg");
    fs::write(&cfg, "bogus = 3\n").unwrap();
    fs::write(&sw, "trials = 5\n").unwrap();
    let out = dir.path().join("o.csv");
    let o = sim(&["run", "--config", cfg.to_str().unwrap(), "--sweep", sw.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
}
