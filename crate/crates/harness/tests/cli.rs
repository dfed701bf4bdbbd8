use std::path::Path;
use std::process::{Command, Output};

fn olvc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_olvc")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn identity_trace(t: usize) -> String {
    let mut s = format!("olvc-trace v1 d=2 n=2 T={t} rewards=0\n");
    for i in 1..=t {
        s.push_str(&format!("t={i} 1,0 0,1\n"));
    }
    s
}

#[test]
fn oracle_on_two_action_identity() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("id.trace"), identity_trace(10)).unwrap();
    let out = olvc(&["oracle", "id.trace", "--p", "inf"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("x*=(0.5,0.5)\n"), "{text}");
    assert!(text.contains("OPT=5\n"), "{text}");
}

#[test]
fn missing_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = olvc(&["run", "does-not-exist.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("does-not-exist.json"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = olvc(&["run", "x.json", "--frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Usage"));
}

#[test]
fn config_errors_carry_their_position() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\n  \"name\": \"x\",\n  \"problem\": \"maximise\"\n}\n").unwrap();
    let out = olvc(&["run", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bad.json:3:"), "{}", stderr(&out));
}

#[test]
fn malformed_trace_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("t.trace"), "olvc-trace v1 d=1 n=1 T=2 rewards=0\nt=1 0.5\nt=2 zero\n").unwrap();
    let out = olvc(&["oracle", "t.trace", "--p", "2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("t.trace:3:"), "{}", stderr(&out));
}

fn write_config(dir: &Path, name: &str, body: &str) {
    std::fs::write(dir.join(name), body).unwrap();
}

#[test]
fn zero_cost_environment_has_undefined_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let mut trace = String::from("olvc-trace v1 d=2 n=2 T=5 rewards=0\n");
    for t in 1..=5 {
        trace.push_str(&format!("t={t} 0,0 0,0\n"));
    }
    std::fs::write(dir.path().join("zero.trace"), trace).unwrap();
    write_config(
        dir.path(),
        "zero.json",
        r#"{"name": "zero", "problem": "olvc", "p": 2, "horizon": 5, "seeds": [1],
            "environment": {"kind": "trace", "path": "zero.trace"},
            "variants": [{"algorithm": "olvc", "epsilon": {"rule": "explicit", "epsilon": 0.5}}]}"#,
    );
    let out = olvc(&["run", "zero.json", "--out-dir", "out"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("out/zero.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert_eq!(row.split(',').nth(9), Some("UNDEFINED"), "{row}");
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "ph.json",
        r#"{"name": "ph", "problem": "olvc", "p": 3, "horizon": 512, "seeds": [4],
            "environment": {"kind": "phased_halving", "d": 8},
            "variants": [{"algorithm": "olvc", "epsilon": {"rule": "from_opt"}}, {"algorithm": "greedy"}]}"#,
    );
    let a = olvc(&["run", "ph.json", "--out-dir", "a"], dir.path());
    let b = olvc(&["run", "ph.json", "--out-dir", "b", "--jobs", "2"], dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(b.status.code(), Some(0));
    for f in ["ph.csv", "ph-aggregates.csv"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let csv = std::fs::read_to_string(dir.path().join("a/ph.csv")).unwrap();
    assert!(csv.starts_with("experiment,seed,variant,T,n,d,p,alg_value,opt_value,ratio,regret_empirical,tau,bound_ok\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "trap.json",
        r#"{"name": "trap", "problem": "olvc", "p": "inf", "horizon": 100, "seeds": [1, 2, 3],
            "environment": {"kind": "greedy_trap", "d": 4, "load_gap": 0.1},
            "variants": [{"algorithm": "greedy"}]}"#,
    );
    let out = olvc(&["--seed", "9", "run", "trap.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("trap.csv")).unwrap();
    let seeds: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(seeds, ["9"]);
}

#[test]
fn record_then_oracle() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "env.json",
        r#"{"horizon": 64, "p": "inf", "environment": {"kind": "phased_halving", "d": 4, "rewards": true}}"#,
    );
    let rec = olvc(&["--seed", "3", "record", "env.json", "--out", "ph.trace"], dir.path());
    assert_eq!(rec.status.code(), Some(0), "{}", stderr(&rec));
    let text = std::fs::read_to_string(dir.path().join("ph.trace")).unwrap();
    assert!(text.starts_with("olvc-trace v1 d=4 n=5 T=64 rewards=1\n"));
    let out = olvc(&["oracle", "ph.trace", "--p", "inf", "--budget", "100"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    // A generous budget lets every non-null action collect its reward each phase step.
    assert!(stdout(&out).contains("OPT=64\n"), "{}", stdout(&out));
}

#[test]
fn verify_potentials_flags_the_linear_stability_factor() {
    let dir = tempfile::tempdir().unwrap();
    let out = olvc(&["verify-potentials", "--samples", "3000"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    for line in text.lines() {
        let failing = line.contains(": FAIL");
        assert_eq!(failing, line.starts_with("gradient-stability:"), "{line}");
    }
    assert!(text.contains("gradient-stability-exp: PASS"));
}
