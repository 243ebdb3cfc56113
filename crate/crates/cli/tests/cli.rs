use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ising-adder")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn header(text: &str, key: &str) -> Option<String> {
    let prefix = format!("# {key}=");
    text.lines().find_map(|l| l.strip_prefix(&prefix).map(str::to_owned))
}

fn stdout(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn one_bit_schedule_has_two_qpulses() {
    let text = stdout(&["compile", "-l", "1", "-a", "1"]);
    assert_eq!(header(&text, "qpulses").as_deref(), Some("2"));
    assert_eq!(header(&text, "command").as_deref(), Some("compile"));
}

#[test]
fn long_schedule_stays_within_budget() {
    let a = "1".repeat(300);
    let text = stdout(&["compile", "-l", "1000", "-a", &a]);
    let q: usize = header(&text, "qpulses").unwrap().parse().unwrap();
    assert!(q > 0 && q <= 15_000, "{q}");
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["compile", "-l", "0"]), 1);
    assert_eq!(code(&["no-such-command"]), 1);
    assert_eq!(code(&["compile", "--k", "abc"]), 1);
    assert_eq!(code(&["run-exact", "-l", "7", "-a", "3", "--initial", "1"]), 3);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn verify_passes() {
    let o = run(&["verify", "--suppression-k", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("check,passed,measured,bound"));
    assert!(!text.contains(",false,"));
}

#[test]
fn flags_beat_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "k = 8\naddend-bits = 2\naddend = \"3\"\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let text = stdout(&["--config", cfg, "compile", "--k", "4"]);
    assert_eq!(header(&text, "K").as_deref(), Some("4"));
    assert_eq!(header(&text, "addend_bits").as_deref(), Some("2"));
    assert_eq!(header(&text, "addend").as_deref(), Some("3"));
    std::fs::write(dir.path().join("bad.toml"), "unknown = 1\n").unwrap();
    assert_eq!(code(&["--config", dir.path().join("bad.toml").to_str().unwrap(), "compile"]), 1);
}

#[test]
fn map_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = ["a.csv", "b.csv"].iter().map(|n| dir.path().join(n)).collect();
    for p in &paths {
        let args = ["-o", p.to_str().unwrap(), "run-map", "-l", "3", "-a", "5", "--initial", "1,2", "--realizations", "3"];
        assert_eq!(code(&args), 0);
    }
    let a = std::fs::read(&paths[0]).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, std::fs::read(&paths[1]).unwrap());
}

#[test]
fn exact_run_reports_metrics() {
    let text = stdout(&["run-exact", "-l", "2", "-a", "3", "--initial", "1:0.6,2:0:0.8"]);
    let p: f64 = header(&text, "probability_error").unwrap().parse().unwrap();
    assert!(p < 1e-5, "{p}");
    assert!(text.contains("pulse_index"));
}
