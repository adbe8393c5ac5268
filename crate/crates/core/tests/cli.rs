use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfcorrect"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn config_value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing from\n{text}"))
        .to_string()
}

#[test]
fn documented_defaults() {
    let o = run(&[
        "ensemble",
        "-L",
        "8",
        "--gamma1",
        "0.01",
        "--gamma3",
        "10",
        "-N",
        "200",
        "--seed",
        "7",
        "--print-config",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(config_value(&text, "gamma2"), "1.0");
    assert_eq!(config_value(&text, "N"), "200");
    assert_eq!(config_value(&text, "L"), "[8]");
}

#[test]
fn negative_rate_is_a_usage_error() {
    let o = run(&["ensemble", "--gamma1", "-0.5", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gamma1"));
    let o = run(&["ensemble", "-L", "2", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`L`"));
    let o = run(&["ensemble", "--gamma3", "fast", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gamma3"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.toml");
    std::fs::write(&file, "command = \"ensemble\"\nN = 100\nseed = 4\n").unwrap();
    let f = file.to_str().unwrap();
    let o = run(&["--config", f, "--print-config"]);
    assert_eq!(config_value(&stdout(&o), "N"), "100");
    let o = run(&["--config", f, "-N", "500", "--print-config"]);
    assert_eq!(config_value(&stdout(&o), "N"), "500");
    assert_eq!(config_value(&stdout(&o), "command"), "\"ensemble\"");
}

#[test]
fn bad_config_keys_are_named() {
    let dir = tempfile::tempdir().unwrap();
    for (body, key) in [
        ("seed = 1\nwobble = 3\n", "wobble"),
        ("seed = 1\ngamma2 = \"one\"\n", "gamma2"),
        ("seed = 1\nc = -1.0\n", "`c`"),
    ] {
        let file = dir.path().join("bad.toml");
        std::fs::write(&file, body).unwrap();
        let o = run(&["ensemble", "--config", file.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        assert!(stderr(&o).contains(key), "{}", stderr(&o));
    }
}

#[test]
fn printed_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "phasediagram",
        "-L",
        "6,12",
        "--gamma1",
        "0.001,0.003,0.01",
        "--gamma3",
        "1,10,100",
        "--seed",
        "11",
        "-c",
        "0.03",
        "--field-update",
        "async",
        "--init",
        "mixed",
        "--criterion",
        "depth_var",
        "--format",
        "jsonl",
        "--workers",
        "2",
        "--print-config",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = stdout(&o);
    let file = dir.path().join("echo.toml");
    std::fs::write(&file, &first).unwrap();
    let again = run(&["--config", file.to_str().unwrap(), "--print-config"]);
    assert_eq!(stdout(&again), first);
}

#[test]
fn unwritable_output_exits_one() {
    let o = run(&[
        "ensemble",
        "-L",
        "4",
        "--gamma1",
        "0.05",
        "-N",
        "4",
        "--seed",
        "1",
        "-c",
        "0.001",
        "--grid",
        "2",
        "-o",
        "/no/such/dir/out.csv",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/no/such/dir/out.csv"));
}

#[test]
fn selftest_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let go = |name: &str| {
        let path = dir.path().join(name);
        let o = run(&[
            "selftest",
            "-L",
            "6",
            "-N",
            "40",
            "-c",
            "0.01",
            "--grid",
            "8",
            "--seed",
            "3",
            "-o",
            path.to_str().unwrap(),
        ]);
        assert!(o.status.code().is_some_and(|c| c <= 1), "{}", stderr(&o));
        std::fs::read(path).unwrap()
    };
    let a = go("a.csv");
    assert_eq!(a, go("b.csv"));
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 9);
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 14));
}

#[test]
fn trajectory_debug_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let dump = dir.path().join("field.bin");
    let out = dir.path().join("rows.jsonl");
    let o = run(&[
        "trajectory",
        "-L",
        "5",
        "--gamma1",
        "0.1",
        "--seed",
        "2",
        "-c",
        "0.01",
        "--grid",
        "3",
        "--format",
        "jsonl",
        "--trace",
        trace.to_str().unwrap(),
        "--field-dump",
        dump.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::metadata(Path::new(&dump)).unwrap().len(), 25 * 8);
    let trace = std::fs::read_to_string(trace).unwrap();
    assert!(trace.starts_with("t,event,a,b,c\n"));
    assert!(trace.lines().any(|l| l.contains(",pair_creation,")));
    let rows = std::fs::read_to_string(out).unwrap();
    assert_eq!(rows.lines().count(), 4);
    let first: serde_json::Value = serde_json::from_str(rows.lines().next().unwrap()).unwrap();
    assert_eq!(first["N"], 1);
    assert!(first["n_var"].is_null());
}

#[test]
fn threshold_prints_labelled_table() {
    let o = run(&[
        "threshold",
        "-L",
        "4,6",
        "--gamma1",
        "0.01,0.1",
        "-N",
        "8",
        "--seed",
        "5",
        "-c",
        "0.001",
        "--grid",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("gamma3,gamma1_c,ci_lo,ci_hi,censored,criterion")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 6);
    assert_eq!(row[5], "p_eps");
}
