use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn radiocount(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radiocount")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn summary(out: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(out)).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&radiocount(&["--help"])), 0);
    assert_eq!(code(&radiocount(&["--version"])), 0);
    assert_eq!(code(&radiocount(&["run", "--help"])), 0);
}

#[test]
fn invalid_input_exits_one() {
    assert_eq!(code(&radiocount(&[])), 1);
    assert_eq!(code(&radiocount(&["run", "--protocol", "nonsense", "--topology", "clique:4"])), 1);
    assert_eq!(code(&radiocount(&["run", "--protocol", "count_sh_nocd_const", "--topology", "star:4"])), 1);
    // Collision detection must match what the protocol assumes.
    assert_eq!(code(&radiocount(&["run", "--protocol", "count_sh_cd_const", "--topology", "clique:4"])), 1);
    assert_eq!(code(&radiocount(&["run", "--protocol", "count_sh_nocd_const", "--topology", "clique:4", "--cd"])), 1);
    assert_eq!(code(&radiocount(&["run", "--protocol", "count_all_nocd_b", "--topology", "clique:4"])), 1);
    assert_eq!(
        code(&radiocount(&["run", "--protocol", "est_upper_sh", "--topology", "clique:4", "--cd", "--param", "bogus=1"])),
        1
    );
    assert_eq!(code(&radiocount(&["oracle", "--formula", "one", "--n", "4", "--p", "1.5"])), 1);
}

#[test]
fn run_writes_outputs_and_checks_the_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let args = [
        "run",
        "--protocol",
        "count_sh_cd_high",
        "--topology",
        "clique:32",
        "--cd",
        "--trials",
        "20",
        "--seed",
        "3",
        "--predicate",
        "sh_range_64x",
        "--out",
        out_dir.to_str().unwrap(),
    ];
    let out = radiocount(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stats = summary(&out);
    assert_eq!(stats["trials"], 20);
    assert_eq!(stats["predicate"], "sh_range_64x");

    let lines = fs::read_to_string(out_dir.join("trials.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 20);
    let on_disk: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk, stats);
    assert_eq!(fs::read_to_string(out_dir.join("summary.csv")).unwrap().lines().count(), 2);

    // Same seed, same bytes.
    let again = dir.path().join("again");
    let mut args2 = args;
    args2[13] = again.to_str().unwrap();
    assert_eq!(code(&radiocount(&args2)), 0);
    for f in ["trials.jsonl", "summary.json", "summary.csv"] {
        assert_eq!(fs::read(out_dir.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }

    // An impossible threshold exits 2 but still prints the summary.
    let out = radiocount(&[
        "run",
        "--protocol",
        "count_sh_nocd_const",
        "--topology",
        "clique:64",
        "--trials",
        "50",
        "--max-slots",
        "100",
        "--min-success-rate",
        "1.0",
    ]);
    assert_eq!(code(&out), 2);
    assert!(summary(&out)["success_rate"].as_f64().unwrap() < 1.0);
}

#[test]
fn config_files_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    fs::write(
        &path,
        "protocol = \"count_center_nocd_const\"\ntopology = \"star:16\"\ntrials = 30\nmaster_seed = 5\n\n[params]\ncenter_l = 16\n",
    )
    .unwrap();
    let from_file = radiocount(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&from_file), 0, "{}", String::from_utf8_lossy(&from_file.stderr));
    assert_eq!(summary(&from_file)["trials"], 30);

    let flags = radiocount(&[
        "run",
        "--protocol",
        "count_center_nocd_const",
        "--topology",
        "star:16",
        "--trials",
        "30",
        "--seed",
        "5",
        "--param",
        "center_l=16",
    ]);
    assert_eq!(summary(&flags), summary(&from_file));

    let overridden = radiocount(&["run", "--config", path.to_str().unwrap(), "--trials", "7"]);
    assert_eq!(summary(&overridden)["trials"], 7);

    fs::write(&path, "protocol = \"count_center_nocd_const\"\ntopology = \"star:16\"\nunknown = 1\n").unwrap();
    assert_eq!(code(&radiocount(&["run", "--config", path.to_str().unwrap()])), 1);
}

#[test]
fn oracle_prints_float_and_exact_values() {
    let out = radiocount(&["oracle", "--formula", "one", "--n", "4", "--p", "1/2"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "0.25\n1/4\n");

    let out = radiocount(&["oracle", "--formula", "noise", "--n", "2", "--p", "0.5"]);
    assert_eq!(stdout(&out), "0.25\n");

    let out = radiocount(&["oracle", "--formula", "silence", "--n", "3", "--p", "1/3"]);
    assert_eq!(stdout(&out).lines().nth(1), Some("8/27"));
}

fn write_trace(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("trace.jsonl");
    let out = radiocount(&[
        "run",
        "--protocol",
        "count_sh_cd_const",
        "--topology",
        "clique:6",
        "--cd",
        "--trials",
        "1",
        "--seed",
        "1",
        "--trace",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    path
}

#[test]
fn replay_accepts_real_traces_and_rejects_tampered_ones() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_trace(dir.path());
    let trace = path.to_str().unwrap();
    let ok = radiocount(&["replay", "--trace", trace, "--topology", "clique:6", "--cd"]);
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    assert!(stdout(&ok).contains("trace ok"));

    // The same trace is impossible without collision detection.
    if fs::read_to_string(&path).unwrap().contains("\"noise\"") {
        assert_eq!(code(&radiocount(&["replay", "--trace", trace, "--topology", "clique:6"])), 2);
    }

    // Flip one listener's feedback so it disagrees with the broadcasters.
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let line = lines.iter_mut().find(|l| l.contains(":\"silence\"") || l.contains(":\"noise\"")).unwrap();
    *line = if line.contains(":\"silence\"") {
        line.replacen(":\"silence\"", ":\"noise\"", 1)
    } else {
        line.replacen(":\"noise\"", ":\"silence\"", 1)
    };
    let tampered = dir.path().join("tampered.jsonl");
    fs::write(&tampered, lines.join("\n") + "\n").unwrap();
    let bad = radiocount(&["replay", "--trace", tampered.to_str().unwrap(), "--topology", "clique:6", "--cd"]);
    assert_eq!(code(&bad), 2);
    assert!(stdout(&bad).contains("violation"));

    fs::write(&tampered, "not json\n").unwrap();
    assert_eq!(code(&radiocount(&["replay", "--trace", tampered.to_str().unwrap()])), 1);
}

#[test]
fn sweep_runs_every_grid_entry() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.toml");
    let out = dir.path().join("grid");
    fs::write(
        &grid,
        format!(
            "out = {:?}\n\n[[run]]\nprotocol = \"est_upper_sh\"\ntopology = \"clique:16\"\ncd = true\ntrials = 10\n\n\
             [[run]]\nprotocol = \"count_center_cd_high\"\ntopology = \"star:8\"\ncd = true\ntrials = 5\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let res = radiocount(&["sweep", "--grid", grid.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(out.join("00_est_upper_sh/summary.json").exists());
    assert!(out.join("01_count_center_cd_high/trials.jsonl").exists());

    fs::write(&grid, "[[run]]\nprotocol = \"count_sh_cd_const\"\ntopology = \"clique:4\"\n").unwrap();
    assert_eq!(code(&radiocount(&["sweep", "--grid", grid.to_str().unwrap()])), 1);
}
