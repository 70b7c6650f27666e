use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const DAYS: [&str; 7] = ["Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"];

/// One Foursquare-format line on day `day` of April 2012 (the 1st is a Sunday).
fn line(user: usize, poi: usize, day: usize, hour: usize) -> String {
    let lat = 40.70 + 0.011 * (poi % 4) as f64;
    let lon = -74.00 + 0.017 * (poi / 4) as f64;
    format!(
        "u{user}\tv{poi}\tcat\tCafe\t{lat}\t{lon}\t-240\t{} Apr {day:02} {hour:02}:15:00 +0000 2012",
        DAYS[(day - 1) % 7]
    )
}

/// 4 users with 5 check-ins each over 12 POIs, plus one malformed line.
fn twenty_line_fixture() -> String {
    let mut lines = Vec::new();
    for u in 0..4 {
        for i in 0..5 {
            lines.push(line(u, (3 * u + i) % 12, 2 + i, 9 + u));
        }
    }
    lines.insert(7, "broken line".into());
    lines.join("\n") + "\n"
}

/// 5 users walking a 10-POI cycle, 12 steps each, so that every split has
/// samples.
fn cycle_fixture() -> String {
    let mut lines = Vec::new();
    for u in 0..5 {
        for i in 0..12 {
            lines.push(line(u, (2 * u + i) % 10, 2 + i, 8 + 2 * u));
        }
    }
    lines.join("\n") + "\n"
}

struct Env {
    dir: TempDir,
}

impl Env {
    fn new(data: &str) -> Self {
        let dir = TempDir::new().unwrap();
        fs::write(dir.path().join("data.txt"), data).unwrap();
        fs::write(
            dir.path().join("exp.cfg"),
            "# small corpus\nformat = foursquare\nmin_user_checkins = 1\nmin_poi_users = 1\nd = 8\nh = 16\n",
        )
        .unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_stddp"))
            .args(args)
            .arg("--config")
            .arg(self.path("exp.cfg"))
            .arg("--data")
            .arg(self.path("data.txt"))
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p).unwrap()
}

fn csv_value(csv: &str, key: &str) -> String {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("{key} missing from {csv}"))
        .to_string()
}

#[test]
fn prepare_reports_hand_counted_stats() {
    let env = Env::new(&twenty_line_fixture());
    let out = env.path("prep");
    env.ok(&["prepare", "--out", out.to_str().unwrap()]);
    let stats = read(out.join("stats.csv"));
    assert_eq!(csv_value(&stats, "users"), "4");
    assert_eq!(csv_value(&stats, "pois"), "12");
    assert_eq!(csv_value(&stats, "checkins"), "20");
    let sparsity: f64 = csv_value(&stats, "sparsity").parse().unwrap();
    assert!((sparsity - (1.0 - 20.0 / 48.0)).abs() < 1e-15);
    assert!(read(out.join("prepared.tsv")).starts_with("STDDP1\t4\t12\t1"));
    assert!(read(out.join("config.txt")).contains("min_poi_users = 1"));
}

#[test]
fn empty_input_is_bad_input() {
    let env = Env::new("");
    let out = env.run(&["prepare", "--out", env.path("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
}

#[test]
fn unknown_config_key_and_missing_file_are_bad_input() {
    let env = Env::new(&cycle_fixture());
    fs::write(env.path("exp.cfg"), "dimension = 4\n").unwrap();
    assert_eq!(env.run(&["prepare"]).status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_stddp"))
        .args(["prepare", "--data", "/nonexistent/checkins.txt"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn training_is_deterministic_and_overfits_the_cycle() {
    let env = Env::new(&cycle_fixture());
    let args = |dir: &str| {
        vec![
            "train".to_string(),
            "--out".into(),
            env.path(dir).display().to_string(),
            "--epochs".into(),
            "150".into(),
            "--patience".into(),
            "150".into(),
            "--stop-metric".into(),
            "loss".into(),
            "--d".into(),
            "64".into(),
            "--h".into(),
            "256".into(),
        ]
    };
    for dir in ["a", "b"] {
        let a = args(dir);
        env.ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let strip_time = |csv: String| -> Vec<String> {
        csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
    };
    assert_eq!(
        fs::read(env.path("a/checkpoint.bin")).unwrap(),
        fs::read(env.path("b/checkpoint.bin")).unwrap()
    );
    assert_eq!(strip_time(read(env.path("a/train_log.csv"))), strip_time(read(env.path("b/train_log.csv"))));

    let ckpt = env.path("a/checkpoint.bin");
    let out = env.path("eval");
    env.ok(&[
        "evaluate",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--split",
        "train",
        "--d",
        "64",
        "--h",
        "256",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(csv_value(&read(out.join("report_train.csv")), "recall@1"), "1");
}

#[test]
fn resume_and_evaluate_refuse_mismatched_checkpoints() {
    let env = Env::new(&cycle_fixture());
    let dir = env.path("t");
    env.ok(&["train", "--epochs", "2", "--out", dir.to_str().unwrap()]);
    let ckpt = dir.join("checkpoint.bin");
    let out = env.run(&["train", "--d", "4", "--resume", ckpt.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shape mismatch"));
    let out = env.run(&["evaluate", "--h", "12", "--checkpoint", ckpt.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    env.ok(&["train", "--epochs", "2", "--resume", ckpt.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
}

#[test]
fn sweep_of_one_point_equals_train_then_evaluate() {
    let env = Env::new(&cycle_fixture());
    let common = ["--epochs", "5", "--seed", "3"];
    let sweep = env.path("sweep");
    let mut args = vec!["sweep", "--param", "d", "--values", "8", "--out", sweep.to_str().unwrap()];
    args.extend(common);
    env.ok(&args);
    let train = env.path("train");
    let mut args = vec!["train", "--out", train.to_str().unwrap()];
    args.extend(common);
    env.ok(&args);
    let ckpt = train.join("checkpoint.bin");
    let mut args = vec!["evaluate", "--checkpoint", ckpt.to_str().unwrap(), "--out", train.to_str().unwrap()];
    args.extend(common);
    env.ok(&args);

    let row = read(sweep.join("sweep_d.csv")).lines().nth(1).unwrap().to_string();
    let report = read(train.join("report_test.csv"));
    assert_eq!(csv_value(&report, "count"), "5");
    let cols: Vec<&str> = row.split(',').collect();
    assert_eq!(&cols[..3], ["d", "8", "ok"]);
    assert_eq!(cols[4], csv_value(&report, "recall@1"));
    assert_eq!(cols[7], csv_value(&report, "f1@1"));
    assert_eq!(cols[10], csv_value(&report, "map"));
}

#[test]
fn sweep_records_every_point_and_continues_past_failures() {
    let env = Env::new(&cycle_fixture());
    let out = env.path("s");
    env.ok(&["sweep", "--param", "d", "--values", "2,4,8", "--epochs", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(read(out.join("sweep_d.csv")).lines().count(), 4);

    let res = env.run(&["sweep", "--param", "h", "--values", "0,4", "--epochs", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    let csv = read(out.join("sweep_h.csv"));
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("h,0,failed"));
    assert!(rows[1].starts_with("h,4,ok"));
    let width = csv.lines().next().unwrap().split(',').count();
    assert!(rows.iter().all(|r| r.split(',').count() == width));
}

#[test]
fn baselines_and_ablation_write_one_row_per_method() {
    let env = Env::new(&cycle_fixture());
    let out = env.path("cmp");
    env.ok(&["baselines", "--out", out.to_str().unwrap()]);
    let csv = read(out.join("baselines_test.csv"));
    let methods: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["Forward", "Backward", "TOP1", "TOP2"]);
    // every test target is the successor of its predecessor
    assert_eq!(csv_value(&csv, "Forward").split(',').next(), Some("1"));

    env.ok(&["ablate", "--epochs", "2", "--out", out.to_str().unwrap()]);
    let csv = read(out.join("ablation_test.csv"));
    let methods: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["Bi-STDDP", "F-STDDP", "B-STDDP", "Bi-A", "Bi-B"]);
}

#[test]
fn prepared_corpus_round_trips_through_the_cli() {
    let env = Env::new(&cycle_fixture());
    let prep = env.path("p");
    env.ok(&["prepare", "--out", prep.to_str().unwrap()]);
    let direct = env.ok(&["baselines", "--out", env.path("x").to_str().unwrap()]);
    let out = Command::new(env!("CARGO_BIN_EXE_stddp"))
        .args(["baselines", "--format", "prepared", "--data"])
        .arg(prep.join("prepared.tsv"))
        .arg("--out")
        .arg(env.path("y"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), direct);
}

#[test]
fn selfcheck_passes() {
    let out = Command::new(env!("CARGO_BIN_EXE_stddp"))
        .args(["selfcheck", "--instances", "2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("selfcheck passed"));
}
