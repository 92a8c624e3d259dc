use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use irrl_cli::output::{self, BenchmarkRow, ReplicateRow, ScheduleRow};
use irrl_core::cropsim::replay_actions;
use irrl_core::policy::{save_checkpoint, Architecture, PolicyParameters};
use irrl_core::weather::parse_weather_file;
use irrl_core::EnvConfig;

const SMALL: &str = r#"
[policy]
hidden_dims = [6]
input_scaling = "centered"

[train]
episodes_n = 30
alpha = 1e-5
init_scale = 0.1

[evaluate]
replicates = 3

[benchmark]
budget = 20
"#;

fn irrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irrl")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
    train: PathBuf,
    test: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let config = root.join("run.toml");
    std::fs::write(&config, SMALL).unwrap();
    let train = root.join("train");
    let test = root.join("test");
    let out = irrl(&["synth-weather", "--out", s(&train), "--first-year", "1981", "--count", "4"]);
    assert!(out.status.success());
    let out = irrl(&["synth-weather", "--out", s(&test), "--first-year", "1991", "--count", "2"]);
    assert!(out.status.success());
    Fixture {
        _dir: dir,
        root,
        config,
        train,
        test,
    }
}

fn train(f: &Fixture, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "train",
        "--config",
        s(&f.config),
        "--train-weather",
        s(&f.train),
        "--out",
        s(out),
    ];
    args.extend_from_slice(extra);
    irrl(&args)
}

#[test]
fn train_writes_log_checkpoint_summary_and_config() {
    let f = fixture();
    let out = f.root.join("run");
    let o = train(&f, &out, &["--episodes", "20", "--seed", "0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = output::read_train_log(&out.join("train_log.csv")).unwrap();
    assert_eq!(log.len(), 20);
    assert_eq!(log[0].episode, 1);
    let header = std::fs::read_to_string(out.join("train_log.csv")).unwrap();
    assert!(header.starts_with("episode,year_id,profit,ma,length,cuirrig\n"));
    assert!(out.join("best.ckpt").exists());
    assert!(out.join("summary.toml").exists());
    let echoed = irrl_cli::RunConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(echoed.train.episodes_n, 20);
    assert_eq!(echoed.paths.train_weather.as_deref(), Some(f.train.as_path()));
}

#[test]
fn same_seed_gives_identical_files() {
    let f = fixture();
    let a = f.root.join("a");
    let b = f.root.join("b");
    assert!(train(&f, &a, &["--seed", "5"]).status.success());
    assert!(train(&f, &b, &["--seed", "5"]).status.success());
    for name in ["train_log.csv", "best.ckpt"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
    }
    let c = f.root.join("c");
    assert!(train(&f, &c, &["--seed", "6"]).status.success());
    assert_ne!(std::fs::read(a.join("train_log.csv")).unwrap(), std::fs::read(c.join("train_log.csv")).unwrap());
}

#[test]
fn missing_weather_dir_is_a_config_error_naming_the_path() {
    let f = fixture();
    let missing = f.root.join("no_such_dir");
    let o = irrl(&["train", "--config", s(&f.config), "--train-weather", s(&missing), "--out", s(&f.root.join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error[config]:"));
    assert!(err.contains("no_such_dir"), "{err}");
}

#[test]
fn bad_config_value_exits_2() {
    let f = fixture();
    let bad = f.root.join("bad.toml");
    std::fs::write(&bad, "[train]\nalpha = 0.0\n").unwrap();
    let o = irrl(&["train", "--config", s(&bad), "--train-weather", s(&f.train)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_writes_results_and_traces() {
    let f = fixture();
    let run = f.root.join("run");
    assert!(train(&f, &run, &[]).status.success());
    let bench = f.root.join("bench");
    let o = irrl(&["benchmark", "--config", s(&f.config), "--weather", s(&f.test), "--out", s(&bench)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let eval = f.root.join("eval");
    let o = irrl(&[
        "evaluate",
        "--config",
        s(&f.config),
        "--checkpoint",
        s(&run.join("best.ckpt")),
        "--test-weather",
        s(&f.test),
        "--benchmark",
        s(&bench.join("benchmark.csv")),
        "--out",
        s(&eval),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = output::read_results(&eval.join("results.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    let reps: Vec<ReplicateRow> = output::read_rows(&eval.join("replicates.csv")).unwrap();
    assert_eq!(reps.len(), 6);
    for r in &rows {
        let b = r.benchmark.unwrap();
        assert_eq!(r.performance_pct, Some((100.0 * r.test_profit_mean / b).round() as i64));
        let profits: Vec<f64> = reps.iter().filter(|p| p.year == r.year).map(|p| p.profit).collect();
        let (mean, sd) = irrl_core::learner::mean_sd(&profits);
        assert!((mean - r.test_profit_mean).abs() < 1e-9);
        assert!((sd.unwrap() - r.test_profit_sd).abs() < 1e-9);
    }
    let traces: Vec<_> = std::fs::read_dir(eval.join("traces")).unwrap().collect();
    assert_eq!(traces.len(), 6);
}

#[test]
fn evaluate_without_benchmark_leaves_column_blank() {
    let f = fixture();
    let run = f.root.join("run");
    assert!(train(&f, &run, &[]).status.success());
    let eval = f.root.join("eval");
    let o = irrl(&[
        "evaluate",
        "--config",
        s(&f.config),
        "--checkpoint",
        s(&run.join("best.ckpt")),
        "--test-weather",
        s(&f.test),
        "--replicates",
        "1",
        "--out",
        s(&eval),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(eval.join("results.csv")).unwrap();
    let line = text.lines().nth(1).unwrap();
    assert!(line.starts_with("1991,,"), "{line}");
    assert!(line.ends_with(",0,"), "{line}");
}

#[test]
fn architecture_mismatch_is_reported() {
    let f = fixture();
    let ckpt = f.root.join("other.ckpt");
    let p = PolicyParameters::zeros(Architecture::new(vec![3])).unwrap();
    save_checkpoint(&p, &ckpt).unwrap();
    let o = irrl(&[
        "evaluate",
        "--config",
        s(&f.config),
        "--checkpoint",
        s(&ckpt),
        "--test-weather",
        s(&f.test),
        "--out",
        s(&f.root.join("e")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("does not match"));
}

#[test]
fn benchmark_single_year_replays() {
    let f = fixture();
    let year = f.test.join("1991.csv");
    let out = f.root.join("b");
    let o = irrl(&["benchmark", "--config", s(&f.config), "--weather", s(&year), "--budget", "100", "--out", s(&out)]);
    assert!(o.status.success());
    let rows: Vec<BenchmarkRow> = output::read_rows(&out.join("benchmark.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].episodes_used, 100);
    let schedule: Vec<ScheduleRow> = output::read_rows(&out.join("schedules/1991.csv")).unwrap();
    let cfg = EnvConfig::default();
    let actions: Vec<usize> = schedule.iter().map(|r| cfg.actions.index_of(r.action_mm).unwrap()).collect();
    let w = parse_weather_file(&year).unwrap();
    assert_eq!(replay_actions(&cfg, &w, &actions).unwrap().profit, rows[0].benchmark_profit);
    assert!(out.join("benchmark_meta.toml").exists());
}

#[test]
fn benchmark_budget_one_is_at_least_zero_schedule() {
    let f = fixture();
    let out = f.root.join("b");
    let o = irrl(&["benchmark", "--config", s(&f.config), "--weather", s(&f.test), "--budget", "1", "--out", s(&out)]);
    assert!(o.status.success());
    let rows: Vec<BenchmarkRow> = output::read_rows(&out.join("benchmark.csv")).unwrap();
    let cfg = EnvConfig::default();
    for r in rows {
        let w = parse_weather_file(f.test.join(format!("{}.csv", r.year))).unwrap();
        let zero = irrl_core::baseline::FixedSchedule::NONE.run(&cfg, &w).unwrap().profit;
        assert!(r.benchmark_profit >= zero);
    }
}

#[test]
fn inspect_reports_counts_and_rejects_foreign_files() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("zero.ckpt");
    save_checkpoint(&PolicyParameters::zeros(Architecture::default()).unwrap(), &ckpt).unwrap();
    let o = irrl(&["inspect", s(&ckpt)]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("parameters: 1448005"), "{text}");
    assert!(text.contains("l2 norm: 0\n"), "{text}");
    assert!(text.contains("format version: 1"));

    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"hello world, not a checkpoint").unwrap();
    let o = irrl(&["inspect", s(&junk)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("not a checkpoint"));
}
