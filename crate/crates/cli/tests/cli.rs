use std::path::Path;
use std::process::{Command, Output};

fn spcl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spcl"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = spcl(args, cwd);
    assert!(
        out.status.success(),
        "spcl {} failed:\n{}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn gen_data_is_deterministic_and_honours_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(&["gen-data", "--counts", "5,5", "--seed", "3", "--out", "a"], dir);
    ok(&["gen-data", "--counts", "5,5", "--seed", "3", "--out", "b"], dir);
    ok(&["gen-data", "--counts", "5,5", "--seed", "4", "--out", "c"], dir);
    let train = read(dir.join("a/train.jsonl"));
    assert_eq!(train.lines().count(), 10);
    for name in ["train.jsonl", "dev.jsonl", "test.jsonl", "dataset.cfg"] {
        assert_eq!(read(dir.join("a").join(name)), read(dir.join("b").join(name)), "{name}");
    }
    assert_ne!(train, read(dir.join("c/train.jsonl")));
}

#[test]
fn preset_histogram_matches_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(&["gen-data", "--preset", "meld-imbalance", "--out", "d"], tmp.path());
    let train_block: Vec<&str> = stdout.lines().skip(1).take(7).collect();
    let counts: Vec<usize> = train_block
        .iter()
        .map(|l| l.split_whitespace().last().unwrap().parse().unwrap())
        .collect();
    assert_eq!(counts, [1024, 128, 64, 32, 32, 32, 32]);
    assert!(stdout.starts_with("train: 1344 examples"));
}

#[test]
fn missing_dataset_fails_without_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spcl(
        &["train", "--train", "nope.jsonl", "--dev", "nope.jsonl", "--out", "run"],
        tmp.path(),
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.jsonl"));
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn train_writes_artifacts_and_rank_orders_by_difficulty() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(&["gen-data", "--counts", "60,30,20", "--dim", "8", "--spread", "0.6", "--out", "data"], dir);
    let stdout = ok(
        &["train", "--config", "data/dataset.cfg", "--epochs", "3", "--batch-size", "8", "--out", "run"],
        dir,
    );
    assert!(stdout.contains("kept epoch"));
    for name in ["checkpoint.txt", "metrics.csv", "metrics.jsonl", "run.cfg"] {
        assert!(dir.join("run").join(name).exists(), "{name}");
    }
    let metrics = read(dir.join("run/metrics.csv"));
    assert_eq!(metrics.lines().next(), Some("epoch,loss,subset_size,dev_f1,test_f1"));
    assert_eq!(metrics.lines().count(), 1 + 4);

    ok(
        &["rank", "--config", "data/dataset.cfg", "--checkpoint", "run/checkpoint.txt", "--out", "ranked"],
        dir,
    );
    let ranking = csv_rows(&read(dir.join("ranked/ranking.csv")));
    assert_eq!(ranking.len(), 110);
    let difs: Vec<f64> = ranking.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(difs.windows(2).all(|w| w[0] <= w[1]));
    let quintiles = csv_rows(&read(dir.join("ranked/quintiles.csv")));
    let mean_of = |row: &Vec<String>| row[2].parse::<f64>().unwrap();
    let overall = difs.iter().sum::<f64>() / difs.len() as f64;
    assert!(mean_of(&quintiles[0]) < overall);
    assert!(mean_of(&quintiles[4]) > overall);
}

#[test]
fn rank_rejects_a_single_class_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(&["gen-data", "--counts", "12", "--out", "data"], dir);
    let out = spcl(&["rank", "--data", "data/train.jsonl", "--out", "ranked"], dir);
    assert!(!out.status.success());
    assert!(!dir.join("ranked").exists());
}

#[test]
fn sweep_drops_follow_from_cells_and_report_reads_them() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(&["gen-data", "--counts", "30,15,10", "--dim", "8", "--out", "data"], dir);
    ok(
        &[
            "sweep", "--config", "data/dataset.cfg", "--seeds", "0,1", "--batch-sizes", "4,16", "--losses",
            "supcon,spcl", "--epochs", "2", "--jobs", "2", "--out", "sweep",
        ],
        dir,
    );
    let cells = csv_rows(&read(dir.join("sweep/cells.csv")));
    assert_eq!(cells.len(), 8);
    assert!(cells.iter().all(|c| c[3] == "ok"));
    let mean = |loss: &str, bs: &str| {
        let v: Vec<f64> = cells
            .iter()
            .filter(|c| c[0] == loss && c[1] == bs)
            .map(|c| c[6].parse().unwrap())
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    for row in csv_rows(&read(dir.join("sweep/drops.csv"))) {
        let expected = mean(&row[0], "16") - mean(&row[0], "4");
        assert!((row[5].parse::<f64>().unwrap() - expected).abs() < 1e-12, "{row:?}");
    }

    let report = ok(&["report", "sweep"], dir);
    assert!(report.contains("supcon") && report.contains("spcl"));
    assert!(report.contains("drop from largest to smallest batch"));
}

#[test]
fn report_on_empty_directory_fails() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::create_dir(tmp.path().join("empty")).unwrap();
    let out = spcl(&["report", "empty"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no metrics found"));
}

#[test]
fn conversation_data_round_trips_through_training() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(
        &["gen-data", "--format", "conversation", "--counts", "3,1,1", "--dialogues", "12", "--out", "conv"],
        dir,
    );
    assert!(read(dir.join("conv/dataset.cfg")).contains("format = conversation"));
    ok(&["train", "--config", "conv/dataset.cfg", "--epochs", "1", "--out", "run"], dir);
    assert!(read(dir.join("run/checkpoint.txt")).starts_with("spcl-checkpoint v1"));
}

#[test]
fn unknown_config_key_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.cfg"), "epochs = 3\nlearning_rte = 0.1\n").unwrap();
    let out = spcl(&["train", "--config", "bad.cfg"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rte"));
}
