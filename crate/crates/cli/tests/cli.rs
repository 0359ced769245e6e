use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn edbn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edbn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value<'a>(out: &'a str, key: &str) -> Option<&'a str> {
    out.lines()
        .find_map(|l| l.strip_prefix(key)?.strip_prefix('='))
}

fn gen(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let mut args = vec![
        "gen",
        "--out",
        p(&out),
        "--rows",
        "400",
        "--ids",
        "20",
        "--features",
        "6",
    ];
    args.extend_from_slice(extra);
    let o = edbn(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

const FAST: [&str; 8] = [
    "--epochs",
    "3",
    "--pretrain-epochs",
    "1",
    "--batch-size",
    "64",
    "--warmup-steps",
    "10",
];

fn train(data: &Path, model: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--data", p(data), "--model-out", p(model)];
    args.extend_from_slice(&FAST);
    args.extend_from_slice(extra);
    edbn(&args)
}

#[test]
fn gen_train_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "train.csv", &[]);
    let model = dir.path().join("m.bin");
    let report = dir.path().join("report.csv");
    let o = train(&data, &model, &["--report-out", p(&report)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(value(&out, "params").is_some(), "{out}");
    assert!(value(&out, "checksum").is_some(), "{out}");
    let log = fs::read_to_string(&report).unwrap();
    assert_eq!(
        log.lines().next().unwrap(),
        "phase,epoch,train_loss,val_pearson,val_mse,lr"
    );
    assert_eq!(log.lines().count(), 1 + 4);

    let o = edbn(&["eval", "--model", p(&model), "--data", p(&data)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let r: f64 = value(&out, "pearson").unwrap().parse().unwrap();
    assert!((-1.0..=1.0).contains(&r));
    assert_eq!(value(&out, "n"), Some("400"));
}

#[test]
fn identical_runs_write_identical_models() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.csv", &["--seed", "3"]);
    let (a, b) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
    let (ra, rb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(train(&data, &a, &["--seed", "3", "--report-out", p(&ra)])
        .status
        .success());
    assert!(train(&data, &b, &["--seed", "3", "--report-out", p(&rb)])
        .status
        .success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(&ra).unwrap(), fs::read(&rb).unwrap());
}

#[test]
fn predict_writes_one_row_per_input_and_accepts_unseen_ids() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.csv", &[]);
    let model = dir.path().join("m.bin");
    assert!(train(&data, &model, &[]).status.success());

    let infer = dir.path().join("infer.csv");
    fs::write(
        &infer,
        "row_id,investment_id,f_0,f_1,f_2,f_3,f_4,f_5\n\
         x_1,3,0.1,0.2,0.3,0.4,0.5,0.6\n\
         x_2,999999,1,1,1,1,1,1\n\
         x_3,-5,0,0,0,0,0,0\n",
    )
    .unwrap();
    let preds = dir.path().join("preds.csv");
    let o = edbn(&[
        "predict",
        "--model",
        p(&model),
        "--data",
        p(&infer),
        "--out",
        p(&preds),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&preds).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "row_id,prediction");
    assert_eq!(lines.len(), 4);
    for (line, id) in lines[1..].iter().zip(["x_1", "x_2", "x_3"]) {
        let (rid, v) = line.split_once(',').unwrap();
        assert_eq!(rid, id);
        assert!(v.parse::<f64>().unwrap().is_finite());
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.csv", &[]);
    let cfg = dir.path().join("run.conf");
    fs::write(
        &cfg,
        "# small run\nepochs = 2\npretrain = none\nbatch_size=64\nwarmup-steps=5\nseed=1\n",
    )
    .unwrap();
    let report = dir.path().join("r.csv");
    let model = dir.path().join("m.bin");
    let o = edbn(&[
        "train",
        "--config",
        p(&cfg),
        "--data",
        p(&data),
        "--model-out",
        p(&model),
        "--report-out",
        p(&report),
        "--epochs",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = fs::read_to_string(&report).unwrap();
    // pretrain=none from the file, epochs=3 from the flag
    assert_eq!(log.lines().count(), 1 + 3);
    assert!(log.lines().skip(1).all(|l| l.starts_with("joint,")));
}

#[test]
fn unknown_subcommand_and_flag_are_usage_errors() {
    let o = edbn(&["fly"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr)
        .to_lowercase()
        .contains("usage"));
    let o = edbn(&["gen", "--out", "x.csv", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = edbn(&[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_configuration_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.csv", &[]);
    let o = train(&data, &dir.path().join("m.bin"), &["--batch-size", "0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = train(
        &data,
        &dir.path().join("m.bin"),
        &["--pretrain", "sideways"],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn data_problems_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = edbn(&["eval", "--model", "missing.bin", "--data", "missing.csv"]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    fs::write(
        &bad,
        "row_id,time_id,investment_id,target,f_0\n0_1,0,1,0.5,abc\n",
    )
    .unwrap();
    let o = train(&bad, &dir.path().join("m.bin"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 1"));

    let not_model = dir.path().join("fake.bin");
    fs::write(&not_model, b"definitely not a model").unwrap();
    let data = gen(dir.path(), "d.csv", &[]);
    let o = edbn(&["eval", "--model", p(&not_model), "--data", p(&data)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_failures_exit_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.csv", &[]);
    let model = dir.path().join("m.bin");
    assert!(train(&data, &model, &[]).status.success());
    // constant target: correlation undefined
    let flat = dir.path().join("flat.csv");
    fs::write(
        &flat,
        "row_id,time_id,investment_id,target,f_0,f_1,f_2,f_3,f_4,f_5\n\
         0_1,0,1,0.5,1,2,3,4,5,6\n\
         0_2,0,2,0.5,6,5,4,3,2,1\n",
    )
    .unwrap();
    let o = edbn(&["eval", "--model", p(&model), "--data", p(&flat)]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(String::from_utf8_lossy(&o.stderr).contains("undefined correlation"));
}
