use std::path::Path;
use std::process::{Command, Output};

fn sgt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgt")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(dir: &Path, f: &str) -> String {
    dir.join(f).to_string_lossy().into_owned()
}

#[test]
fn synth_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "plus.csv");
    let model = path(dir.path(), "m.json");
    assert_eq!(sgt(&["synth", "--kind", "plus", "--n", "400", "--seed", "1", "--out", &data]).status.code(), Some(0));
    let o = sgt(&["train", "--data", &data, "--variant", "sgt", "--max-depth", "2", "--out", &model]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = sgt(&["eval", "--model", &model, "--data", &data]);
    let text = stdout(&o);
    assert!(text.starts_with("accuracy 1.000, internal nodes 2, leaves 3, depth 2\n"), "{text}");
    assert!(text.lines().any(|l| l == "internal_nodes=2"));
    assert!(text.lines().any(|l| l == "rows=405"));
}

#[test]
fn identical_models_regardless_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "bars.csv");
    sgt(&["synth", "--kind", "bars", "--omega", "4", "--n", "300", "--out", &data]);
    let mut files = Vec::new();
    for threads in ["1", "4", "1"] {
        let model = path(dir.path(), &format!("m{}.json", files.len()));
        let o = sgt(&["--threads", threads, "train", "--data", &data, "--variant", "s2gt3", "--seed", "9", "--out", &model]);
        assert_eq!(o.status.code(), Some(0));
        files.push(std::fs::read(&model).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
}

#[test]
fn predict_viz_and_convert() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "plus.csv");
    sgt(&["synth", "--kind", "plus", "--n", "90", "--out", &data]);
    let cart = path(dir.path(), "cart.json");
    let shape = path(dir.path(), "shape.json");
    sgt(&["train", "--data", &data, "--variant", "cart", "--max-depth", "4", "--out", &cart]);

    let preds = path(dir.path(), "p.csv");
    assert_eq!(sgt(&["predict", "--model", &cart, "--data", &data, "--out", &preds]).status.code(), Some(0));
    let lines: Vec<String> = std::fs::read_to_string(&preds).unwrap().lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 91);
    assert_eq!(lines[0], "y");

    let dot = path(dir.path(), "t.dot");
    assert_eq!(sgt(&["viz", "--model", &cart, "--out", &dot]).status.code(), Some(0));
    assert!(std::fs::read_to_string(&dot).unwrap().starts_with("digraph sgt {"));

    assert_eq!(sgt(&["convert", "--cart-model", &cart, "--out", &shape]).status.code(), Some(0));
    let before = stdout(&sgt(&["eval", "--model", &cart, "--data", &data]));
    let after = stdout(&sgt(&["eval", "--model", &shape, "--data", &data]));
    assert_eq!(before.lines().next(), after.lines().next());
    assert!(after.contains("threshold_nodes=0"));

    // Converting a model that already has shape splits is refused.
    assert_eq!(sgt(&["convert", "--cart-model", &shape, "--out", &cart]).status.code(), Some(2));
}

#[test]
fn regression_with_schema_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "r.csv");
    let schema = path(dir.path(), "schema.txt");
    sgt(&["synth", "--kind", "bars-regression", "--omega", "2", "--n", "200", "--out", &data]);
    std::fs::write(&schema, "x,numeric\n").unwrap();
    let model = path(dir.path(), "m.json");
    let o = sgt(&[
        "train", "--data", &data, "--schema", &schema, "--task", "regression", "--max-depth", "2", "--tao-passes", "2",
        "--out", &model,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("refined:"));
    assert!(stdout(&sgt(&["eval", "--model", &model, "--data", &data])).starts_with("mse "));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "d.csv");
    let model = path(dir.path(), "m.json");
    sgt(&["synth", "--kind", "xor", "--n", "50", "--out", &data]);

    assert_eq!(sgt(&["--help"]).status.code(), Some(0));
    assert_eq!(sgt(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sgt(&["train", "--data", &data, "--out", &model, "--bogus"]).status.code(), Some(1));
    assert_eq!(sgt(&["train", "--data", &data, "--out", &model, "--variant", "oak"]).status.code(), Some(1));
    assert_eq!(sgt(&["train", "--data", &data, "--out", &model, "--criterion", "mse"]).status.code(), Some(1));
    assert_eq!(sgt(&["verify", "--suite", "everything"]).status.code(), Some(1));

    let missing = path(dir.path(), "missing.csv");
    let o = sgt(&["train", "--data", &missing, "--out", &model]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));

    let bad = path(dir.path(), "bad.csv");
    std::fs::write(&bad, "x1,x2,y\n0.1,oops,1\n").unwrap();
    assert_eq!(sgt(&["train", "--data", &bad, "--out", &model]).status.code(), Some(2));

    std::fs::write(&model, "{\"format\":\"something-else\"}").unwrap();
    assert_eq!(sgt(&["eval", "--model", &model, "--data", &data]).status.code(), Some(2));
}

#[test]
fn verify_theorem2_passes() {
    let o = sgt(&["verify", "--suite", "theorem2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("omega8_sgt_nodes=1"));
    assert!(text.ends_with("passed=true\n"));
}

#[test]
fn verify_lemma1_reports_zero_violation() {
    let o = sgt(&["verify", "--suite", "lemma1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("max violation 0.0e0"));
}

#[test]
fn bench_table_lists_each_depth() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "bars.csv");
    sgt(&["synth", "--kind", "bars", "--omega", "3", "--n", "200", "--out", &data]);
    let o = sgt(&["bench", "--data", &data, "--depths", "1..3", "--variants", "cart,sgt3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for d in 1..=3 {
        assert!(text.contains(&format!("depth{d}_cart=")));
        assert!(text.contains(&format!("depth{d}_sgt3=1\n")), "{text}");
    }
}
