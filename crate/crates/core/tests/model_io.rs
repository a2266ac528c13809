use shapecart::data::synth::{gen_plus_sign, gen_xor};
use shapecart::data::{Dataset, FeatureSchema, FeatureSpec, Task};
use shapecart::induce::{fit, fit_cart, Hyperparams};
use shapecart::model::{to_dot, ModelError, Node, SgtModel, FORMAT_NAME, FORMAT_VERSION};

fn xor_model() -> (SgtModel, Dataset) {
    let ds = gen_xor(200, 1, 4);
    let m = fit(&ds, &Hyperparams { pair_limit: 3, max_depth: 3, ..Hyperparams::default() }).unwrap();
    (m, ds)
}

#[test]
fn header_fields_come_first() {
    let (m, _) = xor_model();
    let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
    assert_eq!(v["format"], FORMAT_NAME);
    assert_eq!(v["version"], FORMAT_VERSION);
    assert_eq!(v["task"], "classification");
    assert!(v["nodes"].as_array().unwrap().len() == m.nodes().len());
}

#[test]
fn thresholds_survive_exactly() {
    let ds = gen_plus_sign(20, 8);
    let m = fit_cart(&ds, &Hyperparams::default()).unwrap();
    let back = SgtModel::from_json(&m.to_json()).unwrap();
    assert_eq!(back, m);
}

#[test]
fn file_round_trip() {
    let (m, ds) = xor_model();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.json");
    m.save(&p).unwrap();
    let back = SgtModel::load(&p).unwrap();
    assert_eq!(back.predict(&ds).unwrap(), m.predict(&ds).unwrap());
}

#[test]
fn rejects_other_formats_and_versions() {
    let (m, _) = xor_model();
    let text = m.to_json();
    let newer = text.replacen(&format!("\"version\": {FORMAT_VERSION}"), "\"version\": 99", 1);
    assert!(matches!(SgtModel::from_json(&newer), Err(ModelError::Version { found: 99, .. })));
    let other = text.replacen(FORMAT_NAME, "gbdt", 1);
    assert!(matches!(SgtModel::from_json(&other), Err(ModelError::Format { .. })));
    assert!(matches!(SgtModel::from_json("[1, 2"), Err(ModelError::Parse(_))));
}

#[test]
fn rejects_structural_damage() {
    let (m, _) = xor_model();
    let mut v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
    // Point the root at itself.
    v["nodes"][0]["children"][0] = serde_json::json!(0);
    let err = SgtModel::from_json(&v.to_string()).unwrap_err();
    assert!(matches!(err, ModelError::Invalid(_)), "{err}");
}

#[test]
fn prediction_checks_schema() {
    let (m, _) = xor_model();
    let schema = FeatureSchema::new(vec![FeatureSpec::numeric("a"), FeatureSpec::numeric("b")]).unwrap();
    let rows = vec![vec![0.0, 1.0]];
    let other = Dataset::numeric_classification(&["a", "b"], &rows, vec![0], 2).unwrap();
    assert_eq!(other.schema(), &schema);
    assert!(matches!(m.predict(&other), Err(ModelError::Schema(_))));
    assert_eq!(m.task(), Task::Classification);
}

#[test]
fn dot_is_well_formed() {
    let (m, _) = xor_model();
    let dot = to_dot(&m);
    let lines: Vec<&str> = dot.lines().collect();
    assert_eq!(lines[0], "digraph sgt {");
    assert_eq!(*lines.last().unwrap(), "}");
    let head = |l: &str| l.trim_start().split(' ').nth(1).map(str::to_string);
    let node_lines = lines.iter().filter(|l| head(l).is_some_and(|h| h.starts_with("[label="))).count();
    let edge_lines: Vec<&&str> = lines.iter().filter(|l| head(l).as_deref() == Some("->")).collect();
    let edges: usize = m
        .nodes()
        .iter()
        .map(|n| match n {
            Node::Internal { children, .. } => children.len(),
            Node::Leaf { .. } => 0,
        })
        .sum();
    assert_eq!(node_lines, m.nodes().len());
    assert_eq!(edge_lines.len(), edges);
    for l in &lines[1..lines.len() - 1] {
        assert!(l.ends_with("];"), "{l}");
        // Quotes inside labels are escaped, so each line has exactly two
        // unescaped quote pairs at most.
        let unescaped = l.replace("\\\"", "").matches('"').count();
        assert!(unescaped % 2 == 0, "{l}");
    }
}

#[test]
fn dot_labels_show_intervals() {
    let ds = gen_plus_sign(30, 2);
    let m = fit(&ds, &Hyperparams { max_depth: 2, ..Hyperparams::default() }).unwrap();
    let dot = to_dot(&m);
    assert!(dot.contains("(-inf, "));
    assert!(dot.contains(", +inf) -> "));
    assert!(dot.contains("n0 -> n1 [label=\"0\"];"));
}
