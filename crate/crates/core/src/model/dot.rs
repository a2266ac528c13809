//! Graphviz export.

use std::fmt::Write as _;

use super::{LeafValue, Node, SgtModel, Split};
use crate::data::{FeatureKind, FeatureSchema};
use crate::inner_tree::Projection;
use crate::split::{ShapeFeatures, ShapeFunction};

/// Four significant digits.
pub fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Interval → branch segments of a univariate numeric shape function,
/// left to right, with adjacent bins on the same branch merged. `None` for
/// other shape functions.
pub fn interval_segments(f: &ShapeFunction) -> Option<Vec<(f64, f64, usize)>> {
    if f.features.is_bivariate() || f.tree.max_column().is_some_and(|_| reads_several_columns(f)) {
        return None;
    }
    let mut out: Vec<(f64, f64, usize)> = Vec::new();
    for (bin, rules) in f.tree.bin_rules().into_iter().enumerate() {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (_, t, left) in rules {
            if left {
                hi = hi.min(t);
            } else {
                lo = lo.max(t);
            }
        }
        let b = f.assignment[bin];
        match out.last_mut() {
            Some(last) if last.2 == b => last.1 = hi,
            _ => out.push((lo, hi, b)),
        }
    }
    Some(out)
}

fn reads_several_columns(f: &ShapeFunction) -> bool {
    let mut cols = f.tree.nodes().iter().filter_map(|n| match n {
        crate::inner_tree::InnerNode::Split { projection: Projection::Column { column }, .. } => Some(*column),
        crate::inner_tree::InnerNode::Split { .. } => Some(usize::MAX),
        _ => None,
    });
    let first = cols.next();
    cols.any(|c| Some(c) != first)
}

fn column_name(schema: &FeatureSchema, column: usize) -> String {
    for g in schema.groups() {
        if g.columns.contains(&column) {
            let f = &schema.features()[g.feature];
            return match &f.kind {
                FeatureKind::Numeric => f.name.clone(),
                FeatureKind::Categorical { levels } => format!("{}={}", f.name, levels[column - g.columns.start]),
            };
        }
    }
    format!("col{column}")
}

fn projection_text(schema: &FeatureSchema, p: &Projection) -> String {
    match *p {
        Projection::Column { column } => column_name(schema, column),
        Projection::Rotated { first, second, cos, sin } => format!(
            "{}·{} + {}·{}",
            sig4(cos),
            column_name(schema, first),
            sig4(sin),
            column_name(schema, second)
        ),
    }
}

fn shape_label(schema: &FeatureSchema, f: &ShapeFunction) -> String {
    let mut out = String::new();
    match f.features {
        ShapeFeatures::Univariate { feature } => {
            let spec = &schema.features()[feature];
            match &spec.kind {
                FeatureKind::Categorical { levels } => {
                    let start = schema.groups()[feature].columns.start;
                    let mut by_branch = vec![Vec::new(); f.arity];
                    for (v, level) in levels.iter().enumerate() {
                        let mut row = vec![0.0; start + levels.len()];
                        row[start + v] = 1.0;
                        by_branch[f.branch(&row)].push(level.as_str());
                    }
                    let _ = write!(out, "{}", spec.name);
                    for (b, ls) in by_branch.iter().enumerate().filter(|(_, ls)| !ls.is_empty()) {
                        let _ = write!(out, "\n{{{}}} -> {b}", ls.join(", "));
                    }
                }
                FeatureKind::Numeric => {
                    let _ = write!(out, "{}", spec.name);
                    for (lo, hi, b) in interval_segments(f).unwrap_or_default() {
                        let lo = if lo.is_finite() { sig4(lo) } else { "-inf".into() };
                        let close = if hi.is_finite() { "]" } else { ")" };
                        let hi = if hi.is_finite() { sig4(hi) } else { "+inf".into() };
                        let _ = write!(out, "\n({lo}, {hi}{close} -> {b}");
                    }
                }
            }
        }
        ShapeFeatures::Bivariate { first, second } => {
            let _ = write!(out, "{} & {}", schema.features()[first].name, schema.features()[second].name);
            for (bin, rules) in f.tree.bin_rules().iter().enumerate() {
                let conds: Vec<String> = rules
                    .iter()
                    .map(|(p, t, left)| format!("{} {} {}", projection_text(schema, p), if *left { "<=" } else { ">" }, sig4(*t)))
                    .collect();
                let _ = write!(out, "\n{} -> {}", conds.join(" and "), f.assignment[bin]);
            }
        }
    }
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

/// Graphviz DOT text with one box per node and branch-labelled edges.
pub fn to_dot(m: &SgtModel) -> String {
    let schema = m.schema();
    let mut out = String::from("digraph sgt {\n  node [shape=box, fontname=\"Helvetica\"];\n");
    for (i, n) in m.nodes().iter().enumerate() {
        let label = match n {
            Node::Internal { split: Split::Threshold { column, threshold }, .. } => {
                format!("{} <= {} -> 0\nelse -> 1", column_name(schema, *column), sig4(*threshold))
            }
            Node::Internal { split: Split::Shape(f), .. } => shape_label(schema, f),
            Node::Leaf { value: LeafValue::Class { label, distribution }, support, .. } => {
                format!("class = {}\np = {}\nn = {support}", m.class_names()[*label], sig4(distribution[*label]))
            }
            Node::Leaf { value: LeafValue::Real { mean }, support, .. } => format!("mean = {}\nn = {support}", sig4(*mean)),
        };
        let style = if n.is_leaf() { ", style=rounded" } else { "" };
        let _ = writeln!(out, "  n{i} [label=\"{}\"{style}];", escape(&label));
    }
    for (i, n) in m.nodes().iter().enumerate() {
        if let Node::Internal { children, .. } = n {
            for (b, c) in children.iter().enumerate() {
                let _ = writeln!(out, "  n{i} -> n{c} [label=\"{b}\"];");
            }
        }
    }
    out.push_str("}\n");
    out
}
