//! The `sgt-model` JSON document.
//!
//! ```text
//! { "format": "sgt-model", "version": 1, "task": "classification",
//!   "target": "y", "classes": ["0", "1"], "max_arity": 2,
//!   "schema": [ { "name": "x1", "kind": "numeric" }, ... ],
//!   "nodes": [ { "node": "internal", "split": {...}, "children": [1, 2], ... }, ... ] }
//! ```
//!
//! Floats are written in shortest round-trip form, so thresholds reload
//! bit-exactly and routing is unchanged.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelError, Node, SgtModel};
use crate::data::{FeatureSchema, Task};

pub const FORMAT_NAME: &str = "sgt-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    task: Task,
    target: String,
    #[serde(default)]
    classes: Vec<String>,
    max_arity: usize,
    schema: FeatureSchema,
    nodes: Vec<Node>,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

impl SgtModel {
    pub fn to_json(&self) -> String {
        let doc = Document {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            task: self.task,
            target: self.target_name.clone(),
            classes: self.class_names.clone(),
            max_arity: self.max_arity,
            schema: self.schema.clone(),
            nodes: self.nodes.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("models serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let header: Header = serde_json::from_str(text)?;
        if header.format != FORMAT_NAME {
            return Err(ModelError::Format { expected: FORMAT_NAME, found: header.format });
        }
        if header.version != FORMAT_VERSION {
            return Err(ModelError::Version { found: header.version, expected: FORMAT_VERSION });
        }
        let doc: Document = serde_json::from_str(text)?;
        SgtModel::new(doc.schema, doc.task, doc.classes, doc.target, doc.max_arity, doc.nodes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
