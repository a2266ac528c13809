//! Tabular datasets: schema, CSV ingestion, one-hot encoding and splitting.

pub mod synth;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Read;
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error at line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    Header { expected: Vec<String>, found: Vec<String> },
    #[error("line {line}, column '{column}': '{value}' is not a number")]
    NonNumeric { line: u64, column: String, value: String },
    #[error("line {line}, column '{column}': unknown categorical level '{value}'")]
    UnknownLevel { line: u64, column: String, value: String },
    #[error("line {line}, column '{column}': missing value")]
    Missing { line: u64, column: String },
    #[error("empty dataset")]
    Empty,
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("invalid split: {0}")]
    Split(String),
    #[error("unknown class label '{0}'")]
    UnknownClass(String),
}

/// Prediction task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "classification" | "class" | "clf" => Ok(Task::Classification),
            "regression" | "reg" => Ok(Task::Regression),
            other => Err(format!("unknown task '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureSpec { name: name.into(), kind: FeatureKind::Numeric }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, levels: impl IntoIterator<Item = S>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Categorical { levels: levels.into_iter().map(Into::into).collect() },
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, FeatureKind::Numeric)
    }

    /// Number of encoded columns this feature occupies.
    pub fn width(&self) -> usize {
        match &self.kind {
            FeatureKind::Numeric => 1,
            FeatureKind::Categorical { levels } => levels.len(),
        }
    }
}

/// Ordered list of feature columns. The target column is not part of the
/// schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureSpec>", into = "Vec<FeatureSpec>")]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
}

impl TryFrom<Vec<FeatureSpec>> for FeatureSchema {
    type Error = DataError;

    fn try_from(features: Vec<FeatureSpec>) -> Result<Self, Self::Error> {
        FeatureSchema::new(features)
    }
}

impl From<FeatureSchema> for Vec<FeatureSpec> {
    fn from(s: FeatureSchema) -> Self {
        s.features
    }
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self, DataError> {
        if features.is_empty() {
            return Err(DataError::Schema("schema has no feature columns".into()));
        }
        let mut names = HashSet::new();
        for f in &features {
            if !names.insert(f.name.as_str()) {
                return Err(DataError::Schema(format!("duplicate column name '{}'", f.name)));
            }
            if let FeatureKind::Categorical { levels } = &f.kind {
                if levels.is_empty() {
                    return Err(DataError::Schema(format!("categorical '{}' has no levels", f.name)));
                }
                let mut seen = HashSet::new();
                for l in levels {
                    if !seen.insert(l.as_str()) {
                        return Err(DataError::Schema(format!("duplicate level '{l}' in '{}'", f.name)));
                    }
                }
            }
        }
        Ok(FeatureSchema { features })
    }

    /// All-numeric schema with the given column names.
    pub fn numeric<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, DataError> {
        Self::new(names.into_iter().map(FeatureSpec::numeric).collect())
    }

    /// Parses the schema file format: one line per column,
    /// `name,kind[,level1|level2|...]`. Blank lines and `#` comments are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut features = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(3, ',');
            let name = parts.next().unwrap_or("").trim();
            let kind = parts.next().map(str::trim).unwrap_or("");
            if name.is_empty() {
                return Err(DataError::Schema(format!("line {}: missing column name", i + 1)));
            }
            let spec = match kind {
                "numeric" | "num" => FeatureSpec::numeric(name),
                "categorical" | "cat" => {
                    let levels = parts
                        .next()
                        .ok_or_else(|| DataError::Schema(format!("line {}: categorical without levels", i + 1)))?;
                    FeatureSpec::categorical(name, levels.split('|').map(str::trim))
                }
                other => {
                    return Err(DataError::Schema(format!("line {}: unknown kind '{other}'", i + 1)));
                }
            };
            features.push(spec);
        }
        Self::new(features)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, DataError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for f in &self.features {
            match &f.kind {
                FeatureKind::Numeric => writeln!(out, "{},numeric", f.name).unwrap(),
                FeatureKind::Categorical { levels } => {
                    writeln!(out, "{},categorical,{}", f.name, levels.join("|")).unwrap()
                }
            }
        }
        out
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn encoded_width(&self) -> usize {
        self.features.iter().map(FeatureSpec::width).sum()
    }

    /// Encoded column ranges, one per feature.
    pub fn groups(&self) -> Vec<FeatureGroup> {
        let mut start = 0;
        self.features
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let w = f.width();
                let g = FeatureGroup { feature: i, columns: start..start + w, numeric: f.is_numeric() };
                start += w;
                g
            })
            .collect()
    }
}

/// Raw column storage.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    /// Level indices into the schema's level list.
    Categorical(Vec<usize>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    fn select(&self, idx: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(idx.iter().map(|&i| v[i]).collect()),
            Column::Categorical(v) => Column::Categorical(idx.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Sample targets.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Classes { labels: Vec<usize>, names: Vec<String> },
    Real(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes { labels, .. } => labels.len(),
            Targets::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Targets::Classes { .. } => Task::Classification,
            Targets::Real(_) => Task::Regression,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Targets::Classes { names, .. } => names.len(),
            Targets::Real(_) => 0,
        }
    }

    fn select(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Classes { labels, names } => Targets::Classes {
                labels: idx.iter().map(|&i| labels[i]).collect(),
                names: names.clone(),
            },
            Targets::Real(v) => Targets::Real(idx.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// A schema-conforming table of samples with targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    columns: Vec<Column>,
    targets: Targets,
    target_name: String,
}

impl Dataset {
    pub fn new(
        schema: FeatureSchema,
        columns: Vec<Column>,
        targets: Targets,
        target_name: impl Into<String>,
    ) -> Result<Self, DataError> {
        if targets.is_empty() {
            return Err(DataError::Empty);
        }
        if columns.len() != schema.len() {
            return Err(DataError::Schema(format!(
                "{} columns supplied for a {}-column schema",
                columns.len(),
                schema.len()
            )));
        }
        let n = targets.len();
        for (c, f) in columns.iter().zip(schema.features()) {
            if c.len() != n {
                return Err(DataError::Schema(format!("column '{}' has {} rows, expected {n}", f.name, c.len())));
            }
            match (c, &f.kind) {
                (Column::Numeric(v), FeatureKind::Numeric) => {
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(DataError::Schema(format!("column '{}' has non-finite values", f.name)));
                    }
                }
                (Column::Categorical(v), FeatureKind::Categorical { levels }) => {
                    if v.iter().any(|&l| l >= levels.len()) {
                        return Err(DataError::Schema(format!("column '{}' has out-of-range levels", f.name)));
                    }
                }
                _ => return Err(DataError::Schema(format!("column '{}' kind mismatch", f.name))),
            }
        }
        if let Targets::Classes { labels, names } = &targets {
            if names.is_empty() || labels.iter().any(|&l| l >= names.len()) {
                return Err(DataError::Schema("class labels out of range".into()));
            }
        }
        Ok(Dataset { schema, columns, targets, target_name: target_name.into() })
    }

    /// Convenience constructor for all-numeric classification data.
    pub fn numeric_classification(
        names: &[&str],
        rows: &[Vec<f64>],
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self, DataError> {
        let schema = FeatureSchema::numeric(names.iter().copied())?;
        let columns = (0..names.len()).map(|j| Column::Numeric(rows.iter().map(|r| r[j]).collect())).collect();
        let names = (0..n_classes).map(|c| c.to_string()).collect();
        Dataset::new(schema, columns, Targets::Classes { labels, names }, "y")
    }

    /// Convenience constructor for all-numeric regression data.
    pub fn numeric_regression(names: &[&str], rows: &[Vec<f64>], ys: Vec<f64>) -> Result<Self, DataError> {
        let schema = FeatureSchema::numeric(names.iter().copied())?;
        let columns = (0..names.len()).map(|j| Column::Numeric(rows.iter().map(|r| r[j]).collect())).collect();
        Dataset::new(schema, columns, Targets::Real(ys), "y")
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn task(&self) -> Task {
        self.targets.task()
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn n_classes(&self) -> usize {
        self.targets.n_classes()
    }

    pub fn class_names(&self) -> &[String] {
        match &self.targets {
            Targets::Classes { names, .. } => names,
            Targets::Real(_) => &[],
        }
    }

    /// Rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(idx)).collect(),
            targets: self.targets.select(idx),
            target_name: self.target_name.clone(),
        }
    }

    /// Re-expresses class labels against `names` (e.g. a model's class list).
    pub fn with_class_names(&self, names: &[String]) -> Result<Dataset, DataError> {
        match &self.targets {
            Targets::Real(_) => Ok(self.clone()),
            Targets::Classes { labels, names: own } => {
                let map: Vec<usize> = own
                    .iter()
                    .map(|n| names.iter().position(|m| m == n).ok_or_else(|| DataError::UnknownClass(n.clone())))
                    .collect::<Result<_, _>>()?;
                let mut out = self.clone();
                out.targets = Targets::Classes {
                    labels: labels.iter().map(|&l| map[l]).collect(),
                    names: names.to_vec(),
                };
                Ok(out)
            }
        }
    }

    /// Standardises regression targets to zero mean, unit deviation.
    pub fn standardized_targets(&self) -> Dataset {
        let mut out = self.clone();
        if let Targets::Real(v) = &mut out.targets {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for y in v.iter_mut() {
                *y = (*y - mean) / sd;
            }
        }
        out
    }

    /// Raw cell text for row `i`, feature `j`.
    pub fn cell_text(&self, i: usize, j: usize) -> String {
        match (&self.columns[j], &self.schema.features()[j].kind) {
            (Column::Numeric(v), _) => format!("{}", v[i]),
            (Column::Categorical(v), FeatureKind::Categorical { levels }) => levels[v[i]].clone(),
            _ => unreachable!("validated at construction"),
        }
    }

    pub fn target_text(&self, i: usize) -> String {
        match &self.targets {
            Targets::Classes { labels, names } => names[labels[i]].clone(),
            Targets::Real(v) => format!("{}", v[i]),
        }
    }

    /// Writes the dataset as CSV (header row, target last).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self
            .schema
            .features()
            .iter()
            .map(|f| f.name.as_str())
            .chain(std::iter::once(self.target_name.as_str()))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.n_rows() {
            let cells: Vec<String> = (0..self.n_features())
                .map(|j| self.cell_text(i, j))
                .chain(std::iter::once(self.target_text(i)))
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Loads a comma-separated file whose header names the schema's columns in
/// order, followed by the target column.
pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema, task: Task) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema, task)
}

/// Like [`load_csv`] but from any reader.
pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema, task: Task) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| DataError::Csv { line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(DataError::Empty);
    }
    let expected: Vec<String> = schema.features().iter().map(|f| f.name.clone()).collect();
    if header.len() != expected.len() + 1 || header[..expected.len()] != expected[..] {
        return Err(DataError::Header { expected, found: header });
    }
    let target_name = header[expected.len()].clone();

    let mut columns: Vec<Column> = schema
        .features()
        .iter()
        .map(|f| if f.is_numeric() { Column::Numeric(Vec::new()) } else { Column::Categorical(Vec::new()) })
        .collect();
    let mut raw_targets: Vec<String> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| DataError::Csv { line, message: e.to_string() })?;
        if rec.len() != header.len() {
            return Err(DataError::Csv {
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        for (j, f) in schema.features().iter().enumerate() {
            let cell = &rec[j];
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                return Err(DataError::Missing { line, column: f.name.clone() });
            }
            match (&mut columns[j], &f.kind) {
                (Column::Numeric(v), _) => {
                    let x: f64 = cell.parse().ok().filter(|x: &f64| x.is_finite()).ok_or_else(|| {
                        DataError::NonNumeric { line, column: f.name.clone(), value: cell.to_string() }
                    })?;
                    v.push(x);
                }
                (Column::Categorical(v), FeatureKind::Categorical { levels }) => {
                    let l = levels.iter().position(|l| l == cell).ok_or_else(|| DataError::UnknownLevel {
                        line,
                        column: f.name.clone(),
                        value: cell.to_string(),
                    })?;
                    v.push(l);
                }
                _ => unreachable!(),
            }
        }
        let t = &rec[expected.len()];
        if t.is_empty() {
            return Err(DataError::Missing { line, column: target_name.clone() });
        }
        raw_targets.push(t.to_string());
    }
    if raw_targets.is_empty() {
        return Err(DataError::Empty);
    }
    let targets = match task {
        Task::Regression => Targets::Real(
            raw_targets
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    t.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| DataError::NonNumeric {
                        line: i as u64 + 2,
                        column: target_name.clone(),
                        value: t.clone(),
                    })
                })
                .collect::<Result<_, _>>()?,
        ),
        Task::Classification => {
            let names = class_names(&raw_targets);
            let labels = raw_targets.iter().map(|t| names.iter().position(|n| n == t).unwrap()).collect();
            Targets::Classes { labels, names }
        }
    };
    Dataset::new(schema.clone(), columns, targets, target_name)
}

/// Distinct labels, sorted numerically when all parse as numbers and
/// lexicographically otherwise.
fn class_names(raw: &[String]) -> Vec<String> {
    let mut names: Vec<String> = raw.iter().cloned().collect::<HashSet<_>>().into_iter().collect();
    if names.iter().all(|n| n.parse::<f64>().is_ok()) {
        names.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    } else {
        names.sort();
    }
    names
}

/// Encoded columns belonging to one original feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub feature: usize,
    pub columns: Range<usize>,
    pub numeric: bool,
}

/// Random access to the encoded columns of one sample.
pub trait FeatureRow {
    fn at(&self, column: usize) -> f64;
}

impl FeatureRow for [f64] {
    #[inline]
    fn at(&self, column: usize) -> f64 {
        self[column]
    }
}

impl FeatureRow for Vec<f64> {
    #[inline]
    fn at(&self, column: usize) -> f64 {
        self[column]
    }
}

/// One row of an [`EncodedMatrix`], read in place.
#[derive(Debug, Clone, Copy)]
pub struct MatrixRow<'a> {
    pub matrix: &'a EncodedMatrix,
    pub row: usize,
}

impl FeatureRow for MatrixRow<'_> {
    #[inline]
    fn at(&self, column: usize) -> f64 {
        self.matrix.value(self.row, column)
    }
}

/// Column-major numeric view of a dataset with categoricals one-hot encoded.
#[derive(Debug, Clone)]
pub struct EncodedMatrix {
    n_rows: usize,
    columns: Vec<Vec<f64>>,
    groups: Vec<FeatureGroup>,
}

impl EncodedMatrix {
    /// Builds a matrix directly from encoded columns and a group map.
    pub fn from_columns(columns: Vec<Vec<f64>>, groups: Vec<FeatureGroup>) -> Self {
        let n_rows = columns.first().map_or(0, Vec::len);
        debug_assert!(columns.iter().all(|c| c.len() == n_rows));
        EncodedMatrix { n_rows, columns, groups }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn groups(&self) -> &[FeatureGroup] {
        &self.groups
    }

    #[inline]
    pub fn column(&self, c: usize) -> &[f64] {
        &self.columns[c]
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    pub fn row_view(&self, row: usize) -> MatrixRow<'_> {
        MatrixRow { matrix: self, row }
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[row]).collect()
    }

    /// Recovers raw cell text of `row` from its encoding (the inverse of the
    /// one-hot view).
    pub fn decode_row(&self, row: usize, schema: &FeatureSchema) -> Vec<String> {
        self.groups
            .iter()
            .map(|g| match &schema.features()[g.feature].kind {
                FeatureKind::Numeric => format!("{}", self.columns[g.columns.start][row]),
                FeatureKind::Categorical { levels } => {
                    let hot = g.columns.clone().position(|c| self.columns[c][row] == 1.0).expect("one-hot row");
                    levels[hot].clone()
                }
            })
            .collect()
    }
}

/// One-hot encodes categorical columns; numeric columns pass through.
pub fn one_hot_view(ds: &Dataset) -> EncodedMatrix {
    let n = ds.n_rows();
    let mut columns = Vec::with_capacity(ds.schema.encoded_width());
    for (col, f) in ds.columns.iter().zip(ds.schema.features()) {
        match col {
            Column::Numeric(v) => columns.push(v.clone()),
            Column::Categorical(v) => {
                for level in 0..f.width() {
                    columns.push(v.iter().map(|&l| if l == level { 1.0 } else { 0.0 }).collect());
                }
            }
        }
    }
    debug_assert!(columns.iter().all(|c| c.len() == n));
    EncodedMatrix { n_rows: n, columns, groups: ds.schema.groups() }
}

/// Train/validation/test fractions plus shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, valid: f64, test: f64, seed: u64) -> Result<Self, DataError> {
        let s = SplitSpec { train, valid, test, seed };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), DataError> {
        let f = [self.train, self.valid, self.test];
        if f.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(DataError::Split("fractions must be positive".into()));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DataError::Split("fractions must sum to 1".into()));
        }
        Ok(())
    }
}

/// Shuffled, disjoint index sets `(train, valid, test)`.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<[Vec<usize>; 3], DataError> {
    spec.validate()?;
    if n < 3 {
        return Err(DataError::Split(format!("{n} rows cannot fill three partitions")));
    }
    let n_train = (spec.train * n as f64).round() as usize;
    let n_valid = (spec.valid * n as f64).round() as usize;
    if n_train == 0 || n_valid == 0 || n_train + n_valid >= n {
        return Err(DataError::Split(format!("fractions leave an empty partition for {n} rows")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test = idx.split_off(n_train + n_valid);
    let valid = idx.split_off(n_train);
    Ok([idx, valid, test])
}

pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset), DataError> {
    let [a, b, c] = split_indices(ds.n_rows(), spec)?;
    Ok((ds.subset(&a), ds.subset(&b), ds.subset(&c)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema_xy() -> FeatureSchema {
        FeatureSchema::numeric(["x1", "x2"]).unwrap()
    }

    #[test]
    fn parses_small_csv() {
        let text = "x1,x2,y\n0.5,1,a\n-2,3.25,b\n1e-3,0,a\n";
        let ds = read_csv(text.as_bytes(), &schema_xy(), Task::Classification).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.class_names(), ["a", "b"]);
    }

    #[test]
    fn non_numeric_cell_names_location() {
        let text = "x1,x2,y\n0.5,1,0\n0.1,cat,1\n";
        match read_csv(text.as_bytes(), &schema_xy(), Task::Classification) {
            Err(DataError::NonNumeric { line, column, value }) => {
                assert_eq!((line, column.as_str(), value.as_str()), (3, "x2", "cat"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_and_missing_values() {
        let e = read_csv("x1,x2,y\n".as_bytes(), &schema_xy(), Task::Classification).unwrap_err();
        assert_eq!(e.to_string(), "empty dataset");
        assert!(matches!(read_csv("".as_bytes(), &schema_xy(), Task::Regression), Err(DataError::Empty)));
        let e = read_csv("x1,x2,y\n1,,0\n".as_bytes(), &schema_xy(), Task::Classification).unwrap_err();
        assert!(matches!(e, DataError::Missing { line: 2, .. }));
    }

    #[test]
    fn header_and_level_errors() {
        let e = read_csv("a,b,y\n1,2,0\n".as_bytes(), &schema_xy(), Task::Classification).unwrap_err();
        assert!(matches!(e, DataError::Header { .. }));
        let s = FeatureSchema::parse("color,categorical,red|green\n").unwrap();
        let e = read_csv("color,y\nblue,1\n".as_bytes(), &s, Task::Classification).unwrap_err();
        assert!(matches!(e, DataError::UnknownLevel { line: 2, .. }));
    }

    #[test]
    fn schema_file_round_trip_and_validation() {
        let text = "age,numeric\ncolor,categorical,red|green|blue\n";
        let s = FeatureSchema::parse(text).unwrap();
        assert_eq!(s.encoded_width(), 4);
        assert_eq!(FeatureSchema::parse(&s.to_text()).unwrap(), s);
        assert!(FeatureSchema::parse("a,numeric\na,numeric\n").is_err());
        assert!(FeatureSchema::parse("a,categorical,x|x\n").is_err());
        assert!(FeatureSchema::parse("a,ordinal\n").is_err());
    }

    #[test]
    fn one_hot_encodes_levels() {
        let s = FeatureSchema::parse("c,categorical,a|b|c\nx,numeric\n").unwrap();
        let ds = read_csv("c,x,y\nb,2.5,0\na,1,1\n".as_bytes(), &s, Task::Classification).unwrap();
        let m = one_hot_view(&ds);
        assert_eq!(m.width(), 4);
        assert_eq!(m.row(0), vec![0.0, 1.0, 0.0, 2.5]);
        assert_eq!(m.groups().len(), 2);
        assert_eq!(m.groups()[0].columns, 0..3);
        assert_eq!(m.groups()[1].columns, 3..4);
        assert_eq!(m.decode_row(0, &s), vec!["b", "2.5"]);
    }

    #[test]
    fn adult_like_schema_has_thirteen_groups() {
        let mut feats: Vec<FeatureSpec> =
            (0..11).map(|i| FeatureSpec::categorical(format!("c{i}"), ["p", "q", "r"])).collect();
        feats.push(FeatureSpec::numeric("age"));
        feats.push(FeatureSpec::numeric("hours"));
        let schema = FeatureSchema::new(feats).unwrap();
        assert_eq!(schema.groups().len(), 13);
        assert_eq!(schema.encoded_width(), 35);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let spec = SplitSpec::new(0.7, 0.15, 0.15, 1).unwrap();
        let [a, b, c] = split_indices(10, &spec).unwrap();
        assert_eq!(a.len(), 7);
        assert_eq!(b.len() + c.len(), 3);
        assert_eq!(split_indices(10, &spec).unwrap(), [a.clone(), b.clone(), c.clone()]);
        let mut all: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(split_indices(2, &spec).is_err());
        assert!(SplitSpec::new(1.0, 0.0, 0.0, 0).is_err());
    }

    #[test]
    fn relabel_against_model_classes() {
        let ds = read_csv("x1,x2,y\n0,0,b\n".as_bytes(), &schema_xy(), Task::Classification).unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        let r = ds.with_class_names(&names).unwrap();
        assert_eq!(r.targets(), &Targets::Classes { labels: vec![1], names });
        assert!(ds.with_class_names(&["z".to_string()]).is_err());
    }
}
