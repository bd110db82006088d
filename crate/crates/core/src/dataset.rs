//! Column-oriented tabular data: CSV loading with type inference, data
//! context extraction for prompts, and reproducible row splits.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("file not found: {0}")]
    MissingFile(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("input has no header row")]
    MissingHeader,
    #[error("header column {index} has an empty name")]
    EmptyColumnName { index: usize },
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: missing value in column `{column}`")]
    MissingCell { line: usize, column: String },
    #[error("input has a header but no data rows")]
    NoRows,
    #[error("target column `{0}` not found")]
    TargetNotFound(String),
    #[error("target column `{0}` is not binary (expected boolean or 0/1 values)")]
    NonBinaryTarget(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{column}` cannot be read as {kind}: value `{value}`")]
    BadOverride {
        column: String,
        kind: ColumnType,
        value: String,
    },
    #[error("schema file line {line}: {detail}")]
    BadSchemaLine { line: usize, detail: String },
    #[error("column `{column}` has {found} values, dataset has {expected} rows")]
    LengthMismatch {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("split fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("split of {n_rows} rows at fraction {fraction} leaves an empty partition")]
    EmptyPartition { n_rows: usize, fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Numeric,
    Categorical,
    Boolean,
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Numeric => "numeric",
            ColumnType::Categorical => "categorical",
            ColumnType::Boolean => "boolean",
        })
    }
}

impl std::str::FromStr for ColumnType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "numeric" | "number" | "float" | "int" => Ok(ColumnType::Numeric),
            "categorical" | "category" | "string" | "text" => Ok(ColumnType::Categorical),
            "boolean" | "bool" => Ok(ColumnType::Boolean),
            other => Err(format!("unknown column type `{other}`")),
        }
    }
}

/// Storage for one column. Categorical levels keep first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical {
        levels: Vec<String>,
        codes: Vec<u32>,
    },
    Boolean {
        values: Vec<bool>,
        true_label: String,
        false_label: String,
    },
}

/// A borrowed view of a single cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value<'a> {
    Number(f64),
    Text(&'a str),
    Bool(bool),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    name: String,
    data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Numeric(values),
        }
    }

    pub fn boolean(name: impl Into<String>, values: Vec<bool>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Boolean {
                values,
                true_label: "true".to_string(),
                false_label: "false".to_string(),
            },
        }
    }

    pub fn boolean_labeled(
        name: impl Into<String>,
        values: Vec<bool>,
        true_label: impl Into<String>,
        false_label: impl Into<String>,
    ) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Boolean {
                values,
                true_label: true_label.into(),
                false_label: false_label.into(),
            },
        }
    }

    /// Builds a categorical column; levels are recorded in first-appearance order.
    pub fn categorical<S: AsRef<str>>(name: impl Into<String>, values: &[S]) -> Self {
        let mut levels: Vec<String> = Vec::new();
        let mut index: HashMap<&str, u32> = HashMap::new();
        let mut codes = Vec::with_capacity(values.len());
        for v in values {
            let v = v.as_ref();
            let code = match index.get(v) {
                Some(&c) => c,
                None => {
                    let c = levels.len() as u32;
                    levels.push(v.to_string());
                    index.insert(v, c);
                    c
                }
            };
            codes.push(code);
        }
        Column {
            name: name.into(),
            data: ColumnData::Categorical { levels, codes },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn data(&self) -> &ColumnData {
        &self.data
    }

    pub fn column_type(&self) -> ColumnType {
        match self.data {
            ColumnData::Numeric(_) => ColumnType::Numeric,
            ColumnData::Categorical { .. } => ColumnType::Categorical,
            ColumnData::Boolean { .. } => ColumnType::Boolean,
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
            ColumnData::Boolean { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, row: usize) -> Value<'_> {
        match &self.data {
            ColumnData::Numeric(v) => Value::Number(v[row]),
            ColumnData::Categorical { levels, codes } => Value::Text(&levels[codes[row] as usize]),
            ColumnData::Boolean { values, .. } => Value::Bool(values[row]),
        }
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v),
            _ => None,
        }
    }

    /// Observed categorical levels, or `None` for other column kinds.
    pub fn levels(&self) -> Option<&[String]> {
        match &self.data {
            ColumnData::Categorical { levels, .. } => Some(levels),
            _ => None,
        }
    }

    /// Text of a cell as it would be written to CSV.
    pub fn cell_text(&self, row: usize) -> String {
        match &self.data {
            ColumnData::Numeric(v) => format_number(v[row]),
            ColumnData::Categorical { levels, codes } => levels[codes[row] as usize].clone(),
            ColumnData::Boolean {
                values,
                true_label,
                false_label,
            } => {
                if values[row] {
                    true_label.clone()
                } else {
                    false_label.clone()
                }
            }
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        let data = match &self.data {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical { levels, codes } => {
                let picked: Vec<&str> = rows
                    .iter()
                    .map(|&r| levels[codes[r] as usize].as_str())
                    .collect();
                return Column::categorical(self.name.clone(), &picked);
            }
            ColumnData::Boolean {
                values,
                true_label,
                false_label,
            } => ColumnData::Boolean {
                values: rows.iter().map(|&r| values[r]).collect(),
                true_label: true_label.clone(),
                false_label: false_label.clone(),
            },
        };
        Column {
            name: self.name.clone(),
            data,
        }
    }
}

/// Immutable table with named, typed columns and an optional binary target.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    columns: Vec<Column>,
    n_rows: usize,
    target: Option<String>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        columns: Vec<Column>,
        target: Option<&str>,
    ) -> Result<Self, DatasetError> {
        let n_rows = columns.first().map(Column::len).unwrap_or(0);
        let mut seen = HashSet::new();
        for (index, c) in columns.iter().enumerate() {
            if c.name.trim().is_empty() {
                return Err(DatasetError::EmptyColumnName { index });
            }
            if !seen.insert(c.name.as_str()) {
                return Err(DatasetError::DuplicateColumn(c.name.clone()));
            }
            if c.len() != n_rows {
                return Err(DatasetError::LengthMismatch {
                    column: c.name.clone(),
                    expected: n_rows,
                    found: c.len(),
                });
            }
        }
        let ds = Dataset {
            name: name.into(),
            columns,
            n_rows,
            target: None,
        };
        match target {
            Some(t) => ds.with_target(t),
            None => Ok(ds),
        }
    }

    /// Sets the target column, checking that it exists and is binary.
    pub fn with_target(mut self, target: &str) -> Result<Self, DatasetError> {
        let col = self
            .column(target)
            .ok_or_else(|| DatasetError::TargetNotFound(target.to_string()))?;
        binary_values(col)?;
        self.target = Some(target.to_string());
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn target(&self) -> Option<&str> {
        self.target.as_deref()
    }

    /// The target column as 0/1 labels.
    pub fn labels(&self) -> Result<Vec<u8>, DatasetError> {
        let t = self
            .target
            .as_deref()
            .ok_or_else(|| DatasetError::TargetNotFound(String::new()))?;
        let col = self
            .column(t)
            .ok_or_else(|| DatasetError::TargetNotFound(t.to_string()))?;
        binary_values(col)
    }

    /// Reads any binary-valued column (boolean, or numeric restricted to 0/1) as 0/1.
    pub fn binary_column(&self, name: &str) -> Result<Vec<u8>, DatasetError> {
        let col = self
            .column(name)
            .ok_or_else(|| DatasetError::UnknownColumn(name.to_string()))?;
        binary_values(col)
    }

    /// New dataset containing `rows` (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            n_rows: rows.len(),
            target: self.target.clone(),
        }
    }

    /// New dataset without the named column. The target is cleared if dropped.
    pub fn without_column(&self, name: &str) -> Result<Dataset, DatasetError> {
        if self.column(name).is_none() {
            return Err(DatasetError::UnknownColumn(name.to_string()));
        }
        Ok(Dataset {
            name: self.name.clone(),
            columns: self
                .columns
                .iter()
                .filter(|c| c.name != name)
                .cloned()
                .collect(),
            n_rows: self.n_rows,
            target: self.target.clone().filter(|t| t != name),
        })
    }

    /// New dataset with `column` appended.
    pub fn with_column(&self, column: Column) -> Result<Dataset, DatasetError> {
        let mut columns = self.columns.clone();
        columns.push(column);
        let mut ds = Dataset::new(self.name.clone(), columns, None)?;
        ds.target = self.target.clone();
        Ok(ds)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for row in 0..self.n_rows {
            w.write_record(self.columns.iter().map(|c| c.cell_text(row)))?;
        }
        w.flush().map_err(|source| DatasetError::Io {
            path: "<writer>".into(),
            source,
        })?;
        Ok(())
    }
}

fn binary_values(col: &Column) -> Result<Vec<u8>, DatasetError> {
    match &col.data {
        ColumnData::Boolean { values, .. } => Ok(values.iter().map(|&b| b as u8).collect()),
        ColumnData::Numeric(v) => v
            .iter()
            .map(|&x| {
                if x == 0.0 {
                    Ok(0)
                } else if x == 1.0 {
                    Ok(1)
                } else {
                    Err(DatasetError::NonBinaryTarget(col.name.clone()))
                }
            })
            .collect(),
        ColumnData::Categorical { .. } => Err(DatasetError::NonBinaryTarget(col.name.clone())),
    }
}

/// Formats a float the way CSV output and prompts show it: integers without
/// a fractional part, everything else in shortest round-trip form.
pub fn format_number(x: f64) -> String {
    format!("{x}")
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Boolean reading of a raw token, for the inference set {0,1,true,false,Y,N}.
pub fn parse_bool_token(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "y" => Some(true),
        "0" | "false" | "n" => Some(false),
        _ => None,
    }
}

/// Column type overrides, keyed by column name.
pub type TypeOverrides = HashMap<String, ColumnType>;

/// Reads a sidecar schema file of `column=type` lines. Blank lines and lines
/// starting with `#` are ignored.
pub fn load_schema_file(path: impl AsRef<Path>) -> Result<TypeOverrides, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_schema(&text)
}

pub fn parse_schema(text: &str) -> Result<TypeOverrides, DatasetError> {
    let mut out = TypeOverrides::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| DatasetError::BadSchemaLine {
            line: i + 1,
            detail: "expected column=type".into(),
        })?;
        let kind = v.parse::<ColumnType>().map_err(|detail| DatasetError::BadSchemaLine {
            line: i + 1,
            detail,
        })?;
        out.insert(k.trim().to_string(), kind);
    }
    Ok(out)
}

fn io_error(path: &Path, e: std::io::Error) -> DatasetError {
    if e.kind() == std::io::ErrorKind::NotFound {
        DatasetError::MissingFile(path.display().to_string())
    } else {
        DatasetError::Io {
            path: path.display().to_string(),
            source: e,
        }
    }
}

/// Loads a CSV file with a header row. `target`, when given, must name a
/// binary column.
pub fn load_csv(
    path: impl AsRef<Path>,
    target: Option<&str>,
    overrides: &TypeOverrides,
) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| io_error(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    read_csv(file, &name, target, overrides)
}

pub fn read_csv<R: Read>(
    reader: R,
    name: &str,
    target: Option<&str>,
    overrides: &TypeOverrides,
) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r?,
        None => return Err(DatasetError::MissingHeader),
    };
    let names: Vec<String> = header.iter().map(str::to_string).collect();
    let mut seen = HashSet::new();
    for (index, n) in names.iter().enumerate() {
        if n.is_empty() {
            return Err(DatasetError::EmptyColumnName { index });
        }
        if !seen.insert(n.as_str()) {
            return Err(DatasetError::DuplicateColumn(n.clone()));
        }
    }
    if let Some(unknown) = overrides.keys().find(|k| !seen.contains(k.as_str())) {
        return Err(DatasetError::UnknownColumn(unknown.clone()));
    }
    if let Some(t) = target {
        if !seen.contains(t) {
            return Err(DatasetError::TargetNotFound(t.to_string()));
        }
    }

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); names.len()];
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != names.len() {
            return Err(DatasetError::RaggedRow {
                line,
                expected: names.len(),
                found: rec.len(),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            if cell.is_empty() {
                return Err(DatasetError::MissingCell {
                    line,
                    column: names[j].clone(),
                });
            }
            raw[j].push(cell.to_string());
        }
    }
    if raw.first().is_none_or(Vec::is_empty) {
        return Err(DatasetError::NoRows);
    }

    let columns = names
        .into_iter()
        .zip(raw)
        .map(|(name, cells)| {
            let kind = overrides
                .get(&name)
                .copied()
                .unwrap_or_else(|| infer_type(&cells));
            build_column(name, &cells, kind)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Dataset::new(name, columns, target)
}

/// Inference precedence: numeric, then boolean, then categorical.
pub fn infer_type(cells: &[String]) -> ColumnType {
    if cells.iter().all(|c| parse_number(c).is_some()) {
        ColumnType::Numeric
    } else if cells.iter().all(|c| parse_bool_token(c).is_some()) {
        ColumnType::Boolean
    } else {
        ColumnType::Categorical
    }
}

fn build_column(name: String, cells: &[String], kind: ColumnType) -> Result<Column, DatasetError> {
    let bad = |value: &str| DatasetError::BadOverride {
        column: name.clone(),
        kind,
        value: value.to_string(),
    };
    match kind {
        ColumnType::Numeric => {
            let values = cells
                .iter()
                .map(|c| parse_number(c).ok_or_else(|| bad(c)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Column::numeric(name, values))
        }
        ColumnType::Boolean => {
            let mut true_label = None;
            let mut false_label = None;
            let mut values = Vec::with_capacity(cells.len());
            for c in cells {
                let b = parse_bool_token(c).ok_or_else(|| bad(c))?;
                let slot = if b { &mut true_label } else { &mut false_label };
                if slot.is_none() {
                    *slot = Some(c.clone());
                }
                values.push(b);
            }
            let (t, f) = default_labels(true_label, false_label);
            Ok(Column::boolean_labeled(name, values, t, f))
        }
        ColumnType::Categorical => Ok(Column::categorical(name, cells)),
    }
}

/// Completes a label pair when only one polarity was observed.
fn default_labels(t: Option<String>, f: Option<String>) -> (String, String) {
    match (t, f) {
        (Some(t), Some(f)) => (t, f),
        (Some(t), None) => {
            let f = match t.as_str() {
                "Y" => "N",
                "y" => "n",
                "1" => "0",
                "TRUE" => "FALSE",
                "True" => "False",
                _ => "false",
            };
            (t, f.to_string())
        }
        (None, Some(f)) => {
            let t = match f.as_str() {
                "N" => "Y",
                "n" => "y",
                "0" => "1",
                "FALSE" => "TRUE",
                "False" => "True",
                _ => "true",
            };
            (t.to_string(), f)
        }
        (None, None) => ("true".into(), "false".into()),
    }
}

/// Per-column facts included in prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub name: String,
    pub column_type: ColumnType,
    pub profile: ColumnProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnProfile {
    Numeric {
        min: f64,
        max: f64,
        mean: f64,
        median: f64,
    },
    Values {
        values: Vec<String>,
    },
}

/// Textual dataset context handed to a hypothesis provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataContext {
    pub description_text: String,
    pub column_summaries: Vec<ColumnSummary>,
}

impl DataContext {
    /// "The dataset contains N columns. The columns are a, b."
    pub fn column_inventory(&self) -> String {
        let names: Vec<&str> = self
            .column_summaries
            .iter()
            .map(|s| s.name.as_str())
            .collect();
        format!(
            "The dataset contains {} columns. The columns are {}.",
            names.len(),
            names.join(", ")
        )
    }

    /// "The values are gender: ["M", "F"]; age: min 18, ...."
    pub fn value_listing(&self) -> String {
        let parts: Vec<String> = self
            .column_summaries
            .iter()
            .map(|s| match &s.profile {
                ColumnProfile::Numeric {
                    min,
                    max,
                    mean,
                    median,
                } => format!(
                    "{}: numeric, min {}, max {}, mean {}, median {}",
                    s.name,
                    format_summary(*min),
                    format_summary(*max),
                    format_summary(*mean),
                    format_summary(*median)
                ),
                ColumnProfile::Values { values } => {
                    let quoted: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
                    format!("{}: [{}]", s.name, quoted.join(", "))
                }
            })
            .collect();
        format!("The values are {}.", parts.join("; "))
    }

    /// Full text: prose (if any), inventory, then value listing.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if !self.description_text.trim().is_empty() {
            out.push_str(self.description_text.trim());
            out.push_str("\n\n");
        }
        out.push_str(&self.column_inventory());
        out.push(' ');
        out.push_str(&self.value_listing());
        out
    }
}

fn format_summary(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x}")
    } else {
        let s = format!("{x:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Extracts the data context of `dataset` with `task_prose` as its description.
pub fn describe(dataset: &Dataset, task_prose: &str) -> DataContext {
    let column_summaries = dataset
        .columns()
        .iter()
        .map(|c| {
            let profile = match c.data() {
                ColumnData::Numeric(v) => numeric_profile(v),
                ColumnData::Categorical { levels, .. } => ColumnProfile::Values {
                    values: levels.clone(),
                },
                ColumnData::Boolean {
                    values,
                    true_label,
                    false_label,
                } => {
                    let mut observed = Vec::new();
                    for &b in values {
                        let label = if b { true_label } else { false_label };
                        if !observed.contains(label) {
                            observed.push(label.clone());
                        }
                        if observed.len() == 2 {
                            break;
                        }
                    }
                    ColumnProfile::Values { values: observed }
                }
            };
            ColumnSummary {
                name: c.name().to_string(),
                column_type: c.column_type(),
                profile,
            }
        })
        .collect();
    DataContext {
        description_text: task_prose.to_string(),
        column_summaries,
    }
}

fn numeric_profile(v: &[f64]) -> ColumnProfile {
    if v.is_empty() {
        return ColumnProfile::Numeric {
            min: f64::NAN,
            max: f64::NAN,
            mean: f64::NAN,
            median: f64::NAN,
        };
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    ColumnProfile::Numeric {
        min: sorted[0],
        max: sorted[n - 1],
        mean: v.iter().sum::<f64>() / n as f64,
        median,
    }
}

/// Seeded row partition: `(train_rows, test_rows)`, each sorted ascending.
pub fn split_indices(
    n_rows: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(test_fraction));
    }
    let n_test = (n_rows as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n_rows {
        return Err(DatasetError::EmptyPartition {
            n_rows,
            fraction: test_fraction,
        });
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Splits into `(train, test)` datasets.
pub fn split(
    dataset: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DatasetError> {
    let (train, test) = split_indices(dataset.n_rows(), test_fraction, seed)?;
    Ok((dataset.select_rows(&train), dataset.select_rows(&test)))
}
