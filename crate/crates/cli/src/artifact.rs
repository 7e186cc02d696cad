//! Experiment outputs and how they are written.
//!
//! Floats in CSV are printed in scientific notation with 17 significant
//! digits, which round-trips every double. Files are written to a temporary
//! sibling and renamed into place, so readers never see a partial file.

use std::io::Write;
use std::path::{Path, PathBuf};

use blab_core::SearchReport;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Bool(bool),
    Null,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Null, Into::into)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(v) => Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Bool(v) => Value::from(*v),
            Cell::Null => Value::Null,
        }
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn object(&self, row: &[Cell]) -> Value {
        let map: Map<String, Value> = self
            .columns
            .iter()
            .zip(row)
            .map(|(k, v)| (k.to_string(), v.json()))
            .collect();
        Value::Object(map)
    }

    fn to_csv(&self) -> CliResult<Vec<u8>> {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(Cell::csv))?;
        }
        out.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))
    }
}

/// What an experiment produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    /// A single named record: a JSON object or a one-row CSV.
    Record(Table),
    /// Many rows: a JSON array of objects or a CSV table.
    Rows(Table),
    /// A search report; JSON only.
    Report(Box<SearchReport>),
}

impl Artifact {
    pub fn default_format(&self) -> Format {
        match self {
            Artifact::Rows(_) => Format::Csv,
            _ => Format::Json,
        }
    }

    pub fn render(&self, format: Format) -> CliResult<Vec<u8>> {
        let mut bytes = match (self, format) {
            (Artifact::Record(t), Format::Json) => pretty(&t.object(&t.rows[0]))?,
            (Artifact::Rows(t), Format::Json) => {
                pretty(&Value::Array(t.rows.iter().map(|r| t.object(r)).collect()))?
            }
            (Artifact::Record(t) | Artifact::Rows(t), Format::Csv) => return t.to_csv(),
            (Artifact::Report(r), Format::Json) => pretty(r)?,
            (Artifact::Report(_), Format::Csv) => {
                return Err(CliError::usage("search reports are JSON only"))
            }
        };
        bytes.push(b'\n');
        Ok(bytes)
    }
}

fn pretty<T: Serialize + ?Sized>(value: &T) -> CliResult<Vec<u8>> {
    serde_json::to_vec_pretty(value).map_err(|source| CliError::Json {
        path: PathBuf::from("<output>"),
        source,
    })
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Sends an artifact to `path`, or to standard output when there is none.
pub fn emit(artifact: &Artifact, path: Option<&Path>, format: Option<Format>) -> CliResult<()> {
    let bytes = artifact.render(format.unwrap_or_else(|| artifact.default_format()))?;
    match path {
        Some(path) => write_atomic(path, &bytes),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source }),
    }
}
