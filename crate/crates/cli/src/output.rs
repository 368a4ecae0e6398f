use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::TableFormat;
use crate::error::CliError;

/// One table cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    /// CSV text: reals in scientific notation with 17 significant digits.
    pub fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v)
                .map(Value::Number)
                .unwrap_or_else(|| Value::String(v.to_string())),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map(Into::into).unwrap_or(Cell::Empty)
    }
}

/// Writes tables and reports into one output directory, each table with a
/// `<name>.meta.json` sidecar naming the config hash.
pub struct OutputDir {
    dir: PathBuf,
    format: TableFormat,
    command: String,
    config_hash: String,
    seed: u64,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(
        dir: &Path,
        format: TableFormat,
        command: &str,
        config_hash: &str,
        seed: u64,
    ) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            format,
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<PathBuf, CliError> {
        let path = match self.format {
            TableFormat::Csv => {
                let path = self.dir.join(format!("{name}.csv"));
                let mut w = csv::WriterBuilder::new()
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_path(&path)?;
                w.write_record(header)?;
                for row in rows {
                    w.write_record(row.iter().map(Cell::render))?;
                }
                w.flush()?;
                path
            }
            TableFormat::Json => {
                let path = self.dir.join(format!("{name}.json"));
                let records: Vec<Value> = rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> = header
                            .iter()
                            .zip(row)
                            .map(|(h, c)| (h.to_string(), c.to_json()))
                            .collect();
                        Value::Object(obj)
                    })
                    .collect();
                fs::write(&path, serde_json::to_string_pretty(&records)? + "\n")?;
                path
            }
        };
        let meta = json!({
            "file": path.file_name().map(|f| f.to_string_lossy().into_owned()),
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "columns": header,
            "rows": rows.len(),
            "generator": concat!("gwde ", env!("CARGO_PKG_VERSION")),
        });
        fs::write(
            self.dir.join(format!("{name}.meta.json")),
            serde_json::to_string_pretty(&meta)? + "\n",
        )?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn report<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.dir.join(format!("{name}.json"));
        fs::write(&path, serde_json::to_string_pretty(value)? + "\n")?;
        self.written.push(path.clone());
        Ok(path)
    }
}
