//! Tabular output shared by all commands, emitted as CSV or as a JSON array of
//! row objects.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use boseloc::format::g12;
use serde_json::{Map, Value};

use crate::config::Format;

#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Null,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Null, Into::into)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => g12(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            // round-trip through the fixed format so both emitters agree
            Cell::Num(x) => g12(*x).parse::<f64>().ok().and_then(serde_json::Number::from_f64).map_or(Value::Null, Value::Number),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Null => Value::Null,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    pub columns: Vec<&'static str>,
    /// Omit the header line in CSV output.
    pub bare: bool,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), bare: false, rows: Vec::new() }
    }

    pub fn bare(column: &'static str) -> Self {
        Table { columns: vec![column], bare: true, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| Value::Object(self.columns.iter().map(|c| c.to_string()).zip(r.iter().map(Cell::json)).collect::<Map<_, _>>()))
                .collect(),
        )
    }

    pub fn write<W: Write>(&self, w: &mut W, format: Format) -> std::io::Result<()> {
        match format {
            Format::Csv => {
                if !self.bare {
                    writeln!(w, "{}", self.columns.join(","))?;
                }
                for r in &self.rows {
                    writeln!(w, "{}", r.iter().map(Cell::csv).collect::<Vec<_>>().join(","))?;
                }
                Ok(())
            }
            Format::Json => {
                serde_json::to_writer_pretty(&mut *w, &self.to_json())?;
                writeln!(w)
            }
        }
    }

    /// Writes `<dir>/<stem>.csv` or `<dir>/<stem>.json`.
    pub fn save(&self, dir: &Path, stem: &str, format: Format) -> std::io::Result<()> {
        let ext = match format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        let mut w = BufWriter::new(File::create(dir.join(format!("{stem}.{ext}")))?);
        self.write(&mut w, format)?;
        w.flush()
    }
}

pub fn save_json(dir: &Path, name: &str, v: &Value) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    w.flush()
}
