//! Trajectory record CSVs: a header line naming the columns, one row per
//! emission, flushed row by row so an interrupted run leaves a readable prefix.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::HarnessError;

/// Origin of the eigenvalue columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Otd,
    Dmd,
}

impl Source {
    pub fn tag(self) -> &'static str {
        match self {
            Source::Otd => "otd",
            Source::Dmd => "dmd",
        }
    }
}

pub fn lambda_columns(r: usize) -> Vec<String> {
    (1..=r).map(|i| format!("lambda_{i}")).collect()
}

pub struct RecordWriter {
    out: BufWriter<File>,
    width: usize,
    source: Source,
    last_t: Option<f64>,
    rows: usize,
}

impl RecordWriter {
    /// `columns` excludes the leading `t` and the trailing `source`.
    pub fn create(path: &Path, columns: &[String], source: Source) -> Result<Self, HarnessError> {
        let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        let mut out = BufWriter::new(file);
        let header = std::iter::once("t".to_string())
            .chain(columns.iter().cloned())
            .chain(std::iter::once("source".to_string()))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{header}").and_then(|_| out.flush()).map_err(|e| HarnessError::io(path, e))?;
        Ok(Self {
            out,
            width: columns.len(),
            source,
            last_t: None,
            rows: 0,
        })
    }

    pub fn write(&mut self, t: f64, values: &[f64]) -> std::io::Result<()> {
        assert_eq!(values.len(), self.width, "record width");
        if let Some(prev) = self.last_t {
            assert!(t > prev, "record times must increase");
        }
        self.last_t = Some(t);
        let mut line = t.to_string();
        for v in values {
            line.push(',');
            line.push_str(&v.to_string());
        }
        line.push(',');
        line.push_str(self.source.tag());
        writeln!(self.out, "{line}")?;
        self.rows += 1;
        self.out.flush()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

/// A record file held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordTable {
    pub path: PathBuf,
    /// All numeric columns, starting with `t`.
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub source: Option<String>,
}

impl RecordTable {
    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .transpose()
            .map_err(|e| HarnessError::io(path, e))?
            .ok_or_else(|| HarnessError::schema(path, "empty file"))?;
        let mut columns: Vec<String> = header.split(',').map(str::to_string).collect();
        if columns.first().map(String::as_str) != Some("t") || columns.last().map(String::as_str) != Some("source") {
            return Err(HarnessError::schema(path, "header must start with t and end with source"));
        }
        columns.pop();
        let mut rows = Vec::new();
        let mut source = None;
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| HarnessError::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != columns.len() + 1 {
                // a partially written last row is dropped
                log::warn!("{}: skipping malformed row {}", path.display(), i + 2);
                continue;
            }
            let parsed: Result<Vec<f64>, _> = fields[..columns.len()].iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(row) => rows.push(row),
                Err(_) => {
                    log::warn!("{}: skipping unparsable row {}", path.display(), i + 2);
                    continue;
                }
            }
            source.get_or_insert_with(|| fields[columns.len()].to_string());
        }
        Ok(Self {
            path: path.to_path_buf(),
            columns,
            rows,
            source,
        })
    }

    pub fn column_index(&self, name: &str) -> Result<usize, HarnessError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| HarnessError::schema(&self.path, &format!("missing column {name:?}")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, HarnessError> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }

    /// Rows with `t >= t_min`.
    pub fn after(mut self, t_min: f64) -> Self {
        self.rows.retain(|r| r[0] >= t_min);
        self
    }
}
