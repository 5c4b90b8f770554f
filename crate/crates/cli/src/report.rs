//! Tables and their CSV and markdown renderings, written atomically.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const NA: &str = "NA";

/// Fixed-precision float cell; non-finite values become `NA`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        // Avoid "-0.000000" for tiny negatives.
        let s = format!("{x:.6}");
        if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
            "0.000000".to_string()
        } else {
            s
        }
    } else {
        NA.to_string()
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_else(|| NA.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(headers: &[S]) -> Self {
        Table {
            headers: headers.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.headers.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn to_markdown(&self) -> String {
        let esc = |s: &str| s.replace('|', "\\|");
        let mut out = String::new();
        out.push_str(&format!(
            "| {} |\n",
            self.headers.iter().map(|h| esc(h)).collect::<Vec<_>>().join(" | ")
        ));
        out.push_str(&format!("|{}\n", "---|".repeat(self.headers.len())));
        for row in &self.rows {
            out.push_str(&format!(
                "| {} |\n",
                row.iter().map(|c| esc(c)).collect::<Vec<_>>().join(" | ")
            ));
        }
        out
    }

    /// Parses CSV text with a header row.
    pub fn from_csv(bytes: &[u8]) -> Result<Self, csv::Error> {
        let mut r = csv::Reader::from_reader(bytes);
        let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Table { headers, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

/// Writes `bytes` to a temporary file beside `path`, then renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::from(e.error))?;
    Ok(())
}

/// Collects files written by one command.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    markdown: bool,
    svg: bool,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn new(root: impl Into<PathBuf>, markdown: bool, svg: bool) -> Self {
        OutputDir {
            root: root.into(),
            markdown,
            svg,
            written: Vec::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Writes `<name>.csv` and, when enabled, `<name>.md`.
    pub fn table(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        self.file(&format!("{name}.csv"), &table.to_csv())?;
        if self.markdown {
            self.file(&format!("{name}.md"), table.to_markdown().as_bytes())?;
        }
        Ok(())
    }

    pub fn svg(&mut self, name: &str, document: &str) -> Result<(), CliError> {
        if self.svg {
            self.file(&format!("{name}.svg"), document.as_bytes())?;
        }
        Ok(())
    }

    pub fn file(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        atomic_write(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }
}

/// File-name-safe form of a label.
pub fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    s.trim_matches('_').to_string()
}
