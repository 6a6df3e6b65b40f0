//! CSV tables with a `# key: value` metadata header.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! table is a pure function of the values it holds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use qmcdip_core::stats::Estimate;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Round-trip formatting of a float.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), ..Self::default() }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string().replace('\n', " ");
        match self.metadata.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.metadata.push((key.into(), value)),
        }
        self
    }

    /// Stores `key` and `key_error`.
    pub fn meta_estimate(&mut self, key: &str, e: Estimate) -> &mut Self {
        self.meta(key, num(e.value));
        self.meta(&format!("{key}_error"), num(e.error))
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| num(x)).collect());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    /// All `key` / `key_error` pairs in the metadata.
    pub fn estimates(&self) -> BTreeMap<String, Estimate> {
        self.metadata
            .iter()
            .filter_map(|(k, v)| {
                let err = self.get_f64(&format!("{k}_error"))?;
                Some((k.clone(), Estimate::new(v.parse().ok()?, err)))
            })
            .collect()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r[k].parse().ok()).collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8 cells"));
        out
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut metadata = Vec::new();
        let mut body = String::new();
        for line in text.lines() {
            match line.strip_prefix('#') {
                Some(m) => {
                    if let Some((k, v)) = m.trim().split_once(':') {
                        metadata.push((k.trim().to_string(), v.trim().to_string()));
                    }
                }
                None => {
                    body.push_str(line);
                    body.push('\n');
                }
            }
        }
        let bad = |e: csv::Error| CliError::Config(format!("malformed table: {e}"));
        let mut r = csv::ReaderBuilder::new().from_reader(body.as_bytes());
        let columns = r.headers().map_err(bad)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()
            .map_err(bad)?;
        Ok(Self { metadata, columns, rows })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::MissingInput { path: path.into(), message: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, &self.render())
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Output { path: dir.into(), message: e.to_string() })?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Output { path: path.into(), message: e.to_string() })
}
