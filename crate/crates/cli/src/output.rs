//! CSV tables with `#` metadata and the JSON run manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Twelve significant digits.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.11e}")
    }
}

pub struct Table {
    pub name: String,
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    rows: usize,
    columns: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    command: &'a str,
    config_hash: &'a str,
    config_file: &'a str,
    files: Vec<FileEntry>,
    parameters: &'a crate::config::RunConfig,
    results: &'a serde_json::Value,
    seconds: f64,
}

pub struct Writer {
    dir: PathBuf,
    command: String,
    hash: String,
    written: Vec<FileEntry>,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl Writer {
    pub fn new(dir: &Path, command: &str, hash: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.into(),
            hash: hash.into(),
            written: Vec::new(),
        })
    }

    pub fn table(&mut self, t: &Table) -> Result<(), CliError> {
        let path = self.dir.join(format!("{}.csv", t.name));
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut out = BufWriter::new(file);
        let mut head = format!(
            "# wannier-stark {}\n# config_hash: sha256:{}\n",
            self.command, self.hash
        );
        for (k, v) in &t.meta {
            head.push_str(&format!("# {k}: {v}\n"));
        }
        out.write_all(head.as_bytes()).map_err(|e| io_err(&path, e))?;
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
        w.write_record(&t.columns).map_err(csv_err)?;
        for r in &t.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        self.written.push(FileEntry {
            name: format!("{}.csv", t.name),
            rows: t.rows.len(),
            columns: t.columns.clone(),
        });
        Ok(())
    }

    pub fn finish(
        self,
        config: &crate::config::RunConfig,
        results: &serde_json::Value,
        seconds: f64,
    ) -> Result<(), CliError> {
        let cfg_name = "resolved_config.toml";
        let cfg_path = self.dir.join(cfg_name);
        fs::write(&cfg_path, config.to_toml()).map_err(|e| io_err(&cfg_path, e))?;
        let m = Manifest {
            program: "wannier-stark",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            config_hash: &self.hash,
            config_file: cfg_name,
            files: self.written,
            parameters: config,
            results,
            seconds,
        };
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| io_err(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(0.565685424949238), "5.65685424949e-1");
        assert_eq!(num(-2.0), "-2.00000000000e0");
        assert_eq!(num(f64::NAN), "");
    }
}
