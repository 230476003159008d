use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;

pub const SCHEMA_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Both,
}

/// FNV-1a over the serialized config; identical configs share a run id.
fn run_id(config: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in config.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Writes report files into one directory, stamping each with the config.
pub struct Outputs {
    dir: PathBuf,
    format: Format,
    config: Value,
    config_line: String,
    run_id: String,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path, format: Format, config: &impl Serialize) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let config = serde_json::to_value(config)?;
        let config_line = serde_json::to_string(&config)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            run_id: run_id(&config_line),
            config,
            config_line,
            written: Vec::new(),
        })
    }

    pub fn json_enabled(&self) -> bool {
        matches!(self.format, Format::Json | Format::Both)
    }

    pub fn csv_enabled(&self) -> bool {
        matches!(self.format, Format::Csv | Format::Both)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    /// `{schema, run_id, config, <payload fields>}`.
    pub fn json(&mut self, name: &str, payload: impl Serialize) -> Result<()> {
        if !self.json_enabled() {
            return Ok(());
        }
        let mut doc = json!({ "schema": SCHEMA_VERSION, "run_id": self.run_id, "config": self.config });
        if let (Value::Object(doc), Value::Object(body)) = (&mut doc, serde_json::to_value(payload)?) {
            doc.extend(body);
        }
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        let path = self.path(name);
        fs::write(path, text)?;
        Ok(())
    }

    /// CSV with a leading `# config: {...}` line.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        if !self.csv_enabled() {
            return Ok(());
        }
        let path = self.path(name);
        let mut file = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(file, "# config: {}", self.config_line)?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Arbitrary file produced by `write`, independent of the format switch.
    pub fn raw(&mut self, name: &str, write: impl FnOnce(&mut dyn Write, &str) -> Result<()>) -> Result<()> {
        let path = self.path(name);
        let mut file = std::io::BufWriter::new(fs::File::create(path)?);
        let line = self.config_line.clone();
        write(&mut file, &line)?;
        file.flush()?;
        Ok(())
    }
}
