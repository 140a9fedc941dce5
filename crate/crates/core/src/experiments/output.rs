use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;

/// Output directory whose CSV files all start with the same metadata block.
///
/// The block holds the command, the resolved config (without the output
/// path) and any derived quantities such as the threshold in use. File bodies
/// depend only on config and seed; wall-clock data goes to `run.meta`.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    header: String,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path, command: &str, config: &ExperimentConfig, resolved: &[(&str, String)]) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(format!("creating {}", root.display()), e))?;
        let mut header = format!("# iontomo {command} v{}\n", env!("CARGO_PKG_VERSION"));
        for (key, value) in resolved {
            header.push_str(&format!("# resolved.{key} = {value}\n"));
        }
        let mut table: toml::Table = toml::from_str(&config.to_toml()).expect("config renders to a table");
        table.remove("out");
        for line in toml::to_string(&table).expect("table renders").lines() {
            if line.is_empty() {
                header.push_str("#\n");
            } else {
                header.push_str(&format!("# {line}\n"));
            }
        }
        Ok(Self {
            root: root.to_path_buf(),
            header,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn header(&self) -> &str {
        &self.header
    }

    pub fn write(&mut self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        let mut text = String::with_capacity(self.header.len() + body.len());
        text.push_str(&self.header);
        text.push_str(body);
        std::fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        self.written.push(name.to_string());
        Ok(path)
    }

    /// Sidecar with the run timestamp and the list of files written.
    pub fn finish(self) -> Result<Vec<String>> {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let mut meta = format!("finished_unix = {secs}\nfiles = [");
        meta.push_str(&self.written.iter().map(|f| format!("\"{f}\"")).collect::<Vec<_>>().join(", "));
        meta.push_str("]\n");
        let path = self.root.join("run.meta");
        std::fs::write(&path, meta).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        Ok(self.written)
    }
}

/// Fixed-precision float formatting shared by all CSV writers.
pub(crate) fn num(x: f64) -> String {
    format!("{x:.10e}")
}
