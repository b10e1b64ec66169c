use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

pub const OUTPUT_DIR_VAR: &str = "ARBOR_OUTPUT_DIR";

/// Where a subcommand writes: `--out`, else `$ARBOR_OUTPUT_DIR/<name>`, else stdout.
pub struct Target {
    explicit: Option<PathBuf>,
    dir: Option<PathBuf>,
}

impl Target {
    pub fn new(explicit: Option<PathBuf>) -> Self {
        let dir = std::env::var_os(OUTPUT_DIR_VAR).filter(|d| !d.is_empty()).map(PathBuf::from);
        Self { explicit, dir }
    }

    pub fn path(&self, default_name: &str) -> Option<PathBuf> {
        self.explicit.clone().or_else(|| self.dir.as_ref().map(|d| d.join(default_name)))
    }

    /// Path for a secondary file next to the outputs, if there is a directory.
    pub fn side_path(&self, name: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(name))
    }

    pub fn open(&self, default_name: &str) -> Result<Box<dyn Write>> {
        match self.path(default_name) {
            Some(p) => create(&p),
            None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        }
    }

    pub fn json<T: Serialize>(&self, default_name: &str, value: &T) -> Result<()> {
        let mut w = self.open(default_name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::Output(e.to_string()))
    }

    pub fn csv<R: Serialize>(&self, default_name: &str, rows: &[R]) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.open(default_name)?);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| CliError::Output(e.to_string()))
    }
}

pub fn create(path: &Path) -> Result<Box<dyn Write>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(Box::new(BufWriter::new(f)))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}
