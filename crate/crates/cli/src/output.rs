use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use engage_core::engagement::write_json_value;
use serde_json::Value;

/// Output directory that remembers which files it wrote.
pub struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn text(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        self.text(name, &pretty_json(value))
    }

    /// Render a CSV report into memory, then write it in one go.
    pub fn csv<F, E>(&mut self, name: &str, render: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> std::result::Result<(), E>,
        E: std::error::Error + Send + Sync + 'static,
    {
        let mut buf = Vec::new();
        render(&mut buf).with_context(|| format!("rendering {name}"))?;
        let text = String::from_utf8(buf).context("report is not UTF-8")?;
        self.text(name, &text)
    }

    /// Drop a stale file from an earlier run so the directory matches this run.
    pub fn remove_stale(&self, name: &str) -> Result<()> {
        let path = self.dir.join(name);
        if path.exists() {
            fs::remove_file(&path).with_context(|| format!("removing stale {}", path.display()))?;
        }
        Ok(())
    }
}

pub fn pretty_json(value: &Value) -> String {
    let mut out = String::new();
    write_json_value(&mut out, value, 0);
    out.push('\n');
    out
}
