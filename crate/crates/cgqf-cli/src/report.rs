//! CSV emission: a `# manifest:` header naming every setting that went into
//! the run, a column header, then data rows with 17 significant digits.
//! Identical manifests produce byte-identical files; writes are atomic.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::{CliError, CliResult};

pub struct Report {
    manifest: Vec<(String, String)>,
    columns: Vec<String>,
    comment_lines: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// One numeric cell, 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            manifest: vec![("command".into(), command.into())],
            columns: Vec::new(),
            comment_lines: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn setting(mut self, key: &str, value: impl ToString) -> Self {
        self.manifest.push((key.into(), value.to_string()));
        self
    }

    pub fn columns(mut self, cols: &[&str]) -> Self {
        self.columns = cols.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.comment_lines.push(line.into());
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    fn render(&self) -> String {
        let mut out = String::new();
        let manifest: Vec<String> =
            self.manifest.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&format!("# manifest: {}\n", manifest.join(" ")));
        for line in &self.comment_lines {
            out.push_str(&format!("# {line}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Writes to `out` (atomically, via a sibling temp file) or to stdout.
    pub fn emit(&self, out: Option<&Path>) -> CliResult<()> {
        let text = self.render();
        match out {
            None => {
                print!("{text}");
                Ok(())
            }
            Some(path) => {
                let tmp: PathBuf = path.with_extension("tmp.partial");
                let mut f = std::fs::File::create(&tmp)
                    .map_err(|e| CliError::Parse(format!("cannot create {}: {e}", tmp.display())))?;
                f.write_all(text.as_bytes())
                    .and_then(|_| f.sync_all())
                    .map_err(|e| CliError::Parse(format!("write failed: {e}")))?;
                drop(f);
                std::fs::rename(&tmp, path)
                    .map_err(|e| CliError::Parse(format!("rename failed: {e}")))
            }
        }
    }
}
