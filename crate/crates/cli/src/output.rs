//! Buffered command outputs with provenance. Nothing touches the output
//! directory until a command has finished without error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use membrane_cavity::constants::{record, ConstantsRecord, TOOLKIT_VERSION};
use membrane_cavity::io::{sha256_file, sha256_hex};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: String,
    pub toolkit_version: &'static str,
    /// sha256 of the resolved configuration as canonical JSON.
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub inputs: Vec<InputFile>,
    pub constants: ConstantsRecord,
}

impl Provenance {
    pub fn new(command: &str, config: &impl Serialize, seed: Option<u64>) -> Result<Self> {
        let canonical = serde_json::to_vec(config)?;
        Ok(Self {
            command: command.to_owned(),
            toolkit_version: TOOLKIT_VERSION,
            config_sha256: sha256_hex(&canonical),
            seed,
            inputs: Vec::new(),
            constants: record(),
        })
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(InputFile {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    fn csv_comments(&self) -> String {
        let mut s = format!(
            "# mcav {} {}\n# config_sha256 {}\n# seed {}\n",
            self.toolkit_version,
            self.command,
            self.config_sha256,
            self.seed.map_or("none".to_owned(), |v| v.to_string())
        );
        for i in &self.inputs {
            let _ = writeln!(s, "# input {} sha256 {}", i.path, i.sha256);
        }
        s
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    provenance: &'a Provenance,
    result: &'a T,
}

/// Files produced by one command, written all at once.
pub struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn new() -> Self {
        Self { files: Vec::new() }
    }

    pub fn json(&mut self, name: &str, prov: &Provenance, result: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&Document {
            provenance: prov,
            result,
        })?;
        text.push('\n');
        self.files.push((name.to_owned(), text));
        Ok(())
    }

    pub fn csv(
        &mut self,
        name: &str,
        prov: &Provenance,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<f64>>,
    ) {
        let mut text = prov.csv_comments();
        text.push_str(&header.join(","));
        text.push('\n');
        for r in rows {
            let line: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        self.files.push((name.to_owned(), text));
    }

    /// A file written verbatim, for content other commands read back as input.
    pub fn raw(&mut self, name: &str, text: String) {
        self.files.push((name.to_owned(), text));
    }

    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        if self.files.is_empty() {
            return Ok(Vec::new());
        }
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, text) in self.files {
            let p = dir.join(name);
            fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
            written.push(p);
        }
        Ok(written)
    }
}
