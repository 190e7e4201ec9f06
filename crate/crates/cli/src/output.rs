use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum ExistingOutput {
    /// Fail if the directory exists and is not empty.
    #[default]
    Refuse,
    /// Write to the first free `<dir>-N` instead.
    Suffix,
}

fn occupied(dir: &Path) -> bool {
    dir.exists()
        && fs::read_dir(dir)
            .map(|mut it| it.next().is_some())
            .unwrap_or(true)
}

/// An output directory that records every file written through it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    config_hash: String,
    files: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_hash: &'a str,
    files: &'a [String],
}

impl OutputDir {
    pub fn create(dir: &Path, policy: ExistingOutput, config_hash: &str) -> Result<Self, CliError> {
        let root = if !occupied(dir) {
            dir.to_path_buf()
        } else {
            match policy {
                ExistingOutput::Refuse => {
                    return Err(CliError::Runtime(format!(
                        "output directory {} is not empty",
                        dir.display()
                    )))
                }
                ExistingOutput::Suffix => (1..)
                    .map(|n| {
                        let mut name = dir.as_os_str().to_owned();
                        name.push(format!("-{n}"));
                        PathBuf::from(name)
                    })
                    .find(|p| !occupied(p))
                    .expect("some suffix is free"),
            }
        };
        fs::create_dir_all(&root)?;
        Ok(OutputDir {
            root,
            config_hash: config_hash.to_string(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Opens `rel` for writing. CSV files start with a comment line carrying
    /// the config hash.
    pub fn open(&mut self, rel: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.root.join(rel);
        if path.exists() {
            return Err(CliError::Runtime(format!(
                "refusing to overwrite {}",
                path.display()
            )));
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(File::create(&path)?);
        if rel.ends_with(".csv") {
            writeln!(w, "# config_hash={}", self.config_hash)?;
        }
        self.files.push(rel.to_string());
        Ok(w)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut w = self.open(rel)?;
        serde_json::to_writer_pretty(&mut w, value)
            .map_err(|e| CliError::Runtime(format!("json: {e}")))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// Writes `manifest.json`, listing every file including itself.
    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.files.push("manifest.json".into());
        let manifest = Manifest {
            config_hash: &self.config_hash,
            files: &self.files,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(self.root.join("manifest.json"), text + "\n")?;
        Ok(self.root)
    }
}
