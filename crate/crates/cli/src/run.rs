use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Number formatting shared by every CSV: 17 significant digits, no locale.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV document with `#` comment lines ahead of the column row.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(comments: &[&str], columns: &[&str]) -> Self {
        let mut text = String::new();
        for c in comments {
            let _ = writeln!(text, "# {c}");
        }
        let _ = writeln!(text, "{}", columns.join(","));
        Self { text, columns: columns.len() }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.columns);
        let _ = writeln!(self.text, "{}", cells.join(","));
    }
}

#[derive(Serialize)]
struct InputFile {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    argv: &'a [String],
    config: &'a Value,
    inputs: &'a [InputFile],
    input_hash: String,
    artifacts: &'a [String],
    threads: usize,
    wall_clock_seconds: f64,
    exit_code: i32,
    message: Option<&'a str>,
}

/// One output directory: artifacts are written serially and listed in
/// `manifest.json` when the run finishes.
pub struct Run {
    dir: PathBuf,
    command: String,
    argv: Vec<String>,
    config: Value,
    inputs: Vec<InputFile>,
    artifacts: Vec<String>,
    started: Instant,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Read an input file, remembering its hash for the manifest.
pub fn read_input(path: &Path, inputs: &mut Vec<(String, Vec<u8>)>) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Input(format!("{} is not valid UTF-8", path.display())))?;
    inputs.push((path.display().to_string(), bytes));
    Ok(text)
}

pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Input(format!("malformed {what}: {e}")))
}

impl Run {
    /// Create the output directory. An existing non-empty directory is refused
    /// unless `force` is set, in which case files are overwritten in place.
    pub fn create(
        dir: &Path,
        force: bool,
        command: &str,
        config: Value,
        inputs: Vec<(String, Vec<u8>)>,
    ) -> Result<Self, CliError> {
        if dir.exists() {
            if !dir.is_dir() {
                return Err(CliError::Input(format!("{} exists and is not a directory", dir.display())));
            }
            let occupied = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?.next().is_some();
            if occupied && !force {
                return Err(CliError::Input(format!(
                    "output directory {} is not empty; pass --force to overwrite",
                    dir.display()
                )));
            }
        }
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let inputs = inputs
            .into_iter()
            .map(|(path, bytes)| InputFile { path, sha256: sha256_hex(&bytes) })
            .collect();
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            argv: std::env::args().collect(),
            config,
            inputs,
            artifacts: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, csv: Csv) -> Result<(), CliError> {
        self.write(name, &csv.text)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }

    pub fn finish(self, outcome: &Result<(), CliError>) -> Result<(), CliError> {
        let mut hashed = serde_json::to_vec(&self.config).unwrap_or_default();
        for f in &self.inputs {
            hashed.extend_from_slice(f.sha256.as_bytes());
        }
        let message = outcome.as_ref().err().map(|e| e.to_string());
        let manifest = Manifest {
            command: &self.command,
            version: env!("CARGO_PKG_VERSION"),
            argv: &self.argv,
            config: &self.config,
            inputs: &self.inputs,
            input_hash: sha256_hex(&hashed),
            artifacts: &self.artifacts,
            threads: rayon::current_num_threads(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            exit_code: outcome.as_ref().map_or_else(CliError::code, |_| 0),
            message: message.as_deref(),
        };
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Input(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }
}
