//! Artifact bookkeeping for one invocation: output directory, recorded inputs
//! and options, and the manifest written at the end.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use ringmod::DoublyConnectedDomain;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// A failed run: message and process exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    pub fn hypothesis(message: impl Into<String>) -> Self {
        Failure { code: 4, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ringmod::Error> for Failure {
    fn from(e: ringmod::Error) -> Self {
        Failure { code: e.exit_code(), message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, Failure>;

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub library_version: String,
    /// Arguments after the program name, exactly as given.
    pub args: Vec<String>,
    /// Working directory the arguments are relative to.
    pub cwd: PathBuf,
    pub command: String,
    pub inputs: BTreeMap<String, Value>,
    pub options: BTreeMap<String, Value>,
    /// Files written next to the manifest, sorted.
    pub artifacts: Vec<String>,
    pub threads: usize,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_seconds: f64,
}

/// Output directory plus everything the manifest needs to reproduce the run.
pub struct Run {
    out: PathBuf,
    emit_csv: bool,
    emit_svg: bool,
    artifacts: Vec<String>,
    inputs: BTreeMap<String, Value>,
    options: BTreeMap<String, Value>,
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("artifact serialises")
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serialises");
    s.push('\n');
    s
}

impl Run {
    /// Creates `out` and checks that it accepts files.
    pub fn new(out: &Path, emit_csv: bool, emit_svg: bool) -> CliResult<Self> {
        fs::create_dir_all(out).map_err(|e| Failure::invalid(format!("cannot create output directory {}: {e}", out.display())))?;
        let probe = out.join(".ringmod-write-test");
        fs::write(&probe, b"").map_err(|e| Failure::invalid(format!("output directory {} is not writable: {e}", out.display())))?;
        let _ = fs::remove_file(probe);
        Ok(Run { out: out.to_path_buf(), emit_csv, emit_svg, artifacts: Vec::new(), inputs: BTreeMap::new(), options: BTreeMap::new() })
    }

    pub fn emit_svg(&self) -> bool {
        self.emit_svg
    }

    fn write(&mut self, name: &str, text: &str) -> CliResult<()> {
        let path = self.out.join(name);
        fs::write(&path, text).map_err(|e| Failure::invalid(format!("cannot write {}: {e}", path.display())))?;
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        self.write(name, &pretty(value))
    }

    /// CSV whose first line is `#schema=<schema>`; written only with `--csv`
    /// unless `force` is set.
    pub fn csv(&mut self, name: &str, schema: &str, header: &[&str], rows: &[Vec<String>], force: bool) -> CliResult<()> {
        if !(self.emit_csv || force) {
            return Ok(());
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(|e| Failure::numerical(e.to_string()))?;
        for row in rows {
            w.write_record(row).map_err(|e| Failure::numerical(e.to_string()))?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Failure::numerical(e.to_string()))?).expect("csv is utf-8");
        self.write(name, &format!("#schema={schema}\n{body}"))
    }

    pub fn svg(&mut self, name: &str, document: impl FnOnce() -> String) -> CliResult<()> {
        if self.emit_svg {
            self.write(name, &document())?;
        }
        Ok(())
    }

    fn read_text(&mut self, key: &str, path: &Path) -> CliResult<Value> {
        let text = fs::read_to_string(path).map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
        self.inputs.insert(key.to_string(), serde_json::json!({ "path": path, "content": value.clone() }));
        Ok(value)
    }

    pub fn read_domain(&mut self, key: &str, path: &Path) -> CliResult<DoublyConnectedDomain> {
        let value = self.read_text(key, path)?;
        Ok(DoublyConnectedDomain::from_json(&value.to_string())?)
    }

    pub fn read_json<T: DeserializeOwned>(&mut self, key: &str, path: &Path) -> CliResult<T> {
        let value = self.read_text(key, path)?;
        serde_json::from_value(value).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
    }

    pub fn option(&mut self, key: &str, value: &impl Serialize) {
        self.options.insert(key.to_string(), to_value(value));
    }

    pub fn finish(mut self, mut manifest: Manifest) -> CliResult<()> {
        self.artifacts.sort();
        manifest.artifacts = std::mem::take(&mut self.artifacts);
        manifest.inputs = std::mem::take(&mut self.inputs);
        manifest.options = std::mem::take(&mut self.options);
        let text = pretty(&manifest);
        let path = self.out.join("manifest.json");
        fs::write(&path, text).map_err(|e| Failure::invalid(format!("cannot write {}: {e}", path.display())))
    }
}

/// Shortest decimal form that reads back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
