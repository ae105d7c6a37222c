use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "PQC_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "pqc-out";

/// `--out`, else `$PQC_OUT_DIR`, else `./pqc-out`.
pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
    }
}

/// Writes artifacts for one command, each stamped with the tool version and resolved config.
pub struct Artifacts {
    dir: PathBuf,
    command: &'static str,
    config: Value,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: PathBuf, command: &'static str, config: &impl Serialize) -> CliResult<Self> {
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::runtime(format!("cannot create output directory {}: {e}", dir.display())))?;
        let config = serde_json::to_value(config).map_err(|e| CliError::runtime(e.to_string()))?;
        Ok(Self { dir, command, config, written: Vec::new() })
    }

    pub fn header(&self) -> Value {
        json!({ "tool": "pqc", "version": pqc_core::VERSION, "command": self.command, "config": self.config })
    }

    /// `{tool, version, command, config, ...body}` as pretty JSON.
    pub fn json(&mut self, name: &str, body: Value) -> CliResult<()> {
        let mut doc = self.header();
        if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
            d.extend(b);
        }
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::runtime(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    /// CSV preceded by one `#` comment line holding the header JSON.
    pub fn csv(&mut self, name: &str, body: &str) -> CliResult<()> {
        let mut text = format!("# {}\n", self.header());
        text.push_str(body);
        self.write(name, &text)
    }

    fn write(&mut self, name: &str, text: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        write_atomic(&path, text.as_bytes())?;
        self.written.push(path);
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Write to a temporary file in the target directory, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::runtime(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

/// `index,bits,probability` rows.
pub fn histogram_csv(q: &[f64], width: usize) -> String {
    let mut out = String::from("index,bits,probability\n");
    for (i, p) in q.iter().enumerate() {
        out.push_str(&format!("{i},{},{p}\n", pqc_core::qsim::bitstring(i, width)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn artifacts_embed_version_and_config() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::new(dir.path().to_path_buf(), "demo", &json!({ "seed": 3 })).unwrap();
        a.json("s.json", json!({ "value": 1 })).unwrap();
        a.csv("h.csv", "x\n1\n").unwrap();
        let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
        assert_eq!(v["version"], pqc_core::VERSION);
        assert_eq!(v["config"]["seed"], 3);
        assert_eq!(v["value"], 1);
        let csv = std::fs::read_to_string(dir.path().join("h.csv")).unwrap();
        assert!(csv.starts_with("# {") && csv.contains("\"seed\":3") && csv.ends_with("x\n1\n"));
    }

    #[test]
    fn histogram_rows() {
        assert_eq!(histogram_csv(&[0.25, 0.75], 1), "index,bits,probability\n0,0,0.25\n1,1,0.75\n");
    }
}
