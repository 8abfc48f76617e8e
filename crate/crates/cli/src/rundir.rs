use std::fs;
use std::path::{Path, PathBuf};

use bearing_pinn::Error;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::Failure;

/// `<out>/<run-id>/`, holding `config.frozen` from creation on.
pub struct RunDir {
    path: PathBuf,
}

fn io(path: &Path, source: std::io::Error) -> Failure {
    Failure::Core(Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `<command>-<first 12 hex digits of sha256(frozen config)>`.
pub fn default_run_id(command: &str, frozen: &str) -> String {
    let digest = Sha256::digest(frozen.as_bytes());
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    format!("{command}-{hex}")
}

impl RunDir {
    /// Refuses a non-empty existing directory unless `force`, which clears it.
    pub fn create(out: &Path, run_id: Option<&str>, command: &str, frozen: &str, force: bool) -> Result<Self, Failure> {
        let id = run_id.map_or_else(|| default_run_id(command, frozen), str::to_string);
        if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
            return Err(Failure::Usage(format!("invalid run id `{id}`")));
        }
        let path = out.join(id);
        let occupied = fs::read_dir(&path).map(|mut d| d.next().is_some()).unwrap_or(false);
        if occupied {
            if !force {
                return Err(Failure::Usage(format!(
                    "run directory {} already exists; pass --force to overwrite",
                    path.display()
                )));
            }
            fs::remove_dir_all(&path).map_err(|e| io(&path, e))?;
        }
        fs::create_dir_all(&path).map_err(|e| io(&path, e))?;
        let dir = Self { path };
        dir.write("config.frozen", frozen)?;
        Ok(dir)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        let p = self.file(name);
        fs::write(&p, contents).map_err(|e| io(&p, e))
    }

    pub fn report(&self, json: &Value, text: &str) -> Result<(), Failure> {
        let body = serde_json::to_string_pretty(json).expect("JSON values always serialize");
        self.write("report.json", &(body + "\n"))?;
        self.write("report.txt", text)
    }
}
