use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

/// Writes outputs into one directory, stamping each with the config hash and seed.
pub struct Artifacts {
    dir: PathBuf,
    hash: String,
    seed: u64,
}

impl Artifacts {
    pub fn new(dir: &Path, hash: String, seed: u64) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf(), hash, seed })
    }

    pub fn write_json(&self, name: &str, body: Value) -> io::Result<PathBuf> {
        let mut m = Map::new();
        m.insert("config_hash".into(), Value::String(self.hash.clone()));
        m.insert("seed".into(), Value::from(self.seed));
        match body {
            Value::Object(o) => m.extend(o),
            other => {
                m.insert("data".into(), other);
            }
        }
        let path = self.dir.join(name);
        fs::write(&path, serde_json::to_string_pretty(&Value::Object(m)).expect("serializable") + "\n")?;
        Ok(path)
    }

    pub fn write_csv(&self, name: &str, body: &str) -> io::Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, format!("# config_hash={} seed={}\n{body}", self.hash, self.seed))?;
        Ok(path)
    }
}
