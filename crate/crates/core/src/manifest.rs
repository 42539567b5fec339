//! Run manifests: which settings and input bytes produced which outputs.
//!
//! A manifest is a flat `key = value` text file. It records no paths and no
//! clock time, so two runs over identical inputs and settings write
//! identical manifests.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::KvConfig;

/// File name suffix; a run of `ingest` writes `ingest.manifest.txt`.
pub const MANIFEST_SUFFIX: &str = ".manifest.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> io::Result<String> {
    let mut f = File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub command: String,
    /// File stem of the manifest; defaults to the command name.
    pub stem: String,
    /// Resolved settings, excluding file paths.
    pub settings: KvConfig,
    /// `(label, sha256)` per input file.
    pub inputs: Vec<(String, String)>,
    /// `(file name, sha256)` per output file.
    pub outputs: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, settings: KvConfig) -> Self {
        Self {
            command: command.to_string(),
            stem: command.to_string(),
            settings,
            ..Default::default()
        }
    }

    pub fn add_input(&mut self, label: &str, path: &Path) -> io::Result<()> {
        self.inputs.push((label.to_string(), file_digest(path)?));
        Ok(())
    }

    /// Record digests of `names` inside `dir`.
    pub fn add_outputs(&mut self, dir: &Path, names: &[String]) -> io::Result<()> {
        for n in names {
            self.outputs.push((n.clone(), file_digest(&dir.join(n))?));
        }
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        sha256_hex(self.settings.canonical().as_bytes())
    }

    pub fn seed(&self) -> Option<&str> {
        self.settings.get("seed")
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("tool = iol\ntool_version = {}\n", env!("CARGO_PKG_VERSION")));
        s.push_str(&format!("command = {}\n", self.command));
        s.push_str(&format!("config_sha256 = {}\n", self.config_hash()));
        s.push_str(&format!("seed = {}\n", self.seed().unwrap_or("")));
        for (k, v) in self.settings.iter() {
            s.push_str(&format!("setting.{k} = {v}\n"));
        }
        for (k, d) in &self.inputs {
            s.push_str(&format!("input.{k} = sha256:{d}\n"));
        }
        for (k, d) in &self.outputs {
            s.push_str(&format!("output.{k} = sha256:{d}\n"));
        }
        s
    }

    pub fn file_name(&self) -> String {
        format!("{}{MANIFEST_SUFFIX}", self.stem)
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let mut f = File::create(dir.join(self.file_name()))?;
        f.write_all(self.render().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_is_stable() {
        let mut kv = KvConfig::default();
        kv.set("seed", "4");
        kv.set("alpha", "0.5");
        let mut m = Manifest::new("synth", kv.clone());
        m.outputs.push(("a.csv".into(), sha256_hex(b"x")));
        let mut n = Manifest::new("synth", kv);
        n.outputs.push(("a.csv".into(), sha256_hex(b"x")));
        assert_eq!(m.render(), n.render());
        assert!(m.render().contains("seed = 4\n"));
        assert!(m.render().contains("setting.alpha = 0.5\nsetting.seed = 4\n"));
    }
}
