//! One `manifest.json` per run: what was asked, what was read, what was written.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use urbantemp::kv::KvMap;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

fn file_entries(paths: &[PathBuf]) -> std::io::Result<Vec<Value>> {
    let mut files: Vec<PathBuf> = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && p.file_name().is_some_and(|n| n != MANIFEST_FILE))
                .collect();
            inner.sort();
            files.extend(inner);
        } else if p.is_file() {
            files.push(p.clone());
        }
    }
    files
        .iter()
        .map(|f| Ok(json!({ "path": f.display().to_string(), "sha256": sha256_file(f)? })))
        .collect()
}

pub struct Manifest {
    subcommand: String,
    started: Instant,
    config: KvMap,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    timings: Vec<(String, f64)>,
    stats: Map<String, Value>,
    lap: Instant,
}

impl Manifest {
    pub fn new(subcommand: &str) -> Self {
        let now = Instant::now();
        Self {
            subcommand: subcommand.to_string(),
            started: now,
            config: KvMap::new(),
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: Vec::new(),
            stats: Map::new(),
            lap: now,
        }
    }

    pub fn config(&mut self, kv: KvMap) {
        self.config = kv;
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    pub fn outputs(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        self.outputs.extend(paths);
    }

    pub fn stat(&mut self, key: &str, value: impl Into<Value>) {
        self.stats.insert(key.to_string(), value.into());
    }

    /// Records the time since the previous lap under `stage`.
    pub fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.push((stage.to_string(), (now - self.lap).as_secs_f64()));
        self.lap = now;
    }

    pub fn write(mut self, dir: &Path) -> anyhow::Result<PathBuf> {
        self.outputs.sort();
        self.outputs.dedup();
        let config: Map<String, Value> = self
            .config
            .keys()
            .map(|k| (k.to_string(), Value::from(self.config.get_str(k).unwrap_or_default())))
            .collect();
        let mut timings: Map<String, Value> = self.timings.into_iter().map(|(k, v)| (k, Value::from(v))).collect();
        timings.insert("total".into(), Value::from(self.started.elapsed().as_secs_f64()));
        let doc = json!({
            "subcommand": self.subcommand,
            "version": env!("CARGO_PKG_VERSION"),
            "argv": std::env::args().collect::<Vec<_>>(),
            "seed": self.seed,
            "config": config,
            "inputs": file_entries(&self.inputs)?,
            "outputs": file_entries(&self.outputs)?,
            "stats": self.stats,
            "timings_s": timings,
        });
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
        Ok(path)
    }
}
