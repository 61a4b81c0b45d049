use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_err, PipelineError, Stage};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMING_FILE: &str = "timing.json";

/// File names whose contents depend on wall-clock time. They are hashed for
/// tamper checks but left out of [`RunManifest::digest`].
pub const VOLATILE_FILES: &[&str] = &["history.csv"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Run-relative path (forward slashes) to sha256 hex.
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config: serde_json::Value,
    pub stages: BTreeMap<Stage, StageRecord>,
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), PipelineError> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| io_err(dir, e))?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

fn rel(run_dir: &Path, p: &Path) -> String {
    let r = p.strip_prefix(run_dir).unwrap_or(p);
    r.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

impl RunManifest {
    pub fn new(config: serde_json::Value) -> Self {
        let run_id = hex::encode(&Sha256::digest(config.to_string().as_bytes())[..6]);
        Self { run_id, config, stages: BTreeMap::new() }
    }

    pub fn path(run_dir: &Path) -> PathBuf {
        run_dir.join(MANIFEST_FILE)
    }

    pub fn load(run_dir: &Path) -> Result<Option<Self>, PipelineError> {
        let p = Self::path(run_dir);
        if !p.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
        serde_json::from_str(&text).map(Some).map_err(|e| PipelineError::CorruptManifest(e.to_string()))
    }

    pub fn save(&self, run_dir: &Path) -> Result<(), PipelineError> {
        let p = Self::path(run_dir);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&p, text).map_err(|e| io_err(&p, e))
    }

    /// Hash every file under the stage directory and store the record. Stages
    /// downstream of `stage` lose their records.
    pub fn complete(&mut self, run_dir: &Path, stage: Stage) -> Result<&StageRecord, PipelineError> {
        let mut files = Vec::new();
        let dir = run_dir.join(stage.dir());
        if dir.exists() {
            collect_files(&dir, &mut files)?;
        }
        let mut artifacts = BTreeMap::new();
        for f in files {
            artifacts.insert(rel(run_dir, &f), sha256_file(&f)?);
        }
        for s in Stage::ALL {
            if s.depends_on(stage) {
                self.stages.remove(&s);
            }
        }
        self.stages.insert(stage, StageRecord { artifacts });
        Ok(&self.stages[&stage])
    }

    /// Re-hash every artifact of `stage`.
    pub fn verify_stage(&self, run_dir: &Path, stage: Stage) -> Result<(), PipelineError> {
        let rec = self.stages.get(&stage).ok_or_else(|| PipelineError::MissingArtifact(stage.as_str().into()))?;
        for (path, hash) in &rec.artifacts {
            let p = run_dir.join(path);
            if !p.exists() {
                return Err(PipelineError::MissingArtifact(path.clone()));
            }
            if &sha256_file(&p)? != hash {
                return Err(PipelineError::TamperedArtifact(path.clone()));
            }
        }
        Ok(())
    }

    /// Require a named artifact recorded by `stage`, after verifying the
    /// whole stage.
    pub fn require(&self, run_dir: &Path, stage: Stage, path: &str, name: &str) -> Result<PathBuf, PipelineError> {
        let recorded = self.stages.get(&stage).is_some_and(|r| r.artifacts.contains_key(path));
        if !recorded || !run_dir.join(path).exists() {
            return Err(PipelineError::MissingArtifact(name.into()));
        }
        self.verify_stage(run_dir, stage)?;
        Ok(run_dir.join(path))
    }

    /// Hash over every non-volatile artifact of every stage.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (stage, rec) in &self.stages {
            for (path, hash) in &rec.artifacts {
                let name = path.rsplit('/').next().unwrap_or(path);
                if VOLATILE_FILES.contains(&name) {
                    continue;
                }
                h.update(format!("{stage}:{path}:{hash}\n").as_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}
