//! Stage cache: one directory per stage, keyed by a hash of the config
//! sections the stage reads and the key of the stage before it.

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{sha256_hex, to_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    CheckAssumptions,
    AnalyzeModes,
    FindResonances,
    SolveProfiles,
    SolveSingular,
    ConvergenceStudy,
}

impl Stage {
    pub const ALL: [Stage; 6] =
        [Stage::CheckAssumptions, Stage::AnalyzeModes, Stage::FindResonances, Stage::SolveProfiles, Stage::SolveSingular, Stage::ConvergenceStudy];

    pub fn name(self) -> &'static str {
        match self {
            Stage::CheckAssumptions => "check-assumptions",
            Stage::AnalyzeModes => "analyze-modes",
            Stage::FindResonances => "find-resonances",
            Stage::SolveProfiles => "solve-profiles",
            Stage::SolveSingular => "solve-singular",
            Stage::ConvergenceStudy => "convergence-study",
        }
    }

    pub fn upstream(self) -> &'static [Stage] {
        let i = Stage::ALL.iter().position(|s| *s == self).unwrap();
        &Stage::ALL[..i]
    }

    /// Config sections read by the stage.
    fn inputs(self, cfg: &RunConfig) -> serde_json::Value {
        match self {
            Stage::CheckAssumptions => json!({ "system": cfg.system, "beta": cfg.beta, "checks": cfg.checks, "seed": cfg.seed,
                "margin": cfg.tolerances.stability_margin }),
            Stage::AnalyzeModes => json!({ "system": cfg.system, "beta": cfg.beta }),
            Stage::FindResonances => json!({ "resonance": cfg.resonance }),
            Stage::SolveProfiles => json!({ "forcing": cfg.forcing, "grid": cfg.grid, "picard": cfg.tolerances.picard,
                "max_iter": cfg.tolerances.max_iter, "keep": cfg.tolerances.keep }),
            Stage::SolveSingular => json!({ "epsilons": cfg.epsilons, "singular": cfg.singular, "tol": cfg.tolerances.singular }),
            Stage::ConvergenceStudy => json!({ "truncation": cfg.tolerances.truncation }),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Hash of the whole config.
pub fn config_hash(cfg: &RunConfig) -> String {
    sha256_hex(&to_json(cfg).expect("config serializes"))
}

/// Stage keys in pipeline order; each folds in its predecessor.
pub fn stage_keys(cfg: &RunConfig) -> Vec<(Stage, String)> {
    let mut prev = String::new();
    Stage::ALL
        .iter()
        .map(|&s| {
            let body = json!({ "stage": s.name(), "upstream": prev, "inputs": s.inputs(cfg), "version": env!("CARGO_PKG_VERSION") });
            prev = sha256_hex(&to_json(&body).expect("stage inputs serialize"));
            (s, prev.clone())
        })
        .collect()
}

pub struct Cache {
    pub root: PathBuf,
    keys: Vec<(Stage, String)>,
}

impl Cache {
    pub fn new(root: PathBuf, cfg: &RunConfig) -> Self {
        Self { root, keys: stage_keys(cfg) }
    }

    pub fn key(&self, s: Stage) -> &str {
        &self.keys.iter().find(|(k, _)| *k == s).unwrap().1
    }

    pub fn dir(&self, s: Stage) -> PathBuf {
        self.root.join(s.name()).join(&self.key(s)[..16])
    }

    fn marker(&self, s: Stage) -> PathBuf {
        self.dir(s).join("complete")
    }

    pub fn is_complete(&self, s: Stage) -> bool {
        self.marker(s).exists()
    }

    /// Empties the stage directory before it is rebuilt.
    pub fn begin(&self, s: Stage) -> io::Result<PathBuf> {
        let d = self.dir(s);
        if d.exists() {
            std::fs::remove_dir_all(&d)?;
        }
        std::fs::create_dir_all(&d)?;
        Ok(d)
    }

    pub fn finish(&self, s: Stage) -> io::Result<()> {
        std::fs::write(self.marker(s), self.key(s))
    }

    /// Artifact files of a completed stage, relative to its directory, sorted.
    pub fn artifacts(&self, s: Stage) -> io::Result<Vec<PathBuf>> {
        let base = self.dir(s).join("artifacts");
        let mut out = Vec::new();
        if base.exists() {
            collect(&base, &base, &mut out)?;
        }
        out.sort();
        Ok(out)
    }
}

fn collect(base: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    for e in std::fs::read_dir(dir)? {
        let p = e?.path();
        if p.is_dir() {
            collect(base, &p, out)?;
        } else {
            out.push(p.strip_prefix(base).unwrap().to_path_buf());
        }
    }
    Ok(())
}

/// Little-endian blob of `f64` arrays with a length prefix per array.
pub fn write_arrays(path: &Path, arrays: &[&[f64]]) -> io::Result<()> {
    let total: usize = arrays.iter().map(|a| 8 + 8 * a.len()).sum();
    let mut buf = Vec::with_capacity(8 + total);
    buf.extend_from_slice(&(arrays.len() as u64).to_le_bytes());
    for a in arrays {
        buf.extend_from_slice(&(a.len() as u64).to_le_bytes());
        for x in *a {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    std::fs::write(path, buf)
}

pub fn read_arrays(path: &Path) -> io::Result<Vec<Vec<f64>>> {
    let bytes = std::fs::read(path)?;
    let bad = || io::Error::new(io::ErrorKind::InvalidData, format!("truncated cache blob {}", path.display()));
    let mut pos = 0usize;
    let mut word = || -> io::Result<[u8; 8]> {
        let w: [u8; 8] = bytes.get(pos..pos + 8).ok_or_else(bad)?.try_into().unwrap();
        pos += 8;
        Ok(w)
    };
    let count = u64::from_le_bytes(word()?) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = u64::from_le_bytes(word()?) as usize;
        let mut a = Vec::with_capacity(len);
        for _ in 0..len {
            a.push(f64::from_le_bytes(word()?));
        }
        out.push(a);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        let a = [1.0, -2.5, f64::MIN_POSITIVE];
        let b: [f64; 0] = [];
        write_arrays(&p, &[&a, &b, &[3.0]]).unwrap();
        let back = read_arrays(&p).unwrap();
        assert_eq!(back, vec![a.to_vec(), vec![], vec![3.0]]);
    }

    #[test]
    fn upstream_is_a_prefix() {
        assert!(Stage::CheckAssumptions.upstream().is_empty());
        assert_eq!(Stage::FindResonances.upstream(), &[Stage::CheckAssumptions, Stage::AnalyzeModes]);
    }
}
