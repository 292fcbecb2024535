use std::io::Write;
use std::path::{Path, PathBuf};

use super::container::sha256_hex;
use crate::error::{Error, Result};

pub const LEDGER_FILE: &str = "ledger.txt";

/// One line of the run ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub stage: String,
    pub artifact: String,
    pub sha256: String,
    pub seconds: f64,
    pub config: String,
}

impl LedgerEntry {
    fn render(&self) -> String {
        format!(
            "stage={} artifact={} sha256={} seconds={:.6} config={}",
            self.stage, self.artifact, self.sha256, self.seconds, self.config
        )
    }

    fn parse(line: &str) -> Result<Self> {
        let mut e = LedgerEntry {
            stage: String::new(),
            artifact: String::new(),
            sha256: String::new(),
            seconds: 0.0,
            config: String::new(),
        };
        for tok in line.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Artifact(format!("malformed ledger token '{tok}'")))?;
            match k {
                "stage" => e.stage = v.into(),
                "artifact" => e.artifact = v.into(),
                "sha256" => e.sha256 = v.into(),
                "seconds" => {
                    e.seconds = v
                        .parse()
                        .map_err(|_| Error::Artifact(format!("bad seconds '{v}'")))?
                }
                "config" => e.config = v.into(),
                _ => {}
            }
        }
        if e.stage.is_empty() || e.artifact.is_empty() || e.sha256.is_empty() {
            return Err(Error::Artifact(format!("incomplete ledger line '{line}'")));
        }
        Ok(e)
    }
}

/// Append-only record of stage outputs in a run directory. Wall-clock durations
/// live here rather than in artifacts so reruns stay byte-identical.
#[derive(Debug, Clone)]
pub struct RunLedger {
    dir: PathBuf,
    entries: Vec<LedgerEntry>,
}

impl RunLedger {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(LEDGER_FILE);
        let entries = match std::fs::read_to_string(&path) {
            Ok(text) => text
                .lines()
                .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
                .map(LedgerEntry::parse)
                .collect::<Result<_>>()?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            entries,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn record(&mut self, entry: LedgerEntry) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.dir.join(LEDGER_FILE))?;
        writeln!(f, "{}", entry.render())?;
        self.entries.push(entry);
        Ok(())
    }

    /// Most recent entry for an artifact.
    pub fn latest(&self, artifact: &str) -> Option<&LedgerEntry> {
        self.entries.iter().rev().find(|e| e.artifact == artifact)
    }

    /// Reads an upstream artifact after checking it against its ledger hash and
    /// the expected config hash.
    pub fn verified_bytes(&self, artifact: &str, config: &str) -> Result<Vec<u8>> {
        let entry = self.latest(artifact).ok_or_else(|| {
            Error::Artifact(format!(
                "{artifact}: no ledger entry, run the upstream stage first"
            ))
        })?;
        if entry.config != config {
            return Err(Error::Artifact(format!(
                "{artifact}: produced with config {}, current config is {config}",
                short(&entry.config)
            )));
        }
        let path = self.dir.join(artifact);
        let bytes = std::fs::read(&path)
            .map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
        let sha = sha256_hex(&bytes);
        if sha != entry.sha256 {
            return Err(Error::Artifact(format!(
                "{artifact}: hash {} does not match ledger {}",
                short(&sha),
                short(&entry.sha256)
            )));
        }
        Ok(bytes)
    }
}

fn short(h: &str) -> &str {
    &h[..h.len().min(12)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_survive_reopen_and_detect_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let mut l = RunLedger::open(dir.path()).unwrap();
        std::fs::write(dir.path().join("a.bin"), b"hello").unwrap();
        l.record(LedgerEntry {
            stage: "fom".into(),
            artifact: "a.bin".into(),
            sha256: sha256_hex(b"hello"),
            seconds: 1.5,
            config: "abc".into(),
        })
        .unwrap();
        let l = RunLedger::open(dir.path()).unwrap();
        assert_eq!(l.entries().len(), 1);
        assert_eq!(l.verified_bytes("a.bin", "abc").unwrap(), b"hello");
        assert!(l.verified_bytes("a.bin", "other").is_err());
        std::fs::write(dir.path().join("a.bin"), b"jello").unwrap();
        assert!(l.verified_bytes("a.bin", "abc").is_err());
        assert!(l.verified_bytes("missing.bin", "abc").is_err());
    }
}
