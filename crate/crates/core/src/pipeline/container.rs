use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use faer::Mat;
use sha2::{Digest, Sha256};

use super::config::hex;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"ROMNS1";

/// What a container holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum ArtifactKind {
    Snapshots = 1,
    Homogenized = 2,
    Pod = 3,
    Offline = 4,
    VpOffline = 5,
    Trajectory = 6,
}

impl ArtifactKind {
    fn from_u16(v: u16) -> Result<Self> {
        Ok(match v {
            1 => Self::Snapshots,
            2 => Self::Homogenized,
            3 => Self::Pod,
            4 => Self::Offline,
            5 => Self::VpOffline,
            6 => Self::Trajectory,
            other => return Err(Error::Artifact(format!("unknown artifact kind {other}"))),
        })
    }
}

/// Binary container: magic `ROMNS1`, little-endian header
/// `(kind: u16, n_v: u64, n_p: u64, steps: u64, grid_hash: u64)`, string metadata,
/// then named column-major `f64` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: ArtifactKind,
    pub n_v: u64,
    pub n_p: u64,
    pub steps: u64,
    pub grid_hash: u64,
    pub meta: BTreeMap<String, String>,
    blocks: Vec<(String, usize, usize, Vec<f64>)>,
}

impl Container {
    pub fn new(kind: ArtifactKind, n_v: usize, n_p: usize, steps: usize, grid_hash: u64) -> Self {
        Self {
            kind,
            n_v: n_v as u64,
            n_p: n_p as u64,
            steps: steps as u64,
            grid_hash,
            meta: BTreeMap::new(),
            blocks: Vec::new(),
        }
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Artifact(format!("missing metadata '{key}'")))
    }

    pub fn put_mat(&mut self, name: &str, m: &Mat<f64>) {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for j in 0..m.ncols() {
            data.extend_from_slice(m.col_as_slice(j));
        }
        self.blocks
            .push((name.to_string(), m.nrows(), m.ncols(), data));
    }

    pub fn put_vec(&mut self, name: &str, v: &[f64]) {
        self.blocks.push((name.to_string(), v.len(), 1, v.to_vec()));
    }

    fn block(&self, name: &str) -> Result<&(String, usize, usize, Vec<f64>)> {
        self.blocks
            .iter()
            .find(|b| b.0 == name)
            .ok_or_else(|| Error::Artifact(format!("missing block '{name}'")))
    }

    pub fn has(&self, name: &str) -> bool {
        self.blocks.iter().any(|b| b.0 == name)
    }

    pub fn mat(&self, name: &str) -> Result<Mat<f64>> {
        let (_, r, c, d) = self.block(name)?;
        Ok(Mat::from_fn(*r, *c, |i, j| d[j * r + i]))
    }

    pub fn vec(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.block(name)?.3.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.kind as u16).to_le_bytes());
        for v in [self.n_v, self.n_p, self.steps, self.grid_hash] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let put_str = |out: &mut Vec<u8>, s: &str| {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        };
        out.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        for (k, v) in &self.meta {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        out.extend_from_slice(&(self.blocks.len() as u32).to_le_bytes());
        for (name, r, c, d) in &self.blocks {
            put_str(&mut out, name);
            out.extend_from_slice(&(*r as u64).to_le_bytes());
            out.extend_from_slice(&(*c as u64).to_le_bytes());
            for x in d {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(6)? != MAGIC {
            return Err(Error::Artifact("bad magic bytes".into()));
        }
        let kind = ArtifactKind::from_u16(u16::from_le_bytes(r.take(2)?.try_into().unwrap()))?;
        let n_v = r.u64()?;
        let n_p = r.u64()?;
        let steps = r.u64()?;
        let grid_hash = r.u64()?;
        let mut meta = BTreeMap::new();
        for _ in 0..r.u32()? {
            let k = r.string()?;
            let v = r.string()?;
            meta.insert(k, v);
        }
        let mut blocks = Vec::new();
        for _ in 0..r.u32()? {
            let name = r.string()?;
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let n = rows
                .checked_mul(cols)
                .filter(|n| n.checked_mul(8).is_some_and(|b| b <= bytes.len()))
                .ok_or_else(|| Error::Artifact(format!("block '{name}' too large")))?;
            let raw = r.take(8 * n)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            blocks.push((name, rows, cols, data));
        }
        if r.pos != bytes.len() {
            return Err(Error::Artifact("trailing bytes after last block".into()));
        }
        Ok(Self {
            kind,
            n_v,
            n_p,
            steps,
            grid_hash,
            meta,
            blocks,
        })
    }

    /// Writes to a temporary sibling and renames; returns the SHA-256 of the bytes.
    pub fn write_atomic(&self, path: &Path) -> Result<String> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path, expect: ArtifactKind) -> Result<Self> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
        let c = Self::from_bytes(&bytes)
            .map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
        if c.kind != expect {
            return Err(Error::Artifact(format!(
                "{}: expected {expect:?}, found {:?}",
                path.display(),
                c.kind
            )));
        }
        Ok(c)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Artifact("truncated container".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Artifact("metadata is not UTF-8".into()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Temp file + rename in the same directory; returns the content hash.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<String> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .and_then(|s| s.to_str())
            .unwrap_or("artifact")
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(sha256_hex(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_everything() {
        let mut c = Container::new(ArtifactKind::Pod, 10, 4, 3, 42);
        c.set_meta("r", 2);
        let m = Mat::from_fn(3, 2, |i, j| i as f64 - 0.5 * j as f64);
        c.put_mat("phi", &m);
        c.put_vec("s", &[3.0, 1.0]);
        let back = Container::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.mat("phi").unwrap(), m);
        assert_eq!(back.meta("r").unwrap(), "2");
    }

    #[test]
    fn corruption_is_detected() {
        let mut c = Container::new(ArtifactKind::Snapshots, 1, 1, 1, 0);
        c.put_vec("x", &[1.0]);
        let bytes = c.to_bytes();
        assert!(Container::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Container::from_bytes(&bad).is_err());
    }
}
