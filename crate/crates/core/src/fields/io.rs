//! The DLF1 field container.
//!
//! Layout: a 64-byte magic (`DLF1` padded with ASCII spaces), then
//! little-endian `u32 d, n, c, nt`, `f64 L, dt, ν`, `u32` name length and
//! the UTF-8 name, then `nt·c·n^d` little-endian `f64` samples, then the
//! CRC-32 of the sample bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::field::{FieldMeta, SpaceTimeField};
use super::grid::PeriodicGrid;
use crate::error::{Error, Result};

const MAGIC_LEN: usize = 64;

fn magic() -> [u8; MAGIC_LEN] {
    let mut m = [b' '; MAGIC_LEN];
    m[..4].copy_from_slice(b"DLF1");
    m
}

pub fn encode(field: &SpaceTimeField) -> Vec<u8> {
    let g = field.grid();
    let name = field.meta.name.as_bytes();
    let mut out = Vec::with_capacity(MAGIC_LEN + 48 + name.len() + field.data().len() * 8 + 4);
    out.extend_from_slice(&magic());
    for v in [g.d, g.n, field.components(), g.nt] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in [g.length, g.dt, field.meta.viscosity] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name);
    let start = out.len();
    for v in field.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out[start..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + k > self.buf.len() {
            return Err(Error::Format(format!("truncated while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(buf: &[u8]) -> Result<SpaceTimeField> {
    let mut cur = Cursor { buf, pos: 0 };
    if cur.take(MAGIC_LEN, "magic")? != magic() {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let d = cur.u32("d")? as usize;
    let n = cur.u32("n")? as usize;
    let c = cur.u32("components")? as usize;
    let nt = cur.u32("nt")? as usize;
    let length = cur.f64("L")?;
    let dt = cur.f64("dt")?;
    let viscosity = cur.f64("viscosity")?;
    let name_len = cur.u32("name length")? as usize;
    let name = std::str::from_utf8(cur.take(name_len, "name")?)
        .map_err(|_| Error::Format("name is not UTF-8".into()))?
        .to_string();
    let grid = PeriodicGrid::new(d, n, length, nt, dt).map_err(|e| Error::Format(e.to_string()))?;
    let count = nt
        .checked_mul(c)
        .and_then(|v| v.checked_mul(grid.points()))
        .ok_or_else(|| Error::Format("sample count overflows".into()))?;
    let payload = cur.take(count * 8, "payload")?;
    let crc = cur.u32("checksum")?;
    if cur.pos != buf.len() {
        return Err(Error::Format(format!("{} trailing bytes", buf.len() - cur.pos)));
    }
    if crc32fast::hash(payload) != crc {
        return Err(Error::Format("checksum mismatch".into()));
    }
    let data = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    let meta = FieldMeta { name, viscosity, ..Default::default() };
    SpaceTimeField::new(grid, c, data, meta).map_err(|e| Error::Format(e.to_string()))
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let file = path
        .file_name()
        .ok_or_else(|| Error::param(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", file.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_field(path: impl AsRef<Path>, field: &SpaceTimeField) -> Result<()> {
    write_atomic(path.as_ref(), &encode(field))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<SpaceTimeField> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::synth::{synth_field, SynthKind};

    fn tg() -> SpaceTimeField {
        let g = PeriodicGrid::snapshot(2, 16).unwrap().with_time(2, 0.5).unwrap();
        let mut f = synth_field(&g, &SynthKind::TaylorGreen, 0).unwrap();
        f.meta.viscosity = 1e-3;
        f
    }

    #[test]
    fn roundtrip_bit_exact() {
        let f = tg();
        let back = decode(&encode(&f)).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert_eq!(back.meta.name, "taylor_green");
        assert_eq!(back.meta.viscosity, 1e-3);
        assert!(back.data().iter().zip(f.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn rejects_corruption() {
        let bytes = encode(&tg());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Format(_))));
        assert!(decode(&bytes[..bytes.len() - 20]).is_err());
        let mut flipped = bytes.clone();
        let k = bytes.len() - 10;
        flipped[k] ^= 1;
        assert!(decode(&flipped).is_err());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tg.dlf");
        let f = tg();
        write_field(&path, &f).unwrap();
        assert_eq!(read_field(&path).unwrap().data(), f.data());
    }
}
