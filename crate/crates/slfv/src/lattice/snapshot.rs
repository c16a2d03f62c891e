//! Binary field snapshots.
//!
//! Layout (little-endian): magic `SLFV`, version `u32`, `d: u32`, `n: u32`,
//! `L: f64`, `count: u64`, then `count` cell values as `f64` in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use super::{GridFn, TorusGrid};
use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"SLFV";
pub const SNAPSHOT_VERSION: u32 = 1;

pub fn encode_snapshot(f: &GridFn) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 8 * f.values.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(f.grid.d() as u32).to_le_bytes());
    out.extend_from_slice(&(f.grid.n() as u32).to_le_bytes());
    out.extend_from_slice(&f.grid.side().to_le_bytes());
    out.extend_from_slice(&(f.values.len() as u64).to_le_bytes());
    for v in &f.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_snapshot(path: &Path, f: &GridFn) -> Result<()> {
    let bytes = encode_snapshot(f);
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<GridFn> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_snapshot(&bytes).map_err(|reason| Error::Format { path: path.into(), reason })
}

pub fn decode_snapshot(bytes: &[u8]) -> std::result::Result<GridFn, String> {
    if bytes.len() < 32 || &bytes[0..4] != SNAPSHOT_MAGIC {
        return Err("missing SLFV header".into());
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != SNAPSHOT_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let d = u32_at(8) as usize;
    let n = u32_at(12) as usize;
    let side = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let count = u64::from_le_bytes(bytes[24..32].try_into().unwrap()) as usize;
    let grid = TorusGrid::new(d, n, side).map_err(|e| e.to_string())?;
    if count != grid.cells() || bytes.len() != 32 + 8 * count {
        return Err(format!("expected {} values, header says {count}, payload has {} bytes", grid.cells(), bytes.len() - 32));
    }
    let values = bytes[32..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(GridFn { grid, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_bitwise() {
        let g = TorusGrid::new(2, 5, 2.5).unwrap();
        let f = GridFn::from_fn(g, |x| (x[0] * 3.7).sin() * x[1]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        write_snapshot(&p, &f).unwrap();
        let back = read_snapshot(&p).unwrap();
        assert_eq!(back.grid, g);
        for (a, b) in back.values.iter().zip(&f.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let bytes = encode_snapshot(&f);
        assert!(decode_snapshot(&bytes[..bytes.len() - 1]).is_err());
    }
}
