//! Phase grid files: a 16-byte header (`PHGR`, `u16` version, `u16` n,
//! 8 reserved zero bytes, all LE) followed by the voxels in x-fastest
//! order. Version 1 stores one byte per voxel; version 2 stores runs as
//! (`u8` phase, `u32` LE length) pairs. The edge length is not stored;
//! grids are read back with a 1.0 mm edge.

use std::path::Path;

use serde::{Deserialize, Serialize};
use voxhomog_core::voxel::PhaseGrid;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PHGR";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridEncoding {
    #[default]
    Raw,
    Rle,
}

impl GridEncoding {
    fn version(self) -> u16 {
        match self {
            GridEncoding::Raw => 1,
            GridEncoding::Rle => 2,
        }
    }
}

pub fn encode(grid: &PhaseGrid, encoding: GridEncoding) -> Result<Vec<u8>> {
    let n = u16::try_from(grid.n()).map_err(|_| Error::config("grid.n", "does not fit in 16 bits"))?;
    let mut out = Vec::with_capacity(16 + grid.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&encoding.version().to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&[0; 8]);
    match encoding {
        GridEncoding::Raw => out.extend_from_slice(grid.values()),
        GridEncoding::Rle => {
            for run in grid.values().chunk_by(|a, b| a == b) {
                for piece in run.chunks(u32::MAX as usize) {
                    out.push(piece[0]);
                    out.extend_from_slice(&(piece.len() as u32).to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<PhaseGrid> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(Error::format(path, "not a PHGR grid file"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    let n = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let body = &bytes[16..];
    let total = n * n * n;
    let values = match version {
        1 => {
            if body.len() != total {
                return Err(Error::format(path, format!("expected {total} voxels, found {}", body.len())));
            }
            body.to_vec()
        }
        2 => {
            if body.len() % 5 != 0 {
                return Err(Error::format(path, "truncated run"));
            }
            let mut v = Vec::with_capacity(total);
            for run in body.chunks_exact(5) {
                let len = u32::from_le_bytes(run[1..5].try_into().expect("4 bytes")) as usize;
                if v.len() + len > total {
                    return Err(Error::format(path, "runs exceed the grid size"));
                }
                v.resize(v.len() + len, run[0]);
            }
            if v.len() != total {
                return Err(Error::format(path, format!("runs cover {} of {total} voxels", v.len())));
            }
            v
        }
        other => return Err(Error::format(path, format!("unknown grid version {other}"))),
    };
    PhaseGrid::new(n, 1.0, values).map_err(|e| Error::format(path, e))
}

pub fn write_grid(path: &Path, grid: &PhaseGrid, encoding: GridEncoding) -> Result<()> {
    super::write_bytes(path, &encode(grid, encoding)?)
}

pub fn read_grid(path: &Path) -> Result<PhaseGrid> {
    decode(path, &super::read_bytes(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PhaseGrid {
        let mut g = PhaseGrid::filled(5, 1.0, 0).unwrap();
        g.set(1, 2, 3, 1);
        g.set(2, 2, 3, 1);
        g.set(4, 4, 4, 1);
        g
    }

    #[test]
    fn raw_layout() {
        let g = sample();
        let b = encode(&g, GridEncoding::Raw).unwrap();
        assert_eq!(&b[..8], b"PHGR\x01\x00\x05\x00");
        assert_eq!(b.len(), 16 + 125);
        assert_eq!(b[16 + 1 + 5 * (2 + 5 * 3)], 1);
        assert_eq!(decode(Path::new("g"), &b).unwrap(), g);
    }

    #[test]
    fn rle_round_trip() {
        let g = sample();
        let b = encode(&g, GridEncoding::Rle).unwrap();
        assert_eq!(u16::from_le_bytes([b[4], b[5]]), 2);
        // zeros, two ones, zeros, one final one.
        assert_eq!(b.len(), 16 + 4 * 5);
        assert_eq!(decode(Path::new("g"), &b).unwrap(), g);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let g = sample();
        let mut b = encode(&g, GridEncoding::Raw).unwrap();
        assert!(decode(Path::new("g"), &b[..20]).is_err());
        b[4] = 9;
        assert!(decode(Path::new("g"), &b).is_err());
        let mut r = encode(&g, GridEncoding::Rle).unwrap();
        r.truncate(r.len() - 5);
        assert!(decode(Path::new("g"), &r).is_err());
    }
}
