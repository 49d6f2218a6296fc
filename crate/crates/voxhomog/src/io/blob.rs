//! Container for a JSON header followed by little-endian `f32` data:
//! 4-byte magic, `u64` LE header length, UTF-8 JSON header, then the
//! values.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn encode<H: Serialize>(magic: &[u8; 4], header: &H, values: &[f32]) -> Vec<u8> {
    let json = serde_json::to_vec(header).expect("plain data serializes");
    let mut out = Vec::with_capacity(12 + json.len() + 4 * values.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode<H: DeserializeOwned>(path: &Path, magic: &[u8; 4], bytes: &[u8]) -> Result<(H, Vec<f32>)> {
    if bytes.len() < 12 || &bytes[..4] != magic {
        return Err(Error::format(
            path,
            format!("missing {} magic", String::from_utf8_lossy(magic)),
        ));
    }
    let len = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let body = bytes
        .get(12..)
        .filter(|b| b.len() >= len)
        .ok_or_else(|| Error::format(path, "truncated header"))?;
    let header = serde_json::from_slice(&body[..len]).map_err(|e| Error::format(path, e))?;
    let data = &body[len..];
    if data.len() % 4 != 0 {
        return Err(Error::format(path, "data length is not a multiple of 4"));
    }
    let values = data
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok((header, values))
}
