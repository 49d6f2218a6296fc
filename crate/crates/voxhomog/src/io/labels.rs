//! Label table: `sample_id,vf,E11,...,nu23,asymmetry`, one row per sample.
//! `vf` is the inclusion fraction of the voxel grid.

use std::path::Path;

use voxhomog_core::homog::COMPONENT_NAMES;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LabelRow {
    pub sample_id: usize,
    pub vf: f64,
    pub values: [f64; 12],
    pub asymmetry: f64,
}

pub fn header() -> Vec<String> {
    let mut h = vec!["sample_id".to_string(), "vf".to_string()];
    h.extend(COMPONENT_NAMES.iter().map(|s| s.to_string()));
    h.push("asymmetry".to_string());
    h
}

pub fn encode(rows: &[LabelRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header()).expect("in-memory write");
    for r in rows {
        let mut rec = vec![r.sample_id.to_string(), r.vf.to_string()];
        rec.extend(r.values.iter().map(f64::to_string));
        rec.push(r.asymmetry.to_string());
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<Vec<LabelRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    let h = r.headers().map_err(|e| Error::format(path, e))?;
    if h.iter().ne(header().iter().map(String::as_str)) {
        return Err(Error::format(path, "unexpected label header"));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::format(path, e))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| Error::format(path, format!("row {}: {e}", rows.len() + 1)))
        };
        let sample_id = rec[0]
            .parse()
            .map_err(|e| Error::format(path, format!("row {}: {e}", rows.len() + 1)))?;
        let mut values = [0.0; 12];
        for (c, v) in values.iter_mut().enumerate() {
            *v = num(2 + c)?;
        }
        rows.push(LabelRow {
            sample_id,
            vf: num(1)?,
            values,
            asymmetry: num(14)?,
        });
    }
    Ok(rows)
}

pub fn write_labels(path: &Path, rows: &[LabelRow]) -> Result<()> {
    super::write_bytes(path, &encode(rows))
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    decode(path, &super::read_bytes(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![
            LabelRow {
                sample_id: 3,
                vf: 0.1234567890123,
                values: core::array::from_fn(|i| 1.0 / (i as f64 + 3.0)),
                asymmetry: 7.1e-12,
            },
            LabelRow {
                sample_id: 4,
                vf: 0.0,
                values: [68.9; 12],
                asymmetry: 0.0,
            },
        ];
        let bytes = encode(&rows);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("sample_id,vf,E11,E22,E33,G23,G13,G12,nu21,nu31,nu12,nu32,nu13,nu23,asymmetry\n"));
        assert_eq!(decode(Path::new("l"), &bytes).unwrap(), rows);
        assert_eq!(encode(&decode(Path::new("l"), &bytes).unwrap()), bytes);
    }
}
