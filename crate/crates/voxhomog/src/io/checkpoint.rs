//! Checkpoint files (`VXCK` container). The data section holds the flat
//! parameters in layout order (conv stages first, each stage's weights
//! before its bias), followed by the Adam first and second moments when
//! the header records an optimizer state.

use std::path::Path;

use serde::{Deserialize, Serialize};
use voxhomog_core::nn::{AdamConfig, AdamState, Checkpoint, LabelScaler, NetworkArch, TrainLog};

use super::blob;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"VXCK";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    arch: NetworkArch,
    n_params: usize,
    trainable: Vec<bool>,
    adam: Option<AdamHeader>,
    scaler: Option<LabelScaler>,
    log: Option<TrainLog>,
    seed: u64,
    base_checkpoint: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdamHeader {
    config: AdamConfig,
    step: u64,
}

pub fn encode(ck: &Checkpoint) -> Vec<u8> {
    let header = Header {
        version: VERSION,
        arch: ck.arch.clone(),
        n_params: ck.params.len(),
        trainable: ck.trainable.clone(),
        adam: ck.adam.as_ref().map(|a| AdamHeader {
            config: a.config,
            step: a.step,
        }),
        scaler: ck.scaler,
        log: ck.log.clone(),
        seed: ck.seed,
        base_checkpoint: ck.base_checkpoint.clone(),
    };
    let mut data = ck.params.clone();
    if let Some(a) = &ck.adam {
        data.extend_from_slice(&a.m);
        data.extend_from_slice(&a.v);
    }
    blob::encode(MAGIC, &header, &data)
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<Checkpoint> {
    let (h, mut data): (Header, Vec<f32>) = blob::decode(path, MAGIC, bytes)?;
    if h.version != VERSION {
        return Err(Error::format(path, format!("unsupported checkpoint version {}", h.version)));
    }
    let n = h.n_params;
    let expected = if h.adam.is_some() { 3 * n } else { n };
    if data.len() != expected {
        return Err(Error::format(path, format!("expected {expected} values, found {}", data.len())));
    }
    let adam = h.adam.map(|a| {
        let v = data.split_off(2 * n);
        let m = data.split_off(n);
        AdamState {
            config: a.config,
            step: a.step,
            m,
            v,
        }
    });
    let ck = Checkpoint {
        arch: h.arch,
        params: data,
        trainable: h.trainable,
        adam,
        scaler: h.scaler,
        log: h.log,
        seed: h.seed,
        base_checkpoint: h.base_checkpoint,
    };
    ck.network().map_err(|e| Error::format(path, e))?;
    Ok(ck)
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    super::write_bytes(path, &encode(ck))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode(path, &super::read_bytes(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use voxhomog_core::nn::{Activation, Network, Pooling, Preset};

    fn checkpoint(with_adam: bool) -> Checkpoint {
        let arch = Preset::Desk.arch(33, &Pooling::Every, Activation::Sigmoid).unwrap();
        let net = Network::<f32>::new(arch.clone(), 3).unwrap();
        let n = net.n_params();
        Checkpoint {
            arch,
            params: net.params().to_vec(),
            trainable: net.trainable().to_vec(),
            adam: with_adam.then(|| AdamState {
                config: AdamConfig::default(),
                step: 17,
                m: (0..n).map(|i| i as f32 * 1e-3).collect(),
                v: (0..n).map(|i| i as f32 * 1e-6).collect(),
            }),
            scaler: None,
            log: None,
            seed: 3,
            base_checkpoint: Some("abc".into()),
        }
    }

    #[test]
    fn round_trip_with_and_without_optimizer() {
        for with_adam in [false, true] {
            let ck = checkpoint(with_adam);
            let bytes = encode(&ck);
            let back = decode(Path::new("c"), &bytes).unwrap();
            assert_eq!(back, ck);
            assert_eq!(encode(&back), bytes);
        }
    }

    #[test]
    fn parameter_blob_follows_the_header() {
        let ck = checkpoint(false);
        let bytes = encode(&ck);
        let len = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let first = f32::from_le_bytes(bytes[12 + len..16 + len].try_into().unwrap());
        assert_eq!(first, ck.params[0]);
        assert_eq!(bytes.len(), 12 + len + 4 * ck.params.len());
        assert!(decode(Path::new("c"), &bytes[..bytes.len() - 4]).is_err());
    }
}
