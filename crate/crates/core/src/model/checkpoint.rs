//! Checkpoint layout: the 8-byte magic `ADCNN\0v1`, one UTF-8 header line of
//! space-separated `key=value` fields ending in `\n`, then every parameter
//! as a little-endian f64 in storage order (per stage conv weights and
//! bias, then dense weights and bias).

use std::collections::BTreeMap;
use std::path::Path;

use super::{build_network, Network, NetworkConfig, TrainingMeta};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ADCNN\0v1";

const HEADER_KEYS: [&str; 10] = [
    "input_size",
    "kernel_size",
    "base_filters",
    "filter_growth",
    "pool",
    "target_map",
    "classes",
    "epoch",
    "val_cost",
    "params",
];

fn bad<T>(offset: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Format { offset: offset as u64, message: message.into() })
}

pub fn encode_checkpoint<T: Scalar>(network: &Network<T>) -> Vec<u8> {
    let c = network.config();
    let val_cost = network.meta.val_cost.map_or_else(|| "none".to_string(), |v| v.to_string());
    let header = format!(
        "input_size={} kernel_size={} base_filters={} filter_growth={} pool={} target_map={} classes={} epoch={} val_cost={} params={}\n",
        c.input_size,
        c.kernel_size,
        c.base_filters,
        c.filter_growth,
        c.pool,
        c.target_map,
        c.classes,
        network.meta.epoch,
        val_cost,
        network.body().num_params(),
    );
    let mut out = CHECKPOINT_MAGIC.to_vec();
    out.extend_from_slice(header.as_bytes());
    for p in network.body().params() {
        for &v in p.data() {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<Network<T>> {
    if bytes.len() < CHECKPOINT_MAGIC.len() {
        return bad(bytes.len(), "file shorter than the magic");
    }
    if &bytes[..5] != b"ADCNN" || bytes[5] != 0 {
        return bad(0, "bad checkpoint magic");
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return bad(6, format!("unsupported checkpoint version {:?}", String::from_utf8_lossy(&bytes[6..8])));
    }
    let start = CHECKPOINT_MAGIC.len();
    let Some(nl) = bytes[start..].iter().position(|&b| b == b'\n') else {
        return bad(bytes.len(), "header line not terminated");
    };
    let Ok(header) = std::str::from_utf8(&bytes[start..start + nl]) else {
        return bad(start, "header is not UTF-8");
    };
    let mut fields = BTreeMap::new();
    for kv in header.split(' ') {
        let Some((k, v)) = kv.split_once('=') else {
            return bad(start, format!("malformed header field {kv:?}"));
        };
        fields.insert(k, v);
    }
    if fields.len() != HEADER_KEYS.len() || HEADER_KEYS.iter().any(|k| !fields.contains_key(k)) {
        return bad(start, format!("header fields {:?} do not match {HEADER_KEYS:?}", fields.keys()));
    }
    let num = |k: &str| -> Result<usize> {
        fields[k].parse().or_else(|_| bad(start, format!("header field {k} is not an integer")))
    };
    let config = NetworkConfig {
        input_size: num("input_size")?,
        kernel_size: num("kernel_size")?,
        base_filters: num("base_filters")?,
        filter_growth: num("filter_growth")?,
        pool: num("pool")?,
        target_map: num("target_map")?,
        classes: num("classes")?,
    };
    config.validate().or_else(|e| bad(start, format!("invalid network config: {e}")))?;
    let val_cost = match fields["val_cost"] {
        "none" => None,
        v => Some(v.parse::<f64>().or_else(|_| bad(start, "header field val_cost is not a number"))?),
    };
    let meta = TrainingMeta { epoch: num("epoch")?, val_cost };

    let expected = config.parameter_count()?;
    if num("params")? != expected {
        return bad(start, format!("header declares {} parameters, config implies {expected}", num("params")?));
    }
    let payload_at = start + nl + 1;
    let payload = &bytes[payload_at..];
    if payload.len() != expected * 8 {
        return bad(
            payload_at + payload.len().min(expected * 8),
            format!("parameter payload is {} bytes, expected {}", payload.len(), expected * 8),
        );
    }
    let values: Vec<T> = payload
        .chunks_exact(8)
        .map(|b| T::lit(f64::from_le_bytes(b.try_into().expect("8-byte chunk"))))
        .collect();
    let mut network = build_network(&config, 0)?;
    network.load_flat(&values)?;
    network.meta = meta;
    Ok(network)
}

pub fn save_checkpoint<T: Scalar>(network: &Network<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_checkpoint(network))?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<Network<T>> {
    decode_checkpoint(&std::fs::read(path)?)
}
