//! Checkpoint layout: magic `HOPK`, header length (u64 LE), JSON header, then
//! the payload of little-endian blobs. The header is the model's JSON with
//! every numeric array moved into the payload and replaced by a reference
//! `{"$blob": i, "kind": "f64" | "u64" | "c64", "len": n}`.

use super::OperatorModel;
use crate::NetError;
use serde_json::{json, Map, Number, Value};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"HOPK";

enum Blob {
    F64(Vec<f64>),
    U64(Vec<u64>),
    C64(Vec<f64>),
}

fn numeric_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) if n.is_f64() => n.as_f64(),
        _ => None,
    }
}

fn extract(v: Value, blobs: &mut Vec<Blob>) -> Value {
    match v {
        Value::Array(items) if !items.is_empty() => {
            if items.iter().all(|x| numeric_f64(x).is_some()) {
                let vals: Vec<f64> = items.iter().map(|x| numeric_f64(x).unwrap()).collect();
                return reference(blobs, Blob::F64(vals), items.len(), "f64");
            }
            if items.iter().all(|x| matches!(x, Value::Number(n) if n.is_u64())) {
                let vals: Vec<u64> = items.iter().map(|x| x.as_u64().unwrap()).collect();
                return reference(blobs, Blob::U64(vals), items.len(), "u64");
            }
            let complex = items.iter().all(|x| match x {
                Value::Array(p) => p.len() == 2 && p.iter().all(|c| numeric_f64(c).is_some()),
                _ => false,
            });
            if complex {
                let vals: Vec<f64> = items.iter().flat_map(|x| x.as_array().unwrap().iter().map(|c| numeric_f64(c).unwrap())).collect();
                return reference(blobs, Blob::C64(vals), items.len(), "c64");
            }
            Value::Array(items.into_iter().map(|x| extract(x, blobs)).collect())
        }
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, x)| (k, extract(x, blobs))).collect()),
        other => other,
    }
}

fn reference(blobs: &mut Vec<Blob>, blob: Blob, len: usize, kind: &str) -> Value {
    blobs.push(blob);
    json!({ "$blob": blobs.len() - 1, "kind": kind, "len": len })
}

fn float(x: f64) -> Result<Value, NetError> {
    Number::from_f64(x).map(Value::Number).ok_or(NetError::NonFinite(x))
}

fn restore(v: Value, blobs: &[Vec<u8>]) -> Result<Value, NetError> {
    match v {
        Value::Object(map) if map.contains_key("$blob") => {
            let i = map["$blob"].as_u64().ok_or_else(|| NetError::Format("bad blob index".into()))? as usize;
            let len = map["len"].as_u64().ok_or_else(|| NetError::Format("bad blob length".into()))? as usize;
            let bytes = blobs.get(i).ok_or_else(|| NetError::Format(format!("missing blob {i}")))?;
            let words: Vec<[u8; 8]> = bytes.chunks_exact(8).map(|c| c.try_into().unwrap()).collect();
            let kind = map["kind"].as_str().unwrap_or("");
            let expected = if kind == "c64" { 2 * len } else { len };
            if words.len() != expected {
                return Err(NetError::Format(format!("blob {i} has {} words, expected {expected}", words.len())));
            }
            match kind {
                "f64" => Ok(Value::Array(words.iter().map(|w| float(f64::from_le_bytes(*w))).collect::<Result<_, _>>()?)),
                "u64" => Ok(Value::Array(words.iter().map(|w| Value::from(u64::from_le_bytes(*w))).collect())),
                "c64" => Ok(Value::Array(
                    words
                        .chunks_exact(2)
                        .map(|p| Ok(Value::Array(vec![float(f64::from_le_bytes(p[0]))?, float(f64::from_le_bytes(p[1]))?])))
                        .collect::<Result<_, NetError>>()?,
                )),
                k => Err(NetError::Format(format!("unknown blob kind {k:?}"))),
            }
        }
        Value::Object(map) => {
            let mut out = Map::new();
            for (k, x) in map {
                out.insert(k, restore(x, blobs)?);
            }
            Ok(Value::Object(out))
        }
        Value::Array(items) => Ok(Value::Array(items.into_iter().map(|x| restore(x, blobs)).collect::<Result<_, _>>()?)),
        other => Ok(other),
    }
}

pub fn write_checkpoint(model: &OperatorModel, w: impl Write) -> Result<(), NetError> {
    write_checkpoint_tagged(model, None, w)
}

/// Like [`write_checkpoint`], with an optional free-form tag stored in the
/// header (the CLI stores its config hash there).
pub fn write_checkpoint_tagged(model: &OperatorModel, tag: Option<&str>, mut w: impl Write) -> Result<(), NetError> {
    let mut blobs = Vec::new();
    let header = extract(serde_json::to_value(model)?, &mut blobs);
    let mut header = json!({ "format": 1, "model": header, "blobs": blobs.len() });
    if let Some(t) = tag {
        header["tag"] = Value::from(t);
    }
    let header = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;
    for b in &blobs {
        let words: Vec<u64> = match b {
            Blob::F64(v) | Blob::C64(v) => v.iter().map(|x| x.to_bits()).collect(),
            Blob::U64(v) => v.clone(),
        };
        w.write_all(&(words.len() as u64).to_le_bytes())?;
        let bytes: Vec<u8> = words.iter().flat_map(|x| x.to_le_bytes()).collect();
        w.write_all(&bytes)?;
    }
    Ok(())
}

pub fn read_checkpoint(r: impl Read) -> Result<OperatorModel, NetError> {
    Ok(read_checkpoint_tagged(r)?.0)
}

pub fn read_checkpoint_tagged(mut r: impl Read) -> Result<(OperatorModel, Option<String>), NetError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NetError::Format("not a model checkpoint".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let mut header = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut header)?;
    let header: Value = serde_json::from_slice(&header)?;
    let n_blobs = header["blobs"].as_u64().ok_or_else(|| NetError::Format("header without blob count".into()))?;
    let mut blobs = Vec::with_capacity(n_blobs as usize);
    for _ in 0..n_blobs {
        r.read_exact(&mut len)?;
        let mut bytes = vec![0u8; 8 * u64::from_le_bytes(len) as usize];
        r.read_exact(&mut bytes)?;
        blobs.push(bytes);
    }
    let model = restore(header["model"].clone(), &blobs)?;
    let tag = header.get("tag").and_then(Value::as_str).map(str::to_string);
    Ok((serde_json::from_value(model)?, tag))
}

pub fn save_checkpoint(model: &OperatorModel, path: &Path) -> Result<(), NetError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(model, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<OperatorModel, NetError> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}
