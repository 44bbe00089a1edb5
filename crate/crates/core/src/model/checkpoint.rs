//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  "UEDPCKPT"
//! version  u32      1
//! task     u8       0 = language model, 1 = classifier
//! vocab    u64
//! embed    u64
//! context  u64
//! hidden   u64
//! classes  u64
//! len      u64      number of parameters, must match the dims
//! theta    len × f64
//! ```

use std::io::Write;
use std::path::Path;

use super::{Dims, ModelError, ModelParams, Task};

const MAGIC: &[u8; 8] = b"UEDPCKPT";
const VERSION: u32 = 1;

pub fn encode(params: &ModelParams) -> Vec<u8> {
    let d = &params.dims;
    let mut out = Vec::with_capacity(61 + 8 * params.theta.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match d.task {
        Task::LanguageModel => 0,
        Task::Classifier => 1,
    });
    for v in [d.vocab, d.embed, d.context, d.hidden, d.classes, params.theta.len()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for x in &params.theta {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ModelParams, ModelError> {
    let bad = |m: &str| ModelError::Checkpoint(m.to_string());
    let mut cur = bytes;
    let mut take = |n: usize| -> Result<&[u8], ModelError> {
        if cur.len() < n {
            return Err(bad("truncated"));
        }
        let (head, rest) = cur.split_at(n);
        cur = rest;
        Ok(head)
    };
    if take(8)? != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(ModelError::Checkpoint(format!("unsupported version {version}")));
    }
    let task = match take(1)?[0] {
        0 => Task::LanguageModel,
        1 => Task::Classifier,
        t => return Err(ModelError::Checkpoint(format!("unknown task tag {t}"))),
    };
    let mut fields = [0usize; 6];
    for f in &mut fields {
        *f = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    }
    let [vocab, embed, context, hidden, classes, len] = fields;
    let dims = Dims {
        task,
        vocab,
        embed,
        context,
        hidden,
        classes,
    };
    if dims.num_params() != len {
        return Err(ModelError::Checkpoint(format!(
            "parameter count {len} does not match dims ({})",
            dims.num_params()
        )));
    }
    let body = take(len.checked_mul(8).ok_or_else(|| bad("length overflow"))?)?;
    let theta = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if !cur.is_empty() {
        return Err(bad("trailing bytes"));
    }
    Ok(ModelParams { dims, theta })
}

pub fn save(params: &ModelParams, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(params))?;
    f.sync_all()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<ModelParams, ModelError> {
    decode(&std::fs::read(path)?)
}
