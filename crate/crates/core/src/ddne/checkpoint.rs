//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes   "DDNECKPT"
//! version      u32       1
//! header_len   u32       length of the JSON header in bytes
//! header       UTF-8     {"n": <nodes>, "hyper": {...}}
//! tensors      u32       number of tensors
//! per tensor:
//!   name_len   u32
//!   name       UTF-8     e.g. "fwd.w_z", "dec.0.b"
//!   rows       u32
//!   cols       u32
//!   data       rows*cols f64 (IEEE 754 binary64, LE), row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DdneHyper, DdneModel, ModelError};
use crate::diffcomp::Matrix;

const MAGIC: &[u8; 8] = b"DDNECKPT";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    n: usize,
    hyper: DdneHyper,
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(model: &DdneModel, mut out: W) -> Result<(), ModelError> {
    let header = serde_json::to_vec(&Header {
        n: model.node_count(),
        hyper: model.hyper().clone(),
    })
    .map_err(|e| bad(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u32).to_le_bytes())?;
    out.write_all(&header)?;
    let tensors = model.tensors();
    out.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, m) in tensors {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(m.rows() as u32).to_le_bytes())?;
        out.write_all(&(m.cols() as u32).to_le_bytes())?;
        for x in m.as_slice() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, ModelError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<DdneModel, ModelError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a DDNE checkpoint"));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let len = read_u32(&mut input)? as usize;
    let mut header = vec![0u8; len];
    input.read_exact(&mut header)?;
    let header: Header = serde_json::from_slice(&header).map_err(|e| bad(e.to_string()))?;

    let count = read_u32(&mut input)? as usize;
    let expected = DdneModel::zeros(header.n, header.hyper.clone())?;
    let names: Vec<String> = expected.tensors().into_iter().map(|(n, _)| n).collect();
    if count != names.len() {
        return Err(bad(format!("expected {} tensors, found {count}", names.len())));
    }
    let mut tensors = Vec::with_capacity(count);
    for expected_name in &names {
        let name_len = read_u32(&mut input)? as usize;
        let mut name = vec![0u8; name_len];
        input.read_exact(&mut name)?;
        if name != expected_name.as_bytes() {
            return Err(bad(format!(
                "expected tensor {expected_name}, found {}",
                String::from_utf8_lossy(&name)
            )));
        }
        let rows = read_u32(&mut input)? as usize;
        let cols = read_u32(&mut input)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut b = [0u8; 8];
        for _ in 0..rows * cols {
            input.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        tensors.push(Matrix::from_vec(rows, cols, data).expect("sized"));
    }
    DdneModel::from_parts(header.n, header.hyper, tensors)
}

pub fn save_checkpoint(model: &DdneModel, path: &Path) -> Result<(), ModelError> {
    write_checkpoint(model, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint(path: &Path) -> Result<DdneModel, ModelError> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> DdneModel {
        DdneModel::init(
            7,
            DdneHyper {
                hidden_dim: 3,
                decoder_hidden: vec![5, 4],
                learning_rate: 0.013,
                seed: 21,
                ..DdneHyper::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        let mut again = Vec::new();
        write_checkpoint(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn layout_prefix() {
        let mut buf = Vec::new();
        write_checkpoint(&model(), &mut buf).unwrap();
        assert_eq!(&buf[..8], b"DDNECKPT");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        let hlen = u32::from_le_bytes(buf[12..16].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&buf[16..16 + hlen]).unwrap();
        assert_eq!(header["n"], 7);
        let count = u32::from_le_bytes(buf[16 + hlen..20 + hlen].try_into().unwrap());
        assert_eq!(count as usize, 18 + 2 * 3);
    }

    #[test]
    fn corrupt_input_rejected() {
        assert!(matches!(
            read_checkpoint(&b"NOTACKPTxxxx"[..]),
            Err(ModelError::Checkpoint(_))
        ));
        let mut buf = Vec::new();
        write_checkpoint(&model(), &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_checkpoint(buf.as_slice()).is_err());
    }
}
