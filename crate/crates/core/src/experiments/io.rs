//! The `T3R1` binary tensor format: magic `T3R1`, three little-endian `u32`
//! dimensions `n1 n2 n3`, then the entries as little-endian `f64` in
//! slice-major, row-major-within-slice order (the in-memory layout).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::t_algebra::{Dims, Tensor3};

pub const MAGIC: [u8; 4] = *b"T3R1";
const HEADER_LEN: usize = 16;

pub fn encode_tensor(t: &Tensor3) -> Result<Vec<u8>> {
    let d = t.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * t.data().len());
    out.extend_from_slice(&MAGIC);
    for n in [d.n1, d.n2, d.n3] {
        let n = u32::try_from(n).map_err(|_| Error::ShapeOverflow(d))?;
        out.extend_from_slice(&n.to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor3> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(Error::BadMagic(bytes[..4].try_into().unwrap()));
        }
        return Err(Error::TruncatedFile {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let word =
        |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let dims = Dims::new(word(0), word(1), word(2));
    let expected = dims
        .n1
        .checked_mul(dims.n2)
        .and_then(|s| s.checked_mul(dims.n3))
        .and_then(|s| s.checked_mul(8))
        .and_then(|s| s.checked_add(HEADER_LEN))
        .ok_or(Error::ShapeOverflow(dims))?;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::shape(format!(
            "{} trailing bytes after a {dims} tensor",
            bytes.len() - expected
        )));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor3::new(dims, data)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor3) -> Result<()> {
    let bytes = encode_tensor(t)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor3> {
    decode_tensor(&fs::read(path)?)
}
