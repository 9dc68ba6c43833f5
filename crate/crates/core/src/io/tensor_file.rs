//! RMTN binary tensor framing.
//!
//! Layout: `b"RMTN"`, version byte, `u8` rank, `rank` little-endian `u64`
//! dims, then `f32` little-endian data in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const TENSOR_MAGIC: &[u8; 4] = b"RMTN";
pub const TENSOR_VERSION: u8 = 1;

pub fn write_tensor<W: Write>(w: &mut W, t: &Tensor<f32>) -> Result<()> {
    if t.rank() > u8::MAX as usize {
        return Err(Error::invalid("tensor rank exceeds 255"));
    }
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&[TENSOR_VERSION, t.rank() as u8])?;
    for &d in t.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(t.len() * 4);
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<Tensor<f32>> {
    let mut head = [0u8; 6];
    r.read_exact(&mut head)?;
    if &head[..4] != TENSOR_MAGIC {
        return Err(Error::invalid("bad tensor magic"));
    }
    if head[4] != TENSOR_VERSION {
        return Err(Error::invalid(format!("unsupported tensor version {}", head[4])));
    }
    let rank = head[5] as usize;
    let mut dims = Vec::with_capacity(rank);
    let mut len: usize = 1;
    for _ in 0..rank {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        let d = usize::try_from(u64::from_le_bytes(b))
            .map_err(|_| Error::invalid("tensor dim overflows usize"))?;
        len = len
            .checked_mul(d)
            .ok_or_else(|| Error::invalid("tensor element count overflows"))?;
        dims.push(d);
    }
    let mut bytes = vec![0u8; len * 4];
    r.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Tensor::from_vec(&dims, data)
}

pub fn save_tensor(path: impl AsRef<Path>, t: &Tensor<f32>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_tensor(&mut f, t)?;
    f.flush()?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_tensor(&mut f)
}
