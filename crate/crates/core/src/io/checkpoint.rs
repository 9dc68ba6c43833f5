//! RMCK checkpoint container.
//!
//! Layout (all integers little-endian):
//! `b"RMCK"`, version `u8`, 32-byte SHA-256 digest of the config text,
//! `u32` length + config text, `u32` length + metadata text (`key=value` lines),
//! `u32` tensor count, then per tensor a `u16` name length, the UTF-8 name and an
//! RMTN-framed tensor.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::tensor_file::{read_tensor, write_tensor};
use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RMCK";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    /// Canonical model/feature configuration; its digest guards compatibility.
    pub config: String,
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

pub fn config_digest(config: &str) -> [u8; 32] {
    Sha256::digest(config.as_bytes()).into()
}

impl Checkpoint {
    pub fn new(config: impl Into<String>) -> Self {
        Self { config: config.into(), ..Default::default() }
    }

    pub fn digest(&self) -> [u8; 32] {
        config_digest(&self.config)
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor<f32>) {
        self.tensors.push((name.into(), t));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor<f32>> {
        self.get(name)
            .ok_or_else(|| Error::invalid(format!("checkpoint is missing tensor '{name}'")))
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&[CHECKPOINT_VERSION])?;
        w.write_all(&self.digest())?;
        write_text(w, &self.config)?;
        let meta: String = self.meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        write_text(w, &meta)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &self.tensors {
            let bytes = name.as_bytes();
            let len = u16::try_from(bytes.len()).map_err(|_| Error::invalid("tensor name too long"))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(bytes)?;
            write_tensor(w, t)?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic[..4] != CHECKPOINT_MAGIC {
            return Err(Error::invalid("bad checkpoint magic"));
        }
        if magic[4] != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!("unsupported checkpoint version {}", magic[4])));
        }
        let mut digest = [0u8; 32];
        r.read_exact(&mut digest)?;
        let config = read_text(r)?;
        if config_digest(&config) != digest {
            return Err(Error::invalid("checkpoint config digest mismatch"));
        }
        let mut meta = BTreeMap::new();
        for line in read_text(r)?.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("bad checkpoint metadata line '{line}'")))?;
            meta.insert(k.to_string(), v.to_string());
        }
        let count = read_u32(r)?;
        let mut tensors = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let mut len = [0u8; 2];
            r.read_exact(&mut len)?;
            let mut name = vec![0u8; u16::from_le_bytes(len) as usize];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| Error::invalid("tensor name is not UTF-8"))?;
            tensors.push((name, read_tensor(r)?));
        }
        Ok(Self { config, meta, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        // write-then-rename so an interrupted run never leaves a torn checkpoint
        let path = path.as_ref();
        let tmp = path.with_extension("rmck.tmp");
        {
            let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
            self.write(&mut f)?;
            f.flush()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read(&mut f)
    }
}

fn write_text<W: Write>(w: &mut W, s: &str) -> Result<()> {
    let len = u32::try_from(s.len()).map_err(|_| Error::invalid("text section too long"))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_text<R: Read>(r: &mut R) -> Result<String> {
    let mut bytes = vec![0u8; read_u32(r)? as usize];
    r.read_exact(&mut bytes)?;
    String::from_utf8(bytes).map_err(|_| Error::invalid("checkpoint text is not UTF-8"))
}
