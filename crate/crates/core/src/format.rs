//! Little-endian binary container shared by sample and feature files.
//!
//! ```text
//! magic    [u8; 4]   "SSIG" (samples) or "SFEA" (feature)
//! version  u32       1
//! scalar   f64       sample rate in Hz (SSIG) or leading eigenvalue (SFEA)
//! count    u64       number of f64 values that follow
//! values   count x f64
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;
pub const SAMPLES_MAGIC: [u8; 4] = *b"SSIG";
pub const FEATURE_MAGIC: [u8; 4] = *b"SFEA";
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub scalar: f64,
    pub values: Vec<f64>,
}

pub fn encode(magic: [u8; 4], container: &Container) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * container.values.len());
    out.extend_from_slice(&magic);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&container.scalar.to_le_bytes());
    out.extend_from_slice(&(container.values.len() as u64).to_le_bytes());
    for v in &container.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(magic: [u8; 4], bytes: &[u8]) -> Result<Container> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedHeader);
    }
    let found: [u8; 4] = bytes[0..4].try_into().unwrap();
    if found != magic {
        return Err(Error::BadMagic {
            expected: magic,
            found,
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::VersionMismatch {
            expected: VERSION,
            found: version,
        });
    }
    let scalar = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let declared = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let payload = &bytes[HEADER_LEN..];
    let available = (payload.len() / 8) as u64;
    if declared > available {
        return Err(Error::TruncatedPayload { declared, available });
    }
    let used = declared as usize * 8;
    if payload.len() > used {
        return Err(Error::TrailingBytes(payload.len() - used));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Container { scalar, values })
}

pub fn write_file(path: &Path, magic: [u8; 4], container: &Container) -> Result<()> {
    fs::write(path, encode(magic, container))?;
    Ok(())
}

pub fn read_file(path: &Path, magic: [u8; 4]) -> Result<Container> {
    decode(magic, &fs::read(path)?)
}
