//! Model container: `b"UFND"`, major and minor format version (u16 little
//! endian each), then the bincode-encoded [`Pipeline`].
//!
//! Readers accept any minor version of their own major version.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::pipeline::Pipeline;

pub const MAGIC: &[u8; 4] = b"UFND";
pub const FORMAT_MAJOR: u16 = 1;
pub const FORMAT_MINOR: u16 = 0;
const HEADER_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormatVersion {
    pub major: u16,
    pub minor: u16,
}

pub fn encode_model(pipeline: &Pipeline) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_MAJOR.to_le_bytes());
    out.extend_from_slice(&FORMAT_MINOR.to_le_bytes());
    bincode::serialize_into(&mut out, pipeline).map_err(|e| Error::Model(format!("encoding model: {e}")))?;
    Ok(out)
}

/// Checks magic bytes and version without decoding the body.
pub fn read_header(bytes: &[u8]) -> Result<FormatVersion> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Model(
            "not a model file: magic bytes `UFND` missing at offset 0".into(),
        ));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Model("truncated model file: header ends before the format version".into()));
    }
    let version = FormatVersion {
        major: u16::from_le_bytes([bytes[4], bytes[5]]),
        minor: u16::from_le_bytes([bytes[6], bytes[7]]),
    };
    if version.major != FORMAT_MAJOR {
        return Err(Error::Model(format!(
            "model format version {}.{} is not supported by this build (reads {}.x)",
            version.major, version.minor, FORMAT_MAJOR
        )));
    }
    Ok(version)
}

pub fn decode_model(bytes: &[u8]) -> Result<Pipeline> {
    read_header(bytes)?;
    let body = &bytes[HEADER_LEN..];
    let mut cursor = body;
    let pipeline: Pipeline = bincode::deserialize_from(&mut cursor).map_err(|e| match *e {
        bincode::ErrorKind::Io(ref io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::Model("truncated model file: body ends early".into())
        }
        other => Error::Model(format!("corrupt model body: {other}")),
    })?;
    if !cursor.is_empty() {
        return Err(Error::Model(format!("{} trailing bytes after model body", cursor.len())));
    }
    Ok(pipeline)
}

pub fn save_model(path: impl AsRef<Path>, pipeline: &Pipeline) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_model(pipeline)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    f.sync_all().map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Pipeline> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_model(&bytes).map_err(|e| match e {
        Error::Model(m) => Error::Model(format!("{}: {m}", path.display())),
        other => other,
    })
}
