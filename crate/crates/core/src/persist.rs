//! Versioned JSON envelopes for trained models.
//!
//! Every model file is a single JSON object
//! `{"format": <kind>, "version": <n>, "model": {...}}`. Floats are written
//! in shortest round-trip form and parsed with correct rounding, so a
//! save/load cycle reproduces every parameter bit for bit.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Serialize)]
struct EnvelopeRef<'a, T> {
    format: &'a str,
    version: u32,
    model: &'a T,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Deserialize)]
struct Envelope<T> {
    model: T,
}

pub(crate) fn to_string<T: Serialize>(format: &str, version: u32, model: &T) -> Result<String> {
    Ok(serde_json::to_string(&EnvelopeRef {
        format,
        version,
        model,
    })?)
}

pub(crate) fn from_str<T: DeserializeOwned>(text: &str, format: &str, version: u32) -> Result<T> {
    let header: Header = serde_json::from_str(text)?;
    if header.format != format {
        return Err(Error::InvalidParameter(format!(
            "expected a `{format}` model, found `{}`",
            header.format
        )));
    }
    if header.version != version {
        return Err(Error::FormatVersion {
            found: header.version,
            expected: version,
        });
    }
    let envelope: Envelope<T> = serde_json::from_str(text)?;
    Ok(envelope.model)
}

pub(crate) fn save<T: Serialize>(path: &Path, format: &str, version: u32, model: &T) -> Result<()> {
    let text = to_string(format, version, model)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn load<T: DeserializeOwned>(path: &Path, format: &str, version: u32) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text, format, version)
}

/// Reads only the `format` tag of a model file.
pub fn model_format(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_str(&text)?;
    Ok(header.format)
}
