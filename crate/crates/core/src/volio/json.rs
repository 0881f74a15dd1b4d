use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// A value exportable as a schema-versioned JSON document.
pub trait Artifact: Serialize + DeserializeOwned {
    const KIND: &'static str;
}

#[derive(Serialize)]
struct DocumentOut<'a, T> {
    schema_version: u32,
    kind: &'a str,
    data: &'a T,
}

#[derive(Deserialize)]
struct DocumentIn<T> {
    data: T,
}

#[derive(Deserialize)]
struct Header {
    schema_version: u32,
    kind: String,
}

pub fn to_json_string<A: Artifact>(artifact: &A) -> Result<String> {
    Ok(serde_json::to_string(&DocumentOut {
        schema_version: SCHEMA_VERSION,
        kind: A::KIND,
        data: artifact,
    })?)
}

pub fn from_json_str<A: Artifact>(text: &str) -> Result<A> {
    let header: Header = serde_json::from_str(text)?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: header.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    if header.kind != A::KIND {
        return Err(Error::ArtifactKind {
            found: header.kind,
            expected: A::KIND.to_string(),
        });
    }
    let doc: DocumentIn<A> = serde_json::from_str(text)?;
    Ok(doc.data)
}

pub fn export_json<A: Artifact>(artifact: &A, path: &Path) -> Result<()> {
    let text = to_json_string(artifact)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn import_json<A: Artifact>(path: &Path) -> Result<A> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json_str(&text)
}
