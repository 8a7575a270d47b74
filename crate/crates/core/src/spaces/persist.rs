//! On-disk bundle layout.
//!
//! ```text
//! manifest.json    manifest fields, per-file sha256, manifest digest
//! semantic.bin     u32 dim, u32 count, then per chunk (sorted by id):
//!                  u32 id length, id bytes, dim x f32 (all little endian)
//! lexical.json     postings, lengths, averages
//! structural.json  breadcrumb terms, modality buckets, cross-ref links
//! metadata.json    field/value -> doc ids, doc id -> chunk ids
//! chunks.json      chunk store (text, breadcrumb, node path)
//! ```
//!
//! All JSON is written with sorted keys so identical bundles produce
//! identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::{digest_bytes, Embedding, IndexBundle, IndexManifest, SemanticIndex, SpaceError};

pub const FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const SEMANTIC: &str = "semantic.bin";
const LEXICAL: &str = "lexical.json";
const STRUCTURAL: &str = "structural.json";
const METADATA: &str = "metadata.json";
const CHUNKS: &str = "chunks.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SpaceError + '_ {
    move |source| SpaceError::IoFailure {
        path: path.display().to_string(),
        source,
    }
}

/// Serialize through `Value`, whose maps are ordered, to get sorted keys.
fn sorted_json<T: Serialize>(value: &T) -> Vec<u8> {
    let v = serde_json::to_value(value).expect("index structures serialize to JSON");
    let mut out = serde_json::to_vec_pretty(&v).expect("JSON values serialize");
    out.push(b'\n');
    out
}

fn encode_semantic(index: &SemanticIndex) -> Vec<u8> {
    let dim = index.spec.dim;
    let mut out = Vec::with_capacity(8 + index.entries.len() * (dim * 4 + 16));
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(index.entries.len() as u32).to_le_bytes());
    for (id, emb) in &index.entries {
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
        for v in emb.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn decode_semantic(bytes: &[u8]) -> Result<(usize, BTreeMap<String, Embedding>), SpaceError> {
    let corrupt = |what: &str| SpaceError::CorruptIndex(format!("{SEMANTIC}: {what}"));
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], SpaceError> {
        let end = pos.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| corrupt("truncated"))?;
        let s = &bytes[pos..end];
        pos = end;
        Ok(s)
    };
    let read_u32 = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes"));
    let dim = read_u32(take(4)?) as usize;
    let count = read_u32(take(4)?) as usize;
    let mut entries = BTreeMap::new();
    for _ in 0..count {
        let len = read_u32(take(4)?) as usize;
        let id = std::str::from_utf8(take(len)?)
            .map_err(|_| corrupt("chunk id is not UTF-8"))?
            .to_string();
        let raw = take(dim.checked_mul(4).ok_or_else(|| corrupt("dim overflow"))?)?;
        let values = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        entries.insert(id, Embedding::from_stored(values));
    }
    if pos != bytes.len() {
        return Err(corrupt("trailing bytes"));
    }
    Ok((dim, entries))
}

fn manifest_digest(body: &serde_json::Map<String, Value>) -> String {
    let canonical = serde_json::to_vec(body).expect("JSON values serialize");
    digest_bytes([canonical.as_slice()])
}

/// Write `bundle` under `dir` (created if missing) and return the manifest
/// digest.
pub fn persist_bundle(bundle: &IndexBundle, dir: &Path) -> Result<String, SpaceError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let chunks: Vec<_> = bundle.chunks.values().collect();
    let files: Vec<(&str, Vec<u8>)> = vec![
        (SEMANTIC, encode_semantic(&bundle.semantic)),
        (LEXICAL, sorted_json(&bundle.lexical)),
        (STRUCTURAL, sorted_json(&bundle.structural)),
        (METADATA, sorted_json(&bundle.metadata)),
        (CHUNKS, sorted_json(&chunks)),
    ];
    let mut hashes = serde_json::Map::new();
    for (name, bytes) in &files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        hashes.insert(name.to_string(), Value::String(digest_bytes([bytes.as_slice()])));
    }
    let Value::Object(mut body) = serde_json::to_value(&bundle.manifest).expect("manifest serializes") else {
        unreachable!("manifest is a struct");
    };
    body.insert("files".into(), Value::Object(hashes));
    let digest = manifest_digest(&body);
    body.insert("digest".into(), Value::String(digest.clone()));
    let path = dir.join(MANIFEST);
    fs::write(&path, sorted_json(&Value::Object(body))).map_err(io_err(&path))?;
    Ok(digest)
}

fn parse_json<T: DeserializeOwned>(name: &str, bytes: &[u8]) -> Result<T, SpaceError> {
    serde_json::from_slice(bytes).map_err(|e| SpaceError::CorruptIndex(format!("{name}: {e}")))
}

/// Read a bundle written by [`persist_bundle`], verifying the format
/// version, manifest digest, per-file hashes and space coverage.
pub fn load_bundle(dir: &Path) -> Result<IndexBundle, SpaceError> {
    let path = dir.join(MANIFEST);
    let raw = fs::read(&path).map_err(io_err(&path))?;
    let mut body: serde_json::Map<String, Value> = parse_json(MANIFEST, &raw)?;
    let version = body.get("format_version").and_then(Value::as_u64).unwrap_or(0) as u32;
    if version != FORMAT_VERSION {
        return Err(SpaceError::VersionMismatch { found: version });
    }
    let stored = match body.remove("digest") {
        Some(Value::String(s)) => s,
        _ => return Err(SpaceError::CorruptIndex("manifest has no digest".into())),
    };
    if manifest_digest(&body) != stored {
        return Err(SpaceError::CorruptIndex("manifest digest mismatch".into()));
    }
    let hashes: BTreeMap<String, String> = match body.remove("files") {
        Some(v) => serde_json::from_value(v).map_err(|e| SpaceError::CorruptIndex(format!("files: {e}")))?,
        None => return Err(SpaceError::CorruptIndex("manifest has no file list".into())),
    };
    let manifest: IndexManifest = serde_json::from_value(Value::Object(body))
        .map_err(|e| SpaceError::CorruptIndex(format!("{MANIFEST}: {e}")))?;

    let read = |name: &str| -> Result<Vec<u8>, SpaceError> {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let expected = hashes
            .get(name)
            .ok_or_else(|| SpaceError::CorruptIndex(format!("{name} missing from manifest")))?;
        if &digest_bytes([bytes.as_slice()]) != expected {
            return Err(SpaceError::CorruptIndex(format!("{name} hash mismatch")));
        }
        Ok(bytes)
    };
    let (dim, entries) = decode_semantic(&read(SEMANTIC)?)?;
    if dim != manifest.embedder.dim {
        return Err(SpaceError::CorruptIndex(format!(
            "{SEMANTIC} dim {dim} != manifest dim {}",
            manifest.embedder.dim
        )));
    }
    let lexical = parse_json(LEXICAL, &read(LEXICAL)?)?;
    let structural = parse_json(STRUCTURAL, &read(STRUCTURAL)?)?;
    let metadata = parse_json(METADATA, &read(METADATA)?)?;
    let chunk_list: Vec<crate::doc::Chunk> = parse_json(CHUNKS, &read(CHUNKS)?)?;
    let bundle = IndexBundle {
        semantic: SemanticIndex {
            spec: manifest.embedder.clone(),
            entries,
        },
        lexical,
        structural,
        metadata,
        chunks: chunk_list.into_iter().map(|c| (c.chunk_id.clone(), c)).collect(),
        manifest,
    };
    bundle.check_coverage()?;
    Ok(bundle)
}
