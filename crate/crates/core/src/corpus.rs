//! Loading a directory of `.ccd.json` files and indexing it.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::doc::{chunk_tree, parse_ccd, Chunk, ChunkingPolicy, DocError, DocumentTree};
use crate::gateway::Embedder;
use crate::spaces::{build_indexes, digest_bytes, IndexBundle, SpaceError};

pub const CCD_SUFFIX: &str = ".ccd.json";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no .ccd.json files in {0}")]
    NoFiles(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Document {
        path: PathBuf,
        #[source]
        source: DocError,
    },
    #[error("duplicate doc_id `{0}`")]
    DuplicateDocument(String),
    #[error(transparent)]
    Index(#[from] SpaceError),
}

/// Parsed documents plus the digest of their raw bytes.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub files: Vec<PathBuf>,
    pub trees: Vec<DocumentTree>,
    pub corpus_hash: String,
}

impl Corpus {
    pub fn chunks(&self, policy: &ChunkingPolicy) -> Result<Vec<Chunk>, CorpusError> {
        let mut out = Vec::new();
        for (path, tree) in self.files.iter().zip(&self.trees) {
            out.extend(chunk_tree(tree, policy).map_err(|source| CorpusError::Document {
                path: path.clone(),
                source,
            })?);
        }
        Ok(out)
    }
}

/// `.ccd.json` files directly inside `dir`, sorted by name.
pub fn list_corpus(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let is_ccd = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with(CCD_SUFFIX));
        if is_ccd && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CorpusError::NoFiles(dir.to_path_buf()));
    }
    Ok(files)
}

/// Read and parse every document in `dir`. The corpus hash covers file
/// names and raw bytes in sorted order.
pub fn load_corpus(dir: &Path) -> Result<Corpus, CorpusError> {
    let files = list_corpus(dir)?;
    let mut trees = Vec::with_capacity(files.len());
    let mut raw = Vec::with_capacity(files.len());
    for path in &files {
        let bytes = fs::read(path).map_err(|source| CorpusError::Io {
            path: path.clone(),
            source,
        })?;
        let tree = parse_ccd(&bytes).map_err(|source| CorpusError::Document {
            path: path.clone(),
            source,
        })?;
        if trees.iter().any(|t: &DocumentTree| t.doc_id() == tree.doc_id()) {
            return Err(CorpusError::DuplicateDocument(tree.doc_id().to_string()));
        }
        trees.push(tree);
        raw.push(bytes);
    }
    let names: Vec<Vec<u8>> = files
        .iter()
        .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default().into_bytes())
        .collect();
    let corpus_hash = digest_bytes(names.iter().zip(&raw).flat_map(|(n, b)| [n.as_slice(), b.as_slice()]));
    Ok(Corpus {
        files,
        trees,
        corpus_hash,
    })
}

/// Chunk and index a loaded corpus.
pub fn index_corpus(corpus: &Corpus, policy: &ChunkingPolicy, embedder: &dyn Embedder) -> Result<IndexBundle, CorpusError> {
    let chunks = corpus.chunks(policy)?;
    let mut bundle = build_indexes(&chunks, &corpus.trees, embedder)?;
    bundle.manifest.corpus_hash = corpus.corpus_hash.clone();
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::MockEmbedder;

    const DOC: &str = r#"{"metadata":{"doc_id":"a"},"root":{"id":"r","kind":"section","children":[{"id":"p","kind":"paragraph","text":"hello world"}]}}"#;

    #[test]
    fn empty_dir() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let err = load_corpus(dir.path()).unwrap_err();
        assert!(err.to_string().contains("no .ccd.json files"));
    }

    #[test]
    fn load_and_index() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.ccd.json"), DOC).unwrap();
        let c = load_corpus(dir.path()).unwrap();
        assert_eq!(c.trees.len(), 1);
        let b = index_corpus(&c, &ChunkingPolicy::default(), &MockEmbedder::new(32)).unwrap();
        assert_eq!(b.manifest.corpus_hash, c.corpus_hash);
        assert_eq!(b.chunks.len(), 1);
        let again = load_corpus(dir.path()).unwrap();
        assert_eq!(again.corpus_hash, c.corpus_hash);
    }

    #[test]
    fn duplicate_doc_ids() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.ccd.json"), DOC).unwrap();
        fs::write(dir.path().join("b.ccd.json"), DOC).unwrap();
        assert!(matches!(load_corpus(dir.path()), Err(CorpusError::DuplicateDocument(_))));
    }

    #[test]
    fn parse_error_names_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("bad.ccd.json"), "{").unwrap();
        let err = load_corpus(dir.path()).unwrap_err();
        assert!(err.to_string().contains("bad.ccd.json"));
    }
}
