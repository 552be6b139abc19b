use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Annotation, Corpus, Document};

/// The corpus JSON document: `{"documents": [...], "annotations": [...]}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusFile {
    pub documents: Vec<Document>,
    pub annotations: Vec<Annotation>,
}

#[derive(Debug, Error)]
#[error("malformed corpus file at line {line}, column {column}: {message}")]
pub struct MalformedCorpusFile {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl From<&Corpus> for CorpusFile {
    fn from(c: &Corpus) -> Self {
        CorpusFile {
            documents: c.documents().to_vec(),
            annotations: c.annotations().to_vec(),
        }
    }
}

/// Serialize a corpus as pretty-printed JSON.
pub fn export_corpus(corpus: &Corpus) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&CorpusFile::from(corpus)).expect("corpus serializes");
    out.push(b'\n');
    out
}

/// Parse corpus JSON. Structural problems and duplicate ids are errors;
/// annotation-level problems (bad offsets, empty labels) are left for the
/// lints to report.
pub fn import_corpus(bytes: &[u8]) -> Result<Corpus, MalformedCorpusFile> {
    let file: CorpusFile = serde_json::from_slice(bytes).map_err(|e| MalformedCorpusFile {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Corpus::from_parts(file.documents, file.annotations).map_err(|e| MalformedCorpusFile {
        line: 0,
        column: 0,
        message: e.to_string(),
    })
}
