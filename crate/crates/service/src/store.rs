//! File-backed document and annotation store.
//!
//! Layout under the root directory:
//!
//! ```text
//! config.json              {"vocab": "<path>"}
//! docs/<id>.json           one Document
//! annotations/<id>.json    that document's annotations, as a JSON array
//! ```
//!
//! Every file is replaced atomically: the new contents go to a temporary
//! file that is flushed to disk and then renamed over the old one, and the
//! directory is synced. A crash at any point leaves either the old or the
//! new file, never a torn one; stray temporaries are removed on open.
//!
//! Writers are serialized per document. A mutation holds that document's
//! lock from validation until the file is durable, and readers of the
//! document wait for it, so nobody observes a write that was not persisted.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use cuiwb_core::corpus::{check_id, Annotation, AnnotationStatus, Corpus, CorpusError, Document};
use cuiwb_core::suggestion::auto_tag;
use cuiwb_core::vocabulary::VocabularyIndex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const TMP_SUFFIX: &str = ".tmp";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
    #[error("unknown annotation {0:?}")]
    UnknownAnnotation(String),
    #[error("annotation {id:?} belongs to document {owner:?} and cannot move")]
    DocumentChange { id: String, owner: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("corrupt store file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("store I/O error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct StoreConfig {
    vocab: PathBuf,
}

struct DocSlot {
    doc: Document,
    annotations: tokio::sync::RwLock<Vec<Annotation>>,
}

pub struct Store {
    root: PathBuf,
    docs: RwLock<BTreeMap<String, Arc<DocSlot>>>,
    /// Annotation id to owning document id, for id-addressed operations and
    /// store-wide id uniqueness.
    owners: Mutex<HashMap<String, String>>,
    create: tokio::sync::Mutex<()>,
}

/// Write `bytes` to `path` so that the file is either entirely old or
/// entirely new after a crash.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(TMP_SUFFIX);
    let tmp = PathBuf::from(tmp);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(dir) = path.parent() {
        File::open(dir)?.sync_all()?;
    }
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("store types serialize");
    out.push(b'\n');
    out
}

fn remove_temporaries(dir: &Path) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.to_string_lossy().ends_with(TMP_SUFFIX) {
            fs::remove_file(path)?;
        }
    }
    Ok(())
}

impl Store {
    /// Open (creating if needed) the store at `root` and record `vocab` as the
    /// vocabulary it is served with.
    pub fn open(root: &Path, vocab: &Path) -> Result<Self, StoreError> {
        for dir in ["docs", "annotations"] {
            fs::create_dir_all(root.join(dir))?;
            remove_temporaries(&root.join(dir))?;
        }
        remove_temporaries(root)?;
        let vocab = fs::canonicalize(vocab).unwrap_or_else(|_| vocab.to_path_buf());
        write_atomic(&root.join("config.json"), &to_json(&StoreConfig { vocab }))?;

        let mut docs = BTreeMap::new();
        let mut owners = HashMap::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(root.join("docs"))?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        paths.sort();
        for path in paths.into_iter().filter(|p| p.extension().is_some_and(|e| e == "json")) {
            let doc: Document = read_json(&path)?;
            let ann_path = root.join("annotations").join(format!("{}.json", doc.id));
            let annotations: Vec<Annotation> = if ann_path.exists() { read_json(&ann_path)? } else { Vec::new() };
            for a in &annotations {
                if owners.insert(a.id.clone(), doc.id.clone()).is_some() {
                    return Err(StoreError::Corrupt {
                        path: ann_path,
                        message: format!("annotation id {:?} appears twice in the store", a.id),
                    });
                }
            }
            docs.insert(
                doc.id.clone(),
                Arc::new(DocSlot {
                    doc,
                    annotations: tokio::sync::RwLock::new(annotations),
                }),
            );
        }
        Ok(Store {
            root: root.to_path_buf(),
            docs: RwLock::new(docs),
            owners: Mutex::new(owners),
            create: tokio::sync::Mutex::new(()),
        })
    }

    fn doc_path(&self, id: &str) -> PathBuf {
        self.root.join("docs").join(format!("{id}.json"))
    }

    fn annotations_path(&self, id: &str) -> PathBuf {
        self.root.join("annotations").join(format!("{id}.json"))
    }

    fn slot(&self, doc_id: &str) -> Result<Arc<DocSlot>, StoreError> {
        self.docs
            .read()
            .expect("lock poisoned")
            .get(doc_id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownDocument(doc_id.to_string()))
    }

    fn owner(&self, ann_id: &str) -> Result<String, StoreError> {
        self.owners
            .lock()
            .expect("lock poisoned")
            .get(ann_id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownAnnotation(ann_id.to_string()))
    }

    async fn persist(path: PathBuf, bytes: Vec<u8>) -> Result<(), StoreError> {
        tokio::task::spawn_blocking(move || write_atomic(&path, &bytes))
            .await
            .map_err(|e| io::Error::other(e.to_string()))??;
        Ok(())
    }

    /// Documents sorted by id.
    pub fn documents(&self) -> Vec<Document> {
        self.docs.read().expect("lock poisoned").values().map(|s| s.doc.clone()).collect()
    }

    pub fn document(&self, id: &str) -> Option<Document> {
        self.slot(id).ok().map(|s| s.doc.clone())
    }

    pub async fn annotations(&self, doc_id: &str) -> Result<Vec<Annotation>, StoreError> {
        let slot = self.slot(doc_id)?;
        let anns = slot.annotations.read().await;
        Ok(anns.clone())
    }

    /// All documents and annotations as a corpus.
    pub async fn snapshot(&self) -> Corpus {
        let slots: Vec<Arc<DocSlot>> = self.docs.read().expect("lock poisoned").values().cloned().collect();
        let mut documents = Vec::with_capacity(slots.len());
        let mut annotations = Vec::new();
        for slot in slots {
            documents.push(slot.doc.clone());
            annotations.extend(slot.annotations.read().await.iter().cloned());
        }
        Corpus::from_parts(documents, annotations).expect("store keeps ids unique")
    }

    pub async fn create_document(&self, doc: Document) -> Result<Document, StoreError> {
        check_id(&doc.id)?;
        let _guard = self.create.lock().await;
        if self.docs.read().expect("lock poisoned").contains_key(&doc.id) {
            return Err(CorpusError::DuplicateDocument(doc.id).into());
        }
        // Annotations first: a document file on disk always has its
        // annotation file next to it.
        Self::persist(self.annotations_path(&doc.id), to_json(&Vec::<Annotation>::new())).await?;
        Self::persist(self.doc_path(&doc.id), to_json(&doc)).await?;
        self.docs.write().expect("lock poisoned").insert(
            doc.id.clone(),
            Arc::new(DocSlot {
                doc: doc.clone(),
                annotations: tokio::sync::RwLock::new(Vec::new()),
            }),
        );
        Ok(doc)
    }

    /// Apply `change` to one document's annotations, validated through the
    /// corpus rules, and persist the result before publishing it.
    async fn mutate<T>(
        &self,
        doc_id: &str,
        change: impl FnOnce(&mut Corpus) -> Result<T, StoreError>,
    ) -> Result<T, StoreError> {
        let slot = self.slot(doc_id)?;
        let mut current = slot.annotations.write().await;
        let mut corpus = Corpus::from_parts(vec![slot.doc.clone()], current.clone())?;
        let out = change(&mut corpus)?;
        let updated = corpus.annotations().to_vec();
        Self::persist(self.annotations_path(doc_id), to_json(&updated)).await?;
        *current = updated;
        Ok(out)
    }

    /// Reserve `ids` store-wide, run `f`, and release the reservations that
    /// did not end up stored.
    async fn with_reserved<T>(
        &self,
        doc_id: &str,
        ids: &[String],
        f: impl std::future::Future<Output = Result<T, StoreError>>,
    ) -> Result<T, StoreError> {
        {
            let mut owners = self.owners.lock().expect("lock poisoned");
            if let Some(taken) = ids.iter().find(|id| owners.contains_key(*id)) {
                return Err(CorpusError::DuplicateAnnotation(format!("id {taken:?} already exists")).into());
            }
            for id in ids {
                owners.insert(id.clone(), doc_id.to_string());
            }
        }
        let result = f.await;
        if result.is_err() {
            let mut owners = self.owners.lock().expect("lock poisoned");
            for id in ids {
                owners.remove(id);
            }
        }
        result
    }

    pub async fn add_annotation(&self, ann: Annotation) -> Result<Annotation, StoreError> {
        let doc_id = ann.doc_id.clone();
        self.slot(&doc_id)?;
        let ids = [ann.id.clone()];
        self.with_reserved(&doc_id, &ids, async {
            self.mutate(&doc_id, |c| {
                c.add_annotation(ann.clone())?;
                Ok(ann)
            })
            .await
        })
        .await
    }

    /// Replace an annotation. It may not move to another document.
    pub async fn update_annotation(&self, ann: Annotation) -> Result<Annotation, StoreError> {
        let doc_id = self.owner(&ann.id)?;
        if ann.doc_id != doc_id {
            return Err(StoreError::DocumentChange {
                id: ann.id,
                owner: doc_id,
            });
        }
        self.mutate(&doc_id, |c| {
            c.update_annotation(ann.clone()).map_err(|e| match e {
                CorpusError::UnknownAnnotation(id) => StoreError::UnknownAnnotation(id),
                e => e.into(),
            })?;
            Ok(ann)
        })
        .await
    }

    pub async fn annotation(&self, id: &str) -> Result<Annotation, StoreError> {
        let doc_id = self.owner(id)?;
        let anns = self.annotations(&doc_id).await?;
        anns.into_iter()
            .find(|a| a.id == id)
            .ok_or_else(|| StoreError::UnknownAnnotation(id.to_string()))
    }

    pub async fn remove_annotation(&self, id: &str) -> Result<Annotation, StoreError> {
        let doc_id = self.owner(id)?;
        let removed = self
            .mutate(&doc_id, |c| {
                c.remove_annotation(id)
                    .map_err(|_| StoreError::UnknownAnnotation(id.to_string()))
            })
            .await?;
        self.owners.lock().expect("lock poisoned").remove(id);
        Ok(removed)
    }

    pub async fn set_status(&self, id: &str, status: AnnotationStatus) -> Result<Annotation, StoreError> {
        let doc_id = self.owner(id)?;
        self.mutate(&doc_id, |c| match c.set_status(id, status) {
            Ok(a) => Ok(a.clone()),
            Err(CorpusError::UnknownAnnotation(id)) => Err(StoreError::UnknownAnnotation(id)),
            Err(e) => Err(e.into()),
        })
        .await
    }

    /// Store auto-tag proposals for a document and return the new ones.
    /// Pending proposals block their own spans, so repeating the call adds
    /// nothing.
    pub async fn autotag(
        &self,
        doc_id: &str,
        idx: &VocabularyIndex,
        now: DateTime<Utc>,
    ) -> Result<Vec<Annotation>, StoreError> {
        let slot = self.slot(doc_id)?;
        // Compute under the document lock so the proposal set cannot go
        // stale before it is stored.
        let mut current = slot.annotations.write().await;
        let proposals = auto_tag(idx, &slot.doc, &current, now);
        if proposals.is_empty() {
            return Ok(proposals);
        }
        let ids: Vec<String> = proposals.iter().map(|p| p.id.clone()).collect();
        let path = self.annotations_path(doc_id);
        self.with_reserved(doc_id, &ids, async {
            let mut corpus = Corpus::from_parts(vec![slot.doc.clone()], current.clone())?;
            for p in &proposals {
                corpus.add_annotation(p.clone())?;
            }
            let updated = corpus.annotations().to_vec();
            Self::persist(path, to_json(&updated)).await?;
            *current = updated;
            Ok(proposals)
        })
        .await
    }
}
