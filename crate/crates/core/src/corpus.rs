//! Passages, queries, embeddings and the deterministic tune/test split.
//!
//! All collections are kept sorted by id so that nothing downstream depends
//! on the order records appeared in the input files.
//!
//! File formats (one JSON object per line):
//!
//! ```text
//! passages.jsonl     {"id": str, "text": str}
//! annotations.jsonl  {"passage_id": str, "entities": [str, ...]}
//! queries.jsonl      {"id": str, "text": str, "gold_chain": [str, ...], "entities": [str, ...]?}
//! embeddings.jsonl   {"id": str, "vector": [float, ...]}
//! ```
//!
//! Embeddings may also be stored in a little-endian binary block: the magic
//! `CFEMB1`, a `u32` dimension, a `u64` record count, then per record a `u16`
//! id length, the id bytes and `dimension` `f32` values.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use md5::{Digest, Md5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Magic bytes opening a binary embedding file.
pub const EMBEDDING_MAGIC: &[u8; 6] = b"CFEMB1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub entity_mentions: Vec<String>,
}

/// An immutable, id-sorted passage collection.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    passages: Vec<Passage>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn from_passages(mut passages: Vec<Passage>) -> Result<Self> {
        passages.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = passages.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::DuplicateId {
                kind: "passage",
                id: w[0].id.clone(),
            });
        }
        let index = passages.iter().enumerate().map(|(i, p)| (p.id.clone(), i)).collect();
        Ok(Self { passages, index })
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Passage> {
        self.index.get(id).map(|&i| &self.passages[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn iter(&self) -> impl Iterator<Item = &Passage> {
        self.passages.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
    /// Supporting passages in hop order; the last element is the last hop.
    pub gold_chain: Vec<String>,
    /// Entity surface forms mentioned by the query, used to seed PPR.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entities: Vec<String>,
}

impl Query {
    pub fn hop_count(&self) -> usize {
        self.gold_chain.len()
    }

    pub fn last_hop(&self) -> Option<&str> {
        self.gold_chain.last().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuerySet {
    queries: Vec<Query>,
}

impl QuerySet {
    /// Builds a query set, checking id uniqueness and that every gold id
    /// resolves in `corpus`.
    pub fn new(mut queries: Vec<Query>, corpus: &Corpus) -> Result<Self> {
        queries.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = queries.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::DuplicateId {
                kind: "query",
                id: w[0].id.clone(),
            });
        }
        for q in &queries {
            if q.gold_chain.is_empty() {
                return Err(Error::EmptyGoldChain(q.id.clone()));
            }
            if let Some(missing) = q.gold_chain.iter().find(|g| !corpus.contains(g)) {
                return Err(Error::UnknownPassage {
                    query: q.id.clone(),
                    passage: missing.clone(),
                });
            }
        }
        Ok(Self { queries })
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn iter(&self) -> impl Iterator<Item = &Query> {
        self.queries.iter()
    }

    pub fn get(&self, id: &str) -> Option<&Query> {
        self.queries
            .binary_search_by(|q| q.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.queries[i])
    }

    /// Keeps only the queries for which `keep` returns true.
    pub fn filtered(&self, mut keep: impl FnMut(&Query) -> bool) -> QuerySet {
        QuerySet {
            queries: self.queries.iter().filter(|q| keep(q)).cloned().collect(),
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct PassageRecord {
    id: String,
    text: String,
}

#[derive(Debug, Deserialize, Serialize)]
struct AnnotationRecord {
    passage_id: String,
    entities: Vec<String>,
}

#[derive(Debug, Deserialize, Serialize)]
struct EmbeddingRecord {
    id: String,
    vector: Vec<f64>,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

/// Loads passages and attaches entity annotations to them.
pub fn load_corpus(passages_path: impl AsRef<Path>, annotations_path: impl AsRef<Path>) -> Result<Corpus> {
    let passages_path = passages_path.as_ref();
    let annotations_path = annotations_path.as_ref();
    let records: Vec<(usize, PassageRecord)> = parse_jsonl(passages_path, &read_to_string(passages_path)?)?;
    let mut passages: Vec<Passage> = records
        .into_iter()
        .map(|(_, r)| Passage {
            id: r.id,
            text: r.text,
            entity_mentions: Vec::new(),
        })
        .collect();
    // Duplicates are reported before annotations are attached.
    let corpus = Corpus::from_passages(std::mem::take(&mut passages))?;
    let mut passages = corpus.passages;
    let index = corpus.index;

    let annotations: Vec<(usize, AnnotationRecord)> =
        parse_jsonl(annotations_path, &read_to_string(annotations_path)?)?;
    for (line, ann) in annotations {
        let Some(&i) = index.get(&ann.passage_id) else {
            return Err(Error::Parse {
                path: annotations_path.to_path_buf(),
                line,
                message: format!("annotation for unknown passage {:?}", ann.passage_id),
            });
        };
        passages[i].entity_mentions.extend(ann.entities);
    }
    Ok(Corpus { passages, index })
}

pub fn load_queries(path: impl AsRef<Path>, corpus: &Corpus) -> Result<QuerySet> {
    let path = path.as_ref();
    let records: Vec<(usize, Query)> = parse_jsonl(path, &read_to_string(path)?)?;
    QuerySet::new(records.into_iter().map(|(_, q)| q).collect(), corpus)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_lines<T: Serialize>(path: &Path, records: impl Iterator<Item = T>) -> Result<()> {
    let mut w = create(path)?;
    for rec in records {
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_passages(path: impl AsRef<Path>, corpus: &Corpus) -> Result<()> {
    write_lines(
        path.as_ref(),
        corpus.iter().map(|p| PassageRecord {
            id: p.id.clone(),
            text: p.text.clone(),
        }),
    )
}

/// Writes one annotation line per passage that has mentions.
pub fn write_annotations(path: impl AsRef<Path>, corpus: &Corpus) -> Result<()> {
    write_lines(
        path.as_ref(),
        corpus
            .iter()
            .filter(|p| !p.entity_mentions.is_empty())
            .map(|p| AnnotationRecord {
                passage_id: p.id.clone(),
                entities: p.entity_mentions.clone(),
            }),
    )
}

pub fn write_queries(path: impl AsRef<Path>, queries: &QuerySet) -> Result<()> {
    write_lines(path.as_ref(), queries.iter())
}

/// Unit-normalized vectors keyed by id, stored densely in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dimension: usize,
    ids: Vec<String>,
    data: Vec<f64>,
    index: HashMap<String, usize>,
}

impl EmbeddingStore {
    /// Builds a store, normalizing every vector to unit L2 norm.
    pub fn from_vectors(
        vectors: impl IntoIterator<Item = (String, Vec<f64>)>,
        expected_dimension: Option<usize>,
    ) -> Result<Self> {
        let mut items: Vec<(String, Vec<f64>)> = vectors.into_iter().collect();
        items.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = items.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateId {
                kind: "embedding",
                id: w[0].0.clone(),
            });
        }
        let dimension = match (expected_dimension, items.first()) {
            (Some(d), _) => d,
            (None, Some((_, v))) => v.len(),
            (None, None) => 0,
        };
        let mut data = Vec::with_capacity(items.len() * dimension);
        let mut ids = Vec::with_capacity(items.len());
        for (id, v) in items {
            if v.len() != dimension {
                return Err(Error::DimensionMismatch {
                    id,
                    expected: dimension,
                    found: v.len(),
                });
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::ZeroVector(id));
            }
            data.extend(v.iter().map(|x| x / norm));
            ids.push(id);
        }
        let index = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Ok(Self {
            dimension,
            ids,
            data,
            index,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), self.row(i)))
    }

    /// Restricts the store to the given ids, skipping ones it does not hold.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> EmbeddingStore {
        let mut keep: Vec<usize> = ids.into_iter().filter_map(|id| self.index.get(id).copied()).collect();
        keep.sort_unstable();
        keep.dedup();
        let ids: Vec<String> = keep.iter().map(|&i| self.ids[i].clone()).collect();
        let data = keep.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        let index = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        EmbeddingStore {
            dimension: self.dimension,
            ids,
            data,
            index,
        }
    }
}

/// Loads an embedding file, detecting the binary block by its magic bytes.
pub fn load_embeddings(path: impl AsRef<Path>, expected_dimension: Option<usize>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(EMBEDDING_MAGIC) {
        let vectors = decode_binary(&bytes)?;
        return EmbeddingStore::from_vectors(vectors, expected_dimension);
    }
    let text = String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?;
    let records: Vec<(usize, EmbeddingRecord)> = parse_jsonl(path, &text)?;
    EmbeddingStore::from_vectors(records.into_iter().map(|(_, r)| (r.id, r.vector)), expected_dimension)
}

fn decode_binary(bytes: &[u8]) -> Result<Vec<(String, Vec<f64>)>> {
    struct Cursor<'a> {
        buf: &'a [u8],
        pos: usize,
    }
    impl<'a> Cursor<'a> {
        fn take(&mut self, n: usize) -> Result<&'a [u8]> {
            let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
            let end = end.ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
            let s = &self.buf[self.pos..end];
            self.pos = end;
            Ok(s)
        }
    }
    let mut c = Cursor {
        buf: bytes,
        pos: EMBEDDING_MAGIC.len(),
    };
    let dim = u32::from_le_bytes(c.take(4)?.try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(c.take(8)?.try_into().unwrap());
    let mut out = Vec::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(c.take(2)?.try_into().unwrap()) as usize;
        let id = std::str::from_utf8(c.take(len)?)
            .map_err(|e| Error::Format(format!("id is not utf-8: {e}")))?
            .to_string();
        let raw = c.take(dim * 4)?;
        let v = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        out.push((id, v));
    }
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Ok(out)
}

pub fn write_embeddings_jsonl(path: impl AsRef<Path>, store: &EmbeddingStore) -> Result<()> {
    write_lines(
        path.as_ref(),
        store.iter().map(|(id, v)| EmbeddingRecord {
            id: id.to_string(),
            vector: v.to_vec(),
        }),
    )
}

pub fn write_embeddings_binary(path: impl AsRef<Path>, store: &EmbeddingStore) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(18 + store.len() * (store.dimension * 4 + 18));
    buf.extend_from_slice(EMBEDDING_MAGIC);
    buf.extend_from_slice(&(store.dimension as u32).to_le_bytes());
    buf.extend_from_slice(&(store.len() as u64).to_le_bytes());
    for (id, v) in store.iter() {
        let len = u16::try_from(id.len()).map_err(|_| Error::Format(format!("id {id:?} longer than 65535 bytes")))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
        for x in v {
            buf.extend_from_slice(&(*x as f32).to_le_bytes());
        }
    }
    let mut w = create(path)?;
    w.write_all(&buf).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Where a dataset's files live.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub passages: PathBuf,
    pub annotations: PathBuf,
    pub queries: PathBuf,
    pub passage_embeddings: PathBuf,
    /// Keyed by query id.
    pub query_embeddings: PathBuf,
    /// Keyed by entity surface form; needed only for synonym linking.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_embeddings: Option<PathBuf>,
}

impl DatasetPaths {
    /// The standard file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            passages: dir.join("passages.jsonl"),
            annotations: dir.join("annotations.jsonl"),
            queries: dir.join("queries.jsonl"),
            passage_embeddings: dir.join("passage_embeddings.bin"),
            query_embeddings: dir.join("query_embeddings.bin"),
            entity_embeddings: Some(dir.join("entity_embeddings.bin")),
        }
    }
}

/// Everything a retrieval run needs, loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub corpus: Corpus,
    pub queries: QuerySet,
    pub passage_embeddings: EmbeddingStore,
    pub query_embeddings: EmbeddingStore,
    pub entity_embeddings: Option<EmbeddingStore>,
}

impl Dataset {
    pub fn load(paths: &DatasetPaths) -> Result<Self> {
        let corpus = load_corpus(&paths.passages, &paths.annotations)?;
        let queries = load_queries(&paths.queries, &corpus)?;
        let passage_embeddings = load_embeddings(&paths.passage_embeddings, None)?;
        let query_embeddings = load_embeddings(&paths.query_embeddings, Some(passage_embeddings.dimension()))?;
        let entity_embeddings = match &paths.entity_embeddings {
            Some(p) if p.exists() => Some(load_embeddings(p, None)?),
            _ => None,
        };
        Ok(Self {
            corpus,
            queries,
            passage_embeddings,
            query_embeddings,
            entity_embeddings,
        })
    }

    /// Writes the dataset in the standard layout, embeddings in binary.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<DatasetPaths> {
        let paths = DatasetPaths::in_dir(dir);
        write_passages(&paths.passages, &self.corpus)?;
        write_annotations(&paths.annotations, &self.corpus)?;
        write_queries(&paths.queries, &self.queries)?;
        write_embeddings_binary(&paths.passage_embeddings, &self.passage_embeddings)?;
        write_embeddings_binary(&paths.query_embeddings, &self.query_embeddings)?;
        if let (Some(store), Some(p)) = (&self.entity_embeddings, &paths.entity_embeddings) {
            write_embeddings_binary(p, store)?;
        }
        Ok(DatasetPaths {
            entity_embeddings: self.entity_embeddings.as_ref().and(paths.entity_embeddings.clone()),
            ..paths
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Tune,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Tune => "tune",
            Split::Test => "test",
        })
    }
}

pub type SplitAssignment = BTreeMap<String, Split>;

/// Position of an id in `[0, 1)`: the first eight MD5 bytes read as a
/// big-endian integer, divided by 2^64.
pub fn md5_unit(id: &str) -> f64 {
    let digest = Md5::digest(id.as_bytes());
    let head = u64::from_be_bytes(digest[..8].try_into().unwrap());
    head as f64 / 18_446_744_073_709_551_616.0
}

pub fn split_of(id: &str, tune_fraction: f64) -> Split {
    if md5_unit(id) < tune_fraction {
        Split::Tune
    } else {
        Split::Test
    }
}

pub fn md5_split(queries: &QuerySet, tune_fraction: f64) -> SplitAssignment {
    queries
        .iter()
        .map(|q| (q.id.clone(), split_of(&q.id, tune_fraction)))
        .collect()
}
