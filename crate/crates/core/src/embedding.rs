//! Embedding tables: response id to unit vector, loaded from line-delimited JSON or fetched
//! from a remote encoder service.
//!
//! File format, one record per line, with an optional leading meta line:
//!
//! ```text
//! {"meta": {"dim": 768, "model": "all-mpnet-base-v2"}}
//! {"id": "h1", "vector": [0.01, -0.2, ...]}
//! {"id": "h1#synopsis", "vector": [...]}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::thread;
use std::time::Duration;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::kernels::{KernelError, KernelKind, KernelSpec, UnitVector};

/// Norm deviation above which a renormalized vector is reported.
pub const RENORMALIZE_WARN_THRESHOLD: f64 = 1e-3;

pub const REMOTE_PROTOCOL_VERSION: u32 = 1;

/// Table key under which the synopsis embedding of `response_id` is stored.
pub fn synopsis_key(response_id: &str) -> String {
    format!("{response_id}#synopsis")
}

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("embedding '{id}' has dimension {found}, expected {expected}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("embedding '{id}' is a zero or non-finite vector")]
    ZeroVector { id: String },
    #[error("duplicate embedding id '{id}'")]
    DuplicateId { id: String },
    #[error("remote request failed with status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("remote returned {received} vectors for {sent} texts")]
    CountMismatch { sent: usize, received: usize },
    #[error("remote returned id '{received}' where '{expected}' was expected")]
    IdMismatch { expected: String, received: String },
    #[error("remote protocol version {0} is not supported")]
    Version(u32),
    #[error("remote request failed after {attempts} attempts: {message}")]
    Exhausted { attempts: u32, message: String },
    #[error("batch size must be at least 1")]
    ZeroBatch,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: Option<String>,
    /// True once every vector has been brought to unit norm.
    pub normalized: bool,
}

#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dimension: usize,
    entries: IndexMap<String, UnitVector>,
    pub provenance: Provenance,
    /// Ids whose stored norm deviated from 1 by more than [`RENORMALIZE_WARN_THRESHOLD`].
    pub renormalized: Vec<String>,
}

impl EmbeddingTable {
    pub fn new(model: Option<String>) -> Self {
        EmbeddingTable {
            provenance: Provenance {
                model,
                normalized: true,
            },
            ..Default::default()
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&UnitVector> {
        self.entries.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &UnitVector)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Normalizes and stores a raw vector. The first insert fixes the table dimension.
    pub fn insert_raw(&mut self, id: &str, raw: Vec<f64>) -> Result<(), EmbeddingError> {
        if self.entries.contains_key(id) {
            return Err(EmbeddingError::DuplicateId { id: id.to_string() });
        }
        if self.entries.is_empty() && self.dimension == 0 {
            self.dimension = raw.len();
        }
        if raw.len() != self.dimension {
            return Err(EmbeddingError::DimensionMismatch {
                id: id.to_string(),
                expected: self.dimension,
                found: raw.len(),
            });
        }
        let (unit, norm) = UnitVector::normalize(raw).map_err(|e| match e {
            KernelError::Degenerate => EmbeddingError::ZeroVector { id: id.to_string() },
            other => unreachable!("normalize only fails on degenerate input: {other}"),
        })?;
        if (norm - 1.0).abs() > RENORMALIZE_WARN_THRESHOLD {
            log::warn!("embedding '{id}' had norm {norm:.6}; renormalized");
            self.renormalized.push(id.to_string());
        }
        self.entries.insert(id.to_string(), unit);
        Ok(())
    }

    /// Writes the table with a meta line first.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let meta = serde_json::json!({
            "meta": { "dim": self.dimension, "model": self.provenance.model }
        });
        writeln!(w, "{meta}")?;
        for (id, v) in &self.entries {
            let rec = serde_json::json!({ "id": id, "vector": v.as_slice() });
            writeln!(w, "{rec}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
        let path = path.as_ref();
        let io_err = |source| EmbeddingError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut file = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
        self.write_jsonl(&mut file).map_err(io_err)?;
        file.flush().map_err(io_err)
    }
}

#[derive(Deserialize)]
struct MetaLine {
    meta: Meta,
}

#[derive(Deserialize)]
struct Meta {
    dim: Option<usize>,
    model: Option<String>,
}

#[derive(Deserialize)]
struct VectorRecord {
    id: String,
    vector: Vec<f64>,
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable, EmbeddingError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_embeddings(BufReader::new(file))
}

pub fn parse_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable, EmbeddingError> {
    let mut table = EmbeddingTable::new(None);
    let mut first_record = true;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| EmbeddingError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| EmbeddingError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if first_record && value.get("meta").is_some() {
            let meta: MetaLine =
                serde_json::from_value(value).map_err(|e| EmbeddingError::Malformed {
                    line: line_no,
                    message: format!("bad meta line: {e}"),
                })?;
            table.provenance.model = meta.meta.model;
            if let Some(dim) = meta.meta.dim {
                table.dimension = dim;
            }
            first_record = false;
            continue;
        }
        first_record = false;
        let rec: VectorRecord =
            serde_json::from_value(value).map_err(|e| EmbeddingError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        table.insert_raw(&rec.id, rec.vector)?;
    }
    Ok(table)
}

/// Ids a kernel needs embeddings for that the table lacks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoverageReport {
    pub kind: Option<KernelKind>,
    pub missing: Vec<String>,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty()
    }
}

pub fn coverage_check(corpus: &Corpus, table: &EmbeddingTable, spec: &KernelSpec) -> CoverageReport {
    let missing = match spec.kind {
        KernelKind::Semantic => corpus
            .responses()
            .iter()
            .filter(|r| !table.contains(&r.id))
            .map(|r| r.id.clone())
            .collect(),
        KernelKind::PlotSynopsis => corpus
            .responses()
            .iter()
            .filter(|r| !table.contains(&synopsis_key(&r.id)))
            .map(|r| r.id.clone())
            .collect(),
        _ => Vec::new(),
    };
    CoverageReport {
        kind: Some(spec.kind),
        missing,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TextItem {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmbedRequest {
    pub version: u32,
    pub texts: Vec<TextItem>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmbedResponse {
    pub version: u32,
    pub vectors: Vec<VectorItem>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VectorItem {
    pub id: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportError {
    pub message: String,
    /// Connection failures, timeouts, 429 and 5xx are worth retrying.
    pub transient: bool,
    pub status: Option<u16>,
}

/// One request/response exchange with an embedding service.
pub trait EmbeddingTransport: Sync {
    fn post(&self, request: &EmbedRequest) -> Result<EmbedResponse, TransportError>;
}

/// JSON-over-HTTP transport.
pub struct HttpTransport {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport {
            endpoint: endpoint.into(),
            agent,
        }
    }
}

impl EmbeddingTransport for HttpTransport {
    fn post(&self, request: &EmbedRequest) -> Result<EmbedResponse, TransportError> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(request)
            .map_err(|e| TransportError {
                message: e.to_string(),
                transient: true,
                status: None,
            })?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(TransportError {
                message: body,
                transient: status == 429 || status >= 500,
                status: Some(status),
            });
        }
        resp.body_mut()
            .read_json::<EmbedResponse>()
            .map_err(|e| TransportError {
                message: format!("invalid response body: {e}"),
                transient: false,
                status: Some(status),
            })
    }
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub batch: usize,
    pub attempts: u32,
    pub initial_backoff: Duration,
    /// Concurrent requests; 1 keeps a single request in flight.
    pub parallelism: usize,
    pub model: Option<String>,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions {
            batch: 64,
            attempts: 3,
            initial_backoff: Duration::from_millis(250),
            parallelism: 1,
            model: None,
        }
    }
}

fn post_with_retry(
    transport: &dyn EmbeddingTransport,
    request: &EmbedRequest,
    opts: &FetchOptions,
) -> Result<EmbedResponse, EmbeddingError> {
    let mut backoff = opts.initial_backoff;
    let mut last = String::new();
    for attempt in 1..=opts.attempts.max(1) {
        match transport.post(request) {
            Ok(resp) => return Ok(resp),
            Err(e) if !e.transient => {
                return Err(match e.status {
                    Some(status) => EmbeddingError::Status {
                        status,
                        body: e.message,
                    },
                    None => EmbeddingError::Exhausted {
                        attempts: attempt,
                        message: e.message,
                    },
                })
            }
            Err(e) => {
                log::warn!("embedding request attempt {attempt} failed: {}", e.message);
                last = match e.status {
                    Some(s) => format!("status {s}: {}", e.message),
                    None => e.message,
                };
                if attempt < opts.attempts {
                    thread::sleep(backoff);
                    backoff *= 2;
                }
            }
        }
    }
    Err(EmbeddingError::Exhausted {
        attempts: opts.attempts.max(1),
        message: last,
    })
}

fn check_batch(request: &EmbedRequest, response: &EmbedResponse) -> Result<(), EmbeddingError> {
    if response.version != REMOTE_PROTOCOL_VERSION {
        return Err(EmbeddingError::Version(response.version));
    }
    if response.vectors.len() != request.texts.len() {
        return Err(EmbeddingError::CountMismatch {
            sent: request.texts.len(),
            received: response.vectors.len(),
        });
    }
    for (sent, got) in request.texts.iter().zip(&response.vectors) {
        if sent.id != got.id {
            return Err(EmbeddingError::IdMismatch {
                expected: sent.id.clone(),
                received: got.id.clone(),
            });
        }
    }
    Ok(())
}

/// Embeds `texts` in batches and assembles a table in input order.
///
/// Any failed batch fails the whole fetch; partial tables are never returned.
pub fn fetch_embeddings(
    transport: &dyn EmbeddingTransport,
    texts: &[(String, String)],
    opts: &FetchOptions,
) -> Result<EmbeddingTable, EmbeddingError> {
    if opts.batch == 0 {
        return Err(EmbeddingError::ZeroBatch);
    }
    let requests: Vec<EmbedRequest> = texts
        .chunks(opts.batch)
        .map(|chunk| EmbedRequest {
            version: REMOTE_PROTOCOL_VERSION,
            texts: chunk
                .iter()
                .map(|(id, text)| TextItem {
                    id: id.clone(),
                    text: text.clone(),
                })
                .collect(),
        })
        .collect();

    let mut responses: Vec<Option<Result<EmbedResponse, EmbeddingError>>> =
        (0..requests.len()).map(|_| None).collect();
    let lanes = opts.parallelism.max(1);
    for (req_group, slot_group) in requests.chunks(lanes).zip(responses.chunks_mut(lanes)) {
        thread::scope(|s| {
            let handles: Vec<_> = req_group
                .iter()
                .map(|req| {
                    s.spawn(move || {
                        let resp = post_with_retry(transport, req, opts)?;
                        check_batch(req, &resp)?;
                        Ok(resp)
                    })
                })
                .collect();
            for (slot, h) in slot_group.iter_mut().zip(handles) {
                *slot = Some(h.join().expect("fetch worker panicked"));
            }
        });
    }

    let mut table = EmbeddingTable::new(opts.model.clone());
    for resp in responses {
        let resp = resp.expect("every batch is resolved")?;
        for item in resp.vectors {
            table.insert_raw(&item.id, item.vector)?;
        }
    }
    Ok(table)
}

/// Convenience wrapper over [`fetch_embeddings`] with an HTTP transport.
pub fn fetch_embeddings_remote(
    endpoint: &str,
    texts: &[(String, String)],
    opts: &FetchOptions,
    timeout: Duration,
) -> Result<EmbeddingTable, EmbeddingError> {
    if texts.is_empty() {
        return Ok(EmbeddingTable::new(opts.model.clone()));
    }
    fetch_embeddings(&HttpTransport::new(endpoint, timeout), texts, opts)
}
