//! Loading corpora, embeddings and stopwords named by a run config.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use crowdbench_core::corpus::{load_corpus, Corpus, SourceKey};
use crowdbench_core::embedding::{
    fetch_embeddings_remote, load_embeddings, synopsis_key, EmbeddingTable, FetchOptions,
};
use crowdbench_core::kernels::{KernelKind, KernelSpec, StopwordList};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::OutputDir;

pub struct Loaded {
    pub corpus: Corpus,
    /// Non-human sources found in the model corpora, sorted.
    pub models: Vec<SourceKey>,
    pub table: Option<EmbeddingTable>,
    pub stopwords: Arc<StopwordList>,
}

impl Loaded {
    pub fn spec(&self, kind: KernelKind) -> KernelSpec {
        KernelSpec::with_stopwords(kind, self.stopwords.clone())
    }
}

fn corpus_at(path: &Path) -> Result<Corpus, CliError> {
    load_corpus(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

pub fn load_stopwords(cfg: &RunConfig) -> Result<Arc<StopwordList>, CliError> {
    match &cfg.inputs.stopwords {
        None => Ok(StopwordList::bundled()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "custom".into());
            Ok(Arc::new(StopwordList::parse(id, &text)))
        }
    }
}

pub fn load(cfg: &RunConfig, out: &mut OutputDir) -> Result<Loaded, CliError> {
    cfg.check_inputs()?;
    let human_path = cfg.inputs.human.as_ref().expect("checked above");
    let human = corpus_at(human_path)?;
    if !human.responses().iter().any(|r| r.source.is_human()) {
        return Err(CliError::validation(format!(
            "{} contains no responses with source \"human\"",
            human_path.display()
        )));
    }
    let mut parts = vec![human];
    let mut models = std::collections::BTreeSet::new();
    for path in &cfg.inputs.models {
        let part = corpus_at(path)?;
        models.extend(part.source_keys().into_iter().filter(|k| !k.source.is_human()));
        parts.push(part);
    }
    if models.is_empty() {
        return Err(CliError::validation("model corpora contain no model-only responses"));
    }
    let corpus = Corpus::merge(parts).map_err(|e| CliError::validation(e.to_string()))?;

    let needs_vectors = cfg.kernel.kinds.iter().any(|k| k.needs_embeddings());
    let table = if !needs_vectors {
        None
    } else if let Some(path) = &cfg.inputs.embeddings {
        Some(
            load_embeddings(path)
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?,
        )
    } else {
        let endpoint = cfg.inputs.endpoint.as_ref().expect("checked above");
        let table = fetch_remote(cfg, &corpus, endpoint)?;
        let mut buf = Vec::new();
        table.write_jsonl(&mut buf)?;
        out.file("embeddings.jsonl", &buf)?;
        Some(table)
    };

    Ok(Loaded {
        corpus,
        models: models.into_iter().collect(),
        table,
        stopwords: load_stopwords(cfg)?,
    })
}

fn fetch_remote(cfg: &RunConfig, corpus: &Corpus, endpoint: &str) -> Result<EmbeddingTable, CliError> {
    let mut texts = Vec::new();
    if cfg.kernel.kinds.contains(&KernelKind::Semantic) {
        texts.extend(corpus.responses().iter().map(|r| (r.id.clone(), r.text.clone())));
    }
    if cfg.kernel.kinds.contains(&KernelKind::PlotSynopsis) {
        texts.extend(
            corpus
                .responses()
                .iter()
                .filter_map(|r| Some((synopsis_key(&r.id), r.synopsis.clone()?))),
        );
    }
    let opts = FetchOptions {
        batch: cfg.inputs.endpoint_batch,
        model: Some(endpoint.to_string()),
        ..Default::default()
    };
    let timeout = Duration::from_secs(cfg.inputs.endpoint_timeout_secs);
    fetch_embeddings_remote(endpoint, &texts, &opts, timeout)
        .map_err(|e| CliError::estimation(format!("embedding endpoint {endpoint}: {e}")))
}
