//! Responses, task conditions, and corpora loaded from line-delimited JSON.
//!
//! A corpus file holds one JSON object per line:
//!
//! ```text
//! {"id": "h1", "source": "human", "task_family": "slogans", "condition": "phone", "text": "...",
//!  "participant": "p07", "synopsis": "...", "bucket": 3, "protocol": "neutral-T1.0"}
//! ```
//!
//! `participant`, `synopsis`, `bucket` and `protocol` are optional. Duplicate texts are kept as
//! they are: repeated outputs are part of what crowding measures.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub const HUMAN_LABEL: &str = "human";

const KNOWN_KEYS: &[&str] = &[
    "id",
    "source",
    "task_family",
    "condition",
    "text",
    "participant",
    "synopsis",
    "bucket",
    "protocol",
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: invalid JSON: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: record must be a JSON object")]
    NotAnObject { line: usize },
    #[error("line {line}: missing required field '{field}'")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: field '{field}' must be {expected}")]
    InvalidField {
        line: usize,
        field: &'static str,
        expected: &'static str,
    },
    #[error("duplicate response id '{id}' (line {line})")]
    DuplicateId { id: String, line: usize },
    #[error("condition '{condition}' is listed under task families '{first}' and '{second}'")]
    ConflictingFamily {
        condition: String,
        first: String,
        second: String,
    },
    #[error("no responses for source '{source_key}' in condition '{condition}'")]
    EmptyGroup { source_key: String, condition: String },
    #[error(
        "source '{source_key}' in condition '{condition}' mixes responses with and without participant ids \
         (e.g. '{example}' has none)"
    )]
    MixedParticipants {
        source_key: String,
        condition: String,
        example: String,
    },
}

/// Where a response came from: the human baseline or a model label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Human,
    Model(String),
}

impl Source {
    pub fn parse(label: &str) -> Self {
        if label == HUMAN_LABEL {
            Source::Human
        } else {
            Source::Model(label.to_string())
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Source::Human => HUMAN_LABEL,
            Source::Model(m) => m,
        }
    }

    pub fn is_human(&self) -> bool {
        matches!(self, Source::Human)
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for Source {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Source {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let label = String::deserialize(d)?;
        Ok(Source::parse(&label))
    }
}

/// A source distribution for estimation: the source label plus its generation protocol.
///
/// Model-only generations are pooled per `(source, protocol)`; the human baseline never
/// carries a protocol.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceKey {
    pub source: Source,
    pub protocol: Option<String>,
}

impl SourceKey {
    pub fn human() -> Self {
        SourceKey {
            source: Source::Human,
            protocol: None,
        }
    }

    pub fn model(label: impl Into<String>, protocol: Option<&str>) -> Self {
        SourceKey {
            source: Source::Model(label.into()),
            protocol: protocol.map(str::to_string),
        }
    }
}

impl fmt::Display for SourceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.protocol {
            Some(p) => write!(f, "{}[{}]", self.source, p),
            None => write!(f, "{}", self.source),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: String,
    pub source: Source,
    pub task_family: String,
    #[serde(rename = "condition")]
    pub condition_id: String,
    #[serde(rename = "participant", default, skip_serializing_if = "Option::is_none")]
    pub participant_id: Option<String>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synopsis: Option<String>,
    #[serde(rename = "bucket", default, skip_serializing_if = "Option::is_none")]
    pub bucket_id: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<String>,
}

impl Response {
    pub fn source_key(&self) -> SourceKey {
        SourceKey {
            source: self.source.clone(),
            protocol: if self.source.is_human() {
                None
            } else {
                self.protocol.clone()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionMeta {
    pub task_family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

/// Validated, immutable collection of responses.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    responses: Vec<Response>,
    conditions: IndexMap<String, ConditionMeta>,
}

/// Non-fatal issue found while loading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SamplingUnit {
    pub unit_id: String,
    pub responses: Vec<Response>,
}

impl SamplingUnit {
    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

/// Minimum number of sampling units needed for an off-diagonal pair.
pub const MIN_UNITS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSummary {
    pub source: SourceKey,
    pub task_family: String,
    pub condition: String,
    pub units: usize,
    pub responses: usize,
    pub unique_texts: usize,
    pub estimable: bool,
    /// Set when the group's units cannot be formed at all.
    pub problem: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub groups: Vec<GroupSummary>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn blocking(&self) -> impl Iterator<Item = &GroupSummary> {
        self.groups.iter().filter(|g| !g.estimable)
    }

    pub fn all_estimable(&self) -> bool {
        self.groups.iter().all(|g| g.estimable)
    }
}

impl Corpus {
    /// Builds a corpus from already-parsed responses, enforcing id uniqueness.
    pub fn from_responses(responses: Vec<Response>) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::default();
        let mut seen = HashSet::new();
        for (i, r) in responses.into_iter().enumerate() {
            corpus.push(r, i + 1, &mut seen)?;
        }
        Ok(corpus)
    }

    fn push(
        &mut self,
        r: Response,
        line: usize,
        seen: &mut HashSet<String>,
    ) -> Result<(), CorpusError> {
        if !seen.insert(r.id.clone()) {
            return Err(CorpusError::DuplicateId { id: r.id, line });
        }
        match self.conditions.get(&r.condition_id) {
            Some(meta) if meta.task_family != r.task_family => {
                return Err(CorpusError::ConflictingFamily {
                    condition: r.condition_id.clone(),
                    first: meta.task_family.clone(),
                    second: r.task_family.clone(),
                })
            }
            Some(_) => {}
            None => {
                self.conditions.insert(
                    r.condition_id.clone(),
                    ConditionMeta {
                        task_family: r.task_family.clone(),
                        prompt: None,
                    },
                );
            }
        }
        self.responses.push(r);
        Ok(())
    }

    /// Concatenates corpora; ids must stay unique across all inputs.
    pub fn merge(parts: impl IntoIterator<Item = Corpus>) -> Result<Self, CorpusError> {
        let all: Vec<Response> = parts.into_iter().flat_map(|c| c.responses).collect();
        Corpus::from_responses(all)
    }

    pub fn responses(&self) -> &[Response] {
        &self.responses
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn conditions(&self) -> &IndexMap<String, ConditionMeta> {
        &self.conditions
    }

    pub fn family_of(&self, condition: &str) -> Option<&str> {
        self.conditions.get(condition).map(|m| m.task_family.as_str())
    }

    /// Conditions grouped by task family, both in sorted order.
    pub fn families(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (cond, meta) in &self.conditions {
            out.entry(meta.task_family.clone())
                .or_default()
                .push(cond.clone());
        }
        for conds in out.values_mut() {
            conds.sort();
        }
        out
    }

    pub fn source_keys(&self) -> BTreeSet<SourceKey> {
        self.responses.iter().map(Response::source_key).collect()
    }

    pub fn group<'a>(
        &'a self,
        source: &'a SourceKey,
        condition: &'a str,
    ) -> impl Iterator<Item = &'a Response> + 'a {
        self.responses
            .iter()
            .filter(move |r| r.condition_id == condition && &r.source_key() == source)
    }

    /// Writes the corpus back out in the line-delimited format, in corpus order.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.responses {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Loads a corpus file. Unknown keys are logged as warnings.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let (corpus, warnings) = parse_corpus(BufReader::new(file))?;
    for w in warnings {
        log::warn!("{}:{}: {}", path.display(), w.line, w.message);
    }
    Ok(corpus)
}

/// Parses line-delimited records. Blank lines are skipped; line numbers are 1-based.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<(Corpus, Vec<LoadWarning>), CorpusError> {
    let mut corpus = Corpus::default();
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let Value::Object(obj) = value else {
            return Err(CorpusError::NotAnObject { line: line_no });
        };
        for key in obj.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                warnings.push(LoadWarning {
                    line: line_no,
                    message: format!("ignoring unknown key '{key}'"),
                });
            }
        }
        let response = record_to_response(&obj, line_no)?;
        corpus.push(response, line_no, &mut seen)?;
    }
    Ok((corpus, warnings))
}

fn required_str(
    obj: &Map<String, Value>,
    field: &'static str,
    line: usize,
) -> Result<String, CorpusError> {
    match obj.get(field) {
        None | Some(Value::Null) => Err(CorpusError::MissingField { line, field }),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(CorpusError::InvalidField {
            line,
            field,
            expected: "a string",
        }),
    }
}

fn nonempty_str(
    obj: &Map<String, Value>,
    field: &'static str,
    line: usize,
) -> Result<String, CorpusError> {
    let s = required_str(obj, field, line)?;
    if s.is_empty() {
        return Err(CorpusError::InvalidField {
            line,
            field,
            expected: "a non-empty string",
        });
    }
    Ok(s)
}

fn optional_str(
    obj: &Map<String, Value>,
    field: &'static str,
    line: usize,
) -> Result<Option<String>, CorpusError> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        // Numeric participant ids are common in survey exports.
        Some(Value::Number(n)) if field == "participant" => Ok(Some(n.to_string())),
        Some(_) => Err(CorpusError::InvalidField {
            line,
            field,
            expected: "a string",
        }),
    }
}

fn record_to_response(obj: &Map<String, Value>, line: usize) -> Result<Response, CorpusError> {
    let bucket_id = match obj.get("bucket") {
        None | Some(Value::Null) => None,
        Some(v) => Some(v.as_i64().ok_or(CorpusError::InvalidField {
            line,
            field: "bucket",
            expected: "an integer",
        })?),
    };
    Ok(Response {
        id: nonempty_str(obj, "id", line)?,
        source: Source::parse(&nonempty_str(obj, "source", line)?),
        task_family: nonempty_str(obj, "task_family", line)?,
        condition_id: nonempty_str(obj, "condition", line)?,
        participant_id: optional_str(obj, "participant", line)?,
        text: required_str(obj, "text", line)?,
        synopsis: optional_str(obj, "synopsis", line)?,
        bucket_id,
        protocol: optional_str(obj, "protocol", line)?,
    })
}

/// Splits one `(source, condition)` group into sampling units, sorted by unit id.
///
/// Participant ids present on every response give one unit per participant; absent on every
/// response gives one unit per response. Members within a unit are ordered by response id so
/// the result does not depend on file order.
pub fn partition_units(
    corpus: &Corpus,
    source: &SourceKey,
    condition: &str,
) -> Result<Vec<SamplingUnit>, CorpusError> {
    let group: Vec<&Response> = corpus.group(source, condition).collect();
    units_from_responses(&group, source, condition)
}

pub(crate) fn units_from_responses(
    group: &[&Response],
    source: &SourceKey,
    condition: &str,
) -> Result<Vec<SamplingUnit>, CorpusError> {
    if group.is_empty() {
        return Err(CorpusError::EmptyGroup {
            source_key: source.to_string(),
            condition: condition.to_string(),
        });
    }
    let with_pid = group.iter().filter(|r| r.participant_id.is_some()).count();
    if with_pid != 0 && with_pid != group.len() {
        let example = group
            .iter()
            .find(|r| r.participant_id.is_none())
            .map(|r| r.id.clone())
            .unwrap_or_default();
        return Err(CorpusError::MixedParticipants {
            source_key: source.to_string(),
            condition: condition.to_string(),
            example,
        });
    }
    let mut units: BTreeMap<String, Vec<Response>> = BTreeMap::new();
    for r in group {
        let key = r.participant_id.clone().unwrap_or_else(|| r.id.clone());
        units.entry(key).or_default().push((*r).clone());
    }
    Ok(units
        .into_iter()
        .map(|(unit_id, mut responses)| {
            responses.sort_by(|a, b| a.id.cmp(&b.id));
            SamplingUnit { unit_id, responses }
        })
        .collect())
}

/// Summarizes every `(source, condition)` group present in the corpus.
pub fn validate_corpus(corpus: &Corpus) -> ValidationReport {
    let mut groups: BTreeMap<(SourceKey, String), Vec<&Response>> = BTreeMap::new();
    for r in corpus.responses() {
        groups
            .entry((r.source_key(), r.condition_id.clone()))
            .or_default()
            .push(r);
    }
    let summaries = groups
        .into_iter()
        .map(|((source, condition), members)| {
            let unique_texts = members
                .iter()
                .map(|r| r.text.as_str())
                .collect::<HashSet<_>>()
                .len();
            let task_family = corpus.family_of(&condition).unwrap_or_default().to_string();
            let (units, problem) = match units_from_responses(&members, &source, &condition) {
                Ok(u) => (u.len(), None),
                Err(e) => (0, Some(e.to_string())),
            };
            GroupSummary {
                estimable: problem.is_none() && units >= MIN_UNITS,
                source,
                task_family,
                condition,
                units,
                responses: members.len(),
                unique_texts,
                problem,
            }
        })
        .collect();
    ValidationReport { groups: summaries }
}
