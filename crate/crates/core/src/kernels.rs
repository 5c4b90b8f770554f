//! Crowding kernels: symmetric pairwise scores in `[0, 1]`, larger meaning more crowded.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Response;
use crate::embedding::{synopsis_key, EmbeddingTable};

/// Allowed deviation of a stored vector's norm from 1.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords-en-v1.txt");
const BUNDLED_STOPWORDS_ID: &str = "en-v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("vector dimensions differ ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("vector norm {norm} is not within {UNIT_NORM_TOLERANCE} of 1")]
    NotUnitNorm { norm: f64 },
    #[error("vector is zero or not finite")]
    Degenerate,
    #[error("response '{id}' has no embedding in the table")]
    MissingEmbedding { id: String },
    #[error("response '{id}' has no synopsis")]
    MissingSynopsis { id: String },
    #[error("response '{id}' has no bucket id")]
    MissingBucket { id: String },
    #[error("bucket ids are only comparable within a condition ('{left}' vs '{right}')")]
    CrossConditionBucket { left: String, right: String },
    #[error("the {kind} kernel needs an embedding table")]
    TableRequired { kind: KernelKind },
    #[error("unknown kernel kind '{0}'")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Semantic,
    PlotSynopsis,
    WordJaccard,
    CharTrigramJaccard,
    Bucket,
}

impl KernelKind {
    pub const ALL: [KernelKind; 5] = [
        KernelKind::Semantic,
        KernelKind::PlotSynopsis,
        KernelKind::WordJaccard,
        KernelKind::CharTrigramJaccard,
        KernelKind::Bucket,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Semantic => "semantic",
            KernelKind::PlotSynopsis => "plot_synopsis",
            KernelKind::WordJaccard => "word_jaccard",
            KernelKind::CharTrigramJaccard => "char_trigram_jaccard",
            KernelKind::Bucket => "bucket",
        }
    }

    pub fn needs_embeddings(self) -> bool {
        matches!(self, KernelKind::Semantic | KernelKind::PlotSynopsis)
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KernelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| KernelError::UnknownKind(s.to_string()))
    }
}

/// A pinned stopword list, identified in every report that uses it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordList {
    id: String,
    words: HashSet<String>,
}

impl StopwordList {
    /// Parses one token per line; `#` starts a comment line. Entries are normalized the
    /// same way as text so they match normalized tokens.
    pub fn parse(id: impl Into<String>, content: &str) -> Self {
        let words = content
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(normalize_text)
            .filter(|w| !w.is_empty())
            .collect();
        StopwordList {
            id: id.into(),
            words,
        }
    }

    pub fn bundled() -> Arc<StopwordList> {
        static LIST: OnceLock<Arc<StopwordList>> = OnceLock::new();
        LIST.get_or_init(|| Arc::new(StopwordList::parse(BUNDLED_STOPWORDS_ID, BUNDLED_STOPWORDS)))
            .clone()
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub stopwords: Arc<StopwordList>,
}

impl KernelSpec {
    pub fn new(kind: KernelKind) -> Self {
        KernelSpec {
            kind,
            stopwords: StopwordList::bundled(),
        }
    }

    pub fn with_stopwords(kind: KernelKind, stopwords: Arc<StopwordList>) -> Self {
        KernelSpec { kind, stopwords }
    }

    pub fn stopword_list_id(&self) -> &str {
        self.stopwords.id()
    }
}

/// Real vector with Euclidean norm 1 (within [`UNIT_NORM_TOLERANCE`]).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Accepts `components` only if they are already unit-norm.
    pub fn new(components: Vec<f64>) -> Result<Self, KernelError> {
        let norm = l2_norm(&components);
        if !norm.is_finite() || norm == 0.0 {
            return Err(KernelError::Degenerate);
        }
        if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(KernelError::NotUnitNorm { norm });
        }
        Ok(UnitVector(components))
    }

    /// Scales `components` to unit norm, returning the original norm alongside.
    pub fn normalize(mut components: Vec<f64>) -> Result<(Self, f64), KernelError> {
        let norm = l2_norm(&components);
        if !norm.is_finite() || norm == 0.0 {
            return Err(KernelError::Degenerate);
        }
        for c in &mut components {
            *c /= norm;
        }
        Ok((UnitVector(components), norm))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `(1 + cos(u, v)) / 2` for unit vectors.
///
/// Evaluated as `|u + v|^2 / (2 (|u|^2 + |v|^2))`, which is algebraically identical for unit
/// vectors and makes `K(u, u) = 1` and `K(u, -u) = 0` hold exactly in floating point.
pub fn semantic_kernel(u: &UnitVector, v: &UnitVector) -> Result<f64, KernelError> {
    if u.dim() != v.dim() {
        return Err(KernelError::DimensionMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    Ok(semantic_raw(u.as_slice(), v.as_slice()))
}

#[inline]
pub(crate) fn semantic_raw(u: &[f64], v: &[f64]) -> f64 {
    let mut sum_sq = 0.0;
    let mut norms = 0.0;
    for (a, b) in u.iter().zip(v) {
        let s = a + b;
        sum_sq += s * s;
        norms += a * a + b * b;
    }
    (sum_sq / (2.0 * norms)).clamp(0.0, 1.0)
}

fn punctuation() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[\p{P}[:punct:]]").expect("static regex"))
}

/// Lowercases, deletes punctuation (no space inserted), and collapses whitespace.
pub fn normalize_text(s: &str) -> String {
    let lowered = s.to_lowercase();
    let stripped = punctuation().replace_all(&lowered, "");
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Non-stopword tokens of the normalized text.
pub fn content_tokens(s: &str, stopwords: &StopwordList) -> HashSet<String> {
    normalize_text(s)
        .split(' ')
        .filter(|t| !t.is_empty() && !stopwords.contains(t))
        .map(str::to_string)
        .collect()
}

/// Character trigrams of the normalized text. Strings shorter than three characters form a
/// single gram; the empty string has none.
pub fn char_trigrams(s: &str) -> HashSet<String> {
    let chars: Vec<char> = normalize_text(s).chars().collect();
    match chars.len() {
        0 => HashSet::new(),
        1 | 2 => HashSet::from([chars.iter().collect()]),
        _ => chars.windows(3).map(|w| w.iter().collect()).collect(),
    }
}

/// Set Jaccard with the degenerate cases fixed: both empty is 1, one empty is 0.
pub fn jaccard<T: Eq + std::hash::Hash>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let inter = small.iter().filter(|x| large.contains(x)).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

pub fn word_jaccard(x: &str, y: &str, stopwords: &StopwordList) -> f64 {
    jaccard(&content_tokens(x, stopwords), &content_tokens(y, stopwords))
}

pub fn char_trigram_jaccard(x: &str, y: &str) -> f64 {
    jaccard(&char_trigrams(x), &char_trigrams(y))
}

pub fn bucket_kernel(bx: i64, by: i64) -> f64 {
    if bx == by {
        1.0
    } else {
        0.0
    }
}

/// Per-response representation a kernel compares.
#[derive(Debug, Clone)]
pub(crate) enum Feature<'t> {
    Vector(&'t [f64]),
    Set(HashSet<String>),
    Bucket { condition: String, bucket: i64 },
}

pub(crate) fn featurize<'t>(
    spec: &KernelSpec,
    r: &Response,
    table: Option<&'t EmbeddingTable>,
) -> Result<Feature<'t>, KernelError> {
    match spec.kind {
        KernelKind::Semantic => {
            let table = table.ok_or(KernelError::TableRequired { kind: spec.kind })?;
            let v = table
                .get(&r.id)
                .ok_or_else(|| KernelError::MissingEmbedding { id: r.id.clone() })?;
            Ok(Feature::Vector(v.as_slice()))
        }
        KernelKind::PlotSynopsis => {
            if r.synopsis.is_none() {
                return Err(KernelError::MissingSynopsis { id: r.id.clone() });
            }
            let table = table.ok_or(KernelError::TableRequired { kind: spec.kind })?;
            let v = table
                .get(&synopsis_key(&r.id))
                .ok_or_else(|| KernelError::MissingEmbedding {
                    id: synopsis_key(&r.id),
                })?;
            Ok(Feature::Vector(v.as_slice()))
        }
        KernelKind::WordJaccard => Ok(Feature::Set(content_tokens(&r.text, &spec.stopwords))),
        KernelKind::CharTrigramJaccard => Ok(Feature::Set(char_trigrams(&r.text))),
        KernelKind::Bucket => Ok(Feature::Bucket {
            condition: r.condition_id.clone(),
            bucket: r
                .bucket_id
                .ok_or_else(|| KernelError::MissingBucket { id: r.id.clone() })?,
        }),
    }
}

pub(crate) fn compare(a: &Feature<'_>, b: &Feature<'_>) -> Result<f64, KernelError> {
    match (a, b) {
        (Feature::Vector(u), Feature::Vector(v)) => {
            if u.len() != v.len() {
                return Err(KernelError::DimensionMismatch {
                    left: u.len(),
                    right: v.len(),
                });
            }
            Ok(semantic_raw(u, v))
        }
        (Feature::Set(x), Feature::Set(y)) => Ok(jaccard(x, y)),
        (
            Feature::Bucket {
                condition: cx,
                bucket: bx,
            },
            Feature::Bucket {
                condition: cy,
                bucket: by,
            },
        ) => {
            if cx != cy {
                return Err(KernelError::CrossConditionBucket {
                    left: cx.clone(),
                    right: cy.clone(),
                });
            }
            Ok(bucket_kernel(*bx, *by))
        }
        _ => unreachable!("features of one kernel kind always match"),
    }
}

/// Evaluates the kernel named by `spec` on a pair of responses.
pub fn kernel_for(
    spec: &KernelSpec,
    a: &Response,
    b: &Response,
    table: Option<&EmbeddingTable>,
) -> Result<f64, KernelError> {
    let fa = featurize(spec, a, table)?;
    let fb = featurize(spec, b, table)?;
    compare(&fa, &fb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;

    fn unit(v: &[f64]) -> UnitVector {
        UnitVector::new(v.to_vec()).unwrap()
    }

    fn response(id: &str, text: &str) -> Response {
        Response {
            id: id.into(),
            source: Source::Human,
            task_family: "aut".into(),
            condition_id: "brick".into(),
            participant_id: None,
            text: text.into(),
            synopsis: None,
            bucket_id: None,
            protocol: None,
        }
    }

    #[test]
    fn semantic_examples() {
        let e1 = unit(&[1.0, 0.0]);
        let e2 = unit(&[0.0, 1.0]);
        assert_eq!(semantic_kernel(&e1, &e1).unwrap(), 1.0);
        assert_eq!(semantic_kernel(&e1, &e2).unwrap(), 0.5);
        let u = unit(&[0.6, 0.8]);
        assert!((semantic_kernel(&u, &e1).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn semantic_antipodal_is_exactly_zero() {
        let u = UnitVector::normalize(vec![0.3, -1.7, 2.2]).unwrap().0;
        let neg = UnitVector::new(u.as_slice().iter().map(|x| -x).collect()).unwrap();
        assert_eq!(semantic_kernel(&u, &neg).unwrap(), 0.0);
        assert_eq!(semantic_kernel(&u, &u).unwrap(), 1.0);
    }

    #[test]
    fn semantic_dimension_mismatch() {
        let err = semantic_kernel(&unit(&[1.0, 0.0]), &unit(&[1.0, 0.0, 0.0])).unwrap_err();
        assert_eq!(err, KernelError::DimensionMismatch { left: 2, right: 3 });
    }

    #[test]
    fn unit_vector_rejects_non_unit() {
        assert!(matches!(
            UnitVector::new(vec![3.0, 4.0]),
            Err(KernelError::NotUnitNorm { .. })
        ));
        assert_eq!(UnitVector::new(vec![0.0, 0.0]), Err(KernelError::Degenerate));
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_text("Think  Different!"), "think different");
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text("A-B  c."), "ab c");
        assert_eq!(normalize_text("  «Smart» phone\t\n— now "), "smart phone now");
    }

    #[test]
    fn word_jaccard_examples() {
        let sw = StopwordList::bundled();
        assert_eq!(word_jaccard("Smart phone", "phone, SMART!", &sw), 1.0);
        assert_eq!(word_jaccard("smart phone", "bright future", &sw), 0.0);
        assert_eq!(word_jaccard("the smart phone", "a smart future", &sw), 1.0 / 3.0);
    }

    #[test]
    fn trigram_examples() {
        assert_eq!(char_trigram_jaccard("Hello there", "hello, there"), 1.0);
        assert_eq!(char_trigram_jaccard("abcd", "bcde"), 1.0 / 3.0);
        assert_eq!(char_trigram_jaccard("", "!!"), 1.0);
        assert_eq!(char_trigram_jaccard("", "abc"), 0.0);
        assert_eq!(char_trigrams("Go"), HashSet::from(["go".to_string()]));
        assert!(char_trigrams("ab c").contains("b c"));
    }

    #[test]
    fn empty_token_sets() {
        let sw = StopwordList::bundled();
        // Both reduce to nothing but stopwords.
        assert_eq!(word_jaccard("the and", "of a", &sw), 1.0);
        assert_eq!(word_jaccard("the", "phone", &sw), 0.0);
    }

    #[test]
    fn bucket_examples() {
        assert_eq!(bucket_kernel(7, 7), 1.0);
        assert_eq!(bucket_kernel(7, 9), 0.0);
        let spec = KernelSpec::new(KernelKind::Bucket);
        let mut a = response("a", "");
        a.bucket_id = Some(7);
        let b = response("b", "");
        assert_eq!(
            kernel_for(&spec, &a, &b, None),
            Err(KernelError::MissingBucket { id: "b".into() })
        );
        let mut c = response("c", "");
        c.bucket_id = Some(7);
        assert_eq!(kernel_for(&spec, &a, &c, None).unwrap(), 1.0);
        c.condition_id = "paperclip".into();
        assert!(matches!(
            kernel_for(&spec, &a, &c, None),
            Err(KernelError::CrossConditionBucket { .. })
        ));
    }

    #[test]
    fn plot_synopsis_requires_synopsis() {
        let spec = KernelSpec::new(KernelKind::PlotSynopsis);
        let table = EmbeddingTable::default();
        let err = kernel_for(
            &spec,
            &response("s1", "x"),
            &response("s2", "y"),
            Some(&table),
        )
        .unwrap_err();
        assert_eq!(err, KernelError::MissingSynopsis { id: "s1".into() });
    }

    #[test]
    fn kind_round_trips_through_str() {
        for k in KernelKind::ALL {
            assert_eq!(k.as_str().parse::<KernelKind>().unwrap(), k);
        }
        assert!("cosine".parse::<KernelKind>().is_err());
    }

    #[test]
    fn bundled_stopwords_are_loaded() {
        let sw = StopwordList::bundled();
        assert_eq!(sw.id(), "en-v1");
        assert!(sw.contains("the"));
        assert!(sw.contains("dont"));
        assert!(!sw.contains("phone"));
    }
}
