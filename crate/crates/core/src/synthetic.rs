//! Synthetic corpora with known crowding, for calibration checks and demo data.
//!
//! Every response belongs to one of up to [`MAX_CLUSTERS`] clusters. A response in cluster
//! `c` gets the basis vector `e_c` as its text and synopsis embedding, bucket id `c`, and a
//! fixed cluster phrase as its text. Under these fixtures the expected kernel values are
//! closed-form in the cluster weights `p`:
//!
//! * semantic and plot-synopsis: `Σp² + (1 − Σp²) / 2`
//! * bucket and word Jaccard: `Σp²`

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;

use crate::corpus::{Corpus, Response, Source, SourceKey};
use crate::embedding::{synopsis_key, EmbeddingTable};
use crate::rng::stream_rng;

pub const MAX_CLUSTERS: usize = 8;

const CLUSTER_PHRASES: [&str; MAX_CLUSTERS] = [
    "brick doorstop weight",
    "garden border path",
    "sculpture gallery art",
    "bookend shelf library",
    "fireplace hearth warmth",
    "exercise dumbbell lifting",
    "paperweight desk office",
    "boat anchor mooring",
];

const CLUSTER_SYNOPSES: [&str; MAX_CLUSTERS] = [
    "A stranger returns home.",
    "A pilot falls from the sky.",
    "A child befriends a ghost.",
    "Two rivals share a secret.",
    "A city forgets its name.",
    "A robot learns to grieve.",
    "A letter arrives too late.",
    "A storm hides a crime.",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub weights: Vec<f64>,
}

impl Mixture {
    pub fn new(weights: Vec<f64>) -> Self {
        assert!(!weights.is_empty() && weights.len() <= MAX_CLUSTERS);
        let total: f64 = weights.iter().sum();
        Mixture {
            weights: weights.iter().map(|w| w / total).collect(),
        }
    }

    pub fn uniform(k: usize) -> Self {
        Mixture::new(vec![1.0; k])
    }

    /// Probability two independent draws share a cluster.
    pub fn collision(&self) -> f64 {
        self.weights.iter().map(|p| p * p).sum()
    }

    /// Expected semantic kernel value between independent draws.
    pub fn expected_semantic(&self) -> f64 {
        let c = self.collision();
        c + 0.5 * (1.0 - c)
    }

    fn sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(&self.weights).expect("valid mixture weights")
    }
}

#[derive(Debug, Clone)]
pub struct SourceSpec {
    pub label: String,
    pub protocol: Option<String>,
    pub mixture: Mixture,
    pub units: usize,
    /// More than one response per unit assigns participant ids.
    pub per_unit: usize,
}

impl SourceSpec {
    pub fn human(mixture: Mixture, units: usize, per_unit: usize) -> Self {
        SourceSpec {
            label: Source::Human.label().to_string(),
            protocol: None,
            mixture,
            units,
            per_unit,
        }
    }

    pub fn model(label: &str, protocol: Option<&str>, mixture: Mixture, generations: usize) -> Self {
        SourceSpec {
            label: label.to_string(),
            protocol: protocol.map(str::to_string),
            mixture,
            units: generations,
            per_unit: 1,
        }
    }

    pub fn key(&self) -> SourceKey {
        match Source::parse(&self.label) {
            Source::Human => SourceKey::human(),
            Source::Model(m) => SourceKey::model(m, self.protocol.as_deref()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub corpus: Corpus,
    pub table: EmbeddingTable,
}

fn basis(c: usize) -> Vec<f64> {
    let mut v = vec![0.0; MAX_CLUSTERS];
    v[c] = 1.0;
    v
}

fn make_response(
    id: String,
    source: &SourceSpec,
    family: &str,
    condition: &str,
    participant: Option<String>,
    cluster: usize,
) -> Response {
    Response {
        id,
        source: Source::parse(&source.label),
        task_family: family.to_string(),
        condition_id: condition.to_string(),
        participant_id: participant,
        text: CLUSTER_PHRASES[cluster].to_string(),
        synopsis: Some(CLUSTER_SYNOPSES[cluster].to_string()),
        bucket_id: Some(cluster as i64),
        protocol: source.protocol.clone(),
    }
}

/// Draws every source in every condition of one task family.
pub fn build_fixture(family: &str, conditions: &[&str], sources: &[SourceSpec], seed: u64) -> Fixture {
    let mut responses = Vec::new();
    let mut table = EmbeddingTable::new(Some("synthetic-basis".to_string()));
    for condition in conditions {
        for source in sources {
            let key = source.key().to_string();
            let mut rng = stream_rng(seed, &["synthetic", family, condition, &key], 0);
            let sampler = source.mixture.sampler();
            for u in 0..source.units {
                for j in 0..source.per_unit {
                    let cluster = sampler.sample(&mut rng);
                    let id = format!("{condition}-{key}-u{u:03}-{j}");
                    let participant =
                        (source.per_unit > 1).then(|| format!("{condition}-{key}-p{u:03}"));
                    push_with_embeddings(
                        &mut responses,
                        &mut table,
                        make_response(id, source, family, condition, participant, cluster),
                        cluster,
                    );
                }
            }
        }
    }
    Fixture {
        corpus: Corpus::from_responses(responses).expect("generated ids are unique"),
        table,
    }
}

fn push_with_embeddings(
    responses: &mut Vec<Response>,
    table: &mut EmbeddingTable,
    r: Response,
    cluster: usize,
) {
    table.insert_raw(&r.id, basis(cluster)).expect("fresh id");
    table
        .insert_raw(&synopsis_key(&r.id), basis(cluster))
        .expect("fresh id");
    responses.push(r);
}

/// Adds `n` responses for `label` drawn with replacement from the existing responses of `from`
/// in each condition, copying their content and embeddings under new ids.
pub fn add_resampled_source(
    fixture: &mut Fixture,
    from: &SourceKey,
    label: &str,
    n: usize,
    seed: u64,
) {
    let mut responses = fixture.corpus.responses().to_vec();
    let conditions: Vec<String> = fixture.corpus.conditions().keys().cloned().collect();
    for condition in conditions {
        let pool: Vec<Response> = fixture.corpus.group(from, &condition).cloned().collect();
        if pool.is_empty() {
            continue;
        }
        let mut rng = stream_rng(seed, &["resample", &condition, label], 0);
        for i in 0..n {
            let src = &pool[rng.random_range(0..pool.len())];
            let mut r = src.clone();
            r.id = format!("{condition}-{label}-r{i:03}");
            r.source = Source::parse(label);
            r.participant_id = None;
            r.protocol = None;
            let v = fixture.table.get(&src.id).map(|v| v.as_slice().to_vec());
            let sv = fixture
                .table
                .get(&synopsis_key(&src.id))
                .map(|v| v.as_slice().to_vec());
            if let Some(v) = v {
                fixture.table.insert_raw(&r.id, v).expect("fresh id");
            }
            if let Some(sv) = sv {
                fixture
                    .table
                    .insert_raw(&synopsis_key(&r.id), sv)
                    .expect("fresh id");
            }
            responses.push(r);
        }
    }
    fixture.corpus = Corpus::from_responses(responses).expect("generated ids are unique");
}
