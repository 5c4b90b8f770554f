//! Writes a small synthetic study (corpora plus basis-vector embeddings) for trying the CLI.
//!
//! Usage: `cargo run -p crowdbench-core --example synthetic_demo -- <dir>`

use std::path::PathBuf;

use crowdbench_core::corpus::{Corpus, Response};
use crowdbench_core::synthetic::{build_fixture, Mixture, SourceSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "demo".into()));
    std::fs::create_dir_all(&dir)?;

    let broad = Mixture::new(vec![0.2, 0.17, 0.15, 0.13, 0.11, 0.1, 0.08, 0.06]);
    let models = |family_shift: f64| {
        vec![
            SourceSpec::human(broad.clone(), 60, 2),
            SourceSpec::model("model-a", Some("neutral"), Mixture::new(vec![0.6, 0.25, 0.15]), 80),
            SourceSpec::model("model-a", Some("persona"), Mixture::uniform(5), 80),
            SourceSpec::model("model-b", Some("t0.7"), Mixture::new(vec![0.7 + family_shift, 0.3]), 80),
            SourceSpec::model("model-b", Some("t1.0"), Mixture::uniform(3), 80),
            SourceSpec::model("model-b", Some("t1.3"), Mixture::uniform(4), 80),
        ]
    };
    let aut = build_fixture("aut", &["brick", "paperclip"], &models(0.0), 1);
    let slogans = build_fixture("slogans", &["bakery", "bikeshare"], &models(0.1), 2);

    let mut humans = Vec::new();
    let mut generated = Vec::new();
    let mut table = aut.table.clone();
    for fx in [&aut, &slogans] {
        for r in fx.corpus.responses() {
            if r.source.is_human() {
                humans.push(r.clone());
            } else {
                generated.push(r.clone());
            }
        }
    }
    for (id, v) in slogans.table.iter() {
        table.insert_raw(id, v.as_slice().to_vec())?;
    }

    let write = |name: &str, rs: Vec<Response>| -> Result<(), Box<dyn std::error::Error>> {
        let mut buf = Vec::new();
        Corpus::from_responses(rs)?.write_jsonl(&mut buf)?;
        std::fs::write(dir.join(name), buf)?;
        Ok(())
    };
    write("human.jsonl", humans)?;
    write("models.jsonl", generated)?;
    table.save(dir.join("embeddings.jsonl"))?;
    println!("wrote {}", dir.display());
    Ok(())
}
