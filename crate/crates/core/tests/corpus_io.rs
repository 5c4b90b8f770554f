use std::collections::HashSet;
use std::io::Write;

use crowdbench_core::corpus::{load_corpus, partition_units, validate_corpus, CorpusError, SourceKey};
use crowdbench_core::embedding::{coverage_check, load_embeddings, EmbeddingTable};
use crowdbench_core::kernels::{KernelKind, KernelSpec};

/// 659 slogans from 95 participants with 9 repeated texts.
fn slogan_lines() -> Vec<String> {
    let mut lines = Vec::new();
    let mut unique = 0;
    for p in 0..95 {
        let count = if p < 89 { 7 } else { 6 };
        for j in 0..count {
            let n = lines.len();
            // Every 70th response from the 5th on repeats an earlier slogan.
            let text = if n >= 70 && n % 70 == 5 {
                format!("Slogan number {}", n - 60)
            } else {
                unique += 1;
                format!("Slogan number {n}")
            };
            lines.push(
                serde_json::json!({
                    "id": format!("s{n:03}"),
                    "source": "human",
                    "task_family": "slogans",
                    "condition": "smartphone",
                    "participant": format!("p{p:02}"),
                    "text": text,
                    "extra": j,
                })
                .to_string(),
            );
        }
    }
    assert_eq!(unique, 650);
    lines
}

#[test]
fn slogan_baseline_shape() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "{}", slogan_lines().join("\n")).unwrap();
    let corpus = load_corpus(file.path()).unwrap();
    assert_eq!(corpus.len(), 659);
    let units = partition_units(&corpus, &SourceKey::human(), "smartphone").unwrap();
    assert_eq!(units.len(), 95);
    assert_eq!(units.iter().map(|u| u.len()).sum::<usize>(), 659);
    let report = validate_corpus(&corpus);
    assert_eq!(report.groups.len(), 1);
    let g = &report.groups[0];
    assert_eq!((g.units, g.responses, g.unique_texts, g.estimable), (95, 659, 650, true));
    let texts: HashSet<&str> = corpus.responses().iter().map(|r| r.text.as_str()).collect();
    assert_eq!(texts.len(), 650);
}

#[test]
fn load_reports_line_of_malformed_record() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    let mut lines = slogan_lines();
    lines.truncate(3);
    lines.push("{not json".into());
    writeln!(file, "{}", lines.join("\n")).unwrap();
    match load_corpus(file.path()) {
        Err(CorpusError::Malformed { line, .. }) => assert_eq!(line, 4),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn embedding_file_round_trip_and_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.jsonl");
    let mut table = EmbeddingTable::new(Some("test-encoder".into()));
    table.insert_raw("a", vec![3.0, 4.0]).unwrap();
    table.insert_raw("b", vec![0.0, 1.0]).unwrap();
    table.insert_raw("a#synopsis", vec![1.0, 1.0]).unwrap();
    table.save(&path).unwrap();
    let back = load_embeddings(&path).unwrap();
    assert_eq!(back.dimension(), 2);
    assert_eq!(back.get("a").unwrap().as_slice(), &[0.6, 0.8]);
    for (id, v) in table.iter() {
        for (x, y) in v.as_slice().iter().zip(back.get(id).unwrap().as_slice()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    let corpus_lines = ["a", "b"]
        .iter()
        .map(|id| {
            serde_json::json!({"id": id, "source": "human", "task_family": "stories",
                               "condition": "p1", "text": "t", "synopsis": "s"})
            .to_string()
        })
        .collect::<Vec<_>>();
    let cpath = dir.path().join("corpus.jsonl");
    std::fs::write(&cpath, corpus_lines.join("\n")).unwrap();
    let corpus = load_corpus(&cpath).unwrap();
    assert!(coverage_check(&corpus, &back, &KernelSpec::new(KernelKind::Semantic)).is_complete());
    let plot = coverage_check(&corpus, &back, &KernelSpec::new(KernelKind::PlotSynopsis));
    assert_eq!(plot.missing, vec!["b".to_string()]);
    assert!(coverage_check(&corpus, &back, &KernelSpec::new(KernelKind::Bucket)).is_complete());
}
