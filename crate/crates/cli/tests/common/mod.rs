#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;

use crowdbench_core::corpus::{Corpus, Response};
use crowdbench_core::synthetic::Fixture;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_crowdbench")
}

pub fn crowdbench(args: &[&str]) -> Output {
    std::process::Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_corpus(path: &Path, responses: Vec<Response>) {
    let corpus = Corpus::from_responses(responses).unwrap();
    let mut buf = Vec::new();
    corpus.write_jsonl(&mut buf).unwrap();
    std::fs::write(path, buf).unwrap();
}

/// Writes `human.jsonl`, `models.jsonl` and `embeddings.jsonl` for a fixture into `dir`.
pub fn write_fixture(dir: &Path, fixture: &Fixture) {
    let (humans, models): (Vec<Response>, Vec<Response>) = fixture
        .corpus
        .responses()
        .iter()
        .cloned()
        .partition(|r| r.source.is_human());
    write_corpus(&dir.join("human.jsonl"), humans);
    write_corpus(&dir.join("models.jsonl"), models);
    fixture.table.save(dir.join("embeddings.jsonl")).unwrap();
}

/// A config over the files from [`write_fixture`]; `extra` is appended verbatim.
pub fn write_config(dir: &Path, kernels: &[&str], replicates: usize, extra: &str) -> PathBuf {
    let kinds = kernels
        .iter()
        .map(|k| format!("\"{k}\""))
        .collect::<Vec<_>>()
        .join(", ");
    let text = format!(
        r#"[inputs]
human = "human.jsonl"
models = ["models.jsonl"]
embeddings = "embeddings.jsonl"

[kernel]
kinds = [{kinds}]

[estimator]
replicates = {replicates}
seed = 7

[output]
dir = "out"
{extra}"#
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

pub fn read_csv(path: &Path) -> crowdbench::report::Table {
    let bytes = std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    crowdbench::report::Table::from_csv(&bytes).unwrap()
}

/// Value of `column` in the single row where `key_col == key`.
pub fn cell(table: &crowdbench::report::Table, key_col: &str, key: &str, column: &str) -> String {
    let k = table.column(key_col).unwrap();
    let c = table.column(column).unwrap();
    let rows: Vec<_> = table.rows.iter().filter(|r| r[k] == key).collect();
    assert_eq!(rows.len(), 1, "{key_col}={key}");
    rows[0][c].clone()
}

/// All files under `root`, relative, sorted, with their bytes.
pub fn snapshot(root: &Path, keep: impl Fn(&Path) -> bool) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if keep(&path) {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}
