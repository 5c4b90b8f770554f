mod common;

use std::path::Path;

use common::{cell, crowdbench, read_csv, snapshot, write_config, write_fixture};
use crowdbench_core::synthetic::{build_fixture, Fixture, Mixture, SourceSpec};

fn two_sources(human: Mixture, model: Mixture, n: usize, seed: u64) -> Fixture {
    build_fixture(
        "aut",
        &["brick", "paperclip"],
        &[
            SourceSpec::human(human, n, 1),
            SourceSpec::model("model-a", None, model, n),
        ],
        seed,
    )
}

fn spread() -> Mixture {
    Mixture::new(vec![0.2, 0.18, 0.15, 0.13, 0.11, 0.09, 0.08, 0.06])
}

fn run(args: &[&str]) -> (i32, String) {
    let out = crowdbench(args);
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn f(x: &str) -> f64 {
    x.parse().unwrap()
}

#[test]
fn validate_accepts_a_complete_fixture() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &two_sources(spread(), spread(), 20, 1));
    let cfg = write_config(dir.path(), &["semantic", "bucket"], 100, "");
    let (code, err) = run(&["validate", "--config", s(&cfg)]);
    assert_eq!(code, 0, "{err}");
    let report = read_csv(&dir.path().join("out/validation_report.csv"));
    assert_eq!(report.rows.len(), 4);
    assert!(read_csv(&dir.path().join("out/coverage.csv")).rows.is_empty());
    assert!(dir.path().join("out/validation_report.md").exists());
}

#[test]
fn validate_reports_missing_embeddings_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &two_sources(spread(), spread(), 20, 1));
    let emb = dir.path().join("embeddings.jsonl");
    let text = std::fs::read_to_string(&emb).unwrap();
    let kept: Vec<&str> = text
        .lines()
        .filter(|l| !l.contains("\"brick-human-u003-0\""))
        .collect();
    std::fs::write(&emb, kept.join("\n") + "\n").unwrap();
    let cfg = write_config(dir.path(), &["semantic"], 100, "");
    let (code, err) = run(&["validate", "--config", s(&cfg)]);
    assert_eq!(code, 2);
    assert!(err.contains("missing embedding for brick-human-u003-0"), "{err}");
    let coverage = read_csv(&dir.path().join("out/coverage.csv"));
    assert_eq!(coverage.rows, vec![vec!["semantic", "brick-human-u003-0", "missing embedding"]]);

    // Lexical kernels do not need the vector.
    let (code, err) = run(&["validate", "--config", s(&cfg), "--kernel", "word_jaccard"]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn single_participant_condition_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let fx = build_fixture(
        "aut",
        &["brick"],
        &[
            SourceSpec::human(spread(), 1, 3),
            SourceSpec::model("model-a", None, spread(), 10),
        ],
        2,
    );
    write_fixture(dir.path(), &fx);
    let cfg = write_config(dir.path(), &["bucket"], 100, "");
    let (code, err) = run(&["validate", "--config", s(&cfg)]);
    assert_eq!(code, 2);
    assert!(err.contains("not estimable"), "{err}");
    let (code, _) = run(&["estimate", "--config", s(&cfg)]);
    assert_eq!(code, 2);
}

#[test]
fn saturated_human_baseline_is_an_estimation_error() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &two_sources(Mixture::uniform(1), spread(), 10, 3));
    let cfg = write_config(dir.path(), &["bucket"], 100, "");
    let (code, err) = run(&["estimate", "--config", s(&cfg)]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn condition_table_header_is_fixed() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &two_sources(spread(), spread(), 20, 4));
    let cfg = write_config(dir.path(), &["semantic"], 100, "");
    let (code, err) = run(&["estimate", "--config", s(&cfg)]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(dir.path().join("out/conditions/semantic/model-a__aut.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "condition,b,kappa_h,kappa_h_lo,kappa_h_hi,kappa_a,kappa_a_lo,kappa_a_hi,delta,delta_lo,\
         delta_hi,rho,rho_lo,rho_hi,B,seed,kernel,stopword_list_id"
    );
    let table = read_csv(&dir.path().join("out/conditions/semantic/model-a__aut.csv"));
    let conditions: Vec<&str> = table.rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(conditions, ["brick", "paperclip", "aggregate"]);
    assert_eq!(cell(&table, "condition", "brick", "b"), "20");
    assert_eq!(cell(&table, "condition", "aggregate", "b"), "NA");
    assert_eq!(cell(&table, "condition", "brick", "stopword_list_id"), "en-v1");
    for plot in ["rho_parity_semantic.svg", "kappa_diagonal_semantic.svg"] {
        assert!(dir.path().join("out/plots").join(plot).exists(), "{plot}");
    }
}

#[test]
fn same_distribution_sits_at_parity() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &two_sources(spread(), spread(), 150, 5));
    let cfg = write_config(dir.path(), &["semantic", "bucket"], 400, "");
    let (code, err) = run(&["estimate", "--config", s(&cfg)]);
    assert_eq!(code, 0, "{err}");
    let summary = read_csv(&dir.path().join("out/family_summary.csv"));
    assert_eq!(summary.rows.len(), 2);
    for kernel in ["semantic", "bucket"] {
        let get = |c: &str| f(&cell(&summary, "kernel", kernel, c));
        assert!(get("rho_lo") <= 1.0 && 1.0 <= get("rho_hi"), "{kernel}");
        assert!(get("delta_meanofconds") < 0.02, "{kernel}");
    }
}

#[test]
fn concentrated_model_is_below_parity() {
    let dir = tempfile::tempdir().unwrap();
    let model = Mixture::new(vec![0.8, 0.2]);
    write_fixture(dir.path(), &two_sources(Mixture::uniform(8), model, 60, 6));
    let cfg = write_config(dir.path(), &["semantic"], 300, "");
    let (code, err) = run(&["estimate", "--config", s(&cfg)]);
    assert_eq!(code, 0, "{err}");
    let summary = read_csv(&dir.path().join("out/family_summary.csv"));
    let get = |c: &str| f(&cell(&summary, "kernel", "semantic", c));
    assert!(get("rho_hi") < 1.0);
    assert!(get("delta_lo") > 0.0);
    assert!(get("kappa_a") > get("kappa_h"));
}

#[test]
fn rerun_is_byte_identical_and_echoes_overrides() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &two_sources(spread(), Mixture::uniform(3), 30, 7));
    let cfg = write_config(dir.path(), &["semantic", "word_jaccard"], 100, "");
    let out = dir.path().join("out");
    let (code, err) = run(&["estimate", "--config", s(&cfg), "--seed", "99"]);
    assert_eq!(code, 0, "{err}");
    let first = snapshot(&out, |_| true);
    let (code, _) = run(&["estimate", "--config", s(&cfg), "--seed", "99"]);
    assert_eq!(code, 0);
    assert_eq!(first, snapshot(&out, |_| true));
    let echoed = std::fs::read_to_string(out.join("effective_config.toml")).unwrap();
    assert!(echoed.contains("seed = 99"), "{echoed}");

    let (code, _) = run(&["estimate", "--config", s(&cfg), "--seed", "100"]);
    assert_eq!(code, 0);
    assert_ne!(first, snapshot(&out, |_| true));
}

#[test]
fn constant_kernel_has_no_drift() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &two_sources(Mixture::uniform(1), Mixture::uniform(1), 30, 8));
    let cfg = write_config(dir.path(), &["bucket"], 100, "[rarefaction]\nrepeats = 20\n");
    let (code, err) = run(&["rarefy", "--config", s(&cfg)]);
    assert_eq!(code, 0, "{err}");
    let drift = read_csv(&dir.path().join("out/drift.csv"));
    // human and model-a, two conditions plus the family row each
    assert_eq!(drift.rows.len(), 6);
    let c = drift.column("drift_percent").unwrap();
    assert!(drift.rows.iter().all(|r| r[c] == "0.000000"));
    let n_low = drift.column("n_low").unwrap();
    assert!(drift.rows.iter().all(|r| r[n_low] == "20"));
    let curves = read_csv(&dir.path().join("out/rarefaction_curves.csv"));
    let n = curves.column("n").unwrap();
    let grid: Vec<&str> = curves.rows.iter().take(6).map(|r| r[n].as_str()).collect();
    assert_eq!(grid, ["5", "10", "15", "20", "25", "30"]);
    assert!(dir.path().join("out/plots/rarefaction_bucket_aut.svg").exists());
}

#[test]
fn grid_beyond_available_units_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &two_sources(spread(), spread(), 20, 9));
    let cfg = write_config(dir.path(), &["bucket"], 100, "[rarefaction]\ngrid = [5, 10, 40]\n");
    let (code, err) = run(&["rarefy", "--config", s(&cfg)]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("40"), "{err}");
}

#[test]
fn adoption_at_parity_costs_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("zero");
    let (code, err) = run(&["adoption", "--delta", "0", "--out", s(&out)]);
    assert_eq!(code, 0, "{err}");
    let t = read_csv(&out.join("thresholds.csv"));
    assert_eq!(t.headers, ["model", "task", "delta", "bcrit_x1", "bcrit_x5", "bcrit_x10", "bcrit_x25"]);
    assert!(t.rows[0][2..].iter().all(|v| v == "0.000000"));
    let costs = read_csv(&out.join("expected_cost.csv"));
    assert_eq!(costs.rows.len(), 15);
    let c = costs.column("expected_cost").unwrap();
    assert!(costs.rows.iter().all(|r| r[c] == "0.000000"));

    let out = dir.path().join("above");
    let (code, err) = run(&["adoption", "--rho", "1.3", "--kappa-h", "0.6", "--out", s(&out)]);
    assert_eq!(code, 0, "{err}");
    let t = read_csv(&out.join("thresholds.csv"));
    assert!(t.rows[0][2..].iter().all(|v| v == "0.000000"));
}

#[test]
fn adoption_rejects_incomplete_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(run(&["adoption", "--rho", "0.5", "--out", s(&out)]).0, 2);
    assert_eq!(run(&["adoption", "--delta", "-0.1", "--out", s(&out)]).0, 2);
    assert_eq!(run(&["adoption", "--out", s(&out)]).0, 2);
}

#[test]
fn adoption_reads_an_estimate_summary() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &two_sources(spread(), Mixture::uniform(2), 30, 10));
    let extra = "[adoption]\nestimates = \"out/family_summary.csv\"\nexposures = [1, 5]\n";
    let cfg = write_config(dir.path(), &["semantic"], 100, extra);
    assert_eq!(run(&["estimate", "--config", s(&cfg)]).0, 0);
    let summary = read_csv(&dir.path().join("out/family_summary.csv"));
    let delta = f(&cell(&summary, "kernel", "semantic", "delta_meanofconds"));

    let out = dir.path().join("adopt");
    let (code, err) = run(&["adoption", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code, 0, "{err}");
    let t = read_csv(&out.join("thresholds.csv"));
    let x5 = f(&cell(&t, "model", "model-a", "bcrit_x5"));
    assert!((x5 - (1.0 - (-5.0 * delta).exp())).abs() < 1e-5);
    assert!(out.join("bcrit_curve.csv").exists());
    assert!(out.join("plots/bcrit_curves.svg").exists());
}

#[test]
fn identical_protocols_compare_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &two_sources(spread(), Mixture::uniform(3), 30, 11));
    let extra = "[compare]\nbaseline = \"\"\ncandidate = \"\"\n";
    let cfg = write_config(dir.path(), &["semantic", "bucket"], 100, extra);
    let (code, err) = run(&["compare", "--config", s(&cfg)]);
    assert_eq!(code, 0, "{err}");
    let t = read_csv(&dir.path().join("out/protocol_comparison.csv"));
    assert_eq!(t.rows.len(), 2);
    for col in ["delta_rho", "delta_rho_lo", "delta_rho_hi"] {
        let c = t.column(col).unwrap();
        assert!(t.rows.iter().all(|r| r[c] == "0.000000"), "{col}");
    }
    assert!(dir.path().join("out/protocol_bcrit_curve.csv").exists());
}

#[test]
fn compare_without_anything_to_compare_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &two_sources(spread(), spread(), 10, 12));
    let cfg = write_config(dir.path(), &["bucket"], 100, "");
    assert_eq!(run(&["compare", "--config", s(&cfg)]).0, 2);
    let bad = write_config(dir.path(), &["bucket"], 100, "[compare]\nbaseline = \"neutral\"\ncandidate = \"persona\"\n");
    assert_eq!(run(&["compare", "--config", s(&bad)]).0, 2);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &two_sources(spread(), spread(), 10, 13));
    let cfg = write_config(dir.path(), &["bucket"], 100, "[estimator2]\nx = 1\n");
    assert_eq!(run(&["validate", "--config", s(&cfg)]).0, 2);
    let missing = dir.path().join("nope.toml");
    assert_eq!(run(&["validate", "--config", s(&missing)]).0, 2);
}
