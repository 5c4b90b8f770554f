use crowdbench_core::corpus::{partition_units, Response, SamplingUnit, Source, SourceKey};
use crowdbench_core::embedding::EmbeddingTable;
use crowdbench_core::estimators::{
    aggregate_family, bootstrap_condition, bootstrap_units, compare_protocols, condition_inputs,
    ConditionEstimate, EstimatorConfig, FamilyEstimate, Replicate,
};
use crowdbench_core::kernels::{KernelKind, KernelSpec};
use crowdbench_core::stats::{summarize, Estimate};
use crowdbench_core::synthetic::{add_resampled_source, build_fixture, Mixture, SourceSpec};

fn cfg(replicates: usize, seed: u64) -> EstimatorConfig {
    EstimatorConfig {
        replicates,
        seed,
        ..Default::default()
    }
}

fn vector_response(id: &str, source: &str) -> Response {
    Response {
        id: id.into(),
        source: Source::parse(source),
        task_family: "aut".into(),
        condition_id: "brick".into(),
        participant_id: None,
        text: id.into(),
        synopsis: None,
        bucket_id: None,
        protocol: None,
    }
}

fn singletons(rs: &[Response]) -> Vec<SamplingUnit> {
    rs.iter()
        .map(|r| SamplingUnit {
            unit_id: r.id.clone(),
            responses: vec![r.clone()],
        })
        .collect()
}

#[test]
fn orthogonal_humans_against_a_repeated_vector() {
    let mut table = EmbeddingTable::new(None);
    table.insert_raw("h0", vec![1.0, 0.0, 0.0]).unwrap();
    table.insert_raw("h1", vec![0.0, 1.0, 0.0]).unwrap();
    table.insert_raw("m0", vec![0.0, 0.0, 1.0]).unwrap();
    table.insert_raw("m1", vec![0.0, 0.0, 1.0]).unwrap();
    let humans = vec![vector_response("h0", "human"), vector_response("h1", "human")];
    let models = vec![vector_response("m0", "gpt"), vector_response("m1", "gpt")];
    let spec = KernelSpec::new(KernelKind::Semantic);

    // Enumerate every b = 2 resample of each side with its probability.
    let human_vecs = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
    let k = |a: &[f64; 3], b: &[f64; 3]| (1.0 + a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()) / 2.0;
    let mut expected_kh = 0.0;
    let mut defined = 0.0;
    let mut expected_rho_sum = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let kh = k(&human_vecs[i], &human_vecs[j]);
            expected_kh += 0.25 * kh;
            if kh < 1.0 {
                defined += 0.25;
                expected_rho_sum += 0.25 * (1.0 - 1.0) / (1.0 - kh);
            }
        }
    }
    let expected_rho = expected_rho_sum / defined;
    assert_eq!(expected_kh, 0.75);

    let config = EstimatorConfig {
        max_flagged_fraction: 1.0,
        ..cfg(2000, 5)
    };
    let est = bootstrap_condition(&singletons(&humans), &models, &spec, &config, Some(&table)).unwrap();
    assert_eq!(est.b, 2);
    assert_eq!(est.kappa_a.point, 1.0);
    assert_eq!(est.rho.point, expected_rho);
    assert!((est.kappa_h.point - expected_kh).abs() < 4.0 * 0.25 / (2000f64).sqrt());
    let flagged = est.flagged as f64 / 2000.0;
    assert!((flagged - (1.0 - defined)).abs() < 0.05);

    // The default tolerance for undefined ratios rejects this condition.
    let err = bootstrap_condition(&singletons(&humans), &models, &spec, &cfg(2000, 5), Some(&table));
    assert!(err.unwrap_err().to_string().contains("brick"));
}

fn relabel(units: &[SamplingUnit], label: &str) -> Vec<SamplingUnit> {
    units
        .iter()
        .map(|u| SamplingUnit {
            unit_id: u.unit_id.clone(),
            responses: u
                .responses
                .iter()
                .map(|r| Response {
                    source: Source::parse(label),
                    ..r.clone()
                })
                .collect(),
        })
        .collect()
}

fn diverse_fixture(units: usize) -> crowdbench_core::synthetic::Fixture {
    let mixture = Mixture::new(vec![0.2, 0.18, 0.15, 0.13, 0.11, 0.09, 0.08, 0.06]);
    build_fixture("aut", &["brick"], &[SourceSpec::human(mixture, units, 1)], 17)
}

#[test]
fn source_against_itself_sits_at_parity_for_every_kernel() {
    // Same unit pool on both sides under a different label, so each side is resampled
    // independently in every replicate.
    let fx = diverse_fixture(200);
    let humans = partition_units(&fx.corpus, &SourceKey::human(), "brick").unwrap();
    let twin = relabel(&humans, "twin");
    for kind in KernelKind::ALL {
        let spec = KernelSpec::new(kind);
        let est = bootstrap_units(&humans, &twin, &spec, &cfg(1000, 3), Some(&fx.table)).unwrap();
        assert!(est.delta.point < 0.01, "{kind}: delta {}", est.delta.point);
        assert!(est.rho.contains(1.0), "{kind}: rho {:?}", est.rho);
        assert!((est.rho.point - 1.0).abs() <= 3.0 * est.rho.sd, "{kind}: rho {:?}", est.rho);
    }
}

#[test]
fn resampled_corpus_stays_near_parity() {
    // A with-replacement copy of the corpus carries its own sampling noise on top of the
    // bootstrap noise, hence the √2 widening.
    let mut fx = diverse_fixture(400);
    add_resampled_source(&mut fx, &SourceKey::human(), "copy", 400, 18);
    let (humans, models) =
        condition_inputs(&fx.corpus, &SourceKey::model("copy", None), "brick").unwrap();
    for kind in KernelKind::ALL {
        let est = bootstrap_condition(&humans, &models, &KernelSpec::new(kind), &cfg(1000, 3), Some(&fx.table))
            .unwrap();
        let tol = 3.0 * std::f64::consts::SQRT_2 * est.rho.sd;
        assert!((est.rho.point - 1.0).abs() <= tol, "{kind}: rho {:?}", est.rho);
    }
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let fx = build_fixture(
        "aut",
        &["brick"],
        &[
            SourceSpec::human(Mixture::uniform(4), 50, 3),
            SourceSpec::model("gpt", Some("neutral"), Mixture::new(vec![0.6, 0.4]), 60),
        ],
        23,
    );
    let model = SourceKey::model("gpt", Some("neutral"));
    let (humans, models) = condition_inputs(&fx.corpus, &model, "brick").unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            bootstrap_condition(&humans, &models, &KernelSpec::new(KernelKind::Semantic), &cfg(500, 9), Some(&fx.table))
                .unwrap()
        })
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    assert_eq!(one.replicates, four.replicates);
}

fn constant_condition(condition: &str, kh: f64, ka: f64, reps: usize) -> ConditionEstimate {
    let replicate = Replicate {
        kappa_h: kh,
        kappa_a: ka,
        delta: (ka - kh).max(0.0),
        delta_unclamped: ka - kh,
        rho: Some((1.0 - ka) / (1.0 - kh)),
    };
    let est = |v: f64| Estimate {
        point: v,
        lo: v,
        hi: v,
        sd: 0.0,
    };
    ConditionEstimate {
        condition_id: condition.into(),
        task_family: "stories".into(),
        human: "human".into(),
        model: "gpt".into(),
        b: 35,
        kappa_h: est(kh),
        kappa_a: est(ka),
        delta: est(replicate.delta),
        delta_unclamped: est(replicate.delta_unclamped),
        rho: est(replicate.rho.unwrap()),
        flagged: 0,
        ci_level: 0.95,
        seed: 0,
        replicates: vec![replicate; reps],
    }
}

#[test]
fn single_condition_aggregate_is_the_condition() {
    let c = constant_condition("p1", 0.6, 0.8, 100);
    let fam = aggregate_family(vec![c.clone()]).unwrap();
    assert_eq!(fam.kappa_h, c.kappa_h);
    assert_eq!(fam.kappa_a, c.kappa_a);
    assert_eq!(fam.rho, c.rho);
    assert_eq!(fam.delta, c.delta);
}

#[test]
fn equal_weight_rho_average() {
    // ρ = (1 − κᴬ)/(1 − κᴴ): 0.3/0.75 = 0.4 and 0.45/0.75 = 0.6.
    let a = constant_condition("p1", 0.25, 0.7, 100);
    let b = constant_condition("p2", 0.25, 0.55, 100);
    let fam = aggregate_family(vec![a, b]).unwrap();
    assert!((fam.rho.point - 0.5).abs() < 1e-12);
}

#[test]
fn both_family_variants_are_reported() {
    // Two conditions averaging to κ̄ᴴ = 0.706, κ̄ᴬ = 0.892.
    let a = constant_condition("p1", 0.606, 0.842, 100);
    let b = constant_condition("p2", 0.806, 0.942, 100);
    let fam = aggregate_family(vec![a.clone(), b.clone()]).unwrap();
    assert!((fam.kappa_h.point - 0.706).abs() < 1e-12);
    assert!((fam.kappa_a.point - 0.892).abs() < 1e-12);
    assert!((fam.rho_of_aggregates - 0.3673).abs() < 5e-4);
    assert!((fam.rho.point - (a.rho.point + b.rho.point) / 2.0).abs() < 1e-12);
    assert!((fam.delta_of_aggregates - 0.186).abs() < 1e-12);
    assert!((fam.delta.point - (a.delta.point + b.delta.point) / 2.0).abs() < 1e-12);
}

#[test]
fn aggregate_point_is_mean_of_condition_points() {
    let fx = build_fixture(
        "aut",
        &["brick", "clip", "tire"],
        &[
            SourceSpec::human(Mixture::uniform(5), 30, 2),
            SourceSpec::model("gpt", None, Mixture::new(vec![0.7, 0.2, 0.1]), 40),
        ],
        29,
    );
    let model = SourceKey::model("gpt", None);
    let spec = KernelSpec::new(KernelKind::Bucket);
    let conditions: Vec<ConditionEstimate> = ["brick", "clip", "tire"]
        .iter()
        .map(|c| {
            let (h, m) = condition_inputs(&fx.corpus, &model, c).unwrap();
            bootstrap_condition(&h, &m, &spec, &cfg(300, 4), None).unwrap()
        })
        .collect();
    let fam = aggregate_family(conditions.clone()).unwrap();
    let avg = |f: fn(&ConditionEstimate) -> f64| conditions.iter().map(f).sum::<f64>() / 3.0;
    assert!((fam.kappa_h.point - avg(|c| c.kappa_h.point)).abs() < 1e-12);
    assert!((fam.kappa_a.point - avg(|c| c.kappa_a.point)).abs() < 1e-12);
    assert!((fam.delta.point - avg(|c| c.delta.point)).abs() < 1e-12);
    assert!((fam.rho.point - avg(|c| c.rho.point)).abs() < 1e-12);
    assert!(fam.rho.lo <= fam.rho.point && fam.rho.point <= fam.rho.hi);
}

fn family_with_rho_draws(rhos: Vec<f64>) -> FamilyEstimate {
    let reps: Vec<Replicate> = rhos
        .iter()
        .map(|&r| Replicate {
            kappa_h: 0.5,
            kappa_a: 1.0 - r * 0.5,
            delta: 0.0,
            delta_unclamped: 0.0,
            rho: Some(r),
        })
        .collect();
    let mut c = constant_condition("k", 0.5, 0.5, 0);
    c.rho = summarize(&rhos, 0.95);
    c.replicates = reps;
    aggregate_family(vec![c]).unwrap()
}

#[test]
fn identical_protocols_differ_by_zero() {
    let a = family_with_rho_draws((0..200).map(|i| 0.5 + (i % 7) as f64 * 0.01).collect());
    let d = compare_protocols(&a, &a).unwrap();
    assert_eq!(d.point, 0.0);
    assert!(d.lo <= 0.0 && 0.0 <= d.hi);
}

#[test]
fn tabulated_protocol_differences() {
    let main = family_with_rho_draws(vec![0.179; 200]);
    let persona = family_with_rho_draws(vec![0.927; 200]);
    let d = compare_protocols(&main, &persona).unwrap();
    assert!((d.point - 0.749).abs() < 0.0015);

    // Overlapping replicate spreads around 0.526 and 0.507.
    let spread = |c: f64| (0..400).map(|i| c + ((i * 37 % 101) as f64 - 50.0) * 0.0007).collect::<Vec<_>>();
    let main = family_with_rho_draws(spread(0.526));
    let persona = family_with_rho_draws(spread(0.507).into_iter().rev().collect());
    let d = compare_protocols(&main, &persona).unwrap();
    assert!((d.point - -0.018).abs() < 0.0015);
    assert!(d.lo < 0.0 && 0.0 < d.hi);
}

#[test]
fn mismatched_replicate_counts_are_rejected() {
    let a = family_with_rho_draws(vec![0.5; 200]);
    let b = family_with_rho_draws(vec![0.5; 300]);
    assert!(compare_protocols(&a, &b).is_err());
}

#[test]
fn engineered_protocol_gap() {
    // Bucket crowding is Σp². Humans: uniform over 4 → κᴴ = 0.25.
    // Protocol "a": one cluster → ρ = 0. Protocol "b": Σp² = 0.775 → ρ = 0.3.
    let p = (2.0 + (4.0f64 - 1.8).sqrt()) / 4.0;
    let fx = build_fixture(
        "aut",
        &["brick"],
        &[
            SourceSpec::human(Mixture::uniform(4), 600, 1),
            SourceSpec::model("gpt", Some("a"), Mixture::new(vec![1.0]), 600),
            SourceSpec::model("gpt", Some("b"), Mixture::new(vec![p, 1.0 - p]), 600),
        ],
        31,
    );
    let spec = KernelSpec::new(KernelKind::Bucket);
    let family = |protocol: &str| {
        let (h, m) = condition_inputs(&fx.corpus, &SourceKey::model("gpt", Some(protocol)), "brick").unwrap();
        aggregate_family(vec![bootstrap_condition(&h, &m, &spec, &cfg(1000, 8), None).unwrap()]).unwrap()
    };
    let d = compare_protocols(&family("a"), &family("b")).unwrap();
    assert!(d.lo <= 0.3 && 0.3 <= d.hi, "{d:?}");
    assert!((d.point - 0.3).abs() < 0.05);
}

#[test]
fn participant_units_drive_the_matched_size() {
    let fx = build_fixture(
        "aut",
        &["brick"],
        &[
            SourceSpec::human(Mixture::uniform(3), 12, 4),
            SourceSpec::model("gpt", None, Mixture::uniform(3), 30),
        ],
        2,
    );
    let units = partition_units(&fx.corpus, &SourceKey::human(), "brick").unwrap();
    assert_eq!(units.len(), 12);
    let (h, m) = condition_inputs(&fx.corpus, &SourceKey::model("gpt", None), "brick").unwrap();
    let est = bootstrap_condition(&h, &m, &KernelSpec::new(KernelKind::Bucket), &cfg(100, 1), None).unwrap();
    assert_eq!(est.b, 12);
}
