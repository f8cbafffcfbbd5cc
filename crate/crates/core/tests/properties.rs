use std::collections::BTreeSet;

use layoutjudge::consensus::{aggregate, Driver};
use layoutjudge::dtree::{fold_assignments, importance, train, FeatureVector, TreeParams};
use layoutjudge::metrics::{classification_metrics, confusion, mcnemar_from_counts};
use layoutjudge::parser::{parse_diagnostic, parse_gestalt, Answer, Answers, DiagnosticResponse, GestaltAssessment, Principle};
use layoutjudge::synth::epoch;
use layoutjudge::{Annotation, Label, Store};
use proptest::prelude::*;

fn label() -> impl Strategy<Value = Label> {
    prop_oneof![Just(Label::Complex), Just(Label::NotComplex)]
}

fn answer() -> impl Strategy<Value = Answer> {
    prop_oneof![Just(Answer::Yes), Just(Answer::No), Just(Answer::NotSure)]
}

fn response() -> impl Strategy<Value = DiagnosticResponse> {
    (prop::array::uniform25(answer()), 1u8..=5, "[ -~]{0,80}").prop_map(|(a, score, text)| DiagnosticResponse {
        answers: Answers(a),
        complexity_score: score,
        explanation: text,
    })
}

fn pairs(max: usize) -> impl Strategy<Value = Vec<(Label, Label)>> {
    prop::collection::vec((label(), label()), 1..max)
}

fn flip(v: &[(Label, Label)]) -> Vec<(Label, Label)> {
    v.iter().map(|(t, p)| (t.flipped(), p.flipped())).collect()
}

fn kappa(v: &[(Label, Label)]) -> Option<f64> {
    let (t, p): (Vec<_>, Vec<_>) = v.iter().copied().unzip();
    classification_metrics(&confusion(&t, &p).unwrap()).unwrap().cohen_kappa.value()
}

fn vote(i: usize, complex: bool) -> Annotation {
    Annotation {
        sample_id: "s".into(),
        annotator_id: format!("a{i}"),
        label: if complex { Label::Complex } else { Label::NotComplex },
        drivers: if complex { BTreeSet::from([Driver::CATALOG[i % 7]]) } else { BTreeSet::new() },
        submitted_at: epoch(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn diagnostic_parse_round_trips(r in response()) {
        let parsed = parse_diagnostic(&r.to_json()).unwrap();
        prop_assert!(!parsed.repair_applied);
        prop_assert_eq!(&parsed.value, &r);
        let again = parse_diagnostic(&parsed.value.to_json()).unwrap();
        prop_assert_eq!(again.value, parsed.value);
    }

    #[test]
    fn fenced_and_trailing_comma_parse_equal(r in response(), prose in "[a-zA-Z .]{0,40}") {
        let trailing = r.to_json().replace("\"\n", "\",\n");
        let wrapped = format!("{prose}\n```json\n{trailing}\n```\n{prose}");
        let parsed = parse_diagnostic(&wrapped).unwrap();
        prop_assert_eq!(parsed.value, r);
    }

    #[test]
    fn gestalt_render_parses_back(raw in prop::array::uniform6(0u8..=4), final_score in 1u8..=5) {
        let scores: [u8; 6] = std::array::from_fn(|i| raw[i] % Principle::ALL[i].max_score() + 1);
        let rendered = GestaltAssessment::render(scores, final_score, "looks busy");
        let parsed = parse_gestalt(&rendered.rationale_text).unwrap();
        prop_assert_eq!(parsed.final_score, final_score);
        prop_assert_eq!(parsed, rendered);
    }

    #[test]
    fn kappa_is_symmetric_under_label_swap(v in pairs(80)) {
        match (kappa(&v), kappa(&flip(&v))) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn metrics_are_permutation_invariant(v in pairs(80), seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut shuffled = v.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (t1, p1): (Vec<_>, Vec<_>) = v.into_iter().unzip();
        let (t2, p2): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
        let a = classification_metrics(&confusion(&t1, &p1).unwrap()).unwrap();
        let b = classification_metrics(&confusion(&t2, &p2).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn metric_ranges(v in pairs(80)) {
        let (t, p): (Vec<_>, Vec<_>) = v.into_iter().unzip();
        let m = classification_metrics(&confusion(&t, &p).unwrap()).unwrap();
        for x in [m.precision, m.recall, m.f1].into_iter().filter_map(|m| m.value()) {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        if let Some(k) = m.cohen_kappa.value() {
            prop_assert!((-1.0..=1.0 + 1e-12).contains(&k));
        }
    }

    #[test]
    fn mcnemar_p_in_unit_interval_and_symmetric(b in 0u64..200, c in 0u64..200) {
        let x = mcnemar_from_counts(b, c);
        let y = mcnemar_from_counts(c, b);
        prop_assert!((0.0..=1.0).contains(&x.p_value));
        prop_assert!((x.p_value - y.p_value).abs() < 1e-12);
    }

    #[test]
    fn importance_sums_to_one_or_zero(
        rows in prop::collection::vec((prop::array::uniform25(prop_oneof![Just(0.0), Just(0.5), Just(1.0)]), label()), 2..80),
        depth in 1usize..5,
        leaf in 1usize..6,
    ) {
        let xs: Vec<FeatureVector> = rows.iter().map(|(x, _)| FeatureVector(*x)).collect();
        let ys: Vec<Label> = rows.iter().map(|(_, y)| *y).collect();
        let tree = train(&xs, &ys, TreeParams { max_depth: depth, min_samples_leaf: leaf, seed: 0 }).unwrap();
        let imp = importance(&tree);
        prop_assert!(imp.0.iter().all(|&v| v >= 0.0));
        if tree.root.is_leaf() {
            prop_assert_eq!(imp.sum(), 0.0);
        } else {
            prop_assert!((imp.sum() - 1.0).abs() < 1e-9, "sum {}", imp.sum());
        }
        prop_assert!(tree.root.depth() <= depth);
    }

    #[test]
    fn folds_are_balanced_per_class(labels in prop::collection::vec(label(), 10..120), k in 2usize..6, seed in any::<u64>()) {
        let complex = labels.iter().filter(|l| l.is_complex()).count();
        prop_assume!(complex >= k && labels.len() - complex >= k);
        let folds = fold_assignments(&labels, k, seed).unwrap();
        for class in [Label::Complex, Label::NotComplex] {
            let sizes: Vec<usize> = (0..k)
                .map(|f| (0..labels.len()).filter(|&i| folds[i] == f && labels[i] == class).count())
                .collect();
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            prop_assert!(hi - lo <= 1, "{:?}", sizes);
        }
        let totals: Vec<usize> = (0..k).map(|f| folds.iter().filter(|&&x| x == f).count()).collect();
        prop_assert!(totals.iter().max().unwrap() - totals.iter().min().unwrap() <= 1, "{:?}", totals);
    }

    #[test]
    fn consensus_is_monotone_in_complex_votes(votes in prop::collection::vec(any::<bool>(), 1..12)) {
        let anns: Vec<Annotation> = votes.iter().enumerate().map(|(i, &c)| vote(i, c)).collect();
        let before = aggregate(&anns).unwrap();
        let mut more = anns.clone();
        more.push(vote(votes.len(), true));
        let after = aggregate(&more).unwrap();
        if before.label == Label::Complex {
            prop_assert_eq!(after.label, Label::Complex);
        }
        prop_assert_eq!(after.complex_votes, before.complex_votes + 1);
        // flipping one NotComplex vote to Complex never demotes the label
        if let Some(i) = votes.iter().position(|v| !v) {
            let mut flipped = anns.clone();
            flipped[i] = vote(i, true);
            let f = aggregate(&flipped).unwrap();
            prop_assert!(!(before.label == Label::Complex && f.label == Label::NotComplex));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn store_round_trips_annotations(votes in prop::collection::vec((any::<bool>(), 0usize..7), 1..8)) {
        let dir = tempfile::tempdir().unwrap();
        let staging = dir.path().join("staging");
        std::fs::create_dir_all(&staging).unwrap();
        std::fs::write(staging.join("p.png"), layoutjudge::synth::srp_screenshot(1, 0.5, 0)).unwrap();
        let mut store = Store::open(dir.path().join("c")).unwrap();
        store
            .ingest_entries(
                &[layoutjudge::corpus::ManifestEntry {
                    id: "s".into(),
                    query: "q".into(),
                    category: layoutjudge::Category::Other,
                    screenshots: vec!["p.png".into()],
                    created_at: Some(epoch()),
                }],
                &staging,
            )
            .unwrap();
        let mut written = Vec::new();
        for (i, (complex, d)) in votes.iter().enumerate() {
            let mut a = vote(i, *complex);
            if *complex {
                a.drivers = BTreeSet::from([Driver::CATALOG[*d]]);
            }
            written.push(store.store_annotation(a, false).unwrap());
        }
        let reopened = Store::open(dir.path().join("c")).unwrap();
        prop_assert_eq!(reopened.samples(), store.samples());
        prop_assert_eq!(reopened.annotations_for("s"), written);
        prop_assert_eq!(reopened.consensus("s").unwrap(), store.consensus("s").unwrap());
    }
}
