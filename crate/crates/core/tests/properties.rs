use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use taxometer::adequacy::{nliv, Mode};
use taxometer::gateway::mock::{MockFillMask, MockNli, MockSimilarity};
use taxometer::gateway::{RelationJudgment, SimilarityProvider};
use taxometer::harness::{rate_score, study_vocabulary};
use taxometer::mutation::{degrade, mutate, MutationKind};
use taxometer::robustness::{csc_with_matrix, kendall_tau_b, representations, PairPolicy, PairSample};
use taxometer::{triplet_prf, Concept, Taxonomy};

const WORDS: &[&str] = &[
    "red", "green", "round", "sweet", "sour", "plant", "animal", "metal", "liquid", "small", "large", "fruit",
];

/// Parent lists where parents precede children; one concept in five gets a
/// second parent.
fn parents_strategy(max: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    (2..=max).prop_flat_map(|n| {
        prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>(), 0u8..10), n).prop_map(
            |picks| {
                picks
                    .iter()
                    .enumerate()
                    .map(|(i, (a, b, roll))| {
                        if i == 0 || *roll == 0 {
                            return Vec::new();
                        }
                        let mut ps = vec![a.index(i)];
                        let q = b.index(i);
                        if *roll >= 8 && q != ps[0] {
                            ps.push(q);
                        }
                        ps
                    })
                    .collect()
            },
        )
    })
}

fn build(parents: &[Vec<usize>]) -> Taxonomy {
    let concepts = (0..parents.len())
        .map(|i| {
            let gloss = format!(
                "{} {} thing {i}",
                WORDS[i % WORDS.len()],
                WORDS[(i * 7 + 3) % WORDS.len()]
            );
            Concept::new(format!("c{i}"), format!("concept{i}"), gloss)
        })
        .collect();
    let edges: Vec<(String, String)> = parents
        .iter()
        .enumerate()
        .flat_map(|(c, ps)| ps.iter().map(move |&p| (format!("c{p}"), format!("c{c}"))))
        .collect();
    Taxonomy::from_edges(concepts, edges).unwrap()
}

fn ids(t: &Taxonomy) -> Vec<String> {
    t.concepts().iter().map(|c| c.id.clone()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wu_palmer_is_symmetric_and_bounded(parents in parents_strategy(16)) {
        let t = build(&parents);
        let ids = ids(&t);
        for a in &ids {
            prop_assert_eq!(t.wu_palmer(a, a).unwrap(), 1.0);
            for b in &ids {
                let ab = t.wu_palmer(a, b).unwrap();
                prop_assert!(ab > 0.0 && ab <= 1.0);
                prop_assert_eq!(ab, t.wu_palmer(b, a).unwrap());
            }
        }
    }

    #[test]
    fn augmentation_is_idempotent(parents in parents_strategy(16)) {
        let t = build(&parents);
        let rebuilt = Taxonomy::from_edges(t.concepts().to_vec(), t.edges()).unwrap();
        prop_assert_eq!(&rebuilt, &t);
        prop_assert_eq!(rebuilt.fingerprint(), t.fingerprint());
    }

    #[test]
    fn csc_ignores_monotone_transforms(parents in parents_strategy(14)) {
        let t = build(&parents);
        let matrix = MockSimilarity::new(3).similarity_matrix(&representations(&t)).unwrap();
        let cubed = matrix.map(|x| x * x * x);
        let sample = PairSample::draw(&t, PairPolicy::Exhaustive);
        match (csc_with_matrix(&t, &matrix, &sample), csc_with_matrix(&t, &cubed, &sample)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.tau, b.tau),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn tau_b_ignores_pair_order(
        values in prop::collection::vec((0u8..5, 0u8..5), 2..60),
        shuffle_seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let xs: Vec<f64> = values.iter().map(|v| v.0 as f64).collect();
        let ys: Vec<f64> = values.iter().map(|v| v.1 as f64).collect();
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        let xs2: Vec<f64> = order.iter().map(|&i| xs[i]).collect();
        let ys2: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
        match (kendall_tau_b(&xs, &ys), kendall_tau_b(&xs2, &ys2)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.tau, b.tau);
                prop_assert_eq!(a.p_value, b.p_value);
                prop_assert!((-1.0..=1.0).contains(&a.tau));
                prop_assert!((0.0..=1.0).contains(&a.p_value));
            }
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn nliv_of_a_constant_judgment_is_that_probability(parents in parents_strategy(14), e in 0.01f64..0.99) {
        let t = build(&parents);
        let nli = MockNli::uniform(RelationJudgment::new(0.0, 1.0 - e, e).unwrap());
        if let Ok(r) = nliv(&t, &nli, Mode::Strong) {
            prop_assert!((r.score - e).abs() < 1e-9);
        }
    }

    #[test]
    fn weak_nliv_dominates_strong(parents in parents_strategy(14), seed in any::<u64>()) {
        let t = build(&parents);
        let nli = MockNli::lexical(seed);
        if let (Ok(s), Ok(w)) = (nliv(&t, &nli, Mode::Strong), nliv(&t, &nli, Mode::Weak)) {
            prop_assert!(w.score + 1e-12 >= s.score);
            prop_assert!((0.0..=1.0).contains(&s.score) && (0.0..=1.0).contains(&w.score));
        }
    }

    #[test]
    fn mutations_only_move_one_unrelated_concept(parents in parents_strategy(16), seed in any::<u64>()) {
        let t = build(&parents);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for kind in [MutationKind::Leaf, MutationKind::NonLeaf, MutationKind::Any] {
            let Ok((m, op)) = mutate(&t, kind, &mut rng) else { continue };
            m.validate().unwrap();
            prop_assert_eq!(ids(&m), ids(&t));
            prop_assert_eq!(m.parents(&op.moved_id).unwrap(), vec![op.new_parent_id.as_str()]);
            prop_assert!(!op.old_parent_ids.contains(&op.new_parent_id));
            // neither endpoint was an ancestor of the other before the move
            let above = |a: &str, b: &str| t.root_paths(b).unwrap().iter().any(|p| p.node_ids.iter().any(|x| x == a));
            prop_assert!(!above(&op.moved_id, &op.new_parent_id));
            prop_assert!(!above(&op.new_parent_id, &op.moved_id));
            let was_leaf = t.is_leaf(&op.moved_id).unwrap();
            match kind {
                MutationKind::Leaf => prop_assert!(was_leaf),
                MutationKind::NonLeaf => prop_assert!(!was_leaf),
                MutationKind::Any => {}
            }
            // every other concept keeps its parents
            for id in ids(&t).iter().filter(|&id| *id != op.moved_id) {
                let before: BTreeSet<&str> = t.parents(id).unwrap().into_iter().collect();
                let after: BTreeSet<&str> = m.parents(id).unwrap().into_iter().collect();
                prop_assert_eq!(before, after);
            }
        }
    }

    #[test]
    fn traces_replay_to_their_checkpoints(parents in parents_strategy(16), seed in any::<u64>()) {
        let t = build(&parents);
        let trace = degrade(&t, &[1, 3, 9], MutationKind::Any, seed).unwrap();
        let again = degrade(&t, &[1, 3, 9], MutationKind::Any, seed).unwrap();
        prop_assert_eq!(&trace.ops, &again.ops);
        for (count, version) in trace.materialize(&t).unwrap() {
            prop_assert_eq!(&trace.replay(&t, count).unwrap(), &version);
        }
    }

    #[test]
    fn rate_grows_with_k(parents in parents_strategy(16), seed in any::<u64>()) {
        let t = build(&parents);
        let mlm = MockFillMask::hashed(seed, study_vocabulary(std::slice::from_ref(&t)));
        let mut last = 0.0;
        for k in [1, 2, 4, 8, 32] {
            match rate_score(&t, &mlm, k) {
                Ok(r) => {
                    prop_assert!(r.score >= last);
                    last = r.score;
                }
                Err(_) => break,
            }
        }
    }

    #[test]
    fn triplet_f1_is_symmetric(a in parents_strategy(12), seed in any::<u64>()) {
        let gold = build(&a);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Ok((pred, _)) = mutate(&gold, MutationKind::Any, &mut rng) else { return Ok(()) };
        let ab = triplet_prf(&pred, &gold).unwrap();
        let ba = triplet_prf(&gold, &pred).unwrap();
        prop_assert_eq!(ab.f1, ba.f1);
        prop_assert_eq!(ab.precision, ba.recall);
        prop_assert_eq!((ab.fp, ab.fn_), (ba.fn_, ba.fp));
        prop_assert!(ab.f1 < 1.0);
    }
}
