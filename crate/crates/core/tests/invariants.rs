use proptest::prelude::*;

use selectivbench::complexity::topological_entropy;
use selectivbench::grammar::{build_grammar, Grammar, GrammarConfig};
use selectivbench::io::{read_dataset, write_dataset, DataFormat};
use selectivbench::oracle::{oracle_eval, predict_encoded};
use selectivbench::tasks::{accuracy, encode, generate, DataSplit, GapTest, Payload, Scope, TaskConfig};

fn grammar(s: usize, a: usize, p: f64, seed: u64) -> Option<Grammar> {
    build_grammar(&GrammarConfig {
        num_observables: s,
        ambiguity: a,
        p_transition: p,
        p_end: 0.05,
        seed,
        ..GrammarConfig::default()
    })
    .ok()
}

fn task(task: u8, split: DataSplit, seed: u64) -> TaskConfig {
    TaskConfig {
        task,
        t_min: 1,
        t_max: 40,
        n_min: 0,
        n_max: 4,
        gap_test: if task == 4 { GapTest::Sweep(vec![1, 3]) } else { GapTest::Fixed(2) },
        gamma: 0.2,
        p_gap: 0.5,
        split,
        num_sequences: 12,
        seed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn oracle_is_exact_on_every_task(s in 2usize..12, a in 1usize..5, p in 0.02f64..0.4, seed in any::<u64>(), t in 1u8..=4) {
        let Some(g) = grammar(s, a, p, seed) else { return Ok(()) };
        let split = if seed % 2 == 0 { DataSplit::Train } else { DataSplit::Test };
        let datasets = match generate(&g, &task(t, split, seed)) {
            Ok(d) => d,
            // Non-grammatical gaps need an unreachable observable.
            Err(selectivbench::Error::EmptyDistractorSet { .. }) if t == 3 => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        for ds in &datasets {
            let r = oracle_eval(&g, ds);
            prop_assert!(r.certified(), "{}", r.summary());
            for stream in &ds.streams {
                let pred = predict_encoded(&g, &encode(stream, g.vocab_size()).unwrap()).unwrap();
                prop_assert_eq!(accuracy(&pred, stream, Scope::All).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn gaps_hold_the_preceding_target(s in 2usize..10, a in 1usize..4, seed in any::<u64>(), t in 2u8..=3) {
        let Some(g) = grammar(s, a, 0.1, seed) else { return Ok(()) };
        let Ok(datasets) = generate(&g, &task(t, DataSplit::Train, seed)) else { return Ok(()) };
        for stream in datasets.iter().flat_map(|d| &d.streams) {
            for w in stream.tokens.windows(2) {
                if w[1].is_gap() {
                    prop_assert_eq!(w[1].target, w[0].target);
                }
                if let Payload::NonGrammaticalGap(o) = w[1].payload {
                    prop_assert!(g.non_reachable_observables(w[1].target).contains(&o));
                }
                if let Payload::NoiseGap(v) = &w[1].payload {
                    prop_assert_eq!(v.len(), g.vocab_size());
                    prop_assert!(v.iter().all(|x| (0.0..=0.2).contains(x)));
                }
            }
        }
    }

    #[test]
    fn records_round_trip(s in 2usize..8, a in 1usize..4, seed in any::<u64>(), binary in any::<bool>()) {
        let Some(g) = grammar(s, a, 0.2, seed) else { return Ok(()) };
        let ds = generate(&g, &task(2, DataSplit::Train, seed)).unwrap().remove(0);
        let dir = tempfile::tempdir().unwrap();
        let format = if binary { DataFormat::Binary } else { DataFormat::Text };
        let m = write_dataset(dir.path(), &ds, format, &g.content_hash(), &g.grammar_id(), g.vocab_size()).unwrap();
        let loaded = read_dataset(&dir.path().join(&m.file)).unwrap();
        prop_assert!(loaded.content_hash_ok);
        prop_assert_eq!(loaded.dataset.streams, ds.streams);
    }

    #[test]
    fn entropy_is_bounded(s in 1usize..10, a in 1usize..5, p in 0.0f64..1.0, seed in any::<u64>()) {
        let Some(g) = grammar(s, a, p, seed) else { return Ok(()) };
        let h = topological_entropy(&g).unwrap();
        // The out-degree is at most one successor per observable.
        prop_assert!(h >= 0.0 && h <= (s as f64).ln() + 1e-9, "h = {}", h);
    }
}
