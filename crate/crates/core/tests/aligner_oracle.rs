use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use sape_core::edit_aligner::align;
use sape_core::stat_aligner::gdfa;
use sape_core::{Alignment, SynonymLexicon};
use sape_oracle::{min_crossings_exact, staged_align};

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(Config { cases, ..Config::default() }, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn words(vocab: &'static [&'static str], max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vocab), 0..=max).prop_map(|v| v.into_iter().map(String::from).collect())
}

const LETTERS: &[&str] = &["a", "b", "c", "d"];
const MIXED: &[&str] = &["walk", "walks", "walked", "stroll", "run", "ran", "sprint", "dog", "cat"];

#[test]
fn exact_alignment_has_minimal_crossings() {
    let lexicon = SynonymLexicon::default();
    runner(500)
        .run(&(words(LETTERS, 6), words(LETTERS, 6)), |(h, r)| {
            let got = align(&h, &r, &lexicon);
            let (size, crossings) = min_crossings_exact(&h, &r);
            prop_assert_eq!(got.len(), size);
            prop_assert_eq!(got.crossings(), crossings);
            Ok(())
        })
        .unwrap();
}

#[test]
fn staged_alignment_matches_enumeration() {
    let lexicon = SynonymLexicon::from_groups([["walk", "stroll"], ["run", "sprint"]]);
    runner(500)
        .run(&(words(MIXED, 6), words(MIXED, 6)), |(h, r)| {
            let got = align(&h, &r, &lexicon).alignment();
            let want = staged_align(&h, &r, &lexicon);
            prop_assert_eq!(got.crossings(), want.crossings());
            prop_assert_eq!(got, want);
            Ok(())
        })
        .unwrap();
}

fn links(n: usize, m: usize) -> impl Strategy<Value = Alignment> {
    prop::collection::vec(prop::bool::weighted(0.3), n * m)
        .prop_map(move |mask| Alignment::from_pairs((0..n * m).filter(|&k| mask[k]).map(|k| (k / m, k % m))))
}

#[test]
fn gdfa_between_intersection_and_union() {
    let pairs = (1usize..=8, 1usize..=8).prop_flat_map(|(n, m)| (links(n, m), links(n, m)));
    runner(1000)
        .run(&pairs, |(f, r)| {
            let g = gdfa(&f, &r);
            prop_assert!(f.intersection(&r).is_subset(&g));
            prop_assert!(g.is_subset(&f.union(&r)));
            Ok(())
        })
        .unwrap();
}
