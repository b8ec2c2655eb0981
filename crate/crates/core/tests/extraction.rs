use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use sape_core::rule_extract::{
    count_rules, extract_phrases, good_turing_smooth, induce_hier_rules, ExtractConfig, RuleCounts, Symbol,
};
use sape_core::Alignment;
use sape_oracle::enumerate_phrases;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(Config { cases, ..Config::default() }, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

type Pair = (Vec<String>, Vec<String>, Alignment);

fn aligned_pair(max: usize) -> impl Strategy<Value = Pair> {
    (1..=max, 1..=max).prop_flat_map(|(n, m)| {
        let side = |len| prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), len);
        (side(n), side(m), prop::collection::vec(prop::bool::weighted(0.25), n * m)).prop_map(move |(s, t, mask)| {
            let links = (0..n * m).filter(|&k| mask[k]).map(|k| (k / m, k % m));
            (
                s.into_iter().map(String::from).collect(),
                t.into_iter().map(String::from).collect(),
                Alignment::from_pairs(links),
            )
        })
    })
}

#[test]
fn phrases_match_enumeration() {
    runner(200)
        .run(&(aligned_pair(8), 1usize..=8), |((mt, pe, a), max_len)| {
            let got: BTreeSet<_> = extract_phrases(&mt, &pe, &a, max_len)
                .unwrap()
                .into_iter()
                .map(|p| {
                    prop_assert_eq!(&p.mt_tokens[..], &mt[p.mt_span.0..=p.mt_span.1]);
                    prop_assert_eq!(&p.pe_tokens[..], &pe[p.pe_span.0..=p.pe_span.1]);
                    Ok((p.mt_span, p.pe_span))
                })
                .collect::<Result<_, TestCaseError>>()?;
            prop_assert_eq!(got, enumerate_phrases(mt.len(), pe.len(), &a, max_len));
            Ok(())
        })
        .unwrap();
}

/// Rebuilds a rule from its parent phrase and gaps and checks it matches.
fn replay(mt: &[String], pe: &[String], parent: ((usize, usize), (usize, usize)), gaps: &[((usize, usize), (usize, usize))]) -> (Vec<Symbol>, Vec<Symbol>) {
    let side = |toks: &[String], span: (usize, usize), gap_spans: Vec<(usize, usize)>| {
        let mut out = Vec::new();
        let mut i = span.0;
        while i <= span.1 {
            match gap_spans.iter().position(|g| g.0 == i) {
                Some(k) => {
                    out.push(Symbol::NonTerminal(k as u8 + 1));
                    i = gap_spans[k].1 + 1;
                }
                None => {
                    out.push(Symbol::Terminal(toks[i].clone()));
                    i += 1;
                }
            }
        }
        out
    };
    (
        side(mt, parent.0, gaps.iter().map(|g| g.0).collect()),
        side(pe, parent.1, gaps.iter().map(|g| g.1).collect()),
    )
}

#[test]
fn rules_replay_from_their_spans() {
    let config = ExtractConfig::default();
    runner(200)
        .run(&aligned_pair(6), |(mt, pe, a)| {
            let phrases = extract_phrases(&mt, &pe, &a, config.max_phrase_len).unwrap();
            let spans: BTreeSet<_> = phrases.iter().map(|p| (p.mt_span, p.pe_span)).collect();
            for r in induce_hier_rules(&phrases, &a, &config) {
                r.key.validate().unwrap();
                prop_assert!(spans.contains(&r.parent));
                prop_assert!(r.gaps.len() <= 2);
                for g in &r.gaps {
                    prop_assert!(spans.contains(g));
                }
                if !r.gaps.is_empty() {
                    prop_assert!(r.key.source.len() <= config.max_source_symbols);
                }
                let (source, target) = replay(&mt, &pe, r.parent, &r.gaps);
                prop_assert_eq!(&source, &r.key.source);
                prop_assert_eq!(&target, &r.key.target);
                let adjacent = source.windows(2).any(|w| !w[0].is_terminal() && !w[1].is_terminal());
                prop_assert!(!adjacent);
            }
            Ok(())
        })
        .unwrap();
}

fn counts_of(pairs: &[Pair]) -> RuleCounts {
    count_rules(pairs.iter().map(|(m, p, a)| (&m[..], &p[..], a)), &ExtractConfig::default()).unwrap()
}

#[test]
fn relative_frequencies_normalise() {
    runner(100)
        .run(&prop::collection::vec(aligned_pair(5), 1..=6), |pairs| {
            let counts = counts_of(&pairs);
            let raw = good_turing_smooth(&counts, false);
            let mut by_src: BTreeMap<&[Symbol], f64> = BTreeMap::new();
            let mut by_tgt: BTreeMap<&[Symbol], f64> = BTreeMap::new();
            for (k, (p_sgt, p_tgs)) in &raw {
                *by_src.entry(&k.source).or_default() += p_tgs;
                *by_tgt.entry(&k.target).or_default() += p_sgt;
            }
            for total in by_src.values().chain(by_tgt.values()) {
                prop_assert!((total - 1.0).abs() < 1e-9);
            }
            let smoothed = good_turing_smooth(&counts, true);
            for (k, c) in counts.iter() {
                let (p_sgt, p_tgs) = smoothed[k];
                prop_assert!(p_sgt > 0.0 && p_sgt <= 1.0 && p_tgs > 0.0 && p_tgs <= 1.0);
                if c == 1 {
                    prop_assert!(p_sgt < 1.0 && p_tgs < 1.0);
                }
            }
            Ok(())
        })
        .unwrap();
}

#[test]
fn counting_is_order_independent() {
    runner(50)
        .run(&prop::collection::vec(aligned_pair(5), 2..=5), |pairs| {
            let mut rev = pairs.clone();
            rev.reverse();
            let a: Vec<_> = counts_of(&pairs).iter().map(|(k, c)| (k.clone(), c)).collect();
            let b: Vec<_> = counts_of(&rev).iter().map(|(k, c)| (k.clone(), c)).collect();
            prop_assert_eq!(a, b);
            Ok(())
        })
        .unwrap();
}
