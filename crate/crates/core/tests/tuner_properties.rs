use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sape_core::decoder::{WeightVector, NUM_FEATURES};
use sape_core::evaluate::bleu;
use sape_core::tuner::{line_search, optimize_on_pool, tune, Candidate, Pool, TunerParams};

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

const VOCAB: [&str; 8] = ["the", "dog", "cat", "eats", "sleeps", "a", "fish", "now"];

/// A synthetic tune set: references plus a hidden candidate space per
/// sentence. Decoding ranks the hidden space by `w · h`.
struct Synthetic {
    refs: Vec<Vec<String>>,
    space: Vec<Vec<Candidate>>,
}

impl Synthetic {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut refs = Vec::new();
        let mut space = Vec::new();
        for _ in 0..12 {
            let len = 4 + (rng.next_u64() % 5) as usize;
            let r: Vec<String> = (0..len).map(|_| VOCAB[(rng.next_u64() % 8) as usize].to_string()).collect();
            let mut cands = Vec::new();
            for _ in 0..30 {
                let mut out = r.clone();
                for tok in out.iter_mut() {
                    if unit(&mut rng) < 0.3 {
                        *tok = VOCAB[(rng.next_u64() % 8) as usize].to_string();
                    }
                }
                let mut features = [0.0; NUM_FEATURES];
                for f in &mut features {
                    *f = 4.0 * unit(&mut rng) - 2.0;
                }
                cands.push(Candidate { output: out, features });
            }
            refs.push(r);
            space.push(cands);
        }
        Synthetic { refs, space }
    }

    fn decode(&self, w: &WeightVector, k: usize) -> Vec<Vec<Candidate>> {
        self.space
            .iter()
            .map(|cands| {
                let mut ranked: Vec<&Candidate> = cands.iter().collect();
                ranked.sort_by(|a, b| w.dot(&b.features).total_cmp(&w.dot(&a.features)).then_with(|| a.output.cmp(&b.output)));
                ranked.into_iter().take(k).cloned().collect()
            })
            .collect()
    }

    fn one_best_bleu(&self, w: &WeightVector) -> f64 {
        let hyps: Vec<Vec<String>> = self.decode(w, 1).into_iter().map(|l| l[0].output.clone()).collect();
        bleu(&hyps, &self.refs).unwrap()
    }
}

#[test]
fn pooled_bleu_never_decreases() {
    for seed in 0..20 {
        let syn = Synthetic::new(seed);
        let w0 = WeightVector::default();
        let params = TunerParams { k: 5, restarts: 3, seed, max_iter: 8, min_gain: 0.01 };
        let result = tune(&syn.refs, |w, k| Ok(syn.decode(w, k)), &w0, &params).unwrap();
        for pair in result.history.windows(2) {
            assert!(pair[1] >= pair[0], "seed {seed}: {:?}", result.history);
        }
        assert!(*result.history.last().unwrap() >= result.history[0]);
        assert!((result.dev_bleu - syn.one_best_bleu(&result.weights)).abs() < 1e-9);
    }
}

#[test]
fn line_search_matches_brute_force_scan() {
    for seed in 0..20 {
        let syn = Synthetic::new(100 + seed);
        let mut pool = Pool::new(syn.refs.clone()).unwrap();
        pool.merge(syn.space.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = WeightVector::from_array(core::array::from_fn(|_| 2.0 * unit(&mut rng) - 1.0));
        let d: [f64; NUM_FEATURES] = core::array::from_fn(|i| f64::from(u8::from(i == (seed as usize) % NUM_FEATURES)));
        let ls = line_search(&pool, &w, &d);
        let moved = |g: f64| {
            let mut a = w.as_array();
            for i in 0..NUM_FEATURES {
                a[i] += g * d[i];
            }
            WeightVector::from_array(a)
        };
        assert!((pool.bleu(&moved(ls.gamma)) - ls.bleu).abs() < 1e-9);
        assert!(ls.bleu >= pool.bleu(&w));
        for step in -400..=400 {
            let g = step as f64 * 0.05;
            assert!(pool.bleu(&moved(g)) <= ls.bleu + 1e-9, "seed {seed} gamma {g}");
        }
    }
}

#[test]
fn reachable_oracle_is_found() {
    let refs: Vec<Vec<String>> = ["the dog eats fish now", "a cat sleeps now"]
        .iter()
        .map(|s| s.split(' ').map(String::from).collect())
        .collect();
    let mut pool = Pool::new(refs.clone()).unwrap();
    let wrong = |s: &str, f0: f64| Candidate {
        output: s.split(' ').map(String::from).collect(),
        features: core::array::from_fn(|i| if i == 0 { f0 } else if i == 1 { -f0 } else { 0.0 }),
    };
    pool.merge(vec![
        vec![wrong("the dog eats fish now", -1.0), wrong("the cat eats fish now", 1.0)],
        vec![wrong("a cat sleeps now", -2.0), wrong("a dog sleeps now", 2.0)],
    ])
    .unwrap();
    let start = WeightVector::uniform(1.0);
    let (w, b) = optimize_on_pool(&pool, &start);
    assert!((b - 100.0).abs() < 1e-9);
    assert!((pool.bleu(&w) - 100.0).abs() < 1e-9);
    let scaled = WeightVector::from_array(w.as_array().map(|v| v * 3.0));
    assert_eq!(pool.argmax(&w), pool.argmax(&scaled));
}
