//! Synthetic tri-parallel corpora with controlled MT errors.
//!
//! Post-edited sentences come from a small phrase-structure grammar. The MT
//! side is the post-edit with four kinds of damage applied in turn: lexical
//! substitution from a fixed confusion lexicon, adjacent swaps, spurious
//! insertions and deletions. The source side maps every post-edit token to a
//! fixed pseudo-word.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sape_core::corpus::{Sentence, Triplet};

use crate::error::{Result, SapeError};
use crate::formats::{write_lines, write_sentences};

const DETERMINERS: &[&str] = &["the", "a", "this", "every"];
const ADJECTIVES: &[&str] = &["big", "small", "red", "old", "happy", "quiet"];
const NOUNS: &[&str] = &["dog", "cat", "man", "woman", "child", "house", "car", "book", "tree", "bird"];
const TRANSITIVE: &[&str] = &["sees", "likes", "finds", "takes", "moves", "reads"];
const INTRANSITIVE: &[&str] = &["sleeps", "runs", "waits", "sings"];
const ADVERBS: &[&str] = &["today", "slowly", "again", "now"];
const PREPOSITIONS: &[&str] = &["near", "behind", "with"];

/// Wrong word choices an MT system might make. None of the replacements
/// occur in correct output.
pub const CONFUSIONS: &[(&str, &str)] = &[
    ("dog", "hound"),
    ("cat", "kitty"),
    ("man", "guy"),
    ("house", "home"),
    ("car", "auto"),
    ("book", "tome"),
    ("child", "kid"),
    ("sees", "watches"),
    ("likes", "loves"),
    ("takes", "grabs"),
    ("big", "large"),
    ("small", "tiny"),
    ("old", "aged"),
    ("quiet", "silent"),
    ("slowly", "slow"),
    ("near", "close"),
];

/// Words an MT system might add.
pub const SPURIOUS: &[&str] = &["also", "very", "then", "just"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub substitution: f64,
    pub swap: f64,
    pub insertion: f64,
    pub deletion: f64,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams { seed: 1, substitution: 0.15, swap: 0.05, insertion: 0.05, deletion: 0.05, train: 1000, dev: 100, test: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthCorpus {
    pub train: Vec<Triplet>,
    pub dev: Vec<Triplet>,
    pub test: Vec<Triplet>,
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words.choose(rng).expect("non-empty word list")
}

fn noun_phrase(rng: &mut ChaCha8Rng, out: &mut Vec<String>) {
    out.push(pick(rng, DETERMINERS).into());
    if rng.gen_bool(0.5) {
        out.push(pick(rng, ADJECTIVES).into());
    }
    out.push(pick(rng, NOUNS).into());
}

/// One sentence of the post-edit language.
pub fn generate_sentence(rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut out = Vec::new();
    noun_phrase(rng, &mut out);
    if rng.gen_bool(0.6) {
        out.push(pick(rng, TRANSITIVE).into());
        noun_phrase(rng, &mut out);
        if rng.gen_bool(0.3) {
            out.push(pick(rng, PREPOSITIONS).into());
            noun_phrase(rng, &mut out);
        }
    } else {
        out.push(pick(rng, INTRANSITIVE).into());
    }
    if rng.gen_bool(0.4) {
        out.push(pick(rng, ADVERBS).into());
    }
    out.push(".".into());
    out
}

/// Damages a correct sentence. Each confusable token is replaced with
/// probability `substitution`; each adjacent pair is swapped with
/// probability `swap`; a spurious word follows each token with probability
/// `insertion`; each token is dropped with probability `deletion`, never
/// leaving the sentence empty.
pub fn inject_errors(pe: &[String], p: &SynthParams, rng: &mut ChaCha8Rng) -> Vec<String> {
    let confusions: BTreeMap<&str, &str> = CONFUSIONS.iter().copied().collect();
    let mut out: Vec<String> = pe
        .iter()
        .map(|w| match confusions.get(w.as_str()) {
            Some(c) if rng.gen_bool(p.substitution) => c.to_string(),
            _ => w.clone(),
        })
        .collect();
    let mut i = 0;
    while i + 1 < out.len() {
        if rng.gen_bool(p.swap) {
            out.swap(i, i + 1);
            i += 2;
        } else {
            i += 1;
        }
    }
    let mut inserted = Vec::with_capacity(out.len() + 2);
    for w in out {
        inserted.push(w);
        if rng.gen_bool(p.insertion) {
            inserted.push(pick(rng, SPURIOUS).to_string());
        }
    }
    let mut kept: Vec<String> = Vec::with_capacity(inserted.len());
    for w in &inserted {
        if !rng.gen_bool(p.deletion) {
            kept.push(w.clone());
        }
    }
    if kept.is_empty() {
        kept = inserted;
    }
    kept
}

/// Token-for-token pseudo source: every word spelled backwards.
pub fn source_of(pe: &[String]) -> Vec<String> {
    pe.iter().map(|w| w.chars().rev().collect()).collect()
}

fn check_rates(p: &SynthParams) -> std::result::Result<(), String> {
    for (name, r) in [("substitution", p.substitution), ("swap", p.swap), ("insertion", p.insertion), ("deletion", p.deletion)] {
        if !(0.0..=1.0).contains(&r) {
            return Err(format!("{name} rate {r} is not in [0, 1]"));
        }
    }
    Ok(())
}

/// Generates train, dev and test splits from one seeded stream.
pub fn make_synthetic(p: &SynthParams) -> std::result::Result<SynthCorpus, String> {
    check_rates(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut split = |n: usize| -> Vec<Triplet> {
        (0..n)
            .map(|_| {
                let pe = generate_sentence(&mut rng);
                let mt = inject_errors(&pe, p, &mut rng);
                Triplet {
                    source: Sentence::from_words(&source_of(&pe)),
                    mt: Sentence::from_words(&mt),
                    pe: Sentence::from_words(&pe),
                }
            })
            .collect()
    };
    let train = split(p.train);
    let dev = split(p.dev);
    let test = split(p.test);
    Ok(SynthCorpus { train, dev, test })
}

/// Tags for every word the generator can emit, including MT-only words.
pub fn tagger_lexicon() -> BTreeMap<String, String> {
    let mut lex = BTreeMap::new();
    let groups: [(&[&str], &str); 7] = [
        (DETERMINERS, "DT"),
        (ADJECTIVES, "JJ"),
        (NOUNS, "NN"),
        (TRANSITIVE, "VBZ"),
        (INTRANSITIVE, "VBZ"),
        (ADVERBS, "RB"),
        (PREPOSITIONS, "IN"),
    ];
    for (words, tag) in groups {
        for w in words {
            lex.insert(w.to_string(), tag.to_string());
        }
    }
    for (right, wrong) in CONFUSIONS {
        let tag = lex[*right].clone();
        lex.insert(wrong.to_string(), tag);
    }
    for w in SPURIOUS {
        lex.insert(w.to_string(), "RB".to_string());
    }
    lex.insert(".".into(), "FS".into());
    lex
}

/// Writes `{train,dev,test}.{src,mt,pe}`, `tagger.tsv` and a ready-to-use
/// `sape.conf` into `dir`.
pub fn write_synthetic(dir: &Path, corpus: &SynthCorpus) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| SapeError::io(dir, e))?;
    for (name, split) in [("train", &corpus.train), ("dev", &corpus.dev), ("test", &corpus.test)] {
        write_sentences(&dir.join(format!("{name}.src")), split.iter().map(|t| t.source.as_ref()))?;
        write_sentences(&dir.join(format!("{name}.mt")), split.iter().map(|t| t.mt.as_ref()))?;
        write_sentences(&dir.join(format!("{name}.pe")), split.iter().map(|t| t.pe.as_ref()))?;
    }
    write_lines(&dir.join("tagger.tsv"), tagger_lexicon().iter().map(|(w, t)| format!("{w}\t{t}")))?;
    let conf = [
        "train_src = train.src",
        "train_mt = train.mt",
        "train_pe = train.pe",
        "dev_mt = dev.mt",
        "dev_pe = dev.pe",
        "tagger_lexicon = tagger.tsv",
        "model_dir = model",
    ];
    write_lines(&dir.join("sape.conf"), conf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rates_copy_post_edits() {
        let p = SynthParams { substitution: 0.0, swap: 0.0, insertion: 0.0, deletion: 0.0, train: 50, dev: 0, test: 0, seed: 3 };
        let c = make_synthetic(&p).unwrap();
        assert!(c.train.iter().all(|t| t.mt == t.pe));
    }

    #[test]
    fn forced_substitution_replaces_every_confusable() {
        let p = SynthParams { substitution: 1.0, swap: 0.0, insertion: 0.0, deletion: 0.0, ..SynthParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pe: Vec<String> = ["the", "dog", "sees", "a", "cat", "."].iter().map(|s| s.to_string()).collect();
        assert_eq!(inject_errors(&pe, &p, &mut rng), ["the", "hound", "watches", "a", "kitty", "."]);
    }

    #[test]
    fn same_seed_same_corpus() {
        let p = SynthParams { train: 30, dev: 5, test: 5, ..SynthParams::default() };
        assert_eq!(make_synthetic(&p).unwrap(), make_synthetic(&p).unwrap());
        let q = SynthParams { seed: 2, ..p };
        assert_ne!(make_synthetic(&p).unwrap(), make_synthetic(&q).unwrap());
    }

    #[test]
    fn bad_rate_rejected() {
        assert!(make_synthetic(&SynthParams { swap: 1.5, ..SynthParams::default() }).is_err());
    }
}
