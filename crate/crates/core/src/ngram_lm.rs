//! Katz back-off n-gram language model with Good-Turing discounting.
//!
//! Probabilities are stored as log10 values, the ARPA convention. Words are
//! interned; `<unk>`, `<s>` and `</s>` always have ids 0, 1 and 2.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::math::{log10, pow10};
use crate::smoothing::CountOfCounts;
use crate::{Error, Result};

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const DEFAULT_ORDER: usize = 5;
/// Counts above this are left undiscounted.
pub const DISCOUNT_LIMIT: u64 = 5;
/// log10 probability assigned to `<s>`, which is never predicted.
pub const BOS_LOG10_PROB: f64 = -99.0;

pub type WordId = u32;
pub const UNK_ID: WordId = 0;
pub const BOS_ID: WordId = 1;
pub const EOS_ID: WordId = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub log10_prob: f64,
    /// Present for n-grams that are contexts of longer n-grams.
    pub log10_backoff: Option<f64>,
}

/// One ARPA line: order is `words.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArpaEntry {
    pub words: Vec<String>,
    pub log10_prob: f64,
    pub log10_backoff: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct NGramLM {
    order: usize,
    vocab: Vec<String>,
    ids: HashMap<String, WordId>,
    /// `tables[n - 1]` holds the n-grams.
    tables: Vec<HashMap<Box<[WordId]>, Entry>>,
}

/// The last `order - 1` words seen, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LmState(pub Vec<WordId>);

/// Per-count discount ratios `d_r` for `r = 1..=DISCOUNT_LIMIT`.
#[derive(Debug, Clone, PartialEq)]
struct Discounts([f64; DISCOUNT_LIMIT as usize]);

impl Discounts {
    /// Katz discounts from Good-Turing counts-of-counts, or absolute
    /// discounting with `D = n1 / (n1 + 2 n2)` when the Katz ratios fall
    /// outside (0, 1].
    fn from_counts(coc: &CountOfCounts) -> Self {
        let k = DISCOUNT_LIMIT;
        let n1 = coc.n(1) as f64;
        let mut katz = [0.0; DISCOUNT_LIMIT as usize];
        let mut ok = n1 > 0.0;
        if ok {
            let a = (k + 1) as f64 * coc.n(k + 1) as f64 / n1;
            for r in 1..=k {
                let nr = coc.n(r) as f64;
                let d = if nr > 0.0 {
                    let r_star = (r + 1) as f64 * coc.n(r + 1) as f64 / nr;
                    (r_star / r as f64 - a) / (1.0 - a)
                } else {
                    1.0
                };
                ok &= d.is_finite() && d > 0.0 && d <= 1.0;
                katz[(r - 1) as usize] = d;
            }
            ok &= katz.iter().any(|&d| d < 1.0);
        }
        if ok {
            return Discounts(katz);
        }
        let n2 = coc.n(2) as f64;
        let d = if n1 > 0.0 { n1 / (n1 + 2.0 * n2) } else { 0.5 };
        let d = if d >= 1.0 { 0.5 } else { d };
        let mut abs = [0.0; DISCOUNT_LIMIT as usize];
        for r in 1..=k {
            abs[(r - 1) as usize] = (r as f64 - d) / r as f64;
        }
        Discounts(abs)
    }

    fn apply(&self, c: u64) -> f64 {
        if c <= DISCOUNT_LIMIT {
            c as f64 * self.0[(c - 1) as usize]
        } else {
            c as f64
        }
    }
}

impl NGramLM {
    fn empty(order: usize) -> Self {
        let mut lm = NGramLM { order, vocab: Vec::new(), ids: HashMap::new(), tables: vec![HashMap::new(); order] };
        for w in [UNK, BOS, EOS] {
            lm.intern(w);
        }
        lm
    }

    fn intern(&mut self, w: &str) -> WordId {
        if let Some(&id) = self.ids.get(w) {
            return id;
        }
        let id = self.vocab.len() as WordId;
        self.vocab.push(w.to_string());
        self.ids.insert(w.to_string(), id);
        id
    }

    /// Trains on sentences padded with `<s>` and `</s>`.
    pub fn train<S: AsRef<str>>(corpus: &[Vec<S>], order: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if order == 0 {
            return Err(Error::InvalidArgument("language model order must be at least 1".into()));
        }
        let mut lm = NGramLM::empty(order);
        let mut counts: Vec<HashMap<Box<[WordId]>, u64>> = vec![HashMap::new(); order];
        for sentence in corpus {
            let mut ids = vec![BOS_ID];
            ids.extend(sentence.iter().map(|w| lm.intern(w.as_ref())));
            ids.push(EOS_ID);
            for n in 1..=order {
                for window in ids.windows(n) {
                    if n == 1 && window[0] == BOS_ID {
                        continue;
                    }
                    *counts[n - 1].entry(window.into()).or_insert(0) += 1;
                }
            }
        }
        lm.estimate_unigrams(&counts[0]);
        for n in 2..=order {
            lm.estimate_order(n, &counts[n - 1]);
        }
        Ok(lm)
    }

    fn estimate_unigrams(&mut self, counts: &HashMap<Box<[WordId]>, u64>) {
        let discounts = Discounts::from_counts(&CountOfCounts::from_counts(counts.values().copied()));
        let total: u64 = counts.values().sum();
        let mut probs: BTreeMap<WordId, f64> = BTreeMap::new();
        for (k, &c) in counts {
            probs.insert(k[0], discounts.apply(c) / total as f64);
        }
        let seen: f64 = probs.values().sum();
        let mut leftover = 1.0 - seen;
        if leftover < 1e-9 {
            let scale = total as f64 / (total + 1) as f64;
            probs.values_mut().for_each(|p| *p *= scale);
            leftover = 1.0 - probs.values().sum::<f64>();
        }
        *probs.entry(UNK_ID).or_insert(0.0) += leftover;
        let table = &mut self.tables[0];
        for (id, p) in probs {
            table.insert(Box::new([id]), Entry { log10_prob: log10(p), log10_backoff: None });
        }
        table.insert(Box::new([BOS_ID]), Entry { log10_prob: BOS_LOG10_PROB, log10_backoff: None });
    }

    fn estimate_order(&mut self, n: usize, counts: &HashMap<Box<[WordId]>, u64>) {
        let discounts = Discounts::from_counts(&CountOfCounts::from_counts(counts.values().copied()));
        let mut by_context: BTreeMap<&[WordId], Vec<(WordId, u64)>> = BTreeMap::new();
        for (k, &c) in counts {
            by_context.entry(&k[..n - 1]).or_default().push((k[n - 1], c));
        }
        let mut new_entries = Vec::new();
        let mut backoffs = Vec::new();
        for (context, mut continuations) in by_context {
            continuations.sort_unstable();
            let total: u64 = continuations.iter().map(|(_, c)| c).sum();
            let mut probs: Vec<(WordId, f64)> =
                continuations.iter().map(|&(w, c)| (w, discounts.apply(c) / total as f64)).collect();
            let mut seen: f64 = probs.iter().map(|(_, p)| p).sum();
            if 1.0 - seen < 1e-9 {
                let scale = total as f64 / (total + 1) as f64;
                probs.iter_mut().for_each(|(_, p)| *p *= scale);
                seen = probs.iter().map(|(_, p)| p).sum();
            }
            let lower: f64 = probs.iter().map(|&(w, _)| pow10(self.log10_prob(&context[1..], w))).sum();
            let alpha = (1.0 - seen) / (1.0 - lower);
            backoffs.push((Box::<[WordId]>::from(context), log10(alpha)));
            for (w, p) in probs {
                let mut key = context.to_vec();
                key.push(w);
                new_entries.push((key.into_boxed_slice(), log10(p)));
            }
        }
        for (k, lp) in new_entries {
            self.tables[n - 1].insert(k, Entry { log10_prob: lp, log10_backoff: None });
        }
        for (k, b) in backoffs {
            if let Some(e) = self.tables[n - 2].get_mut(&k) {
                e.log10_backoff = Some(b);
            }
        }
    }

    /// Builds a model from explicit entries, e.g. read from an ARPA file.
    pub fn from_entries(order: usize, entries: Vec<ArpaEntry>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidModel("order must be at least 1".into()));
        }
        let mut lm = NGramLM::empty(order);
        for e in entries {
            let n = e.words.len();
            if n == 0 || n > order {
                return Err(Error::InvalidModel(alloc::format!("n-gram of length {n} in an order-{order} model")));
            }
            if e.log10_prob > 0.0 || e.log10_prob.is_nan() {
                return Err(Error::InvalidModel(alloc::format!("bad log probability {}", e.log10_prob)));
            }
            let key: Box<[WordId]> = e.words.iter().map(|w| lm.intern(w)).collect();
            lm.tables[n - 1].insert(key, Entry { log10_prob: e.log10_prob, log10_backoff: e.log10_backoff });
        }
        for w in [UNK, BOS, EOS] {
            if !lm.tables[0].contains_key(&[lm.ids[w]][..]) {
                return Err(Error::InvalidModel(alloc::format!("missing unigram {w}")));
            }
        }
        Ok(lm)
    }

    /// All entries, grouped by order and sorted by their words.
    pub fn entries(&self) -> Vec<ArpaEntry> {
        let mut out = Vec::new();
        for table in &self.tables {
            let mut rows: Vec<ArpaEntry> = table
                .iter()
                .map(|(k, e)| ArpaEntry {
                    words: k.iter().map(|&id| self.vocab[id as usize].clone()).collect(),
                    log10_prob: e.log10_prob,
                    log10_backoff: e.log10_backoff,
                })
                .collect();
            rows.sort_by(|a, b| a.words.cmp(&b.words));
            out.extend(rows);
        }
        out
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of stored n-grams of each order.
    pub fn counts(&self) -> Vec<usize> {
        self.tables.iter().map(HashMap::len).collect()
    }

    /// Id of `w`, or `<unk>` for out-of-vocabulary words.
    pub fn id(&self, w: &str) -> WordId {
        self.ids.get(w).copied().unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.vocab[id as usize]
    }

    /// Every word that can be predicted, including `<unk>` and `</s>`.
    pub fn vocab(&self) -> impl Iterator<Item = &str> + '_ {
        self.vocab.iter().map(String::as_str).filter(|w| *w != BOS)
    }

    pub fn entry(&self, words: &[WordId]) -> Option<&Entry> {
        self.tables.get(words.len().checked_sub(1)?)?.get(words)
    }

    /// `log10 P(w | context)`. Only the last `order - 1` context words are
    /// used.
    pub fn log10_prob(&self, context: &[WordId], w: WordId) -> f64 {
        let keep = context.len().min(self.order - 1);
        let mut stack = [0 as WordId; 8];
        let mut heap = Vec::new();
        let full: &mut [WordId] = if keep < stack.len() {
            &mut stack[..keep + 1]
        } else {
            heap.resize(keep + 1, 0);
            &mut heap
        };
        full[..keep].copy_from_slice(&context[context.len() - keep..]);
        full[keep] = w;
        let mut start = 0;
        let mut backoff = 0.0;
        loop {
            let ngram = &full[start..];
            if let Some(e) = self.tables[ngram.len() - 1].get(ngram) {
                return backoff + e.log10_prob;
            }
            if ngram.len() == 1 {
                // not reached for trained models: `<unk>` is always present
                return backoff + self.tables[0].get(&[UNK_ID][..]).map_or(BOS_LOG10_PROB, |e| e.log10_prob);
            }
            let ctx = &full[start..keep];
            if let Some(b) = self.tables[ctx.len() - 1].get(ctx).and_then(|e| e.log10_backoff) {
                backoff += b;
            }
            start += 1;
        }
    }

    pub fn bos_state(&self) -> LmState {
        let mut s = LmState(vec![BOS_ID]);
        s.0.truncate(self.order - 1);
        s
    }

    pub fn advance(&self, state: &LmState, w: WordId) -> (f64, LmState) {
        let lp = self.log10_prob(&state.0, w);
        let mut next = state.0.clone();
        next.push(w);
        let drop = next.len().saturating_sub(self.order - 1);
        next.drain(..drop);
        (lp, LmState(next))
    }

    /// Incremental scoring: `(log10 P(word | state), next state)`.
    pub fn lm_state_score(&self, state: &LmState, word: &str) -> (f64, LmState) {
        self.advance(state, self.id(word))
    }

    /// `log10 P(s </s> | <s>)`.
    pub fn score<S: AsRef<str>>(&self, s: &[S]) -> f64 {
        let mut state = self.bos_state();
        let mut total = 0.0;
        for w in s {
            let (lp, next) = self.lm_state_score(&state, w.as_ref());
            total += lp;
            state = next;
        }
        total + self.advance(&state, EOS_ID).0
    }

    /// Per-word perplexity over a corpus, counting one `</s>` per sentence.
    pub fn perplexity<S: AsRef<str>>(&self, corpus: &[Vec<S>]) -> f64 {
        let mut total = 0.0;
        let mut events = 0usize;
        for s in corpus {
            total += self.score(s);
            events += s.len() + 1;
        }
        pow10(-total / events.max(1) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines.iter().map(|l| l.split_whitespace().map(String::from).collect()).collect()
    }

    fn sum_over_vocab(lm: &NGramLM, context: &[WordId]) -> f64 {
        lm.vocab().map(|w| pow10(lm.log10_prob(context, lm.id(w)))).sum()
    }

    #[test]
    fn unigram_normalises() {
        let lm = NGramLM::train(&corpus(&["a a b"]), 1).unwrap();
        assert!((sum_over_vocab(&lm, &[]) - 1.0).abs() < 1e-9);
        assert!(lm.log10_prob(&[], UNK_ID) < 0.0);
    }

    #[test]
    fn unseen_bigram_backs_off() {
        let lm = NGramLM::train(&corpus(&["a b", "b a", "a a c"]), 2).unwrap();
        let (b, c) = (lm.id("b"), lm.id("c"));
        assert!(lm.entry(&[b, c]).is_none());
        let expected = lm.entry(&[b]).unwrap().log10_backoff.unwrap() + lm.log10_prob(&[], c);
        assert!((lm.log10_prob(&[b], c) - expected).abs() < 1e-12);
        for ctx in [vec![], vec![BOS_ID], vec![b], vec![c], vec![lm.id("a")]] {
            assert!((sum_over_vocab(&lm, &ctx) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(NGramLM::train::<String>(&[], 3).is_err());
    }

    #[test]
    fn scoring_events() {
        let lm = NGramLM::train(&corpus(&["a b c", "a c", "b b a"]), 3).unwrap();
        let empty: [&str; 0] = [];
        assert_eq!(lm.score(&empty), lm.log10_prob(&[BOS_ID], EOS_ID));
        assert_eq!(lm.score(&["a", "zzz"]), lm.score(&["a", UNK]));
        let (a, b) = (lm.id("a"), lm.id("b"));
        let manual = lm.log10_prob(&[BOS_ID], a) + lm.log10_prob(&[BOS_ID, a], b) + lm.log10_prob(&[a, b], EOS_ID);
        assert!((lm.score(&["a", "b"]) - manual).abs() < 1e-12);
        let (lp, state) = lm.lm_state_score(&lm.bos_state(), "a");
        assert_eq!(lp, lm.log10_prob(&[BOS_ID], a));
        assert_eq!(state, LmState(vec![BOS_ID, a]));
    }

    #[test]
    fn high_counts_keep_mass_for_unseen() {
        let lines: Vec<&str> = core::iter::repeat("x y").take(10).collect();
        let lm = NGramLM::train(&corpus(&lines), 2).unwrap();
        assert!(lm.score(&["y", "x", "q"]).is_finite());
        for ctx in [vec![], vec![BOS_ID], vec![lm.id("x")]] {
            assert!((sum_over_vocab(&lm, &ctx) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn entries_rebuild_same_model() {
        let lm = NGramLM::train(&corpus(&["a b c", "a c", "b b a"]), 3).unwrap();
        let again = NGramLM::from_entries(3, lm.entries()).unwrap();
        assert_eq!(again.entries(), lm.entries());
        assert_eq!(again.score(&["c", "a"]), lm.score(&["c", "a"]));
    }
}
