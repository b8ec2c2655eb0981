//! BLEU, TER and METEOR.
//!
//! All reported scores are on a 0–100 scale; TER is the edit rate times 100.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::edit_aligner::EditAligner;
use crate::math::{exp, ln, powi};
use crate::{Error, Result};

pub const BLEU_ORDER: usize = 4;

/// Clipped n-gram matches and totals for n = 1..=4, plus lengths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [u64; BLEU_ORDER],
    pub totals: [u64; BLEU_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

fn ngram_counts<S: AsRef<str>>(s: &[S], n: usize) -> BTreeMap<Vec<&str>, u64> {
    let mut m = BTreeMap::new();
    if s.len() >= n {
        for w in s.windows(n) {
            *m.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    m
}

impl BleuStats {
    pub fn sentence<S: AsRef<str>, T: AsRef<str>>(hyp: &[S], reference: &[T]) -> Self {
        let mut st = BleuStats { hyp_len: hyp.len() as u64, ref_len: reference.len() as u64, ..Default::default() };
        for n in 1..=BLEU_ORDER {
            let h = ngram_counts(hyp, n);
            let r = ngram_counts(reference, n);
            st.totals[n - 1] = h.values().sum();
            st.matches[n - 1] = h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
        }
        st
    }

    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..BLEU_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    pub fn sub(&mut self, other: &BleuStats) {
        for n in 0..BLEU_ORDER {
            self.matches[n] -= other.matches[n];
            self.totals[n] -= other.totals[n];
        }
        self.hyp_len -= other.hyp_len;
        self.ref_len -= other.ref_len;
    }

    fn brevity_penalty(&self) -> f64 {
        if self.hyp_len >= self.ref_len {
            1.0
        } else {
            exp(1.0 - self.ref_len as f64 / self.hyp_len as f64)
        }
    }

    /// Unsmoothed BLEU × 100; zero when any precision is zero.
    pub fn score(&self) -> f64 {
        if self.hyp_len == 0 || self.matches.iter().any(|&m| m == 0) {
            return 0.0;
        }
        let log_p: f64 = (0..BLEU_ORDER).map(|n| ln(self.matches[n] as f64 / self.totals[n] as f64)).sum();
        100.0 * self.brevity_penalty() * exp(log_p / BLEU_ORDER as f64)
    }

    /// Add-one smoothing on orders 2–4; for sentence-level diagnostics.
    pub fn smoothed_score(&self) -> f64 {
        if self.hyp_len == 0 || self.matches[0] == 0 {
            return 0.0;
        }
        let mut log_p = ln(self.matches[0] as f64 / self.totals[0] as f64);
        for n in 1..BLEU_ORDER {
            log_p += ln((self.matches[n] + 1) as f64 / (self.totals[n] + 1) as f64);
        }
        100.0 * self.brevity_penalty() * exp(log_p / BLEU_ORDER as f64)
    }
}

fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}

/// Corpus BLEU × 100.
pub fn bleu<S: AsRef<str>, T: AsRef<str>>(hyps: &[Vec<S>], refs: &[Vec<T>]) -> Result<f64> {
    check_lengths(hyps.len(), refs.len())?;
    let mut st = BleuStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        st.add(&BleuStats::sentence(h, r));
    }
    Ok(st.score())
}

/// Sentence BLEU × 100 with add-one smoothing on higher orders.
pub fn sentence_bleu<S: AsRef<str>, T: AsRef<str>>(hyp: &[S], reference: &[T]) -> f64 {
    BleuStats::sentence(hyp, reference).smoothed_score()
}

/// Word-level Levenshtein distance.
pub fn edit_distance<S: AsRef<str>, T: AsRef<str>>(a: &[S], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x.as_ref() != y.as_ref());
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Moves `h[start..start + len]` so that it begins at `dest` in the
/// sequence left after removing it.
pub fn apply_shift<T: Clone>(h: &[T], start: usize, len: usize, dest: usize) -> Vec<T> {
    let mut rest: Vec<T> = Vec::with_capacity(h.len());
    rest.extend_from_slice(&h[..start]);
    rest.extend_from_slice(&h[start + len..]);
    let mut out = Vec::with_capacity(h.len());
    out.extend_from_slice(&rest[..dest]);
    out.extend_from_slice(&h[start..start + len]);
    out.extend_from_slice(&rest[dest..]);
    out
}

fn occurs_in<T: PartialEq>(block: &[T], r: &[T]) -> bool {
    block.len() <= r.len() && r.windows(block.len()).any(|w| w == block)
}

/// Every shift `(start, len, dest)` of a block of `h` that occurs verbatim
/// in `r` and actually changes `h`.
pub fn candidate_shifts<T: PartialEq>(h: &[T], r: &[T]) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for start in 0..h.len() {
        for len in 1..=h.len() - start {
            if !occurs_in(&h[start..start + len], r) {
                break;
            }
            for dest in 0..=h.len() - len {
                if dest != start {
                    out.push((start, len, dest));
                }
            }
        }
    }
    out
}

/// Sequences longer than this use the greedy shift search only.
pub const EXACT_TER_MAX_LEN: usize = 7;

/// Number of TER edits: shifts plus insertions, deletions and substitutions.
///
/// Shifts move a block that occurs verbatim in the reference. Pairs up to
/// [`EXACT_TER_MAX_LEN`] tokens are searched exhaustively over shift
/// sequences, longer ones greedily (repeatedly take the shift with the
/// largest edit-distance reduction).
pub fn ter_edits<'a, S: AsRef<str>, T: AsRef<str>>(hyp: &'a [S], reference: &'a [T]) -> usize {
    let (h, r) = intern_pair(hyp, reference);
    if h.len().max(r.len()) <= EXACT_TER_MAX_LEN {
        exact_ter(&h, &r)
    } else {
        greedy_ter(&h, &r)
    }
}

/// Greedy shift search alone, regardless of length.
pub fn greedy_ter_edits<'a, S: AsRef<str>, T: AsRef<str>>(hyp: &'a [S], reference: &'a [T]) -> usize {
    let (h, r) = intern_pair(hyp, reference);
    greedy_ter(&h, &r)
}

fn intern_pair<'a, S: AsRef<str>, T: AsRef<str>>(hyp: &'a [S], reference: &'a [T]) -> (Vec<u32>, Vec<u32>) {
    let mut vocab: BTreeMap<&str, u32> = BTreeMap::new();
    let mut intern = |w: &'a str| {
        let next = vocab.len() as u32;
        *vocab.entry(w).or_insert(next)
    };
    let h: Vec<u32> = hyp.iter().map(|w| intern(w.as_ref())).collect();
    let r: Vec<u32> = reference.iter().map(|w| intern(w.as_ref())).collect();
    (h, r)
}

fn ids_distance(a: &[u32], b: &[u32]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edits that no reordering can avoid: the bag-of-words difference.
fn bag_distance(h: &[u32], r: &[u32]) -> usize {
    let mut counts: BTreeMap<u32, i64> = BTreeMap::new();
    for &w in h {
        *counts.entry(w).or_insert(0) += 1;
    }
    for &w in r {
        *counts.entry(w).or_insert(0) -= 1;
    }
    let surplus: i64 = counts.values().filter(|&&c| c > 0).sum();
    let deficit: i64 = -counts.values().filter(|&&c| c < 0).sum::<i64>();
    surplus.max(deficit) as usize
}

fn greedy_ter(h: &[u32], r: &[u32]) -> usize {
    let mut cur = h.to_vec();
    let mut dist = ids_distance(&cur, r);
    let mut shifts = 0;
    loop {
        let mut best: Option<(usize, Vec<u32>)> = None;
        for (start, len, dest) in candidate_shifts(&cur, r) {
            let next = apply_shift(&cur, start, len, dest);
            let d = ids_distance(&next, r);
            if d + 1 < dist && best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                best = Some((d, next));
            }
        }
        match best {
            Some((d, next)) => {
                cur = next;
                dist = d;
                shifts += 1;
            }
            None => return shifts + dist,
        }
    }
}

fn exact_ter(h: &[u32], r: &[u32]) -> usize {
    let floor = bag_distance(h, r);
    let mut best = ids_distance(h, r);
    let mut seen: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    seen.insert(h.to_vec(), 0);
    let mut frontier = vec![h.to_vec()];
    let mut shifts = 0;
    while !frontier.is_empty() && shifts + 1 + floor < best {
        shifts += 1;
        let mut next_frontier = Vec::new();
        for state in &frontier {
            for (start, len, dest) in candidate_shifts(state, r) {
                let next = apply_shift(state, start, len, dest);
                if seen.contains_key(&next) {
                    continue;
                }
                best = best.min(shifts + ids_distance(&next, r));
                seen.insert(next.clone(), shifts);
                next_frontier.push(next);
            }
        }
        frontier = next_frontier;
    }
    best
}

/// Sentence edit rate (not scaled by 100).
pub fn ter<S: AsRef<str>, T: AsRef<str>>(hyp: &[S], reference: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    Ok(ter_edits(hyp, reference) as f64 / reference.len() as f64)
}

/// Corpus TER × 100: total edits over total reference length.
pub fn corpus_ter<S: AsRef<str>, T: AsRef<str>>(hyps: &[Vec<S>], refs: &[Vec<T>]) -> Result<f64> {
    check_lengths(hyps.len(), refs.len())?;
    let mut edits = 0;
    let mut len = 0;
    for (h, r) in hyps.iter().zip(refs) {
        edits += ter_edits(h, r);
        len += r.len();
    }
    if len == 0 {
        return Err(Error::EmptyReference);
    }
    Ok(100.0 * edits as f64 / len as f64)
}

/// Matched unigrams, hypothesis and reference lengths, and chunks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MeteorStats {
    pub matches: u64,
    pub hyp_len: u64,
    pub ref_len: u64,
    pub chunks: u64,
}

impl MeteorStats {
    pub fn sentence<S: AsRef<str>, T: AsRef<str>>(hyp: &[S], reference: &[T], aligner: &EditAligner) -> Self {
        let a = aligner.align(hyp, reference).alignment();
        let links: Vec<_> = a.iter().collect();
        let mut chunks = 0;
        for (x, l) in links.iter().enumerate() {
            let continues = x > 0 && {
                let p = links[x - 1];
                p.src + 1 == l.src && p.tgt + 1 == l.tgt
            };
            if !continues {
                chunks += 1;
            }
        }
        MeteorStats {
            matches: links.len() as u64,
            hyp_len: hyp.len() as u64,
            ref_len: reference.len() as u64,
            chunks,
        }
    }

    pub fn add(&mut self, other: &MeteorStats) {
        self.matches += other.matches;
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
        self.chunks += other.chunks;
    }

    /// `F_mean · (1 − 0.5 (chunks/matches)³) × 100`.
    pub fn score(&self) -> f64 {
        if self.matches == 0 {
            return 0.0;
        }
        let m = self.matches as f64;
        let p = m / self.hyp_len as f64;
        let r = m / self.ref_len as f64;
        let f_mean = 10.0 * p * r / (r + 9.0 * p);
        let penalty = 0.5 * powi(self.chunks as f64 / m, 3);
        100.0 * f_mean * (1.0 - penalty)
    }
}

pub fn meteor_score<S: AsRef<str>, T: AsRef<str>>(hyp: &[S], reference: &[T], aligner: &EditAligner) -> f64 {
    MeteorStats::sentence(hyp, reference, aligner).score()
}

/// Corpus METEOR from statistics summed over sentences.
pub fn corpus_meteor<S: AsRef<str>, T: AsRef<str>>(hyps: &[Vec<S>], refs: &[Vec<T>], aligner: &EditAligner) -> Result<f64> {
    check_lengths(hyps.len(), refs.len())?;
    let mut st = MeteorStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        st.add(&MeteorStats::sentence(h, r, aligner));
    }
    Ok(st.score())
}

/// Corpus scores in the order BLEU, METEOR, TER.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub bleu: f64,
    pub meteor: f64,
    pub ter: f64,
}

impl core::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "BLEU={:.2} METEOR={:.2} TER={:.2}", self.bleu, self.meteor, self.ter)
    }
}

pub fn evaluate<S: AsRef<str>, T: AsRef<str>>(hyps: &[Vec<S>], refs: &[Vec<T>], aligner: &EditAligner) -> Result<EvalReport> {
    Ok(EvalReport {
        bleu: bleu(hyps, refs)?,
        meteor: corpus_meteor(hyps, refs, aligner)?,
        ter: corpus_ter(hyps, refs)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::{String, ToString};

    fn w(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn bleu_examples() {
        assert!((bleu(&[w("a b c d e")], &[w("a b c d e")]).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(bleu(&[w("a b c d")], &[w("a b c e")]).unwrap(), 0.0);
        let st = BleuStats::sentence(&w("a b c d"), &w("a b c e"));
        assert_eq!(st.matches, [3, 2, 1, 0]);
        assert_eq!(st.totals, [4, 3, 2, 1]);
        // 4-token hypothesis against an 8-token reference it prefixes
        let st = BleuStats::sentence(&w("a b c d"), &w("a b c d e f g h"));
        assert!((st.score() - 100.0 * exp(1.0 - 2.0)).abs() < 1e-9);
        assert!(bleu::<String, String>(&[w("a")], &[]).is_err());
    }

    #[test]
    fn ter_examples() {
        assert_eq!(ter(&w("a b c"), &w("a b c")).unwrap(), 0.0);
        assert_eq!(ter(&w("a x c d e"), &w("a b c d e")).unwrap(), 0.2);
        assert_eq!(ter(&w("c d a b"), &w("a b c d")).unwrap(), 0.25);
        assert!(matches!(ter(&w("a"), &[] as &[String]), Err(Error::EmptyReference)));
    }

    #[test]
    fn greedy_handles_long_block_moves() {
        let h = w("f g h i j a b c d e");
        let r = w("a b c d e f g h i j");
        assert_eq!(ter_edits(&h, &r), 1);
    }

    #[test]
    fn shift_moves_block() {
        assert_eq!(apply_shift(&[1, 2, 3, 4], 0, 2, 2), [3, 4, 1, 2]);
        assert_eq!(apply_shift(&[1, 2, 3, 4], 3, 1, 0), [4, 1, 2, 3]);
    }

    #[test]
    fn meteor_examples() {
        let al = EditAligner::default();
        assert!((meteor_score(&w("a"), &w("a"), &al) - 50.0).abs() < 1e-9);
        assert!((meteor_score(&w("a b"), &w("b a"), &al) - 50.0).abs() < 1e-9);
        assert_eq!(meteor_score(&w("a b"), &w("c d"), &al), 0.0);
        let n = 5.0;
        let expected = 100.0 * (1.0 - 0.5 / (n * n * n));
        assert!((meteor_score(&w("a b c d e"), &w("a b c d e"), &al) - expected).abs() < 1e-9);
    }

    #[test]
    fn report_format() {
        let r = EvalReport { bleu: 65.9, meteor: 74.54, ter: 22.711 };
        assert_eq!(r.to_string(), "BLEU=65.90 METEOR=74.54 TER=22.71");
    }
}
