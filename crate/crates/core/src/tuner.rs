//! Minimum error rate training: coordinate ascent over the weight vector
//! with an exact line search on the upper envelope of n-best lists.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashSet;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::decoder::{FeatureValues, WeightVector, NUM_FEATURES};
use crate::evaluate::BleuStats;
use crate::{Error, Result};

/// One n-best entry: an output and its feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub output: Vec<String>,
    pub features: FeatureValues,
}

/// Accumulated n-best lists with their BLEU statistics.
#[derive(Debug, Clone)]
pub struct Pool {
    refs: Vec<Vec<String>>,
    sentences: Vec<Vec<(Candidate, BleuStats)>>,
    keys: Vec<HashSet<(Vec<String>, [u64; NUM_FEATURES])>>,
}

impl Pool {
    /// Fails when there are no references or all of them are empty.
    pub fn new(refs: Vec<Vec<String>>) -> Result<Self> {
        if refs.iter().all(Vec::is_empty) {
            return Err(Error::DegenerateDevSet);
        }
        let n = refs.len();
        Ok(Pool { refs, sentences: vec![Vec::new(); n], keys: vec![HashSet::new(); n] })
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn candidates(&self, sentence: usize) -> impl Iterator<Item = &Candidate> + '_ {
        self.sentences[sentence].iter().map(|(c, _)| c)
    }

    pub fn size(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    /// Adds a candidate unless an identical one is already pooled.
    pub fn add(&mut self, sentence: usize, c: Candidate) -> bool {
        let key = (c.output.clone(), c.features.map(f64::to_bits));
        if !self.keys[sentence].insert(key) {
            return false;
        }
        let stats = BleuStats::sentence(&c.output, &self.refs[sentence]);
        self.sentences[sentence].push((c, stats));
        true
    }

    /// Merges one n-best list per sentence; returns how many were new.
    pub fn merge(&mut self, nbest: Vec<Vec<Candidate>>) -> Result<usize> {
        if nbest.len() != self.len() {
            return Err(Error::LengthMismatch { left: nbest.len(), right: self.len() });
        }
        let mut added = 0;
        for (i, list) in nbest.into_iter().enumerate() {
            for c in list {
                added += usize::from(self.add(i, c));
            }
        }
        Ok(added)
    }

    /// Index of the best candidate of each sentence under `w`; ties go to
    /// the lexicographically smaller output.
    pub fn argmax(&self, w: &WeightVector) -> Vec<Option<usize>> {
        self.sentences
            .iter()
            .map(|cands| {
                let mut best: Option<(usize, f64)> = None;
                for (i, (c, _)) in cands.iter().enumerate() {
                    let s = w.dot(&c.features);
                    let better = match best {
                        None => true,
                        Some((b, bs)) => s > bs || (s == bs && c.output < cands[b].0.output),
                    };
                    if better {
                        best = Some((i, s));
                    }
                }
                best.map(|(i, _)| i)
            })
            .collect()
    }

    /// Corpus BLEU of the argmax candidates. Sentences without candidates
    /// count as empty outputs.
    pub fn bleu(&self, w: &WeightVector) -> f64 {
        let mut st = BleuStats::default();
        for (i, best) in self.argmax(w).into_iter().enumerate() {
            match best {
                Some(b) => st.add(&self.sentences[i][b].1),
                None => st.ref_len += self.refs[i].len() as u64,
            }
        }
        st.score()
    }
}

/// Result of a line search along `w + γ·d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSearch {
    pub gamma: f64,
    pub bleu: f64,
    /// Envelope intervals `(lo, hi, bleu)` covering the real line.
    pub intervals: Vec<(f64, f64, f64)>,
}

/// Upper envelope of the lines `a_i + γ b_i`: returns the winner on
/// (-∞, x_0) followed by `(x_k, winner on (x_k, x_{k+1}))`.
fn envelope(lines: &[(f64, f64, usize)]) -> (usize, Vec<(f64, usize)>) {
    // at -∞ the smallest slope wins, then the larger intercept
    let mut cur = 0;
    for (i, l) in lines.iter().enumerate() {
        let c = lines[cur];
        if l.1 < c.1 || (l.1 == c.1 && (l.0 > c.0 || (l.0 == c.0 && l.2 < c.2))) {
            cur = i;
        }
    }
    let first = cur;
    let mut x = f64::NEG_INFINITY;
    let mut breaks = Vec::new();
    loop {
        let c = lines[cur];
        let mut next: Option<(f64, usize)> = None;
        for (i, l) in lines.iter().enumerate() {
            if l.1 <= c.1 {
                continue;
            }
            let xi = (c.0 - l.0) / (l.1 - c.1);
            if xi < x {
                continue;
            }
            let better = match next {
                None => true,
                Some((nx, n)) => {
                    let nl = lines[n];
                    xi < nx || (xi == nx && (l.1 > nl.1 || (l.1 == nl.1 && (l.0 > nl.0 || (l.0 == nl.0 && l.2 < nl.2)))))
                }
            };
            if better {
                next = Some((xi, i));
            }
        }
        match next {
            Some((nx, n)) => {
                breaks.push((nx, n));
                x = nx;
                cur = n;
            }
            None => return (first, breaks),
        }
    }
}

/// Exact line search of pooled BLEU along direction `d` from `w`. The
/// returned `gamma` is 0 unless some interval strictly beats the current
/// pooled BLEU; otherwise it is the midpoint of the best interval (or a
/// unit step past the outermost breakpoint).
pub fn line_search(pool: &Pool, w: &WeightVector, d: &FeatureValues) -> LineSearch {
    let current = pool.bleu(w);
    let mut base = BleuStats::default();
    let mut events: Vec<(f64, BleuStats, BleuStats)> = Vec::new();
    for (i, cands) in pool.sentences.iter().enumerate() {
        if cands.is_empty() {
            base.ref_len += pool.refs[i].len() as u64;
            continue;
        }
        // lines ordered so that index ties favour the smaller output
        let mut order: Vec<usize> = (0..cands.len()).collect();
        order.sort_by(|&a, &b| cands[a].0.output.cmp(&cands[b].0.output));
        let lines: Vec<(f64, f64, usize)> = order
            .iter()
            .enumerate()
            .map(|(rank, &c)| {
                let h = &cands[c].0.features;
                let slope: f64 = d.iter().zip(h).map(|(a, b)| a * b).sum();
                (w.dot(h), slope, rank)
            })
            .collect();
        let (first, breaks) = envelope(&lines);
        let mut prev = order[lines[first].2];
        base.add(&cands[prev].1);
        for (x, l) in breaks {
            let next = order[lines[l].2];
            events.push((x, cands[prev].1, cands[next].1));
            prev = next;
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut intervals = Vec::new();
    let mut stats = base;
    let mut lo = f64::NEG_INFINITY;
    let mut k = 0;
    while k < events.len() {
        let x = events[k].0;
        intervals.push((lo, x, stats.score()));
        while k < events.len() && events[k].0 == x {
            stats.sub(&events[k].1);
            stats.add(&events[k].2);
            k += 1;
        }
        lo = x;
    }
    intervals.push((lo, f64::INFINITY, stats.score()));
    let mut best: Option<(f64, f64)> = None;
    for &(lo, hi, b) in &intervals {
        if b > current && best.map_or(true, |(_, bb)| b > bb) {
            let gamma = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (false, true) => hi - 1.0,
                (true, false) => lo + 1.0,
                (false, false) => 0.0,
            };
            best = Some((gamma, b));
        }
    }
    match best {
        Some((gamma, _)) => {
            let mut moved = w.as_array();
            for (m, di) in moved.iter_mut().zip(d) {
                *m += gamma * di;
            }
            // confirm with the tie-breaking argmax
            let actual = pool.bleu(&WeightVector::from_array(moved));
            if actual > current {
                return LineSearch { gamma, bleu: actual, intervals };
            }
            LineSearch { gamma: 0.0, bleu: current, intervals }
        }
        None => LineSearch { gamma: 0.0, bleu: current, intervals },
    }
}

/// Rescales so the largest weight magnitude is 1. Rankings are unchanged.
fn max_norm(a: FeatureValues) -> WeightVector {
    let m = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 && m.is_finite() {
        WeightVector::from_array(a.map(|v| v / m))
    } else {
        WeightVector::from_array(a)
    }
}

/// Coordinate ascent from `start` until no coordinate improves pooled BLEU.
pub fn optimize_on_pool(pool: &Pool, start: &WeightVector) -> (WeightVector, f64) {
    const MAX_SWEEPS: usize = 25;
    let mut w = *start;
    let mut bleu = pool.bleu(&w);
    for _ in 0..MAX_SWEEPS {
        let mut improved = false;
        for k in 0..NUM_FEATURES {
            let mut d = [0.0; NUM_FEATURES];
            d[k] = 1.0;
            let ls = line_search(pool, &w, &d);
            if ls.gamma != 0.0 && ls.bleu > bleu {
                let mut a = w.as_array();
                a[k] += ls.gamma;
                let scaled = max_norm(a);
                w = if pool.bleu(&scaled) == ls.bleu { scaled } else { WeightVector::from_array(a) };
                bleu = ls.bleu;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    (w, bleu)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunerParams {
    /// n-best size per decode.
    pub k: usize,
    /// Random starting points per iteration, besides the current weights.
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Smallest pooled-BLEU gain that counts as progress.
    pub min_gain: f64,
}

impl Default for TunerParams {
    fn default() -> Self {
        TunerParams { k: 100, restarts: 5, seed: 1, max_iter: 10, min_gain: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub weights: WeightVector,
    /// Pooled BLEU of the initial weights, then of each accepted update.
    pub history: Vec<f64>,
    /// 1-best dev BLEU of `weights`, from a fresh decode.
    pub dev_bleu: f64,
    pub iterations: usize,
}

fn random_weights(rng: &mut ChaCha8Rng) -> WeightVector {
    let mut a = [0.0; NUM_FEATURES];
    for v in &mut a {
        let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        *v = 2.0 * u - 1.0;
    }
    WeightVector::from_array(a)
}

fn dev_bleu(refs: &[Vec<String>], nbest: &[Vec<Candidate>]) -> f64 {
    let mut st = BleuStats::default();
    for (r, list) in refs.iter().zip(nbest) {
        let empty = Vec::new();
        let out = list.first().map_or(&empty, |c| &c.output);
        st.add(&BleuStats::sentence(out, r));
    }
    st.score()
}

/// MERT. `decode(w, k)` returns one n-best list per dev sentence, best
/// first.
///
/// Each iteration decodes with the current weights, merges the lists into
/// the pool and re-optimises from the current weights, `w0` and
/// `params.restarts` random points. An update is accepted only when it
/// raises pooled BLEU by at least `min_gain`; tuning stops at the first
/// rejected update, when decoding adds nothing new to the pool, or after
/// `max_iter` iterations.
pub fn tune<F>(refs: &[Vec<String>], mut decode: F, w0: &WeightVector, params: &TunerParams) -> Result<TuneResult>
where
    F: FnMut(&WeightVector, usize) -> Result<Vec<Vec<Candidate>>>,
{
    if params.k == 0 {
        return Err(Error::InvalidArgument("n-best size must be at least 1".into()));
    }
    let mut pool = Pool::new(refs.to_vec())?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut w = *w0;
    let mut history = Vec::new();
    let mut last_dev = None;
    let mut iterations = 0;
    for iter in 0..params.max_iter {
        iterations = iter + 1;
        let nbest = decode(&w, params.k)?;
        last_dev = Some(dev_bleu(refs, &nbest));
        let added = pool.merge(nbest)?;
        if iter == 0 {
            history.push(pool.bleu(&w));
        } else if added == 0 {
            break;
        }
        let mut starts = vec![w, *w0];
        starts.extend((0..params.restarts).map(|_| random_weights(&mut rng)));
        let mut best: Option<(WeightVector, f64)> = None;
        for s in &starts {
            let (cand, b) = optimize_on_pool(&pool, s);
            if best.map_or(true, |(_, bb)| b > bb) {
                best = Some((cand, b));
            }
        }
        let (cand, b) = best.expect("at least one start");
        let last = *history.last().expect("initial entry");
        if b - last < params.min_gain {
            break;
        }
        history.push(b);
        w = cand;
        last_dev = None;
    }
    let dev_bleu = match last_dev {
        Some(b) => b,
        None => dev_bleu(refs, &decode(&w, 1)?),
    };
    Ok(TuneResult { weights: w, history, dev_bleu, iterations })
}
