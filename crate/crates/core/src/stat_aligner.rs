//! Statistical word alignment: IBM Model 1 trained with EM, Viterbi
//! alignment in each direction, and grow-diag-final-and symmetrisation.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use hashbrown::HashMap;

use crate::edit_aligner::{Alignment, Link};
use crate::math::ln;
use crate::{Error, Result};

/// Source-side token standing for "aligned to nothing".
pub const NULL_TOKEN: &str = "NULL";

/// Lower bound on `P(t | NULL)` when choosing Viterbi links, and the value
/// returned for pairs missing from a table by [`TranslationTable::prob_or_floor`].
pub const NULL_FLOOR: f64 = 1e-4;

/// `P(target | source)` for every co-occurring pair. Each source row sums to 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TranslationTable {
    rows: BTreeMap<String, BTreeMap<String, f64>>,
}

impl TranslationTable {
    pub fn from_entries<I: IntoIterator<Item = (String, String, f64)>>(entries: I) -> Self {
        let mut rows: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for (s, t, p) in entries {
            rows.entry(s).or_default().insert(t, p);
        }
        TranslationTable { rows }
    }

    pub fn prob(&self, src: &str, tgt: &str) -> f64 {
        self.rows.get(src).and_then(|r| r.get(tgt)).copied().unwrap_or(0.0)
    }

    pub fn prob_or_floor(&self, src: &str, tgt: &str) -> f64 {
        let p = self.prob(src, tgt);
        if p > 0.0 {
            p
        } else {
            NULL_FLOOR
        }
    }

    /// Entries sorted by source then target.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        self.rows.iter().flat_map(|(s, row)| row.iter().map(move |(t, &p)| (s.as_str(), t.as_str(), p)))
    }

    pub fn row_sums(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.rows.iter().map(|(s, row)| (s.as_str(), row.values().sum()))
    }

    pub fn len(&self) -> usize {
        self.rows.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

struct Interner {
    ids: HashMap<String, u32>,
    words: Vec<String>,
}

impl Interner {
    fn new() -> Self {
        let mut i = Interner { ids: HashMap::new(), words: Vec::new() };
        i.id(NULL_TOKEN);
        i
    }

    fn id(&mut self, w: &str) -> u32 {
        if let Some(&id) = self.ids.get(w) {
            return id;
        }
        let id = self.words.len() as u32;
        self.ids.insert(w.to_string(), id);
        self.words.push(w.to_string());
        id
    }
}

/// IBM Model 1 EM state. Source sentences get a NULL token at position 0;
/// initialisation is uniform over the targets each source word co-occurs with.
pub struct Ibm1Trainer {
    src: Interner,
    tgt: Interner,
    pairs: Vec<(Vec<u32>, Vec<u32>)>,
    t: HashMap<(u32, u32), f64>,
    iterations: usize,
}

impl Ibm1Trainer {
    pub fn new<'a, I>(corpus: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [String], &'a [String])>,
    {
        let mut src = Interner::new();
        let mut tgt = Interner::new();
        let mut pairs = Vec::new();
        for (s, t) in corpus {
            let mut sv = vec![0u32];
            sv.extend(s.iter().map(|w| src.id(w)));
            let tv: Vec<u32> = t.iter().map(|w| tgt.id(w)).collect();
            pairs.push((sv, tv));
        }
        if pairs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut cooc: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (s, t) in &pairs {
            for &e in s {
                cooc.entry(e).or_default().extend(t.iter().copied());
            }
        }
        let mut table = HashMap::new();
        for (e, mut fs) in cooc {
            fs.sort_unstable();
            fs.dedup();
            let p = 1.0 / fs.len() as f64;
            for f in fs {
                table.insert((e, f), p);
            }
        }
        Ok(Ibm1Trainer { src, tgt, pairs, t: table, iterations: 0 })
    }

    /// One E-step plus M-step.
    pub fn step(&mut self) {
        let mut counts: HashMap<(u32, u32), f64> = HashMap::with_capacity(self.t.len());
        let mut totals: HashMap<u32, f64> = HashMap::new();
        for (s, t) in &self.pairs {
            for &f in t {
                let denom: f64 = s.iter().map(|&e| self.t.get(&(e, f)).copied().unwrap_or(0.0)).sum();
                if denom <= 0.0 {
                    continue;
                }
                for &e in s {
                    let c = self.t.get(&(e, f)).copied().unwrap_or(0.0) / denom;
                    *counts.entry((e, f)).or_insert(0.0) += c;
                    *totals.entry(e).or_insert(0.0) += c;
                }
            }
        }
        for (k, v) in self.t.iter_mut() {
            let total = totals.get(&k.0).copied().unwrap_or(0.0);
            let c = counts.get(k).copied().unwrap_or(0.0);
            if total > 0.0 {
                *v = c / total;
            }
        }
        // drop pairs whose expected count vanished; keeps the table (0, 1]
        self.t.retain(|_, v| *v > 0.0);
        self.iterations += 1;
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `Σ_s Σ_j ln( Σ_i t(f_j | e_i) / (l + 1) )` over the training corpus.
    pub fn log_likelihood(&self) -> f64 {
        let mut ll = 0.0;
        for (s, t) in &self.pairs {
            let norm = s.len() as f64;
            for &f in t {
                let p: f64 = s.iter().map(|&e| self.t.get(&(e, f)).copied().unwrap_or(0.0)).sum();
                ll += ln(p / norm);
            }
        }
        ll
    }

    pub fn table(&self) -> TranslationTable {
        TranslationTable::from_entries(self.t.iter().map(|(&(e, f), &p)| {
            (self.src.words[e as usize].clone(), self.tgt.words[f as usize].clone(), p)
        }))
    }
}

/// Trains IBM Model 1 for `iterations` EM rounds.
pub fn train_em<'a, I>(corpus: I, iterations: usize) -> Result<TranslationTable>
where
    I: IntoIterator<Item = (&'a [String], &'a [String])>,
{
    if iterations == 0 {
        return Err(Error::InvalidArgument("EM needs at least one iteration".into()));
    }
    let mut trainer = Ibm1Trainer::new(corpus)?;
    for _ in 0..iterations {
        trainer.step();
    }
    Ok(trainer.table())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

/// Links of one directional model, always stored as (MT position, PE
/// position). A forward alignment has at most one link per PE position; a
/// reverse one at most one per MT position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionalAlignment {
    pub links: Alignment,
    pub direction: Direction,
}

/// Links each target position to its most probable source position, or to
/// nothing when `P(t | NULL)` (floored at [`NULL_FLOOR`]) strictly beats every
/// source word. Ties go to the smallest source index.
pub fn viterbi_align<S: AsRef<str>, T: AsRef<str>>(tt: &TranslationTable, src: &[S], tgt: &[T]) -> DirectionalAlignment {
    let mut links = Alignment::new();
    for (j, t) in tgt.iter().enumerate() {
        let t = t.as_ref();
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in src.iter().enumerate() {
            let p = tt.prob(s.as_ref(), t);
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((i, p));
            }
        }
        let null = tt.prob(NULL_TOKEN, t).max(NULL_FLOOR);
        if let Some((i, p)) = best {
            if p >= null {
                links.insert(Link::new(i, j));
            }
        }
    }
    DirectionalAlignment { links, direction: Direction::Forward }
}

/// Viterbi alignment of a model trained PE→MT, transposed to (MT, PE)
/// orientation.
pub fn viterbi_align_reverse<S: AsRef<str>, T: AsRef<str>>(
    rev: &TranslationTable,
    mt: &[S],
    pe: &[T],
) -> DirectionalAlignment {
    let d = viterbi_align(rev, pe, mt);
    DirectionalAlignment { links: d.links.transposed(), direction: Direction::Reverse }
}

const NEIGHBOURS: [(isize, isize); 8] = [(-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)];

/// Grow-diag-final-and over two alignments of the same sentence pair, both in
/// (MT, PE) orientation.
pub fn gdfa(fwd: &Alignment, rev: &Alignment) -> Alignment {
    let union = fwd.union(rev);
    let mut result = fwd.intersection(rev);
    let n_src = union.iter().map(|l| l.src + 1).max().unwrap_or(0);
    let n_tgt = union.iter().map(|l| l.tgt + 1).max().unwrap_or(0);
    let mut src_aligned = vec![false; n_src];
    let mut tgt_aligned = vec![false; n_tgt];
    for l in result.iter() {
        src_aligned[l.src] = true;
        tgt_aligned[l.tgt] = true;
    }
    loop {
        let mut added = false;
        for i in 0..n_src {
            for j in 0..n_tgt {
                if !result.contains(&Link::new(i, j)) {
                    continue;
                }
                for (di, dj) in NEIGHBOURS {
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    if ni < 0 || nj < 0 || ni as usize >= n_src || nj as usize >= n_tgt {
                        continue;
                    }
                    let cand = Link::new(ni as usize, nj as usize);
                    if (!src_aligned[cand.src] || !tgt_aligned[cand.tgt])
                        && union.contains(&cand)
                        && result.insert(cand)
                    {
                        src_aligned[cand.src] = true;
                        tgt_aligned[cand.tgt] = true;
                        added = true;
                    }
                }
            }
        }
        if !added {
            break;
        }
    }
    for directional in [fwd, rev] {
        for l in directional.iter() {
            if !src_aligned[l.src] && !tgt_aligned[l.tgt] {
                result.insert(*l);
                src_aligned[l.src] = true;
                tgt_aligned[l.tgt] = true;
            }
        }
    }
    result
}

/// Both directional models needed to symmetrise an MT/PE pair.
#[derive(Debug, Clone, Default)]
pub struct StatAligner {
    /// `P(pe | mt)`.
    pub forward: TranslationTable,
    /// `P(mt | pe)`.
    pub reverse: TranslationTable,
}

impl StatAligner {
    pub fn train<'a, I>(corpus: I, iterations: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [String], &'a [String])> + Clone,
    {
        let forward = train_em(corpus.clone(), iterations)?;
        let reverse = train_em(corpus.into_iter().map(|(m, p)| (p, m)), iterations)?;
        Ok(StatAligner { forward, reverse })
    }

    pub fn align<S: AsRef<str>, T: AsRef<str>>(&self, mt: &[S], pe: &[T]) -> Alignment {
        let f = viterbi_align(&self.forward, mt, pe);
        let r = viterbi_align_reverse(&self.reverse, mt, pe);
        gdfa(&f.links, &r.links)
    }
}
