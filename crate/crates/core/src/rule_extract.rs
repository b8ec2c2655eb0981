//! Phrase-pair extraction, hierarchical SCFG rule induction and rule
//! feature estimation.
//!
//! A rule `X → ⟨γ, α, ~⟩` rewrites a nonterminal into a source side γ and a
//! target side α that share co-indexed nonterminals. Its features are the two
//! relative-frequency conditionals, the two lexical weights and a constant
//! phrase penalty, all stored as natural logs.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::edit_aligner::{Alignment, Link};
use crate::math::{exp, ln};
use crate::smoothing::CountOfCounts;
use crate::stat_aligner::{StatAligner, TranslationTable, NULL_TOKEN};
use crate::{Error, Result};

pub const DEFAULT_MAX_PHRASE_LEN: usize = 7;

/// An alignment-consistent pair of spans. Spans are inclusive `(start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhrasePair {
    pub mt_span: (usize, usize),
    pub pe_span: (usize, usize),
    pub mt_tokens: Vec<String>,
    pub pe_tokens: Vec<String>,
    pub count: u64,
}

impl PhrasePair {
    fn contains(&self, other: &PhrasePair) -> bool {
        self.mt_span.0 <= other.mt_span.0
            && other.mt_span.1 <= self.mt_span.1
            && self.pe_span.0 <= other.pe_span.0
            && other.pe_span.1 <= self.pe_span.1
    }
}

/// All phrase pairs consistent with `a` whose sides are at most `max_len`
/// tokens and that contain at least one link. Unaligned PE words at the
/// boundary extend a pair; unaligned MT boundary words are covered by
/// enumerating every MT span.
pub fn extract_phrases<S: AsRef<str>, T: AsRef<str>>(
    mt: &[S],
    pe: &[T],
    a: &Alignment,
    max_len: usize,
) -> Result<Vec<PhrasePair>> {
    a.check_range(mt.len(), pe.len())?;
    if max_len == 0 {
        return Err(Error::InvalidArgument("max phrase length must be at least 1".into()));
    }
    let (n, m) = (mt.len(), pe.len());
    let mut tgt_aligned = alloc::vec![false; m];
    let mut by_src: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
    let mut by_tgt: Vec<Vec<usize>> = alloc::vec![Vec::new(); m];
    for l in a.iter() {
        tgt_aligned[l.tgt] = true;
        by_src[l.src].push(l.tgt);
        by_tgt[l.tgt].push(l.src);
    }
    let tokens = |side: &[String], s: usize, e: usize| side[s..=e].to_vec();
    let mt_s: Vec<String> = mt.iter().map(|t| t.as_ref().to_string()).collect();
    let pe_s: Vec<String> = pe.iter().map(|t| t.as_ref().to_string()).collect();
    let mut out = Vec::new();
    for s1 in 0..n {
        for e1 in s1..n.min(s1 + max_len) {
            let mut t1 = usize::MAX;
            let mut t2 = 0;
            for i in s1..=e1 {
                for &j in &by_src[i] {
                    t1 = t1.min(j);
                    t2 = t2.max(j);
                }
            }
            if t1 == usize::MAX || t2 - t1 + 1 > max_len {
                continue;
            }
            let consistent = (t1..=t2).all(|j| by_tgt[j].iter().all(|&i| (s1..=e1).contains(&i)));
            if !consistent {
                continue;
            }
            let mut ts = t1;
            loop {
                let mut te = t2;
                while te - ts < max_len {
                    out.push(PhrasePair {
                        mt_span: (s1, e1),
                        pe_span: (ts, te),
                        mt_tokens: tokens(&mt_s, s1, e1),
                        pe_tokens: tokens(&pe_s, ts, te),
                        count: 1,
                    });
                    if te + 1 >= m || tgt_aligned[te + 1] {
                        break;
                    }
                    te += 1;
                }
                if ts == 0 || tgt_aligned[ts - 1] || t2 - (ts - 1) >= max_len {
                    break;
                }
                ts -= 1;
            }
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Lhs {
    X,
    S,
}

/// One symbol of a rule side. Nonterminals carry their co-index (1 or 2).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Terminal(String),
    NonTerminal(u8),
}

impl Symbol {
    pub fn is_terminal(&self) -> bool {
        matches!(self, Symbol::Terminal(_))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Terminal(t) => f.write_str(t),
            Symbol::NonTerminal(i) => write!(f, "[X,{i}]"),
        }
    }
}

impl FromStr for Symbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "[X,1]" => Symbol::NonTerminal(1),
            "[X,2]" => Symbol::NonTerminal(2),
            _ => Symbol::Terminal(s.to_string()),
        })
    }
}

/// The (γ, α) pair identifying a rule type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleKey {
    pub source: Vec<Symbol>,
    pub target: Vec<Symbol>,
}

fn nonterminal_indices(side: &[Symbol]) -> Vec<u8> {
    side.iter()
        .filter_map(|s| match s {
            Symbol::NonTerminal(i) => Some(*i),
            Symbol::Terminal(_) => None,
        })
        .collect()
}

impl RuleKey {
    /// Checks the SCFG shape: matching nonterminal counts (at most two), a
    /// bijective co-indexing numbered in source order, and at least one
    /// source terminal.
    pub fn validate(&self) -> Result<()> {
        let src = nonterminal_indices(&self.source);
        let mut tgt = nonterminal_indices(&self.target);
        if src.len() > 2 {
            return Err(Error::InvalidRule("more than two nonterminals".into()));
        }
        let expected: Vec<u8> = (1..=src.len() as u8).collect();
        if src != expected {
            return Err(Error::InvalidRule("source nonterminals must be numbered 1, 2 in order".into()));
        }
        tgt.sort_unstable();
        if tgt != expected {
            return Err(Error::InvalidRule("nonterminal co-indexing is not a bijection".into()));
        }
        if !self.source.iter().any(Symbol::is_terminal) {
            return Err(Error::InvalidRule("source side has no terminal".into()));
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.source.iter().filter(|s| !s.is_terminal()).count()
    }
}

/// `Π φ_i` components of a rule, stored as natural logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    /// ln P(γ | α)
    pub p_src_given_tgt: f64,
    /// ln P(α | γ)
    pub p_tgt_given_src: f64,
    /// ln P_w(γ | α)
    pub lex_src_given_tgt: f64,
    /// ln P_w(α | γ)
    pub lex_tgt_given_src: f64,
    /// ln e^{-1}
    pub phrase_penalty: f64,
}

impl FeatureVector {
    pub const PHRASE_PENALTY: f64 = -1.0;
    pub const LEN: usize = 5;

    pub fn from_probs(p_src_given_tgt: f64, p_tgt_given_src: f64, lex_src_given_tgt: f64, lex_tgt_given_src: f64) -> Self {
        FeatureVector {
            p_src_given_tgt: ln(p_src_given_tgt),
            p_tgt_given_src: ln(p_tgt_given_src),
            lex_src_given_tgt: ln(lex_src_given_tgt),
            lex_tgt_given_src: ln(lex_tgt_given_src),
            phrase_penalty: Self::PHRASE_PENALTY,
        }
    }

    /// Every feature equal to e^{-1}; used for pass-through rules.
    pub fn uniform_penalty() -> Self {
        FeatureVector {
            p_src_given_tgt: -1.0,
            p_tgt_given_src: -1.0,
            lex_src_given_tgt: -1.0,
            lex_tgt_given_src: -1.0,
            phrase_penalty: -1.0,
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.p_src_given_tgt, self.p_tgt_given_src, self.lex_src_given_tgt, self.lex_tgt_given_src, self.phrase_penalty]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        FeatureVector {
            p_src_given_tgt: a[0],
            p_tgt_given_src: a[1],
            lex_src_given_tgt: a[2],
            lex_tgt_given_src: a[3],
            phrase_penalty: a[4],
        }
    }

    pub fn probs(&self) -> [f64; 5] {
        self.as_array().map(exp)
    }
}

/// A weighted synchronous rule. `alignment` links terminal positions of the
/// source side to terminal positions of the target side (symbol indices).
#[derive(Debug, Clone, PartialEq)]
pub struct ScfgRule {
    pub lhs: Lhs,
    pub source: Vec<Symbol>,
    pub target: Vec<Symbol>,
    pub alignment: Vec<(usize, usize)>,
    pub features: FeatureVector,
}

impl ScfgRule {
    pub fn new(key: RuleKey, alignment: Vec<(usize, usize)>, features: FeatureVector) -> Result<Self> {
        key.validate()?;
        Ok(ScfgRule { lhs: Lhs::X, source: key.source, target: key.target, alignment, features })
    }

    pub fn arity(&self) -> usize {
        self.source.iter().filter(|s| !s.is_terminal()).count()
    }

    pub fn key(&self) -> RuleKey {
        RuleKey { source: self.source.clone(), target: self.target.clone() }
    }
}

fn join_symbols(f: &mut fmt::Formatter<'_>, side: &[Symbol]) -> fmt::Result {
    for (i, s) in side.iter().enumerate() {
        if i > 0 {
            f.write_str(" ")?;
        }
        write!(f, "{s}")?;
    }
    Ok(())
}

/// `γ ||| α ||| lnP(γ|α) lnP(α|γ) lnPw(γ|α) lnPw(α|γ) -1 ||| i-j ...`
impl fmt::Display for ScfgRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        join_symbols(f, &self.source)?;
        f.write_str(" ||| ")?;
        join_symbols(f, &self.target)?;
        f.write_str(" |||")?;
        for v in self.features.as_array() {
            write!(f, " {v}")?;
        }
        f.write_str(" |||")?;
        for (i, j) in &self.alignment {
            write!(f, " {i}-{j}")?;
        }
        Ok(())
    }
}

impl FromStr for ScfgRule {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidRule(alloc::format!("{why}: {line:?}"));
        let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
        if fields.len() != 4 {
            return Err(bad("expected four ||| separated fields"));
        }
        let side = |s: &str| s.split_whitespace().map(Symbol::from_str).collect::<Result<Vec<_>>>();
        let key = RuleKey { source: side(fields[0])?, target: side(fields[1])? };
        let values: Vec<f64> = fields[2]
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| bad("bad feature value")))
            .collect::<Result<_>>()?;
        let values: [f64; 5] = values.try_into().map_err(|_| bad("expected five feature values"))?;
        let alignment = fields[3]
            .split_whitespace()
            .map(|l| l.parse::<Link>().map(|l| (l.src, l.tgt)))
            .collect::<Result<Vec<_>>>()?;
        ScfgRule::new(key, alignment, FeatureVector::from_array(values))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractConfig {
    /// Longest initial phrase, on either side.
    pub max_phrase_len: usize,
    /// Longest source side (terminals plus nonterminals) of a rule with
    /// nonterminals.
    pub max_source_symbols: usize,
    pub max_nonterminals: usize,
    /// Rules seen fewer times are dropped before estimation.
    pub min_count: u64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { max_phrase_len: DEFAULT_MAX_PHRASE_LEN, max_source_symbols: 5, max_nonterminals: 2, min_count: 1 }
    }
}

/// One extracted rule occurrence, with the spans it was built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleInstance {
    pub key: RuleKey,
    pub alignment: Vec<(usize, usize)>,
    /// The initial phrase pair (MT span, PE span).
    pub parent: ((usize, usize), (usize, usize)),
    /// The sub-phrase pairs replaced by `[X,1]` and `[X,2]`, in that order.
    pub gaps: Vec<((usize, usize), (usize, usize))>,
}

fn make_rule(parent: &PhrasePair, gaps: &[&PhrasePair], a: &Alignment, config: &ExtractConfig) -> Option<RuleInstance> {
    let mut source = Vec::new();
    let mut src_pos = BTreeMap::new();
    let mut i = parent.mt_span.0;
    while i <= parent.mt_span.1 {
        if let Some(k) = gaps.iter().position(|g| g.mt_span.0 == i) {
            if matches!(source.last(), Some(Symbol::NonTerminal(_))) {
                return None;
            }
            source.push(Symbol::NonTerminal(k as u8 + 1));
            i = gaps[k].mt_span.1 + 1;
        } else {
            src_pos.insert(i, source.len());
            source.push(Symbol::Terminal(parent.mt_tokens[i - parent.mt_span.0].clone()));
            i += 1;
        }
    }
    if src_pos.is_empty() {
        return None;
    }
    if !gaps.is_empty() && source.len() > config.max_source_symbols {
        return None;
    }
    let mut target = Vec::new();
    let mut tgt_pos = BTreeMap::new();
    let mut j = parent.pe_span.0;
    while j <= parent.pe_span.1 {
        if let Some(k) = gaps.iter().position(|g| g.pe_span.0 == j) {
            target.push(Symbol::NonTerminal(k as u8 + 1));
            j = gaps[k].pe_span.1 + 1;
        } else {
            tgt_pos.insert(j, target.len());
            target.push(Symbol::Terminal(parent.pe_tokens[j - parent.pe_span.0].clone()));
            j += 1;
        }
    }
    let alignment = a
        .iter()
        .filter_map(|l| Some((*src_pos.get(&l.src)?, *tgt_pos.get(&l.tgt)?)))
        .collect();
    Some(RuleInstance {
        key: RuleKey { source, target },
        alignment,
        parent: (parent.mt_span, parent.pe_span),
        gaps: gaps.iter().map(|g| (g.mt_span, g.pe_span)).collect(),
    })
}

fn disjoint(a: (usize, usize), b: (usize, usize)) -> bool {
    a.1 < b.0 || b.1 < a.0
}

/// Turns the phrase pairs of one sentence pair into rules: every pair as a
/// flat rule, plus every way of replacing one or two nested, non-overlapping
/// sub-pairs with co-indexed nonterminals, subject to the shape limits in
/// `config` (no adjacent source nonterminals, at least one source terminal).
pub fn induce_hier_rules(phrases: &[PhrasePair], a: &Alignment, config: &ExtractConfig) -> Vec<RuleInstance> {
    let mut out = Vec::new();
    for parent in phrases {
        if let Some(r) = make_rule(parent, &[], a, config) {
            out.push(r);
        }
        if config.max_nonterminals == 0 {
            continue;
        }
        let subs: Vec<&PhrasePair> = phrases.iter().filter(|p| *p != parent && parent.contains(p)).collect();
        for (x, first) in subs.iter().enumerate() {
            if let Some(r) = make_rule(parent, &[first], a, config) {
                out.push(r);
            }
            if config.max_nonterminals < 2 {
                continue;
            }
            for second in &subs[x + 1..] {
                // subs are sorted by MT span, so `first` starts no later
                if first.mt_span.1 + 1 >= second.mt_span.0 || !disjoint(first.pe_span, second.pe_span) {
                    continue;
                }
                if let Some(r) = make_rule(parent, &[first, second], a, config) {
                    out.push(r);
                }
            }
        }
    }
    out
}

/// Occurrence counts per rule type, with the counts of each internal
/// alignment seen for it.
#[derive(Debug, Clone, Default)]
pub struct RuleCounts {
    rules: BTreeMap<RuleKey, (u64, BTreeMap<Vec<(usize, usize)>, u64>)>,
}

impl RuleCounts {
    pub fn add(&mut self, instance: RuleInstance) {
        self.add_count(instance.key, instance.alignment, 1);
    }

    pub fn add_count(&mut self, key: RuleKey, alignment: Vec<(usize, usize)>, count: u64) {
        let e = self.rules.entry(key).or_default();
        e.0 += count;
        *e.1.entry(alignment).or_insert(0) += count;
    }

    pub fn merge(&mut self, other: RuleCounts) {
        for (k, (_, aligns)) in other.rules {
            for (a, c) in aligns {
                self.add_count(k.clone(), a, c);
            }
        }
    }

    pub fn count(&self, key: &RuleKey) -> u64 {
        self.rules.get(key).map_or(0, |e| e.0)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RuleKey, u64)> + '_ {
        self.rules.iter().map(|(k, (c, _))| (k, *c))
    }

    /// Drops rule types seen fewer than `min` times.
    pub fn prune(&mut self, min: u64) {
        self.rules.retain(|_, (c, _)| *c >= min);
    }

    /// Most frequent internal alignment, lexicographically smallest on ties.
    fn alignment_of(&self, key: &RuleKey) -> Vec<(usize, usize)> {
        let aligns = &self.rules[key].1;
        aligns.iter().rev().max_by_key(|(_, &c)| c).map(|(a, _)| a.clone()).unwrap_or_default()
    }
}

/// Extracts and counts rules over aligned sentence pairs.
pub fn count_rules<'a, I>(pairs: I, config: &ExtractConfig) -> Result<RuleCounts>
where
    I: IntoIterator<Item = (&'a [String], &'a [String], &'a Alignment)>,
{
    let mut counts = RuleCounts::default();
    for (mt, pe, a) in pairs {
        let phrases = extract_phrases(mt, pe, a, config.max_phrase_len)?;
        for r in induce_hier_rules(&phrases, a, config) {
            counts.add(r);
        }
    }
    if config.min_count > 1 {
        counts.prune(config.min_count);
    }
    Ok(counts)
}

/// Conditional probabilities from joint counts.
///
/// Without smoothing, `P(α|γ) = c(γ,α) / c(γ)` and symmetrically. With
/// Good-Turing, the joint counts are first replaced by `c*`, the
/// conditionals renormalised from them, and each conditional of a rule seen
/// once is capped at `c*/(c* + 0.5)`.
pub fn good_turing_smooth(counts: &RuleCounts, smooth: bool) -> BTreeMap<RuleKey, (f64, f64)> {
    let coc = CountOfCounts::from_counts(counts.iter().map(|(_, c)| c));
    let adjusted: Vec<(&RuleKey, u64, f64)> =
        counts.iter().map(|(k, c)| (k, c, if smooth { coc.adjusted(c) } else { c as f64 })).collect();
    let mut by_src: BTreeMap<&[Symbol], f64> = BTreeMap::new();
    let mut by_tgt: BTreeMap<&[Symbol], f64> = BTreeMap::new();
    for (k, _, a) in &adjusted {
        *by_src.entry(&k.source).or_insert(0.0) += a;
        *by_tgt.entry(&k.target).or_insert(0.0) += a;
    }
    adjusted
        .iter()
        .map(|(k, raw, a)| {
            let mut p_tgt_given_src = a / by_src[k.source.as_slice()];
            let mut p_src_given_tgt = a / by_tgt[k.target.as_slice()];
            if smooth && *raw == 1 {
                let cap = a / (a + 0.5);
                p_tgt_given_src = p_tgt_given_src.min(cap);
                p_src_given_tgt = p_src_given_tgt.min(cap);
            }
            ((*k).clone(), (p_src_given_tgt, p_tgt_given_src))
        })
        .collect()
}

fn terminal(s: &Symbol) -> Option<String> {
    match s {
        Symbol::Terminal(t) => Some(t.to_lowercase()),
        Symbol::NonTerminal(_) => None,
    }
}

/// `P_w(to | from)`: product over terminals of `to` of the best table
/// probability among aligned `from` terminals, or `P(w | NULL)` when a
/// terminal is unaligned. `links` are (from index, to index).
fn lexical_weight(table: &TranslationTable, from: &[Symbol], to: &[Symbol], links: &[(usize, usize)]) -> f64 {
    let mut weight = 1.0;
    for (j, sym) in to.iter().enumerate() {
        let Some(word) = terminal(sym) else { continue };
        let best = links
            .iter()
            .filter(|(_, t)| *t == j)
            .filter_map(|(f, _)| terminal(&from[*f]))
            .map(|src| table.prob_or_floor(&src, &word))
            .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.max(p))));
        weight *= best.unwrap_or_else(|| table.prob_or_floor(NULL_TOKEN, &word));
    }
    weight
}

/// Rule features from counts and the lexical tables of the statistical
/// aligner. Rules come back sorted by key.
pub fn estimate_features(counts: &RuleCounts, lex: &StatAligner, smooth: bool) -> Result<Vec<ScfgRule>> {
    let probs = good_turing_smooth(counts, smooth);
    let mut out = Vec::with_capacity(probs.len());
    for (key, (p_sgt, p_tgs)) in probs {
        let alignment = counts.alignment_of(&key);
        let lex_tgs = lexical_weight(&lex.forward, &key.source, &key.target, &alignment);
        let flipped: Vec<(usize, usize)> = alignment.iter().map(|&(i, j)| (j, i)).collect();
        let lex_sgt = lexical_weight(&lex.reverse, &key.target, &key.source, &flipped);
        let features = FeatureVector::from_probs(p_sgt, p_tgs, lex_sgt, lex_tgs);
        out.push(ScfgRule::new(key, alignment, features)?);
    }
    Ok(out)
}
