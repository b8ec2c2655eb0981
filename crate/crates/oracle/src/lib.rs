//! Brute-force reference implementations for testing `sape-core`.
//!
//! Everything here favours obviously-correct enumeration over speed and
//! shares no search code with the library.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use sape_core::decoder::{DerivationNode, FeatureValues, RuleUse, WeightVector, NUM_FEATURES};
use sape_core::edit_aligner::{porter_stem, Link, Stage};
use sape_core::ngram_lm::NGramLM;
use sape_core::rule_extract::{ScfgRule, Symbol};
use sape_core::{Alignment, SynonymLexicon};

fn stage_matches(stage: Stage, a: &str, b: &str, lexicon: &SynonymLexicon) -> bool {
    match stage {
        Stage::Exact => a == b,
        Stage::Stem => porter_stem(&a.to_lowercase()) == porter_stem(&b.to_lowercase()),
        Stage::Synonym => lexicon.are_synonyms(a, b),
    }
}

fn crossings(links: &[Link]) -> usize {
    let mut c = 0;
    for i in 0..links.len() {
        for j in i + 1..links.len() {
            if links[i].crosses(&links[j]) {
                c += 1;
            }
        }
    }
    c
}

/// Every matching (no shared endpoints) drawn from `cands`.
fn all_matchings(cands: &[Link]) -> Vec<Vec<Link>> {
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << cands.len()) {
        let chosen: Vec<Link> = (0..cands.len()).filter(|b| mask >> b & 1 == 1).map(|b| cands[b]).collect();
        let srcs: BTreeSet<usize> = chosen.iter().map(|l| l.src).collect();
        let tgts: BTreeSet<usize> = chosen.iter().map(|l| l.tgt).collect();
        if srcs.len() == chosen.len() && tgts.len() == chosen.len() {
            out.push(chosen);
        }
    }
    out
}

/// Staged alignment by enumeration: for each stage in turn, the
/// maximum-cardinality matching over still-uncovered words with the fewest
/// crossings (counted over all links chosen so far), ties going to the
/// lexicographically smallest sorted link list.
///
/// Exponential in the number of candidate links; use on short inputs.
pub fn staged_align(h: &[String], r: &[String], lexicon: &SynonymLexicon) -> Alignment {
    let mut fixed: Vec<Link> = Vec::new();
    for stage in Stage::ALL {
        let cands: Vec<Link> = (0..h.len())
            .flat_map(|i| (0..r.len()).map(move |j| Link::new(i, j)))
            .filter(|l| !fixed.iter().any(|f| f.src == l.src || f.tgt == l.tgt))
            .filter(|l| stage_matches(stage, &h[l.src], &r[l.tgt], lexicon))
            .collect();
        assert!(cands.len() <= 24, "too many candidate links for enumeration");
        let best = all_matchings(&cands)
            .into_iter()
            .map(|mut m| {
                m.sort();
                let mut all = fixed.clone();
                all.extend(m.iter().copied());
                (std::cmp::Reverse(m.len()), crossings(&all), m)
            })
            .min()
            .map(|(_, _, m)| m)
            .unwrap_or_default();
        fixed.extend(best);
    }
    fixed.into_iter().collect()
}

/// Fewest crossings over all matchings between exactly-equal tokens that
/// have maximum cardinality.
pub fn min_crossings_exact(h: &[String], r: &[String]) -> (usize, usize) {
    let cands: Vec<Link> = (0..h.len())
        .flat_map(|i| (0..r.len()).map(move |j| Link::new(i, j)))
        .filter(|l| h[l.src] == r[l.tgt])
        .collect();
    all_matchings(&cands)
        .into_iter()
        .map(|m| (std::cmp::Reverse(m.len()), crossings(&m)))
        .min()
        .map(|(s, c)| (s.0, c))
        .unwrap_or((0, 0))
}

/// All `(mt_span, pe_span)` pairs (inclusive) with both sides at most
/// `max_len` long, at least one internal link, and no link leaving the box.
pub fn enumerate_phrases(
    mt_len: usize,
    pe_len: usize,
    a: &Alignment,
    max_len: usize,
) -> BTreeSet<((usize, usize), (usize, usize))> {
    let mut out = BTreeSet::new();
    for s1 in 0..mt_len {
        for e1 in s1..mt_len {
            for s2 in 0..pe_len {
                for e2 in s2..pe_len {
                    if e1 - s1 + 1 > max_len || e2 - s2 + 1 > max_len {
                        continue;
                    }
                    let inside_mt = |l: &Link| (s1..=e1).contains(&l.src);
                    let inside_pe = |l: &Link| (s2..=e2).contains(&l.tgt);
                    let any = a.iter().any(|l| inside_mt(l) && inside_pe(l));
                    let consistent = a.iter().all(|l| inside_mt(l) == inside_pe(l));
                    if any && consistent {
                        out.insert(((s1, e1), (s2, e2)));
                    }
                }
            }
        }
    }
    out
}

/// Minimal TER edits by breadth-first search over every sequence of
/// shifts of blocks occurring in the reference, plus Levenshtein distance
/// at each reachable ordering.
pub fn exhaustive_ter(h: &[String], r: &[String]) -> usize {
    fn lev(a: &[String], b: &[String]) -> usize {
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            d[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
                d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
            }
        }
        d[a.len()][b.len()]
    }
    let in_ref = |block: &[String]| r.windows(block.len()).any(|w| w == block);
    let mut dist: HashMap<Vec<String>, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    dist.insert(h.to_vec(), 0);
    queue.push_back(h.to_vec());
    let mut best = usize::MAX;
    while let Some(cur) = queue.pop_front() {
        let shifts = dist[&cur];
        best = best.min(shifts + lev(&cur, r));
        for start in 0..cur.len() {
            for len in 1..=cur.len() - start {
                let block = &cur[start..start + len];
                if block.len() > r.len() || !in_ref(block) {
                    continue;
                }
                let mut rest = cur.clone();
                rest.drain(start..start + len);
                for dest in 0..=rest.len() {
                    let mut next = rest.clone();
                    for (k, w) in block.iter().enumerate() {
                        next.insert(dest + k, w.clone());
                    }
                    if !dist.contains_key(&next) {
                        dist.insert(next.clone(), shifts + 1);
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    best
}

/// Whether `token` has no single-token rule of its own.
fn needs_pass_through(rules: &[ScfgRule], token: &str) -> bool {
    !rules.iter().any(|r| r.source.len() == 1 && r.source[0] == Symbol::Terminal(token.to_string()))
}

/// Output, rule-feature sums (first five entries) and glue count of a
/// partial derivation.
#[derive(Debug, Clone)]
struct Partial {
    output: Vec<String>,
    features: FeatureValues,
}

fn combine(target: &[Symbol], children: &[&Partial]) -> Vec<String> {
    let mut out = Vec::new();
    for s in target {
        match s {
            Symbol::Terminal(t) => out.push(t.clone()),
            Symbol::NonTerminal(k) => out.extend(children[*k as usize - 1].output.iter().cloned()),
        }
    }
    out
}

/// Ways of laying `source` over `input[i..j]`: each way lists the spans
/// filled by the nonterminals, in order.
fn source_matches(source: &[Symbol], input: &[String], i: usize, j: usize) -> Vec<Vec<(usize, usize)>> {
    if source.is_empty() {
        return if i == j { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    match &source[0] {
        Symbol::Terminal(t) => {
            if i < j && &input[i] == t {
                out.extend(source_matches(&source[1..], input, i + 1, j));
            }
        }
        Symbol::NonTerminal(_) => {
            for q in i + 1..=j {
                for mut rest in source_matches(&source[1..], input, q, j) {
                    rest.insert(0, (i, q));
                    out.push(rest);
                }
            }
        }
    }
    out
}

struct Enumerator<'a> {
    rules: &'a [ScfgRule],
    input: &'a [String],
    depth: usize,
    x: HashMap<(usize, usize), Vec<Partial>>,
}

impl Enumerator<'_> {
    fn x_derivations(&mut self, i: usize, j: usize) -> Vec<Partial> {
        if let Some(v) = self.x.get(&(i, j)) {
            return v.clone();
        }
        let mut out = Vec::new();
        if j - i <= self.depth {
            for rule in self.rules {
                for gaps in source_matches(&rule.source, self.input, i, j) {
                    if gaps.contains(&(i, j)) {
                        continue;
                    }
                    let child_lists: Vec<Vec<Partial>> = gaps.iter().map(|&(a, b)| self.x_derivations(a, b)).collect();
                    let mut combos: Vec<Vec<&Partial>> = vec![Vec::new()];
                    for list in &child_lists {
                        combos = combos
                            .into_iter()
                            .flat_map(|c| {
                                list.iter().map(move |p| {
                                    let mut c = c.clone();
                                    c.push(p);
                                    c
                                })
                            })
                            .collect();
                    }
                    for combo in combos {
                        let mut features = [0.0; NUM_FEATURES];
                        let rf = rule.features.as_array();
                        features[..5].copy_from_slice(&rf);
                        for c in &combo {
                            for k in 0..NUM_FEATURES {
                                features[k] += c.features[k];
                            }
                        }
                        out.push(Partial { output: combine(&rule.target, &combo), features });
                    }
                }
            }
            if j == i + 1 && needs_pass_through(self.rules, &self.input[i]) {
                let mut features = [0.0; NUM_FEATURES];
                features[..5].copy_from_slice(&[-1.0; 5]);
                out.push(Partial { output: vec![self.input[i].clone()], features });
            }
        }
        self.x.insert((i, j), out.clone());
        out
    }

    fn s_derivations(&mut self, j: usize, memo: &mut HashMap<usize, Vec<Partial>>) -> Vec<Partial> {
        if let Some(v) = memo.get(&j) {
            return v.clone();
        }
        let mut out = self.x_derivations(0, j);
        for k in 1..j {
            let xs = self.x_derivations(k, j);
            if xs.is_empty() {
                continue;
            }
            for s in self.s_derivations(k, memo) {
                for x in &xs {
                    let mut features = s.features;
                    for f in 0..NUM_FEATURES {
                        features[f] += x.features[f];
                    }
                    features[5] -= 1.0;
                    let mut output = s.output.clone();
                    output.extend(x.output.iter().cloned());
                    out.push(Partial { output, features });
                }
            }
        }
        memo.insert(j, out.clone());
        out
    }
}

/// A complete derivation found by enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumerated {
    pub output: Vec<String>,
    pub features: FeatureValues,
    pub score: f64,
}

fn finish(output: Vec<String>, mut features: FeatureValues, lm: &NGramLM, w: &WeightVector) -> Enumerated {
    features[6] = lm.score(&output) * std::f64::consts::LN_10;
    features[7] = -(output.len() as f64);
    let score = w.as_array().iter().zip(&features).map(|(a, b)| a * b).sum();
    Enumerated { output, features, score }
}

/// Every derivation of `input` under `rules` plus the glue grammar and
/// pass-through rules, scored from scratch.
pub fn enumerate_derivations(
    rules: &[ScfgRule],
    input: &[String],
    lm: &NGramLM,
    w: &WeightVector,
    depth: usize,
) -> Vec<Enumerated> {
    if input.is_empty() {
        return vec![finish(Vec::new(), [0.0; NUM_FEATURES], lm, w)];
    }
    let mut e = Enumerator { rules, input, depth, x: HashMap::new() };
    let mut memo = HashMap::new();
    let mut out: Vec<Enumerated> = e
        .s_derivations(input.len(), &mut memo)
        .into_iter()
        .map(|p| finish(p.output, p.features, lm, w))
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.output.cmp(&b.output)));
    out
}

/// Best derivation per distinct output, sorted by score then output.
pub fn distinct_kbest(all: &[Enumerated], k: usize) -> Vec<Enumerated> {
    let mut best: BTreeMap<Vec<String>, Enumerated> = BTreeMap::new();
    for d in all {
        match best.get(&d.output) {
            Some(b) if b.score >= d.score => {}
            _ => {
                best.insert(d.output.clone(), d.clone());
            }
        }
    }
    let mut v: Vec<Enumerated> = best.into_values().collect();
    v.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.output.cmp(&b.output)));
    v.truncate(k);
    v
}

/// Independently re-derives output, features and score of a derivation
/// tree, checking that every step matches the input and that the leaves
/// cover it exactly once.
pub fn recompute(
    root: Option<&DerivationNode>,
    rules: &[ScfgRule],
    input: &[String],
    lm: &NGramLM,
    w: &WeightVector,
) -> Result<Enumerated, String> {
    let Some(root) = root else {
        if !input.is_empty() {
            return Err("empty derivation for non-empty input".into());
        }
        return Ok(finish(Vec::new(), [0.0; NUM_FEATURES], lm, w));
    };
    if root.span != (0, input.len()) {
        return Err(format!("root span {:?} does not cover the input", root.span));
    }
    let mut features = [0.0; NUM_FEATURES];
    let output = walk(root, rules, input, &mut features)?;
    Ok(finish(output, features, lm, w))
}

fn walk(node: &DerivationNode, rules: &[ScfgRule], input: &[String], features: &mut FeatureValues) -> Result<Vec<String>, String> {
    let (i, j) = node.span;
    let mut outs = Vec::new();
    for c in &node.children {
        outs.push(walk(c, rules, input, features)?);
    }
    match node.rule {
        RuleUse::Grammar(r) => {
            let rule = rules.get(r).ok_or("rule index out of range")?;
            let gaps: Vec<(usize, usize)> = node.children.iter().map(|c| c.span).collect();
            if !source_matches(&rule.source, input, i, j).contains(&gaps) {
                return Err(format!("rule {r} does not match span {:?} with gaps {gaps:?}", node.span));
            }
            for (k, v) in rule.features.as_array().iter().enumerate() {
                features[k] += v;
            }
            let mut out = Vec::new();
            for s in &rule.target {
                match s {
                    Symbol::Terminal(t) => out.push(t.clone()),
                    Symbol::NonTerminal(k) => out.extend(outs[*k as usize - 1].iter().cloned()),
                }
            }
            Ok(out)
        }
        RuleUse::PassThrough => {
            if j != i + 1 || !node.children.is_empty() || !needs_pass_through(rules, &input[i]) {
                return Err(format!("invalid pass-through at {:?}", node.span));
            }
            for f in features.iter_mut().take(5) {
                *f -= 1.0;
            }
            Ok(vec![input[i].clone()])
        }
        RuleUse::GlueStart => {
            if node.children.len() != 1 || node.children[0].span != node.span || i != 0 {
                return Err("malformed S -> <X, X>".into());
            }
            Ok(outs.concat())
        }
        RuleUse::GlueConcat => {
            let ok = node.children.len() == 2
                && i == 0
                && node.children[0].span.0 == 0
                && node.children[0].span.1 == node.children[1].span.0
                && node.children[1].span.1 == j
                && matches!(node.children[0].rule, RuleUse::GlueStart | RuleUse::GlueConcat)
                && !matches!(node.children[1].rule, RuleUse::GlueStart | RuleUse::GlueConcat);
            if !ok {
                return Err("malformed S -> <S X, S X>".into());
            }
            features[5] -= 1.0;
            Ok(outs.concat())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn ter_oracle_examples() {
        assert_eq!(exhaustive_ter(&w("c d a b"), &w("a b c d")), 1);
        assert_eq!(exhaustive_ter(&w("a x c d e"), &w("a b c d e")), 1);
        assert_eq!(exhaustive_ter(&w(""), &w("a b")), 2);
    }

    #[test]
    fn phrase_oracle_examples() {
        let a = Alignment::from_pairs([(0, 1), (1, 0)]);
        let got = enumerate_phrases(2, 2, &a, 7);
        assert_eq!(got.len(), 3);
    }

    #[test]
    fn staged_oracle_prefers_fewer_crossings() {
        let a = staged_align(&w("a b a"), &w("a b"), &SynonymLexicon::default());
        assert_eq!(a.to_string(), "0-0 1-1");
    }
}
