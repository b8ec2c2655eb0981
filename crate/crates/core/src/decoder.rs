//! CKY decoding over the SCFG with the glue grammar, n-gram LM state and
//! lazy k-best extraction.
//!
//! A derivation `d` is scored in log space as
//!
//! ```text
//! Σ_r rule_weight(r) + (#S → ⟨S X, S X⟩)·(−λ_g) + λ_lm·ln P_lm(e) − λ_wp·|e|
//! ```
//!
//! which is the weighted sum of an eight-dimensional feature vector.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use hashbrown::{HashMap, HashSet};

use crate::math::LN_10;
use crate::ngram_lm::{NGramLM, WordId, BOS_ID, EOS_ID};
use crate::rule_extract::{FeatureVector, ScfgRule, Symbol};
use crate::{Error, Result};

pub const NUM_FEATURES: usize = 8;

/// Weight-file names of the features, in vector order.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "p_src_given_tgt",
    "p_tgt_given_src",
    "lex_src_given_tgt",
    "lex_tgt_given_src",
    "phrase_penalty",
    "glue",
    "lm",
    "word_penalty",
];

pub type FeatureValues = [f64; NUM_FEATURES];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightVector {
    pub p_src_given_tgt: f64,
    pub p_tgt_given_src: f64,
    pub lex_src_given_tgt: f64,
    pub lex_tgt_given_src: f64,
    pub phrase_penalty: f64,
    pub glue: f64,
    pub lm: f64,
    pub word_penalty: f64,
}

impl Default for WeightVector {
    fn default() -> Self {
        let mut w = WeightVector::uniform(1.0);
        w.word_penalty = 0.5;
        w
    }
}

impl WeightVector {
    pub fn uniform(v: f64) -> Self {
        WeightVector::from_array([v; NUM_FEATURES])
    }

    pub fn as_array(&self) -> FeatureValues {
        [
            self.p_src_given_tgt,
            self.p_tgt_given_src,
            self.lex_src_given_tgt,
            self.lex_tgt_given_src,
            self.phrase_penalty,
            self.glue,
            self.lm,
            self.word_penalty,
        ]
    }

    pub fn from_array(a: FeatureValues) -> Self {
        WeightVector {
            p_src_given_tgt: a[0],
            p_tgt_given_src: a[1],
            lex_src_given_tgt: a[2],
            lex_tgt_given_src: a[3],
            phrase_penalty: a[4],
            glue: a[5],
            lm: a[6],
            word_penalty: a[7],
        }
    }

    pub fn dot(&self, h: &FeatureValues) -> f64 {
        self.as_array().iter().zip(h).map(|(w, h)| w * h).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// `Σ_i λ_i ln φ_i` over the five rule features.
pub fn rule_weight(features: &FeatureVector, w: &WeightVector) -> f64 {
    let f = features.as_array();
    let l = w.as_array();
    (0..FeatureVector::LEN).map(|i| l[i] * f[i]).sum()
}

/// Log weight of one application of `S → ⟨S X, S X⟩`. `S → ⟨X, X⟩` is free.
pub fn glue_weight(w: &WeightVector) -> f64 {
    -w.glue
}

/// Identity rule `X → ⟨token, token⟩` with every feature at e^{-1}.
pub fn pass_through_rule(token: &str) -> ScfgRule {
    ScfgRule {
        lhs: crate::rule_extract::Lhs::X,
        source: vec![Symbol::Terminal(token.into())],
        target: vec![Symbol::Terminal(token.into())],
        alignment: vec![(0, 0)],
        features: FeatureVector::uniform_penalty(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderParams {
    /// Longest span an X rule may cover.
    pub search_depth: usize,
    /// Nodes kept per span and left-hand side (X or S); `None` keeps
    /// everything and builds every edge.
    pub beam: Option<usize>,
    /// With a beam, edges built per span and left-hand side, best first.
    pub pop_limit: usize,
    /// Rules kept per source side, by rule weight; `None` keeps all.
    pub rule_limit: Option<usize>,
}

impl Default for DecoderParams {
    fn default() -> Self {
        DecoderParams { search_depth: 7, beam: Some(100), pop_limit: 1000, rule_limit: Some(20) }
    }
}

impl DecoderParams {
    /// No pruning of any kind.
    pub fn exhaustive(search_depth: usize) -> Self {
        DecoderParams { search_depth, beam: None, pop_limit: usize::MAX, rule_limit: None }
    }
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    terminals: HashMap<u32, usize>,
    nonterminal: Option<usize>,
    rules: Vec<usize>,
}

/// An indexed rule set: a prefix tree over source sides.
#[derive(Debug, Clone)]
pub struct Grammar {
    rules: Vec<ScfgRule>,
    vocab: HashMap<String, u32>,
    trie: Vec<TrieNode>,
}

impl Grammar {
    pub fn new(rules: Vec<ScfgRule>) -> Result<Self> {
        let mut g = Grammar { rules: Vec::new(), vocab: HashMap::new(), trie: vec![TrieNode::default()] };
        for rule in rules {
            rule.key().validate()?;
            let idx = g.rules.len();
            let mut node = 0;
            for sym in &rule.source {
                node = match sym {
                    Symbol::Terminal(t) => {
                        let next_id = g.vocab.len() as u32;
                        let id = *g.vocab.entry(t.clone()).or_insert(next_id);
                        match g.trie[node].terminals.get(&id) {
                            Some(&n) => n,
                            None => {
                                g.trie.push(TrieNode::default());
                                let n = g.trie.len() - 1;
                                g.trie[node].terminals.insert(id, n);
                                n
                            }
                        }
                    }
                    Symbol::NonTerminal(_) => match g.trie[node].nonterminal {
                        Some(n) => n,
                        None => {
                            g.trie.push(TrieNode::default());
                            let n = g.trie.len() - 1;
                            g.trie[node].nonterminal = Some(n);
                            n
                        }
                    },
                };
            }
            g.trie[node].rules.push(idx);
            g.rules.push(rule);
        }
        Ok(g)
    }

    pub fn rules(&self) -> &[ScfgRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    fn source_id(&self, token: &str) -> Option<u32> {
        self.vocab.get(token).copied()
    }

    /// Whether `token` needs the pass-through rule: no rule rewrites the
    /// single token on its own.
    pub fn needs_pass_through(&self, token: &str) -> bool {
        self.source_id(token)
            .and_then(|id| self.trie[0].terminals.get(&id))
            .map_or(true, |&n| self.trie[n].rules.is_empty())
    }
}

/// How a derivation step was licensed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleUse {
    /// Index into [`Grammar::rules`].
    Grammar(usize),
    PassThrough,
    /// `S → ⟨X, X⟩`
    GlueStart,
    /// `S → ⟨S X, S X⟩`
    GlueConcat,
}

/// One rule application `⟨r, i, j⟩`. Children fill the rule's nonterminals
/// in source order (`[X,1]` first); for glue rules they are `S` then `X`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationNode {
    pub rule: RuleUse,
    pub span: (usize, usize),
    pub children: Vec<DerivationNode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derivation {
    /// `None` only for the empty input.
    pub root: Option<DerivationNode>,
    pub output: Vec<String>,
    pub features: FeatureValues,
    pub score: f64,
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.output.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TargetSym {
    Word(WordId),
    Gap(u8),
}

#[derive(Debug, Clone)]
struct Edge {
    rule: RuleUse,
    tails: [usize; 2],
    arity: u8,
    delta: FeatureValues,
    score: f64,
}

impl Edge {
    fn tails(&self) -> &[usize] {
        &self.tails[..self.arity as usize]
    }
}

#[derive(Debug, Clone)]
struct Node {
    span: (usize, usize),
    left: Vec<WordId>,
    right: Vec<WordId>,
    edges: Vec<Edge>,
    best: f64,
}

pub struct Decoder<'a> {
    grammar: &'a Grammar,
    lm: &'a NGramLM,
    weights: WeightVector,
    params: DecoderParams,
    targets: Vec<Vec<TargetSym>>,
    rule_deltas: Vec<[f64; FeatureVector::LEN]>,
    /// Per trie node, the rules that survive the rule limit.
    leaf_rules: Vec<Vec<usize>>,
}

impl<'a> Decoder<'a> {
    pub fn new(grammar: &'a Grammar, lm: &'a NGramLM, weights: WeightVector, params: DecoderParams) -> Result<Self> {
        if grammar.is_empty() {
            return Err(Error::InvalidArgument("empty grammar".into()));
        }
        if params.search_depth == 0 || params.beam == Some(0) || params.pop_limit == 0 || params.rule_limit == Some(0) {
            return Err(Error::InvalidArgument("search depth, beam and limits must be positive".into()));
        }
        if !weights.is_finite() {
            return Err(Error::InvalidArgument("weights must be finite".into()));
        }
        let targets = grammar
            .rules
            .iter()
            .map(|r| {
                r.target
                    .iter()
                    .map(|s| match s {
                        Symbol::Terminal(t) => TargetSym::Word(lm.id(t)),
                        Symbol::NonTerminal(i) => TargetSym::Gap(*i),
                    })
                    .collect()
            })
            .collect();
        let rule_deltas = grammar.rules.iter().map(|r| r.features.as_array()).collect();
        let leaf_rules = grammar
            .trie
            .iter()
            .map(|node| {
                let mut rules = node.rules.clone();
                if let Some(limit) = params.rule_limit {
                    let w = |r: usize| {
                        let words = grammar.rules[r].target.iter().filter(|s| s.is_terminal()).count() as f64;
                        rule_weight(&grammar.rules[r].features, &weights) - weights.word_penalty * words
                    };
                    rules.sort_by(|&a, &b| w(b).total_cmp(&w(a)).then(a.cmp(&b)));
                    rules.truncate(limit);
                }
                rules
            })
            .collect();
        Ok(Decoder { grammar, lm, weights, params, targets, rule_deltas, leaf_rules })
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn params(&self) -> &DecoderParams {
        &self.params
    }

    pub fn grammar(&self) -> &Grammar {
        self.grammar
    }

    /// The highest-scoring derivation.
    pub fn decode<S: AsRef<str>>(&self, input: &[S]) -> Derivation {
        self.chart(input).best()
    }

    /// Up to `k` derivations with distinct outputs, best first.
    pub fn kbest<S: AsRef<str>>(&self, input: &[S], k: usize) -> Vec<Derivation> {
        self.chart(input).kbest(k)
    }

    pub fn chart<S: AsRef<str>>(&self, input: &[S]) -> Chart<'_, 'a> {
        ChartBuilder::new(self, input).build()
    }

    /// LM walk over a target pattern: returns (log10 delta, left, right).
    fn combine(&self, pattern: &[TargetSym], tails: &[&Node], scratch: &mut Vec<WordId>) -> (f64, Vec<WordId>, Vec<WordId>) {
        let m = self.lm.order() - 1;
        let mut lm = 0.0;
        let mut left = Vec::with_capacity(m);
        let mut count = 0usize;
        scratch.clear();
        let push = |w: WordId, ctx: &mut Vec<WordId>, left: &mut Vec<WordId>, count: &mut usize, lm: &mut f64| {
            if *count >= m {
                *lm += self.lm.log10_prob(ctx, w);
            }
            if left.len() < m {
                left.push(w);
            }
            ctx.push(w);
            if ctx.len() > m {
                ctx.remove(0);
            }
            *count += 1;
        };
        for sym in pattern {
            match *sym {
                TargetSym::Word(w) => push(w, scratch, &mut left, &mut count, &mut lm),
                TargetSym::Gap(k) => {
                    let node = tails[k as usize - 1];
                    for &w in &node.left {
                        push(w, scratch, &mut left, &mut count, &mut lm);
                    }
                    if node.left.len() == m {
                        scratch.clear();
                        scratch.extend_from_slice(&node.right);
                    }
                }
            }
        }
        (lm, left, scratch.clone())
    }

    /// LM events at the sentence boundaries of a complete item.
    fn goal_lm(&self, node: &Node) -> f64 {
        let m = self.lm.order() - 1;
        let mut ctx = vec![BOS_ID];
        let mut lm = 0.0;
        for &w in &node.left {
            lm += self.lm.log10_prob(&ctx, w);
            ctx.push(w);
        }
        if node.left.len() == m && m > 0 {
            ctx = node.right.clone();
        }
        lm + self.lm.log10_prob(&ctx, EOS_ID)
    }
}

struct ChartBuilder<'d, 'a, 'i, S> {
    dec: &'d Decoder<'a>,
    input: &'i [S],
    ids: Vec<Option<u32>>,
    nodes: Vec<Node>,
    /// `x[i][len]`: X nodes over `(i, i + len)`.
    x: Vec<Vec<Vec<usize>>>,
    /// `s[j]`: S nodes over `(0, j)`.
    s: Vec<Vec<usize>>,
    scratch: Vec<WordId>,
}

type StateKey = (Vec<WordId>, Vec<WordId>);
type Pending = BTreeMap<StateKey, Vec<Edge>>;

/// Edges sharing a rule and child spans; `lists` are the child candidates,
/// best first.
struct Group {
    rule: RuleUse,
    pattern: Vec<TargetSym>,
    base: FeatureValues,
    lists: Vec<Vec<usize>>,
}

/// Heap entry of the best-first edge enumeration. Ties go to the earlier
/// group, then to lower ranks.
struct CubeItem {
    score: f64,
    group: usize,
    ranks: [usize; 2],
    slot: usize,
}

impl PartialEq for CubeItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for CubeItem {}

impl PartialOrd for CubeItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CubeItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.group.cmp(&self.group))
            .then_with(|| other.ranks.cmp(&self.ranks))
    }
}

impl<'d, 'a, 'i, S: AsRef<str>> ChartBuilder<'d, 'a, 'i, S> {
    fn new(dec: &'d Decoder<'a>, input: &'i [S]) -> Self {
        let n = input.len();
        ChartBuilder {
            dec,
            input,
            ids: input.iter().map(|t| dec.grammar.source_id(t.as_ref())).collect(),
            nodes: Vec::new(),
            x: vec![vec![Vec::new(); n + 1]; n + 1],
            s: vec![Vec::new(); n + 1],
            scratch: Vec::new(),
        }
    }

    fn make_edge(&mut self, rule: RuleUse, tails: &[usize], pattern: &[TargetSym], base: FeatureValues) -> (StateKey, Edge) {
        let tail_nodes: Vec<&Node> = tails.iter().map(|&t| &self.nodes[t]).collect();
        let (lm10, left, right) = self.dec.combine(pattern, &tail_nodes, &mut self.scratch);
        let mut delta = base;
        delta[6] = lm10 * LN_10;
        let score = self.dec.weights.dot(&delta);
        let mut t = [0; 2];
        t[..tails.len()].copy_from_slice(tails);
        ((left, right), Edge { rule, tails: t, arity: tails.len() as u8, delta, score })
    }

    fn inside(&self, e: &Edge) -> f64 {
        e.score + e.tails().iter().map(|&t| self.nodes[t].best).sum::<f64>()
    }

    /// Builds the edges of every group: all of them without a beam,
    /// otherwise the best `pop_limit` found by lazy best-first enumeration
    /// of each group's child lists.
    fn expand(&mut self, groups: &[Group], pending: &mut Pending) {
        if self.dec.params.beam.is_none() {
            for g in groups {
                match g.lists.len() {
                    0 => self.add(g, &[], pending),
                    1 => {
                        for &t in &g.lists[0] {
                            self.add(g, &[t], pending);
                        }
                    }
                    _ => {
                        for &t1 in &g.lists[0] {
                            for &t2 in &g.lists[1] {
                                self.add(g, &[t1, t2], pending);
                            }
                        }
                    }
                }
            }
            return;
        }
        let mut heap: BinaryHeap<CubeItem> = BinaryHeap::new();
        let mut seen: HashSet<(usize, [usize; 2])> = HashSet::new();
        let mut built: Vec<Option<(StateKey, Edge)>> = Vec::new();
        for gi in 0..groups.len() {
            self.push_cube(groups, gi, [0, 0], &mut heap, &mut seen, &mut built);
        }
        let mut popped = 0;
        while popped < self.dec.params.pop_limit {
            let Some(item) = heap.pop() else { break };
            let (key, edge) = built[item.slot].take().expect("each slot is popped once");
            pending.entry(key).or_default().push(edge);
            popped += 1;
            for d in 0..groups[item.group].lists.len() {
                let mut next = item.ranks;
                next[d] += 1;
                self.push_cube(groups, item.group, next, &mut heap, &mut seen, &mut built);
            }
        }
    }

    fn add(&mut self, g: &Group, tails: &[usize], pending: &mut Pending) {
        let (key, edge) = self.make_edge(g.rule, tails, &g.pattern, g.base);
        pending.entry(key).or_default().push(edge);
    }

    fn push_cube(
        &mut self,
        groups: &[Group],
        gi: usize,
        ranks: [usize; 2],
        heap: &mut BinaryHeap<CubeItem>,
        seen: &mut HashSet<(usize, [usize; 2])>,
        built: &mut Vec<Option<(StateKey, Edge)>>,
    ) {
        let g = &groups[gi];
        let mut tails = [0usize; 2];
        for (d, list) in g.lists.iter().enumerate() {
            match list.get(ranks[d]) {
                Some(&t) => tails[d] = t,
                None => return,
            }
        }
        if !seen.insert((gi, ranks)) {
            return;
        }
        let (key, edge) = self.make_edge(g.rule, &tails[..g.lists.len()], &g.pattern, g.base);
        let score = self.inside(&edge);
        heap.push(CubeItem { score, group: gi, ranks, slot: built.len() });
        built.push(Some((key, edge)));
    }

    fn finish(&mut self, span: (usize, usize), pending: Pending) -> Vec<usize> {
        let mut built: Vec<Node> = pending
            .into_iter()
            .map(|((left, right), edges)| {
                let best = edges
                    .iter()
                    .map(|e| e.score + e.tails().iter().map(|&t| self.nodes[t].best).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max);
                Node { span, left, right, edges, best }
            })
            .collect();
        // stable: equal scores keep key order
        built.sort_by(|a, b| b.best.total_cmp(&a.best));
        if let Some(b) = self.dec.params.beam {
            built.truncate(b);
        }
        let start = self.nodes.len();
        self.nodes.extend(built);
        (start..self.nodes.len()).collect()
    }

    fn match_rules(&self, trie: usize, pos: usize, end: usize, gaps: &mut Vec<(usize, usize)>, out: &mut Vec<(usize, Vec<(usize, usize)>)>) {
        let g = self.dec.grammar;
        let node = &g.trie[trie];
        if pos == end {
            for &r in &self.dec.leaf_rules[trie] {
                out.push((r, gaps.clone()));
            }
            return;
        }
        if let Some(id) = self.ids[pos] {
            if let Some(&next) = node.terminals.get(&id) {
                self.match_rules(next, pos + 1, end, gaps, out);
            }
        }
        if let Some(next) = node.nonterminal {
            if gaps.len() < 2 {
                for q in pos + 1..=end {
                    if !self.x[pos][q - pos].is_empty() {
                        gaps.push((pos, q));
                        self.match_rules(next, q, end, gaps, out);
                        gaps.pop();
                    }
                }
            }
        }
    }

    fn build_x(&mut self, i: usize, j: usize) {
        let mut matches = Vec::new();
        self.match_rules(0, i, j, &mut Vec::new(), &mut matches);
        let mut groups = Vec::with_capacity(matches.len() + 1);
        for (r, gaps) in matches {
            let mut base = [0.0; NUM_FEATURES];
            base[..FeatureVector::LEN].copy_from_slice(&self.dec.rule_deltas[r]);
            let pattern = self.dec.targets[r].clone();
            base[7] = -(pattern.iter().filter(|s| matches!(s, TargetSym::Word(_))).count() as f64);
            let lists = gaps.iter().map(|&(a, b)| self.x[a][b - a].clone()).collect();
            groups.push(Group { rule: RuleUse::Grammar(r), pattern, base, lists });
        }
        if j == i + 1 && self.dec.grammar.needs_pass_through(self.input[i].as_ref()) {
            groups.push(Group {
                rule: RuleUse::PassThrough,
                pattern: vec![TargetSym::Word(self.dec.lm.id(self.input[i].as_ref()))],
                base: [-1.0, -1.0, -1.0, -1.0, -1.0, 0.0, 0.0, -1.0],
                lists: Vec::new(),
            });
        }
        let mut pending = Pending::new();
        self.expand(&groups, &mut pending);
        self.x[i][j - i] = self.finish((i, j), pending);
    }

    fn build_s(&mut self, j: usize) {
        let depth = self.dec.params.search_depth;
        let mut groups = Vec::new();
        if j <= depth {
            groups.push(Group {
                rule: RuleUse::GlueStart,
                pattern: vec![TargetSym::Gap(1)],
                base: [0.0; NUM_FEATURES],
                lists: vec![self.x[0][j].clone()],
            });
        }
        let mut glue = [0.0; NUM_FEATURES];
        glue[5] = -1.0;
        for k in j.saturating_sub(depth).max(1)..j {
            groups.push(Group {
                rule: RuleUse::GlueConcat,
                pattern: vec![TargetSym::Gap(1), TargetSym::Gap(2)],
                base: glue,
                lists: vec![self.s[k].clone(), self.x[k][j - k].clone()],
            });
        }
        let mut pending = Pending::new();
        self.expand(&groups, &mut pending);
        self.s[j] = self.finish((0, j), pending);
    }

    fn build(mut self) -> Chart<'d, 'a> {
        let n = self.input.len();
        let depth = self.dec.params.search_depth;
        for len in 1..=n.min(depth) {
            for i in 0..=n - len {
                self.build_x(i, i + len);
            }
        }
        for j in 1..=n {
            self.build_s(j);
        }
        let mut edges = Vec::new();
        if n > 0 {
            for &t in &self.s[n] {
                let lm10 = self.dec.goal_lm(&self.nodes[t]);
                let mut delta = [0.0; NUM_FEATURES];
                delta[6] = lm10 * LN_10;
                let score = self.dec.weights.dot(&delta);
                edges.push(Edge { rule: RuleUse::GlueStart, tails: [t, 0], arity: 1, delta, score });
            }
        } else {
            let mut delta = [0.0; NUM_FEATURES];
            delta[6] = self.dec.lm.log10_prob(&[BOS_ID], EOS_ID) * LN_10;
            let score = self.dec.weights.dot(&delta);
            edges.push(Edge { rule: RuleUse::GlueStart, tails: [0, 0], arity: 0, delta, score });
        }
        let best = edges
            .iter()
            .map(|e| e.score + e.tails().iter().map(|&t| self.nodes[t].best).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        self.nodes.push(Node { span: (0, n), left: Vec::new(), right: Vec::new(), edges, best });
        Chart {
            dec: self.dec,
            input: self.input.iter().map(|t| String::from(t.as_ref())).collect(),
            nodes: self.nodes,
        }
    }
}

/// A decoded hypergraph for one input.
pub struct Chart<'d, 'a> {
    dec: &'d Decoder<'a>,
    input: Vec<String>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
struct Cand {
    score: f64,
    edge: usize,
    ranks: [usize; 2],
}

struct HeapItem(Cand);

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .score
            .total_cmp(&other.0.score)
            .then_with(|| other.0.edge.cmp(&self.0.edge))
            .then_with(|| other.0.ranks.cmp(&self.0.ranks))
    }
}

struct Lazy<'c> {
    nodes: &'c [Node],
    derivs: Vec<Vec<Cand>>,
    heaps: Vec<Option<BinaryHeap<HeapItem>>>,
    seen: Vec<HashSet<(usize, [usize; 2])>>,
}

impl<'c> Lazy<'c> {
    fn new(nodes: &'c [Node]) -> Self {
        Lazy {
            nodes,
            derivs: vec![Vec::new(); nodes.len()],
            heaps: (0..nodes.len()).map(|_| None).collect(),
            seen: vec![HashSet::new(); nodes.len()],
        }
    }

    fn cand_score(&mut self, v: usize, edge: usize, ranks: [usize; 2]) -> Option<f64> {
        let e = &self.nodes[v].edges[edge];
        let mut score = e.score;
        for (x, &t) in e.tails().iter().enumerate() {
            score += self.get(t, ranks[x])?.score;
        }
        Some(score)
    }

    /// The `k`-th best derivation (0-based) of node `v`.
    fn get(&mut self, v: usize, k: usize) -> Option<Cand> {
        if self.heaps[v].is_none() {
            self.heaps[v] = Some(BinaryHeap::new());
            for edge in 0..self.nodes[v].edges.len() {
                if let Some(score) = self.cand_score(v, edge, [0, 0]) {
                    self.seen[v].insert((edge, [0, 0]));
                    self.heaps[v].as_mut().unwrap().push(HeapItem(Cand { score, edge, ranks: [0, 0] }));
                }
            }
        }
        while self.derivs[v].len() <= k {
            let Some(HeapItem(c)) = self.heaps[v].as_mut().unwrap().pop() else { break };
            self.derivs[v].push(c);
            let arity = self.nodes[v].edges[c.edge].arity as usize;
            for x in 0..arity {
                let mut ranks = c.ranks;
                ranks[x] += 1;
                if self.seen[v].insert((c.edge, ranks)) {
                    if let Some(score) = self.cand_score(v, c.edge, ranks) {
                        self.heaps[v].as_mut().unwrap().push(HeapItem(Cand { score, edge: c.edge, ranks }));
                    }
                }
            }
        }
        self.derivs[v].get(k).copied()
    }
}

impl Chart<'_, '_> {
    fn goal(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Number of nodes in the hypergraph, including the goal.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn best(&self) -> Derivation {
        self.kbest(1).pop().expect("every chart has a derivation")
    }

    /// Up to `k` derivations with pairwise distinct outputs, sorted by
    /// score, ties broken by the lexicographically smaller output.
    pub fn kbest(&self, k: usize) -> Vec<Derivation> {
        let mut lazy = Lazy::new(&self.nodes);
        let goal = self.goal();
        let limit = (100 * k).max(10_000);
        let mut out: Vec<Derivation> = Vec::new();
        let mut outputs: HashSet<Vec<String>> = HashSet::new();
        for rank in 0..limit {
            let Some(c) = lazy.get(goal, rank) else { break };
            if out.len() >= k && c.score < out.last().map_or(f64::NEG_INFINITY, |d| d.score) {
                break;
            }
            let d = self.extract(&mut lazy, goal, rank);
            if outputs.insert(d.output.clone()) {
                out.push(d);
            }
        }
        out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.output.cmp(&b.output)));
        out.truncate(k);
        out
    }

    fn extract(&self, lazy: &mut Lazy<'_>, goal: usize, rank: usize) -> Derivation {
        let c = lazy.get(goal, rank).expect("rank exists");
        let mut features = [0.0; NUM_FEATURES];
        let e = &self.nodes[goal].edges[c.edge];
        add(&mut features, &e.delta);
        if e.arity == 0 {
            return Derivation { root: None, output: Vec::new(), features, score: c.score };
        }
        let (root, output) = self.walk(lazy, e.tails[0], c.ranks[0], &mut features);
        Derivation { root: Some(root), output, features, score: c.score }
    }

    fn walk(&self, lazy: &mut Lazy<'_>, v: usize, rank: usize, features: &mut FeatureValues) -> (DerivationNode, Vec<String>) {
        let c = lazy.get(v, rank).expect("rank exists");
        let node = &self.nodes[v];
        let e = &node.edges[c.edge];
        add(features, &e.delta);
        let mut children = Vec::new();
        let mut outs = Vec::new();
        for (x, &t) in e.tails().iter().enumerate() {
            let (child, out) = self.walk(lazy, t, c.ranks[x], features);
            children.push(child);
            outs.push(out);
        }
        let output = match e.rule {
            RuleUse::Grammar(r) => {
                let mut o = Vec::new();
                for sym in &self.dec.grammar.rules[r].target {
                    match sym {
                        Symbol::Terminal(t) => o.push(t.clone()),
                        Symbol::NonTerminal(i) => o.extend(outs[*i as usize - 1].iter().cloned()),
                    }
                }
                o
            }
            RuleUse::PassThrough => vec![self.input[node.span.0].clone()],
            RuleUse::GlueStart | RuleUse::GlueConcat => outs.concat(),
        };
        (DerivationNode { rule: e.rule, span: node.span, children }, output)
    }
}

fn add(acc: &mut FeatureValues, delta: &FeatureValues) {
    for (a, d) in acc.iter_mut().zip(delta) {
        *a += d;
    }
}
