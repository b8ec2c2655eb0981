//! Monolingual hypothesis/reference aligner in the style of METEOR.
//!
//! Alignment is built in three stages (exact surface match, Porter-stem match,
//! synonym match). Each stage picks, among the maximum-cardinality matchings
//! over its candidate links, the one with the fewest crossings against every
//! link fixed so far. Ties go to the lexicographically smallest link list.

mod porter;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use porter::porter_stem;

use crate::{Error, Result};

/// A positional link between a source-side (hypothesis / MT) token and a
/// target-side (reference / PE) token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub src: usize,
    pub tgt: usize,
}

impl Link {
    pub const fn new(src: usize, tgt: usize) -> Self {
        Link { src, tgt }
    }

    pub fn crosses(&self, other: &Link) -> bool {
        (self.src < other.src && self.tgt > other.tgt) || (self.src > other.src && self.tgt < other.tgt)
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.src, self.tgt)
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(alloc::format!("malformed alignment link {s:?}"));
        let (a, b) = s.split_once('-').ok_or_else(bad)?;
        Ok(Link { src: a.parse().map_err(|_| bad())?, tgt: b.parse().map_err(|_| bad())? })
    }
}

/// A set of links between two token sequences. Rendered in Pharaoh format
/// (`0-0 1-1 4-5`). No matching constraint is imposed here; see
/// [`Alignment::is_matching`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Alignment {
    links: BTreeSet<Link>,
}

impl Alignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(pairs: I) -> Self {
        Alignment { links: pairs.into_iter().map(|(s, t)| Link::new(s, t)).collect() }
    }

    pub fn insert(&mut self, link: Link) -> bool {
        self.links.insert(link)
    }

    pub fn contains(&self, link: &Link) -> bool {
        self.links.contains(link)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Link> + '_ {
        self.links.iter()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// True when no position appears in more than one link on either side.
    pub fn is_matching(&self) -> bool {
        let mut s = BTreeSet::new();
        let mut t = BTreeSet::new();
        self.links.iter().all(|l| s.insert(l.src) && t.insert(l.tgt))
    }

    pub fn transposed(&self) -> Alignment {
        Alignment { links: self.links.iter().map(|l| Link::new(l.tgt, l.src)).collect() }
    }

    pub fn union(&self, other: &Alignment) -> Alignment {
        Alignment { links: self.links.union(&other.links).copied().collect() }
    }

    pub fn intersection(&self, other: &Alignment) -> Alignment {
        Alignment { links: self.links.intersection(&other.links).copied().collect() }
    }

    pub fn is_subset(&self, other: &Alignment) -> bool {
        self.links.is_subset(&other.links)
    }

    pub fn check_range(&self, src_len: usize, tgt_len: usize) -> Result<()> {
        match self.links.iter().find(|l| l.src >= src_len || l.tgt >= tgt_len) {
            Some(l) => Err(Error::LinkOutOfRange { src: l.src, tgt: l.tgt, src_len, tgt_len }),
            None => Ok(()),
        }
    }

    pub fn crossings(&self) -> usize {
        count_crossings(self.links.iter().copied())
    }
}

impl FromIterator<Link> for Alignment {
    fn from_iter<I: IntoIterator<Item = Link>>(iter: I) -> Self {
        Alignment { links: iter.into_iter().collect() }
    }
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.links.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for Alignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split_whitespace().map(Link::from_str).collect()
    }
}

/// Number of unordered link pairs whose relative order differs between the
/// two sides.
pub fn count_crossings<I: IntoIterator<Item = Link>>(links: I) -> usize {
    let links: Vec<Link> = links.into_iter().collect();
    let mut n = 0;
    for (i, a) in links.iter().enumerate() {
        n += links[i + 1..].iter().filter(|b| a.crosses(b)).count();
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Exact,
    Stem,
    Synonym,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Exact, Stage::Stem, Stage::Synonym];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct StagedLink {
    pub link: Link,
    pub stage: Stage,
}

/// Output of [`EditAligner::align`]: a matching with the stage that produced
/// each link, sorted by position.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MeteorAlignment {
    links: Vec<StagedLink>,
}

impl MeteorAlignment {
    pub fn links(&self) -> &[StagedLink] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn alignment(&self) -> Alignment {
        self.links.iter().map(|l| l.link).collect()
    }

    pub fn crossings(&self) -> usize {
        count_crossings(self.links.iter().map(|l| l.link))
    }
}

/// Groups of mutually synonymous words. Two words are synonyms when they
/// share a group. Lookups are case-insensitive.
#[derive(Debug, Clone, Default)]
pub struct SynonymLexicon {
    groups: Vec<Vec<String>>,
    index: BTreeMap<String, Vec<usize>>,
}

impl SynonymLexicon {
    pub fn from_groups<I, G, S>(groups: I) -> Self
    where
        I: IntoIterator<Item = G>,
        G: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lex = SynonymLexicon::default();
        for g in groups {
            let members: Vec<String> = g.into_iter().map(|w| w.as_ref().to_lowercase()).collect();
            if members.is_empty() {
                continue;
            }
            let id = lex.groups.len();
            for m in &members {
                let ids = lex.index.entry(m.clone()).or_default();
                if ids.last() != Some(&id) {
                    ids.push(id);
                }
            }
            lex.groups.push(members);
        }
        lex
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[Vec<String>] {
        &self.groups
    }

    pub fn are_synonyms(&self, a: &str, b: &str) -> bool {
        let (Some(ga), Some(gb)) = (self.index.get(&a.to_lowercase()), self.index.get(&b.to_lowercase())) else {
            return false;
        };
        ga.iter().any(|g| gb.contains(g))
    }
}

/// Per-token views used by the stage predicates.
struct Views<'a> {
    surface: Vec<&'a str>,
    stems: Vec<String>,
}

impl<'a> Views<'a> {
    fn new<S: AsRef<str>>(tokens: &'a [S]) -> Self {
        let surface: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
        let stems = surface.iter().map(|t| porter_stem(&t.to_lowercase())).collect();
        Views { surface, stems }
    }
}

fn stage_predicate(stage: Stage, h: &Views, r: &Views, lexicon: &SynonymLexicon, i: usize, j: usize) -> bool {
    match stage {
        Stage::Exact => h.surface[i] == r.surface[j],
        Stage::Stem => h.stems[i] == r.stems[j],
        Stage::Synonym => lexicon.are_synonyms(h.surface[i], r.surface[j]),
    }
}

/// All links `(i, j)` between uncovered positions whose tokens match under
/// `stage`, sorted.
pub fn stage_match<S: AsRef<str>, T: AsRef<str>>(
    h: &[S],
    r: &[T],
    stage: Stage,
    lexicon: &SynonymLexicon,
    covered_h: &[bool],
    covered_r: &[bool],
) -> Vec<Link> {
    let hv = Views::new(h);
    let rv = Views::new(r);
    candidates(stage, &hv, &rv, lexicon, covered_h, covered_r)
}

fn candidates(
    stage: Stage,
    h: &Views,
    r: &Views,
    lexicon: &SynonymLexicon,
    covered_h: &[bool],
    covered_r: &[bool],
) -> Vec<Link> {
    if stage == Stage::Synonym && lexicon.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in (0..h.surface.len()).filter(|&i| !covered_h[i]) {
        for j in (0..r.surface.len()).filter(|&j| !covered_r[j]) {
            if stage_predicate(stage, h, r, lexicon, i, j) {
                out.push(Link::new(i, j));
            }
        }
    }
    out
}

/// Staged monolingual aligner.
#[derive(Debug, Clone)]
pub struct EditAligner {
    pub lexicon: SynonymLexicon,
    /// Sentences up to this length (on both sides) get the exact
    /// branch-and-bound search; longer ones the greedy heuristic.
    pub exact_max_len: usize,
    /// Search-node limit for one stage of the exact search. When exhausted,
    /// the better of the incumbent and the greedy matching is kept.
    pub node_budget: usize,
}

impl Default for EditAligner {
    fn default() -> Self {
        EditAligner { lexicon: SynonymLexicon::default(), exact_max_len: 20, node_budget: 2_000_000 }
    }
}

impl EditAligner {
    pub fn new(lexicon: SynonymLexicon) -> Self {
        EditAligner { lexicon, ..Self::default() }
    }

    pub fn align<S: AsRef<str>, T: AsRef<str>>(&self, h: &[S], r: &[T]) -> MeteorAlignment {
        let hv = Views::new(h);
        let rv = Views::new(r);
        let mut covered_h = vec![false; h.len()];
        let mut covered_r = vec![false; r.len()];
        let mut fixed: Vec<Link> = Vec::new();
        let mut out: Vec<StagedLink> = Vec::new();
        let exact = h.len().max(r.len()) <= self.exact_max_len;
        for stage in Stage::ALL {
            let cands = candidates(stage, &hv, &rv, &self.lexicon, &covered_h, &covered_r);
            if cands.is_empty() {
                continue;
            }
            let chosen = if exact {
                select_exact(&cands, &fixed, r.len(), self.node_budget)
            } else {
                select_greedy(&cands, &fixed, r.len())
            };
            for l in chosen {
                covered_h[l.src] = true;
                covered_r[l.tgt] = true;
                fixed.push(l);
                out.push(StagedLink { link: l, stage });
            }
        }
        out.sort();
        MeteorAlignment { links: out }
    }
}

/// Aligns with default settings.
pub fn align<S: AsRef<str>, T: AsRef<str>>(h: &[S], r: &[T], lexicon: &SynonymLexicon) -> MeteorAlignment {
    EditAligner { lexicon: lexicon.clone(), ..EditAligner::default() }.align(h, r)
}

fn crossings_with(link: Link, others: &[Link]) -> usize {
    others.iter().filter(|o| link.crosses(o)).count()
}

struct Search<'a> {
    /// Source positions that have candidates, ascending, with their
    /// candidate targets ascending.
    rows: Vec<(usize, Vec<usize>)>,
    fixed: &'a [Link],
    used: Vec<bool>,
    chosen: Vec<Link>,
    best: Option<(usize, usize, Vec<Link>)>,
    nodes: usize,
    budget: usize,
}

impl Search<'_> {
    fn better(&self, size: usize, cost: usize) -> bool {
        match &self.best {
            None => true,
            Some((bs, bc, _)) => size > *bs || (size == *bs && cost < *bc),
        }
    }

    fn dfs(&mut self, idx: usize, cost: usize) {
        self.nodes += 1;
        if self.nodes > self.budget {
            return;
        }
        let size = self.chosen.len();
        if idx == self.rows.len() {
            if self.better(size, cost) {
                self.best = Some((size, cost, self.chosen.clone()));
            }
            return;
        }
        let reachable = self.rows[idx..].iter().filter(|(_, ts)| ts.iter().any(|&t| !self.used[t])).count();
        if let Some((bs, bc, _)) = &self.best {
            let cap = size + reachable;
            if cap < *bs || (cap == *bs && cost >= *bc) {
                return;
            }
        }
        let (src, targets) = (self.rows[idx].0, self.rows[idx].1.clone());
        for tgt in targets {
            if self.used[tgt] {
                continue;
            }
            let link = Link::new(src, tgt);
            let added = crossings_with(link, self.fixed) + self.chosen.iter().filter(|c| c.tgt > tgt).count();
            self.used[tgt] = true;
            self.chosen.push(link);
            self.dfs(idx + 1, cost + added);
            self.chosen.pop();
            self.used[tgt] = false;
        }
        self.dfs(idx + 1, cost);
    }
}

fn rows_of(cands: &[Link]) -> Vec<(usize, Vec<usize>)> {
    let mut rows: Vec<(usize, Vec<usize>)> = Vec::new();
    for l in cands {
        match rows.last_mut() {
            Some((s, ts)) if *s == l.src => ts.push(l.tgt),
            _ => rows.push((l.src, vec![l.tgt])),
        }
    }
    rows
}

/// Maximum matching over `cands` with the fewest crossings (against
/// `fixed` and within itself); ties broken towards the lexicographically
/// smallest sorted link list. `cands` must be sorted.
fn select_exact(cands: &[Link], fixed: &[Link], tgt_len: usize, budget: usize) -> Vec<Link> {
    let mut search = Search {
        rows: rows_of(cands),
        fixed,
        used: vec![false; tgt_len],
        chosen: Vec::new(),
        best: None,
        nodes: 0,
        budget,
    };
    search.dfs(0, 0);
    let exhausted = search.nodes > budget;
    let best = search.best.map(|(_, _, links)| links).unwrap_or_default();
    if exhausted {
        let greedy = select_greedy(cands, fixed, tgt_len);
        let score = |m: &[Link]| {
            let cost: usize = (0..m.len()).map(|i| crossings_with(m[i], fixed) + crossings_with(m[i], &m[..i])).sum();
            (m.len(), usize::MAX - cost)
        };
        if score(&greedy) > score(&best) {
            return greedy;
        }
    }
    best
}

/// Left-to-right: each source position takes the free target adding the
/// fewest crossings, smallest index on ties.
fn select_greedy(cands: &[Link], fixed: &[Link], tgt_len: usize) -> Vec<Link> {
    let mut used = vec![false; tgt_len];
    let mut chosen: Vec<Link> = Vec::new();
    for (src, targets) in rows_of(cands) {
        let pick = targets
            .iter()
            .filter(|&&t| !used[t])
            .map(|&t| {
                let l = Link::new(src, t);
                (crossings_with(l, fixed) + crossings_with(l, &chosen), t)
            })
            .min();
        if let Some((_, t)) = pick {
            used[t] = true;
            chosen.push(Link::new(src, t));
        }
    }
    chosen
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Exact => "exact",
            Stage::Stem => "stem",
            Stage::Synonym => "synonym",
        })
    }
}
