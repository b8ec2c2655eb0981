//! Hybrid MT/PE word alignment.
//!
//! Step one keeps every edit-aligner link and admits a statistical link only
//! when both of its endpoints are left unaligned by the edit aligner. Step two
//! repeats that over several views of the sentence pair (surface, stem, POS)
//! and unions the results. Bigram-POS alignment additionally yields two-word
//! surface segments that are appended to the training data.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{lowercase, pos_tag, to_bigrams, Sentence, TaggedSentence, Tagger, Triplet};
use crate::edit_aligner::{porter_stem, Alignment, EditAligner};
use crate::stat_aligner::StatAligner;
use crate::Result;

/// Combines an edit-aligner alignment with a statistical one.
pub fn combine_link_level(meteor: &Alignment, stat: &Alignment) -> Alignment {
    let src: BTreeSet<usize> = meteor.iter().map(|l| l.src).collect();
    let tgt: BTreeSet<usize> = meteor.iter().map(|l| l.tgt).collect();
    let mut out = meteor.clone();
    for l in stat.iter() {
        if !src.contains(&l.src) && !tgt.contains(&l.tgt) {
            out.insert(*l);
        }
    }
    out
}

/// Which alignment table an entry was first seen in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    Surface,
    Stem,
    Pos,
    BigramPos,
    Meteor,
    Statistical,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Surface => "surface",
            Origin::Stem => "stem",
            Origin::Pos => "pos",
            Origin::BigramPos => "bigram-pos",
            Origin::Meteor => "meteor",
            Origin::Statistical => "statistical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableEntry {
    pub mt: Vec<String>,
    pub pe: Vec<String>,
    pub origin: Origin,
}

impl fmt::Display for TableEntry {
    /// `mt tokens ||| pe tokens`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ||| {}", self.mt.join(" "), self.pe.join(" "))
    }
}

/// Phrase-level (MT, PE) pairs with their origin.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignmentTable {
    entries: Vec<TableEntry>,
}

impl AlignmentTable {
    /// Builds a table, dropping entries with an empty side.
    pub fn new(entries: Vec<TableEntry>) -> Self {
        AlignmentTable { entries: entries.into_iter().filter(|e| !e.mt.is_empty() && !e.pe.is_empty()).collect() }
    }

    /// One word-pair entry per link.
    pub fn from_links<S: AsRef<str>, T: AsRef<str>>(mt: &[S], pe: &[T], links: &Alignment, origin: Origin) -> Self {
        let entries = links
            .iter()
            .map(|l| TableEntry {
                mt: vec![String::from(mt[l.src].as_ref())],
                pe: vec![String::from(pe[l.tgt].as_ref())],
                origin,
            })
            .collect();
        AlignmentTable { entries }
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, mt: &str, pe: &str) -> bool {
        self.entries.iter().any(|e| e.mt.join(" ") == mt && e.pe.join(" ") == pe)
    }
}

/// Set union over (mt, pe) pairs. The first origin seen is kept; the output is
/// sorted by MT phrase, then PE phrase.
pub fn union_tables<'a, I>(tables: I) -> AlignmentTable
where
    I: IntoIterator<Item = &'a AlignmentTable>,
{
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    for t in tables {
        for e in &t.entries {
            if seen.insert((e.mt.clone(), e.pe.clone())) {
                entries.push(e.clone());
            }
        }
    }
    entries.sort_by(|a, b| (&a.mt, &a.pe).cmp(&(&b.mt, &b.pe)));
    AlignmentTable { entries }
}

/// Result of aligning the tag-bigram sequences of an MT/PE pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BigramPairs {
    /// Links between bigram positions.
    pub alignment: Alignment,
    /// For each link, the two-token MT and PE segments it covers.
    pub segments: Vec<(TaggedSentence, TaggedSentence)>,
}

impl BigramPairs {
    pub fn table(&self) -> AlignmentTable {
        AlignmentTable::new(
            self.segments
                .iter()
                .map(|(m, p)| TableEntry {
                    mt: m.tokens().to_vec(),
                    pe: p.tokens().to_vec(),
                    origin: Origin::BigramPos,
                })
                .collect(),
        )
    }
}

/// Aligns tag bigrams with the edit aligner and maps each link back to the
/// surface words it spans.
pub fn bigram_pos_pairs(mt: &TaggedSentence, pe: &TaggedSentence, aligner: &EditAligner) -> BigramPairs {
    let hb = to_bigrams(mt.tags());
    let rb = to_bigrams(pe.tags());
    let alignment = aligner.align(&hb, &rb).alignment();
    let segments = alignment.iter().map(|l| (mt.slice(l.src, l.src + 2), pe.slice(l.tgt, l.tgt + 2))).collect();
    BigramPairs { alignment, segments }
}

/// The per-view alignments of one sentence pair, each already combined with
/// the statistical links, plus their union.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ViewAlignments {
    pub surface: Alignment,
    pub stem: Alignment,
    pub pos: Alignment,
    pub union: Alignment,
}

/// Aligns the surface (lowercased), stem and POS views of a pair. Stem and POS
/// tokens sit at the same positions as the surface tokens, so all views share
/// one coordinate system.
pub fn align_views(mt: &TaggedSentence, pe: &TaggedSentence, stat: &Alignment, aligner: &EditAligner) -> ViewAlignments {
    let lm = lowercase(mt.tokens());
    let lp = lowercase(pe.tokens());
    let stems = |s: &Sentence| -> Vec<String> { s.iter().map(|t| porter_stem(t)).collect() };
    let surface = combine_link_level(&aligner.align(&lm, &lp).alignment(), stat);
    let stem = combine_link_level(&aligner.align(&stems(&lm), &stems(&lp)).alignment(), stat);
    let pos = combine_link_level(&aligner.align(mt.tags(), pe.tags()).alignment(), stat);
    let union = surface.union(&stem).union(&pos);
    ViewAlignments { surface, stem, pos, union }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViewOptions {
    pub em_iterations: usize,
}

impl Default for ViewOptions {
    fn default() -> Self {
        ViewOptions { em_iterations: 5 }
    }
}

/// An MT/PE training pair with its hybrid word alignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedPair {
    pub mt: TaggedSentence,
    pub pe: TaggedSentence,
    pub alignment: Alignment,
    /// True for the two-word segments contributed by bigram-POS alignment.
    pub bigram_segment: bool,
}

/// Everything the rule extractor needs from the alignment stage.
#[derive(Debug, Clone, Default)]
pub struct TrainingViews {
    /// Corpus pairs first, in order, then the bigram segments.
    pub pairs: Vec<AlignedPair>,
    /// Union of the surface, stem, POS and bigram-POS tables.
    pub table: AlignmentTable,
    /// The bigram-POS surface pairs alone.
    pub bigram_table: AlignmentTable,
    /// Directional IBM-1 models trained on the lowercased pairs and segments.
    pub stat: StatAligner,
}

impl TrainingViews {
    pub fn corpus_pairs(&self) -> impl Iterator<Item = &AlignedPair> + '_ {
        self.pairs.iter().filter(|p| !p.bigram_segment)
    }

    pub fn segment_pairs(&self) -> impl Iterator<Item = &AlignedPair> + '_ {
        self.pairs.iter().filter(|p| p.bigram_segment)
    }
}

/// Tags the MT and PE sides, derives bigram-POS segments, trains the
/// statistical aligner on pairs plus segments, and aligns every pair under
/// each view.
pub fn build_training_views(
    corpus: &[Triplet],
    tagger: &dyn Tagger,
    aligner: &EditAligner,
    options: ViewOptions,
) -> Result<TrainingViews> {
    if corpus.is_empty() {
        return Ok(TrainingViews::default());
    }
    let mut tagged: Vec<(TaggedSentence, TaggedSentence, bool)> = corpus
        .iter()
        .map(|t| (pos_tag(&t.mt, tagger), pos_tag(&t.pe, tagger), false))
        .collect();
    let mut bigram_tables = Vec::new();
    let mut segments = Vec::new();
    for (mt, pe, _) in &tagged {
        let bp = bigram_pos_pairs(mt, pe, aligner);
        bigram_tables.push(bp.table());
        segments.extend(bp.segments.into_iter().map(|(m, p)| (m, p, true)));
    }
    tagged.extend(segments);

    let lowered: Vec<(Sentence, Sentence)> =
        tagged.iter().map(|(m, p, _)| (lowercase(m.tokens()), lowercase(p.tokens()))).collect();
    let stat = StatAligner::train(lowered.iter().map(|(m, p)| (m.tokens(), p.tokens())), options.em_iterations)?;

    let mut surface_tables = Vec::new();
    let mut stem_tables = Vec::new();
    let mut pos_tables = Vec::new();
    let mut pairs = Vec::with_capacity(tagged.len());
    for ((mt, pe, bigram_segment), (lm, lp)) in tagged.into_iter().zip(&lowered) {
        let stat_links = stat.align(lm, lp);
        let views = align_views(&mt, &pe, &stat_links, aligner);
        surface_tables.push(AlignmentTable::from_links(mt.tokens(), pe.tokens(), &views.surface, Origin::Surface));
        stem_tables.push(AlignmentTable::from_links(mt.tokens(), pe.tokens(), &views.stem, Origin::Stem));
        pos_tables.push(AlignmentTable::from_links(mt.tokens(), pe.tokens(), &views.pos, Origin::Pos));
        pairs.push(AlignedPair { mt, pe, alignment: views.union, bigram_segment });
    }
    let bigram_table = union_tables(&bigram_tables);
    let table = union_tables(
        surface_tables.iter().chain(&stem_tables).chain(&pos_tables).chain(core::iter::once(&bigram_table)),
    );
    Ok(TrainingViews { pairs, table, bigram_table, stat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, LexiconTagger};
    use alloc::string::ToString;

    fn entry(mt: &str, pe: &str) -> TableEntry {
        TableEntry {
            mt: mt.split(' ').map(ToString::to_string).collect(),
            pe: pe.split(' ').map(ToString::to_string).collect(),
            origin: Origin::Surface,
        }
    }

    #[test]
    fn combine_examples() {
        let a = |p: &[(usize, usize)]| Alignment::from_pairs(p.iter().copied());
        assert_eq!(combine_link_level(&a(&[(0, 0)]), &a(&[(0, 0), (1, 1)])), a(&[(0, 0), (1, 1)]));
        assert_eq!(combine_link_level(&a(&[(0, 0), (1, 1)]), &a(&[(0, 1)])), a(&[(0, 0), (1, 1)]));
        assert_eq!(combine_link_level(&a(&[]), &a(&[(0, 2), (1, 0)])), a(&[(0, 2), (1, 0)]));
    }

    #[test]
    fn union_examples() {
        let ab = AlignmentTable::new(vec![entry("a", "b")]);
        let cd = AlignmentTable::new(vec![entry("c", "d")]);
        assert_eq!(union_tables([&ab, &ab]).len(), 1);
        let u = union_tables([&cd, &ab]);
        assert_eq!(u.entries().iter().map(ToString::to_string).collect::<Vec<_>>(), ["a ||| b", "c ||| d"]);
        assert!(union_tables([&AlignmentTable::default(), &AlignmentTable::default()]).is_empty());
    }

    #[test]
    fn union_keeps_first_origin() {
        let mut first = entry("a", "b");
        first.origin = Origin::Pos;
        let t1 = AlignmentTable::new(vec![first]);
        let t2 = AlignmentTable::new(vec![entry("a", "b")]);
        assert_eq!(union_tables([&t1, &t2]).entries()[0].origin, Origin::Pos);
    }

    pub(crate) fn example_tagger() -> LexiconTagger {
        let mut t = LexiconTagger::default();
        t.insert("su", "PPO");
        t.insert("eres", "VSfin");
        t.insert("un", "ART");
        t
    }

    #[test]
    fn bigram_pairs_of_worked_example() {
        let tagger = example_tagger();
        let mt = pos_tag(&tokenize("CommanderX : Toad su gilipollas ."), &tagger);
        let pe = pos_tag(&tokenize("CommanderX : Sapo eres un gilipollas ."), &tagger);
        let bp = bigram_pos_pairs(&mt, &pe, &EditAligner::default());
        assert_eq!(bp.alignment.to_string(), "0-0 1-1 4-5");
        let rendered: Vec<_> = bp.table().entries().iter().map(ToString::to_string).collect();
        assert_eq!(rendered, ["CommanderX : ||| CommanderX :", ": Toad ||| : Sapo", "gilipollas . ||| gilipollas ."]);
    }

    #[test]
    fn bigram_pairs_identity_and_single_token() {
        let tagger = example_tagger();
        let s = pos_tag(&tokenize("un sapo su sapo ."), &tagger);
        assert_eq!(bigram_pos_pairs(&s, &s, &EditAligner::default()).segments.len(), 4);
        let one = pos_tag(&tokenize("sapo"), &tagger);
        assert!(bigram_pos_pairs(&one, &one, &EditAligner::default()).segments.is_empty());
    }

    #[test]
    fn training_views_of_worked_example() {
        let t = Triplet {
            source: tokenize("CommanderX : Toad your asshole ."),
            mt: tokenize("CommanderX : Toad su gilipollas ."),
            pe: tokenize("CommanderX : Sapo eres un gilipollas ."),
        };
        let views =
            build_training_views(&[t], &example_tagger(), &EditAligner::default(), ViewOptions::default()).unwrap();
        assert_eq!(views.segment_pairs().count(), 3);
        assert_eq!(views.corpus_pairs().count(), 1);
        assert!(views.table.contains(": Toad", ": Sapo"));
        assert!(views.table.contains("Toad", "Sapo"));
        for p in &views.pairs {
            p.alignment.check_range(p.mt.len(), p.pe.len()).unwrap();
        }
    }

    #[test]
    fn empty_corpus_gives_empty_views() {
        let v = build_training_views(&[], &example_tagger(), &EditAligner::default(), ViewOptions::default()).unwrap();
        assert!(v.pairs.is_empty() && v.table.is_empty());
    }

    #[test]
    fn identical_sides_align_to_identity() {
        let s = tokenize("el perro come su comida .");
        let t = Triplet { source: s.clone(), mt: s.clone(), pe: s.clone() };
        let v = build_training_views(&[t], &example_tagger(), &EditAligner::default(), ViewOptions::default())
            .unwrap();
        let main = v.corpus_pairs().next().unwrap();
        assert_eq!(main.alignment, Alignment::from_pairs((0..s.len()).map(|i| (i, i))));
        for e in v.table.entries() {
            assert_eq!(e.mt, e.pe);
        }
    }
}
