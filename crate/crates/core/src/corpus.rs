//! Sentences, POS-tagged sentences, triplet corpora and tokenisation.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::ops::Deref;

use crate::{Error, Result};

/// Characters detached from the start and end of whitespace-separated chunks.
pub const DETACHED_PUNCTUATION: &[char] = &['.', ',', ':', ';', '!', '?', '¿', '¡', '"', '(', ')'];

/// Tag assigned to tokens the tagger knows nothing about.
pub const DEFAULT_TAG: &str = "NC";

/// An ordered list of non-empty, whitespace-free tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sentence(Vec<String>);

impl Sentence {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if let Some(bad) = tokens.iter().find(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
            return Err(Error::InvalidToken(bad.clone()));
        }
        Ok(Sentence(tokens))
    }

    /// Builds a sentence from already tokenised words.
    ///
    /// Panics on an invalid token; meant for literals in code and tests.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        Self::new(words.iter().map(|w| w.as_ref().to_string()).collect()).expect("invalid token")
    }

    /// Splits a pre-tokenised line on whitespace.
    pub fn parse(line: &str) -> Self {
        Sentence(line.split_whitespace().map(str::to_string).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }
}

impl Deref for Sentence {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(t)?;
        }
        Ok(())
    }
}

/// Splits on whitespace and detaches leading and trailing punctuation marks
/// as tokens of their own. Interior punctuation is left alone.
pub fn tokenize(raw_line: &str) -> Sentence {
    let mut out = Vec::new();
    for chunk in raw_line.split_whitespace() {
        let mut rest = chunk;
        let mut trailing = Vec::new();
        while let Some(c) = rest.chars().next().filter(|c| DETACHED_PUNCTUATION.contains(c)) {
            out.push(c.to_string());
            rest = &rest[c.len_utf8()..];
        }
        while let Some(c) = rest.chars().next_back().filter(|c| DETACHED_PUNCTUATION.contains(c)) {
            trailing.push(c.to_string());
            rest = &rest[..rest.len() - c.len_utf8()];
        }
        if !rest.is_empty() {
            out.push(rest.to_string());
        }
        out.extend(trailing.into_iter().rev());
    }
    Sentence(out)
}

pub fn lowercase(s: &Sentence) -> Sentence {
    Sentence(s.iter().map(|t| t.to_lowercase()).collect())
}

/// Tokens paired one-to-one with POS labels. The tagset is open.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaggedSentence {
    tokens: Sentence,
    tags: Vec<String>,
}

impl TaggedSentence {
    pub fn new(tokens: Sentence, tags: Vec<String>) -> Result<Self> {
        if tokens.len() != tags.len() {
            return Err(Error::TagLengthMismatch { tokens: tokens.len(), tags: tags.len() });
        }
        if let Some(bad) = tags.iter().find(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
            return Err(Error::InvalidToken(bad.clone()));
        }
        Ok(TaggedSentence { tokens, tags })
    }

    pub fn tokens(&self) -> &Sentence {
        &self.tokens
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// The sub-sentence covering `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> TaggedSentence {
        TaggedSentence {
            tokens: Sentence(self.tokens[start..end].to_vec()),
            tags: self.tags[start..end].to_vec(),
        }
    }
}

/// Renders `token/TAG` pairs separated by spaces.
impl fmt::Display for TaggedSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (tok, tag)) in self.tokens.iter().zip(&self.tags).enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{tok}/{tag}")?;
        }
        Ok(())
    }
}

/// Anything that assigns one POS label per token.
pub trait Tagger {
    fn tag(&self, tokens: &[String]) -> Vec<String>;
}

/// Word-to-tag lookup with a handful of shape rules for words missing from
/// the lexicon: numerals are `CARD`, a sentence-final period is `FS`, a colon
/// is `COLON`, everything else falls back to [`DEFAULT_TAG`].
#[derive(Debug, Clone, Default)]
pub struct LexiconTagger {
    lexicon: BTreeMap<String, String>,
}

impl LexiconTagger {
    pub fn new(lexicon: BTreeMap<String, String>) -> Self {
        LexiconTagger { lexicon }
    }

    /// Learns the most frequent tag of every word. Ties go to the
    /// lexicographically smallest tag.
    pub fn from_tagged<'a, I>(sentences: I) -> Self
    where
        I: IntoIterator<Item = &'a TaggedSentence>,
    {
        let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
        for s in sentences {
            for (tok, tag) in s.tokens.iter().zip(&s.tags) {
                *counts.entry(tok).or_default().entry(tag).or_default() += 1;
            }
        }
        let lexicon = counts
            .into_iter()
            .map(|(tok, tags)| {
                // max_by_key keeps the last maximum; iterate in reverse so the
                // smallest tag wins ties.
                let best = tags.iter().rev().max_by_key(|(_, &n)| n).map(|(t, _)| *t).unwrap_or(DEFAULT_TAG);
                (tok.to_string(), best.to_string())
            })
            .collect();
        LexiconTagger { lexicon }
    }

    pub fn insert(&mut self, word: &str, tag: &str) {
        self.lexicon.insert(word.to_string(), tag.to_string());
    }

    pub fn lexicon(&self) -> &BTreeMap<String, String> {
        &self.lexicon
    }

    fn tag_one(&self, tok: &str, is_last: bool) -> String {
        if let Some(t) = self.lexicon.get(tok) {
            return t.clone();
        }
        let lower = tok.to_lowercase();
        if let Some(t) = self.lexicon.get(&lower) {
            return t.clone();
        }
        if is_numeral(tok) {
            "CARD".to_string()
        } else if tok == "." && is_last {
            "FS".to_string()
        } else if tok == ":" {
            "COLON".to_string()
        } else {
            DEFAULT_TAG.to_string()
        }
    }
}

fn is_numeral(tok: &str) -> bool {
    tok.chars().any(|c| c.is_ascii_digit()) && tok.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',')
}

impl Tagger for LexiconTagger {
    fn tag(&self, tokens: &[String]) -> Vec<String> {
        let n = tokens.len();
        tokens.iter().enumerate().map(|(i, t)| self.tag_one(t, i + 1 == n)).collect()
    }
}

pub fn pos_tag(s: &Sentence, tagger: &dyn Tagger) -> TaggedSentence {
    let tags = tagger.tag(s);
    assert_eq!(tags.len(), s.len(), "tagger returned the wrong number of tags");
    TaggedSentence { tokens: s.clone(), tags }
}

/// Joins adjacent tags with `-`: `[NC, COLON, NC]` becomes `[NC-COLON, COLON-NC]`.
pub fn to_bigrams(tags: &[String]) -> Vec<String> {
    tags.windows(2).map(|w| alloc::format!("{}-{}", w[0], w[1])).collect()
}

/// One line of a tri-parallel corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triplet {
    pub source: Sentence,
    pub mt: Sentence,
    pub pe: Sentence,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletCorpus {
    entries: Vec<Triplet>,
}

impl TripletCorpus {
    pub fn new(entries: Vec<Triplet>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(TripletCorpus { entries })
    }

    pub fn entries(&self) -> &[Triplet] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn words(s: &Sentence) -> Vec<&str> {
        s.iter().map(String::as_str).collect()
    }

    #[test]
    fn tokenize_examples() {
        let s = tokenize("CommanderX : Toad su gilipollas .");
        assert_eq!(words(&s), ["CommanderX", ":", "Toad", "su", "gilipollas", "."]);
        assert!(tokenize("").is_empty());
        assert_eq!(words(&tokenize("hola, mundo.")), ["hola", ",", "mundo", "."]);
        assert_eq!(words(&tokenize("¿qué? (sí)")), ["¿", "qué", "?", "(", "sí", ")"]);
        assert_eq!(words(&tokenize("3.5 a.m")), ["3.5", "a.m"]);
    }

    #[test]
    fn lowercase_examples() {
        assert_eq!(words(&lowercase(&Sentence::from_words(&["Toad"]))), ["toad"]);
        assert_eq!(words(&lowercase(&Sentence::from_words(&["CommanderX", ":"]))), ["commanderx", ":"]);
        assert_eq!(words(&lowercase(&Sentence::from_words(&["Ñandú"]))), ["ñandú"]);
    }

    fn spanish_tagger() -> LexiconTagger {
        let mut t = LexiconTagger::default();
        t.insert("su", "PPO");
        t.insert("eres", "VSfin");
        t.insert("un", "ART");
        t
    }

    #[test]
    fn pos_tag_examples() {
        let tagger = spanish_tagger();
        let s = tokenize("CommanderX : Toad su gilipollas .");
        let tagged = pos_tag(&s, &tagger);
        assert_eq!(tagged.tags(), ["NC", "COLON", "NC", "PPO", "NC", "FS"]);
        assert_eq!(tagged.to_string(), "CommanderX/NC :/COLON Toad/NC su/PPO gilipollas/NC ./FS");
        assert!(pos_tag(&Sentence::default(), &tagger).is_empty());
        assert_eq!(pos_tag(&Sentence::from_words(&["zzxqy"]), &tagger).tags(), ["NC"]);
        assert_eq!(pos_tag(&Sentence::from_words(&["1,000", "."]), &tagger).tags(), ["CARD", "FS"]);
    }

    #[test]
    fn lexicon_learned_from_tagged_text() {
        let a = TaggedSentence::new(Sentence::from_words(&["la", "casa"]), vec!["ART".into(), "NC".into()]).unwrap();
        let b = TaggedSentence::new(Sentence::from_words(&["casa"]), vec!["VLfin".into()]).unwrap();
        let c = TaggedSentence::new(Sentence::from_words(&["casa"]), vec!["NC".into()]).unwrap();
        let tagger = LexiconTagger::from_tagged([&a, &b, &c]);
        assert_eq!(tagger.lexicon()["casa"], "NC");
        // one NC, one VLfin: tie resolved to the smaller label
        let tagger = LexiconTagger::from_tagged([&b, &c]);
        assert_eq!(tagger.lexicon()["casa"], "NC");
    }

    #[test]
    fn bigram_examples() {
        let tags: Vec<String> = ["NC", "COLON", "NC", "PPO", "NC", "FS"].iter().map(|s| s.to_string()).collect();
        assert_eq!(to_bigrams(&tags), ["NC-COLON", "COLON-NC", "NC-PPO", "PPO-NC", "NC-FS"]);
        assert!(to_bigrams(&tags[..1]).is_empty());
        let pe: Vec<String> =
            ["NC", "COLON", "NC", "VSfin", "ART", "NC", "FS"].iter().map(|s| s.to_string()).collect();
        assert_eq!(to_bigrams(&pe), ["NC-COLON", "COLON-NC", "NC-VSfin", "VSfin-ART", "ART-NC", "NC-FS"]);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(Sentence::new(vec!["a b".into()]).is_err());
        assert!(Sentence::new(vec![String::new()]).is_err());
        assert!(TaggedSentence::new(Sentence::from_words(&["a"]), vec![]).is_err());
        assert_eq!(TripletCorpus::new(vec![]), Err(Error::EmptyCorpus));
    }
}
