//! On-disk formats. Every writer emits `\n` line endings and sorted output
//! where the content has no natural order, so rewriting a file read from
//! disk reproduces it byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::{Compression, GzBuilder};

use sape_core::corpus::{LexiconTagger, Sentence, TaggedSentence, Triplet, TripletCorpus};
use sape_core::decoder::{Derivation, WeightVector, FEATURE_NAMES, NUM_FEATURES};
use sape_core::hybrid_align::AlignmentTable;
use sape_core::ngram_lm::{ArpaEntry, NGramLM};
use sape_core::rule_extract::ScfgRule;
use sape_core::stat_aligner::TranslationTable;
use sape_core::{Alignment, SynonymLexicon};

use crate::error::{Result, SapeError};

/// Lines of a UTF-8 text file. A trailing newline does not produce an extra
/// empty line; `\r\n` endings are accepted.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = fs::read(path).map_err(|e| SapeError::io(path, e))?;
    let mut lines = Vec::new();
    let mut parts: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();
    if parts.last().is_some_and(|l| l.is_empty()) {
        parts.pop();
    }
    for (i, raw) in parts.into_iter().enumerate() {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let line = std::str::from_utf8(raw).map_err(|_| SapeError::Utf8 { path: path.to_path_buf(), line: i + 1 })?;
        lines.push(line.to_string());
    }
    Ok(lines)
}

/// Writes `content` in one go.
pub fn write_file(path: &Path, content: &[u8]) -> Result<()> {
    fs::write(path, content).map_err(|e| SapeError::io(path, e))
}

pub fn write_lines<I, S>(path: &Path, lines: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = String::new();
    for l in lines {
        out.push_str(l.as_ref());
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// One whitespace-tokenized sentence per line.
pub fn read_sentences(path: &Path) -> Result<Vec<Sentence>> {
    Ok(read_lines(path)?.iter().map(|l| Sentence::parse(l)).collect())
}

pub fn write_sentences<'a, I: IntoIterator<Item = &'a [String]>>(path: &Path, sentences: I) -> Result<()> {
    write_lines(path, sentences.into_iter().map(|s| s.join(" ")))
}

/// Reads three line-aligned files. A length mismatch names the first file
/// whose line count differs from the source file.
pub fn load_triplets(src: &Path, mt: &Path, pe: &Path) -> Result<TripletCorpus> {
    let s = read_sentences(src)?;
    let m = read_sentences(mt)?;
    let p = read_sentences(pe)?;
    for (path, side) in [(mt, &m), (pe, &p)] {
        if side.len() != s.len() {
            return Err(SapeError::LineCountMismatch { path: path.to_path_buf(), expected: s.len(), found: side.len() });
        }
    }
    let entries =
        s.into_iter().zip(m).zip(p).map(|((source, mt), pe)| Triplet { source, mt, pe }).collect();
    Ok(TripletCorpus::new(entries)?)
}

/// `token/TAG` pairs; the tag is everything after the last `/`.
pub fn parse_tagged(line: &str) -> std::result::Result<TaggedSentence, String> {
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    for item in line.split_whitespace() {
        let (tok, tag) = item.rsplit_once('/').filter(|(t, g)| !t.is_empty() && !g.is_empty()).ok_or_else(|| {
            format!("expected token/TAG, found {item:?}")
        })?;
        tokens.push(tok.to_string());
        tags.push(tag.to_string());
    }
    let tokens = Sentence::new(tokens).map_err(|e| e.to_string())?;
    TaggedSentence::new(tokens, tags).map_err(|e| e.to_string())
}

pub fn read_tagged(path: &Path) -> Result<Vec<TaggedSentence>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, l)| parse_tagged(l).map_err(|m| SapeError::format(path, i + 1, m)))
        .collect()
}

/// `token<TAB>TAG` lines. Blank lines are skipped.
pub fn read_tagger_lexicon(path: &Path) -> Result<LexiconTagger> {
    let mut lexicon = BTreeMap::new();
    for (i, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (tok, tag) = line
            .split_once('\t')
            .filter(|(t, g)| !t.is_empty() && !g.trim().is_empty())
            .ok_or_else(|| SapeError::format(path, i + 1, "expected token<TAB>TAG"))?;
        lexicon.insert(tok.to_string(), tag.trim().to_string());
    }
    Ok(LexiconTagger::new(lexicon))
}

pub fn write_tagger_lexicon(path: &Path, tagger: &LexiconTagger) -> Result<()> {
    write_lines(path, tagger.lexicon().iter().map(|(w, t)| format!("{w}\t{t}")))
}

/// One synonym group per line, members separated by spaces.
pub fn read_synonyms(path: &Path) -> Result<SynonymLexicon> {
    let lines = read_lines(path)?;
    Ok(SynonymLexicon::from_groups(lines.iter().map(|l| l.split_whitespace())))
}

/// Pharaoh `i-j` alignments, one sentence pair per line.
pub fn read_alignments(path: &Path) -> Result<Vec<Alignment>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, l)| l.parse::<Alignment>().map_err(|e| SapeError::format(path, i + 1, e.to_string())))
        .collect()
}

pub fn write_alignments<'a, I: IntoIterator<Item = &'a Alignment>>(path: &Path, alignments: I) -> Result<()> {
    write_lines(path, alignments.into_iter().map(ToString::to_string))
}

/// `src<TAB>tgt<TAB>prob`, sorted. Probabilities use the shortest decimal
/// form that reads back to the same `f64`.
pub fn render_ttable(table: &TranslationTable) -> String {
    let mut out = String::new();
    for (s, t, p) in table.entries() {
        let _ = writeln!(out, "{s}\t{t}\t{p:?}");
    }
    out
}

pub fn read_ttable(path: &Path) -> Result<TranslationTable> {
    let mut entries = Vec::new();
    for (i, line) in read_lines(path)?.iter().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = || SapeError::format(path, i + 1, "expected src<TAB>tgt<TAB>prob");
        let [s, t, p] = fields[..] else { return Err(bad()) };
        let p: f64 = p.parse().map_err(|_| bad())?;
        if !(0.0..=1.0).contains(&p) {
            return Err(SapeError::format(path, i + 1, format!("probability {p} out of range")));
        }
        entries.push((s.to_string(), t.to_string(), p));
    }
    Ok(TranslationTable::from_entries(entries))
}

/// `mt tokens ||| pe tokens`, sorted.
pub fn render_alignment_table(table: &AlignmentTable) -> String {
    let mut out = String::new();
    for e in table.entries() {
        let _ = writeln!(out, "{e}");
    }
    out
}

pub fn render_rules(rules: &[ScfgRule]) -> String {
    let mut lines: Vec<String> = rules.iter().map(ToString::to_string).collect();
    lines.sort();
    let mut out = lines.join("\n");
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

/// Gzip with a zero timestamp and no file name, so identical tables give
/// identical bytes.
pub fn gzip(data: &[u8]) -> Vec<u8> {
    let mut enc = GzBuilder::new().mtime(0).write(Vec::new(), Compression::default());
    enc.write_all(data).expect("writing to memory");
    enc.finish().expect("writing to memory")
}

pub fn read_rules(path: &Path) -> Result<Vec<ScfgRule>> {
    let file = fs::File::open(path).map_err(|e| SapeError::io(path, e))?;
    let mut text = String::new();
    let reader: Box<dyn Read> =
        if path.extension().is_some_and(|e| e == "gz") { Box::new(GzDecoder::new(file)) } else { Box::new(file) };
    BufReader::new(reader).read_to_string(&mut text).map_err(|e| SapeError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| l.parse::<ScfgRule>().map_err(|e| SapeError::format(path, i + 1, e.to_string())))
        .collect()
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// ARPA text: `\data\` counts, then one `\n-grams:` section per order with
/// `logprob<TAB>ngram[<TAB>backoff]` lines, then `\end\`.
pub fn render_arpa(lm: &NGramLM) -> String {
    let entries = lm.entries();
    let mut out = String::from("\n\\data\\\n");
    for (n, c) in lm.counts().iter().enumerate() {
        let _ = writeln!(out, "ngram {}={}", n + 1, c);
    }
    for n in 1..=lm.order() {
        let _ = write!(out, "\n\\{n}-grams:\n");
        for e in entries.iter().filter(|e| e.words.len() == n) {
            out.push_str(&fmt_f64(e.log10_prob));
            out.push('\t');
            out.push_str(&e.words.join(" "));
            if let Some(b) = e.log10_backoff {
                out.push('\t');
                out.push_str(&fmt_f64(b));
            }
            out.push('\n');
        }
    }
    out.push_str("\n\\end\\\n");
    out
}

pub fn parse_arpa(path: &Path, text: &str) -> Result<NGramLM> {
    let bad = |line: usize, m: &str| SapeError::format(path, line, m.to_string());
    let mut declared: Vec<usize> = Vec::new();
    let mut entries = Vec::new();
    let mut section: Option<usize> = None;
    let mut in_data = false;
    let mut ended = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let no = i + 1;
        if line.is_empty() {
            continue;
        }
        if ended {
            return Err(bad(no, "content after \\end\\"));
        }
        if line == "\\data\\" {
            in_data = true;
            continue;
        }
        if line == "\\end\\" {
            ended = true;
            continue;
        }
        if let Some(n) = line.strip_prefix('\\').and_then(|l| l.strip_suffix("-grams:")) {
            let n: usize = n.parse().map_err(|_| bad(no, "bad section header"))?;
            if n == 0 || n > declared.len() {
                return Err(bad(no, "section for an undeclared order"));
            }
            section = Some(n);
            in_data = false;
            continue;
        }
        if in_data {
            let (n, c) = line
                .strip_prefix("ngram ")
                .and_then(|r| r.split_once('='))
                .ok_or_else(|| bad(no, "expected `ngram N=count`"))?;
            let n: usize = n.trim().parse().map_err(|_| bad(no, "bad order"))?;
            let c: usize = c.trim().parse().map_err(|_| bad(no, "bad count"))?;
            if n != declared.len() + 1 {
                return Err(bad(no, "orders must be declared in sequence"));
            }
            declared.push(c);
            continue;
        }
        let n = section.ok_or_else(|| bad(no, "n-gram outside a section"))?;
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(bad(no, "expected logprob<TAB>ngram[<TAB>backoff]"));
        }
        let words: Vec<String> = fields[1].split(' ').map(String::from).collect();
        if words.len() != n {
            return Err(bad(no, "n-gram length does not match its section"));
        }
        let log10_prob = fields[0].parse().map_err(|_| bad(no, "bad log probability"))?;
        let log10_backoff =
            fields.get(2).map(|b| b.parse::<f64>()).transpose().map_err(|_| bad(no, "bad back-off weight"))?;
        entries.push(ArpaEntry { words, log10_prob, log10_backoff });
    }
    if !ended {
        return Err(bad(text.lines().count(), "missing \\end\\"));
    }
    for (n, &c) in declared.iter().enumerate() {
        let found = entries.iter().filter(|e| e.words.len() == n + 1).count();
        if found != c {
            return Err(bad(0, &format!("declared {c} {}-grams, found {found}", n + 1)));
        }
    }
    Ok(NGramLM::from_entries(declared.len(), entries)?)
}

pub fn read_arpa(path: &Path) -> Result<NGramLM> {
    let text = fs::read_to_string(path).map_err(|e| SapeError::io(path, e))?;
    parse_arpa(path, &text)
}

/// `feature_name<TAB>value` lines in feature order.
pub fn render_weights(w: &WeightVector) -> String {
    let mut out = String::new();
    for (name, v) in FEATURE_NAMES.iter().zip(w.as_array()) {
        let _ = writeln!(out, "{name}\t{}", fmt_f64(v));
    }
    out
}

/// Every feature must be present exactly once.
pub fn read_weights(path: &Path) -> Result<WeightVector> {
    let mut values: [Option<f64>; NUM_FEATURES] = [None; NUM_FEATURES];
    for (i, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (name, v) = line.split_once('\t').ok_or_else(|| SapeError::format(path, i + 1, "expected name<TAB>value"))?;
        let k = FEATURE_NAMES
            .iter()
            .position(|n| *n == name.trim())
            .ok_or_else(|| SapeError::format(path, i + 1, format!("unknown feature {name:?}")))?;
        let v: f64 = v.trim().parse().map_err(|_| SapeError::format(path, i + 1, "bad weight"))?;
        if !v.is_finite() || values[k].replace(v).is_some() {
            return Err(SapeError::format(path, i + 1, format!("bad or repeated weight for {name}")));
        }
    }
    let mut a = [0.0; NUM_FEATURES];
    for (k, v) in values.iter().enumerate() {
        a[k] = v.ok_or_else(|| SapeError::format(path, 0, format!("missing weight for {}", FEATURE_NAMES[k])))?;
    }
    Ok(WeightVector::from_array(a))
}

/// `id ||| output ||| name=value ... ||| score`.
pub fn render_nbest_line(id: usize, d: &Derivation) -> String {
    let features: Vec<String> =
        FEATURE_NAMES.iter().zip(d.features).map(|(n, v)| format!("{n}={}", fmt_f64(v))).collect();
    format!("{id} ||| {} ||| {} ||| {}", d.output.join(" "), features.join(" "), fmt_f64(d.score))
}
