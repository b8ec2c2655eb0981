use std::path::Path;

use sape::formats::{
    gzip, parse_arpa, read_alignments, read_arpa, read_lines, read_rules, read_weights, render_arpa, render_nbest_line,
    render_rules, render_weights, write_alignments, write_file,
};
use sape::synth::{make_synthetic, SynthParams};
use sape::SapeError;
use sape_core::decoder::{Decoder, DecoderParams, Grammar, WeightVector};
use sape_core::ngram_lm::NGramLM;
use sape_core::rule_extract::{FeatureVector, RuleKey, ScfgRule, Symbol};
use sape_core::Alignment;

fn lm() -> NGramLM {
    let c = make_synthetic(&SynthParams { train: 200, dev: 0, test: 0, ..SynthParams::default() }).unwrap();
    let corpus: Vec<Vec<String>> = c.train.iter().map(|t| t.pe.to_vec()).collect();
    NGramLM::train(&corpus, 5).unwrap()
}

fn rule(src: &[&str], tgt: &[&str], p: f64) -> ScfgRule {
    let sym = |s: &&str| match *s {
        "[X,1]" => Symbol::NonTerminal(1),
        "[X,2]" => Symbol::NonTerminal(2),
        w => Symbol::Terminal(w.to_string()),
    };
    ScfgRule::new(
        RuleKey { source: src.iter().map(sym).collect(), target: tgt.iter().map(sym).collect() },
        vec![(0, 0)],
        FeatureVector::from_probs(p, p / 2.0, 0.3, 0.7),
    )
    .unwrap()
}

#[test]
fn arpa_file_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lm.arpa");
    let text = render_arpa(&lm());
    write_file(&path, text.as_bytes()).unwrap();
    let again = render_arpa(&read_arpa(&path).unwrap());
    assert_eq!(text, again);
    assert!(text.starts_with("\n\\data\\\n"));
    assert!(text.trim_end().ends_with("\\end\\"));
}

#[test]
fn arpa_errors_carry_line_numbers() {
    let text = "\\data\\\nngram 1=2\n\n\\1-grams:\n-1.0\t<unk>\nnot-a-number\t</s>\n\n\\end\\\n";
    match parse_arpa(Path::new("bad.arpa"), text) {
        Err(SapeError::Format { line, .. }) => assert_eq!(line, 6),
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn gzipped_rules_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let rules = vec![rule(&["hound"], &["dog"], 0.5), rule(&["[X,1]", "very", "[X,2]"], &["[X,2]", "[X,1]"], 0.25)];
    let text = render_rules(&rules);
    let gz = gzip(text.as_bytes());
    assert_eq!(gz, gzip(text.as_bytes()));
    write_file(&dir.path().join("rules.gz"), &gz).unwrap();
    write_file(&dir.path().join("rules.txt"), text.as_bytes()).unwrap();
    let from_gz = read_rules(&dir.path().join("rules.gz")).unwrap();
    assert_eq!(render_rules(&from_gz), text);
    assert_eq!(read_rules(&dir.path().join("rules.txt")).unwrap(), from_gz);
}

#[test]
fn weights_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("weights.tsv");
    let w = WeightVector::from_array([0.1, -2.5, 1.0 / 3.0, 7.0, -0.0625, 1e-12, 0.7, -1.0]);
    write_file(&path, render_weights(&w).as_bytes()).unwrap();
    assert_eq!(read_weights(&path).unwrap(), w);
    write_file(&path, b"lm\t1.0\n").unwrap();
    assert!(read_weights(&path).is_err());
}

#[test]
fn lines_and_alignments() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.txt");
    write_file(&path, b"one\r\ntwo\n").unwrap();
    assert_eq!(read_lines(&path).unwrap(), ["one", "two"]);
    write_file(&path, b"ok\n\xff\xfe\n").unwrap();
    assert!(matches!(read_lines(&path), Err(SapeError::Utf8 { line: 2, .. })));
    let al = [Alignment::from_pairs([(0, 0), (1, 1), (4, 5)]), Alignment::default()];
    write_alignments(&path, &al).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "0-0 1-1 4-5\n\n");
    assert_eq!(read_alignments(&path).unwrap(), al);
    write_file(&path, b"0-0 x-1\n").unwrap();
    assert!(read_alignments(&path).is_err());
}

#[test]
fn nbest_line_layout() {
    let grammar = Grammar::new(vec![rule(&["hound"], &["dog"], 0.5)]).unwrap();
    let lm = lm();
    let dec = Decoder::new(&grammar, &lm, WeightVector::default(), DecoderParams::default()).unwrap();
    let input: Vec<String> = ["the", "hound", "runs"].iter().map(|s| s.to_string()).collect();
    let d = dec.decode(&input);
    let line = render_nbest_line(3, &d);
    let fields: Vec<&str> = line.split(" ||| ").collect();
    assert_eq!(fields.len(), 4);
    assert_eq!(fields[0], "3");
    assert_eq!(fields[1], "the dog runs");
    assert_eq!(fields[2].split(' ').count(), 8);
    assert_eq!(fields[3].parse::<f64>().unwrap(), d.score);
}
