//! Flat `key = value` configuration. Blank lines and lines starting with `#`
//! are ignored; unknown keys are rejected. Relative paths are resolved
//! against the directory holding the config file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sape_core::decoder::DecoderParams;
use sape_core::rule_extract::{ExtractConfig, DEFAULT_MAX_PHRASE_LEN};
use sape_core::tuner::TunerParams;

use crate::error::{Result, SapeError};
use crate::formats::read_lines;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub train_src: Option<PathBuf>,
    pub train_mt: Option<PathBuf>,
    pub train_pe: Option<PathBuf>,
    pub dev_src: Option<PathBuf>,
    pub dev_mt: Option<PathBuf>,
    pub dev_pe: Option<PathBuf>,
    pub tagger_lexicon: Option<PathBuf>,
    pub synonyms: Option<PathBuf>,
    pub model_dir: Option<PathBuf>,
    pub max_phrase_len: usize,
    pub max_source_symbols: usize,
    pub min_count: u64,
    pub good_turing: bool,
    pub lm_order: usize,
    pub beam: Option<usize>,
    pub search_depth: usize,
    pub em_iterations: usize,
    pub nbest_size: usize,
    pub mert_restarts: usize,
    pub mert_seed: u64,
    pub mert_iterations: usize,
    pub mert_min_gain: f64,
    pub bigram_pairs_to_rules: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let tuner = TunerParams::default();
        PipelineConfig {
            train_src: None,
            train_mt: None,
            train_pe: None,
            dev_src: None,
            dev_mt: None,
            dev_pe: None,
            tagger_lexicon: None,
            synonyms: None,
            model_dir: None,
            max_phrase_len: DEFAULT_MAX_PHRASE_LEN,
            max_source_symbols: ExtractConfig::default().max_source_symbols,
            min_count: 1,
            good_turing: true,
            lm_order: sape_core::ngram_lm::DEFAULT_ORDER,
            beam: DecoderParams::default().beam,
            search_depth: DEFAULT_MAX_PHRASE_LEN,
            em_iterations: 5,
            nbest_size: tuner.k,
            mert_restarts: tuner.restarts,
            mert_seed: tuner.seed,
            mert_iterations: tuner.max_iter,
            mert_min_gain: tuner.min_gain,
            bigram_pairs_to_rules: true,
        }
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, found {v:?}")),
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("bad number {v:?}"))
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_lines(path)?.join("\n");
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|(line, message)| SapeError::Config { path: path.to_path_buf(), line, message })
    }

    /// Parses config text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> std::result::Result<Self, (usize, String)> {
        let mut c = PipelineConfig::default();
        let mut depth_set = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or((i + 1, "expected key = value".to_string()))?;
            let (key, value) = (key.trim(), value.trim());
            c.set(key, value, base, &mut depth_set).map_err(|m| (i + 1, m))?;
        }
        if !depth_set {
            c.search_depth = c.max_phrase_len;
        }
        c.validate().map_err(|m| (0, m))?;
        Ok(c)
    }

    fn set(&mut self, key: &str, v: &str, base: &Path, depth_set: &mut bool) -> std::result::Result<(), String> {
        let path = || Some(base.join(v));
        match key {
            "train_src" => self.train_src = path(),
            "train_mt" => self.train_mt = path(),
            "train_pe" => self.train_pe = path(),
            "dev_src" => self.dev_src = path(),
            "dev_mt" => self.dev_mt = path(),
            "dev_pe" => self.dev_pe = path(),
            "tagger_lexicon" => self.tagger_lexicon = path(),
            "synonyms" => self.synonyms = path(),
            "model_dir" => self.model_dir = path(),
            "max_phrase_len" => self.max_phrase_len = parse_num(v)?,
            "max_source_symbols" => self.max_source_symbols = parse_num(v)?,
            "min_count" => self.min_count = parse_num(v)?,
            "good_turing" => self.good_turing = parse_bool(v)?,
            "lm_order" => self.lm_order = parse_num(v)?,
            "beam" => self.beam = if v == "none" { None } else { Some(parse_num(v)?) },
            "search_depth" => {
                self.search_depth = parse_num(v)?;
                *depth_set = true;
            }
            "em_iterations" => self.em_iterations = parse_num(v)?,
            "nbest_size" => self.nbest_size = parse_num(v)?,
            "mert_restarts" => self.mert_restarts = parse_num(v)?,
            "mert_seed" => self.mert_seed = parse_num(v)?,
            "mert_iterations" => self.mert_iterations = parse_num(v)?,
            "mert_min_gain" => self.mert_min_gain = parse_num(v)?,
            "bigram_pairs_to_rules" => self.bigram_pairs_to_rules = parse_bool(v)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let positive = [
            ("max_phrase_len", self.max_phrase_len),
            ("max_source_symbols", self.max_source_symbols),
            ("lm_order", self.lm_order),
            ("search_depth", self.search_depth),
            ("nbest_size", self.nbest_size),
            ("beam", self.beam.unwrap_or(1)),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(format!("{name} must be at least 1"));
            }
        }
        if !self.mert_min_gain.is_finite() || self.mert_min_gain < 0.0 {
            return Err("mert_min_gain must be a non-negative number".into());
        }
        Ok(())
    }

    pub fn extract(&self) -> ExtractConfig {
        ExtractConfig {
            max_phrase_len: self.max_phrase_len,
            max_source_symbols: self.max_source_symbols,
            min_count: self.min_count,
            ..ExtractConfig::default()
        }
    }

    pub fn decoder(&self) -> DecoderParams {
        DecoderParams { search_depth: self.search_depth, beam: self.beam, ..DecoderParams::default() }
    }

    pub fn tuner(&self) -> TunerParams {
        TunerParams {
            k: self.nbest_size,
            restarts: self.mert_restarts,
            seed: self.mert_seed,
            max_iter: self.mert_iterations,
            min_gain: self.mert_min_gain,
        }
    }

    /// The settings that shape a trained model, in a fixed order. Paths are
    /// left out so that moving a corpus does not change the model.
    pub fn model_settings(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "max_phrase_len\t{}", self.max_phrase_len);
        let _ = writeln!(out, "max_source_symbols\t{}", self.max_source_symbols);
        let _ = writeln!(out, "min_count\t{}", self.min_count);
        let _ = writeln!(out, "good_turing\t{}", self.good_turing);
        let _ = writeln!(out, "lm_order\t{}", self.lm_order);
        let _ = writeln!(out, "em_iterations\t{}", self.em_iterations);
        let _ = writeln!(out, "bigram_pairs_to_rules\t{}", self.bigram_pairs_to_rules);
        out
    }

    pub fn require<'a>(value: &'a Option<PathBuf>, name: &'static str) -> Result<&'a Path> {
        value.as_deref().ok_or(SapeError::MissingSetting(name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = PipelineConfig::parse("# comment\nmax_phrase_len = 5\ntrain_mt = data/mt.txt\nbeam = none\n", Path::new("/x"))
            .unwrap();
        assert_eq!(c.max_phrase_len, 5);
        assert_eq!(c.search_depth, 5);
        assert_eq!(c.lm_order, 5);
        assert_eq!(c.beam, None);
        assert_eq!(c.train_mt.as_deref(), Some(Path::new("/x/data/mt.txt")));
        let d = PipelineConfig::parse("", Path::new(".")).unwrap();
        assert_eq!((d.max_phrase_len, d.search_depth, d.beam), (7, 7, Some(100)));
    }

    #[test]
    fn unknown_key_is_an_error() {
        let e = PipelineConfig::parse("x = 1\nmax_phrase_lenn = 3", Path::new(".")).unwrap_err();
        assert_eq!(e.0, 1);
        assert!(PipelineConfig::parse("lm_order = 0", Path::new(".")).is_err());
        assert!(PipelineConfig::parse("good_turing = maybe", Path::new(".")).is_err());
        assert!(PipelineConfig::parse("no equals sign", Path::new(".")).is_err());
    }
}
