//! Training and post-editing workflows over files.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use sape_core::corpus::{LexiconTagger, Sentence, TripletCorpus};
use sape_core::decoder::{Decoder, DecoderParams, Derivation, Grammar, WeightVector};
use sape_core::evaluate::{evaluate, EvalReport};
use sape_core::hybrid_align::{build_training_views, AlignedPair, AlignmentTable, TrainingViews, ViewOptions};
use sape_core::ngram_lm::NGramLM;
use sape_core::rule_extract::{count_rules, estimate_features, ExtractConfig, RuleCounts, ScfgRule};
use sape_core::stat_aligner::StatAligner;
use sape_core::tuner::{tune, Candidate, TuneResult};
use sape_core::{EditAligner, SynonymLexicon};

use crate::config::PipelineConfig;
use crate::error::{Result, SapeError, StageContext};
use crate::formats::{
    gzip, load_triplets, read_arpa, read_lines, read_rules, read_synonyms, read_tagger_lexicon, read_ttable,
    read_weights, render_alignment_table, render_arpa, render_nbest_line, render_rules, render_ttable,
    render_weights, write_file, write_lines,
};

pub const RULES_FILE: &str = "rules.gz";
pub const LEX_FILE: &str = "lex.tsv";
pub const LEX_REVERSE_FILE: &str = "lex.rev.tsv";
pub const LM_FILE: &str = "lm.arpa";
pub const WEIGHTS_FILE: &str = "weights.tsv";
pub const TABLE_FILE: &str = "table.txt";
pub const MANIFEST_FILE: &str = "manifest.tsv";

/// Artifacts listed in the manifest, in the order they are written.
pub const ARTIFACTS: [&str; 6] = [RULES_FILE, LEX_FILE, LEX_REVERSE_FILE, LM_FILE, WEIGHTS_FILE, TABLE_FILE];

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| SapeError::io(path, e))?))
}

/// Tagger and monolingual aligner named by the config, or the built-in
/// defaults when none are given.
pub struct Resources {
    pub tagger: LexiconTagger,
    pub aligner: EditAligner,
}

impl Resources {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let tagger = match &cfg.tagger_lexicon {
            Some(p) => read_tagger_lexicon(p)?,
            None => LexiconTagger::default(),
        };
        let lexicon = match &cfg.synonyms {
            Some(p) => read_synonyms(p)?,
            None => SynonymLexicon::default(),
        };
        Ok(Resources { tagger, aligner: EditAligner::new(lexicon) })
    }
}

/// Everything a model directory holds.
#[derive(Debug, Clone)]
pub struct Model {
    pub rules: Vec<ScfgRule>,
    pub lex: StatAligner,
    pub lm: NGramLM,
    pub weights: WeightVector,
    pub table: AlignmentTable,
}

/// Counts rules per pair in parallel, merging in corpus order.
pub fn count_all(pairs: &[&AlignedPair], config: &ExtractConfig) -> Result<RuleCounts> {
    let per_pair = ExtractConfig { min_count: 1, ..*config };
    let parts: Vec<RuleCounts> = pairs
        .par_iter()
        .map(|p| {
            count_rules(std::iter::once((p.mt.tokens().as_ref(), p.pe.tokens().as_ref(), &p.alignment)), &per_pair)
        })
        .collect::<std::result::Result<_, _>>()?;
    let mut total = RuleCounts::default();
    for part in parts {
        total.merge(part);
    }
    if config.min_count > 1 {
        total.prune(config.min_count);
    }
    Ok(total)
}

pub fn align_corpus(corpus: &TripletCorpus, cfg: &PipelineConfig, res: &Resources) -> Result<TrainingViews> {
    Ok(build_training_views(
        corpus.entries(),
        &res.tagger,
        &res.aligner,
        ViewOptions { em_iterations: cfg.em_iterations },
    )?)
}

pub fn extract_rules(views: &TrainingViews, cfg: &PipelineConfig) -> Result<Vec<ScfgRule>> {
    let pairs: Vec<&AlignedPair> =
        views.pairs.iter().filter(|p| cfg.bigram_pairs_to_rules || !p.bigram_segment).collect();
    let counts = count_all(&pairs, &cfg.extract())?;
    Ok(estimate_features(&counts, &views.stat, cfg.good_turing)?)
}

pub fn train_lm(corpus: &TripletCorpus, order: usize) -> Result<NGramLM> {
    let pe: Vec<Vec<String>> = corpus.entries().iter().map(|t| t.pe.to_vec()).collect();
    Ok(NGramLM::train(&pe, order)?)
}

/// Runs every training stage in memory, with default weights.
pub fn train_model(corpus: &TripletCorpus, cfg: &PipelineConfig, res: &Resources) -> Result<Model> {
    let views = align_corpus(corpus, cfg, res).stage("align")?;
    let rules = extract_rules(&views, cfg).stage("extract")?;
    let lm = train_lm(corpus, cfg.lm_order).stage("train-lm")?;
    Ok(Model { rules, lex: views.stat, lm, weights: WeightVector::default(), table: views.table })
}

/// A model ready to decode.
pub struct Engine {
    pub model: Model,
    pub grammar: Grammar,
    pub params: DecoderParams,
}

impl Engine {
    pub fn new(model: Model, params: DecoderParams) -> Result<Self> {
        let grammar = Grammar::new(model.rules.clone())?;
        Ok(Engine { model, grammar, params })
    }

    fn decoder(&self, w: WeightVector) -> Result<Decoder<'_>> {
        Ok(Decoder::new(&self.grammar, &self.model.lm, w, self.params)?)
    }

    /// k-best lists for every input, in input order.
    pub fn kbest_all(&self, inputs: &[Sentence], w: WeightVector, k: usize) -> Result<Vec<Vec<Derivation>>> {
        let dec = self.decoder(w)?;
        Ok(inputs.par_iter().map(|s| dec.kbest(s, k)).collect())
    }

    pub fn decode_all(&self, inputs: &[Sentence], w: WeightVector) -> Result<Vec<Vec<String>>> {
        let dec = self.decoder(w)?;
        Ok(inputs.par_iter().map(|s| dec.decode(s).output).collect())
    }

    /// MERT on a dev set, starting from the model's weights.
    pub fn tune(&self, dev_mt: &[Sentence], dev_pe: &[Sentence], cfg: &PipelineConfig) -> Result<TuneResult> {
        if dev_mt.len() != dev_pe.len() {
            return Err(sape_core::Error::LengthMismatch { left: dev_mt.len(), right: dev_pe.len() }.into());
        }
        let refs: Vec<Vec<String>> = dev_pe.iter().map(|s| s.to_vec()).collect();
        let decode = |w: &WeightVector, k: usize| -> sape_core::Result<Vec<Vec<Candidate>>> {
            let dec = Decoder::new(&self.grammar, &self.model.lm, *w, self.params)?;
            Ok(dev_mt
                .par_iter()
                .map(|s| {
                    dec.kbest(s, k).into_iter().map(|d| Candidate { output: d.output, features: d.features }).collect()
                })
                .collect())
        };
        Ok(tune(&refs, decode, &self.model.weights, &cfg.tuner())?)
    }
}

/// Writes every artifact plus the manifest into `dir`.
fn write_model_files(dir: &Path, model: &Model, inputs: &[(&str, &Path)], cfg: &PipelineConfig) -> Result<()> {
    let contents: [(&str, Vec<u8>); 6] = [
        (RULES_FILE, gzip(render_rules(&model.rules).as_bytes())),
        (LEX_FILE, render_ttable(&model.lex.forward).into_bytes()),
        (LEX_REVERSE_FILE, render_ttable(&model.lex.reverse).into_bytes()),
        (LM_FILE, render_arpa(&model.lm).into_bytes()),
        (WEIGHTS_FILE, render_weights(&model.weights).into_bytes()),
        (TABLE_FILE, render_alignment_table(&model.table).into_bytes()),
    ];
    let mut manifest = Vec::new();
    for (name, data) in &contents {
        write_file(&dir.join(name), data)?;
        manifest.push(format!("artifact\t{name}\t{}", sha256_hex(data)));
    }
    for (role, path) in inputs {
        manifest.push(format!("input\t{role}\t{}", sha256_file(path)?));
    }
    for line in cfg.model_settings().lines() {
        manifest.push(format!("setting\t{line}"));
    }
    write_lines(&dir.join(MANIFEST_FILE), manifest)
}

/// Writes a model directory atomically: into a sibling temporary directory
/// that replaces `dir` only once every file is written.
pub fn save_model(dir: &Path, model: &Model, inputs: &[(&str, &Path)], cfg: &PipelineConfig) -> Result<()> {
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| SapeError::io(&parent, e))?;
    let tmp = tempfile::Builder::new().prefix(".sape-model-").tempdir_in(&parent).map_err(|e| SapeError::io(&parent, e))?;
    write_model_files(tmp.path(), model, inputs, cfg)?;
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| SapeError::io(dir, e))?;
    }
    let kept = tmp.keep();
    fs::rename(&kept, dir).map_err(|e| {
        let _ = fs::remove_dir_all(&kept);
        SapeError::io(dir, e)
    })
}

pub struct Manifest {
    pub artifacts: Vec<(String, String)>,
    pub inputs: Vec<(String, String)>,
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(SapeError::MissingArtifact(path));
    }
    let mut m = Manifest { artifacts: Vec::new(), inputs: Vec::new() };
    for (i, line) in read_lines(&path)?.iter().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        match fields[..] {
            ["artifact", name, sum] => m.artifacts.push((name.to_string(), sum.to_string())),
            ["input", role, sum] => m.inputs.push((role.to_string(), sum.to_string())),
            ["setting", _, _] => {}
            _ => return Err(SapeError::format(&path, i + 1, "unrecognised manifest line")),
        }
    }
    Ok(m)
}

/// Loads a model directory after checking every artifact against the
/// manifest.
pub fn load_model(dir: &Path) -> Result<Model> {
    let manifest = read_manifest(dir)?;
    for name in ARTIFACTS {
        let path = dir.join(name);
        if !path.exists() {
            return Err(SapeError::MissingArtifact(path));
        }
        let want = manifest.artifacts.iter().find(|(n, _)| n == name).map(|(_, s)| s.as_str());
        if want != Some(sha256_file(&path)?.as_str()) {
            return Err(SapeError::ChecksumMismatch(path));
        }
    }
    let table_lines = read_lines(&dir.join(TABLE_FILE))?;
    let table = AlignmentTable::new(
        table_lines
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let (m, p) = l
                    .split_once(" ||| ")
                    .ok_or_else(|| SapeError::format(dir.join(TABLE_FILE), i + 1, "expected mt ||| pe"))?;
                Ok(sape_core::hybrid_align::TableEntry {
                    mt: m.split(' ').map(String::from).collect(),
                    pe: p.split(' ').map(String::from).collect(),
                    origin: sape_core::hybrid_align::Origin::Surface,
                })
            })
            .collect::<Result<Vec<_>>>()?,
    );
    Ok(Model {
        rules: read_rules(&dir.join(RULES_FILE))?,
        lex: StatAligner {
            forward: read_ttable(&dir.join(LEX_FILE))?,
            reverse: read_ttable(&dir.join(LEX_REVERSE_FILE))?,
        },
        lm: read_arpa(&dir.join(LM_FILE))?,
        weights: read_weights(&dir.join(WEIGHTS_FILE))?,
        table,
    })
}

/// Fails when a training file named in the config no longer matches the
/// checksum recorded when the model was trained.
pub fn check_inputs(dir: &Path, cfg: &PipelineConfig) -> Result<()> {
    let manifest = read_manifest(dir)?;
    for (role, path) in training_inputs(cfg) {
        let Some(path) = path else { continue };
        let Some((_, want)) = manifest.inputs.iter().find(|(r, _)| r == role) else { continue };
        if path.exists() && sha256_file(path)? != *want {
            return Err(SapeError::ChecksumMismatch(path.to_path_buf()));
        }
    }
    Ok(())
}

fn training_inputs(cfg: &PipelineConfig) -> [(&'static str, Option<&Path>); 7] {
    [
        ("train_src", cfg.train_src.as_deref()),
        ("train_mt", cfg.train_mt.as_deref()),
        ("train_pe", cfg.train_pe.as_deref()),
        ("dev_mt", cfg.dev_mt.as_deref()),
        ("dev_pe", cfg.dev_pe.as_deref()),
        ("tagger_lexicon", cfg.tagger_lexicon.as_deref()),
        ("synonyms", cfg.synonyms.as_deref()),
    ]
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub rules: usize,
    pub tuning: Option<TuneResult>,
}

/// Trains on the configured corpus, tunes on the dev set when one is
/// configured, and writes the model directory.
pub fn run_train(cfg: &PipelineConfig) -> Result<TrainSummary> {
    let model_dir = PipelineConfig::require(&cfg.model_dir, "model_dir")?;
    let src = PipelineConfig::require(&cfg.train_src, "train_src")?;
    let mt = PipelineConfig::require(&cfg.train_mt, "train_mt")?;
    let pe = PipelineConfig::require(&cfg.train_pe, "train_pe")?;
    let corpus = load_triplets(src, mt, pe).stage("corpus")?;
    let res = Resources::load(cfg).stage("corpus")?;
    let model = train_model(&corpus, cfg, &res)?;
    let mut engine = Engine::new(model, cfg.decoder()).stage("decode")?;
    let mut tuning = None;
    if let (Some(dmt), Some(dpe)) = (&cfg.dev_mt, &cfg.dev_pe) {
        let dev_mt = crate::formats::read_sentences(dmt).stage("tune")?;
        let dev_pe = crate::formats::read_sentences(dpe).stage("tune")?;
        let result = engine.tune(&dev_mt, &dev_pe, cfg).stage("tune")?;
        engine.model.weights = result.weights;
        tuning = Some(result);
    }
    let inputs: Vec<(&str, &Path)> =
        training_inputs(cfg).into_iter().filter_map(|(r, p)| p.map(|p| (r, p))).collect();
    save_model(model_dir, &engine.model, &inputs, cfg).stage("write")?;
    Ok(TrainSummary { rules: engine.model.rules.len(), tuning })
}

/// Post-edits `input` line by line into `output`, optionally writing an
/// n-best file. Returns the number of lines written.
pub fn run_ape(
    cfg: &PipelineConfig,
    model_dir: &Path,
    input: &Path,
    output: &Path,
    nbest: Option<(&Path, usize)>,
) -> Result<usize> {
    check_inputs(model_dir, cfg)?;
    let model = load_model(model_dir)?;
    let weights = model.weights;
    let engine = Engine::new(model, cfg.decoder())?;
    let sentences = crate::formats::read_sentences(input)?;
    let k = nbest.map_or(1, |(_, k)| k.max(1));
    let lists = engine.kbest_all(&sentences, weights, k)?;
    write_lines(output, lists.iter().map(|l| l[0].output.join(" ")))?;
    if let Some((path, _)) = nbest {
        let lines = lists.iter().enumerate().flat_map(|(i, l)| l.iter().map(move |d| render_nbest_line(i, d)));
        write_lines(path, lines)?;
    }
    Ok(lists.len())
}

/// Corpus scores of a hypothesis file against a reference file.
pub fn evaluate_files(hyp: &Path, reference: &Path, aligner: &EditAligner) -> Result<EvalReport> {
    let hyps = crate::formats::read_sentences(hyp)?;
    let refs = crate::formats::read_sentences(reference)?;
    if hyps.len() != refs.len() {
        return Err(SapeError::LineCountMismatch { path: hyp.to_path_buf(), expected: refs.len(), found: hyps.len() });
    }
    let h: Vec<Vec<String>> = hyps.into_iter().map(Sentence::into_tokens).collect();
    let r: Vec<Vec<String>> = refs.into_iter().map(Sentence::into_tokens).collect();
    Ok(evaluate(&h, &r, aligner)?)
}
