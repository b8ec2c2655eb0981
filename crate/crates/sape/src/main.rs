use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sape::config::PipelineConfig;
use sape::error::{Result, SapeError};
use sape::formats::{
    gzip, read_alignments, read_lines, read_sentences, read_ttable, read_weights, render_alignment_table,
    render_arpa, render_rules, render_ttable, render_weights, write_alignments, write_file, write_lines,
};
use sape::pipeline::{self, Engine, Resources};
use sape::synth::{make_synthetic, write_synthetic, SynthParams};
use sape_core::corpus::{lowercase, pos_tag, tokenize, Sentence, Triplet, TripletCorpus};
use sape_core::hybrid_align::AlignedPair;
use sape_core::ngram_lm::NGramLM;
use sape_core::rule_extract::estimate_features;
use sape_core::stat_aligner::StatAligner;

#[derive(Parser)]
#[command(name = "sape", version, about = "Statistical automatic post-editing")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for every parallel stage.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize raw text, optionally lowercasing and POS tagging it.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        lowercase: bool,
        /// Write `token/TAG` pairs using the configured tagger lexicon.
        #[arg(long)]
        tag: bool,
    },
    /// Hybrid word alignment of line-aligned MT and post-edited files.
    Align {
        #[arg(long)]
        mt: PathBuf,
        #[arg(long)]
        pe: PathBuf,
        /// Pharaoh alignments, one line per sentence pair.
        #[arg(long)]
        output: PathBuf,
        /// Alignment table (`mt ||| pe` lines).
        #[arg(long)]
        table: Option<PathBuf>,
        /// Bigram-POS segments as `mt ||| pe ||| links` lines.
        #[arg(long)]
        segments: Option<PathBuf>,
        /// Lexical tables P(pe|mt); the reverse table gets a `.rev` suffix.
        #[arg(long)]
        lex: Option<PathBuf>,
    },
    /// Extract and score rules from aligned text.
    Extract {
        #[arg(long)]
        mt: PathBuf,
        #[arg(long)]
        pe: PathBuf,
        #[arg(long)]
        alignment: PathBuf,
        #[arg(long)]
        segments: Option<PathBuf>,
        /// Forward lexical table written by `align --lex`.
        #[arg(long)]
        lex: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train an n-gram language model and write it as ARPA.
    TrainLm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Run MERT on a dev set and write the tuned weights.
    Tune {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        mt: Option<PathBuf>,
        #[arg(long)]
        pe: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Post-edit a tokenized file.
    Decode {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Use these weights instead of the model's.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        nbest: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Print corpus BLEU, METEOR and TER.
    Evaluate {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        synonyms: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with a matching config file.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.15)]
        substitution: f64,
        #[arg(long, default_value_t = 0.05)]
        swap: f64,
        #[arg(long, default_value_t = 0.05)]
        insertion: f64,
        #[arg(long, default_value_t = 0.05)]
        deletion: f64,
        #[arg(long, default_value_t = 1000)]
        train: usize,
        #[arg(long, default_value_t = 100)]
        dev: usize,
        #[arg(long, default_value_t = 200)]
        test: usize,
    },
    /// Full training run: align, extract, train the LM, tune, write the model.
    Train {
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn usage(message: impl Into<String>) -> SapeError {
    SapeError::Config { path: PathBuf::from("<command line>"), line: 0, message: message.into() }
}

fn model_dir(flag: Option<PathBuf>, cfg: &PipelineConfig) -> Result<PathBuf> {
    flag.or_else(|| cfg.model_dir.clone()).ok_or(SapeError::MissingSetting("model_dir"))
}

fn lex_reverse_path(lex: &Path) -> PathBuf {
    let mut s = lex.as_os_str().to_owned();
    s.push(".rev");
    PathBuf::from(s)
}

/// Pairs of equal-length MT and PE files, with empty source sides.
fn pairs_corpus(mt: &Path, pe: &Path) -> Result<TripletCorpus> {
    let m = read_sentences(mt)?;
    let p = read_sentences(pe)?;
    if m.len() != p.len() {
        return Err(SapeError::LineCountMismatch { path: pe.to_path_buf(), expected: m.len(), found: p.len() });
    }
    let entries = m.into_iter().zip(p).map(|(mt, pe)| Triplet { source: Sentence::default(), mt, pe }).collect();
    Ok(TripletCorpus::new(entries)?)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Preprocess { input, output, lowercase: lower, tag } => {
            let res = Resources::load(&cfg)?;
            let lines = read_lines(&input)?;
            let out = lines.iter().map(|l| {
                let mut s = tokenize(l);
                if lower {
                    s = lowercase(&s);
                }
                if tag {
                    pos_tag(&s, &res.tagger).to_string()
                } else {
                    s.to_string()
                }
            });
            write_lines(&output, out)?;
        }
        Command::Align { mt, pe, output, table, segments, lex } => {
            let corpus = pairs_corpus(&mt, &pe)?;
            let res = Resources::load(&cfg)?;
            let views = pipeline::align_corpus(&corpus, &cfg, &res)?;
            write_alignments(&output, views.corpus_pairs().map(|p| &p.alignment))?;
            if let Some(t) = table {
                write_file(&t, render_alignment_table(&views.table).as_bytes())?;
            }
            if let Some(s) = segments {
                let lines = views.segment_pairs().map(|p| format!("{} ||| {} ||| {}", p.mt.tokens(), p.pe.tokens(), p.alignment));
                write_lines(&s, lines)?;
            }
            if let Some(l) = lex {
                write_file(&l, render_ttable(&views.stat.forward).as_bytes())?;
                write_file(&lex_reverse_path(&l), render_ttable(&views.stat.reverse).as_bytes())?;
            }
        }
        Command::Extract { mt, pe, alignment, segments, lex, output } => {
            let corpus = pairs_corpus(&mt, &pe)?;
            let res = Resources::load(&cfg)?;
            let links = read_alignments(&alignment)?;
            if links.len() != corpus.len() {
                return Err(SapeError::LineCountMismatch { path: alignment, expected: corpus.len(), found: links.len() });
            }
            let mut pairs = Vec::new();
            for (t, a) in corpus.entries().iter().zip(links) {
                a.check_range(t.mt.len(), t.pe.len())?;
                pairs.push(AlignedPair {
                    mt: pos_tag(&t.mt, &res.tagger),
                    pe: pos_tag(&t.pe, &res.tagger),
                    alignment: a,
                    bigram_segment: false,
                });
            }
            if let (Some(path), true) = (&segments, cfg.bigram_pairs_to_rules) {
                for (i, line) in read_lines(path)?.iter().enumerate() {
                    let fields: Vec<&str> = line.split(" ||| ").collect();
                    let [m, p, a] = fields[..] else {
                        return Err(SapeError::format(path, i + 1, "expected mt ||| pe ||| links"));
                    };
                    let a = a.parse().map_err(|e: sape_core::Error| SapeError::format(path, i + 1, e.to_string()))?;
                    pairs.push(AlignedPair {
                        mt: pos_tag(&Sentence::parse(m), &res.tagger),
                        pe: pos_tag(&Sentence::parse(p), &res.tagger),
                        alignment: a,
                        bigram_segment: true,
                    });
                }
            }
            let lex_tables = StatAligner { forward: read_ttable(&lex)?, reverse: read_ttable(&lex_reverse_path(&lex))? };
            let refs: Vec<&AlignedPair> = pairs.iter().collect();
            let counts = pipeline::count_all(&refs, &cfg.extract())?;
            let rules = estimate_features(&counts, &lex_tables, cfg.good_turing)?;
            write_file(&output, &gzip(render_rules(&rules).as_bytes()))?;
            eprintln!("{} rules", rules.len());
        }
        Command::TrainLm { input, output, order } => {
            let sentences: Vec<Vec<String>> = read_sentences(&input)?.into_iter().map(Sentence::into_tokens).collect();
            let lm = NGramLM::train(&sentences, order.unwrap_or(cfg.lm_order))?;
            write_file(&output, render_arpa(&lm).as_bytes())?;
        }
        Command::Tune { model, mt, pe, output } => {
            let dir = model_dir(model, &cfg)?;
            let mt = mt.or_else(|| cfg.dev_mt.clone()).ok_or(SapeError::MissingSetting("dev_mt"))?;
            let pe = pe.or_else(|| cfg.dev_pe.clone()).ok_or(SapeError::MissingSetting("dev_pe"))?;
            let engine = Engine::new(pipeline::load_model(&dir)?, cfg.decoder())?;
            let result = engine.tune(&read_sentences(&mt)?, &read_sentences(&pe)?, &cfg)?;
            write_file(&output, render_weights(&result.weights).as_bytes())?;
            eprintln!("dev BLEU {:.2} after {} iterations", result.dev_bleu, result.iterations);
        }
        Command::Decode { model, input, output, weights, nbest, k } => {
            let dir = model_dir(model, &cfg)?;
            match weights {
                None => {
                    pipeline::run_ape(&cfg, &dir, &input, &output, nbest.as_deref().map(|p| (p, k)))?;
                }
                Some(w) => {
                    pipeline::check_inputs(&dir, &cfg)?;
                    let mut m = pipeline::load_model(&dir)?;
                    m.weights = read_weights(&w)?;
                    let weights = m.weights;
                    let engine = Engine::new(m, cfg.decoder())?;
                    let sentences = read_sentences(&input)?;
                    let lists = engine.kbest_all(&sentences, weights, if nbest.is_some() { k.max(1) } else { 1 })?;
                    write_lines(&output, lists.iter().map(|l| l[0].output.join(" ")))?;
                    if let Some(path) = nbest {
                        let lines = lists
                            .iter()
                            .enumerate()
                            .flat_map(|(i, l)| l.iter().map(move |d| sape::formats::render_nbest_line(i, d)));
                        write_lines(&path, lines)?;
                    }
                }
            }
        }
        Command::Evaluate { hyp, reference, synonyms } => {
            if synonyms.is_some() {
                cfg.synonyms = synonyms;
            }
            let res = Resources::load(&cfg)?;
            println!("{}", pipeline::evaluate_files(&hyp, &reference, &res.aligner)?);
        }
        Command::Synth { out, seed, substitution, swap, insertion, deletion, train, dev, test } => {
            let params = SynthParams { seed, substitution, swap, insertion, deletion, train, dev, test };
            let corpus = make_synthetic(&params).map_err(usage)?;
            write_synthetic(&out, &corpus)?;
        }
        Command::Train { model } => {
            if model.is_some() {
                cfg.model_dir = model;
            }
            let summary = pipeline::run_train(&cfg)?;
            eprintln!("{} rules", summary.rules);
            if let Some(t) = summary.tuning {
                eprintln!("dev BLEU {:.2} after {} tuning iterations", t.dev_bleu, t.iterations);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
