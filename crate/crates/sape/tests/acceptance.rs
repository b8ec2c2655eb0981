//! Acceptance suite. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! fails if any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sape::config::PipelineConfig;
use sape::formats::{parse_arpa, render_arpa, read_sentences};
use sape::pipeline::{evaluate_files, load_model, run_ape, run_train, Engine};
use sape::synth::{make_synthetic, write_synthetic, SynthParams};
use sape_core::corpus::{pos_tag, tokenize, LexiconTagger};
use sape_core::decoder::{Decoder, DecoderParams, Derivation, Grammar, WeightVector};
use sape_core::edit_aligner::align;
use sape_core::evaluate::{bleu, ter_edits};
use sape_core::hybrid_align::bigram_pos_pairs;
use sape_core::ngram_lm::{NGramLM, BOS_ID};
use sape_core::rule_extract::{extract_phrases, FeatureVector, RuleKey, ScfgRule, Symbol};
use sape_core::stat_aligner::gdfa;
use sape_core::tuner::{tune, Candidate, TunerParams};
use sape_core::{Alignment, EditAligner, SynonymLexicon};
use sape_oracle::{distinct_kbest, enumerate_derivations, enumerate_phrases, exhaustive_ter, min_crossings_exact, recompute};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(t: Duration, limit: Duration) -> Result<(), String> {
    ensure(t < limit, || format!("took {t:.1?}, limit {limit:?}"))
}

fn words(rng: &mut ChaCha8Rng, vocab: &[&str], min: usize, max: usize) -> Vec<String> {
    let n = rng.gen_range(min..=max);
    (0..n).map(|_| vocab.choose(rng).unwrap().to_string()).collect()
}

fn random_alignment(rng: &mut ChaCha8Rng, n: usize, m: usize, p: f64) -> Alignment {
    let mut links = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if rng.gen_bool(p) {
                links.push((i, j));
            }
        }
    }
    Alignment::from_pairs(links)
}

fn golden() -> Check {
    let start = Instant::now();
    let mut tagger = LexiconTagger::default();
    for (w, t) in [
        ("CommanderX", "NC"),
        (":", "COLON"),
        ("Toad", "NC"),
        ("su", "PPO"),
        ("gilipollas", "NC"),
        (".", "FS"),
        ("Sapo", "NC"),
        ("eres", "VSfin"),
        ("un", "ART"),
    ] {
        tagger.insert(w, t);
    }
    let mt = pos_tag(&tokenize("CommanderX : Toad su gilipollas ."), &tagger);
    let pe = pos_tag(&tokenize("CommanderX : Sapo eres un gilipollas ."), &tagger);
    let pairs = bigram_pos_pairs(&mt, &pe, &EditAligner::default());
    let links = pairs.alignment.to_string();
    ensure(links == "0-0 1-1 4-5", || format!("alignment {links:?}"))?;
    let table: Vec<String> = pairs.table().entries().iter().map(ToString::to_string).collect();
    let want = ["CommanderX : ||| CommanderX :", ": Toad ||| : Sapo", "gilipollas . ||| gilipollas ."];
    ensure(table == want, || format!("pairs {table:?}"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{links}; {} pairs", table.len()))
}

fn aligner_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let lexicon = SynonymLexicon::default();
    for case in 0..500 {
        let h = words(&mut rng, &["a", "b", "c", "d"], 0, 6);
        let r = words(&mut rng, &["a", "b", "c", "d"], 0, 6);
        let got = align(&h, &r, &lexicon);
        let (size, crossings) = min_crossings_exact(&h, &r);
        ensure(got.len() == size && got.crossings() == crossings, || {
            format!("case {case} {h:?}/{r:?}: {} links {} crossings, oracle {size} and {crossings}", got.len(), got.crossings())
        })?;
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok("500/500 pairs".into())
}

fn phrase_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..200 {
        let mt = words(&mut rng, &["a", "b", "c", "d"], 1, 8);
        let pe = words(&mut rng, &["a", "b", "c", "d"], 1, 8);
        let a = random_alignment(&mut rng, mt.len(), pe.len(), 0.25);
        let max_len = rng.gen_range(1..=8);
        let got: BTreeSet<_> = extract_phrases(&mt, &pe, &a, max_len)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|p| (p.mt_span, p.pe_span))
            .collect();
        let want = enumerate_phrases(mt.len(), pe.len(), &a, max_len);
        ensure(got == want, || format!("case {case}: {} phrases, oracle {}", got.len(), want.len()))?;
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok("200/200 pairs".into())
}

fn t(s: &str) -> Symbol {
    Symbol::Terminal(s.to_string())
}

fn random_rule(rng: &mut ChaCha8Rng) -> ScfgRule {
    let terms: Vec<Symbol> = words(rng, &["a", "b", "c"], 1, 2).iter().map(|s| t(s)).collect();
    let at = rng.gen_range(0..terms.len());
    let (source, k) = match rng.gen_range(0..=2u8) {
        0 => (terms, 0u8),
        1 => {
            let mut v = terms;
            v.insert(at + rng.gen_range(0..=1), Symbol::NonTerminal(1));
            (v, 1)
        }
        _ => {
            let mut v = terms[..at].to_vec();
            v.push(Symbol::NonTerminal(1));
            v.push(terms[at].clone());
            v.push(Symbol::NonTerminal(2));
            v.extend_from_slice(&terms[at + 1..]);
            (v, 2)
        }
    };
    let mut target: Vec<Symbol> = words(rng, &["x", "y", "z", "w"], 0, 2).iter().map(|s| t(s)).collect();
    let mut gaps: Vec<u8> = (1..=k).collect();
    if rng.gen_bool(0.5) {
        gaps.reverse();
    }
    for (n, g) in gaps.into_iter().enumerate() {
        target.insert((n * 2).min(target.len()), Symbol::NonTerminal(g));
    }
    let p: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.05..=1.0));
    ScfgRule::new(RuleKey { source, target }, Vec::new(), FeatureVector::from_probs(p[0], p[1], p[2], p[3])).unwrap()
}

fn toy_lm() -> NGramLM {
    let vocab = ["x", "y", "z", "w", "a", "b", "c", "d"];
    let corpus: Vec<Vec<&str>> =
        (0..40usize).map(|i| (0..1 + i % 5).map(|j| vocab[(i * 7 + j * 3 + i / 3) % vocab.len()]).collect()).collect();
    NGramLM::train(&corpus, 3).unwrap()
}

/// Derivations to audit, with the grammar and input that produced them.
struct Decoded {
    rules: Vec<ScfgRule>,
    input: Vec<String>,
    derivations: Vec<Derivation>,
    weights: WeightVector,
}

fn decoder_oracle(audit: &mut Vec<Decoded>) -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let lm = toy_lm();
    for case in 0..100 {
        let n = rng.gen_range(8..=20);
        let rules: Vec<ScfgRule> = (0..n).map(|_| random_rule(&mut rng)).collect();
        let w = WeightVector::from_array(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
        let input = words(&mut rng, &["a", "b", "c", "d"], 1, 6);
        let grammar = Grammar::new(rules.clone()).map_err(|e| e.to_string())?;
        let params = DecoderParams::exhaustive(7);
        let dec = Decoder::new(&grammar, &lm, w, params).map_err(|e| e.to_string())?;
        let every = distinct_kbest(&enumerate_derivations(&rules, &input, &lm, &w, params.search_depth), usize::MAX);
        let best: HashMap<&[String], f64> = every.iter().map(|e| (e.output.as_slice(), e.score)).collect();
        let got = dec.kbest(&input, 10);
        ensure(got.len() == every.len().min(10), || format!("case {case}: {} outputs, oracle {}", got.len(), every.len()))?;
        for (rank, (g, e)) in got.iter().zip(&every).enumerate() {
            ensure((g.score - e.score).abs() < 1e-9, || format!("case {case} rank {rank}: {} vs {}", g.score, e.score))?;
            let oracle = best.get(g.output.as_slice()).copied();
            ensure(oracle.is_some_and(|s| (s - g.score).abs() < 1e-9), || format!("case {case}: {:?} not an oracle output", g.output))?;
        }
        audit.push(Decoded { rules, input, derivations: got, weights: w });
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok("100/100 grammars".into())
}

fn score_audit(decoded: &[Decoded], lms: &[&NGramLM]) -> Check {
    let mut n = 0;
    for (d, lm) in decoded.iter().zip(lms) {
        for der in &d.derivations {
            let re = recompute(der.root.as_ref(), &d.rules, &d.input, lm, &d.weights)?;
            ensure(re.output == der.output, || format!("output {:?} recomputed as {:?}", der.output, re.output))?;
            ensure((re.score - der.score).abs() < 1e-9, || format!("score {} recomputed as {}", der.score, re.score))?;
            n += 1;
        }
    }
    ensure(n > 0, || "nothing audited".into())?;
    Ok(format!("{n} derivations"))
}

fn ter_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let vocab = ["a", "b", "c", "d", "e"];
    for case in 0..500 {
        let h = words(&mut rng, &vocab, 0, 7);
        let r = words(&mut rng, &vocab, 1, 7);
        let (got, want) = (ter_edits(&h, &r), exhaustive_ter(&h, &r));
        ensure(got == want, || format!("case {case} {h:?}/{r:?}: {got} edits, oracle {want}"))?;
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok("500/500 pairs".into())
}

fn lm_soundness() -> Check {
    let start = Instant::now();
    let corpus = make_synthetic(&SynthParams { train: 500, dev: 0, test: 0, ..SynthParams::default() })?;
    let sentences: Vec<Vec<String>> = corpus.train.iter().map(|t| t.pe.to_vec()).collect();
    let lm = NGramLM::train(&sentences, 5).map_err(|e| e.to_string())?;
    let vocab: Vec<String> = lm.vocab().map(String::from).chain(["unseen".to_string()]).collect();
    let vocab: Vec<&str> = vocab.iter().map(String::as_str).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let mut context = Vec::new();
        if rng.gen_bool(0.5) {
            context.push(BOS_ID);
        }
        context.extend(words(&mut rng, &vocab, 0, 4).iter().map(|w| lm.id(w)));
        let mass: f64 = lm.vocab().map(|w| 10f64.powf(lm.log10_prob(&context, lm.id(w)))).sum();
        worst = worst.max((mass - 1.0).abs());
    }
    ensure(worst < 1e-6, || format!("probability mass off by {worst:e}"))?;
    let arpa = render_arpa(&lm);
    let again = render_arpa(&parse_arpa(Path::new("lm.arpa"), &arpa).map_err(|e| e.to_string())?);
    ensure(arpa == again, || "ARPA round trip changed the file".into())?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("max deviation {worst:.1e}; {} ARPA bytes round-tripped", arpa.len()))
}

fn gdfa_bounds() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for case in 0..1000 {
        let (n, m) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let f = random_alignment(&mut rng, n, m, 0.3);
        let r = random_alignment(&mut rng, n, m, 0.3);
        let g = gdfa(&f, &r);
        ensure(f.intersection(&r).is_subset(&g) && g.is_subset(&f.union(&r)), || format!("case {case}: {f} / {r} gave {g}"))?;
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok("1000/1000 cases".into())
}

/// A tune set whose "decoder" ranks a fixed candidate space by `w · h`.
struct TuneSet {
    refs: Vec<Vec<String>>,
    space: Vec<Vec<Candidate>>,
}

impl TuneSet {
    fn new(seed: u64) -> Self {
        let vocab = ["the", "dog", "cat", "eats", "sleeps", "a", "fish", "now"];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut refs = Vec::new();
        let mut space = Vec::new();
        for _ in 0..12 {
            let r = words(&mut rng, &vocab, 4, 8);
            let cands = (0..30)
                .map(|_| {
                    let output = r.iter().map(|w| if rng.gen_bool(0.3) { vocab.choose(&mut rng).unwrap().to_string() } else { w.clone() }).collect();
                    Candidate { output, features: std::array::from_fn(|_| rng.gen_range(-2.0..2.0)) }
                })
                .collect();
            refs.push(r);
            space.push(cands);
        }
        TuneSet { refs, space }
    }

    fn decode(&self, w: &WeightVector, k: usize) -> Vec<Vec<Candidate>> {
        self.space
            .iter()
            .map(|c| {
                let mut ranked: Vec<&Candidate> = c.iter().collect();
                ranked.sort_by(|a, b| w.dot(&b.features).total_cmp(&w.dot(&a.features)).then_with(|| a.output.cmp(&b.output)));
                ranked.into_iter().take(k).cloned().collect()
            })
            .collect()
    }
}

fn mert_monotone() -> Check {
    let start = Instant::now();
    let mut gains = 0.0;
    for seed in 0..20 {
        let set = TuneSet::new(seed);
        let params = TunerParams { k: 5, restarts: 3, seed, max_iter: 8, min_gain: 0.01 };
        let r = tune(&set.refs, |w, k| Ok(set.decode(w, k)), &WeightVector::default(), &params).map_err(|e| e.to_string())?;
        let h = &r.history;
        ensure(h.windows(2).all(|p| p[1] >= p[0]), || format!("set {seed}: history {h:?}"))?;
        let (first, last) = (h[0], *h.last().unwrap());
        ensure(last >= first, || format!("set {seed}: {last} < {first}"))?;
        let hyps: Vec<Vec<String>> = set.decode(&r.weights, 1).into_iter().map(|l| l[0].output.clone()).collect();
        let fresh = bleu(&hyps, &set.refs).map_err(|e| e.to_string())?;
        ensure((fresh - r.dev_bleu).abs() < 1e-9, || format!("set {seed}: reported {} decoded {fresh}", r.dev_bleu))?;
        gains += last - first;
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("20/20 sets; mean pooled gain {:.2} BLEU", gains / 20.0))
}

/// Runs synth, train with tuning, decode and evaluate in `dir`.
fn pipeline_run(dir: &Path) -> Result<(f64, f64, f64, f64), String> {
    let corpus = make_synthetic(&SynthParams::default())?;
    write_synthetic(dir, &corpus).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::load(&dir.join("sape.conf")).map_err(|e| e.to_string())?;
    run_train(&cfg).map_err(|e| e.to_string())?;
    let model_dir = cfg.model_dir.clone().unwrap();
    run_ape(&cfg, &model_dir, &dir.join("test.mt"), &dir.join("test.ape"), Some((&dir.join("test.nbest"), 5)))
        .map_err(|e| e.to_string())?;
    let aligner = EditAligner::default();
    let raw = evaluate_files(&dir.join("test.mt"), &dir.join("test.pe"), &aligner).map_err(|e| e.to_string())?;
    let ape = evaluate_files(&dir.join("test.ape"), &dir.join("test.pe"), &aligner).map_err(|e| e.to_string())?;
    Ok((raw.ter, ape.ter, raw.bleu, ape.bleu))
}

fn end_to_end(dir: &Path) -> Check {
    let start = Instant::now();
    let (ter_mt, ter_ape, bleu_mt, bleu_ape) = pipeline_run(dir)?;
    let reduction = (ter_mt - ter_ape) / ter_mt;
    let summary = format!("TER {ter_mt:.2} -> {ter_ape:.2} ({:.1}% lower), BLEU {bleu_mt:.2} -> {bleu_ape:.2}", 100.0 * reduction);
    ensure(reduction >= 0.30, || summary.clone())?;
    ensure(bleu_ape > bleu_mt, || summary.clone())?;
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(summary)
}

fn tree(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok(out)
}

fn determinism(first: &Path, second: &Path) -> Check {
    pipeline_run(second)?;
    let (a, b) = (tree(first)?, tree(second)?);
    let names: Vec<&String> = a.keys().collect();
    ensure(a.keys().eq(b.keys()), || "file sets differ".into())?;
    for (name, bytes) in &a {
        ensure(&b[name] == bytes, || format!("{name} differs"))?;
    }
    Ok(format!("{} files identical", names.len()))
}

/// Re-decodes part of the held-out set with the trained model for the
/// score audit.
fn trained_derivations(dir: &Path) -> Result<(Vec<Decoded>, NGramLM), String> {
    let model = load_model(&dir.join("model")).map_err(|e| e.to_string())?;
    let lm = model.lm.clone();
    let w = model.weights;
    let rules = model.rules.clone();
    let engine = Engine::new(model, DecoderParams::default()).map_err(|e| e.to_string())?;
    let inputs: Vec<_> = read_sentences(&dir.join("test.mt")).map_err(|e| e.to_string())?.into_iter().take(50).collect();
    let lists = engine.kbest_all(&inputs, w, 3).map_err(|e| e.to_string())?;
    let decoded = inputs
        .iter()
        .zip(lists)
        .map(|(s, derivations)| Decoded { rules: rules.clone(), input: s.to_vec(), derivations, weights: w })
        .collect();
    Ok((decoded, lm))
}

/// Writes straight to stdout so the lines show without `--nocapture`.
fn report(results: &[(&str, Check, Duration)]) -> bool {
    let mut all = true;
    let mut out = std::io::stdout().lock();
    for (name, result, took) in results {
        let line = match result {
            Ok(detail) => format!("[PASS] {name}: {detail} ({took:.1?})"),
            Err(why) => {
                all = false;
                format!("[FAIL] {name}: {why} ({took:.1?})")
            }
        };
        let _ = writeln!(out, "{line}");
    }
    all
}

fn timed<F: FnOnce() -> Check>(f: F) -> (Check, Duration) {
    let start = Instant::now();
    let r = f();
    (r, start.elapsed())
}

#[test]
fn acceptance() {
    let work = tempfile::tempdir().unwrap();
    let (first, second) = (work.path().join("run1"), work.path().join("run2"));
    let mut decoded = Vec::new();

    let golden = timed(golden);
    let aligner = timed(aligner_oracle);
    let phrases = timed(phrase_oracle);
    let decoder = timed(|| decoder_oracle(&mut decoded));
    let ter = timed(ter_oracle);
    let lm = timed(lm_soundness);
    let bounds = timed(gdfa_bounds);
    let mert = timed(mert_monotone);
    let e2e = timed(|| end_to_end(&first));
    let det = timed(|| determinism(&first, &second));
    let audit = timed(|| {
        let toy = toy_lm();
        let mut lms: Vec<&NGramLM> = vec![&toy; decoded.len()];
        let (trained, trained_lm) = trained_derivations(&first)?;
        lms.extend(std::iter::repeat_n(&trained_lm, trained.len()));
        decoded.extend(trained);
        score_audit(&decoded, &lms)
    });

    let results = [
        ("golden bigram-POS example", golden.0, golden.1),
        ("aligner oracle", aligner.0, aligner.1),
        ("phrase extraction oracle", phrases.0, phrases.1),
        ("decoder oracle", decoder.0, decoder.1),
        ("derivation score audit", audit.0, audit.1),
        ("TER oracle", ter.0, ter.1),
        ("LM soundness", lm.0, lm.1),
        ("GDFA bounds", bounds.0, bounds.1),
        ("MERT monotonicity", mert.0, mert.1),
        ("end-to-end synthetic APE", e2e.0, e2e.1),
        ("determinism", det.0, det.1),
    ];
    assert!(report(&results), "acceptance criteria failed");
}
