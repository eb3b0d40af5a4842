use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use docforge::corpus::{run_pipeline, CorpusConfig, CorpusRecord, OcrProvider, Status};
use docforge::doctok::{
    tag_sequence, tokenize_document, OcrDocument, TokenSequence, TokenSequenceRecord, TokenizeConfig, Vocab,
};
use docforge::embed::{distance_stats, write_stats_csv, SyntheticEmbedder, VectorStore, DEFAULT_DIM};
use docforge::fewshot::{
    sample_episode, split_pools, type_frequencies, EntityDocument, EpisodeConfig, DEFAULT_MIN_OCCURRENCES,
    DEFAULT_SLACK, DEFAULT_TEST_TYPES, DEFAULT_TRAIN_TYPES, META_TEST_WAY,
};
use docforge::finetune::{dc_accuracy, entity_prf_docs, EntitySpan, PrfReport, SpanDocument};
use docforge::ontology::{default_ontology, parse_ontology, OntologyTree};
use docforge::pretrain::{
    assemble_indexed, example_seed, select_tt_subset, LossWeights, PretrainRecord, DEFAULT_TT_FRACTION,
};
use docforge::synth::{
    entity_corpus, image_doc_id, keyword_store, one_occurrence_corpus, render_page, synthetic_ocr, OcrSynthConfig,
    StoreConfig, SyntheticOcr,
};
use docforge::jsonl;

use crate::params::{Failure, Outcome, Params};
use crate::record::{sorted_entries, Run};

fn input_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn check(ok: bool, msg: &str) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(Failure::Config(msg.to_string()))
    }
}

fn read_text(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| input_err(path, e))
}

fn read_jsonl<T: serde::de::DeserializeOwned>(run: &mut Run, key: &str, path: &Path) -> Outcome<Vec<T>> {
    run.input(key, path)?;
    Ok(jsonl::read(path)?)
}

fn write_jsonl<T: Serialize>(run: &mut Run, name: &str, records: &[T]) -> Outcome {
    run.write(name, jsonl::to_string(records)?.as_bytes())
}

fn load_ontology(p: &mut Params, run: &mut Run) -> Outcome<OntologyTree> {
    match p.opt_path("ontology")? {
        Some(path) => {
            run.input("ontology", &path)?;
            Ok(parse_ontology(&read_text(&path)?)?)
        }
        None => Ok(default_ontology()),
    }
}

fn load_vocab(p: &mut Params, run: &mut Run) -> Outcome<Vocab> {
    match p.opt_path("vocab")? {
        Some(path) => {
            run.input("vocab", &path)?;
            Ok(Vocab::from_text(&read_text(&path)?)?)
        }
        None => Ok(Vocab::default_uncased()),
    }
}

/// Every `*.json` page in `dir`, keyed by the document id it declares.
fn load_ocr_dir(run: &mut Run, dir: &Path) -> Outcome<BTreeMap<String, OcrDocument>> {
    run.input("ocr_dir", dir)?;
    let files: Vec<_> = sorted_entries(dir)?
        .into_iter()
        .filter(|(name, _)| name.ends_with(".json"))
        .collect();
    let docs = files
        .par_iter()
        .map(|(_, path)| {
            let doc = OcrDocument::parse(&read_text(path)?).map_err(|e| input_err(path, e))?;
            Ok((path, doc))
        })
        .collect::<Outcome<Vec<_>>>()?;
    let mut out = BTreeMap::new();
    for (path, doc) in docs {
        let id = doc.doc_id.clone();
        if out.insert(id.clone(), doc).is_some() {
            return Err(input_err(path, format!("document id {id} appears in two files")));
        }
    }
    Ok(out)
}

struct DirOcr(HashMap<String, OcrDocument>);

impl OcrProvider for DirOcr {
    fn ocr(&self, image_id: u64) -> Option<OcrDocument> {
        self.0.get(&image_doc_id(image_id)).cloned()
    }
}

fn kept_image_ids(run: &mut Run, path: &Path) -> Outcome<Vec<u64>> {
    let records: Vec<CorpusRecord> = read_jsonl(run, "manifest", path)?;
    let mut ids: Vec<u64> = records
        .iter()
        .filter(|r| r.status == Status::Kept)
        .map(|r| r.image_id)
        .collect();
    ids.sort_unstable();
    Ok(ids)
}

fn sort_unique_by_doc<T>(items: &mut [T], id: impl Fn(&T) -> &str, what: &str) -> Outcome {
    items.sort_by(|a, b| id(a).cmp(id(b)));
    if let Some(w) = items.windows(2).find(|w| id(&w[0]) == id(&w[1])) {
        return Err(Failure::Input(format!("{what}: document {} listed twice", id(&w[0]))));
    }
    Ok(())
}

pub fn synth_store(p: &mut Params) -> Outcome {
    let out = p.path("out")?;
    let seed = p.seed()?;
    let embed_seed = p.get("embed_seed", seed)?;
    let d = StoreConfig::default();
    let cfg = StoreConfig {
        n: p.get("items", d.n)?,
        dim: p.get("dim", DEFAULT_DIM)?,
        seed,
        topical_fraction: p.get("topical_fraction", d.topical_fraction)?,
        exact_copy_fraction: p.get("exact_copy_fraction", d.exact_copy_fraction)?,
        near_copy_fraction: p.get("near_copy_fraction", d.near_copy_fraction)?,
    };
    check(cfg.n > 0 && cfg.dim > 0, "items and dim must be at least 1")?;
    let fractions = [cfg.topical_fraction, cfg.exact_copy_fraction, cfg.near_copy_fraction];
    check(
        fractions.iter().all(|f| (0.0..=1.0).contains(f)) && cfg.exact_copy_fraction + cfg.near_copy_fraction <= 1.0,
        "fractions must lie in [0, 1] and copies may not exceed all items",
    )?;
    let mut run = Run::new(out)?;
    let ontology = load_ontology(p, &mut run)?;
    let embedder = SyntheticEmbedder::new(cfg.dim, embed_seed);
    let store = keyword_store(&ontology.keywords(), &embedder, &cfg)?;
    run.write("store.bin", &store.to_bytes())?;
    println!("{} vectors of dimension {}", store.len(), store.dim());
    run.finish("synth-store", p.resolved())
}

pub fn synth_ocr(p: &mut Params) -> Outcome {
    let out = p.path("out")?;
    let seed = p.seed()?;
    let d = OcrSynthConfig::default();
    let cfg = OcrSynthConfig {
        page_width: p.get("page_width", d.page_width)?,
        page_height: p.get("page_height", d.page_height)?,
        ..d
    };
    check(cfg.page_width >= 100 && cfg.page_height >= 100, "pages must be at least 100x100")?;
    let pages: usize = p.get("pages", 1000)?;
    let images: bool = p.get("images", true)?;
    let mut run = Run::new(out)?;
    let ids: Vec<u64> = match p.opt_path("manifest")? {
        Some(path) => kept_image_ids(&mut run, &path)?.into_iter().take(pages).collect(),
        None => (0..pages as u64).collect(),
    };

    let ocr_dir = run.path("ocr");
    let img_dir = run.path("images");
    fs::create_dir_all(&ocr_dir).map_err(|e| input_err(&ocr_dir, e))?;
    if images {
        fs::create_dir_all(&img_dir).map_err(|e| input_err(&img_dir, e))?;
    }
    ids.par_iter().try_for_each(|&id| {
        let doc_id = image_doc_id(id);
        let doc = synthetic_ocr(&doc_id, seed, &cfg);
        let json = serde_json::to_vec(&doc.to_json()).map_err(config_err)?;
        let path = ocr_dir.join(format!("{doc_id}.json"));
        fs::write(&path, json).map_err(|e| input_err(&path, e))?;
        if images {
            let path = img_dir.join(format!("{doc_id}.png"));
            render_page(&doc).save(&path).map_err(|e| input_err(&path, e))?;
        }
        Ok::<_, Failure>(())
    })?;
    run.produced("ocr");
    if images {
        run.produced("images");
    }
    println!("{} pages", ids.len());
    run.finish("synth-ocr", p.resolved())
}

pub fn synth_entities(p: &mut Params) -> Outcome {
    let out = p.path("out")?;
    let seed = p.seed()?;
    let layout: String = p.get("layout", "mixed".to_string())?;
    let types: usize = p.get("types", 30)?;
    let len: usize = p.get("len", 64)?;
    check(types > 0 && len >= 4, "types must be at least 1 and len at least 4")?;
    let names: Vec<String> = (0..types).map(|i| format!("type{i:02}")).collect();
    let docs = match layout.as_str() {
        "mixed" => entity_corpus(&names, p.get("docs", 2000)?, len, seed),
        "single" => one_occurrence_corpus(&names, p.get("docs_per_type", 20)?, len, seed),
        other => return Err(Failure::Config(format!("layout={other}: expected `mixed` or `single`"))),
    };
    let mut run = Run::new(out)?;
    write_jsonl(&mut run, "entities.jsonl", &docs)?;
    println!("{} documents, {} types", docs.len(), types);
    run.finish("synth-entities", p.resolved())
}

pub fn build_corpus(p: &mut Params) -> Outcome {
    let out = p.path("out")?;
    let store_path = p.path("store")?;
    let seed = p.seed()?;
    let embed_seed = p.get("embed_seed", seed)?;
    let mut cfg = CorpusConfig { seed, ..CorpusConfig::default() };
    cfg.k = p.get("k", cfg.k)?;
    cfg.probes = p.get("probes", cfg.probes)?;
    cfg.num_cells = p.get("num_cells", cfg.num_cells)?;
    cfg.spill = p.get("spill", cfg.spill)?;
    cfg.near_dup_threshold = p.get("near_dup_threshold", cfg.near_dup_threshold)?;
    cfg.filter.min_confidence = p.get("min_confidence", cfg.filter.min_confidence)?;
    cfg.filter.min_tokens = p.get("min_tokens", cfg.filter.min_tokens)?;
    cfg.filter.alnum_ratio_min = p.get("alnum_ratio_min", cfg.filter.alnum_ratio_min)?;
    cfg.validate().map_err(config_err)?;

    let mut run = Run::new(out)?;
    run.input("store", &store_path)?;
    let file = File::open(&store_path).map_err(|e| input_err(&store_path, e))?;
    let store = VectorStore::read_from(BufReader::new(file)).map_err(|e| input_err(&store_path, e))?;
    let ontology = load_ontology(p, &mut run)?;
    let embedder = SyntheticEmbedder::new(store.dim(), embed_seed);
    let output = match p.opt_path("ocr_dir")? {
        Some(dir) => {
            let ocr = DirOcr(load_ocr_dir(&mut run, &dir)?.into_iter().collect());
            run_pipeline(&ontology, &store, &cfg, &embedder, &ocr)?
        }
        None => {
            let ocr = SyntheticOcr { seed, config: OcrSynthConfig::default() };
            run_pipeline(&ontology, &store, &cfg, &embedder, &ocr)?
        }
    };
    if !output.report.reconciles() {
        return Err(Failure::Validation("filter report does not reconcile".into()));
    }

    write_jsonl(&mut run, "manifest.jsonl", &output.manifest)?;
    let mut csv = Vec::new();
    write_stats_csv(&mut csv, &output.stats).map_err(config_err)?;
    run.write("stats.csv", &csv)?;
    run.write_json("filter_report.json", &output.report)?;
    println!(
        "{} keywords, {} retrieved, {} unique records, {} kept",
        output.stats.len(),
        output.retrieved,
        output.report.total,
        output.report.kept
    );
    run.finish("build-corpus", p.resolved())
}

/// Statistics over the best per-keyword distance of each manifest record.
/// Keywords follow ontology order; keywords outside the ontology follow in
/// name order.
pub fn stats(p: &mut Params) -> Outcome {
    let out = p.path("out")?;
    let manifest = p.path("manifest")?;
    let kept_only: bool = p.get("kept_only", false)?;
    let mut run = Run::new(out)?;
    let ontology = load_ontology(p, &mut run)?;
    let records: Vec<CorpusRecord> = read_jsonl(&mut run, "manifest", &manifest)?;

    let mut by_keyword: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| !kept_only || r.status == Status::Kept) {
        for prov in &r.provenance {
            by_keyword.entry(prov.keyword.as_str()).or_default().push(prov.distance);
        }
    }
    let mut order: Vec<String> = ontology
        .keywords()
        .into_iter()
        .filter(|k| by_keyword.contains_key(k.as_str()))
        .collect();
    let extra: Vec<String> = by_keyword
        .keys()
        .filter(|k| !order.iter().any(|o| o == *k))
        .map(|k| k.to_string())
        .collect();
    order.extend(extra);
    let rows = order
        .iter()
        .map(|k| distance_stats(&by_keyword[k.as_str()], k))
        .collect::<docforge::Result<Vec<_>>>()?;
    let mut csv = Vec::new();
    write_stats_csv(&mut csv, &rows).map_err(config_err)?;
    run.write("stats.csv", &csv)?;
    println!("{} keywords over {} records", rows.len(), records.len());
    run.finish("stats", p.resolved())
}

pub fn tokenize(p: &mut Params) -> Outcome {
    let out = p.path("out")?;
    let ocr_dir = p.path("ocr_dir")?;
    let d = TokenizeConfig::default();
    let cfg = TokenizeConfig {
        context_ratio: p.get("context_ratio", d.context_ratio)?,
        crop_size: p.get("crop_size", d.crop_size)?,
        max_seq_len: p.get("max_seq_len", d.max_seq_len)?,
    };
    check(
        cfg.context_ratio.is_finite() && cfg.context_ratio >= 0.0 && cfg.crop_size > 0 && cfg.max_seq_len > 0,
        "context_ratio must be >= 0, crop_size and max_seq_len at least 1",
    )?;
    let max_docs: usize = p.get("max_docs", 0)?;
    let tag: bool = p.get("tag", false)?;
    let image_dir = p.opt_path("image_dir")?;
    let manifest = p.opt_path("manifest")?;

    let mut run = Run::new(out)?;
    let vocab = load_vocab(p, &mut run)?;
    let docs = load_ocr_dir(&mut run, &ocr_dir)?;
    let limit = if max_docs == 0 { usize::MAX } else { max_docs };
    let selected: Vec<&OcrDocument> = match &manifest {
        Some(path) => kept_image_ids(&mut run, path)?
            .into_iter()
            .take(limit)
            .map(|id| {
                let doc_id = image_doc_id(id);
                docs.get(&doc_id)
                    .ok_or_else(|| Failure::Input(format!("no OCR page for kept image {doc_id}")))
            })
            .collect::<Outcome<_>>()?,
        None => docs.values().take(limit).collect(),
    };
    if let Some(dir) = &image_dir {
        run.input("image_dir", dir)?;
    }

    let records = selected
        .par_iter()
        .map(|doc| {
            let image = match &image_dir {
                Some(dir) => {
                    let path = dir.join(format!("{}.png", doc.doc_id));
                    image::open(&path).map_err(|e| input_err(&path, e))?.to_rgb8()
                }
                None => render_page(doc),
            };
            let mut seq = tokenize_document(doc, &image, &vocab, &cfg)?;
            if tag {
                tag_sequence(&mut seq, &doc.text());
            }
            Ok(TokenSequenceRecord::from(&seq))
        })
        .collect::<Outcome<Vec<_>>>()?;
    write_jsonl(&mut run, "tokens.jsonl", &records)?;
    let total: usize = records.iter().map(|r| r.tokens.len()).sum();
    println!("{} documents, {} tokens", records.len(), total);
    run.finish("tokenize", p.resolved())
}

fn read_sequences(run: &mut Run, path: &Path) -> Outcome<Vec<TokenSequence>> {
    let mut records: Vec<TokenSequenceRecord> = read_jsonl(run, "tokens", path)?;
    sort_unique_by_doc(&mut records, |r| &r.doc_id, "tokens")?;
    records
        .par_iter()
        .map(|r| TokenSequence::try_from(r).map_err(|e| input_err(path, e)))
        .collect()
}

pub fn tag(p: &mut Params) -> Outcome {
    let out = p.path("out")?;
    let tokens = p.path("tokens")?;
    let ocr_dir = p.path("ocr_dir")?;
    let mut run = Run::new(out)?;
    let mut seqs = read_sequences(&mut run, &tokens)?;
    let docs = load_ocr_dir(&mut run, &ocr_dir)?;
    seqs.par_iter_mut().try_for_each(|seq| {
        let doc = docs
            .get(&seq.doc_id)
            .ok_or_else(|| Failure::Input(format!("no OCR page for {}", seq.doc_id)))?;
        tag_sequence(seq, &doc.text());
        Ok::<_, Failure>(())
    })?;
    let records: Vec<TokenSequenceRecord> = seqs.iter().map(TokenSequenceRecord::from).collect();
    write_jsonl(&mut run, "tokens.jsonl", &records)?;
    println!("{} documents tagged", records.len());
    run.finish("tag", p.resolved())
}

/// Documents are indexed in doc_id order; document `i` is masked with
/// seed `seed + i`.
pub fn assemble_pretrain(p: &mut Params) -> Outcome {
    let out = p.path("out")?;
    let tokens = p.path("tokens")?;
    let seed = p.seed()?;
    let tt_fraction: f64 = p.get("tt_fraction", DEFAULT_TT_FRACTION)?;
    check((0.0..=1.0).contains(&tt_fraction), "tt_fraction must be in [0, 1]")?;
    let d = LossWeights::default();
    LossWeights::new(p.get("alpha", d.alpha)?, p.get("beta", d.beta)?).map_err(config_err)?;

    let mut run = Run::new(out)?;
    let vocab = load_vocab(p, &mut run)?;
    let seqs = read_sequences(&mut run, &tokens)?;
    if let Some(s) = seqs.iter().find(|s| s.vocab_id != vocab.fingerprint()) {
        return Err(Failure::Validation(format!(
            "{} was tokenized with vocabulary {}, not {}",
            s.doc_id,
            s.vocab_id,
            vocab.fingerprint()
        )));
    }
    let tt = select_tt_subset(seqs.len(), tt_fraction, seed)?;
    let records = seqs
        .par_iter()
        .enumerate()
        .map(|(i, seq)| Ok(PretrainRecord::from(&assemble_indexed(seq, &vocab, seed, i, tt[i])?)))
        .collect::<Outcome<Vec<_>>>()?;
    write_jsonl(&mut run, "pretrain.jsonl", &records)?;
    let masked: usize = records.iter().map(|r| r.masked_positions.len()).sum();
    println!(
        "{} examples, {} masked positions, {} with tagging targets",
        records.len(),
        masked,
        tt.iter().filter(|&&b| b).count()
    );
    run.finish("assemble-pretrain", p.resolved())
}

fn report_csv(report: &PrfReport) -> String {
    let mut s = String::from("type,precision,recall,f1,support\n");
    for (t, r) in &report.per_type {
        s.push_str(&format!(
            "{t},{:.2},{:.2},{:.2},{}\n",
            100.0 * r.precision,
            100.0 * r.recall,
            100.0 * r.f1,
            r.support
        ));
    }
    let m = report.micro;
    let support: usize = report.per_type.values().map(|r| r.support).sum();
    s.push_str(&format!(
        "micro,{:.2},{:.2},{:.2},{support}\n",
        100.0 * m.precision,
        100.0 * m.recall,
        100.0 * m.f1
    ));
    s
}

/// Gold documents without a prediction count as predicting nothing; a
/// prediction for a document missing from gold is an input error.
pub fn eval_entities(p: &mut Params) -> Outcome {
    let out = p.path("out")?;
    let pred_path = p.path("pred")?;
    let gold_path = p.path("gold")?;
    let mut run = Run::new(out)?;
    let mut pred: Vec<SpanDocument> = read_jsonl(&mut run, "pred", &pred_path)?;
    let mut gold: Vec<SpanDocument> = read_jsonl(&mut run, "gold", &gold_path)?;
    sort_unique_by_doc(&mut pred, |d| &d.doc_id, "pred")?;
    sort_unique_by_doc(&mut gold, |d| &d.doc_id, "gold")?;
    let pred_by: BTreeMap<&str, &[EntitySpan]> = pred.iter().map(|d| (d.doc_id.as_str(), &d.spans[..])).collect();
    if let Some(d) = pred.iter().find(|d| gold.binary_search_by(|g| g.doc_id.cmp(&d.doc_id)).is_err()) {
        return Err(Failure::Input(format!("prediction for {} has no gold document", d.doc_id)));
    }
    let report = entity_prf_docs(
        gold.iter()
            .map(|g| (pred_by.get(g.doc_id.as_str()).copied().unwrap_or(&[]), &g.spans[..])),
    );
    let csv = report_csv(&report);
    run.write_json("entity_report.json", &report)?;
    run.write("entity_report.csv", csv.as_bytes())?;
    print!("{csv}");
    run.finish("eval-entities", p.resolved())
}

#[derive(Deserialize)]
struct DocLabel {
    doc_id: String,
    label: serde_json::Value,
}

#[derive(Serialize)]
struct DocReport {
    documents: usize,
    correct: usize,
    accuracy: f64,
}

/// Every gold document needs exactly one prediction.
pub fn eval_docs(p: &mut Params) -> Outcome {
    let out = p.path("out")?;
    let pred_path = p.path("pred")?;
    let gold_path = p.path("gold")?;
    let mut run = Run::new(out)?;
    let mut pred: Vec<DocLabel> = read_jsonl(&mut run, "pred", &pred_path)?;
    let mut gold: Vec<DocLabel> = read_jsonl(&mut run, "gold", &gold_path)?;
    sort_unique_by_doc(&mut pred, |d| &d.doc_id, "pred")?;
    sort_unique_by_doc(&mut gold, |d| &d.doc_id, "gold")?;
    if let Some((p, g)) = pred.iter().zip(&gold).find(|(p, g)| p.doc_id != g.doc_id) {
        return Err(Failure::Input(format!("pred and gold disagree on documents ({} vs {})", p.doc_id, g.doc_id)));
    }
    if pred.len() != gold.len() {
        return Err(Failure::Input(format!("{} predictions for {} gold documents", pred.len(), gold.len())));
    }
    let preds: Vec<&serde_json::Value> = pred.iter().map(|d| &d.label).collect();
    let labels: Vec<&serde_json::Value> = gold.iter().map(|d| &d.label).collect();
    let accuracy = dc_accuracy(&preds, &labels)?;
    let report = DocReport {
        documents: gold.len(),
        correct: preds.iter().zip(&labels).filter(|(a, b)| a == b).count(),
        accuracy,
    };
    run.write_json("doc_report.json", &report)?;
    println!("accuracy {:.2} ({}/{})", 100.0 * accuracy, report.correct, report.documents);
    run.finish("eval-docs", p.resolved())
}

/// Episode `i` is sampled with seed `seed + i`.
pub fn sample_episodes(p: &mut Params) -> Outcome {
    let out = p.path("out")?;
    let corpus_path = p.path("corpus")?;
    let seed = p.seed()?;
    let split: String = p.get("split", "meta-test".to_string())?;
    let ways: usize = p.get("ways", META_TEST_WAY)?;
    let shots: usize = p.get("shots", 1)?;
    let slack: usize = p.get("slack", DEFAULT_SLACK)?;
    let query_cap: usize = p.get("query_cap", 64)?;
    let episodes: usize = p.get("episodes", 100)?;
    let train_types: usize = p.get("meta_train_types", DEFAULT_TRAIN_TYPES)?;
    let test_types: usize = p.get("meta_test_types", DEFAULT_TEST_TYPES)?;
    let min_occ: usize = p.get("min_occurrences", DEFAULT_MIN_OCCURRENCES)?;
    check(ways > 0 && shots > 0, "ways and shots must be at least 1")?;
    match split.as_str() {
        "meta-train" => {}
        "meta-test" => check(ways == META_TEST_WAY, "meta-test episodes are always 5-way")?,
        other => return Err(Failure::Config(format!("split={other}: expected `meta-train` or `meta-test`"))),
    }

    let mut run = Run::new(out)?;
    let mut docs: Vec<EntityDocument> = read_jsonl(&mut run, "corpus", &corpus_path)?;
    sort_unique_by_doc(&mut docs, |d| &d.doc_id, "corpus")?;
    for d in &docs {
        d.bio().map_err(|e| Failure::Input(format!("{}: {e}", d.doc_id)))?;
    }
    let pools = split_pools(&type_frequencies(&docs), seed, train_types, test_types, min_occ)?;
    let pool = if split == "meta-train" { &pools.meta_train_types } else { &pools.meta_test_types };
    let cfg = EpisodeConfig { n: ways, k: shots, slack, query_cap };
    let sampled = (0..episodes)
        .into_par_iter()
        .map(|i| sample_episode(&docs, pool, &cfg, example_seed(seed, i)))
        .collect::<docforge::Result<Vec<_>>>()?;
    run.write_json("pools.json", &pools)?;
    write_jsonl(&mut run, "episodes.jsonl", &sampled)?;
    println!("{} {split} episodes, {ways}-way {shots}-shot, pool of {}", sampled.len(), pool.len());
    run.finish("sample-episodes", p.resolved())
}
