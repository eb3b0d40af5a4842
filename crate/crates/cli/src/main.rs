//! `docforge`: every pipeline stage behind one executable.
//!
//! Each subcommand reads its parameters from `--key value` flags, then a
//! flat `key=value` file given with `--config`, then built-in defaults.
//! Outputs go to the directory named by `out`, next to a `run_record.json`.

mod commands;
mod params;
mod record;
mod selfcheck;

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};

use params::{Failure, Outcome, Params, SEED_ENV};

/// A config key: name and help text.
type Key = (&'static str, &'static str);

const OUT: Key = ("out", "Output directory (created if missing)");
const SEED: Key = ("seed", "Base seed [default: $DOCFORGE_SEED]");
const ONTOLOGY: Key = ("ontology", "Ontology JSON [default: bundled]");
const VOCAB: Key = ("vocab", "WordPiece vocabulary, one token per line [default: bundled]");

struct Stage {
    name: &'static str,
    about: &'static str,
    keys: &'static [Key],
    run: fn(&mut Params) -> Outcome,
}

const STAGES: &[Stage] = &[
    Stage {
        name: "synth-store",
        about: "Generate a synthetic embedding store clustered around the ontology keywords",
        keys: &[
            OUT,
            SEED,
            ONTOLOGY,
            ("embed_seed", "Seed of the text embedder [default: seed]"),
            ("items", "Number of stored vectors [default: 50000]"),
            ("dim", "Embedding dimension [default: 64]"),
            ("topical_fraction", "Share of items drawn near a keyword [default: 0.7]"),
            ("exact_copy_fraction", "Share of exact copies [default: 0.01]"),
            ("near_copy_fraction", "Share of near copies [default: 0.01]"),
        ],
        run: commands::synth_store,
    },
    Stage {
        name: "synth-ocr",
        about: "Generate synthetic OCR pages (JSON) and their rendered images (PNG)",
        keys: &[
            OUT,
            SEED,
            ("manifest", "Take the kept images of this manifest [default: ids 0..pages]"),
            ("pages", "Number of pages [default: 1000]"),
            ("images", "Also write PNG renders [default: true]"),
            ("page_width", "Page width in pixels [default: 480]"),
            ("page_height", "Page height in pixels [default: 640]"),
        ],
        run: commands::synth_ocr,
    },
    Stage {
        name: "synth-entities",
        about: "Generate a labeled entity corpus for episode sampling",
        keys: &[
            OUT,
            SEED,
            ("layout", "`mixed` (1-4 spans per doc) or `single` (one span per doc) [default: mixed]"),
            ("types", "Number of entity types [default: 30]"),
            ("docs", "Documents, for the mixed layout [default: 2000]"),
            ("docs_per_type", "Documents per type, for the single layout [default: 20]"),
            ("len", "Tokens per document [default: 64]"),
        ],
        run: commands::synth_entities,
    },
    Stage {
        name: "build-corpus",
        about: "Retrieve per keyword, deduplicate and quality-filter into a manifest",
        keys: &[
            OUT,
            SEED,
            ONTOLOGY,
            ("store", "Vector store file"),
            ("ocr_dir", "Directory of OCR JSON pages [default: synthetic OCR from seed]"),
            ("embed_seed", "Seed of the text embedder [default: seed]"),
            ("k", "Neighbors per keyword [default: 10000]"),
            ("probes", "Index cells probed per query [default: 16]"),
            ("num_cells", "k-means cells [default: 64]"),
            ("spill", "Cells each vector is listed in [default: 1]"),
            ("near_dup_threshold", "Dot product at which two images are duplicates [default: 0.98]"),
            ("min_confidence", "Minimum mean OCR confidence [default: 0.6]"),
            ("min_tokens", "Minimum OCR word count [default: 20]"),
            ("alnum_ratio_min", "Minimum alphanumeric character share [default: 0.4]"),
        ],
        run: commands::build_corpus,
    },
    Stage {
        name: "stats",
        about: "Per-keyword distance mean and std over a manifest, as CSV",
        keys: &[
            OUT,
            ONTOLOGY,
            ("manifest", "Manifest JSONL"),
            ("kept_only", "Skip rejected records [default: false]"),
        ],
        run: commands::stats,
    },
    Stage {
        name: "tokenize",
        about: "WordPiece tokens with boxes, layout positions and pixel crops",
        keys: &[
            OUT,
            VOCAB,
            ("ocr_dir", "Directory of OCR JSON pages"),
            ("image_dir", "Directory of `<doc_id>.png` page images [default: render from OCR]"),
            ("manifest", "Only tokenize the kept images of this manifest"),
            ("max_docs", "Stop after this many documents, 0 for all [default: 0]"),
            ("context_ratio", "Crop enlargement on each side [default: 0.1]"),
            ("crop_size", "Crop side in pixels after resampling [default: 16]"),
            ("max_seq_len", "Tokens per sequence including [CLS] [default: 512]"),
            ("tag", "Also attach weak tags [default: false]"),
        ],
        run: commands::tokenize,
    },
    Stage {
        name: "tag",
        about: "Attach six-class weak tags to tokenized documents",
        keys: &[OUT, ("tokens", "Token JSONL"), ("ocr_dir", "Directory of the OCR JSON pages")],
        run: commands::tag,
    },
    Stage {
        name: "assemble-pretrain",
        about: "Masking plans and MMLM/MCM/TT targets per document",
        keys: &[
            OUT,
            SEED,
            VOCAB,
            ("tokens", "Token JSONL"),
            ("tt_fraction", "Share of documents given tagging targets [default: 0.2]"),
            ("alpha", "Weight of the crop loss [default: 1]"),
            ("beta", "Weight of the tagging loss [default: 1]"),
        ],
        run: commands::assemble_pretrain,
    },
    Stage {
        name: "eval-entities",
        about: "Exact-match entity precision, recall and F1, per type and micro",
        keys: &[OUT, ("pred", "Predicted span JSONL"), ("gold", "Gold span JSONL")],
        run: commands::eval_entities,
    },
    Stage {
        name: "eval-docs",
        about: "Document classification accuracy",
        keys: &[OUT, ("pred", "Predicted label JSONL"), ("gold", "Gold label JSONL")],
        run: commands::eval_docs,
    },
    Stage {
        name: "sample-episodes",
        about: "Split entity types into pools and sample N-way K-shot episodes",
        keys: &[
            OUT,
            SEED,
            ("corpus", "Entity document JSONL"),
            ("split", "`meta-train` or `meta-test` [default: meta-test]"),
            ("ways", "Types per episode; meta-test is always 5 [default: 5]"),
            ("shots", "Target occurrences per type [default: 1]"),
            ("slack", "Allowed excess over shots [default: 2]"),
            ("query_cap", "Largest query set [default: 64]"),
            ("episodes", "Number of episodes [default: 100]"),
            ("meta_train_types", "Meta-train pool size [default: 18]"),
            ("meta_test_types", "Meta-test pool size [default: 5]"),
            ("min_occurrences", "Types rarer than this are dropped [default: 10]"),
        ],
        run: commands::sample_episodes,
    },
    Stage {
        name: "selfcheck",
        about: "Run the bundled oracle fixtures and print pass/fail",
        keys: &[("out", "Also write the report and a run record here")],
        run: selfcheck::run,
    },
];

fn cli() -> Command {
    Command::new("docforge")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Document corpus construction and pretraining-data pipeline")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .help("Flat key=value file; flags take precedence"),
        )
        .arg(
            Arg::new("jobs")
                .long("jobs")
                .global(true)
                .value_name("N")
                .value_parser(clap::value_parser!(usize))
                .help("Worker threads, 0 for one per core [default: 0]"),
        )
        .subcommands(STAGES.iter().map(|s| {
            Command::new(s.name).about(s.about).args(s.keys.iter().map(|&(name, help)| {
                Arg::new(name)
                    .long(name)
                    .value_name("VALUE")
                    .action(ArgAction::Set)
                    .help(help)
            }))
        }))
}

/// Config file values, checked against every known key, under the flags
/// of the chosen subcommand.
fn raw_params(root: &ArgMatches, sub: &ArgMatches, stage: &Stage) -> Outcome<BTreeMap<String, String>> {
    let mut raw = BTreeMap::new();
    if let Some(path) = root.get_one::<String>("config").or(sub.get_one::<String>("config")) {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{path}: {e}")))?;
        let known: BTreeSet<&str> = STAGES.iter().flat_map(|s| s.keys.iter().map(|k| k.0)).collect();
        for (k, v) in docforge::config::parse_kv(&text).map_err(|e| Failure::Config(e.to_string()))? {
            if !known.contains(k.as_str()) {
                return Err(Failure::Config(format!("{path}: unknown key `{k}`")));
            }
            // Keys of other stages may share the file.
            if stage.keys.iter().any(|key| key.0 == k) {
                raw.insert(k, v);
            }
        }
    }
    for &(name, _) in stage.keys {
        if let Some(v) = sub.get_one::<String>(name) {
            raw.insert(name.to_string(), v.clone());
        }
    }
    Ok(raw)
}

fn main() -> ExitCode {
    // Usage errors exit with status 2 and print usage.
    let root = cli().get_matches();
    let (name, sub) = root.subcommand().expect("a subcommand is required");
    let stage = STAGES.iter().find(|s| s.name == name).expect("subcommands come from STAGES");

    let result = raw_params(&root, sub, stage).and_then(|raw| {
        let jobs = sub.get_one::<usize>("jobs").or(root.get_one::<usize>("jobs")).copied().unwrap_or(0);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Failure::Config(format!("--jobs {jobs}: {e}")))?;
        let mut params = Params::new(raw, std::env::var(SEED_ENV).ok());
        pool.install(|| (stage.run)(&mut params))
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("docforge {name}: {f}");
            if matches!(f, Failure::Config(_)) {
                eprintln!("run `docforge {name} --help` for the accepted keys");
            }
            f.exit_code()
        }
    }
}
