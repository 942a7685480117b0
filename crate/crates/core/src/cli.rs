//! Command-line front end. Exit codes: 0 success, 1 user error, 2 runtime
//! failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::anonymizers::{AnonymizerConfig, Method, DEFAULT_MAX_INPUT_CHARS};
use crate::corpus::{
    compute_span_agreement, compute_subject_iaa, dataset_statistics, load_dataset, pool_iaa, DatasetFormat, LoadedDataset,
    ValidationConfig,
};
use crate::gateway::{GatewayMode, ModelTag};
use crate::metrics::{GroupKey, TokenCounting};
use crate::pipeline::{build_gateway, compare_adversaries, load_reports, Pipeline, PipelineError, RunConfig, TextSource};
use crate::scoring::{Judge, PairingStrategy, ScoringConfig};

#[derive(Debug, Parser)]
#[command(name = "subpriv", version, about = "Subject-level privacy evaluation for text anonymization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset file and list rejected records.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Per-source and total dataset statistics.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Produce anonymized texts only.
    Anonymize(RunArgs),
    /// Anonymize (if needed) and run the adversary.
    Infer(RunArgs),
    /// Up to subject alignment.
    Align(RunArgs),
    /// Up to per-cell scores.
    Score(RunArgs),
    /// All stages plus the metrics report.
    Evaluate(RunArgs),
    /// Rank correlation of protection rates between adversaries. Each
    /// directory holds the report.json files of one adversary.
    CompareAdversaries {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Inter-annotator agreement between two annotations of the same documents.
    Iaa {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        judge: ModelTag,
        #[arg(long, default_value_t = GatewayMode::Replay)]
        mode: GatewayMode,
        #[arg(long)]
        cassettes: PathBuf,
        #[arg(long, default_value_t = 3)]
        certainty_floor: u8,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Anonymization method; omit together with --on-original.
    #[arg(long, required_unless_present = "on_original", conflicts_with = "on_original")]
    pub method: Option<Method>,
    /// Run the adversary on the original texts.
    #[arg(long)]
    pub on_original: bool,
    /// Anonymizer model, provider:model.
    #[arg(long)]
    pub backbone: Option<ModelTag>,
    #[arg(long)]
    pub adversary: Option<ModelTag>,
    #[arg(long)]
    pub judge: Option<ModelTag>,
    #[arg(long, default_value_t = GatewayMode::Replay)]
    pub mode: GatewayMode,
    /// Cassette directory; defaults to <out>/cassettes.
    #[arg(long)]
    pub cassettes: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Minimum ground-truth certainty for a PII to be evaluated.
    #[arg(long, default_value_t = 3)]
    pub certainty_floor: u8,
    /// Minimum adversary certainty for a claim to count.
    #[arg(long, default_value_t = 1)]
    pub pred_certainty_floor: u8,
    #[arg(long, value_delimiter = ',', default_value = "category,kind,hardness")]
    pub group_by: Vec<GroupKey>,
    #[arg(long, default_value_t = PairingStrategy::Greedy, value_enum)]
    pub strategy: PairingStrategy,
    /// Never ask the judge for semantic matches.
    #[arg(long)]
    pub no_llm_fallback: bool,
    /// JSONL spans for --method external_mask.
    #[arg(long)]
    pub mask_list: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub rounds: u32,
    #[arg(long, default_value_t = DEFAULT_MAX_INPUT_CHARS)]
    pub max_input_chars: usize,
    #[arg(long, default_value_t = TokenCounting::Whitespace, value_enum)]
    pub token_counting: TokenCounting,
    #[arg(long, default_value_t = 4)]
    pub jobs: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Stop {
    Anonymize,
    Infer,
    Align,
    Score,
    Evaluate,
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(path: &Path) -> Result<LoadedDataset, PipelineError> {
    load_dataset(path, DatasetFormat::from_path(path), &ValidationConfig::default()).map_err(|e| PipelineError::User(e.to_string()))
}

fn dispatch(command: Command) -> Result<i32, PipelineError> {
    match command {
        Command::Validate { dataset } => {
            let loaded = load(&dataset)?;
            for d in &loaded.diagnostics {
                println!("{d}");
            }
            println!("{} valid, {} rejected", loaded.documents.len(), loaded.rejected);
            Ok(if loaded.rejected > 0 || loaded.documents.is_empty() { 1 } else { 0 })
        }
        Command::Stats { dataset, json } => {
            let loaded = load(&dataset)?;
            for d in &loaded.diagnostics {
                log::warn!("{d}");
            }
            let stats = dataset_statistics(&loaded.documents).map_err(|e| PipelineError::User(e.to_string()))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
            } else {
                print!("{}", stats.to_table());
            }
            Ok(0)
        }
        Command::Anonymize(a) => run_stages(a, Stop::Anonymize),
        Command::Infer(a) => run_stages(a, Stop::Infer),
        Command::Align(a) => run_stages(a, Stop::Align),
        Command::Score(a) => run_stages(a, Stop::Score),
        Command::Evaluate(a) => run_stages(a, Stop::Evaluate),
        Command::CompareAdversaries { reports, json } => {
            let mut groups = Vec::new();
            for dir in &reports {
                let r = load_reports(dir)?;
                if r.is_empty() {
                    return Err(PipelineError::User(format!("no report.json under {}", dir.display())));
                }
                let name = r[0].adversary.clone();
                if let Some(other) = r.iter().find(|x| x.adversary != name) {
                    return Err(PipelineError::User(format!(
                        "{} mixes adversaries {name} and {}",
                        dir.display(),
                        other.adversary
                    )));
                }
                groups.push((name, r));
            }
            let cmp = compare_adversaries(&groups)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&cmp).expect("comparison serializes"));
            } else {
                let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
                println!("{:<30} {:<30} {:>7} {:>7} {:>7}", "adversary A", "adversary B", "n", "rho_CPR", "rho_IPR");
                for c in &cmp {
                    println!("{:<30} {:<30} {:>7} {:>7} {:>7}", c.a, c.b, c.configurations, f(c.rho_cpr), f(c.rho_ipr));
                }
            }
            Ok(0)
        }
        Command::Iaa {
            a,
            b,
            judge,
            mode,
            cassettes,
            certainty_floor,
        } => {
            let (la, lb) = (load(&a)?, load(&b)?);
            let gw = build_gateway(mode, &cassettes, &[&judge], 4)?;
            let other: BTreeMap<&str, _> = lb.documents.iter().map(|d| (d.doc_id.as_str(), d)).collect();
            let config = ScoringConfig {
                gt_certainty_floor: certainty_floor,
                ..Default::default()
            };
            let mut reports = Vec::new();
            let mut spans = Vec::new();
            for doc in &la.documents {
                let Some(db) = other.get(doc.doc_id.as_str()) else {
                    log::warn!("{} missing from {}", doc.doc_id, b.display());
                    continue;
                };
                let j = Judge::for_doc(&gw, judge.clone(), &doc.doc_id);
                let r = compute_subject_iaa(doc, &doc.subjects, &db.subjects, &j, &config).map_err(|e| PipelineError::Stage {
                    stage: "iaa",
                    doc_id: doc.doc_id.clone(),
                    message: e.to_string(),
                })?;
                reports.push(r);
                if let (Some(sa), Some(sb)) = (&doc.entity_spans, &db.entity_spans) {
                    spans.push((doc.doc_id.clone(), compute_span_agreement(sa, sb)));
                }
            }
            let pooled = pool_iaa(&reports).ok_or_else(|| PipelineError::User("no documents in common".into()))?;
            let out = serde_json::json!({ "pooled": pooled, "documents": reports, "span_agreement": spans });
            println!("{}", serde_json::to_string_pretty(&out).expect("iaa serializes"));
            Ok(0)
        }
    }
}

fn run_stages(a: RunArgs, stop: Stop) -> Result<i32, PipelineError> {
    let source = if a.on_original {
        TextSource::Original
    } else {
        TextSource::Anonymized {
            method: a.method.expect("clap enforces --method or --on-original"),
            backbone: a.backbone.clone(),
        }
    };
    if a.rounds == 0 {
        return Err(PipelineError::User("--rounds must be positive".into()));
    }
    let mut config = RunConfig::new(&a.dataset, source);
    config.adversary = a.adversary.clone();
    config.judge = a.judge.clone();
    config.scoring = ScoringConfig {
        gt_certainty_floor: a.certainty_floor,
        pred_certainty_floor: a.pred_certainty_floor,
        strategy: a.strategy,
        llm_fallback: !a.no_llm_fallback,
        ..Default::default()
    };
    config.anonymizer = AnonymizerConfig {
        max_input_chars: a.max_input_chars,
        rounds: a.rounds,
        strict: false,
    };
    config.mask_list = a.mask_list.clone();
    config.group_by = a.group_by.clone();
    config.token_counting = a.token_counting;
    config.jobs = a.jobs;

    let cassettes = a.cassettes.clone().unwrap_or_else(|| a.out.join("cassettes"));
    let tags: Vec<&ModelTag> = [&a.backbone, &a.adversary, &a.judge].into_iter().flatten().collect();
    let gw = build_gateway(a.mode, &cassettes, &tags, a.jobs.max(1))?;
    let mut p = Pipeline::open(&gw, config, &a.out)?;
    log::info!("run {} in {}", p.manifest().run_id, a.out.display());

    if stop == Stop::Evaluate {
        let report = p.evaluate()?;
        print!("{}", crate::pipeline::render_text_report(&report));
        return Ok(0);
    }
    let runs = p.anonymize()?;
    if stop == Stop::Anonymize {
        println!("anonymized {} documents into {}", runs.len(), a.out.display());
        return Ok(0);
    }
    let texts = p.texts(&runs);
    let inferences = p.infer(&texts)?;
    if stop >= Stop::Align {
        let alignments = p.align(&texts, &inferences)?;
        if stop >= Stop::Score {
            p.score(&inferences, &alignments)?;
        }
    }
    println!("stages written to {}", a.out.display());
    Ok(0)
}
