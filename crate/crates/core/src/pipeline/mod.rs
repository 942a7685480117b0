//! Stage orchestration: anonymize, infer, align, score, judge utility and
//! report, with one artifact file per stage under the run directory.

pub mod artifacts;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversary::{Adversary, InferenceResult};
use crate::alignment::{align_subjects, AlignmentResult, AnnotatedSubject, TextVariant};
use crate::anonymizers::{
    adversarial_anonymize, apply_external_masks, deid_gpt, dp_prompt, load_mask_list, AaTarget, AnonymizationRun,
    AnonymizerConfig, MaskList, Method,
};
use crate::corpus::{load_dataset, DatasetFormat, Document, ValidationConfig};
use crate::gateway::{CassetteStore, ChatBackend, Gateway, GatewayMode, HttpBackend, Message, ModelTag, RetryPolicy};
use crate::metrics::{build_report, parse_judge_score, rouge_l, GroupKey, MetricsReport, ReportInputs, TokenCounting, UtilityRecord};
use crate::prompts;
use crate::scoring::{is_abstention, score_document, Judge, ReviewItem, ScoreCell, ScoringConfig};
use artifacts::{read_stage, stage_path, write_jsonl, write_stage};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const REVIEW_FILE: &str = "needs_review.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    /// Bad input or configuration; nothing was computed.
    #[error("{0}")]
    User(String),
    #[error("stage {stage} failed on {doc_id}: {message}")]
    Stage {
        stage: &'static str,
        doc_id: String,
        message: String,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Self {
        let context = context.into();
        move |source| PipelineError::Io { context, source }
    }

    /// Process exit code: 1 for user errors, 2 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::User(_) => 1,
            _ => 2,
        }
    }
}

/// What produces the text the adversary sees.
#[derive(Debug, Clone, PartialEq)]
pub enum TextSource {
    /// The adversary reads the original text.
    Original,
    Anonymized { method: Method, backbone: Option<ModelTag> },
}

impl TextSource {
    pub fn label(&self) -> String {
        match self {
            TextSource::Original => "original".into(),
            TextSource::Anonymized { method, .. } => method.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub source: TextSource,
    pub adversary: Option<ModelTag>,
    pub judge: Option<ModelTag>,
    pub scoring: ScoringConfig,
    pub anonymizer: AnonymizerConfig,
    pub mask_list: Option<PathBuf>,
    pub group_by: Vec<GroupKey>,
    pub token_counting: TokenCounting,
    pub jobs: usize,
}

impl RunConfig {
    pub fn new(dataset: impl Into<PathBuf>, source: TextSource) -> Self {
        Self {
            dataset: dataset.into(),
            source,
            adversary: None,
            judge: None,
            scoring: ScoringConfig::default(),
            anonymizer: AnonymizerConfig::default(),
            mask_list: None,
            group_by: vec![GroupKey::Category, GroupKey::Kind, GroupKey::Hardness],
            token_counting: TokenCounting::Whitespace,
            jobs: 4,
        }
    }
}

/// Identity and provenance of a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub tool_version: String,
    pub dataset: String,
    pub dataset_digest: String,
    pub documents: usize,
    pub rejected_records: usize,
    pub method: String,
    pub backbone: Option<String>,
    pub adversary: Option<String>,
    pub judge: Option<String>,
    pub mode: GatewayMode,
    pub gt_certainty_floor: u8,
    pub pred_certainty_floor: u8,
    pub strategy: String,
    pub llm_fallback: bool,
    pub rounds: u32,
    pub mask_list_digest: Option<String>,
    pub token_counting: TokenCounting,
    pub artifacts: Vec<String>,
    pub created_at: String,
    pub updated_at: String,
}

/// The report file: metrics plus the configuration they belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub method: String,
    pub backbone: Option<String>,
    pub adversary: String,
    pub judge: String,
    pub metrics: MetricsReport,
}

/// A stage value with the review items raised while computing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reviewed<T> {
    pub value: T,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub review: Vec<ReviewItem>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Builds the gateway for `mode`. Live and record modes check credentials
/// for every provider in `tags` up front.
pub fn build_gateway(mode: GatewayMode, cassettes: &Path, tags: &[&ModelTag], fanout: usize) -> Result<Gateway, PipelineError> {
    let open_store = || CassetteStore::open(cassettes).map_err(PipelineError::io(format!("cassette store {}", cassettes.display())));
    let backend = || -> Result<Arc<dyn ChatBackend>, PipelineError> {
        for t in tags {
            HttpBackend::check_provider(&t.provider).map_err(|e| PipelineError::User(e.to_string()))?;
        }
        let b = HttpBackend::new(Duration::from_secs(300)).map_err(|e| PipelineError::User(e.to_string()))?;
        Ok(Arc::new(b))
    };
    let gw = match mode {
        GatewayMode::Replay => {
            if !cassettes.is_dir() {
                return Err(PipelineError::User(format!("cassette directory {} does not exist", cassettes.display())));
            }
            Gateway::replay(open_store()?)
        }
        GatewayMode::Record => Gateway::record(open_store()?, backend()?),
        GatewayMode::Live => Gateway::live(backend()?),
    };
    Ok(gw.with_retry(RetryPolicy::default()).with_fanout(fanout))
}

pub struct Pipeline<'g> {
    gw: &'g Gateway,
    config: RunConfig,
    out: PathBuf,
    docs: Vec<Document>,
    masks: MaskList,
    manifest: RunManifest,
    pool: rayon::ThreadPool,
}

/// Subjects as the alignment judge sees them.
fn gt_annotation(doc: &Document) -> Vec<AnnotatedSubject> {
    doc.subjects
        .iter()
        .map(|s| AnnotatedSubject {
            id: s.subject_id,
            description: s.description.clone(),
            piis: s
                .piis
                .iter()
                .filter(|p| !p.value.trim().is_empty())
                .map(|p| (p.category, p.value.clone()))
                .collect(),
        })
        .collect()
}

fn pred_annotation(inference: &InferenceResult, floor: u8) -> Vec<AnnotatedSubject> {
    inference
        .subjects
        .iter()
        .map(|s| AnnotatedSubject {
            id: s.subject_id,
            description: s.description.clone(),
            piis: inference
                .claims_for(s.subject_id)
                .iter()
                .filter(|c| c.certainty >= floor && !is_abstention(&c.value))
                .map(|c| (c.category, c.value.clone()))
                .collect(),
        })
        .collect()
}

impl<'g> Pipeline<'g> {
    /// Loads the dataset and opens (or creates) the run directory. An
    /// existing manifest must agree with this configuration.
    pub fn open(gw: &'g Gateway, config: RunConfig, out: &Path) -> Result<Self, PipelineError> {
        let validation = ValidationConfig {
            age_reference: config.scoring.age_reference,
        };
        let loaded = load_dataset(&config.dataset, DatasetFormat::from_path(&config.dataset), &validation)
            .map_err(|e| PipelineError::User(e.to_string()))?;
        for d in &loaded.diagnostics {
            log::warn!("{d}");
        }
        if loaded.documents.is_empty() {
            return Err(PipelineError::User(format!("{}: no valid documents", config.dataset.display())));
        }
        let (masks, mask_digest) = match (&config.source, &config.mask_list) {
            (TextSource::Anonymized { method: Method::ExternalMask, .. }, Some(p)) => {
                let bytes = fs::read(p).map_err(PipelineError::io(format!("mask list {}", p.display())))?;
                (load_mask_list(p).map_err(|e| PipelineError::User(e.to_string()))?, Some(sha256_hex(&bytes)))
            }
            (TextSource::Anonymized { method: Method::ExternalMask, .. }, None) => {
                return Err(PipelineError::User("method external_mask needs --mask-list".into()))
            }
            _ => (BTreeMap::new(), None),
        };
        if let TextSource::Anonymized { method, backbone: None } = &config.source {
            if *method != Method::ExternalMask {
                return Err(PipelineError::User(format!("method {method} needs --backbone")));
            }
        }

        let backbone = match &config.source {
            TextSource::Anonymized { backbone, .. } => backbone.as_ref().map(ToString::to_string),
            TextSource::Original => None,
        };
        let s = &config.scoring;
        let identity = serde_json::json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "dataset_digest": loaded.digest,
            "method": config.source.label(),
            "backbone": backbone,
            "rounds": config.anonymizer.rounds,
            "max_input_chars": config.anonymizer.max_input_chars,
            "mask_list_digest": mask_digest,
            "gt_floor": s.gt_certainty_floor,
            "pred_floor": s.pred_certainty_floor,
            "strategy": s.strategy,
            "llm_fallback": s.llm_fallback,
            "age_reference": s.age_reference.to_string(),
            "token_counting": config.token_counting,
        });
        let run_id = sha256_hex(identity.to_string().as_bytes())[..16].to_string();
        let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        let mut manifest = RunManifest {
            run_id: run_id.clone(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            dataset: config.dataset.display().to_string(),
            dataset_digest: loaded.digest.clone(),
            documents: loaded.documents.len(),
            rejected_records: loaded.rejected,
            method: config.source.label(),
            backbone,
            adversary: config.adversary.as_ref().map(ToString::to_string),
            judge: config.judge.as_ref().map(ToString::to_string),
            mode: gw.mode(),
            gt_certainty_floor: s.gt_certainty_floor,
            pred_certainty_floor: s.pred_certainty_floor,
            strategy: serde_json::to_value(s.strategy).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
            llm_fallback: s.llm_fallback,
            rounds: config.anonymizer.rounds,
            mask_list_digest: mask_digest,
            token_counting: config.token_counting,
            artifacts: Vec::new(),
            created_at: now.clone(),
            updated_at: now,
        };

        fs::create_dir_all(out).map_err(PipelineError::io(format!("create {}", out.display())))?;
        let manifest_path = out.join(MANIFEST_FILE);
        if let Ok(bytes) = fs::read(&manifest_path) {
            let prev: RunManifest = serde_json::from_slice(&bytes)
                .map_err(|e| PipelineError::User(format!("{}: unreadable manifest: {e}", manifest_path.display())))?;
            if prev.run_id != run_id {
                return Err(PipelineError::User(format!(
                    "{} holds run {} with a different configuration; use another --out",
                    out.display(),
                    prev.run_id
                )));
            }
            for (what, old, new) in [("adversary", &prev.adversary, &mut manifest.adversary), ("judge", &prev.judge, &mut manifest.judge)] {
                match (old, new.as_ref()) {
                    (Some(o), Some(n)) if o != n => {
                        return Err(PipelineError::User(format!(
                            "{} was run with {what} {o}, not {n}; use another --out",
                            out.display()
                        )))
                    }
                    (Some(o), None) => *new = Some(o.clone()),
                    _ => {}
                }
            }
            manifest.created_at = prev.created_at;
            manifest.artifacts = prev.artifacts;
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs.max(1))
            .build()
            .map_err(|e| PipelineError::User(e.to_string()))?;
        let p = Self {
            gw,
            config,
            out: out.to_path_buf(),
            docs: loaded.documents,
            masks,
            manifest,
            pool,
        };
        p.write_manifest()?;
        Ok(p)
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    fn write_manifest(&self) -> Result<(), PipelineError> {
        let path = self.out.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(&path, json + "\n").map_err(PipelineError::io(format!("write {}", path.display())))
    }

    fn note_artifact(&mut self, name: &str) -> Result<(), PipelineError> {
        if !self.manifest.artifacts.iter().any(|a| a == name) {
            self.manifest.artifacts.push(name.to_string());
            self.manifest.artifacts.sort();
        }
        self.manifest.updated_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        self.write_manifest()
    }

    /// Runs `f` for every document missing from the stage file. Successful
    /// results are persisted even if other documents fail; the first failure
    /// in document order is returned.
    fn stage<T, F>(&mut self, name: &'static str, f: F) -> Result<BTreeMap<String, T>, PipelineError>
    where
        T: Serialize + DeserializeOwned + Send,
        F: Fn(&Document) -> Result<T, String> + Sync,
    {
        let path = stage_path(&self.out, name);
        let mut done: BTreeMap<String, T> =
            read_stage(&path, &self.manifest.run_id).map_err(PipelineError::io(format!("read {}", path.display())))?;
        let todo: Vec<&Document> = self.docs.iter().filter(|d| !done.contains_key(&d.doc_id)).collect();
        if todo.is_empty() {
            log::info!("{name}: all {} documents already done", done.len());
        } else {
            log::info!("{name}: {} to do, {} resumed", todo.len(), done.len());
        }
        let results: Vec<(String, Result<T, String>)> =
            self.pool.install(|| todo.par_iter().map(|d| (d.doc_id.clone(), f(d))).collect());
        let mut first_error = None;
        for (doc_id, r) in results {
            match r {
                Ok(v) => {
                    done.insert(doc_id, v);
                }
                Err(message) => {
                    first_error.get_or_insert(PipelineError::Stage {
                        stage: name,
                        doc_id,
                        message,
                    });
                }
            }
        }
        write_stage(&path, &self.manifest.run_id, &done).map_err(PipelineError::io(format!("write {}", path.display())))?;
        self.note_artifact(&format!("{name}.jsonl"))?;
        match first_error {
            Some(e) => Err(e),
            None => Ok(done),
        }
    }

    pub fn anonymize(&mut self) -> Result<BTreeMap<String, AnonymizationRun>, PipelineError> {
        let TextSource::Anonymized { method, backbone } = self.config.source.clone() else {
            return Ok(BTreeMap::new());
        };
        let gw = self.gw;
        let config = self.config.anonymizer.clone();
        let masks = self.masks.clone();
        self.stage("anonymized", move |doc| {
            let r = match (method, &backbone) {
                (Method::ExternalMask, _) => {
                    let spans = masks.get(&doc.doc_id).cloned().unwrap_or_default();
                    let mut run = apply_external_masks(doc, &spans);
                    if let Ok(run) = &mut run {
                        if spans.is_empty() {
                            run.diagnostics.push("no spans in the mask list; text unchanged".into());
                        }
                    }
                    run
                }
                (Method::DeidGpt, Some(tag)) => deid_gpt(gw, doc, tag, &config),
                (Method::DpPrompt, Some(tag)) => dp_prompt(gw, doc, tag, &config),
                (Method::Adversarial, Some(tag)) => adversarial_anonymize(gw, doc, tag, AaTarget::for_source(doc.source), &config),
                (_, None) => unreachable!("checked in open"),
            };
            r.map_err(|e| e.to_string())
        })
    }

    pub fn texts(&self, runs: &BTreeMap<String, AnonymizationRun>) -> BTreeMap<String, String> {
        self.docs
            .iter()
            .map(|d| {
                let t = match self.config.source {
                    TextSource::Original => d.text.clone(),
                    _ => runs.get(&d.doc_id).map(|r| r.anonymized_text.clone()).unwrap_or_default(),
                };
                (d.doc_id.clone(), t)
            })
            .collect()
    }

    fn require<'t>(tag: &'t Option<ModelTag>, what: &str) -> Result<&'t ModelTag, PipelineError> {
        tag.as_ref().ok_or_else(|| PipelineError::User(format!("--{what} is required for this stage")))
    }

    pub fn infer(&mut self, texts: &BTreeMap<String, String>) -> Result<BTreeMap<String, InferenceResult>, PipelineError> {
        let tag = Self::require(&self.config.adversary, "adversary")?.clone();
        let gw = self.gw;
        self.stage("inference", move |doc| {
            let text = texts.get(&doc.doc_id).ok_or("no anonymized text")?;
            Adversary::new(gw, tag.clone()).run(text).map_err(|e| e.to_string())
        })
    }

    pub fn align(
        &mut self,
        texts: &BTreeMap<String, String>,
        inferences: &BTreeMap<String, InferenceResult>,
    ) -> Result<BTreeMap<String, Reviewed<AlignmentResult>>, PipelineError> {
        let tag = Self::require(&self.config.judge, "judge")?.clone();
        let gw = self.gw;
        let floor = self.config.scoring.pred_certainty_floor;
        let original = self.config.source == TextSource::Original;
        self.stage("alignment", move |doc| {
            let inference = inferences.get(&doc.doc_id).ok_or("no inference result")?;
            let text = texts.get(&doc.doc_id).ok_or("no anonymized text")?;
            let gt = gt_annotation(doc);
            let pred = pred_annotation(inference, floor);
            if gt.is_empty() {
                let pred_ids: Vec<u32> = pred.iter().map(|s| s.id).collect();
                return Ok(Reviewed {
                    value: AlignmentResult::all_unmatched(&[], &pred_ids, "document has no ground-truth subjects"),
                    review: vec![],
                });
            }
            let variant = if original {
                TextVariant::Same { text: &doc.text }
            } else {
                TextVariant::Anonymized {
                    original: &doc.text,
                    anonymized: text,
                }
            };
            let judge = Judge::for_doc(gw, tag.clone(), &doc.doc_id);
            let value = align_subjects(&judge, variant, &gt, &pred).map_err(|e| e.to_string())?;
            Ok(Reviewed {
                value,
                review: judge.take_review(),
            })
        })
    }

    pub fn score(
        &mut self,
        inferences: &BTreeMap<String, InferenceResult>,
        alignments: &BTreeMap<String, Reviewed<AlignmentResult>>,
    ) -> Result<BTreeMap<String, Reviewed<Vec<ScoreCell>>>, PipelineError> {
        let tag = Self::require(&self.config.judge, "judge")?.clone();
        let gw = self.gw;
        let scoring = self.config.scoring.clone();
        self.stage("scores", move |doc| {
            let inference = inferences.get(&doc.doc_id).ok_or("no inference result")?;
            let alignment = alignments.get(&doc.doc_id).ok_or("no alignment")?;
            let judge = Judge::for_doc(gw, tag.clone(), &doc.doc_id);
            let cells = score_document(doc, &alignment.value, inference, &judge, &scoring).map_err(|e| e.to_string())?;
            Ok(Reviewed {
                value: cells,
                review: judge.take_review(),
            })
        })
    }

    /// Readability and meaning judgments plus ROUGE-L. Skipped when the
    /// adversary reads the original text.
    pub fn utility(&mut self, texts: &BTreeMap<String, String>) -> Result<BTreeMap<String, Reviewed<UtilityRecord>>, PipelineError> {
        if self.config.source == TextSource::Original {
            return Ok(BTreeMap::new());
        }
        let tag = Self::require(&self.config.judge, "judge")?.clone();
        let gw = self.gw;
        self.stage("utility", move |doc| {
            let text = texts.get(&doc.doc_id).ok_or("no anonymized text")?;
            let judge = Judge::for_doc(gw, tag.clone(), &doc.doc_id);
            let ask = |name: &str, prompt: String| -> Result<Option<u8>, String> {
                let reply = judge.ask(vec![Message::user(prompt)]).map_err(|e| e.to_string())?;
                let score = parse_judge_score(&reply);
                if score.is_none() {
                    judge.flag("utility", format!("unparseable {name} score"), reply);
                }
                Ok(score)
            };
            let readability = ask("readability", prompts::fill(prompts::UTILITY_READABILITY, &[("text", text)]))?;
            let meaning = ask(
                "meaning",
                prompts::fill(prompts::UTILITY_MEANING, &[("original_text", &doc.text), ("anonymized_text", text)]),
            )?;
            Ok(Reviewed {
                value: UtilityRecord {
                    doc_id: doc.doc_id.clone(),
                    readability,
                    meaning,
                    rouge_l: rouge_l(&doc.text, text),
                },
                review: judge.take_review(),
            })
        })
    }

    /// All stages, then the report files. Completed stages are resumed.
    pub fn evaluate(&mut self) -> Result<RunReport, PipelineError> {
        let adversary = Self::require(&self.config.adversary, "adversary")?.to_string();
        let judge = Self::require(&self.config.judge, "judge")?.to_string();
        let runs = self.anonymize()?;
        let texts = self.texts(&runs);
        let inferences = self.infer(&texts)?;
        let alignments = self.align(&texts, &inferences)?;
        let scores = self.score(&inferences, &alignments)?;
        let utility = self.utility(&texts)?;

        let cells: Vec<ScoreCell> = scores.values().flat_map(|r| r.value.iter().cloned()).collect();
        let alignment_list: Vec<AlignmentResult> = alignments.values().map(|r| r.value.clone()).collect();
        let utility_list: Vec<UtilityRecord> = utility.values().map(|r| r.value.clone()).collect();
        let mask_ranges: BTreeMap<String, Vec<(usize, usize)>> = runs
            .iter()
            .filter_map(|(id, r)| r.masked_ranges.clone().map(|m| (id.clone(), m)))
            .collect();
        // span recall is meaningless when nothing was anonymized
        let span_texts = if self.config.source == TextSource::Original {
            BTreeMap::new()
        } else {
            texts
        };
        let backbone = self.manifest.backbone.clone();
        let metrics = build_report(&ReportInputs {
            label: &self.config.source.label(),
            backbone: backbone.as_deref().unwrap_or("-"),
            documents: &self.docs,
            cells: &cells,
            alignments: &alignment_list,
            anonymized: &span_texts,
            mask_ranges: (!mask_ranges.is_empty()).then_some(&mask_ranges),
            utility: &utility_list,
            group_by: &self.config.group_by,
            token_counting: self.config.token_counting,
        })
        .map_err(|e| PipelineError::Stage {
            stage: "report",
            doc_id: "*".into(),
            message: e.to_string(),
        })?;

        let mut review: Vec<ReviewItem> = alignments
            .values()
            .flat_map(|r| r.review.iter().cloned())
            .chain(scores.values().flat_map(|r| r.review.iter().cloned()))
            .chain(utility.values().flat_map(|r| r.review.iter().cloned()))
            .collect();
        review.sort();
        let review_path = self.out.join(REVIEW_FILE);
        write_jsonl(&review_path, &review).map_err(PipelineError::io(format!("write {}", review_path.display())))?;

        let report = RunReport {
            run_id: self.manifest.run_id.clone(),
            method: self.config.source.label(),
            backbone,
            adversary,
            judge,
            metrics,
        };
        self.write_report(&report)?;
        for name in [REVIEW_FILE, REPORT_JSON, REPORT_TXT] {
            self.note_artifact(name)?;
        }
        Ok(report)
    }

    fn write_report(&self, report: &RunReport) -> Result<(), PipelineError> {
        let json = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
        let p = self.out.join(REPORT_JSON);
        fs::write(&p, json).map_err(PipelineError::io(format!("write {}", p.display())))?;
        let p = self.out.join(REPORT_TXT);
        fs::write(&p, render_text_report(report)).map_err(PipelineError::io(format!("write {}", p.display())))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

/// Human-readable report: headline table, auxiliary metrics, breakdowns.
pub fn render_text_report(report: &RunReport) -> String {
    let m = &report.metrics;
    let mut out = format!(
        "run {}  method {}  backbone {}  adversary {}  judge {}\n\n",
        report.run_id,
        report.method,
        report.backbone.as_deref().unwrap_or("-"),
        report.adversary,
        report.judge
    );
    out += &MetricsReport::table(std::slice::from_ref(m));
    out += &format!(
        "\ndocuments {}  subjects {}  cells {}\nreadability {}  meaning {}  rouge_l {}\ninference accuracy {}  subject match ratio {}\n",
        m.documents,
        m.subjects,
        m.cells,
        opt(m.readability),
        opt(m.meaning),
        opt(m.rouge_l),
        opt(m.inference_accuracy),
        opt(m.subject_match_ratio)
    );
    if !m.breakdowns.is_empty() {
        out += "\n";
        out += &m.breakdown_table();
    }
    if !m.diagnostics.is_empty() {
        out += &format!("\n{} span diagnostics (see report.json)\n", m.diagnostics.len());
    }
    out
}

/// Loads every `report.json` under `path` (a file or a directory tree).
pub fn load_reports(path: &Path) -> Result<Vec<RunReport>, PipelineError> {
    let mut files = Vec::new();
    let mut stack = vec![path.to_path_buf()];
    while let Some(p) = stack.pop() {
        if p.is_dir() {
            let entries = fs::read_dir(&p).map_err(PipelineError::io(format!("read {}", p.display())))?;
            for e in entries {
                stack.push(e.map_err(PipelineError::io(format!("read {}", p.display())))?.path());
            }
        } else if p == path || p.file_name().is_some_and(|n| n == REPORT_JSON) {
            files.push(p);
        }
    }
    files.sort();
    files
        .iter()
        .map(|f| {
            let bytes = fs::read(f).map_err(PipelineError::io(format!("read {}", f.display())))?;
            serde_json::from_slice(&bytes).map_err(|e| PipelineError::User(format!("{}: not a report: {e}", f.display())))
        })
        .collect()
}

/// Pairwise rank correlation of CPR and IPR between adversaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryComparison {
    pub a: String,
    pub b: String,
    pub configurations: usize,
    pub rho_cpr: Option<f64>,
    pub rho_ipr: Option<f64>,
}

/// Each group is one adversary's reports. All groups must cover the same
/// (method, backbone) configurations.
pub fn compare_adversaries(groups: &[(String, Vec<RunReport>)]) -> Result<Vec<AdversaryComparison>, PipelineError> {
    if groups.len() < 2 {
        return Err(PipelineError::User("need at least two report sets".into()));
    }
    type Series = BTreeMap<(String, String), (f64, f64)>;
    let series: Vec<(String, Series)> = groups
        .iter()
        .map(|(name, reports)| {
            let s = reports
                .iter()
                .map(|r| {
                    (
                        (r.method.clone(), r.backbone.clone().unwrap_or_else(|| "-".into())),
                        (r.metrics.cpr, r.metrics.ipr),
                    )
                })
                .collect();
            (name.clone(), s)
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            let (na, sa) = &series[i];
            let (nb, sb) = &series[j];
            let diff: Vec<String> = sa
                .keys()
                .filter(|k| !sb.contains_key(*k))
                .chain(sb.keys().filter(|k| !sa.contains_key(*k)))
                .map(|(m, b)| format!("{m}/{b}"))
                .collect();
            if !diff.is_empty() {
                return Err(PipelineError::User(format!(
                    "{na} and {nb} cover different configurations: {}",
                    diff.join(", ")
                )));
            }
            let (ca, ia): (Vec<f64>, Vec<f64>) = sa.values().copied().unzip();
            let (cb, ib): (Vec<f64>, Vec<f64>) = sb.values().copied().unzip();
            let rho = |x: &[f64], y: &[f64]| crate::metrics::spearman_rho(x, y).map_err(|e| PipelineError::User(e.to_string()));
            out.push(AdversaryComparison {
                a: na.clone(),
                b: nb.clone(),
                configurations: sa.len(),
                rho_cpr: rho(&ca, &cb)?,
                rho_ipr: rho(&ia, &ib)?,
            });
        }
    }
    Ok(out)
}
