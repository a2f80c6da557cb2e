use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cli::{write_atomic, write_all_atomic, Checkpoint, DataSource, RunConfig};
use crate::corpus::{generate_synthetic_world, load_metadata, load_reviews, CorpusBundle};
use crate::eval::{compare, comparison_table, evaluate, Comparison, EvalReport, Side};
use crate::model::ModelParams;
use crate::training::{grid_search, train, tsv_row, TrainConfig, TrainMode, TrainTrace};
use crate::{Error, Result};

pub const CORPUS_FILE: &str = "corpus.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

/// Counts of a prepared corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub reviews: usize,
    pub items: usize,
    pub users: usize,
    pub queries: usize,
    pub queries_train: usize,
    pub queries_test: usize,
    pub vocabulary: usize,
    pub vocabulary_fingerprint: String,
    pub rs_train_pairs: usize,
    pub rs_test_pairs: usize,
    pub excluded_items: usize,
    pub dropped_queries: usize,
    pub malformed_lines: usize,
}

impl Manifest {
    pub fn of(corpus: &CorpusBundle) -> Self {
        let s = &corpus.stats;
        Manifest {
            reviews: s.reviews,
            items: corpus.n_items(),
            users: corpus.n_users(),
            queries: corpus.queries_train.len() + corpus.queries_test.len(),
            queries_train: corpus.queries_train.len(),
            queries_test: corpus.queries_test.len(),
            vocabulary: corpus.vocabulary.len(),
            vocabulary_fingerprint: corpus.vocabulary.fingerprint(),
            rs_train_pairs: corpus.histories.iter().map(|h| h.train.len()).sum(),
            rs_test_pairs: corpus.histories.iter().map(|h| h.test.len()).sum(),
            excluded_items: s.excluded_items,
            dropped_queries: s.dropped_queries,
            malformed_lines: s.malformed_lines,
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Build the corpus described by `config.data` and `config.corpus`.
pub fn build_corpus(config: &RunConfig) -> Result<CorpusBundle> {
    match config.data.source {
        DataSource::Synthetic => {
            Ok(generate_synthetic_world(&config.data.synthetic, &config.corpus, config.seed)?.bundle)
        }
        DataSource::Files => {
            let missing = || Error::Config("data.reviews and data.metadata are required".into());
            let reviews = load_reviews(config.data.reviews.as_ref().ok_or_else(missing)?)?;
            let metadata = load_metadata(config.data.metadata.as_ref().ok_or_else(missing)?)?;
            let mut corpus =
                CorpusBundle::from_records(&reviews.records, &metadata.records, &config.corpus, config.seed)?;
            corpus.stats.malformed_lines = reviews.malformed_lines.len() + metadata.malformed_lines.len();
            Ok(corpus)
        }
    }
}

/// Build and persist the corpus, its manifest and the resolved config.
/// Nothing is written unless every step succeeds.
pub fn cmd_prepare(config: &RunConfig) -> Result<Manifest> {
    let corpus = build_corpus(config)?;
    let manifest = Manifest::of(&corpus);
    let out = &config.out;
    write_all_atomic(&[
        (out.join(CORPUS_FILE), serde_json::to_vec(&corpus).map_err(|e| Error::Data(e.to_string()))?),
        (out.join(MANIFEST_FILE), json(&manifest)?),
        (out.join(CONFIG_FILE), config.to_toml()?.into_bytes()),
    ])?;
    Ok(manifest)
}

/// Read the corpus written by `prepare` into `dir`.
pub fn load_corpus(dir: &Path) -> Result<CorpusBundle> {
    let path = dir.join(CORPUS_FILE);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn trace_tsv(trace: &TrainTrace) -> Vec<u8> {
    let mut bytes = Vec::new();
    trace.write_tsv(&mut bytes).expect("writing to memory");
    bytes
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub mode: TrainMode,
    pub best_step: Option<usize>,
    pub best_valid_loss: Option<f64>,
    pub best_checkpoint: PathBuf,
    pub last_checkpoint: PathBuf,
    pub trace: PathBuf,
}

fn checkpoint(config: &RunConfig, corpus: &CorpusBundle, step: usize, model: ModelParams<f32>) -> Checkpoint<f32> {
    Checkpoint {
        step,
        config: config.clone(),
        vocabulary: corpus.vocabulary.terms().to_vec(),
        users: corpus.user_ids.clone(),
        model,
    }
}

/// Train `config.training` on the prepared corpus and write
/// `<out>/<mode>/{best.ckpt,last.ckpt,trace.tsv,config.toml}`. A diverged
/// run still writes its trace before failing.
pub fn cmd_train(config: &RunConfig) -> Result<TrainSummary> {
    let corpus = load_corpus(&config.out)?;
    let mode = config.training.mode;
    let dir = config.out.join(mode.name());
    let trace_path = dir.join("trace.tsv");
    let outcome = match train::<f32>(&corpus, &config.training) {
        Ok(o) => o,
        Err(failure) => {
            write_atomic(&trace_path, &trace_tsv(&failure.trace))?;
            return Err(failure.error);
        }
    };
    let best_step = outcome.trace.best_step;
    let best = checkpoint(config, &corpus, best_step.unwrap_or(0), outcome.best);
    let last = checkpoint(config, &corpus, config.training.max_steps, outcome.last);
    let summary = TrainSummary {
        mode,
        best_step,
        best_valid_loss: outcome.trace.best_valid_loss,
        best_checkpoint: dir.join("best.ckpt"),
        last_checkpoint: dir.join("last.ckpt"),
        trace: trace_path,
    };
    write_all_atomic(&[
        (summary.best_checkpoint.clone(), best.to_bytes()?),
        (summary.last_checkpoint.clone(), last.to_bytes()?),
        (summary.trace.clone(), trace_tsv(&outcome.trace)),
        (dir.join(CONFIG_FILE), config.to_toml()?.into_bytes()),
    ])?;
    Ok(summary)
}

/// Header note for a side the checkpoint's mode never trained.
pub fn untrained_side_note(mode: TrainMode, side: Side) -> Option<String> {
    let trained = match side {
        Side::Retrieval => mode.uses_retrieval(),
        Side::Recommendation => mode.uses_recommendation(),
    };
    (!trained).then(|| format!("untrained {} path: checkpoint was trained in mode {}", side.name(), mode.name()))
}

/// Evaluate a checkpoint against the prepared corpus in `config.out` and
/// write the report to `report` (default `<out>/eval/<stem>.<side>.tsv`).
pub fn cmd_eval(config: &RunConfig, checkpoint: &Path, side: Side, report: Option<&Path>) -> Result<EvalReport> {
    let corpus = load_corpus(&config.out)?;
    let ckpt = Checkpoint::<f32>::load(checkpoint)?;
    let (found, expected) = (ckpt.vocabulary_fingerprint(), corpus.vocabulary.fingerprint());
    if found != expected {
        return Err(Error::VocabularyMismatch { checkpoint: found, corpus: expected });
    }
    if ckpt.users != corpus.user_ids {
        return Err(Error::Data("checkpoint user table differs from the corpus".into()));
    }
    let mut result = evaluate(&ckpt.model, &corpus, side, &config.eval)?;
    let mode = ckpt.config.training.mode;
    result.notes.push(format!("checkpoint: {} (mode {}, step {})", checkpoint.display(), mode, ckpt.step));
    result.notes.extend(untrained_side_note(mode, side));
    let path = match report {
        Some(p) => p.to_path_buf(),
        None => {
            let stem = checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("checkpoint");
            config.out.join("eval").join(format!("{}_{stem}.{}.tsv", mode.name(), side.name()))
        }
    };
    write_atomic(&path, result.to_text().as_bytes())?;
    Ok(result)
}

/// Header of the loss-curve file: one training row per step per mode.
pub const CURVES_HEADER: &str = "mode\tstep\tl_ir\tl_rs\tl_total\tsplit";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeRun {
    pub config: TrainConfig,
    pub best_step: Option<usize>,
    pub best_valid_loss: Option<f64>,
    /// Recommendation loss of the final parameters on the fit triples.
    pub final_train_l_rs: Option<f64>,
    pub final_train_l_ir: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub runs: Vec<ModeRun>,
    pub retrieval: Comparison,
    pub recommendation: Comparison,
    pub table: String,
}

/// Select a configuration per mode, train all three modes, evaluate both
/// sides and write `<out>/compare/`: the table, the comparison, per-mode
/// reports and checkpoints, and the loss curves.
pub fn cmd_compare(config: &RunConfig) -> Result<CompareSummary> {
    let corpus = load_corpus(&config.out)?;
    let dir = config.out.join("compare");
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    let mut curves = format!("{CURVES_HEADER}\n");
    let mut runs = Vec::new();
    let mut reports = std::collections::HashMap::new();
    for mode in TrainMode::ALL {
        let base = TrainConfig { mode, ..config.training.clone() };
        let selected = if config.grid.enabled {
            let search = grid_search(&corpus, &base, &config.grid.grids(), config.grid.budget)?;
            files.push((dir.join(format!("{}_grid.json", mode.name())), json(&search)?));
            search.best
        } else {
            base
        };
        let outcome = train::<f32>(&corpus, &selected)?;
        for r in outcome.trace.train_records() {
            let _ = writeln!(curves, "{}\t{}", mode.name(), tsv_row(r));
        }
        for side in [Side::Retrieval, Side::Recommendation] {
            if untrained_side_note(mode, side).is_some() {
                continue;
            }
            let report = evaluate(&outcome.best, &corpus, side, &config.eval)?;
            files.push((dir.join(format!("{}.{}.tsv", mode.name(), side.name())), report.to_text().into_bytes()));
            reports.insert((mode, side), report);
        }
        let mut run_config = config.clone();
        run_config.training = selected.clone();
        let best_step = outcome.trace.best_step;
        files.push((
            dir.join(format!("{}.ckpt", mode.name())),
            checkpoint(&run_config, &corpus, best_step.unwrap_or(0), outcome.best).to_bytes()?,
        ));
        runs.push(ModeRun {
            config: selected,
            best_step,
            best_valid_loss: outcome.trace.best_valid_loss,
            final_train_l_rs: outcome.final_train_loss.l_rs,
            final_train_l_ir: outcome.final_train_loss.l_ir,
        });
    }
    let report = |m, s| &reports[&(m, s)];
    let retrieval = compare(report(TrainMode::Joint, Side::Retrieval), report(TrainMode::IrOnly, Side::Retrieval))?;
    let recommendation = compare(
        report(TrainMode::Joint, Side::Recommendation),
        report(TrainMode::RsOnly, Side::Recommendation),
    )?;
    let table = comparison_table(&[("Retrieval", &retrieval), ("Recommendation", &recommendation)]);
    let summary = CompareSummary { runs, retrieval, recommendation, table };
    files.push((dir.join("table.txt"), summary.table.clone().into_bytes()));
    files.push((dir.join("curves.tsv"), curves.into_bytes()));
    files.push((dir.join("comparison.json"), json(&summary)?));
    files.push((dir.join(CONFIG_FILE), config.to_toml()?.into_bytes()));
    write_all_atomic(&files)?;
    Ok(summary)
}
