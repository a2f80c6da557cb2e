use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{derive_seed, sample_ir_batch, sample_rs_batch, CorpusBundle, Triple};
use crate::model::{load_pretrained_embeddings, ModelParams, ModelShape};
use crate::numerics::{AdamConfig, AdamState, Scalar};
use crate::training::loss::TaskData;
use crate::training::{
    eval_losses, individual_step, ir_eval_triples, joint_step, rs_eval_triples, split_validation,
    StepLosses, TraceRecord, TraceSplit, TrainConfig, TrainMode, TrainTrace, ValidationSplit,
};
use crate::{Error, Result};

/// Negatives drawn per held-out recommendation item in the validation set.
const VALID_RS_NEGATIVES: usize = 4;
/// A validation loss above this multiple of the initial one aborts the run.
const DIVERGENCE_FACTOR: f64 = 10.0;

/// Seed tags; every random stream of a run is derived from `config.seed`.
const TAG_INIT: u64 = 10;
const TAG_SPLIT: u64 = 11;
const TAG_IR_SAMPLER: u64 = 12;
const TAG_RS_SAMPLER: u64 = 13;
const TAG_VALID_IR: u64 = 14;
const TAG_VALID_RS: u64 = 15;
const TAG_DROPOUT: u64 = 16;
const TAG_FIT_IR: u64 = 17;
const TAG_FIT_RS: u64 = 18;

#[derive(Clone, Debug)]
pub struct TrainOutcome<F> {
    /// Parameters at the lowest validation loss.
    pub best: ModelParams<F>,
    /// Parameters after the last step.
    pub last: ModelParams<F>,
    pub trace: TrainTrace,
    pub split: ValidationSplit,
    /// Evaluation-mode loss of `last` on the data it was fitted to.
    pub final_train_loss: StepLosses,
}

/// A failed run keeps the trace recorded up to the failure.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: Error,
    pub trace: TrainTrace,
}

impl fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} trace records)", self.error, self.trace.records.len())
    }
}

impl std::error::Error for TrainFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<TrainFailure> for Error {
    fn from(f: TrainFailure) -> Self {
        f.error
    }
}

impl From<Error> for TrainFailure {
    fn from(error: Error) -> Self {
        TrainFailure {
            error,
            trace: TrainTrace::default(),
        }
    }
}

fn fit_triples(
    split: &ValidationSplit,
    mode: TrainMode,
    n_items: usize,
    seed: u64,
) -> Result<(Vec<Triple>, Vec<Triple>)> {
    let ir = if mode.uses_retrieval() {
        ir_eval_triples(&split.fit_queries, derive_seed(seed, TAG_FIT_IR))
    } else {
        Vec::new()
    };
    let rs = if mode.uses_recommendation() {
        let pairs: Vec<(usize, usize)> = split
            .fit_histories
            .iter()
            .enumerate()
            .flat_map(|(h, hist)| hist.train.iter().map(move |&i| (h, i)))
            .collect();
        rs_eval_triples(&split.fit_histories, &pairs, n_items, 1, derive_seed(seed, TAG_FIT_RS))?
    } else {
        Vec::new()
    };
    Ok((ir, rs))
}

fn record(trace: &mut TrainTrace, step: usize, split: TraceSplit, l: StepLosses) {
    trace.records.push(TraceRecord {
        step,
        split,
        l_ir: l.l_ir,
        l_rs: l.l_rs,
        l_total: l.l_total,
    });
}

/// Train for `config.max_steps` steps in `config.mode`, evaluating the
/// validation loss at step 0, every `eval_every` steps and at the last
/// step, and keep the parameters with the lowest validation loss.
pub fn train<F: Scalar>(
    corpus: &CorpusBundle,
    config: &TrainConfig,
) -> std::result::Result<TrainOutcome<F>, TrainFailure> {
    config.validate()?;
    let seed = config.seed;
    let mode = config.mode;
    let shape = ModelShape::new(&config.model, corpus.vocabulary.len(), corpus.n_users());
    let mut model =
        ModelParams::<F>::init(shape, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_INIT)))?;
    if let Some(path) = &config.model.pretrained_embeddings {
        load_pretrained_embeddings(path, &corpus.vocabulary, &mut model)?;
    }
    let split = split_validation(
        &corpus.queries_train,
        &corpus.histories,
        mode,
        config.validation_fraction,
        derive_seed(seed, TAG_SPLIT),
    )?;
    let n_items = corpus.n_items();
    let fit = TaskData {
        items: &corpus.items,
        queries: &split.fit_queries,
        histories: &split.fit_histories,
    };
    let (fit_ir, fit_rs) = fit_triples(&split, mode, n_items, seed)?;

    let mut trace = TrainTrace::default();
    if config.max_steps == 0 {
        let final_train_loss = eval_losses(&model, fit, &fit_ir, &fit_rs)?;
        return Ok(TrainOutcome {
            best: model.clone(),
            last: model,
            trace,
            split,
            final_train_loss,
        });
    }

    let valid = TaskData {
        items: &corpus.items,
        queries: &split.valid_queries,
        histories: &split.fit_histories,
    };
    let valid_ir = ir_eval_triples(&split.valid_queries, derive_seed(seed, TAG_VALID_IR));
    let valid_rs = rs_eval_triples(
        &split.fit_histories,
        &split.valid_pairs,
        n_items,
        VALID_RS_NEGATIVES,
        derive_seed(seed, TAG_VALID_RS),
    )?;

    let mut ir_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_IR_SAMPLER));
    let mut rs_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_RS_SAMPLER));
    let mut drop_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_DROPOUT));
    let mut adam = AdamState::new(model.params(), AdamConfig::with_learning_rate(config.learning_rate));

    let initial = match eval_losses(&model, valid, &valid_ir, &valid_rs) {
        Ok(l) => l,
        Err(error) => return Err(TrainFailure { error, trace }),
    };
    record(&mut trace, 0, TraceSplit::Valid, initial);
    let mut best = (0, initial.l_total, model.clone());

    for step in 1..=config.max_steps {
        let result = (|| -> Result<StepLosses> {
            let losses = match mode {
                TrainMode::Joint => {
                    let bi = sample_ir_batch(&split.fit_queries, config.ir_batch, &mut ir_rng)?;
                    let br = sample_rs_batch(&split.fit_histories, n_items, config.rs_batch, &mut rs_rng)?;
                    joint_step(&mut model, &mut adam, fit, &bi, &br, config.keep_prob, &mut drop_rng)?
                }
                TrainMode::IrOnly => {
                    let b = sample_ir_batch(&split.fit_queries, config.ir_batch, &mut ir_rng)?;
                    individual_step(&mut model, &mut adam, fit, &b, config.keep_prob, &mut drop_rng)?
                }
                TrainMode::RsOnly => {
                    let b = sample_rs_batch(&split.fit_histories, n_items, config.rs_batch, &mut rs_rng)?;
                    individual_step(&mut model, &mut adam, fit, &b, config.keep_prob, &mut drop_rng)?
                }
            };
            Ok(losses)
        })();
        let losses = match result {
            Ok(l) => l,
            Err(error) => {
                let error = match error {
                    Error::Numeric(m) => Error::Numeric(format!("step {step}: {m}")),
                    other => other,
                };
                return Err(TrainFailure { error, trace });
            }
        };
        record(&mut trace, step, TraceSplit::Train, losses);

        if step % config.eval_every == 0 || step == config.max_steps {
            let v = match eval_losses(&model, valid, &valid_ir, &valid_rs) {
                Ok(v) => v,
                Err(error) => return Err(TrainFailure { error, trace }),
            };
            record(&mut trace, step, TraceSplit::Valid, v);
            if v.l_total > DIVERGENCE_FACTOR * initial.l_total {
                let error = Error::Diverged {
                    step,
                    loss: v.l_total,
                    initial: initial.l_total,
                };
                return Err(TrainFailure { error, trace });
            }
            if v.l_total < best.1 {
                best = (step, v.l_total, model.clone());
            }
        }
    }
    trace.best_step = Some(best.0);
    trace.best_valid_loss = Some(best.1);

    let final_train_loss = match eval_losses(&model, fit, &fit_ir, &fit_rs) {
        Ok(l) => l,
        Err(error) => return Err(TrainFailure { error, trace }),
    };
    Ok(TrainOutcome {
        best: best.2,
        last: model,
        trace,
        split,
        final_train_loss,
    })
}
