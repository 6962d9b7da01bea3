use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backend::{Encoder, EncoderBackend};
use crate::dataset::Dataset;
use crate::ensemble::PredictionRecord;
use crate::imbalance::{resample, weighted_cross_entropy_grad, weights_for};
use crate::label::{argmax_severity, NUM_CLASSES};
use crate::metrics::macro_f1;
use crate::truncation::{truncate_ids, TokenBudgetPlan, TokenId};

use super::{derive_seed, AdamW, EarlyStopping, FoldResult, LinearHead, TrainError, TrialConfig};

const STREAM_INIT: u64 = 1;
const STREAM_HEAD: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_DROPOUT: u64 = 4;
const STREAM_RESAMPLE: u64 = 5;

/// A trained encoder + head pair, restored to its best dev epoch.
pub struct TrainedModel {
    encoder: Box<dyn Encoder>,
    head: LinearHead,
    plan: TokenBudgetPlan,
    model_id: String,
    fold: usize,
}

impl TrainedModel {
    pub fn logits_for_text(&self, text: &str) -> Result<Vec<f64>, TrainError> {
        let tokens = prepare_tokens(self.encoder.as_ref(), text, &self.plan)?;
        Ok(self.head.logits(&self.encoder.encode(&tokens)?))
    }

    /// One prediction record per example, in dataset order.
    pub fn predict(&self, dataset: &Dataset) -> Result<Vec<PredictionRecord>, TrainError> {
        dataset
            .examples()
            .iter()
            .map(|ex| {
                Ok(PredictionRecord {
                    example_id: ex.id.clone(),
                    model_id: self.model_id.clone(),
                    fold: self.fold,
                    logits: self.logits_for_text(&ex.text)?,
                })
            })
            .collect()
    }
}

pub struct FitOutput {
    pub result: FoldResult,
    pub model: TrainedModel,
}

fn prepare_tokens(encoder: &dyn Encoder, text: &str, plan: &TokenBudgetPlan) -> Result<Vec<TokenId>, TrainError> {
    Ok(truncate_ids(encoder.tokenize(text)?.as_slice(), plan))
}

/// Train on `train`, early-stopping on `dev` macro-F1.
///
/// `model_id` and `fold_index` label the emitted prediction records;
/// `fold_index` also selects an independent RNG stream so folds of one
/// run do not share shuffles or dropout masks.
pub fn fit(
    config: &TrialConfig,
    train: &Dataset,
    dev: &Dataset,
    backend: &dyn EncoderBackend,
    model_id: &str,
    fold_index: usize,
) -> Result<FitOutput, TrainError> {
    config.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyDataset("training"));
    }
    if dev.is_empty() {
        return Err(TrainError::EmptyDataset("dev"));
    }
    let seed = derive_seed(config.seed, fold_index as u64);
    let mut encoder = backend.build(derive_seed(seed, STREAM_INIT))?;
    let train = resample(train, config.imbalance_strategy, derive_seed(seed, STREAM_RESAMPLE));
    let weights = weights_for(&train, config.imbalance_strategy);

    let plan = config.truncation;
    let train_tokens: Vec<Vec<TokenId>> = train
        .examples()
        .iter()
        .map(|ex| prepare_tokens(encoder.as_ref(), &ex.text, &plan))
        .collect::<Result<_, _>>()?;
    let dev_tokens: Vec<Vec<TokenId>> = dev
        .examples()
        .iter()
        .map(|ex| prepare_tokens(encoder.as_ref(), &ex.text, &plan))
        .collect::<Result<_, _>>()?;
    let train_labels: Vec<usize> = train.labels();
    let dev_labels: Vec<usize> = dev.labels();

    // frozen encoders: features never change, compute them once
    let trainable = encoder.is_trainable();
    let encode_all = |enc: &dyn Encoder, seqs: &[Vec<TokenId>]| -> Result<Vec<Vec<f64>>, TrainError> {
        seqs.iter().map(|t| enc.encode(t).map_err(TrainError::from)).collect()
    };
    let train_cache = if trainable { None } else { Some(encode_all(encoder.as_ref(), &train_tokens)?) };
    let dev_cache = if trainable { None } else { Some(encode_all(encoder.as_ref(), &dev_tokens)?) };

    let dim = encoder.dim();
    let mut head = LinearHead::new(NUM_CLASSES, dim, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_HEAD)));
    let mut head_opt = AdamW::from_config(head.num_params(), config);
    let mut enc_opt = AdamW::from_config(encoder.params().len(), config);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SHUFFLE));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_DROPOUT));
    let keep = 1.0 - config.task_dropout;

    let mut stopper = EarlyStopping::new(config.es_patience_epochs, config.es_threshold);
    let mut best_head = head.clone();
    let mut best_encoder: Option<Vec<f64>> = None;
    let mut best_epoch = 0;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = 0usize;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch_size) {
            head.zero_grad();
            encoder.zero_grad();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let features = match &train_cache {
                    Some(cache) => cache[i].clone(),
                    None => encoder.encode(&train_tokens[i])?,
                };
                let mask: Vec<f64> = if config.task_dropout > 0.0 {
                    (0..dim).map(|_| if dropout_rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect()
                } else {
                    vec![1.0; dim]
                };
                let dropped: Vec<f64> = features.iter().zip(&mask).map(|(x, m)| x * m).collect();
                let logits = head.logits(&dropped);
                let (loss, mut g_logits) = weighted_cross_entropy_grad(&logits, train_labels[i], &weights)
                    .map_err(|_| TrainError::NonFiniteLoss { epoch, step, loss: f64::NAN })?;
                if !loss.is_finite() {
                    return Err(TrainError::NonFiniteLoss { epoch, step, loss });
                }
                g_logits.iter_mut().for_each(|g| *g *= scale);
                let g_dropped = head.backward(&dropped, &g_logits);
                if trainable {
                    let g_features: Vec<f64> = g_dropped.iter().zip(&mask).map(|(g, m)| g * m).collect();
                    encoder.accumulate_grad(&train_tokens[i], &g_features)?;
                }
            }
            let lr = super::warmup_constant_lr(config.learning_rate, config.warmup_steps, step);
            let (p, g) = head.params_and_grads();
            head_opt.step(p, g, lr);
            if trainable {
                let (p, g) = encoder.params_and_grads();
                enc_opt.step(p, g, lr);
            }
            step += 1;
        }

        let dev_preds: Vec<usize> = match &dev_cache {
            Some(cache) => cache.iter().map(|f| argmax_severity(&head.logits(f))).collect(),
            None => dev_tokens
                .iter()
                .map(|t| Ok(argmax_severity(&head.logits(&encoder.encode(t)?))))
                .collect::<Result<_, TrainError>>()?,
        };
        let score = macro_f1(&dev_labels, &dev_preds)?;
        history.push(score);
        let obs = stopper.observe(score);
        if obs.is_best {
            best_epoch = epoch;
            best_head = head.clone();
            if trainable {
                best_encoder = Some(encoder.params().to_vec());
            }
        }
        log::debug!("{model_id} fold {fold_index} epoch {epoch}: dev macro-F1 {score:.4}");
        if obs.stop {
            break;
        }
    }

    if let Some(params) = best_encoder {
        encoder.params_and_grads().0.copy_from_slice(&params);
    }
    let model = TrainedModel { encoder, head: best_head, plan, model_id: model_id.to_string(), fold: fold_index };
    let predictions = model.predict(dev)?;
    let result = FoldResult {
        fold_index,
        best_dev_macro_f1: stopper.best().unwrap_or(0.0),
        best_epoch,
        epochs_run: history.len(),
        history,
        predictions,
    };
    Ok(FitOutput { result, model })
}

/// [`fit`] with the backend id as model id and fold 0, keeping only the result.
pub fn train_one(
    config: &TrialConfig,
    train: &Dataset,
    dev: &Dataset,
    backend: &dyn EncoderBackend,
) -> Result<FoldResult, TrainError> {
    Ok(fit(config, train, dev, backend, &backend.id(), 0)?.result)
}
