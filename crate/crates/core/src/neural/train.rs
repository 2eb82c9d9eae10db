use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{argmax, Input, Model, ModelConfig, Target};
use super::optim::{Optimizer, OptimizerKind};
use crate::text::EmbeddingTable;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    CrossEntropy,
    MeanSquaredError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// epochs without validation improvement before stopping
    pub patience: usize,
    pub objective: Objective,
    pub optimizer: OptimizerKind,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 10,
            batch_size: 16,
            seed: 0,
            patience: 3,
            objective: Objective::CrossEntropy,
            optimizer: OptimizerKind::Adam,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, model: &ModelConfig) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput("learning rate must be a non-negative number".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidInput("epochs and batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidInput("validation fraction must lie in [0, 1)".into()));
        }
        let wants_mse = model.is_regression();
        if wants_mse != (self.objective == Objective::MeanSquaredError) {
            return Err(Error::InvalidInput(
                "objective must be mean squared error for regression and cross entropy for classification".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub input: Input,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: Model,
    pub trace: Vec<EpochLog>,
    /// epoch whose parameters were kept
    pub best_epoch: usize,
    pub train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
}

fn split(examples: &[Example]) -> (Vec<Input>, Vec<Target>) {
    examples.iter().map(|e| (e.input.clone(), e.target)).unzip()
}

/// Mean loss without dropout.
pub fn evaluate_loss(model: &Model, examples: &[Example]) -> Result<f64> {
    let (x, y) = split(examples);
    model.loss(&x, &y, None)
}

pub fn train(model_config: &ModelConfig, config: &TrainConfig, embeddings: &EmbeddingTable, data: &[Example]) -> Result<Trained> {
    if data.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut model = Model::new(model_config.clone(), embeddings, seed::derive(config.seed, 0))?;
    config.validate(model.config())?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut seed::rng(seed::derive(config.seed, 1)));
    let mut n_val = (config.validation_fraction * data.len() as f64).floor() as usize;
    if n_val >= data.len() {
        n_val = 0;
    }
    let validation: Vec<Example> = order[..n_val].iter().map(|&i| data[i].clone()).collect();
    let mut train_idx: Vec<usize> = order[n_val..].to_vec();
    train_idx.sort_unstable();
    let train_ids: Vec<String> = train_idx.iter().map(|&i| data[i].id.clone()).collect();

    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate);
    let mut shuffle_rng = seed::rng(seed::derive(config.seed, 2));
    let mut best: Option<(f64, usize, Model)> = None;
    let mut stale = 0;
    let mut trace = Vec::with_capacity(config.epochs);
    let mut step: u64 = 0;
    for epoch in 1..=config.epochs {
        train_idx.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for chunk in train_idx.chunks(config.batch_size) {
            let x: Vec<Input> = chunk.iter().map(|&i| data[i].input.clone()).collect();
            let y: Vec<Target> = chunk.iter().map(|&i| data[i].target).collect();
            let loss = model.loss_and_backward(&x, &y, Some(seed::derive(config.seed, 1_000 + step)))?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            optimizer.step(&mut model);
            total += loss * chunk.len() as f64;
            step += 1;
        }
        let train_loss = total / train_idx.len() as f64;
        let validation_loss = if validation.is_empty() {
            None
        } else {
            let v = evaluate_loss(&model, &validation)?;
            if !v.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            Some(v)
        };
        trace.push(EpochLog {
            epoch,
            train_loss,
            validation_loss,
        });
        let score = validation_loss.unwrap_or(train_loss);
        match &best {
            Some((b, _, _)) if score >= *b => {
                stale += 1;
                if validation_loss.is_some() && stale >= config.patience.max(1) {
                    break;
                }
            }
            _ => {
                best = Some((score, epoch, model.clone()));
                stale = 0;
            }
        }
    }
    let (best_epoch, model) = if validation.is_empty() {
        (trace.len(), model)
    } else {
        let (_, e, m) = best.expect("at least one epoch ran");
        (e, m)
    };
    let mut model = model;
    for (_, p) in model.params_mut() {
        p.clear_grad();
    }
    Ok(Trained {
        model,
        trace,
        best_epoch,
        train_ids,
        validation_ids: validation.iter().map(|e| e.id.clone()).collect(),
    })
}

pub fn accuracy(model: &Model, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut hits = 0usize;
    for e in examples {
        let Target::Class(c) = e.target else {
            return Err(Error::InvalidInput("accuracy needs class targets".into()));
        };
        if argmax(&model.predict(&e.input)?) == c {
            hits += 1;
        }
    }
    Ok(hits as f64 / examples.len() as f64)
}
