use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::model::{ModelConfig, Target};
use super::train::{accuracy, train, Example, TrainConfig};
use crate::analysis::spearman;
use crate::text::EmbeddingTable;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Spearman,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Spearman => "spearman",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_size: usize,
    /// NaN when the metric is undefined on this fold (e.g. constant predictions)
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub metric: Metric,
    pub folds: Vec<FoldResult>,
    /// mean over folds with a defined value
    pub mean: f64,
}

impl CvReport {
    /// Tab-separated `fold, metric, value`, then the mean.
    pub fn to_table(&self) -> String {
        let mut out = String::from("fold\tmetric\tvalue\n");
        for f in &self.folds {
            out.push_str(&format!("{}\t{}\t{:.6}\n", f.fold, self.metric.name(), f.value));
        }
        out.push_str(&format!("mean\t{}\t{:.6}\n", self.metric.name(), self.mean));
        out
    }
}

/// Test-index sets. With `strata`, each stratum is shuffled and dealt
/// round-robin so every fold gets its share of every class; without,
/// a shuffled order is cut into contiguous slices.
pub fn fold_assignment(n: usize, strata: Option<&[usize]>, folds: usize, seed_value: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || n < folds {
        return Err(Error::DatasetTooSmall { size: n, folds });
    }
    let mut rng = seed::rng(seed_value);
    let mut out = vec![Vec::new(); folds];
    match strata {
        Some(s) => {
            if s.len() != n {
                return Err(Error::LengthMismatch { left: n, right: s.len() });
            }
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, c) in s.iter().enumerate() {
                groups.entry(*c).or_default().push(i);
            }
            let mut next = 0;
            for (_, mut members) in groups {
                members.shuffle(&mut rng);
                for i in members {
                    out[next % folds].push(i);
                    next += 1;
                }
            }
        }
        None => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            for f in 0..folds {
                out[f] = order[f * n / folds..(f + 1) * n / folds].to_vec();
            }
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

/// Runs `run(fold, train, test, fold_seed)` for every fold in parallel.
pub fn cross_validate_with<F>(
    n: usize,
    strata: Option<&[usize]>,
    folds: usize,
    seed_value: u64,
    metric: Metric,
    run: F,
) -> Result<CvReport>
where
    F: Fn(usize, &[usize], &[usize], u64) -> Result<f64> + Sync,
{
    let tests = fold_assignment(n, strata, folds, seed::derive(seed_value, 0xF01D))?;
    let values: Vec<f64> = tests
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            let mut in_test = vec![false; n];
            test.iter().for_each(|&i| in_test[i] = true);
            let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
            run(f, &train, test, seed::derive(seed_value, f as u64))
        })
        .collect::<Result<_>>()?;
    let defined: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let mean = if defined.is_empty() {
        f64::NAN
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    };
    Ok(CvReport {
        metric,
        folds: values
            .into_iter()
            .zip(&tests)
            .enumerate()
            .map(|(fold, (value, t))| FoldResult {
                fold,
                test_size: t.len(),
                value,
            })
            .collect(),
        mean,
    })
}

/// Stratified accuracy for classifiers, Spearman correlation for regressors.
pub fn cross_validate(
    model_config: &ModelConfig,
    config: &TrainConfig,
    embeddings: &EmbeddingTable,
    data: &[Example],
    folds: usize,
) -> Result<CvReport> {
    let regression = model_config.is_regression();
    let strata: Option<Vec<usize>> = (!regression).then(|| {
        data.iter()
            .map(|e| match e.target {
                Target::Class(c) => c,
                Target::Score(_) => 0,
            })
            .collect()
    });
    let metric = if regression { Metric::Spearman } else { Metric::Accuracy };
    cross_validate_with(data.len(), strata.as_deref(), folds, config.seed, metric, |_, train_idx, test_idx, fold_seed| {
        let train_set: Vec<Example> = train_idx.iter().map(|&i| data[i].clone()).collect();
        let test_set: Vec<Example> = test_idx.iter().map(|&i| data[i].clone()).collect();
        let cfg = TrainConfig {
            seed: fold_seed,
            ..config.clone()
        };
        let trained = train(model_config, &cfg, embeddings, &train_set)?;
        if regression {
            let mut pred = Vec::with_capacity(test_set.len());
            let mut gold = Vec::with_capacity(test_set.len());
            for e in &test_set {
                pred.push(trained.model.predict(&e.input)?[0]);
                if let Target::Score(y) = e.target {
                    gold.push(y);
                }
            }
            Ok(spearman(&pred, &gold).unwrap_or(f64::NAN))
        } else {
            accuracy(&trained.model, &test_set)
        }
    })
}
