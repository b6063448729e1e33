use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::{all_positive_f1, mean_std, Confusion, MetricsReport};
use crate::error::{Error, Result};
use crate::rng;
use crate::trainer::{fit_head, head_scores, HeadTraining};

/// Train and test row indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class shuffled split with `test_fraction` of each class held out.
pub fn stratified_split(labels: &[bool], test_fraction: f64, seed: u64) -> Split {
    let mut r = rng::stream(rng::stage_seed(seed, "split"), &[]);
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut r);
        let mut n_test = (idx.len() as f64 * test_fraction).round() as usize;
        if idx.len() >= 2 {
            n_test = n_test.clamp(1, idx.len() - 1);
        }
        let n_test = n_test.min(idx.len());
        split.test.extend_from_slice(&idx[..n_test]);
        split.train.extend_from_slice(&idx[n_test..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    split
}

fn both_classes(labels: &[bool], idx: &[usize]) -> bool {
    idx.iter().any(|&i| labels[i]) && idx.iter().any(|&i| !labels[i])
}

/// Train a head on frozen representations once per seed and score the test
/// split at `threshold`. The report's headline metrics are the best run.
pub fn fixed_train_eval(
    representations: &Array2<f64>,
    labels: &[bool],
    split: &Split,
    threshold: f64,
    head: &HeadTraining,
    seeds: &[u64],
) -> Result<MetricsReport> {
    if representations.nrows() != labels.len() {
        return Err(Error::invalid("representations and labels differ in length"));
    }
    if !both_classes(labels, &split.train) || !both_classes(labels, &split.test) {
        return Err(Error::invalid("train and test splits must each contain both classes"));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    let x_train = representations.select(Axis(0), &split.train);
    let y_train: Vec<bool> = split.train.iter().map(|&i| labels[i]).collect();
    let x_test = representations.select(Axis(0), &split.test);
    let y_test: Vec<bool> = split.test.iter().map(|&i| labels[i]).collect();
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let h = fit_head(&x_train, &y_train, &HeadTraining { seed, ..head.clone() })?;
        let scores = head_scores(&h, &x_test);
        runs.push(Confusion::from_scores(&scores, &y_test, threshold).metrics(threshold));
    }
    let f1s: Vec<f64> = runs.iter().map(|r| r.f1).collect();
    let (m, s) = mean_std(&f1s);
    let best = runs
        .iter()
        .copied()
        .fold(None, |b: Option<super::metrics::ClassificationMetrics>, r| match b {
            Some(b) if b.f1 >= r.f1 => Some(b),
            _ => Some(r),
        });
    let prior = y_test.iter().filter(|&&y| y).count() as f64 / y_test.len() as f64;
    Ok(MetricsReport {
        classification: best,
        f1_mean: Some(m),
        f1_std: Some(s),
        runs,
        baseline_f1: Some(all_positive_f1(prior)),
        retrieval: None,
    })
}
