//! Classification metrics, k-means and the Rand index.

mod cluster;
mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cluster::{kmeans, rand_index, random_rand_index, KMeans, Partition};
pub use report::{read_metrics_csv, write_metrics_csv, MetricsRow, METRICS_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelCounts {
    pub extracted: usize,
    pub correct: usize,
    pub gold: usize,
}

/// Per-label extracted/correct/gold counts. Only labels occurring in the
/// gold data or the predictions are present.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    labels: BTreeMap<String, LabelCounts>,
}

impl ConfusionCounts {
    pub fn from_predictions<S: AsRef<str>, T: AsRef<str>>(predicted: &[S], gold: &[T]) -> Result<Self> {
        if predicted.len() != gold.len() {
            return Err(Error::Dimension {
                expected: gold.len(),
                actual: predicted.len(),
            });
        }
        let mut c = ConfusionCounts::default();
        for (p, g) in predicted.iter().zip(gold) {
            let (p, g) = (p.as_ref(), g.as_ref());
            c.entry(p).extracted += 1;
            c.entry(g).gold += 1;
            if p == g {
                c.entry(p).correct += 1;
            }
        }
        Ok(c)
    }

    /// Builds counts directly; fails if `correct` exceeds either other count.
    pub fn from_counts<S: Into<String>>(counts: impl IntoIterator<Item = (S, LabelCounts)>) -> Result<Self> {
        let mut labels = BTreeMap::new();
        for (label, lc) in counts {
            let label = label.into();
            if lc.correct > lc.extracted.min(lc.gold) {
                return Err(Error::invalid(format!("label {label:?}: correct exceeds extracted or gold")));
            }
            if lc.extracted > 0 || lc.gold > 0 {
                labels.insert(label, lc);
            }
        }
        Ok(ConfusionCounts { labels })
    }

    fn entry(&mut self, label: &str) -> &mut LabelCounts {
        self.labels.entry(label.to_string()).or_default()
    }

    pub fn get(&self, label: &str) -> Option<LabelCounts> {
        self.labels.get(label).copied()
    }

    pub fn labels(&self) -> impl Iterator<Item = (&str, &LabelCounts)> {
        self.labels.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// The same counts with one label dropped, e.g. a `no_relation` class.
    pub fn without(&self, label: &str) -> Self {
        let mut c = self.clone();
        c.labels.remove(label);
        c
    }

    pub fn totals(&self) -> LabelCounts {
        self.labels.values().fold(LabelCounts::default(), |acc, c| LabelCounts {
            extracted: acc.extracted + c.extracted,
            correct: acc.correct + c.correct,
            gold: acc.gold + c.gold,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Average {
    /// Pool counts over all labels.
    Micro,
    /// Average per-label values with equal weight.
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f_measure(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl Prf {
    fn from_counts(c: &LabelCounts) -> Self {
        let precision = ratio(c.correct, c.extracted);
        let recall = ratio(c.correct, c.gold);
        Prf {
            precision,
            recall,
            f1: f_measure(precision, recall),
        }
    }
}

/// Precision, recall and F1. Macro F1 is the mean of per-label F1 values;
/// empty denominators count as 0.
pub fn prf(counts: &ConfusionCounts, mode: Average) -> Prf {
    match mode {
        Average::Micro => Prf::from_counts(&counts.totals()),
        Average::Macro => {
            let per: Vec<Prf> = counts.labels.values().map(Prf::from_counts).collect();
            if per.is_empty() {
                return Prf::default();
            }
            let n = per.len() as f64;
            Prf {
                precision: per.iter().map(|p| p.precision).sum::<f64>() / n,
                recall: per.iter().map(|p| p.recall).sum::<f64>() / n,
                f1: per.iter().map(|p| p.f1).sum::<f64>() / n,
            }
        }
    }
}

pub fn per_label(counts: &ConfusionCounts) -> Vec<(String, Prf)> {
    counts
        .labels
        .iter()
        .map(|(l, c)| (l.clone(), Prf::from_counts(c)))
        .collect()
}

/// Fraction of positions where prediction and gold agree.
pub fn accuracy<S: PartialEq<T>, T>(predicted: &[S], gold: &[T]) -> Result<f64> {
    if predicted.len() != gold.len() {
        return Err(Error::Dimension {
            expected: gold.len(),
            actual: predicted.len(),
        });
    }
    if gold.is_empty() {
        return Ok(0.0);
    }
    let hits = predicted.iter().zip(gold).filter(|(p, g)| *p == *g).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Everything reported for one evaluation split.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub macro_avg: Prf,
    pub micro: Prf,
    pub accuracy: f64,
    pub per_label: Vec<(String, Prf)>,
    pub counts: ConfusionCounts,
}

/// Scores predictions; `exclude` removes one label from the P/R/F averages
/// but not from accuracy.
pub fn summarize<S: AsRef<str>, T: AsRef<str>>(predicted: &[S], gold: &[T], exclude: Option<&str>) -> Result<Summary> {
    let mut counts = ConfusionCounts::from_predictions(predicted, gold)?;
    if let Some(x) = exclude {
        counts = counts.without(x);
    }
    let p: Vec<&str> = predicted.iter().map(AsRef::as_ref).collect();
    let g: Vec<&str> = gold.iter().map(AsRef::as_ref).collect();
    Ok(Summary {
        macro_avg: prf(&counts, Average::Macro),
        micro: prf(&counts, Average::Micro),
        accuracy: accuracy(&p, &g)?,
        per_label: per_label(&counts),
        counts,
    })
}
