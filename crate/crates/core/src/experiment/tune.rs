use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{cluster_rand_index, evaluate, prepare_embeddings, with_job_pool};
use crate::corpus::{split, Dataset, Fractions};
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::{random_rand_index, Partition};
use crate::train::{finetune, pretrain, Checkpoint, TrainConfig};

/// Shuffles used for the random-partition Rand index baseline.
const BASELINE_SHUFFLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuneMode {
    /// Score pre-trained representations by clustering them.
    Pretrain,
    /// Score fine-tuned models on the validation split.
    Finetune,
}

impl std::str::FromStr for TuneMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrain" => Ok(TuneMode::Pretrain),
            "finetune" => Ok(TuneMode::Finetune),
            other => Err(Error::invalid(format!("unknown tune mode {other:?}"))),
        }
    }
}

/// Candidate values per `TrainConfig` field, in file order of keys sorted by name.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: BTreeMap<String, Vec<toml::Value>>,
}

/// Reads a TOML table whose values are arrays of candidates (a scalar is a
/// single candidate).
pub fn parse_grid(text: &str) -> Result<Grid> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut axes = BTreeMap::new();
    for (key, value) in table {
        let values = match value {
            toml::Value::Array(a) => a,
            v => vec![v],
        };
        if values.is_empty() {
            return Err(Error::Config(format!("grid axis {key:?} has no values")));
        }
        axes.insert(key, values);
    }
    if axes.is_empty() {
        return Err(Error::Config("grid is empty".into()));
    }
    Ok(Grid { axes })
}

impl Grid {
    pub fn len(&self) -> usize {
        self.axes.values().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }

    /// Cross product in odometer order, the last key varying fastest.
    pub fn points(&self) -> Vec<Vec<(String, toml::Value)>> {
        let mut out: Vec<Vec<(String, toml::Value)>> = vec![Vec::new()];
        for (key, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((key.clone(), v.clone()));
                        q
                    })
                })
                .collect();
        }
        out
    }
}

fn apply_point(base: &TrainConfig, point: &[(String, toml::Value)]) -> Result<TrainConfig> {
    let mut table = toml::Table::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
    for (k, v) in point {
        // Integers are accepted where floats are expected.
        let v = match (table.get(k), v) {
            (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
            _ => v.clone(),
        };
        table.insert(k.clone(), v);
    }
    TrainConfig::from_toml_str(&toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneRow {
    pub params: Vec<(String, String)>,
    /// Ranking key: Rand index (pre-train mode) or validation macro-F.
    pub score: f64,
    pub macro_p: Option<f64>,
    pub macro_r: Option<f64>,
    pub macro_f: Option<f64>,
    pub accuracy: Option<f64>,
    pub rand_index: Option<f64>,
    /// Mean Rand index of random partitions with the same cluster sizes.
    pub baseline: Option<f64>,
}

/// Evaluates every grid point and returns rows ranked best first (grid
/// order breaks ties).
pub fn tune(
    grid: &Grid,
    ds: &Dataset,
    words: Option<EmbeddingTable>,
    base: &TrainConfig,
    mode: TuneMode,
) -> Result<Vec<TuneRow>> {
    if grid.is_empty() {
        return Err(Error::Config("grid is empty".into()));
    }
    let points = grid.points();
    let configs: Vec<TrainConfig> = points.iter().map(|p| apply_point(base, p)).collect::<Result<_>>()?;
    if mode == TuneMode::Pretrain {
        if let Some(c) = configs.iter().find(|c| !c.pretrain) {
            return Err(Error::Config(format!("preset {} does not pre-train", c.preset)));
        }
    }
    let (words, entities) = prepare_embeddings(ds, words, base)?;

    let eval_point = |(point, cfg): (&Vec<(String, toml::Value)>, &TrainConfig)| -> Result<TuneRow> {
        let params = point.iter().map(|(k, v)| (k.clone(), v.to_string())).collect();
        let mut model = Checkpoint::new(words.clone(), entities.clone(), cfg.clone())?;
        match mode {
            TuneMode::Pretrain => {
                let (fit, held) = split(ds, Fractions::new(0.75, 0.125, 0.125)?, cfg.seed, true)
                    .map(|(a, b, c)| (a, [b.instances, c.instances].concat()))?;
                pretrain(&mut model, &fit.instances)?;
                let (ri, clusters) = cluster_rand_index(&model, &held, cfg.seed)?;
                let labels: Vec<&str> = held.iter().map(|i| i.relation.as_str()).collect();
                let baseline = random_rand_index(&Partition::from_labels(&labels), &clusters, BASELINE_SHUFFLES, cfg.seed)?;
                Ok(TuneRow {
                    params,
                    score: ri,
                    macro_p: None,
                    macro_r: None,
                    macro_f: None,
                    accuracy: None,
                    rand_index: Some(ri),
                    baseline: Some(baseline),
                })
            }
            TuneMode::Finetune => {
                let (train, val, _) = split(ds, Fractions::STANDARD, cfg.seed, true)?;
                if cfg.pretrain {
                    pretrain(&mut model, &train.instances)?;
                }
                finetune(&mut model, &train.instances, &val.instances)?;
                let s = evaluate(&model, &val.instances, None)?;
                Ok(TuneRow {
                    params,
                    score: s.macro_avg.f1,
                    macro_p: Some(s.macro_avg.precision),
                    macro_r: Some(s.macro_avg.recall),
                    macro_f: Some(s.macro_avg.f1),
                    accuracy: Some(s.accuracy),
                    rand_index: None,
                    baseline: None,
                })
            }
        }
    };

    let mut rows: Vec<TuneRow> = with_job_pool(|| {
        points
            .par_iter()
            .zip(configs.par_iter())
            .map(eval_point)
            .collect::<Result<Vec<_>>>()
    })??;
    rows.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(rows)
}
