//! Schedule-driven experiment runner and hyperparameter grid search.

mod tune;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::corpus::{doubling_schedule, load_corpus, split, Dataset, Fractions, Instance};
use crate::embed::{init_entity_vectors, load_text_embeddings, skipgram_train, EmbeddingTable, SkipGramConfig};
use crate::error::{Error, Result};
use crate::eval::{kmeans, rand_index, summarize, write_metrics_csv, MetricsRow, Partition, Summary};
use crate::train::{finetune, pretrain, Checkpoint, TrainConfig};

pub use crate::train::{Preset, PresetFlags};
pub use tune::{parse_grid, tune, Grid, TuneMode, TuneRow};

/// Environment variable capping the number of parallel jobs.
pub const THREADS_ENV: &str = "RELEX_THREADS";

/// Iterations allowed for k-means over root representations.
pub const KMEANS_MAX_ITER: usize = 100;

/// Runs `f` on a pool sized by `RELEX_THREADS` (all cores if unset).
pub fn with_job_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(f))
}

/// Word vectors trained on the corpus text when none are supplied, and entity
/// vectors averaged from mention tokens. Neither step looks at labels.
pub fn prepare_embeddings(
    ds: &Dataset,
    words: Option<EmbeddingTable>,
    cfg: &TrainConfig,
) -> Result<(EmbeddingTable, EmbeddingTable)> {
    let words = match words {
        Some(w) => w,
        None => {
            let sentences: Vec<Vec<&str>> = ds.instances.iter().map(|i| i.surfaces().collect()).collect();
            skipgram_train(
                &sentences,
                SkipGramConfig {
                    dim: cfg.dim,
                    epochs: cfg.skipgram_epochs,
                    seed: cfg.seed,
                    ..SkipGramConfig::default()
                },
            )?
        }
    };
    let entities = init_entity_vectors(ds, &words, cfg.seed);
    Ok((words, entities))
}

/// Test-set scores of a trained model. `exclude` drops one label from P/R/F.
pub fn evaluate(model: &Checkpoint, instances: &[Instance], exclude: Option<&str>) -> Result<Summary> {
    let predicted = model.predict_all(instances)?;
    let predicted: Vec<&str> = predicted.iter().map(|&l| model.labels[l].as_str()).collect();
    let gold: Vec<&str> = instances.iter().map(|i| i.relation.as_str()).collect();
    summarize(&predicted, &gold, exclude)
}

/// Clusters root representations into as many groups as there are gold
/// labels and scores the clustering against them.
pub fn cluster_rand_index(model: &Checkpoint, instances: &[Instance], seed: u64) -> Result<(f64, Partition)> {
    let reps: Vec<Vec<f64>> = instances
        .par_iter()
        .map(|i| model.represent(i))
        .collect::<Result<_>>()?;
    let labels: Vec<&str> = instances.iter().map(|i| i.relation.as_str()).collect();
    let gold = Partition::from_labels(&labels);
    let k = gold.n_clusters().min(reps.len());
    let km = kmeans(&reps, k, seed, KMEANS_MAX_ITER)?;
    Ok((rand_index(&gold, &km.partition)?, km.partition))
}

#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    /// Training configuration; its preset and seed identify the run.
    pub config: TrainConfig,
    /// Label left out of the P/R/F averages, such as `no_relation`.
    pub exclude_label: Option<String>,
    /// Training sizes to use instead of the doubling schedule.
    pub sizes: Option<Vec<usize>>,
}

impl ExperimentOptions {
    pub fn new(preset: Preset, seed: u64) -> Self {
        let mut config = TrainConfig::for_preset(preset);
        config.seed = seed;
        ExperimentOptions {
            config,
            exclude_label: None,
            sizes: None,
        }
    }
}

/// Splits 70/10/20 (stratified) with the run seed, pre-trains once on the
/// full training split when the preset asks for it, then fine-tunes on each
/// scheduled prefix of the training split and scores the test split.
///
/// Rows come back in schedule order. Presets with pre-training fill the
/// `rand_index` column with the test-split clustering score of the
/// pre-trained representations.
pub fn run_experiment(ds: &Dataset, words: Option<EmbeddingTable>, opts: &ExperimentOptions) -> Result<Vec<MetricsRow>> {
    Ok(run_experiment_detailed(ds, words, opts)?
        .into_iter()
        .map(|(row, _)| row)
        .collect())
}

/// [`run_experiment`] with the full test-split summary next to each row.
pub fn run_experiment_detailed(
    ds: &Dataset,
    words: Option<EmbeddingTable>,
    opts: &ExperimentOptions,
) -> Result<Vec<(MetricsRow, Summary)>> {
    let cfg = &opts.config;
    cfg.validate()?;
    let (train, val, test) = split(ds, Fractions::STANDARD, cfg.seed, true)?;
    let sizes = match &opts.sizes {
        Some(s) => {
            if s.is_empty() || s.iter().any(|&n| n == 0 || n > train.len()) {
                return Err(Error::invalid(format!(
                    "training sizes must lie in 1..={}, got {s:?}",
                    train.len()
                )));
            }
            s.clone()
        }
        None => doubling_schedule(train.len())?,
    };

    let (words, entities) = prepare_embeddings(ds, words, cfg)?;
    let mut base = Checkpoint::new(words, entities, cfg.clone())?;
    let mut ri = None;
    if cfg.pretrain {
        let report = pretrain(&mut base, &train.instances)?;
        log::info!(
            "pre-trained {} epochs, final objective {:?}",
            report.epoch_objectives.len(),
            report.epoch_objectives.last()
        );
        if test.len() >= 2 {
            ri = Some(cluster_rand_index(&base, &test.instances, cfg.seed)?.0);
        }
    }

    let exclude = opts.exclude_label.as_deref();
    let run_size = |&size: &usize| -> Result<(MetricsRow, Summary)> {
        let mut model = base.clone();
        finetune(&mut model, &train.instances[..size], &val.instances)?;
        let s = evaluate(&model, &test.instances, exclude)?;
        log::info!("{} size {size}: accuracy {:.4}", cfg.preset, s.accuracy);
        let row = MetricsRow {
            experiment: cfg.preset.name().to_string(),
            train_size: size,
            seed: cfg.seed,
            macro_p: s.macro_avg.precision,
            macro_r: s.macro_avg.recall,
            macro_f: s.macro_avg.f1,
            micro_p: s.micro.precision,
            accuracy: s.accuracy,
            rand_index: ri,
        };
        Ok((row, s))
    };
    with_job_pool(|| sizes.par_iter().map(run_size).collect())?
}

/// File-level wrapper: loads inputs, runs, and writes
/// `<out_dir>/<preset>_seed<seed>.csv`. Returns the CSV path.
pub fn run_experiment_files(
    corpus: &Path,
    embeddings: Option<&Path>,
    out_dir: &Path,
    opts: &ExperimentOptions,
) -> Result<PathBuf> {
    let ds = load_corpus(corpus)?;
    let words = embeddings.map(load_text_embeddings).transpose()?;
    let rows = run_experiment(&ds, words, opts)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = out_dir.join(format!("{}_seed{}.csv", opts.config.preset, opts.config.seed));
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_metrics_csv(&rows, std::io::BufWriter::new(file))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth_corpus;

    #[test]
    fn custom_sizes_and_determinism() {
        let ds = synth_corpus(200, 3, 4);
        let mut opts = ExperimentOptions::new(Preset::MEL, 4);
        opts.config.dim = 6;
        opts.config.pretrain_epochs = 1;
        opts.config.max_epochs = 2;
        opts.config.skipgram_epochs = 1;
        opts.sizes = Some(vec![20, 140]);
        let a = run_experiment(&ds, None, &opts).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a[1].train_size, 140);
        assert!(a[0].rand_index.is_some());
        let b = run_experiment(&ds, None, &opts).unwrap();
        assert_eq!(a, b);

        opts.sizes = Some(vec![141]);
        assert!(run_experiment(&ds, None, &opts).is_err());
    }

    #[test]
    fn small_corpus_has_no_schedule() {
        let ds = synth_corpus(100, 2, 1);
        assert!(run_experiment(&ds, None, &ExperimentOptions::new(Preset::BH, 1)).is_err());
    }
}
