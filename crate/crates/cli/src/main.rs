use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use relex::corpus::{doubling_schedule, load_corpus, save_corpus, SynthConfig};
use relex::embed::{load_text_embeddings, skipgram_train, EmbeddingTable, SkipGramConfig};
use relex::eval::write_metrics_csv;
use relex::experiment::{
    evaluate, parse_grid, prepare_embeddings, run_experiment, tune, ExperimentOptions, TuneMode, TuneRow,
};
use relex::gradcheck::{self, CaseKind};
use relex::train::{finetune, pretrain, Checkpoint, Preset, TrainConfig};

#[derive(Parser)]
#[command(name = "relex", version, about = "Relation extraction experiments over dependency paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one preset over the doubling schedule and write a metrics CSV.
    Run(RunArgs),
    /// Grid-search hyperparameters.
    Tune(TuneArgs),
    /// Print the training sizes of the doubling schedule.
    Schedule {
        #[arg(long)]
        n: usize,
    },
    /// Check every analytic gradient against finite differences.
    Gradcheck {
        /// Random configurations per case kind.
        #[arg(long, default_value_t = 10)]
        per_kind: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write a synthetic corpus.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        relations: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Label frequencies decay geometrically by this factor.
        #[arg(long)]
        skew: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a saved model on a labelled corpus.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        exclude_label: Option<String>,
        /// Also print per-label precision, recall and F1.
        #[arg(long)]
        per_label: bool,
    },
    /// Pre-train the LSTM and vectors on a corpus and save the model.
    Pretrain(PretrainArgs),
    /// Train the classifier (and LSTM) on a labelled corpus and save the model.
    Finetune(FinetuneArgs),
    /// Train skip-gram word vectors on the corpus sentences.
    Embed {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 2)]
        window: usize,
        #[arg(long, default_value_t = 5)]
        negatives: usize,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    /// TOML file with `TrainConfig` fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    corpus: PathBuf,
    /// Word vectors in text format; trained on the corpus when omitted.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    exclude_label: Option<String>,
    /// Comma-separated training sizes replacing the doubling schedule.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    mode: TuneMode,
    /// Write the ranked table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PretrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FinetuneArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    corpus: PathBuf,
    /// Validation corpus for early stopping.
    #[arg(long)]
    val: Option<PathBuf>,
    /// Start from a saved (pre-trained) model instead of a fresh one.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    s.parse().map_err(|e: relex::Error| e.to_string())
}

fn parse_mode(s: &str) -> std::result::Result<TuneMode, String> {
    s.parse().map_err(|e: relex::Error| e.to_string())
}

impl ConfigArgs {
    /// Config file (or defaults), then the preset, then the seed.
    fn resolve(&self, default_preset: Preset) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(p) => TrainConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
            None => TrainConfig::for_preset(default_preset),
        };
        if let Some(p) = self.preset {
            cfg.apply_preset(p);
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate().context("validating config")?;
        Ok(cfg)
    }
}

fn load_words(path: Option<&Path>) -> Result<Option<EmbeddingTable>> {
    path.map(|p| load_text_embeddings(p).with_context(|| format!("loading embeddings {}", p.display())))
        .transpose()
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

fn write_tune_table(rows: &[TuneRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "rank,params,score,macro_p,macro_r,macro_f,accuracy,rand_index,baseline")?;
    for (i, r) in rows.iter().enumerate() {
        let params: Vec<String> = r.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(
            w,
            "{},{},{:.6},{},{},{},{},{},{}",
            i + 1,
            params.join(";"),
            r.score,
            fmt_opt(r.macro_p),
            fmt_opt(r.macro_r),
            fmt_opt(r.macro_f),
            fmt_opt(r.accuracy),
            fmt_opt(r.rand_index),
            fmt_opt(r.baseline),
        )?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => {
            let config = a.cfg.resolve(Preset::BH)?;
            let corpus = load_corpus(&a.corpus).with_context(|| format!("loading corpus {}", a.corpus.display()))?;
            let words = load_words(a.embeddings.as_deref())?;
            let opts = ExperimentOptions {
                config,
                exclude_label: a.exclude_label,
                sizes: a.sizes,
            };
            let rows = run_experiment(&corpus, words, &opts).context("running experiment")?;
            std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
            let path = a.out.join(format!("{}_seed{}.csv", opts.config.preset, opts.config.seed));
            let file = std::fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
            write_metrics_csv(&rows, std::io::BufWriter::new(file)).context("writing metrics")?;
            println!("{}", path.display());
        }
        Command::Tune(a) => {
            let base = a.cfg.resolve(Preset::MEL)?;
            let text = std::fs::read_to_string(&a.grid).with_context(|| format!("reading grid {}", a.grid.display()))?;
            let grid = parse_grid(&text).context("parsing grid")?;
            let corpus = load_corpus(&a.corpus).with_context(|| format!("loading corpus {}", a.corpus.display()))?;
            let words = load_words(a.embeddings.as_deref())?;
            let rows = tune(&grid, &corpus, words, &base, a.mode).context("tuning")?;
            match a.out {
                Some(p) => {
                    let file = std::fs::File::create(&p).with_context(|| format!("writing {}", p.display()))?;
                    write_tune_table(&rows, std::io::BufWriter::new(file))?;
                }
                None => write_tune_table(&rows, std::io::stdout().lock())?,
            }
        }
        Command::Schedule { n } => {
            let sizes = doubling_schedule(n).context("computing schedule")?;
            let sizes: Vec<String> = sizes.iter().map(usize::to_string).collect();
            println!("{}", sizes.join(" "));
        }
        Command::Gradcheck { per_kind, seed } => {
            let report = gradcheck::run_suite(per_kind, seed).context("running gradient checks")?;
            for kind in CaseKind::ALL {
                if let Some(e) = report.worst(kind) {
                    println!("{kind:<18} {e:.3e}");
                }
            }
            println!("configurations {}", report.cases.len());
            println!("max relative error {:.3e}", report.max_error());
            if !report.passed() {
                bail!("gradient check exceeded tolerance {:e}", gradcheck::TOLERANCE);
            }
        }
        Command::Synth {
            n,
            relations,
            seed,
            skew,
            out,
        } => {
            if relations < 2 {
                bail!("--relations must be at least 2");
            }
            let mut cfg = SynthConfig::new(n, relations, seed);
            if let Some(r) = skew {
                if !(r > 0.0) {
                    bail!("--skew must be positive");
                }
                cfg = cfg.skewed(r);
            }
            save_corpus(&cfg.generate(), &out).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Eval {
            model,
            corpus,
            exclude_label,
            per_label,
        } => {
            let m = Checkpoint::load(&model).with_context(|| format!("loading model {}", model.display()))?;
            let ds = load_corpus(&corpus).with_context(|| format!("loading corpus {}", corpus.display()))?;
            let s = evaluate(&m, &ds.instances, exclude_label.as_deref()).context("evaluating")?;
            println!("instances {}", ds.len());
            println!("accuracy {:.6}", s.accuracy);
            println!(
                "macro p {:.6} r {:.6} f {:.6}",
                s.macro_avg.precision, s.macro_avg.recall, s.macro_avg.f1
            );
            println!("micro p {:.6} r {:.6} f {:.6}", s.micro.precision, s.micro.recall, s.micro.f1);
            if per_label {
                for (label, prf) in &s.per_label {
                    println!("{label}\t{:.6}\t{:.6}\t{:.6}", prf.precision, prf.recall, prf.f1);
                }
            }
        }
        Command::Pretrain(a) => {
            let cfg = a.cfg.resolve(Preset::MEL)?;
            if !cfg.pretrain {
                bail!("preset {} does not pre-train", cfg.preset);
            }
            let ds = load_corpus(&a.corpus).with_context(|| format!("loading corpus {}", a.corpus.display()))?;
            let words = load_words(a.embeddings.as_deref())?;
            let (words, entities) = prepare_embeddings(&ds, words, &cfg).context("preparing embeddings")?;
            let mut model = Checkpoint::new(words, entities, cfg)?;
            let report = pretrain(&mut model, &ds.instances).context("pre-training")?;
            for (i, obj) in report.epoch_objectives.iter().enumerate() {
                println!("epoch {} objective {obj:.6}", i + 1);
            }
            model.save(&a.out).with_context(|| format!("saving {}", a.out.display()))?;
        }
        Command::Finetune(a) => {
            let ds = load_corpus(&a.corpus).with_context(|| format!("loading corpus {}", a.corpus.display()))?;
            let val = match &a.val {
                Some(p) => load_corpus(p).with_context(|| format!("loading corpus {}", p.display()))?.instances,
                None => Vec::new(),
            };
            let mut model = match &a.init {
                Some(p) => {
                    let mut m = Checkpoint::load(p).with_context(|| format!("loading model {}", p.display()))?;
                    if a.cfg.config.is_some() {
                        m.config = a.cfg.resolve(m.config.preset)?;
                    } else {
                        if let Some(p) = a.cfg.preset {
                            m.config.apply_preset(p);
                        }
                        if let Some(s) = a.cfg.seed {
                            m.config.seed = s;
                        }
                    }
                    m
                }
                None => {
                    let cfg = a.cfg.resolve(Preset::BH)?;
                    let words = load_words(a.embeddings.as_deref())?;
                    let (words, entities) = prepare_embeddings(&ds, words, &cfg).context("preparing embeddings")?;
                    Checkpoint::new(words, entities, cfg)?
                }
            };
            let report = finetune(&mut model, &ds.instances, &val).context("fine-tuning")?;
            let train_acc = evaluate(&model, &ds.instances, None).context("evaluating")?.accuracy;
            println!("epochs {} best {}", report.epochs_run, report.best_epoch);
            println!("train accuracy {train_acc:.6}");
            if let Some(v) = report.val_accuracy.get(report.best_epoch.wrapping_sub(1)) {
                println!("validation accuracy {v:.6}");
            }
            model.save(&a.out).with_context(|| format!("saving {}", a.out.display()))?;
        }
        Command::Embed {
            corpus,
            out,
            dim,
            window,
            negatives,
            epochs,
            seed,
        } => {
            let ds = load_corpus(&corpus).with_context(|| format!("loading corpus {}", corpus.display()))?;
            let sentences: Vec<Vec<&str>> = ds.instances.iter().map(|i| i.surfaces().collect()).collect();
            let cfg = SkipGramConfig {
                dim,
                window,
                negatives,
                epochs,
                seed,
                ..SkipGramConfig::default()
            };
            let words = skipgram_train(&sentences, cfg).context("training word vectors")?;
            words.save_text(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("words {} dim {dim}", words.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
