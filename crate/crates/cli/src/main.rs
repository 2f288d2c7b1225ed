use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ufnd_core::cnn::SequenceUnit;
use ufnd_core::corpus::{generate_synthetic, validate_split, SplitExpectation, SyntheticSpec};
use ufnd_core::eval::evaluate;
use ufnd_core::preprocess::preprocess_corpus;
use ufnd_core::runner::grid::write_outputs;
use ufnd_core::runner::persist::{read_header, MAGIC};
use ufnd_core::runner::{Classifier, CnnConfig, ExperimentConfig, GridConfig, Pipeline, Predictor};
use ufnd_core::select::{chi2_scores, select_k_best};
use ufnd_core::svm::{Gamma, SvmConfig};
use ufnd_core::vectorize::{build_vocabulary, fit_tfidf, transform, NgramSpec};
use ufnd_core::{load_corpus, load_model, run_grid, save_model, Corpus, Label, PreprocessConfig, Resources, Split};

#[derive(Parser)]
#[command(name = "ufnd", version, about = "Urdu fake-news detection: n-gram SVM and multichannel CNN")]
struct Cli {
    /// Seed for CNN initialization and shuffling; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment grid (TOML with [[experiment]] blocks).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Stopword list, one word per line (default: built-in list).
    #[arg(long, global = true)]
    stopwords: Option<PathBuf>,
    /// Lemma table, `surface<TAB>lemma` per line (default: none).
    #[arg(long, global = true)]
    lemmas: Option<PathBuf>,
    /// Character map, `U+XXXX<TAB>U+YYYY` per line (default: built-in map).
    #[arg(long, global = true)]
    normmap: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write normalized, tokenized documents as TSV.
    Preprocess {
        input: PathBuf,
        #[command(flatten)]
        pre: PreFlags,
    },
    /// Fit the TF-IDF vocabulary and chi-squared scores on a training split.
    Featurize {
        train: PathBuf,
        #[command(flatten)]
        pre: PreFlags,
        #[command(flatten)]
        ngrams: NgramFlags,
        /// Mark the K best features in the output.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Train one model and save it.
    Train {
        train: PathBuf,
        #[command(flatten)]
        model: ModelFlags,
        /// Where to write the model (default: <out-dir>/model.ufnd).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Predict labels for a corpus (labels in the input are ignored).
    Predict {
        model: PathBuf,
        input: PathBuf,
        /// Predictions TSV (default: <out-dir>/predictions.tsv).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score predictions against a labeled corpus.
    Evaluate {
        gold: PathBuf,
        /// Predictions TSV as written by `predict`.
        predictions: PathBuf,
    },
    /// Run every block of the --config grid.
    Experiment {
        train: PathBuf,
        test: PathBuf,
        /// Skip writing one model file per row.
        #[arg(long)]
        no_models: bool,
    },
    /// Describe a model file, or check a corpus's split counts.
    Inspect {
        path: PathBuf,
        /// Expected split sizes when inspecting a corpus.
        #[arg(long, value_enum)]
        expect: Option<Expect>,
    },
    /// Generate a synthetic labeled corpus pair (train and test TSV).
    Synth {
        #[arg(long, default_value_t = 200)]
        train_per_class: usize,
        #[arg(long, default_value_t = 50)]
        test_per_class: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Expect {
    Train,
    Test,
}

#[derive(Args, Clone)]
struct PreFlags {
    #[arg(long)]
    keep_diacritics: bool,
    #[arg(long)]
    no_normalize: bool,
    #[arg(long)]
    keep_stopwords: bool,
    #[arg(long)]
    no_lemmatize: bool,
}

impl PreFlags {
    fn config(&self) -> PreprocessConfig {
        PreprocessConfig {
            remove_diacritics: !self.keep_diacritics,
            normalize: !self.no_normalize,
            remove_stopwords: !self.keep_stopwords,
            lemmatize: !self.no_lemmatize,
        }
    }
}

#[derive(Args, Clone)]
struct NgramFlags {
    /// Word n-gram orders.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    words: Vec<usize>,
    /// Character n-gram orders.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6")]
    chars: Vec<usize>,
    /// Window characters within each token instead of across the stream.
    #[arg(long)]
    char_within_tokens: bool,
}

impl NgramFlags {
    fn spec(&self) -> Result<NgramSpec> {
        let mut spec = NgramSpec::new(self.words.iter().copied(), self.chars.iter().copied())?;
        spec.char_across_tokens = !self.char_within_tokens;
        Ok(spec)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Svm,
    Cnn,
}

#[derive(Args, Clone)]
struct ModelFlags {
    /// Take the model from this --config block (name or 0-based index).
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long, value_enum, default_value = "svm")]
    classifier: Kind,
    #[command(flatten)]
    pre: PreFlags,
    #[command(flatten)]
    ngrams: NgramFlags,
    /// Keep the K best features (default: all).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1)]
    degree: u32,
    /// `scale`, `auto`, or a number.
    #[arg(long, default_value = "scale")]
    gamma: String,
    #[arg(long, default_value_t = 0.0)]
    coef0: f64,
    /// CNN sequence unit: `word` or `char`.
    #[arg(long, default_value = "word")]
    unit: String,
    /// CNN kernel size per channel.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    kernels: Vec<usize>,
    #[arg(long, default_value_t = 7)]
    epochs: usize,
}

impl ModelFlags {
    fn experiment_config(&self) -> Result<ExperimentConfig> {
        let classifier = match self.classifier {
            Kind::Svm => Classifier::Svm(SvmConfig {
                c: self.c,
                degree: self.degree,
                gamma: parse_gamma(&self.gamma)?,
                coef0: self.coef0,
                ..SvmConfig::default()
            }),
            Kind::Cnn => {
                let mut cnn = CnnConfig {
                    unit: self.unit.parse::<SequenceUnit>()?,
                    kernel_sizes: self.kernels.clone(),
                    ..CnnConfig::default()
                };
                cnn.train.epochs = self.epochs;
                Classifier::Cnn(cnn)
            }
        };
        Ok(ExperimentConfig {
            name: "cli".into(),
            preprocess: self.pre.config(),
            ngrams: self.ngrams.spec()?,
            k: self.k.into_iter().collect(),
            classifier,
            seed: None,
        })
    }
}

fn parse_gamma(s: &str) -> Result<Gamma> {
    Ok(match s {
        "scale" => Gamma::Scale,
        "auto" => Gamma::Auto,
        v => Gamma::Value(v.parse().with_context(|| format!("gamma `{v}` is not scale, auto or a number"))?),
    })
}

fn resources(cli: &Cli) -> Result<Resources> {
    Ok(Resources::load(
        cli.stopwords.as_deref(),
        cli.lemmas.as_deref(),
        cli.normmap.as_deref(),
    )?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn load_grid(cli: &Cli) -> Result<GridConfig> {
    let path = cli.config.as_ref().context("--config is required")?;
    let mut grid = GridConfig::load(path)?;
    if let Some(seed) = cli.seed {
        grid.seed = seed;
        grid.experiment.iter_mut().for_each(|e| e.seed = None);
    }
    Ok(grid)
}

fn cmd_preprocess(cli: &Cli, input: &Path, pre: &PreFlags) -> Result<()> {
    let corpus = load_corpus(input, Split::Unlabeled)?;
    let docs = preprocess_corpus(&corpus, &pre.config(), &resources(cli)?);
    let path = cli.out_dir.join("preprocessed.tsv");
    let mut out = create(&path)?;
    writeln!(out, "id\tlabel\ttokens")?;
    for (d, p) in corpus.documents.iter().zip(&docs) {
        let label = d.label.map(Label::as_str).unwrap_or("");
        writeln!(out, "{}\t{label}\t{}", d.id, p.tokens.join(" "))?;
    }
    out.flush()?;
    eprintln!("{} documents -> {}", docs.len(), path.display());
    Ok(())
}

fn cmd_featurize(cli: &Cli, train: &Path, pre: &PreFlags, ngrams: &NgramFlags, k: Option<usize>) -> Result<()> {
    let corpus = load_corpus(train, Split::Train)?;
    let spec = ngrams.spec()?;
    let docs = preprocess_corpus(&corpus, &pre.config(), &resources(cli)?);
    let tfidf = fit_tfidf(build_vocabulary(&docs, &spec)?);
    let x = transform(&docs, &tfidf, &spec);
    let scores = chi2_scores(&x, &corpus.labels()?)?;
    let kept = match k {
        Some(k) => select_k_best(&scores, k)?.kept,
        None => Vec::new(),
    };
    let mut selected = vec![false; tfidf.n_features()];
    kept.iter().for_each(|&j| selected[j as usize] = true);

    let path = cli.out_dir.join("features.tsv");
    let mut out = create(&path)?;
    writeln!(out, "index\tterm\tdf\tidf\tchi2\tselected")?;
    for (j, term) in tfidf.vocabulary.terms().iter().enumerate() {
        writeln!(
            out,
            "{j}\t{term}\t{}\t{:.6}\t{:.6}\t{}",
            tfidf.vocabulary.doc_freq(j),
            tfidf.idf[j],
            scores.0[j],
            u8::from(selected[j])
        )?;
    }
    out.flush()?;
    println!("documents\t{}", corpus.len());
    println!("features\t{}", tfidf.n_features());
    println!("nonzeros\t{}", x.nnz());
    if let Some(k) = k {
        println!("selected\t{} (K = {k})", kept.len());
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn select_block(grid: &GridConfig, key: &str) -> Result<ExperimentConfig> {
    let found = match key.parse::<usize>() {
        Ok(i) => grid.experiment.get(i),
        Err(_) => grid.experiment.iter().find(|e| e.name == key),
    };
    found.cloned().with_context(|| format!("no experiment `{key}` in the config"))
}

fn cmd_train(cli: &Cli, train: &Path, flags: &ModelFlags, output: Option<&Path>) -> Result<()> {
    let (config, seed) = match &flags.experiment {
        Some(key) => {
            let grid = load_grid(cli)?;
            let block = select_block(&grid, key)?;
            let seed = grid.seed_for(&block);
            (block, seed)
        }
        None => (flags.experiment_config()?, cli.seed.unwrap_or(0)),
    };
    if config.k.len() > 1 {
        log::warn!("block lists several K values; training with the first");
    }
    let corpus = load_corpus(train, Split::Train)?;
    let (pipeline, history) = Pipeline::fit(&corpus, &resources(cli)?, &config, config.k.first().copied(), seed)?;
    let path = output.map(Path::to_path_buf).unwrap_or_else(|| cli.out_dir.join("model.ufnd"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_model(&path, &pipeline)?;
    if let Some(h) = history {
        let hp = path.with_extension("history.tsv");
        let mut out = create(&hp)?;
        h.write_tsv(&mut out)?;
        out.flush()?;
        eprintln!("training history -> {}", hp.display());
    }
    eprintln!(
        "{} model on {} documents ({} features) -> {}",
        pipeline.kind(),
        corpus.len(),
        pipeline.predictor.selected_features(),
        path.display()
    );
    Ok(())
}

fn cmd_predict(cli: &Cli, model: &Path, input: &Path, output: Option<&Path>) -> Result<()> {
    let pipeline = load_model(model)?;
    let corpus = load_corpus(input, Split::Unlabeled)?;
    let scores = pipeline.scores(&corpus.documents)?;
    let path = output.map(Path::to_path_buf).unwrap_or_else(|| cli.out_dir.join("predictions.tsv"));
    let mut out = create(&path)?;
    writeln!(out, "id\tlabel\tscore")?;
    for (d, s) in corpus.documents.iter().zip(&scores) {
        writeln!(out, "{}\t{}\t{s:.17}", d.id, pipeline.predictor.label_for(*s))?;
    }
    out.flush()?;
    eprintln!("{} predictions -> {}", scores.len(), path.display());
    Ok(())
}

/// `id<TAB>label[<TAB>score]` with a header line.
fn read_predictions(path: &Path) -> Result<Vec<(String, Label)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if n == 0 && line.starts_with("id\t") || line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(id), Some(label)) = (cols.next(), cols.next()) else {
            bail!("{}:{}: expected id and label columns", path.display(), n + 1);
        };
        let label: Label = label
            .parse()
            .with_context(|| format!("{}:{}", path.display(), n + 1))?;
        out.push((id.to_owned(), label));
    }
    Ok(out)
}

fn cmd_evaluate(gold: &Path, predictions: &Path) -> Result<()> {
    let gold = load_corpus(gold, Split::Test)?;
    let preds = read_predictions(predictions)?;
    let by_id: std::collections::HashMap<&str, Label> = preds.iter().map(|(i, l)| (i.as_str(), *l)).collect();
    if by_id.len() != preds.len() {
        bail!("duplicate ids in {}", predictions.display());
    }
    let mut g = Vec::with_capacity(gold.len());
    let mut p = Vec::with_capacity(gold.len());
    for d in &gold.documents {
        let label = *by_id.get(d.id.as_str()).with_context(|| format!("no prediction for `{}`", d.id))?;
        g.push(d.label.context("gold corpus has an unlabeled document")?);
        p.push(label);
    }
    if preds.len() != gold.len() {
        log::warn!("{} predictions for ids not in the gold corpus", preds.len() - gold.len());
    }
    println!("{}", evaluate(&g, &p)?);
    Ok(())
}

fn cmd_experiment(cli: &Cli, train: &Path, test: &Path, no_models: bool) -> Result<()> {
    let grid = load_grid(cli)?;
    let train = load_corpus(train, Split::Train)?;
    let test = load_corpus(test, Split::Test)?;
    let result = run_grid(&train, &test, &resources(cli)?, &grid)?;
    write_outputs(&cli.out_dir, &result, !no_models)?;
    print!("{}", ufnd_core::runner::grid::render_markdown(&result.rows));
    let failed = result.rows.iter().filter(|r| r.outcome.is_err()).count();
    eprintln!(
        "{} rows ({failed} failed) -> {}",
        result.rows.len(),
        cli.out_dir.join("results.tsv").display()
    );
    Ok(())
}

fn cmd_inspect(path: &Path, expect: Option<Expect>) -> Result<()> {
    let head = {
        let mut buf = [0u8; 4];
        let mut f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let n = std::io::Read::read(&mut f, &mut buf)?;
        buf[..n].to_vec()
    };
    if head == MAGIC {
        let bytes = std::fs::read(path)?;
        let version = read_header(&bytes)?;
        let p = load_model(path)?;
        println!("format\t{}.{}", version.major, version.minor);
        println!("bytes\t{}", bytes.len());
        println!("classifier\t{}", p.kind());
        println!("preprocess\t{:?}", p.preprocess);
        println!(
            "resources\t{} stopwords, {} lemmas, {} char mappings",
            p.resources.stopwords.len(),
            p.resources.lemmas.len(),
            p.resources.normmap.len()
        );
        match &p.predictor {
            Predictor::Svm { ngrams, mask, model, .. } => {
                println!("ngrams\t{}", ngrams.describe());
                println!("features\t{} of {}", mask.len(), mask.n_features);
                println!("kernel\t{:?}", model.kernel);
                println!("c\t{}", model.c);
                println!("support_vectors\t{}", model.n_support());
                println!("bias\t{}", model.bias);
                println!("converged\t{} ({} updates)", model.converged, model.iterations);
            }
            Predictor::Cnn { encoder, model, threshold } => {
                println!("unit\t{:?}", encoder.unit());
                println!("vocabulary\t{}", encoder.id_space() - 1);
                println!("max_len\t{}", encoder.max_len());
                println!("kernels\t{:?}", model.arch.kernel_sizes);
                println!("parameters\t{}", model.n_params());
                println!("threshold\t{threshold}");
            }
        }
        return Ok(());
    }
    let split = match expect {
        Some(Expect::Test) => Split::Test,
        _ => Split::Train,
    };
    let corpus = load_corpus(path, split)?;
    let expected = match expect {
        Some(Expect::Test) => SplitExpectation::shared_task_test(),
        _ => SplitExpectation::shared_task_train(),
    };
    print!("{}", validate_split(&corpus, &expected));
    Ok(())
}

fn cmd_synth(cli: &Cli, train_per_class: usize, test_per_class: usize) -> Result<()> {
    let seed = cli.seed.unwrap_or(7);
    let full = generate_synthetic(&SyntheticSpec::new(seed, train_per_class + test_per_class))?;
    let (train, test) = full.split_per_class(train_per_class);
    std::fs::create_dir_all(&cli.out_dir)?;
    for (name, split, c) in [("train.tsv", Split::Train, train), ("test.tsv", Split::Test, test)] {
        let c = Corpus::new(split, c.documents)?;
        let path = cli.out_dir.join(name);
        c.save(&path)?;
        eprintln!("{} documents -> {}", c.len(), path.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Preprocess { input, pre } => cmd_preprocess(&cli, input, pre),
        Command::Featurize { train, pre, ngrams, k } => cmd_featurize(&cli, train, pre, ngrams, *k),
        Command::Train { train, model, output } => cmd_train(&cli, train, model, output.as_deref()),
        Command::Predict { model, input, output } => cmd_predict(&cli, model, input, output.as_deref()),
        Command::Evaluate { gold, predictions } => cmd_evaluate(gold, predictions),
        Command::Experiment { train, test, no_models } => cmd_experiment(&cli, train, test, *no_models),
        Command::Inspect { path, expect } => cmd_inspect(path, *expect),
        Command::Synth { train_per_class, test_per_class } => cmd_synth(&cli, *train_per_class, *test_per_class),
    }
}
