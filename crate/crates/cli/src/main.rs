mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{ArgGroup, Args, CommandFactory, Parser, Subcommand};

use seqwalk::corpus::{augment_corpus, DomainSizes};
use seqwalk::eval::{BenchmarkOptions, EvalReport, ModelKind};
use seqwalk::graph::{
    node_weight_distribution, write_ccdf_csv, Direction, EdgeList, SimilarityGraph,
};
use seqwalk::hierarchy::{format_layers, parse_layers};
use seqwalk::{
    assign_genres, build_hierarchy, ccdf, generate_many, parse_corpus, planted_corpus,
    run_benchmark, split_corpus, weakly_connected_components, write_corpus, Corpus, Decay,
    Hierarchy, SynthConfig,
};

use config::{Settings, UsageError};

/// Similarity graphs, coupled random walks and likelihood benchmarks for
/// playlist corpora.
#[derive(Parser)]
#[command(name = "seqwalk", version)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Flat `key = value` file supplying defaults for any flag.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a JSONL corpus and write it back normalized.
    Ingest(IngestArgs),
    /// Replace every playlist by 9 single-deletion variants and 1 rotation.
    Augment(AugmentArgs),
    /// Shuffle and split a corpus into train and test files.
    Split(SplitArgs),
    /// Draw a corpus from a planted genre/artist/track hierarchy.
    Synth(SynthArgs),
    /// Build a hierarchy of similarity graphs and save it as a model directory.
    Build(BuildArgs),
    /// Export weight CCDFs and connected components of a graph or model.
    Characterize(CharacterizeArgs),
    /// Generate playlists by coupled random walks over a saved model.
    Generate(GenerateArgs),
    /// Score hierarchical, multi-hop and single-hop models on held-out splits.
    Evaluate(EvaluateArgs),
    /// Full benchmark: optional augmentation, splits, three models, report.
    Bench(BenchArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Input corpus (JSONL).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output corpus (JSONL).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for deletion and pivot draws.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Fraction of records sent to the training file, in (0, 1).
    #[arg(long, value_name = "F")]
    train_frac: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Training output (JSONL).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test output (JSONL).
    #[arg(long)]
    test: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of playlists [default: 5000].
    #[arg(long)]
    playlists: Option<usize>,
    /// Playlist length [default: 20].
    #[arg(long)]
    length: Option<usize>,
    /// Number of genres [default: 10].
    #[arg(long)]
    genres: Option<usize>,
    /// Artists per genre [default: 10].
    #[arg(long)]
    artists_per_genre: Option<usize>,
    /// Tracks per artist [default: 10].
    #[arg(long)]
    tracks_per_artist: Option<usize>,
}

#[derive(Args)]
struct BuildArgs {
    /// Training corpus (JSONL).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Model directory to create.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Decay of similarity with distance: inv, exp or adj [default: exp].
    #[arg(long)]
    decay: Option<Decay>,
    /// Comma-separated layers, coarsest first, ending in track
    /// [default: genre,artist,track].
    #[arg(long)]
    layers: Option<String>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").args(["graph", "model"])))]
struct CharacterizeArgs {
    /// A single edge-list TSV.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// A model directory; every layer is characterized.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Model directory written by `build`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Tracks per generated playlist.
    #[arg(long)]
    length: Option<usize>,
    /// Number of playlists [default: 1].
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output corpus (JSONL).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    /// Decay of the hierarchical and multi-hop models [default: exp].
    #[arg(long)]
    decay: Option<Decay>,
    /// Layers of the hierarchical model [default: genre,artist,track].
    #[arg(long)]
    layers: Option<String>,
    /// Additive 1/|A| smoothing, true or false [default: true].
    #[arg(long)]
    smoothing: Option<bool>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Corpus (JSONL) to split into train and test.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Comma-separated train fractions [default: 0.5,0.7,0.9].
    #[arg(long)]
    splits: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").args(["corpus", "synthetic"])))]
struct BenchArgs {
    /// Corpus (JSONL).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Use a default-sized planted corpus drawn from the seed instead.
    #[arg(long)]
    synthetic: bool,
    /// Augment the corpus before splitting.
    #[arg(long)]
    augment: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated train fractions [default: 0.5,0.7,0.9].
    #[arg(long)]
    splits: Option<String>,
    /// Output directory for report.csv and run.conf [default: .].
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(0) => Err(UsageError("`--threads` must be at least 1".into()).into()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("starting thread pool")
            .and_then(|pool| pool.install(|| run(&cli))),
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => match err.downcast_ref::<UsageError>() {
            Some(usage) => Cli::command()
                .error(clap::error::ErrorKind::MissingRequiredArgument, usage)
                .exit(),
            None => {
                eprintln!("error: {err:#}");
                ExitCode::FAILURE
            }
        },
    }
}

fn run(cli: &Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Ingest(a) => ingest(a, Settings::load("ingest", config)?),
        Command::Augment(a) => augment(a, Settings::load("augment", config)?),
        Command::Split(a) => split(a, Settings::load("split", config)?),
        Command::Synth(a) => synth(a, Settings::load("synth", config)?),
        Command::Build(a) => build(a, Settings::load("build", config)?),
        Command::Characterize(a) => characterize(a, Settings::load("characterize", config)?),
        Command::Generate(a) => generate(a, Settings::load("generate", config)?),
        Command::Evaluate(a) => evaluate(a, Settings::load("evaluate", config)?),
        Command::Bench(a) => bench(a, Settings::load("bench", config)?),
    }
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let ingest = parse_corpus(BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))?;
    if ingest.dropped_short > 0 {
        eprintln!(
            "note: dropped {} record(s) shorter than 2 from {}",
            ingest.dropped_short,
            path.display()
        );
    }
    Ok(ingest.corpus)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn save_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    write_corpus(create(path)?, corpus.records())
        .with_context(|| format!("writing {}", path.display()))
}

fn parse_splits(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("invalid split fraction `{s}`"))
        })
        .collect()
}

fn describe(sizes: &DomainSizes) -> String {
    let genres = sizes.genres.map_or("-".to_owned(), |g| g.to_string());
    format!(
        "genres={genres} artists={} tracks={}",
        sizes.artists, sizes.tracks
    )
}

fn ingest(a: &IngestArgs, mut s: Settings) -> Result<()> {
    let input = s.path("input", a.input.clone())?;
    let out = s.path("out", a.out.clone())?;
    let corpus = read_corpus(&input)?;
    save_corpus(&out, &corpus)?;
    s.write_beside(&out)?;
    let annotated = assign_genres(corpus)?;
    println!(
        "records={} {}",
        annotated.len(),
        describe(&annotated.domain_sizes())
    );
    Ok(())
}

fn augment(a: &AugmentArgs, mut s: Settings) -> Result<()> {
    let input = s.path("input", a.input.clone())?;
    let out = s.path("out", a.out.clone())?;
    let seed = s.seed("augment_seed", a.seed)?;
    let corpus = read_corpus(&input)?;
    let augmented = augment_corpus(&corpus, seed)?;
    save_corpus(&out, &augmented.corpus)?;
    s.write_beside(&out)?;
    println!(
        "records={} -> {} (skipped {} shorter than 3)",
        corpus.len(),
        augmented.corpus.len(),
        augmented.skipped_short
    );
    Ok(())
}

fn split(a: &SplitArgs, mut s: Settings) -> Result<()> {
    let input = s.path("input", a.input.clone())?;
    let frac: f64 = s.require("train_frac", a.train_frac)?;
    let seed = s.seed("split_seed", a.seed)?;
    let train_path = s.path("train", a.train.clone())?;
    let test_path = s.path("test", a.test.clone())?;
    let corpus = read_corpus(&input)?;
    let (train, test) = split_corpus(&corpus, frac, seed)?;
    save_corpus(&train_path, &train)?;
    save_corpus(&test_path, &test)?;
    s.write_beside(&train_path)?;
    println!("train={} test={}", train.len(), test.len());
    Ok(())
}

fn synth(a: &SynthArgs, mut s: Settings) -> Result<()> {
    let out = s.path("out", a.out.clone())?;
    let seed = s.seed("seed", a.seed)?;
    let d = SynthConfig::default();
    let config = SynthConfig {
        playlists: s.get("playlists", a.playlists, d.playlists)?,
        length: s.get("length", a.length, d.length)?,
        genres: s.get("genres", a.genres, d.genres)?,
        artists_per_genre: s.get(
            "artists_per_genre",
            a.artists_per_genre,
            d.artists_per_genre,
        )?,
        tracks_per_artist: s.get(
            "tracks_per_artist",
            a.tracks_per_artist,
            d.tracks_per_artist,
        )?,
        ..d
    };
    let corpus = planted_corpus(&config, seed)?;
    save_corpus(&out, &corpus)?;
    s.write_beside(&out)?;
    println!(
        "records={} {}",
        corpus.len(),
        describe(&corpus.domain_sizes())
    );
    Ok(())
}

fn build(a: &BuildArgs, mut s: Settings) -> Result<()> {
    let corpus_path = s.path("corpus", a.corpus.clone())?;
    let out = s.path("out", a.out.clone())?;
    let decay = s.get("decay", a.decay, Decay::ExponentialShifted)?;
    let layers = parse_layers(&s.get("layers", a.layers.clone(), "genre,artist,track".into())?)?;
    s.set("layers", format_layers(&layers));
    let corpus = assign_genres(read_corpus(&corpus_path)?)?;
    let h = build_hierarchy(&corpus, decay, &layers)?;
    h.save(&out)
        .with_context(|| format!("writing model {}", out.display()))?;
    s.write_into(&out)?;
    for (attribute, graph) in h.attributes().iter().zip(h.graphs()) {
        println!(
            "{attribute}: nodes={} edges={}",
            graph.node_count(),
            graph.edge_count()
        );
    }
    Ok(())
}

fn characterize_graph(graph: &SimilarityGraph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (direction, name) in [(Direction::In, "in"), (Direction::Out, "out")] {
        let weights: Vec<f64> = node_weight_distribution(graph, direction)
            .into_iter()
            .map(|(_, w)| w)
            .collect();
        write_ccdf_csv(
            create(&dir.join(format!("{name}-weight-ccdf.csv")))?,
            &ccdf(&weights)?,
        )?;
    }
    if graph.edge_count() > 0 {
        write_ccdf_csv(
            create(&dir.join("edge-weight-ccdf.csv"))?,
            &ccdf(graph.edge_weights())?,
        )?;
    }
    let components = weakly_connected_components(graph);
    let n = graph.node_count() as f64;
    let mut out = create(&dir.join("components.csv"))?;
    writeln!(out, "rank,size,fraction")?;
    for (rank, c) in components.iter().enumerate() {
        writeln!(out, "{},{},{}", rank + 1, c.len(), c.len() as f64 / n)?;
    }
    out.flush()?;
    let giant = components.first().map_or(0, Vec::len);
    println!(
        "nodes={} edges={} components={} giant={:.4}",
        graph.node_count(),
        graph.edge_count(),
        components.len(),
        giant as f64 / n
    );
    Ok(())
}

fn characterize(a: &CharacterizeArgs, mut s: Settings) -> Result<()> {
    let out = s.path("out", a.out.clone())?;
    match (a.graph.clone(), a.model.clone()) {
        (Some(graph), _) => {
            let graph = s.path("graph", Some(graph))?;
            let file =
                File::open(&graph).with_context(|| format!("opening {}", graph.display()))?;
            let g = EdgeList::read(BufReader::new(file))?.into_graph()?;
            characterize_graph(&g, &out)?;
        }
        (None, Some(model)) => {
            let model = s.path("model", Some(model))?;
            let h = Hierarchy::load(&model)?;
            for (attribute, graph) in h.attributes().iter().zip(h.graphs()) {
                print!("{attribute}: ");
                characterize_graph(graph, &out.join(attribute.name()))?;
            }
        }
        (None, None) => {
            return Err(UsageError("one of `--graph` or `--model` is required".into()).into())
        }
    }
    s.write_into(&out)
}

fn generate(a: &GenerateArgs, mut s: Settings) -> Result<()> {
    let model = s.path("model", a.model.clone())?;
    let length: usize = s.require("length", a.length)?;
    let count = s.get("count", a.count, 1usize)?;
    let seed = s.seed("walk_seed", a.seed)?;
    let out = s.path("out", a.out.clone())?;
    let h =
        Hierarchy::load(&model).with_context(|| format!("loading model {}", model.display()))?;
    let records = generate_many(&h, length, count, seed)?;
    write_corpus(create(&out)?, &records).with_context(|| format!("writing {}", out.display()))?;
    s.write_beside(&out)?;
    println!("generated={count} length={length}");
    Ok(())
}

fn benchmark_options(
    m: &ModelArgs,
    splits: Option<String>,
    seed: u64,
    s: &mut Settings,
) -> Result<BenchmarkOptions> {
    let mut options = BenchmarkOptions::new(seed);
    options.splits = parse_splits(&s.get("splits", splits, "0.5,0.7,0.9".into())?)?;
    options.decay = s.get("decay", m.decay, options.decay)?;
    options.layers =
        parse_layers(&s.get("layers", m.layers.clone(), format_layers(&options.layers))?)?;
    s.set("layers", format_layers(&options.layers));
    options.smoothing = s.get("smoothing", m.smoothing, true)?;
    Ok(options)
}

fn print_report(report: &EvalReport) {
    println!(
        "{:>12} {:>6} {:>14} {:>14}",
        "model", "split", "L (nat)", "L (log10)"
    );
    for r in &report.rows {
        println!(
            "{:>12} {:>6} {:>14.4} {:>14.4}",
            r.model.name(),
            r.split,
            r.avg_loglik_nat,
            r.avg_loglik_log10()
        );
    }
    for split in report.splits() {
        let gap = |a, b| report.gap_log10(a, b, split).unwrap_or(f64::NAN);
        println!(
            "split {split}: hierarchical - multi-hop = {:.4} decades, multi-hop - single-hop = {:.4} decades",
            gap(ModelKind::Hierarchical, ModelKind::MultiHop),
            gap(ModelKind::MultiHop, ModelKind::SingleHop)
        );
    }
}

fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    report
        .write_csv(create(path)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn evaluate(a: &EvaluateArgs, mut s: Settings) -> Result<()> {
    let corpus_path = s.path("corpus", a.corpus.clone())?;
    let seed = s.seed("split_seed", a.seed)?;
    let out = s.path("out", a.out.clone())?;
    let options = benchmark_options(&a.model, a.splits.clone(), seed, &mut s)?;
    let corpus = assign_genres(read_corpus(&corpus_path)?)?;
    let report = run_benchmark(&corpus, &options)?;
    write_report(&report, &out)?;
    s.write_beside(&out)?;
    print_report(&report);
    Ok(())
}

fn bench(a: &BenchArgs, mut s: Settings) -> Result<()> {
    let seed = s.seed("seed", a.seed)?;
    let out = s.get(
        "out",
        a.out.as_ref().map(|p| p.display().to_string()),
        ".".into(),
    )?;
    let out = PathBuf::from(out);
    let mut corpus = if s.get("synthetic", a.synthetic.then_some(true), false)? {
        planted_corpus(&SynthConfig::default(), seed)?
    } else {
        let path = s.path("corpus", a.corpus.clone())?;
        read_corpus(&path)?
    };
    if s.get("augment", a.augment.then_some(true), false)? {
        corpus = augment_corpus(&corpus, seed)?.corpus;
    }
    let options = benchmark_options(&a.model, a.splits.clone(), seed, &mut s)?;
    let corpus = assign_genres(corpus)?;
    let report = run_benchmark(&corpus, &options)?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_report(&report, &out.join("report.csv"))?;
    s.write_into(&out)?;
    print_report(&report);
    Ok(())
}
