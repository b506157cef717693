use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fcum_core::clustering::{choose_k, coarse_cluster};
use fcum_core::corpus::write_triples;
use fcum_core::experiment::{
    derive_seed, load_interactions, prepare, run_prepared, sweep_interactions, SweepParam,
    SEED_STREAM_CLUSTERS, SEED_STREAM_SYNTHETIC,
};
use fcum_core::recommend::write_ranklists;
use fcum_core::{build_profiles, generate_synthetic, Error, ExperimentConfig, SyntheticSpec};

/// Cluster-accelerated collaborative filtering experiments on
/// user/item/tag triples.
#[derive(Debug, Parser)]
#[command(name = "fcum", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full pipeline and report accuracy and timing.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Also dump ranklists as user, rank, item, score.
        #[arg(long)]
        ranklists: Option<PathBuf>,
    },
    /// Repeat `run` over a list of values for one parameter.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// iterations, avg_cluster_size, degree_threshold, beta or gamma.
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. `2,4,6,8,10`.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
    },
    /// Write a synthetic planted-community corpus.
    Gen(GenArgs),
    /// Filter and split a corpus, writing train.tsv, test.tsv and summary.txt.
    Split {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Cluster the training users and dump `user<TAB>cluster`.
    Cluster {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// key=value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    output: Option<String>,
    /// ucf, fcum or both.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    degree_threshold: Option<String>,
    /// triples or neighbors.
    #[arg(long)]
    degree_mode: Option<String>,
    #[arg(long)]
    split_ratio: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    avg_cluster_size: Option<String>,
    #[arg(long)]
    iterations: Option<String>,
    /// e.g. `1..20` or `5,10,15,20`.
    #[arg(long)]
    k_list: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    repeats: Option<String>,
    #[arg(long)]
    keep_zero_scores: Option<String>,
}

impl ExperimentArgs {
    fn to_config(&self) -> Result<ExperimentConfig, Error> {
        let mut config = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            config.apply_kv(&text)?;
        }
        let flags = [
            ("input", &self.input),
            ("output", &self.output),
            ("mode", &self.mode),
            ("degree_threshold", &self.degree_threshold),
            ("degree_mode", &self.degree_mode),
            ("split_ratio", &self.split_ratio),
            ("beta", &self.beta),
            ("gamma", &self.gamma),
            ("avg_cluster_size", &self.avg_cluster_size),
            ("iterations", &self.iterations),
            ("k_list", &self.k_list),
            ("seed", &self.seed),
            ("threads", &self.threads),
            ("repeats", &self.repeats),
            ("keep_zero_scores", &self.keep_zero_scores),
        ];
        for (key, value) in flags {
            if let Some(value) = value {
                config.set(key, value)?;
            }
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Destination TSV file.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1600)]
    users: usize,
    #[arg(long, default_value_t = 20000)]
    items: usize,
    #[arg(long, default_value_t = 5000)]
    tags: usize,
    #[arg(long, default_value_t = 16)]
    communities: usize,
    #[arg(long, default_value_t = 120)]
    triples_per_user: usize,
    #[arg(long, default_value_t = 0.85)]
    in_community_prob: f64,
    #[arg(long, default_value_t = 1.0)]
    popularity_exponent: f64,
    /// Run seed; the generator uses a sub-seed derived from it.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn input_of(config: &ExperimentConfig) -> Result<&Path, Error> {
    config
        .input
        .as_deref()
        .ok_or_else(|| Error::Config("--input is required".into()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { exp, ranklists } => {
            let config = exp.to_config()?;
            let prepared = prepare(&config, &load_interactions(input_of(&config)?)?)?;
            let out = run_prepared(&config, &prepared)?;
            match &config.output {
                Some(dir) => out.report.write_to_dir(dir)?,
                None => out.report.write_text(std::io::stdout().lock())?,
            }
            if let Some(path) = ranklists {
                let lists = out.fcum.as_ref().or(out.ucf.as_ref()).expect("some mode ran");
                write_ranklists(create(&path)?, lists, &prepared.split.train).map_err(|e| Error::io(&path, e))?;
            }
            if let Some(c) = &out.report.comparison {
                eprintln!("fcum/ucf time ratio {:.3}, work ratio {:.4}", c.time_ratio, c.work_ratio);
            }
        }
        Command::Sweep { exp, param, values } => {
            let config = exp.to_config()?;
            let param: SweepParam = param.parse()?;
            let data = load_interactions(input_of(&config)?)?;
            let report = sweep_interactions(&config, &data, param, &values)?;
            match &config.output {
                Some(dir) => report.write_to_dir(dir)?,
                None => report.write_text(std::io::stdout().lock())?,
            }
        }
        Command::Gen(args) => {
            let spec = SyntheticSpec {
                n_users: args.users,
                n_items: args.items,
                n_tags: args.tags,
                n_communities: args.communities,
                triples_per_user: args.triples_per_user,
                in_community_prob: args.in_community_prob,
                popularity_exponent: args.popularity_exponent,
                seed: derive_seed(args.seed, SEED_STREAM_SYNTHETIC),
            };
            let data = generate_synthetic(&spec)?;
            write_triples(create(&args.output)?, &data).map_err(|e| Error::io(&args.output, e))?;
        }
        Command::Split { exp } => {
            let config = exp.to_config()?;
            let dir = config
                .output
                .clone()
                .ok_or_else(|| Error::Config("--output directory is required".into()))?;
            let prepared = prepare(&config, &load_interactions(input_of(&config)?)?)?;
            let split = &prepared.split;
            let train_path = dir.join("train.tsv");
            write_triples(create(&train_path)?, &split.train.interactions().collect::<Vec<_>>())
                .map_err(|e| Error::io(&train_path, e))?;
            let test_path = dir.join("test.tsv");
            write_triples(create(&test_path)?, &split.test_triples).map_err(|e| Error::io(&test_path, e))?;
            let summary_path = dir.join("summary.txt");
            split
                .summary(&prepared.filtered)
                .write_to(create(&summary_path)?)
                .map_err(|e| Error::io(&summary_path, e))?;
        }
        Command::Cluster { exp } => {
            let config = exp.to_config()?;
            let prepared = prepare(&config, &load_interactions(input_of(&config)?)?)?;
            let train = &prepared.split.train;
            let profiles = build_profiles(train);
            let k = choose_k(train.n_users(), config.avg_cluster_size);
            let clustering = coarse_cluster(
                &profiles,
                k,
                config.iterations,
                config.gamma,
                derive_seed(config.seed, SEED_STREAM_CLUSTERS),
            )?;
            match &config.output {
                Some(path) => clustering
                    .write_assignment(create(path)?, train)
                    .map_err(|e| Error::io(path, e))?,
                None => clustering.write_assignment(std::io::stdout().lock(), train)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
