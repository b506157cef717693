//! End-to-end experiments: ingest → filter → split → cluster → rank →
//! evaluate, plus parameter sweeps and report files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::clustering::{choose_k, coarse_cluster, Clustering};
use crate::corpus::{
    build_graph, filter_by_degree_with, parse_triples, temporal_split, DegreeMode, Interaction,
    SplitCorpus, SplitSummary, TripartiteGraph,
};
use crate::error::{Error, Result};
use crate::eval::{self, median, metrics_at_k, run_timed, round3, ConfigEcho, EvalReport, Timing, WorkCounters};
use crate::profiles::{build_profiles, check_unit, UserProfile};
use crate::recommend::{fcum_work, rank_fcum, rank_ucf, ucf_work, RankList, RankOptions};

/// Sub-seed stream for synthetic corpus generation.
pub const SEED_STREAM_SYNTHETIC: u64 = 1;
/// Sub-seed stream for the initial cluster assignment.
pub const SEED_STREAM_CLUSTERS: u64 = 2;

/// Derives an independent seed for one consumer of the run seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ucf,
    Fcum,
    Both,
}

impl Mode {
    pub fn runs_ucf(self) -> bool {
        matches!(self, Mode::Ucf | Mode::Both)
    }

    pub fn runs_fcum(self) -> bool {
        matches!(self, Mode::Fcum | Mode::Both)
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ucf" => Ok(Mode::Ucf),
            "fcum" => Ok(Mode::Fcum),
            "both" => Ok(Mode::Both),
            other => Err(Error::config(format!("unknown mode `{other}` (expected ucf, fcum or both)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(skip)]
    pub input: Option<PathBuf>,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    pub mode: Mode,
    pub degree_threshold: usize,
    pub degree_mode: DegreeMode,
    pub split_ratio: f64,
    pub beta: f64,
    pub gamma: f64,
    pub avg_cluster_size: usize,
    pub iterations: usize,
    pub k_list: Vec<usize>,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    /// Timed repetitions; the reported times are medians.
    pub repeats: usize,
    pub keep_zero_scores: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            input: None,
            output: None,
            mode: Mode::Both,
            degree_threshold: 5,
            degree_mode: DegreeMode::Triples,
            split_ratio: 0.8,
            beta: 0.5,
            gamma: 0.5,
            avg_cluster_size: 90,
            iterations: 2,
            k_list: (1..=20).collect(),
            seed: 42,
            threads: 0,
            repeats: 3,
            keep_zero_scores: true,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::config(format!("{key}: expected a boolean, got `{other}`"))),
    }
}

/// Parses `1..20`, `5,10,15` or mixtures such as `1..5,10`.
pub fn parse_k_list(value: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once("..") {
            let hi = hi.strip_prefix('=').unwrap_or(hi);
            let (lo, hi): (usize, usize) = (parse_num("k_list", lo)?, parse_num("k_list", hi)?);
            if lo > hi {
                return Err(Error::config(format!("k_list: empty range `{part}`")));
            }
            out.extend(lo..=hi);
        } else {
            out.push(parse_num("k_list", part)?);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

impl ExperimentConfig {
    /// Sets one field by name. Dashes in `key` are treated as underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        match key.as_str() {
            "input" => self.input = Some(PathBuf::from(value.trim())),
            "output" => self.output = Some(PathBuf::from(value.trim())),
            "mode" => self.mode = value.trim().parse()?,
            "degree_threshold" => self.degree_threshold = parse_num(&key, value)?,
            "degree_mode" => self.degree_mode = value.trim().parse()?,
            "split_ratio" => self.split_ratio = parse_num(&key, value)?,
            "beta" => self.beta = parse_num(&key, value)?,
            "gamma" => self.gamma = parse_num(&key, value)?,
            "avg_cluster_size" => self.avg_cluster_size = parse_num(&key, value)?,
            "iterations" => self.iterations = parse_num(&key, value)?,
            "k_list" => self.k_list = parse_k_list(value)?,
            "seed" => self.seed = parse_num(&key, value)?,
            "threads" => self.threads = parse_num(&key, value)?,
            "repeats" => self.repeats = parse_num(&key, value)?,
            "keep_zero_scores" => self.keep_zero_scores = parse_bool(&key, value)?,
            _ => return Err(Error::config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are ignored.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("config line {}: expected key=value", n + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("beta", self.beta)?;
        check_unit("gamma", self.gamma)?;
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::config(format!("split_ratio {} not in (0, 1)", self.split_ratio)));
        }
        if self.avg_cluster_size == 0 {
            return Err(Error::config("avg_cluster_size must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations must be at least 1"));
        }
        if self.repeats == 0 {
            return Err(Error::config("repeats must be at least 1"));
        }
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return Err(Error::config("k_list must be non-empty and contain only values >= 1"));
        }
        Ok(())
    }

    fn max_k(&self) -> usize {
        self.k_list.iter().copied().max().unwrap_or(1)
    }

    fn echo(&self, mode: &str, clusters: usize) -> ConfigEcho {
        ConfigEcho {
            mode: mode.to_owned(),
            beta: self.beta,
            gamma: self.gamma,
            clusters,
            avg_cluster_size: self.avg_cluster_size,
            iterations: self.iterations,
            degree_threshold: self.degree_threshold,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    /// FCUM total time over UCF total time.
    #[serde(serialize_with = "round3")]
    pub time_ratio: f64,
    /// FCUM scored work over UCF scored work.
    pub work_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub corpus: SplitSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ucf: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fcum: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
}

impl ExperimentReport {
    /// Zeroes every wall-clock derived field, leaving only reproducible data.
    pub fn strip_timing(&mut self) {
        for r in self.ucf.iter_mut().chain(self.fcum.iter_mut()) {
            r.timing = Timing::default();
        }
        if let Some(c) = self.comparison.as_mut() {
            c.time_ratio = 0.0;
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Corpus counts followed by one `k recall precision f1` record per k
    /// for each algorithm that ran.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# corpus")?;
        self.corpus.write_to(&mut w)?;
        for (name, report) in [("ucf", &self.ucf), ("fcum", &self.fcum)] {
            let Some(report) = report else { continue };
            writeln!(w, "# {name}")?;
            writeln!(w, "k\trecall\tprecision\tf1")?;
            for m in &report.per_k {
                writeln!(w, "{}\t{:.5}\t{:.5}\t{:.5}", m.k, m.recall, m.precision, m.f1)?;
            }
        }
        w.flush()
    }

    /// Writes `report.txt` and `report.json` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        write_pair(dir, |w| self.write_text(w), &self.to_json())
    }
}

fn write_pair(
    dir: &Path,
    text: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    json: &str,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let txt_path = dir.join("report.txt");
    let file = File::create(&txt_path).map_err(|e| Error::io(&txt_path, e))?;
    text(&mut BufWriter::new(file)).map_err(|e| Error::io(&txt_path, e))?;
    let json_path = dir.join("report.json");
    std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    Ok(())
}

/// Everything one run produced, for callers that persist ranklists or
/// clusterings besides the report.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub ucf: Option<Vec<RankList>>,
    pub fcum: Option<Vec<RankList>>,
    pub clustering: Option<Clustering>,
}

pub fn load_interactions(path: &Path) -> Result<Vec<Interaction>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_triples(BufReader::new(file)).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        Error::Stream(source) => Error::io(path, source),
        other => other,
    })
}

/// The filtered graph and its split.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub filtered: TripartiteGraph,
    pub split: SplitCorpus,
}

pub fn prepare(config: &ExperimentConfig, interactions: &[Interaction]) -> Result<Prepared> {
    config.validate()?;
    let graph = build_graph(interactions);
    let filtered = filter_by_degree_with(&graph, config.degree_threshold, config.degree_mode);
    if filtered.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let split = temporal_split(&filtered, config.split_ratio)?;
    Ok(Prepared { filtered, split })
}

/// Reads `config.input` and runs the whole pipeline.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let path = config
        .input
        .as_deref()
        .ok_or_else(|| Error::config("no input file given"))?;
    run_on_interactions(config, &load_interactions(path)?)
}

pub fn run_on_interactions(config: &ExperimentConfig, interactions: &[Interaction]) -> Result<ExperimentReport> {
    let prepared = prepare(config, interactions)?;
    Ok(run_prepared(config, &prepared)?.report)
}

pub fn run_prepared(config: &ExperimentConfig, prepared: &Prepared) -> Result<RunOutput> {
    config.validate()?;
    if config.threads == 0 {
        return execute(config, prepared);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(|| execute(config, prepared))
}

fn evaluate(lists: &[RankList], split: &SplitCorpus, k_list: &[usize]) -> Result<Vec<eval::MetricsAtK>> {
    k_list.iter().map(|&k| metrics_at_k(lists, &split.test, k)).collect()
}

fn execute(config: &ExperimentConfig, prepared: &Prepared) -> Result<RunOutput> {
    let split = &prepared.split;
    let train = &split.train;
    let opts = RankOptions {
        beta: config.beta,
        k: config.max_k(),
        keep_zero_scores: config.keep_zero_scores,
    };

    // One profile build is shared by both algorithms; its cost is charged to each.
    let (profiles, profile_secs) = run_timed(|| build_profiles(train));
    let baseline_work = ucf_work(train.n_users(), train.n_items(), train.n_tags());
    let base_counters = WorkCounters {
        n_users: train.n_users(),
        n_items: train.n_items(),
        n_tags: train.n_tags(),
        ucf_work: baseline_work,
        ..WorkCounters::default()
    };

    let mut ucf_lists = None;
    let mut ucf_report = None;
    if config.mode.runs_ucf() {
        let mut totals = Vec::with_capacity(config.repeats);
        let mut scores = Vec::with_capacity(config.repeats);
        let mut lists = Vec::new();
        for _ in 0..config.repeats {
            let (l, secs) = run_timed(|| rank_ucf(train, &profiles, opts));
            lists = l;
            scores.push(secs);
            totals.push(profile_secs + secs);
        }
        ucf_report = Some(EvalReport {
            per_k: evaluate(&lists, split, &config.k_list)?,
            timing: Timing {
                cluster_seconds: 0.0,
                score_seconds: median(&scores),
                total_seconds: median(&totals),
            },
            work: WorkCounters {
                clusters: 1,
                non_empty_clusters: 1,
                clustered_users: train.n_users(),
                scored_work: baseline_work,
                ..base_counters.clone()
            },
            config: config.echo("ucf", 1),
        });
        ucf_lists = Some(lists);
    }

    let mut fcum_lists = None;
    let mut fcum_report = None;
    let mut clustering_out = None;
    if config.mode.runs_fcum() {
        let k_c = choose_k(train.n_users(), config.avg_cluster_size);
        let cluster_seed = derive_seed(config.seed, SEED_STREAM_CLUSTERS);
        let mut totals = Vec::with_capacity(config.repeats);
        let mut cluster_times = Vec::with_capacity(config.repeats);
        let mut scores = Vec::with_capacity(config.repeats);
        let mut result = None;
        for _ in 0..config.repeats {
            let (clustering, c_secs) =
                run_timed(|| coarse_cluster(&profiles, k_c, config.iterations, config.gamma, cluster_seed));
            let clustering = clustering?;
            let (lists, s_secs) = run_timed(|| rank_fcum(&clustering, train, &profiles, opts));
            cluster_times.push(c_secs);
            scores.push(s_secs);
            totals.push(profile_secs + c_secs + s_secs);
            result = Some((clustering, lists));
        }
        let (clustering, lists) = result.expect("at least one repeat");
        fcum_report = Some(EvalReport {
            per_k: evaluate(&lists, split, &config.k_list)?,
            timing: Timing {
                cluster_seconds: median(&cluster_times),
                score_seconds: median(&scores),
                total_seconds: median(&totals),
            },
            work: fcum_counters(&clustering, &profiles, base_counters.clone()),
            config: config.echo("fcum", k_c),
        });
        fcum_lists = Some(lists);
        clustering_out = Some(clustering);
    }

    let comparison = match (&ucf_report, &fcum_report) {
        (Some(u), Some(f)) => Some(Comparison {
            time_ratio: f.timing.total_seconds / u.timing.total_seconds,
            work_ratio: f.work.scored_work as f64 / u.work.scored_work as f64,
        }),
        _ => None,
    };

    Ok(RunOutput {
        report: ExperimentReport {
            config: config.clone(),
            corpus: split.summary(&prepared.filtered),
            ucf: ucf_report,
            fcum: fcum_report,
            comparison,
        },
        ucf: ucf_lists,
        fcum: fcum_lists,
        clustering: clustering_out,
    })
}

fn fcum_counters(clustering: &Clustering, profiles: &[UserProfile], base: WorkCounters) -> WorkCounters {
    WorkCounters {
        clusters: clustering.k,
        non_empty_clusters: clustering.non_empty_clusters(),
        clustered_users: clustering.user_clusters.iter().map(Vec::len).sum(),
        scored_work: fcum_work(clustering, profiles),
        ..base
    }
}

/// Parameters a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Iterations,
    AvgClusterSize,
    DegreeThreshold,
    Beta,
    Gamma,
}

impl SweepParam {
    pub fn key(self) -> &'static str {
        match self {
            SweepParam::Iterations => "iterations",
            SweepParam::AvgClusterSize => "avg_cluster_size",
            SweepParam::DegreeThreshold => "degree_threshold",
            SweepParam::Beta => "beta",
            SweepParam::Gamma => "gamma",
        }
    }

    fn is_integer(self) -> bool {
        matches!(
            self,
            SweepParam::Iterations | SweepParam::AvgClusterSize | SweepParam::DegreeThreshold
        )
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "iterations" => Ok(SweepParam::Iterations),
            "avg_cluster_size" => Ok(SweepParam::AvgClusterSize),
            "degree_threshold" => Ok(SweepParam::DegreeThreshold),
            "beta" => Ok(SweepParam::Beta),
            "gamma" => Ok(SweepParam::Gamma),
            other => Err(Error::config(format!("cannot sweep `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRun {
    pub value: f64,
    pub report: ExperimentReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub parameter: SweepParam,
    pub runs: Vec<SweepRun>,
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for run in &self.runs {
            writeln!(w, "## {}={}", self.parameter.key(), run.value)?;
            run.report.write_text(&mut w)?;
        }
        w.flush()
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        write_pair(dir, |w| self.write_text(w), &self.to_json())
    }

    pub fn strip_timing(&mut self) {
        for run in &mut self.runs {
            run.report.strip_timing();
        }
    }
}

/// Runs one experiment per value of `param`, everything else fixed.
pub fn sweep_interactions(
    config: &ExperimentConfig,
    interactions: &[Interaction],
    param: SweepParam,
    values: &[f64],
) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    let mut runs = Vec::with_capacity(values.len());
    for &value in values {
        let text = if param.is_integer() {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(Error::config(format!("{} takes integers, got {value}", param.key())));
            }
            format!("{}", value as u64)
        } else {
            value.to_string()
        };
        let mut cfg = config.clone();
        cfg.set(param.key(), &text)?;
        runs.push(SweepRun {
            value,
            report: run_on_interactions(&cfg, interactions)?,
        });
    }
    Ok(SweepReport { parameter: param, runs })
}

/// [`sweep_interactions`] over `config.input`.
pub fn sweep(config: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<SweepReport> {
    let path = config
        .input
        .as_deref()
        .ok_or_else(|| Error::config("no input file given"))?;
    sweep_interactions(config, &load_interactions(path)?, param, values)
}
