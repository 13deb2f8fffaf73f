//! Subcommand implementations. Each resolves its configuration (file first,
//! flags override, then defaults), runs the core pipeline, and writes its
//! artifacts plus a manifest into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use recause::dataset::BinaryDataset;
use recause::effects::{analyze_causes, rank_causes, CauseRecord, RankMode};
use recause::ensemble::{run_ensemble, EnsembleReport, EnsembleResult};
use recause::error::{Error, Result};
use recause::eval::evaluate as evaluate_result;
use recause::events::{aggregate_bag_of_events, apply_frequency_vocabulary, EventLog};
use recause::learn::{LearnerKind, LearnerParams, LearnerSpec};
use recause::report::build_report;
use recause::scores::ScoreConfig;
use recause::synth::{random_dag, sample_parametric, DagGenConfig, GenMode, Topology};
use recause::{MixedGraph, StructuralConstraints};

use crate::{DiscoverArgs, EffectsArgs, EvaluateArgs, ReportArgs, SimulateArgs};

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::config(format!("input file {} does not exist", path.display())));
    }
    fs::read_to_string(path).map_err(|e| Error::data(format!("reading {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::internal(format!("writing {}: {e}", path.display())))
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)
        .map_err(|e| Error::internal(format!("creating {}: {e}", path.display())))
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&PathBuf>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            if !p.exists() {
                return Err(Error::config(format!("config file {} does not exist", p.display())));
            }
            let text =
                fs::read_to_string(p).map_err(|e| Error::config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::config(format!("config {}: {e}", p.display())))
        }
    }
}

fn to_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| Error::internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::config(format!("--{flag} is required")))
}

#[derive(Serialize)]
struct Manifest<C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: C,
    outputs: Vec<String>,
}

fn write_manifest<C: Serialize>(out: &Path, command: &'static str, config: C, outputs: Vec<String>) -> Result<()> {
    let manifest = Manifest {
        tool: "recause",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        outputs,
    };
    write_text(&out.join("manifest.json"), &to_pretty(&manifest)?)
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SimulateFile {
    topology: Option<String>,
    nodes: Option<usize>,
    sparsity: Option<f64>,
    mode: Option<String>,
    samples: Option<usize>,
    seeds: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SimulateConfig {
    topology: String,
    nodes: usize,
    sparsity: f64,
    mode: String,
    samples: usize,
    seeds: usize,
    seed: u64,
    run_seeds: Vec<(u64, u64)>,
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let file: SimulateFile = load_config(args.config.as_ref())?;
    let topology = Topology::parse(&required(args.topology.or(file.topology), "topology")?)?;
    let nodes = required(args.nodes.or(file.nodes), "nodes")?;
    let sparsity = required(args.sparsity.or(file.sparsity), "sparsity")?;
    let mode = GenMode::parse(&args.mode.or(file.mode).unwrap_or_else(|| "l".to_string()))?;
    let samples = args.samples.or(file.samples).unwrap_or(nodes * 1000);
    let seeds = args.seeds.or(file.seeds).unwrap_or(1);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let out = required(args.out.or(file.out), "out")?;
    if seeds == 0 {
        return Err(Error::config("--seeds must be at least 1".to_string()));
    }
    ensure_dir(&out)?;

    // one stream hands out independent (dag, data) seeds per run, so the
    // manifest alone reproduces every file
    let mut seeder = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let run_seeds: Vec<(u64, u64)> = (0..seeds).map(|_| (seeder.gen(), seeder.gen())).collect();

    let mut outputs = Vec::new();
    for (i, &(dag_seed, data_seed)) in run_seeds.iter().enumerate() {
        let cfg = DagGenConfig { topology, n: nodes, sparsity, seed: dag_seed };
        let dag = random_dag(&cfg)?;
        let (data, scm) =
            sample_parametric(&dag, recause::synth::OUTCOME_NODE, mode, samples, data_seed)?;
        let dag_file = format!("dag_{i:02}.txt");
        let data_file = format!("data_{i:02}.csv");
        let scm_file = format!("scm_{i:02}.json");
        write_text(&out.join(&dag_file), &dag.to_text())?;
        data.to_csv_path(out.join(&data_file))?;
        write_text(&out.join(&scm_file), &(scm.to_json()? + "\n"))?;
        outputs.extend([dag_file, data_file, scm_file]);
    }
    let config = SimulateConfig {
        topology: topology.name().to_string(),
        nodes,
        sparsity,
        mode: mode.name().to_string(),
        samples,
        seeds,
        seed,
        run_seeds,
    };
    write_manifest(&out, "simulate", config, outputs)
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct DiscoverFile {
    data: Option<PathBuf>,
    events: Option<PathBuf>,
    outcome: Option<String>,
    learners: Option<String>,
    alpha: Option<f64>,
    max_cond: Option<usize>,
    bootstrap_runs: Option<usize>,
    ess: Option<f64>,
    tau: Option<u32>,
    keep_fraction: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct DiscoverConfig {
    input: String,
    input_kind: &'static str,
    outcome: String,
    learners: Vec<String>,
    alpha: f64,
    max_cond: usize,
    bootstrap_runs: usize,
    ess: f64,
    tau: Option<u32>,
    keep_fraction: Option<f64>,
    seed: u64,
}

fn parse_learners(spec: &str) -> Result<Vec<LearnerSpec>> {
    let specs = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| LearnerKind::parse(s).map(LearnerSpec::new))
        .collect::<Result<Vec<_>>>()?;
    if specs.is_empty() {
        return Err(Error::config("at least one learner is required".to_string()));
    }
    Ok(specs)
}

pub fn discover(args: DiscoverArgs) -> Result<()> {
    let file: DiscoverFile = load_config(args.config.as_ref())?;
    let data_path = args.data.or(file.data);
    let events_path = args.events.or(file.events);
    let outcome = args.outcome.or(file.outcome).unwrap_or_else(|| "y".to_string());
    let learner_spec = args.learners.or(file.learners);
    let alpha = args.alpha.or(file.alpha).unwrap_or(0.05);
    let max_cond = args.max_cond.or(file.max_cond).unwrap_or(5);
    let bootstrap_runs = args.bootstrap_runs.or(file.bootstrap_runs).unwrap_or(20);
    let ess = args.ess.or(file.ess).unwrap_or(1.0);
    let tau = args.tau.or(file.tau);
    let keep_fraction = args.keep_fraction.or(file.keep_fraction);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let out = required(args.out.or(file.out), "out")?;

    let specs = match &learner_spec {
        Some(s) => parse_learners(s)?,
        None => recause::learn::default_ensemble(),
    };
    let mut params = LearnerParams::default();
    params.alpha = alpha;
    params.max_cond_size = max_cond;
    params.bootstrap_runs = bootstrap_runs;
    params.score_cfg = ScoreConfig { ess, ..params.score_cfg };
    params.seed = seed;

    let (input, input_kind, data, log) = match (&data_path, &events_path) {
        (Some(_), Some(_)) => {
            return Err(Error::config("--data and --events are mutually exclusive".to_string()));
        }
        (Some(p), None) => {
            if tau.is_some() || keep_fraction.is_some() {
                return Err(Error::config(
                    "--tau and --keep-fraction apply to event input only".to_string(),
                ));
            }
            if !p.exists() {
                return Err(Error::config(format!("input file {} does not exist", p.display())));
            }
            let data = BinaryDataset::from_csv_path(p, &outcome)?;
            (p.display().to_string(), "dataset", data, None)
        }
        (None, Some(p)) => {
            let tau = required(tau, "tau")?;
            if !p.exists() {
                return Err(Error::config(format!("input file {} does not exist", p.display())));
            }
            let log = EventLog::from_csv_path(p, &outcome)?.restrict_to_population()?;
            let mut data = aggregate_bag_of_events(&log, tau)?;
            if let Some(kf) = keep_fraction {
                data = apply_frequency_vocabulary(&data, kf)?;
            }
            (p.display().to_string(), "events", data, Some(log))
        }
        (None, None) => {
            return Err(Error::config("either --data or --events is required".to_string()));
        }
    };

    ensure_dir(&out)?;
    let constraints = StructuralConstraints::outcome_sink(&outcome, data.names());
    let result = run_ensemble(&data, log.as_ref(), &specs, &constraints, &params)?;

    let mut outputs = Vec::new();
    let graph_dir = out.join("graphs");
    ensure_dir(&graph_dir)?;
    for (k, g) in result.graphs.iter().enumerate() {
        let name = format!("graph_{k:02}_{}.txt", result.algorithm_names[k]);
        write_text(&graph_dir.join(&name), &g.to_text())?;
        outputs.push(format!("graphs/{name}"));
    }
    write_text(&out.join("ensemble.json"), &to_pretty(&result.report())?)?;
    outputs.push("ensemble.json".to_string());
    if input_kind == "events" {
        data.to_csv_path(out.join("dataset.csv"))?;
        outputs.push("dataset.csv".to_string());
    }
    let config = DiscoverConfig {
        input,
        input_kind,
        outcome,
        learners: result.algorithm_names.clone(),
        alpha,
        max_cond,
        bootstrap_runs,
        ess,
        tau,
        keep_fraction,
        seed,
    };
    write_manifest(&out, "discover", config, outputs)
}

/// Rebuilds the ensemble result from a discover output directory: the
/// report carries outcome and algorithm order, the graph files carry the
/// structures, and ancestor tuples are recomputed.
fn load_discovery(dir: &Path) -> Result<(EnsembleResult, EnsembleReport)> {
    let report_path = dir.join("ensemble.json");
    if !report_path.exists() {
        return Err(Error::config(format!(
            "{} is not a discovery output directory (missing ensemble.json)",
            dir.display()
        )));
    }
    let report: EnsembleReport = serde_json::from_str(&read_text(&report_path)?)
        .map_err(|e| Error::data(format!("bad ensemble.json: {e}")))?;
    let graph_dir = dir.join("graphs");
    let mut names: Vec<String> = fs::read_dir(&graph_dir)
        .map_err(|e| Error::config(format!("reading {}: {e}", graph_dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .filter(|n| n.starts_with("graph_") && n.ends_with(".txt"))
        .collect();
    names.sort();
    if names.len() != report.algorithms.len() {
        return Err(Error::data(format!(
            "found {} graph files for {} algorithms",
            names.len(),
            report.algorithms.len()
        )));
    }
    let graphs = names
        .iter()
        .map(|n| MixedGraph::from_text(&read_text(&graph_dir.join(n))?))
        .collect::<Result<Vec<_>>>()?;
    let result = EnsembleResult::from_graphs(graphs, report.algorithms.clone(), &report.outcome)?;
    Ok((result, report))
}

/// Persisted effect records, self-describing enough for the report stage.
#[derive(Serialize, Deserialize)]
struct EffectsFile {
    outcome: String,
    algorithms: Vec<String>,
    alpha: f64,
    records: Vec<CauseRecord>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EffectsArgsFile {
    data: Option<PathBuf>,
    discovery: Option<PathBuf>,
    alpha: Option<f64>,
    mode: Option<String>,
    top: Option<usize>,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct EffectsConfig {
    data: String,
    discovery: String,
    outcome: String,
    alpha: f64,
    mode: String,
    top: usize,
}

fn parse_rank_mode(s: Option<String>) -> Result<(RankMode, String)> {
    let name = s.unwrap_or_else(|| "risk".to_string());
    Ok((RankMode::parse(&name)?, name))
}

fn write_report_files(
    out: &Path,
    ranked: &[CauseRecord],
    algorithms: &[String],
    outputs: &mut Vec<String>,
) -> Result<()> {
    if ranked.is_empty() {
        eprintln!("warning: no cause records; writing empty report files");
    }
    let bundle = build_report(ranked, algorithms)?;
    for (name, text) in [
        ("ranked.csv", &bundle.ranked_csv),
        ("effects.svg", &bundle.effects_svg),
        ("modifiers.csv", &bundle.modifiers_csv),
        ("modifiers.svg", &bundle.modifiers_svg),
    ] {
        write_text(&out.join(name), text)?;
        outputs.push(name.to_string());
    }
    Ok(())
}

pub fn effects(args: EffectsArgs) -> Result<()> {
    let file: EffectsArgsFile = load_config(args.config.as_ref())?;
    let data_path = required(args.data.or(file.data), "data")?;
    let discovery = required(args.discovery.or(file.discovery), "discovery")?;
    let alpha = args.alpha.or(file.alpha).unwrap_or(0.05);
    let (mode, mode_name) = parse_rank_mode(args.mode.or(file.mode))?;
    let top = args.top.or(file.top).unwrap_or(10);
    let out = required(args.out.or(file.out), "out")?;

    let (result, _) = load_discovery(&discovery)?;
    if !data_path.exists() {
        return Err(Error::config(format!(
            "input file {} does not exist",
            data_path.display()
        )));
    }
    let data = BinaryDataset::from_csv_path(&data_path, &result.outcome)?;
    let records = analyze_causes(&data, &result, alpha)?;

    ensure_dir(&out)?;
    let mut outputs = Vec::new();
    let effects_file = EffectsFile {
        outcome: result.outcome.clone(),
        algorithms: result.algorithm_names.clone(),
        alpha,
        records: records.clone(),
    };
    write_text(&out.join("effects.json"), &to_pretty(&effects_file)?)?;
    outputs.push("effects.json".to_string());

    let ranked = rank_causes(&records, mode, top);
    write_report_files(&out, &ranked, &result.algorithm_names, &mut outputs)?;
    let config = EffectsConfig {
        data: data_path.display().to_string(),
        discovery: discovery.display().to_string(),
        outcome: result.outcome.clone(),
        alpha,
        mode: mode_name,
        top,
    };
    write_manifest(&out, "effects", config, outputs)
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EvaluateFile {
    discovery: Option<PathBuf>,
    truth: Option<PathBuf>,
    effects: Option<PathBuf>,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvaluateConfig {
    discovery: String,
    truth: String,
    effects: Option<String>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let file: EvaluateFile = load_config(args.config.as_ref())?;
    let discovery = required(args.discovery.or(file.discovery), "discovery")?;
    let truth_path = required(args.truth.or(file.truth), "truth")?;
    let effects_path = args.effects.or(file.effects);
    let out = required(args.out.or(file.out), "out")?;

    let (result, _) = load_discovery(&discovery)?;
    let truth = MixedGraph::from_text(&read_text(&truth_path)?)?;
    let effects_file: Option<EffectsFile> = match &effects_path {
        None => None,
        Some(p) => Some(
            serde_json::from_str(&read_text(p)?)
                .map_err(|e| Error::data(format!("bad effects file {}: {e}", p.display())))?,
        ),
    };
    let report = evaluate_result(&result, &truth, effects_file.as_ref().map(|f| f.records.as_slice()))?;

    ensure_dir(&out)?;
    write_text(&out.join("metrics.json"), &to_pretty(&report)?)?;

    // one flat row: the support metrics, then per-algorithm and vote F1
    let mut header = vec![
        "tp_support".to_string(),
        "fp_support".to_string(),
        "tp_sig_support".to_string(),
        "fp_sig_support".to_string(),
    ];
    let mut row = vec![
        format!("{:.6}", report.support.tp_support),
        format!("{:.6}", report.support.fp_support),
        fmt_opt(report.support.tp_sig_support),
        fmt_opt(report.support.fp_sig_support),
    ];
    for a in &report.per_algorithm {
        header.push(format!("f1_{}_{}", a.graph, a.algorithm));
        row.push(format!("{:.6}", a.f1));
    }
    header.push("f1_ensemble".to_string());
    row.push(format!("{:.6}", report.ensemble.f1));
    write_text(&out.join("eval.csv"), &format!("{}\n{}\n", header.join(","), row.join(",")))?;

    let config = EvaluateConfig {
        discovery: discovery.display().to_string(),
        truth: truth_path.display().to_string(),
        effects: effects_path.map(|p| p.display().to_string()),
    };
    write_manifest(
        &out,
        "evaluate",
        config,
        vec!["metrics.json".to_string(), "eval.csv".to_string()],
    )
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ReportFile {
    effects: Option<PathBuf>,
    mode: Option<String>,
    top: Option<usize>,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ReportConfig {
    effects: String,
    mode: String,
    top: usize,
}

pub fn report(args: ReportArgs) -> Result<()> {
    let file: ReportFile = load_config(args.config.as_ref())?;
    let effects_path = required(args.effects.or(file.effects), "effects")?;
    let (mode, mode_name) = parse_rank_mode(args.mode.or(file.mode))?;
    let top = args.top.or(file.top).unwrap_or(10);
    let out = required(args.out.or(file.out), "out")?;

    let effects_file: EffectsFile = serde_json::from_str(&read_text(&effects_path)?)
        .map_err(|e| Error::data(format!("bad effects file {}: {e}", effects_path.display())))?;

    ensure_dir(&out)?;
    let ranked = rank_causes(&effects_file.records, mode, top);
    let mut outputs = Vec::new();
    write_report_files(&out, &ranked, &effects_file.algorithms, &mut outputs)?;
    let config = ReportConfig {
        effects: effects_path.display().to_string(),
        mode: mode_name,
        top,
    };
    write_manifest(&out, "report", config, outputs)
}
