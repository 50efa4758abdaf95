use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use telewb_core::dataset::{Dataset, Interval};
use telewb_core::evaluation::{evaluate, Exclusions, SplitSpec, WhatIfSpec};
use telewb_core::importance::{compute, ImportanceConfig, ScoreKind};
use telewb_core::integral::{
    preprocess_integral, IntegralInputs, IntegralParams, PositionalTask, Representation, TargetVariant,
};
use telewb_core::learners::{LearnerSpec, ModelSpec, TrainedModel};
use telewb_core::metafile::{emit_metafile, InputDigest, Metafile, Stage};
use telewb_core::mex::{preprocess_mex, CleansePolicy, MexInputs, MexParams};
use telewb_core::run::{
    columns_path_for, execute_run, read_file, run_whatif, ArtifactKind, RunConfig, Source,
};
use telewb_core::synth::{linear_with_decoys, Coverage, IntegralSynth, MexSynth};
use telewb_service::ServiceConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(telewb_core::Error),
}

impl From<telewb_core::Error> for CliError {
    fn from(e: telewb_core::Error) -> Self {
        CliError::Failed(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(e.into())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "telewb", version, about = "Spacecraft telemetry workbench")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the MEX thermal-power dataset from the six channel files.
    PreprocessMex(PreprocessMexArgs),
    /// Build an INTEGRAL belt-crossing dataset.
    PreprocessIntegral(PreprocessIntegralArgs),
    /// Split, train, evaluate and rank features; writes all run artifacts.
    Train(TrainArgs),
    /// Predict a dataset with a saved model.
    Predict(ModelDataArgs),
    /// Masked RMSE/MAE of a saved model on a dataset.
    Evaluate(ModelDataArgs),
    /// Feature importance of a saved model, optionally on a time subset.
    Importance(ImportanceArgs),
    /// Re-run a finished run with extra exclusions and compare.
    Whatif(WhatIfArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Write seeded synthetic inputs.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct PreprocessMexArgs {
    /// Directory holding saa.csv, dmop.csv, ftl.csv, evt.csv, lt.csv and pw.csv.
    #[arg(long)]
    dir: Option<PathBuf>,
    #[arg(long)]
    saa: Option<PathBuf>,
    #[arg(long)]
    dmop: Option<PathBuf>,
    #[arg(long)]
    ftl: Option<PathBuf>,
    #[arg(long)]
    evt: Option<PathBuf>,
    #[arg(long)]
    lt: Option<PathBuf>,
    #[arg(long)]
    pw: Option<PathBuf>,
    /// JSON file with MexParams; flags override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    granularity: Option<u32>,
    #[arg(long, value_enum)]
    cleanse: Option<CleanseArg>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CleanseArg {
    DropRows,
    ImputeMean,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RepArg {
    PerRev,
    Positional,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaskArg {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Phase,
    Altitude,
}

#[derive(Debug, Args)]
struct PreprocessIntegralArgs {
    /// Directory holding orbit.csv, irem.csv and optionally eclipse.csv.
    #[arg(long)]
    dir: Option<PathBuf>,
    #[arg(long)]
    orbit: Option<PathBuf>,
    #[arg(long)]
    irem: Option<PathBuf>,
    #[arg(long)]
    eclipse: Option<PathBuf>,
    #[arg(long, value_enum)]
    rep: Option<RepArg>,
    #[arg(long, value_enum)]
    task: Option<TaskArg>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long)]
    bin_width: Option<u32>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    history_n: Option<usize>,
    #[arg(long)]
    history_m: Option<usize>,
    /// JSON file with IntegralParams; flags override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LearnerArg {
    Knn,
    Forest,
    Gboost,
    Fcnn,
}

impl LearnerArg {
    fn name(self) -> &'static str {
        match self {
            LearnerArg::Knn => "knn",
            LearnerArg::Forest => "forest",
            LearnerArg::Gboost => "gboost",
            LearnerArg::Fcnn => "fcnn",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScoreArg {
    Permutation,
    Genie3,
    Symbolic,
}

impl From<ScoreArg> for ScoreKind {
    fn from(s: ScoreArg) -> Self {
        match s {
            ScoreArg::Permutation => ScoreKind::Permutation,
            ScoreArg::Genie3 => ScoreKind::Genie3,
            ScoreArg::Symbolic => ScoreKind::Symbolic,
        }
    }
}

#[derive(Debug, Args)]
struct ExclusionArgs {
    /// Feature column to drop (repeatable).
    #[arg(long = "exclude-feature")]
    features: Vec<String>,
    /// Half-open interval `FROM:TO` (ms UTC) whose rows are dropped (repeatable).
    #[arg(long = "exclude-interval", value_parser = parse_interval)]
    intervals: Vec<Interval>,
}

impl ExclusionArgs {
    fn to_exclusions(&self) -> Exclusions {
        Exclusions {
            features: self.features.clone(),
            intervals: self.intervals.clone(),
        }
    }
}

fn parse_interval(s: &str) -> Result<Interval, String> {
    let (a, b) = s.split_once(':').ok_or("expected FROM:TO")?;
    let from: i64 = a.trim().parse().map_err(|_| format!("bad FROM `{a}`"))?;
    let to: i64 = b.trim().parse().map_err(|_| format!("bad TO `{b}`"))?;
    if from >= to {
        return Err("FROM must be before TO".into());
    }
    Ok(Interval::new(from, to))
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Run configuration (JSON); the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Prepared dataset CSV (with `<stem>.columns.json` beside it).
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    columns: Option<PathBuf>,
    #[arg(long, value_enum)]
    learner: Option<LearnerArg>,
    /// Learner hyperparameters as a JSON object, or `@file`.
    #[arg(long)]
    params: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Temporal holdout training fraction.
    #[arg(long, conflicts_with = "kfold")]
    holdout: Option<f64>,
    #[arg(long)]
    kfold: Option<usize>,
    /// Shuffle before splitting (leaks future information into training).
    #[arg(long)]
    shuffle: bool,
    #[arg(long, value_enum, value_delimiter = ',')]
    scores: Option<Vec<ScoreArg>>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    #[command(flatten)]
    exclusions: ExclusionArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ModelDataArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    columns: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ImportanceArgs {
    #[command(flatten)]
    io: ModelDataArgs,
    #[arg(long, value_enum, default_value = "permutation")]
    score: ScoreArg,
    #[arg(long, requires = "to")]
    from: Option<i64>,
    #[arg(long, requires = "from")]
    to: Option<i64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct WhatIfArgs {
    /// Directory of the finished base run.
    #[arg(long)]
    base: PathBuf,
    #[command(flatten)]
    exclusions: ExclusionArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "telewb-store")]
    store: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: std::net::SocketAddr,
    /// Base directory for relative input paths in submitted configurations.
    #[arg(long)]
    data_root: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    jobs: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynthKind {
    Mex,
    Integral,
    Toy,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(value_enum)]
    kind: SynthKind,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// MEX: hours of telemetry.
    #[arg(long)]
    hours: Option<i64>,
    /// INTEGRAL: number of revolutions.
    #[arg(long)]
    revs: Option<usize>,
    /// INTEGRAL: sample IREM over whole revolutions instead of near perigee.
    #[arg(long)]
    full_coverage: bool,
    #[arg(long)]
    out: PathBuf,
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::PreprocessMex(a) => preprocess_mex_cmd(a),
        Command::PreprocessIntegral(a) => preprocess_integral_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Importance(a) => importance_cmd(a),
        Command::Whatif(a) => whatif_cmd(a),
        Command::Serve(a) => serve_cmd(a),
        Command::Synth(a) => synth_cmd(a),
    }
}

fn read_json_file<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let bytes = std::fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn pick(dir: &Option<PathBuf>, explicit: &Option<PathBuf>, file: &str, flag: &str) -> CliResult<PathBuf> {
    match (explicit, dir) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(d)) => Ok(d.join(file)),
        (None, None) => Err(usage(format!("--{flag} or --dir is required"))),
    }
}

fn write_dataset(out: &Path, ds: &Dataset<f64>, meta: &Metafile) -> CliResult {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(ArtifactKind::Dataset.file_name()), ds.to_csv())?;
    std::fs::write(out.join(ArtifactKind::Columns.file_name()), ds.columns_json())?;
    std::fs::write(out.join(ArtifactKind::DatasetMeta.file_name()), emit_metafile(meta))?;
    println!(
        "dataset: {} rows, {} features, {} targets, sha256 {}",
        ds.n_rows(),
        ds.n_features(),
        ds.n_targets(),
        ds.digest()
    );
    for w in &meta.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn preprocess_mex_cmd(a: PreprocessMexArgs) -> CliResult {
    let inputs = MexInputs {
        saa: pick(&a.dir, &a.saa, "saa.csv", "saa")?,
        dmop: pick(&a.dir, &a.dmop, "dmop.csv", "dmop")?,
        ftl: pick(&a.dir, &a.ftl, "ftl.csv", "ftl")?,
        evt: pick(&a.dir, &a.evt, "evt.csv", "evt")?,
        lt: pick(&a.dir, &a.lt, "lt.csv", "lt")?,
        pw: pick(&a.dir, &a.pw, "pw.csv", "pw")?,
    };
    let mut params: MexParams = match &a.params {
        Some(p) => read_json_file(p)?,
        None => MexParams::default(),
    };
    if let Some(g) = a.granularity {
        params.granularity_min = g;
    }
    if let Some(c) = a.cleanse {
        params.cleanse = match c {
            CleanseArg::DropRows => CleansePolicy::DropRows,
            CleanseArg::ImputeMean => CleansePolicy::ImputeMean,
        };
    }
    params.validate().map_err(|e| usage(e.to_string()))?;
    let (build, meta) = preprocess_mex(&inputs, &params)?;
    write_dataset(&a.out, &build.dataset, &meta)
}

fn preprocess_integral_cmd(a: PreprocessIntegralArgs) -> CliResult {
    let eclipse = match (&a.eclipse, &a.dir) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(d)) if d.join("eclipse.csv").is_file() => Some(d.join("eclipse.csv")),
        _ => None,
    };
    let inputs = IntegralInputs {
        orbit: pick(&a.dir, &a.orbit, "orbit.csv", "orbit")?,
        irem: pick(&a.dir, &a.irem, "irem.csv", "irem")?,
        eclipse,
    };
    let mut params: IntegralParams = match &a.params {
        Some(p) => read_json_file(p)?,
        None => IntegralParams::default(),
    };
    let task = match a.task {
        Some(TaskArg::Classification) => PositionalTask::Classification,
        Some(TaskArg::Regression) => PositionalTask::Regression,
        None => match params.representation {
            Representation::Positional { task } => task,
            _ => PositionalTask::default(),
        },
    };
    let variant = match a.variant {
        Some(VariantArg::Altitude) => TargetVariant::Altitude,
        Some(VariantArg::Phase) => TargetVariant::Phase,
        None => match params.representation {
            Representation::PerRevolution { variant } => variant,
            _ => TargetVariant::default(),
        },
    };
    if a.task.is_some() && matches!(a.rep, Some(RepArg::PerRev)) {
        return Err(usage("--task applies to the positional representation"));
    }
    if a.variant.is_some() && matches!(a.rep, Some(RepArg::Positional)) {
        return Err(usage("--variant applies to the per-revolution representation"));
    }
    params.representation = match a.rep {
        Some(RepArg::Positional) => Representation::Positional { task },
        Some(RepArg::PerRev) => Representation::PerRevolution { variant },
        None => match params.representation {
            Representation::Positional { .. } => Representation::Positional { task },
            Representation::PerRevolution { .. } => Representation::PerRevolution { variant },
        },
    };
    if let Some(v) = a.bin_width {
        params.bin_width_min = v;
    }
    if let Some(v) = a.threshold {
        params.threshold = v;
    }
    if let Some(v) = a.history_n {
        params.history_n = v;
    }
    if let Some(v) = a.history_m {
        params.history_m = v;
    }
    params.validate().map_err(|e| usage(e.to_string()))?;
    let (build, meta) = preprocess_integral(&inputs, &params)?;
    write_dataset(&a.out, &build.dataset, &meta)
}

fn learner_from(kind: LearnerArg, params: Option<&str>) -> CliResult<LearnerSpec> {
    let Some(raw) = params else {
        return LearnerSpec::default_for(kind.name()).map_err(|e| usage(e.to_string()));
    };
    let text = match raw.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| usage(format!("{path}: {e}")))?,
        None => raw.to_owned(),
    };
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("--params: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| usage("--params must be a JSON object"))?;
    obj.insert("kind".into(), kind.name().into());
    serde_json::from_value(value).map_err(|e| usage(format!("--params: {e}")))
}

fn train_config(a: &TrainArgs) -> CliResult<RunConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let mut cfg: RunConfig = read_json_file(path)?;
            cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
            cfg
        }
        None => {
            let csv = a
                .dataset
                .clone()
                .ok_or_else(|| usage("either --config or --dataset is required"))?;
            let learner = a.learner.unwrap_or(LearnerArg::Forest);
            RunConfig::new(
                Source::Dataset { csv, columns: a.columns.clone() },
                ModelSpec::new(learner_from(learner, None)?, 0),
            )
        }
    };
    if a.config.is_some() {
        if let Some(csv) = &a.dataset {
            cfg.source = Source::Dataset {
                csv: csv.clone(),
                columns: a.columns.clone(),
            };
        }
    }
    match (a.learner, &a.params) {
        (Some(kind), p) => cfg.model = ModelSpec::new(learner_from(kind, p.as_deref())?, cfg.model.seed),
        (None, Some(p)) => {
            let kind = match cfg.model.learner {
                LearnerSpec::Knn(_) => LearnerArg::Knn,
                LearnerSpec::Forest(_) => LearnerArg::Forest,
                LearnerSpec::Gboost(_) => LearnerArg::Gboost,
                LearnerSpec::Fcnn(_) => LearnerArg::Fcnn,
            };
            cfg.model = ModelSpec::new(learner_from(kind, Some(p))?, cfg.model.seed);
        }
        (None, None) => {}
    }
    if let Some(seed) = a.seed {
        cfg.model.seed = seed;
    }
    let temporal = !a.shuffle;
    if let Some(f) = a.holdout {
        cfg.split = SplitSpec::Holdout { fraction: f, temporal };
    } else if let Some(k) = a.kfold {
        cfg.split = SplitSpec::Kfold { k, temporal };
    } else if a.shuffle {
        cfg.split = match cfg.split {
            SplitSpec::Holdout { fraction, .. } => SplitSpec::Holdout { fraction, temporal },
            SplitSpec::Kfold { k, .. } => SplitSpec::Kfold { k, temporal },
        };
    }
    if let Some(s) = &a.scores {
        cfg.importance.kinds = s.iter().map(|&k| k.into()).collect();
    }
    if let Some(r) = a.repeats {
        cfg.importance.repeats = r;
    }
    if let Some(k) = a.top_k {
        cfg.importance.top_k = k;
    }
    let extra = a.exclusions.to_exclusions();
    cfg.exclusions.features.extend(extra.features);
    cfg.exclusions.intervals.extend(extra.intervals);
    cfg.normalized().map_err(|e| usage(e.to_string()))
}

fn report_run(out: &Path, run: &telewb_core::run::RunOutput) -> CliResult {
    let digests = run.write_to(out)?;
    println!("model sha256 {}", run.model.digest());
    if let Some(m) = run.metrics.test.mean_rmse {
        println!("test mean RMSE {m}");
    }
    for w in &run.metrics.warnings {
        eprintln!("warning: {w}");
    }
    for s in &run.importance.skipped {
        eprintln!("note: {}", s.reason);
    }
    println!("artifacts: {}", digests.keys().cloned().collect::<Vec<_>>().join(", "));
    Ok(())
}

fn train_cmd(a: TrainArgs) -> CliResult {
    let cfg = train_config(&a)?;
    let run = execute_run(&cfg)?;
    report_run(&a.out, &run)
}

fn load_inputs(a: &ModelDataArgs) -> CliResult<(TrainedModel<f64>, Dataset<f64>, Vec<InputDigest>)> {
    let model_bytes = read_file(&a.model)?;
    let model = TrainedModel::<f64>::from_bytes(&model_bytes)?;
    let columns = a.columns.clone().unwrap_or_else(|| columns_path_for(&a.dataset));
    let csv = read_file(&a.dataset)?;
    let col_bytes = read_file(&columns)?;
    let map: BTreeMap<String, String> = serde_json::from_slice(&col_bytes).map_err(telewb_core::Error::from)?;
    let ds = Dataset::from_csv(&csv, &map)?;
    let inputs = vec![
        InputDigest::of_file("model", &a.model, &model_bytes),
        InputDigest::of_file("dataset", &a.dataset, &csv),
        InputDigest::of_file("columns", &columns, &col_bytes),
    ];
    Ok((model, ds, inputs))
}

fn stage_meta(stage: Stage, model: &TrainedModel<f64>, ds: &Dataset<f64>, inputs: Vec<InputDigest>) -> Metafile {
    let mut meta = Metafile::new(stage, ds.digest());
    meta.inputs = inputs;
    meta.learner = Some(model.spec.clone());
    meta.seed = Some(model.spec.seed);
    meta.scaler_digest = Some(model.scaler.digest());
    meta
}

fn write_outputs(out: &Path, name: &str, body: &[u8], meta: &Metafile) -> CliResult {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(name), body)?;
    let stem = name.split('.').next().unwrap_or(name);
    std::fs::write(out.join(format!("{stem}.meta.json")), emit_metafile(meta))?;
    Ok(())
}

fn json_bytes(v: &impl serde::Serialize) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("serializes");
    b.push(b'\n');
    b
}

fn predict_cmd(a: ModelDataArgs) -> CliResult {
    let (model, ds, inputs) = load_inputs(&a)?;
    let pred = model.predict(&ds)?;
    let mut csv = String::from("ut_ms");
    for t in &model.target_names {
        csv.push(',');
        csv.push_str(t);
    }
    csv.push('\n');
    for (t, row) in ds.time.iter().zip(pred.rows()) {
        csv.push_str(&t.to_string());
        for v in row {
            csv.push(',');
            csv.push_str(&v.to_string());
        }
        csv.push('\n');
    }
    let meta = stage_meta(Stage::Predict, &model, &ds, inputs);
    write_outputs(&a.out, "predictions.csv", csv.as_bytes(), &meta)?;
    println!("{} rows predicted for {} targets", ds.n_rows(), model.target_names.len());
    Ok(())
}

fn evaluate_cmd(a: ModelDataArgs) -> CliResult {
    let (model, ds, inputs) = load_inputs(&a)?;
    let report = evaluate(&model, &ds)?;
    let meta = stage_meta(Stage::Evaluate, &model, &ds, inputs);
    let body = json_bytes(&report);
    write_outputs(&a.out, "metrics.json", &body, &meta)?;
    print!("{}", String::from_utf8_lossy(&body));
    Ok(())
}

fn importance_cmd(a: ImportanceArgs) -> CliResult {
    let (model, ds, inputs) = load_inputs(&a.io)?;
    let mut cfg = ImportanceConfig::default();
    if let Some(r) = a.repeats {
        cfg.repeats = r;
    }
    if let Some(k) = a.top_k {
        cfg.top_k = k;
    }
    cfg.seed = a.seed;
    let kind: ScoreKind = a.score.into();
    let subset = match (a.from, a.to) {
        (Some(f), Some(t)) if f < t => Some(Interval::new(f, t)),
        (Some(_), Some(_)) => return Err(usage("--from must be before --to")),
        _ => None,
    };
    let report = compute(&model, &ds, kind, subset, &cfg)?;
    let mut meta = stage_meta(Stage::Importance, &model, &ds, inputs);
    meta.arguments = Some(serde_json::json!({
        "score_kind": kind,
        "subset": subset,
        "config": cfg,
    }));
    write_outputs(&a.io.out, "importance.json", &json_bytes(&report), &meta)?;
    for (i, f) in report.top_k.aggregate.iter().enumerate() {
        println!("{:>3} {:<32} {:<8} {}", i + 1, f.name, f.category, f.score);
    }
    Ok(())
}

fn whatif_cmd(a: WhatIfArgs) -> CliResult {
    let base_run = a
        .base
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| usage("--base must name a run directory"))?;
    let child = a.out.file_name().map(|n| n.to_string_lossy().into_owned());
    let spec = WhatIfSpec {
        base_run,
        exclusions: a.exclusions.to_exclusions(),
    };
    let run = run_whatif(&a.base, &spec, child)?;
    report_run(&a.out, &run)?;
    if let Some(c) = &run.comparison {
        if let Some(d) = c.mean_rmse_delta {
            println!("mean RMSE delta (child - base) {d}");
        }
    }
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> CliResult {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let cfg = ServiceConfig {
        store_root: a.store,
        data_root: a.data_root,
        max_jobs: a.jobs,
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(telewb_service::api::serve(&cfg, a.addr))?;
    Ok(())
}

fn synth_cmd(a: SynthArgs) -> CliResult {
    match a.kind {
        SynthKind::Mex => {
            let mut cfg = MexSynth { seed: a.seed, ..Default::default() };
            if let Some(h) = a.hours {
                cfg.hours = h;
            }
            cfg.generate().write(&a.out)?;
        }
        SynthKind::Integral => {
            let mut cfg = IntegralSynth { seed: a.seed, ..Default::default() };
            if let Some(n) = a.revs {
                cfg.n_revs = n;
            }
            if a.full_coverage {
                cfg.coverage = Coverage::Full;
            }
            let files = cfg.generate();
            files.write(&a.out)?;
            std::fs::write(a.out.join("truth.json"), json_bytes(&files.truth))?;
        }
        SynthKind::Toy => {
            let ds = linear_with_decoys(200, 5, 0.1, a.seed);
            std::fs::create_dir_all(&a.out)?;
            let csv = a.out.join("toy.csv");
            ds.write_files(&csv, &columns_path_for(&csv))?;
        }
    }
    println!("wrote {}", a.out.display());
    Ok(())
}
