//! The command-line entry point: dataset generation, program execution and
//! graph inspection, record masking, training, sweeps, evaluation, and
//! attention export. Every flag has a config-file equivalent; flags win.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cfg::{adjacency_line, build_cfg};
use crate::data::{
    encode_record, generate_split, mask_example, RecordReader, SplitSpec,
};
use crate::harness::{
    attention_to_text, dump_attention, evaluate_checkpoint, load_model_checkpoint, report_table,
    stored_precision, sweep, train, HarnessError, Precision, SweepGrid, TrainConfig,
};
use crate::interp::execute;
use crate::lang::parse;
use crate::models::{ModelError, ModelKind};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ipagnn",
    about = "Learning to execute a small imperative language with instruction-pointer attention",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset split into train/valid/test record files.
    Gen(GenArgs),
    /// Interpret a program file and print its environment, target, and trace.
    Run(RunArgs),
    /// Print the control flow graph adjacency listing of a program file.
    Cfg(CfgArgs),
    /// Mask one expression statement in every record of a file.
    Mask(MaskArgs),
    /// Train one model configuration.
    Train(TrainArgs),
    /// Train the full hyperparameter grid and select by validation accuracy.
    Sweep(SweepArgs),
    /// Evaluate a checkpoint on a record file, bucketed by program length.
    Eval(EvalArgs),
    /// Export the soft instruction pointer matrix for a program.
    Attn(AttnArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output directory for the record files and manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base profile: `desk` (100k train) or `paper` (5M train).
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Mask one expression statement per record (partial-execution task).
    #[arg(long)]
    masked: bool,
    #[arg(long)]
    train_count: Option<usize>,
    /// Complexity threshold C separating train from test.
    #[arg(long)]
    threshold: Option<usize>,
    #[arg(long)]
    valid_count: Option<usize>,
    /// Test buckets as `length:count` pairs, e.g. `20:500,30:500`.
    #[arg(long)]
    buckets: Option<String>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Program file.
    program: PathBuf,
    #[arg(long)]
    step_limit: Option<usize>,
}

#[derive(Args)]
struct CfgArgs {
    /// Program file.
    program: PathBuf,
}

#[derive(Args)]
struct MaskArgs {
    /// Input record file.
    #[arg(long)]
    input: PathBuf,
    /// Output record file.
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// ipagnn, line, trace, hardip, ggnn, nocontrol, or noexecute.
    #[arg(long)]
    model: Option<String>,
    /// Base profile for unset options: `desk` or `paper`.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// f32 or f64.
    #[arg(long)]
    precision: Option<String>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    log_every: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Resume from an earlier checkpoint of the same configuration.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    /// Grid profile: `desk` (H=64) or `paper` (H in {200,300}).
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    precision: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Record file to evaluate (e.g. `test.jsonl`).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Write the machine-readable report here as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate the checkpoint's weights as a different model kind
    /// (e.g. `hardip` over soft-pointer weights).
    #[arg(long, value_name = "KIND")]
    r#as: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct AttnArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    program: Option<PathBuf>,
    /// Override the constant of line 0 before running.
    #[arg(long)]
    v0: Option<u16>,
    /// Mask this expression line before running.
    #[arg(long)]
    mask_line: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

fn from_harness(e: HarnessError) -> CliError {
    let code = match &e {
        HarnessError::NonFiniteLoss { .. }
        | HarnessError::Layer(crate::layers::LayerError::NonFiniteGrad { .. })
        | HarnessError::Model(ModelError::NonFinite { .. })
        | HarnessError::Model(ModelError::NonFiniteLoss) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    };
    CliError {
        code,
        message: e.to_string(),
    }
}

/// Flat key-value configuration with `[section]` headers.
struct FileConfig {
    values: HashMap<(String, String), String>,
}

impl FileConfig {
    fn empty() -> Self {
        FileConfig {
            values: HashMap::new(),
        }
    }

    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::empty());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = HashMap::new();
        let mut section = String::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "config line {}: expected `key = value`, got `{raw}`",
                    no + 1
                )));
            };
            values.insert(
                (section.clone(), key.trim().to_string()),
                value.trim().to_string(),
            );
        }
        Ok(FileConfig { values })
    }

    fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(&(section.to_string(), key.to_string())) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::usage(format!("config [{section}] {key}: cannot parse `{raw}`"))
            }),
        }
    }
}

/// Flag value, then config value, then default.
fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn pick_req<T>(flag: Option<T>, file: Option<T>, what: &str) -> Result<T, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::usage(format!("missing required option {what}")))
}

fn parse_model(name: &str) -> Result<ModelKind, CliError> {
    ModelKind::from_name(name).ok_or_else(|| {
        CliError::usage(format!(
            "unknown model `{name}` (expected one of ipagnn, line, trace, hardip, ggnn, nocontrol, noexecute)"
        ))
    })
}

fn parse_precision(name: &str) -> Result<Precision, CliError> {
    Precision::from_name(name)
        .ok_or_else(|| CliError::usage(format!("unknown precision `{name}` (f32 or f64)")))
}

fn parse_buckets(text: &str) -> Result<Vec<(usize, usize)>, CliError> {
    text.split(',')
        .map(|pair| {
            let (len, count) = pair
                .split_once(':')
                .ok_or_else(|| CliError::usage(format!("bucket `{pair}` is not length:count")))?;
            let len = len
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("bad bucket length `{len}`")))?;
            let count = count
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("bad bucket count `{count}`")))?;
            Ok((len, count))
        })
        .collect()
}

fn read_program(path: &Path) -> Result<crate::lang::Program, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Parses arguments and runs one invocation; returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> ExitCode
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful output, not errors.
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(EXIT_USAGE)
                }
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Run(args) => cmd_run(args),
        Command::Cfg(args) => cmd_cfg(args),
        Command::Mask(args) => cmd_mask(args),
        Command::Train(args) => cmd_train(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Attn(args) => cmd_attn(args),
    }
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let profile: String = pick(args.profile, file.get("gen", "profile")?, "desk".into());
    let seed = pick(args.seed, file.get("gen", "seed")?, 0);
    let mut spec = match profile.as_str() {
        "desk" => SplitSpec::desk(seed),
        "paper" => SplitSpec::paper(seed),
        other => return Err(CliError::usage(format!("unknown profile `{other}`"))),
    };
    if let Some(c) = args.train_count.or(file.get("gen", "train_count")?) {
        spec.train_count = c;
    }
    if let Some(c) = args.threshold.or(file.get("gen", "threshold")?) {
        spec.threshold = c;
    }
    if let Some(c) = args.valid_count.or(file.get("gen", "valid_count")?) {
        spec.valid_count = c;
    }
    if let Some(d) = args.max_depth.or(file.get("gen", "max_depth")?) {
        spec.max_depth = d;
    }
    let buckets_text: Option<String> = args.buckets.or(file.get("gen", "buckets")?);
    if let Some(text) = buckets_text {
        spec.test_buckets = parse_buckets(&text)?;
    }
    spec.masked = args.masked || file.get("gen", "masked")?.unwrap_or(false);
    let out = pick_req(args.out, file.get("gen", "out")?, "--out")?;

    let manifest =
        generate_split(&spec, &out).map_err(|e| CliError::data(e.to_string()))?;
    println!(
        "wrote {} train, {} valid, {} test records to {}",
        manifest.train_written,
        manifest.valid_written,
        manifest.test_written,
        out.display()
    );
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let program = read_program(&args.program)?;
    let graph = build_cfg(&program).map_err(|e| CliError::data(e.to_string()))?;
    let result = execute(&program, &graph, args.step_limit)
        .map_err(|e| CliError::data(e.to_string()))?;
    for (var, value) in result.env.defined() {
        println!("{var} = {value}");
    }
    println!("target = {}", result.target);
    let trace: Vec<String> = result.trace.iter().map(|n| n.to_string()).collect();
    println!("trace = {}", trace.join(" "));
    Ok(())
}

fn cmd_cfg(args: CfgArgs) -> Result<(), CliError> {
    let program = read_program(&args.program)?;
    let graph = build_cfg(&program).map_err(|e| CliError::data(e.to_string()))?;
    for n in 0..graph.node_count() {
        println!("{}", adjacency_line(&graph, n));
    }
    Ok(())
}

fn cmd_mask(args: MaskArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let seed = pick(args.seed, file.get("mask", "seed")?, 0);
    let reader = RecordReader::open(&args.input).map_err(|e| CliError::data(e.to_string()))?;
    let out_file = std::fs::File::create(&args.output)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", args.output.display())))?;
    let mut out = std::io::BufWriter::new(out_file);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = 0usize;
    for rec in reader {
        let rec = rec.map_err(|e| CliError::data(e.to_string()))?;
        let masked = mask_example(&rec, &mut rng).map_err(|e| CliError::data(e.to_string()))?;
        use std::io::Write;
        writeln!(out, "{}", encode_record(&masked))
            .map_err(|e| CliError::data(format!("write failed: {e}")))?;
        count += 1;
    }
    use std::io::Write;
    out.flush()
        .map_err(|e| CliError::data(format!("write failed: {e}")))?;
    println!("masked {count} records into {}", args.output.display());
    Ok(())
}

fn train_config_from(args: &TrainArgs) -> Result<TrainConfig, CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let section = "train";
    let model_name: String = pick_req(
        args.model.clone(),
        file.get(section, "model")?,
        "--model",
    )?;
    let model = parse_model(&model_name)?;
    let data = pick_req(args.data.clone(), file.get(section, "data")?, "--data")?;
    let out = pick_req(args.out.clone(), file.get(section, "out")?, "--out")?;
    let profile: String = pick(
        args.profile.clone(),
        file.get(section, "profile")?,
        "desk".into(),
    );
    let mut cfg = match profile.as_str() {
        "desk" => TrainConfig::desk(model, data, out),
        "paper" => TrainConfig::paper(model, data, out),
        other => return Err(CliError::usage(format!("unknown profile `{other}`"))),
    };
    if let Some(h) = args.hidden.or(file.get(section, "hidden")?) {
        cfg.hidden = h;
    }
    if let Some(lr) = args.lr.or(file.get(section, "lr")?) {
        cfg.lr = lr;
    }
    if let Some(e) = args.epochs.or(file.get(section, "epochs")?) {
        cfg.epochs = e;
    }
    if let Some(b) = args.batch.or(file.get(section, "batch")?) {
        cfg.batch_size = b;
    }
    if let Some(s) = args.seed.or(file.get(section, "seed")?) {
        cfg.seed = s;
    }
    if let Some(p) = args
        .precision
        .clone()
        .or(file.get::<String>(section, "precision")?)
    {
        cfg.precision = parse_precision(&p)?;
    }
    cfg.max_steps = args.max_steps.or(file.get(section, "max_steps")?);
    if let Some(l) = args.log_every.or(file.get(section, "log_every")?) {
        cfg.log_every = l;
    }
    if let Some(l) = args.eval_every.or(file.get(section, "eval_every")?) {
        cfg.eval_every = l;
    }
    if let Some(l) = args
        .checkpoint_every
        .or(file.get(section, "checkpoint_every")?)
    {
        cfg.checkpoint_every = l;
    }
    cfg.resume = args.resume.clone();
    Ok(cfg)
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let cfg = train_config_from(&args)?;
    let outcome = train(&cfg).map_err(from_harness)?;
    println!(
        "trained {} for {} steps over {} examples (final loss {:.4}); checkpoint at {}",
        cfg.model.name(),
        outcome.steps,
        outcome.examples_seen,
        outcome.final_loss,
        outcome.checkpoint.display()
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let model_name: String =
        pick_req(args.model.clone(), file.get("sweep", "model")?, "--model")?;
    let model = parse_model(&model_name)?;
    let data = pick_req(args.data.clone(), file.get("sweep", "data")?, "--data")?;
    let out: PathBuf = pick_req(args.out.clone(), file.get("sweep", "out")?, "--out")?;
    let profile: String = pick(
        args.profile.clone(),
        file.get("sweep", "profile")?,
        "desk".into(),
    );
    let (grid, mut base) = match profile.as_str() {
        "desk" => (
            SweepGrid::desk(),
            TrainConfig::desk(model, data, out.clone()),
        ),
        "paper" => (
            SweepGrid::paper(),
            TrainConfig::paper(model, data, out.clone()),
        ),
        other => return Err(CliError::usage(format!("unknown profile `{other}`"))),
    };
    if let Some(e) = args.epochs.or(file.get("sweep", "epochs")?) {
        base.epochs = e;
    }
    if let Some(s) = args.seed.or(file.get("sweep", "seed")?) {
        base.seed = s;
    }
    if let Some(p) = args
        .precision
        .clone()
        .or(file.get::<String>("sweep", "precision")?)
    {
        base.precision = parse_precision(&p)?;
    }
    let outcome = sweep(&base, &grid).map_err(from_harness)?;
    for cell in &outcome.cells {
        println!(
            "cell H={} lr={}: validation accuracy {:.4}%",
            cell.hidden,
            cell.lr,
            100.0 * cell.val_accuracy
        );
    }
    println!(
        "winner: H={} lr={} ({:.4}%), checkpoint at {}",
        outcome.winner.hidden,
        outcome.winner.lr,
        100.0 * outcome.winner.val_accuracy,
        outcome.winner.checkpoint.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let ckpt: PathBuf = pick_req(args.ckpt, file.get("eval", "ckpt")?, "--ckpt")?;
    let data: PathBuf = pick_req(args.data, file.get("eval", "data")?, "--data")?;
    let as_kind = match args.r#as.or(file.get::<String>("eval", "as")?) {
        Some(name) => Some(parse_model(&name)?),
        None => None,
    };
    let report = evaluate_checkpoint(&ckpt, &data, as_kind).map_err(from_harness)?;
    print!("{}", report_table(&report));
    if let Some(out) = args.out.or(file.get("eval", "out")?) {
        std::fs::write(&out, serde_json::to_string_pretty(&report).unwrap())
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", out.display())))?;
    }
    Ok(())
}

fn cmd_attn(args: AttnArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let ckpt: PathBuf = pick_req(args.ckpt, file.get("attn", "ckpt")?, "--ckpt")?;
    let program_path: PathBuf =
        pick_req(args.program, file.get("attn", "program")?, "--program")?;
    let v0 = args.v0.or(file.get("attn", "v0")?);
    let mask_line = args.mask_line.or(file.get("attn", "mask_line")?);
    let text = std::fs::read_to_string(&program_path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", program_path.display())))?;

    let matrix = match stored_precision(&ckpt).map_err(|e| CliError::data(e.to_string()))? {
        4 => {
            let (model, _, _) =
                load_model_checkpoint::<f32>(&ckpt, None).map_err(from_harness)?;
            dump_attention(&model, &text, v0, mask_line).map_err(from_harness)?
        }
        _ => {
            let (model, _, _) =
                load_model_checkpoint::<f64>(&ckpt, None).map_err(from_harness)?;
            dump_attention(&model, &text, v0, mask_line).map_err(from_harness)?
        }
    };
    let rendered = attention_to_text(&matrix);
    match args.out.or(file.get("attn", "out")?) {
        Some(path) => std::fs::write(&path, rendered)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{rendered}"),
    }
    Ok(())
}
