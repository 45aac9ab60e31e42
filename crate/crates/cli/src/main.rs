//! `chainhoi`: dataset generation, training, sampling, evaluation and
//! diagnostics for the desk-scale ChainHOI pipeline.

mod evaluate;
mod failure;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use chainhoi::config::RunConfig;
use chainhoi::data::io::{write_dataset, write_jsonl, Dataset, SequenceRecord};
use chainhoi::data::synth::{generate, SyntheticScenario};
use chainhoi::diffusion::GuidanceConfig;
use chainhoi::evaluator::{train_evaluator, EvaluatorConfig, EvaluatorData};
use chainhoi::geometry::obj::load_obj;
use chainhoi::graph::{build_chain_attention_mask, build_hoi_graph_with, build_kinetic_chains, describe, to_dot};
use chainhoi::gradsuite;
use chainhoi::repr::{contact_labels_from_motion, decode_sequence, DEFAULT_CONTACT_THRESHOLD};
use chainhoi::sampling::{sample_sequence, SampleRequest};
use chainhoi::skeleton::SkeletonSpec;
use chainhoi::train::{load_model, Trainer};
use clap::{Args, Parser, Subcommand};

use failure::{Failure, Outcome, ResultExt};

#[derive(Parser)]
#[command(name = "chainhoi", version, about = "Text-driven human-object interaction generation (desk scale)")]
struct Cli {
    /// Run configuration (TOML). Defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes a synthetic dataset: dataset.jsonl, meshes/*.obj and groups.json.
    Generate(GenerateArgs),
    /// Trains a model, writing loss.csv and checkpoint.bin.
    Train(TrainArgs),
    /// Generates one sequence from a checkpoint.
    Sample(SampleArgs),
    /// Trains the contrastive evaluator used for FID and R-Precision.
    TrainEvaluator(TrainEvaluatorArgs),
    /// Scores generated sequences against references.
    Evaluate(evaluate::EvaluateArgs),
    /// Finite-difference gradient checks over the layer suite.
    Gradcheck(GradcheckArgs),
    /// Prints the interaction graph, kinetic chains and attention mask.
    InspectGraph(InspectArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 64)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory; overrides `data.dataset`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory; overrides `data.output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continues from this checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    text: String,
    /// Object mesh (OBJ); its file stem becomes the object id.
    #[arg(long)]
    object: PathBuf,
    /// Frames to generate [default: optim.window]
    #[arg(long)]
    length: Option<usize>,
    /// DDIM steps [default: diffusion.ddim_steps]
    #[arg(long)]
    steps: Option<usize>,
    /// Guidance scale [default: diffusion.guidance]
    #[arg(long)]
    guidance: Option<f64>,
    #[arg(long, default_value = "sample")]
    id: String,
    /// Output JSONL file with one sequence record.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainEvaluatorArgs {
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// Evaluator settings (JSON); defaults when omitted.
    #[arg(long)]
    evaluator_config: Option<PathBuf>,
    /// Window length in frames; every record contributes its busiest window.
    #[arg(long, default_value_t = evaluate::DEFAULT_WINDOW)]
    window: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    cases: usize,
    /// Relative error bound.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Restricts the suite to these ops (comma separated).
    #[arg(long, value_delimiter = ',')]
    ops: Vec<String>,
}

#[derive(Args)]
struct InspectArgs {
    /// Emits the graph-description format instead of tables.
    #[arg(long)]
    dot: bool,
}

fn load_config(cli: &Cli) -> Outcome<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).at(p).config()?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn cmd_generate(cfg: &RunConfig, args: &GenerateArgs) -> Outcome<()> {
    let spec = SkeletonSpec::default();
    let records = generate(&SyntheticScenario::defaults(), args.count, cfg.seed).data()?;
    write_dataset(&args.out, &records, &spec).data()?;
    println!("wrote {} sequences to {}", records.len(), args.out.display());
    Ok(())
}

fn cmd_train(mut cfg: RunConfig, args: &TrainArgs) -> Outcome<()> {
    if let Some(m) = args.max_steps {
        cfg.optim.max_steps = Some(m);
    }
    let data = args.data.clone().or_else(|| cfg.data.dataset.clone()).ok_or_else(|| Failure::config("no dataset: pass --data or set data.dataset"))?;
    let out = args.out.clone().or_else(|| cfg.data.output.clone()).ok_or_else(|| Failure::config("no output directory: pass --out or set data.output"))?;
    let dataset = Dataset::load_dir(&data).at(&data).data()?;
    let mut trainer = Trainer::new(&cfg, &dataset).data()?;
    if let Some(r) = &args.resume {
        trainer.resume(r).at(r).data()?;
    }
    fs::create_dir_all(&out).data()?;
    fs::write(out.join("config.toml"), cfg.to_toml().config()?).data()?;
    let rows = trainer.run(&out).classify()?;
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        println!("{} epochs, total loss {:.6} -> {:.6}", rows.len(), first.total, last.total);
    }
    println!("checkpoint {}", out.join("checkpoint.bin").display());
    Ok(())
}

fn cmd_sample(cfg: &RunConfig, args: &SampleArgs) -> Outcome<()> {
    let (model, meta) = load_model(&args.checkpoint).at(&args.checkpoint).data()?;
    if cfg.diffusion.steps != meta.model.diffusion_steps {
        return Err(Failure::config(format!(
            "config has {} diffusion steps, checkpoint was trained with {}",
            cfg.diffusion.steps, meta.model.diffusion_steps
        )));
    }
    let mesh = Arc::new(load_obj(&args.object).at(&args.object).data()?);
    let ddim_steps = args.steps.unwrap_or(cfg.diffusion.ddim_steps);
    if ddim_steps == 0 || ddim_steps > cfg.diffusion.steps {
        return Err(Failure::config(format!("--steps {} outside 1..={}", ddim_steps, cfg.diffusion.steps)));
    }
    let req = SampleRequest {
        text: args.text.clone(),
        mesh: mesh.clone(),
        frames: args.length.unwrap_or(cfg.optim.window),
        ddim_steps,
        guidance: GuidanceConfig { scale: args.guidance.unwrap_or(cfg.diffusion.guidance), enabled: true },
        seed: cfg.seed,
        fps: chainhoi::data::synth::FPS,
    };
    let seq = sample_sequence(&model, &cfg.diffusion.schedule(), &req).classify()?;
    if seq.frames.iter().any(|v| !v.is_finite()) {
        return Err(Failure::numeric("sampled sequence is not finite"));
    }
    let spec = SkeletonSpec::default();
    let decoded = decode_sequence(&seq, &spec).classify()?;
    let labels = contact_labels_from_motion(&decoded.positions, &decoded.objects, &spec, &mesh, DEFAULT_CONTACT_THRESHOLD);
    let object_id = args.object.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let record = SequenceRecord::from_sequence(&args.id, &args.text, &object_id, &seq, &labels);
    write_jsonl(&args.out, &[record]).data()?;
    println!(
        "{} frames, {} DDIM steps, guidance {} -> {}",
        req.frames,
        req.ddim_steps,
        req.guidance.scale,
        args.out.display()
    );
    Ok(())
}

fn cmd_train_evaluator(cfg: &RunConfig, args: &TrainEvaluatorArgs) -> Outcome<()> {
    let ev_cfg: EvaluatorConfig = match &args.evaluator_config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p).at(p).config()?).map_err(|e| Failure::config(format!("{}: {}", p.display(), e)))?,
        None => EvaluatorConfig::default(),
    };
    let dataset = Dataset::load_dir(&args.data).at(&args.data).data()?;
    let spec = SkeletonSpec::default();
    let windows = evaluate::windows(&dataset.records, args.window, &spec)?;
    let data = EvaluatorData { motions: windows.iter().collect(), texts: dataset.texts().collect() };
    let (ev, losses) = train_evaluator(&ev_cfg, &data, cfg.seed).classify()?;
    if let Some(parent) = args.out.parent() {
        fs::create_dir_all(parent).data()?;
    }
    ev.save(&args.out).data()?;
    println!(
        "{} pairs, InfoNCE {:.4} -> {:.4}, saved {}",
        windows.len(),
        losses.first().copied().unwrap_or(f64::NAN),
        losses.last().copied().unwrap_or(f64::NAN),
        args.out.display()
    );
    Ok(())
}

fn cmd_gradcheck(cfg: &RunConfig, args: &GradcheckArgs) -> Outcome<()> {
    let ops: Vec<&str> = if args.ops.is_empty() { gradsuite::OPS.to_vec() } else { args.ops.iter().map(String::as_str).collect() };
    if let Some(bad) = ops.iter().find(|o| !gradsuite::OPS.contains(o)) {
        return Err(Failure::config(format!("unknown op {}; choose from {}", bad, gradsuite::OPS.join(", "))));
    }
    let results = gradsuite::run(&ops, args.cases, cfg.seed).classify()?;
    println!("{:<14} {:>6} {:>7} {:>13} {:>8}  result", "op", "cases", "probes", "max rel err", "seconds");
    let mut failed = Vec::new();
    for r in &results {
        let ok = r.passed(args.tol);
        println!(
            "{:<14} {:>6} {:>7} {:>13.3e} {:>8.3}  {}",
            r.op,
            r.cases,
            r.probes,
            r.max_rel_error,
            r.seconds,
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            failed.push(r.op.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::numeric(format!("relative error above {:e} in: {}", args.tol, failed.join(", "))))
    }
}

fn cmd_inspect(cfg: &RunConfig, args: &InspectArgs) -> Outcome<()> {
    let spec = SkeletonSpec::default();
    let graph = build_hoi_graph_with(&spec, cfg.model.object_to_all_joints).config()?;
    if args.dot {
        print!("{}", to_dot(&spec, &graph));
        return Ok(());
    }
    let chains = build_kinetic_chains(&spec).config()?;
    let mask = build_chain_attention_mask(&chains, graph.node_count).config()?;
    print!("{}", describe(&spec, &graph, &chains, &mask));
    Ok(())
}

fn dispatch(cli: &Cli) -> Outcome<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Generate(a) => cmd_generate(&cfg, a),
        Command::Train(a) => cmd_train(cfg, a),
        Command::Sample(a) => cmd_sample(&cfg, a),
        Command::TrainEvaluator(a) => cmd_train_evaluator(&cfg, a),
        Command::Evaluate(a) => evaluate::run(&cfg, a),
        Command::Gradcheck(a) => cmd_gradcheck(&cfg, a),
        Command::InspectGraph(a) => cmd_inspect(&cfg, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
