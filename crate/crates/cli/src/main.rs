use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use csdiff::data::{import_csv, load_csdc, save_csdc, synthesize_set, ChargeStabilityDiagram, SyntheticConfig};
use csdiff::diffusion::{build_schedule, load_checkpoint, reconstruct};
use csdiff::harness::{
    ensure_checkpoint, load_dataset, reference_t_d, run_experiment, time_to_reconstruct, ExperimentConfig, Method,
    REFERENCE_T_P,
};
use csdiff::masking::{apply_mask, MaskSpec};
use csdiff::metrics::{evaluate, MetricConfig, MetricReport};
use csdiff::rng;

/// Sparse-measurement reconstruction of charge stability diagrams.
#[derive(Parser)]
#[command(name = "csdiff", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic double-dot CSDs as CSD1 files.
    Synth(SynthArgs),
    /// Convert CSV exports into normalized CSD1 files.
    Import(ImportArgs),
    /// Train the denoiser for every configured step count.
    Train(RunArgs),
    /// Reconstruct one CSD from a mask with a single method.
    Reconstruct(ReconstructArgs),
    /// Run the evaluation sweep, or score one prediction against its truth.
    Evaluate(EvaluateArgs),
    /// Idealized measurement-plus-inference time for a mask.
    Timebudget(TimebudgetArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Image side in pixels.
    #[arg(long, default_value_t = 128)]
    size: usize,
    /// Id prefix; files are `<prefix>-NNNNN.csd1`.
    #[arg(long, default_value = "synth")]
    prefix: String,
    /// Generator settings as TOML (fields of the `[data.synthetic]` table).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ImportArgs {
    /// CSV files: one row per gate-2 step, one column per gate-1 step.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Gate-1 voltage extent, `min,max`.
    #[arg(long, value_parser = parse_range, default_value = "0,1", allow_hyphen_values = true)]
    v1: (f64, f64),
    /// Gate-2 voltage extent, `min,max`.
    #[arg(long, value_parser = parse_range, default_value = "0,1", allow_hyphen_values = true)]
    v2: (f64, f64),
}

/// Experiment config file plus flag overrides.
#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    /// Directory of CSD1 files instead of synthetic data.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Comma-separated, e.g. `diffusion,linear,idw,biharmonic`.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Comma-separated, e.g. `lc:8-8-4-4,grid:5`.
    #[arg(long, value_delimiter = ',')]
    masks: Option<Vec<MaskSpec>>,
    /// Comma-separated diffusion step counts from {20,60,100,140}.
    #[arg(long, value_delimiter = ',')]
    steps: Option<Vec<usize>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_val: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Fail instead of training when a checkpoint is missing.
    #[arg(long)]
    no_train: bool,
    /// Skip writing per-image reconstructions and overlays.
    #[arg(long)]
    no_images: bool,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = &self.checkpoint_dir {
            cfg.checkpoint_dir = Some(v.clone());
        }
        if let Some(v) = &self.data_dir {
            cfg.data.dir = Some(v.clone());
        }
        if let Some(v) = &self.methods {
            cfg.methods = v.clone();
        }
        if let Some(v) = &self.masks {
            cfg.masks = v.clone();
        }
        if let Some(v) = &self.steps {
            cfg.steps = v.clone();
        }
        if let Some(v) = self.epochs {
            cfg.train.epochs = v;
        }
        if let Some(v) = self.n_train {
            cfg.data.n_train = v;
        }
        if let Some(v) = self.n_val {
            cfg.data.n_val = v;
        }
        if let Some(v) = self.n_test {
            cfg.data.n_test = v;
        }
        if self.no_train {
            cfg.train.enabled = false;
        }
        if self.no_images {
            cfg.save_images = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ReconstructArgs {
    /// Fully measured CSD1 image; the mask is applied to it.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    mask: MaskSpec,
    #[arg(long, default_value = "diffusion")]
    method: Method,
    /// Required for `diffusion`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    replace_known: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Score this CSD1 prediction instead of running the sweep.
    #[arg(long, requires = "truth")]
    pred: Option<PathBuf>,
    #[arg(long, requires = "pred")]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct TimebudgetArgs {
    #[arg(long)]
    mask: MaskSpec,
    #[arg(long, default_value_t = 128)]
    size: usize,
    /// Seconds per measured pixel.
    #[arg(long, default_value_t = REFERENCE_T_P)]
    t_p: f64,
    /// Inference seconds; defaults to the reference time for `--steps`.
    #[arg(long, conflicts_with = "steps")]
    t_d: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected min,max")?;
    let a = a.trim().parse().map_err(|_| format!("bad number {a:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("bad number {b:?}"))?;
    Ok((a, b))
}

fn log(msg: &str) {
    eprintln!("{msg}");
}

fn synth(args: &SynthArgs) -> Result<()> {
    let mut base = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<SyntheticConfig>(&text)?
        }
        None => SyntheticConfig::default(),
    };
    base.size = args.size;
    base.validate()?;
    for s in synthesize_set(&base, args.count, args.seed, &args.prefix)? {
        save_csdc(&s.csd, &args.out.join(format!("{}.csd1", s.csd.id)))?;
    }
    log(&format!("wrote {} images to {}", args.count, args.out.display()));
    Ok(())
}

fn import(args: &ImportArgs) -> Result<()> {
    for path in &args.inputs {
        let csd = import_csv(path, args.v1, args.v2).with_context(|| format!("importing {}", path.display()))?;
        save_csdc(&csd, &args.out.join(format!("{}.csd1", csd.id)))?;
    }
    Ok(())
}

fn train(args: &RunArgs) -> Result<()> {
    let mut cfg = args.resolve()?;
    if args.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    if !cfg.uses_diffusion() {
        cfg.methods.push(Method::Diffusion);
    }
    let data = load_dataset(&cfg)?;
    let mut sink = log;
    for &s in &cfg.steps {
        ensure_checkpoint(&cfg, &data, s, &mut sink)?;
        log(&format!("checkpoint {}", cfg.checkpoint_path(s).display()));
    }
    Ok(())
}

fn reconstruct_one(args: &ReconstructArgs) -> Result<()> {
    let csd = load_csdc(&args.input)?;
    let truth = csd.to_field();
    let mask = args.mask.build(csd.height(), csd.width())?;
    let y = apply_mask(&truth, &mask)?;
    let pred = match args.method.baseline() {
        Some(b) => {
            let (f, degraded) = b.run(&y, &mask)?;
            if degraded {
                log("warning: biharmonic solver hit its iteration cap");
            }
            f
        }
        None => {
            let Some(path) = &args.checkpoint else {
                bail!("--checkpoint is required for diffusion");
            };
            let model = load_checkpoint(path)?;
            let schedule = build_schedule(model.config().steps)?;
            let mut r = rng::stream(args.seed, rng::STREAM_SAMPLE);
            reconstruct(&model, &y, &mask, &schedule, &mut r, args.replace_known)?
        }
    };
    let out = ChargeStabilityDiagram::from_field(csd.id.clone(), &pred, csd.v1_range, csd.v2_range)?;
    save_csdc(&out, &args.out)?;
    Ok(())
}

fn print_report(r: &MetricReport) {
    for (name, v) in MetricReport::COLUMNS.iter().zip(r.values()) {
        match v {
            Some(v) => println!("{name:16} {v:.6}"),
            None => println!("{name:16} -"),
        }
    }
}

fn score(pred: &Path, truth: &Path, cfg: &MetricConfig) -> Result<()> {
    let p = load_csdc(pred)?.to_field();
    let t = load_csdc(truth)?.to_field();
    print_report(&evaluate(&p, &t, cfg)?);
    Ok(())
}

fn evaluate_cmd(args: &EvaluateArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    if args.run.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    if let (Some(p), Some(t)) = (&args.pred, &args.truth) {
        return score(p, t, &cfg.metrics);
    }
    let mut sink = log;
    let report = run_experiment(&cfg, &mut sink)?;
    println!("method,mask,steps,psnr,ssim,iou_ridge,f1_ridge");
    for cell in &report.cells {
        let m = |k| cell.mean(k).map(|v| format!("{v:.4}")).unwrap_or_default();
        println!(
            "{},{},{},{},{},{},{}",
            cell.key.method,
            cell.key.mask,
            cell.key.steps.map(|s| s.to_string()).unwrap_or_default(),
            m("psnr"),
            m("ssim"),
            m("iou_ridge"),
            m("f1_ridge")
        );
    }
    log(&format!("tables written to {}", cfg.output_dir.display()));
    Ok(())
}

fn timebudget(args: &TimebudgetArgs) -> Result<()> {
    let mask = args.mask.build(args.size, args.size)?;
    let t_d = args.t_d.unwrap_or_else(|| args.steps.map(reference_t_d).unwrap_or(0.0));
    let b = time_to_reconstruct(&mask, args.t_p, t_d)?;
    println!("n_p   {}", b.n_p);
    println!("t_p   {} s", b.t_p);
    println!("t_d   {} s", b.t_d);
    println!("total {} s", b.total);
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Import(a) => import(a),
        Command::Train(a) => train(a),
        Command::Reconstruct(a) => reconstruct_one(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Timebudget(a) => timebudget(a),
    }
}
