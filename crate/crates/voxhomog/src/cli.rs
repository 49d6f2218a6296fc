//! Command-line front end. Each subcommand resolves the run config (file,
//! then flag overrides), echoes it into the output directory, writes its
//! machine-readable artifacts there and prints a human-readable table.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use voxhomog_core::homog::{self, COMPONENT_NAMES, COMPONENT_UNITS};
use voxhomog_core::microgeom::ShapeKind;
use voxhomog_core::nn::{EpochRecord, Preset};
use voxhomog_core::stats::Split;

use crate::config::{RunConfig, ECHO_FILE};
use crate::error::{Error, Result};
use crate::io::{self, checkpoint, grid};
use crate::pipeline::dataset::{self, Dataset};
use crate::pipeline::evaluate::{self, MareReport};
use crate::pipeline::featmaps::{self, Axis};
use crate::pipeline::transfer::{self, Model};
use crate::pipeline::{training, uq};

pub const CHECKPOINT_FILE: &str = "checkpoint.vxck";
pub const TRANSFER_FILE: &str = "transfer.vxck";
pub const SCRATCH_FILE: &str = "scratch.vxck";

#[derive(Debug, Parser)]
#[command(name = "voxhomog", version, about = "Voxel homogenization datasets and 3D CNN surrogates")]
pub struct Cli {
    /// TOML or JSON run config; defaults apply to every missing key.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's root seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true, env = "VOXHOMOG_THREADS")]
    pub threads: Option<usize>,
    /// Suppress progress lines on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate, voxelize and label a dataset.
    Gen(GenArgs),
    /// Train a surrogate on a dataset.
    Train(TrainArgs),
    /// Per-component MARE of a checkpoint on one split.
    Eval(EvalArgs),
    /// Predict the 12 constants of a single grid.
    Predict(PredictArgs),
    /// Propagate volume-fraction scatter through surrogate and oracle.
    Uq(UqArgs),
    /// Fine-tune a checkpoint on another dataset, with a from-scratch baseline.
    Transfer(TransferArgs),
    /// Voigt and Reuss bounds on the Young's modulus.
    Bounds(BoundsArgs),
    /// Export slices of conv activations.
    Featmaps(FeatmapsArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ShapeArg {
    Sphere,
    Ellipsoid,
}

impl From<ShapeArg> for ShapeKind {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::Sphere => ShapeKind::Sphere,
            ShapeArg::Ellipsoid => ShapeKind::Ellipsoid,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AxisArg {
    X,
    Y,
    Z,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::X => Axis::X,
            AxisArg::Y => Axis::Y,
            AxisArg::Z => Axis::Z,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub count: Option<usize>,
    /// Voxels per edge.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum)]
    pub shape: Option<ShapeArg>,
    /// Volume-fraction bins of the sample schedule.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub vf_min: Option<f64>,
    #[arg(long)]
    pub vf_max: Option<f64>,
    /// Train, validation and test proportions, e.g. `240,30,30`.
    #[arg(long, value_delimiter = ',')]
    pub split: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory written by `gen`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Architecture preset (desk, case1 .. case7).
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Phase grid file.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Also homogenize the grid with the finite-element oracle.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct UqArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub vf_mean: Option<f64>,
    #[arg(long)]
    pub vf_sd: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Skip the oracle; needs a checkpoint.
    #[arg(long)]
    pub no_oracle: bool,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Checkpoint to extend.
    #[arg(long)]
    pub base: PathBuf,
    /// Target dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Skip the from-scratch baseline.
    #[arg(long)]
    pub no_baseline: bool,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Inclusion volume fraction.
    #[arg(long)]
    pub vf: f64,
}

#[derive(Debug, Args)]
pub struct FeatmapsArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub grid: PathBuf,
    /// Conv layer, 0-based.
    #[arg(long, default_value_t = 0)]
    pub layer: usize,
    #[arg(long, value_enum, default_value = "z")]
    pub axis: AxisArg,
    /// Slice index in the layer's output extent; defaults to the middle.
    #[arg(long)]
    pub index: Option<usize>,
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn progress(&self, msg: std::fmt::Arguments) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    fn echo_config(&self) -> Result<()> {
        io::write_bytes(&self.out.join(ECHO_FILE), self.cfg.to_toml().as_bytes())
    }

    fn validated(&self) -> Result<()> {
        self.cfg.validate()?;
        self.echo_config()
    }
}

/// Parses arguments, runs the command and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::config("threads", "must be at least 1"));
        }
        // A pool may already exist when called more than once in-process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let mut ctx = Ctx {
        cfg,
        out: cli.out,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Gen(a) => gen(&mut ctx, a),
        Command::Train(a) => train(&mut ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Predict(a) => predict(&ctx, a),
        Command::Uq(a) => run_uq(&mut ctx, a),
        Command::Transfer(a) => run_transfer(&mut ctx, a),
        Command::Bounds(a) => bounds(&ctx, a),
        Command::Featmaps(a) => export_featmaps(&ctx, a),
    }
}

fn gen(ctx: &mut Ctx, a: GenArgs) -> Result<()> {
    let d = &mut ctx.cfg.dataset;
    if let Some(v) = a.count {
        d.count = v;
    }
    if let Some(v) = a.n {
        d.n = v;
    }
    if let Some(v) = a.shape {
        d.packing.shape = v.into();
    }
    if let Some(v) = a.bins {
        d.n_bins = v;
    }
    if let Some(v) = a.vf_min {
        d.vf_min = v;
    }
    if let Some(v) = a.vf_max {
        d.vf_max = v;
    }
    if let Some(v) = a.split {
        d.split = v
            .try_into()
            .map_err(|_| Error::config("dataset.split", "needs exactly three proportions"))?;
    }
    ctx.validated()?;
    let total = ctx.cfg.dataset.count;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let quiet = ctx.quiet;
    let manifest = dataset::build_dataset(&ctx.cfg, &ctx.out, &|_| {
        let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        if !quiet && (k % 10 == 0 || k == total) {
            eprintln!("labeled {k}/{total}");
        }
    })?;
    let counts = Split::ALL.map(|s| manifest.split(s).count());
    println!(
        "{} samples ({} train, {} val, {} test) at {}^3 in {}",
        manifest.samples.len(),
        counts[0],
        counts[1],
        counts[2],
        manifest.n,
        ctx.out.display()
    );
    Ok(())
}

fn epoch_line(ctx: &Ctx, tag: &str, r: &EpochRecord) {
    ctx.progress(format_args!(
        "{tag}epoch {:4}  train {:.6e}  val {:.6e}",
        r.epoch, r.train_loss, r.val_loss
    ));
}

fn parse_preset(name: &str) -> Result<Preset> {
    serde_json::from_value(serde_json::Value::String(name.to_lowercase()))
        .map_err(|_| Error::config("network.preset", format!("unknown preset `{name}`")))
}

fn train(ctx: &mut Ctx, a: TrainArgs) -> Result<()> {
    let data = Dataset::open(&a.data)?;
    ctx.cfg.dataset.n = data.manifest.n;
    if let Some(e) = a.epochs {
        ctx.cfg.train.epochs = e;
    }
    if let Some(p) = &a.preset {
        ctx.cfg.network.preset = parse_preset(p)?;
    }
    ctx.validated()?;
    let ck = training::train_surrogate(&ctx.cfg, &data, &mut |r| epoch_line(ctx, "", r))?;
    let log = ck.log.as_ref().expect("trained checkpoint has a log");
    checkpoint::write_checkpoint(&ctx.out.join(CHECKPOINT_FILE), &ck)?;
    io::write_bytes(&ctx.out.join("train_log.csv"), training::log_csv(log).as_bytes())?;
    io::write_json(&ctx.out.join("train_log.json"), log)?;
    println!(
        "best epoch {} of {} (val loss {:.6e}) -> {}",
        log.best_epoch,
        log.epochs.len(),
        log.best_val_loss,
        ctx.out.join(CHECKPOINT_FILE).display()
    );
    Ok(())
}

pub fn mare_table(r: &MareReport) -> String {
    let mut s = format!("MARE on {} split ({} samples)\n", r.split.name(), r.samples);
    s.push_str(&format!("{:<10}{:>12}\n", "component", "MARE [%]"));
    for c in &r.components {
        s.push_str(&format!("{:<10}{:>12.4}\n", c.component, 100.0 * c.mare));
    }
    s.push_str(&format!("{:<10}{:>12.4}\n", "max E/G", 100.0 * r.moduli_max));
    s.push_str(&format!("{:<10}{:>12.4}\n", "max nu", 100.0 * r.poisson_max));
    s
}

fn mare_csv(r: &MareReport) -> String {
    let mut s = String::from("component,mare\n");
    for c in &r.components {
        s.push_str(&format!("{},{}\n", c.component, c.mare));
    }
    s
}

fn eval(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    ctx.validated()?;
    let data = Dataset::open(&a.data)?;
    let ck = checkpoint::read_checkpoint(&a.checkpoint)?;
    let report = evaluate::evaluate(&ck, &data, a.split.into())?;
    let name = report.split.name();
    io::write_json(&ctx.out.join(format!("mare_{name}.json")), &report)?;
    io::write_bytes(&ctx.out.join(format!("mare_{name}.csv")), mare_csv(&report).as_bytes())?;
    print!("{}", mare_table(&report));
    Ok(())
}

#[derive(Serialize)]
struct PredictionRow {
    component: &'static str,
    unit: &'static str,
    surrogate: Option<f64>,
    oracle: Option<f64>,
}

fn predict(ctx: &Ctx, a: PredictArgs) -> Result<()> {
    ctx.validated()?;
    if a.checkpoint.is_none() && !a.oracle {
        return Err(Error::config("predict", "needs --checkpoint, --oracle or both"));
    }
    let g = grid::read_grid(&a.grid)?;
    let surrogate = match &a.checkpoint {
        Some(p) => {
            let ck = checkpoint::read_checkpoint(p)?;
            let net = ck.network()?;
            Some(evaluate::predict(&net, &evaluate::scaler_of(&ck)?, std::slice::from_ref(&g))?[0])
        }
        None => None,
    };
    let oracle = if a.oracle {
        let h = homog::homogenize(&g, &ctx.cfg.phases, &ctx.cfg.solver)?;
        Some(homog::extract_engineering_constants(&h.stiffness)?.to_array())
    } else {
        None
    };
    let rows: Vec<PredictionRow> = (0..12)
        .map(|i| PredictionRow {
            component: COMPONENT_NAMES[i],
            unit: COMPONENT_UNITS[i],
            surrogate: surrogate.map(|s| s[i]),
            oracle: oracle.map(|o| o[i]),
        })
        .collect();
    io::write_json(&ctx.out.join("prediction.json"), &rows)?;
    let cell = |v: Option<f64>| v.map(|x| format!("{x:>12.4}")).unwrap_or_else(|| format!("{:>12}", "-"));
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{:<6}{:<6}{:>12}{:>12}", "", "unit", "surrogate", "oracle");
    for r in &rows {
        let _ = writeln!(out, "{:<6}{:<6}{}{}", r.component, r.unit, cell(r.surrogate), cell(r.oracle));
    }
    Ok(())
}

fn summary_table(title: &str, rows: &[uq::ComponentSummary]) -> String {
    let mut s = format!("{title}\n{:<6}{:<6}{:>12}{:>12}\n", "", "unit", "mu", "sigma");
    for r in rows {
        s.push_str(&format!("{:<6}{:<6}{:>12.4}{:>12.4}\n", r.component, r.unit, r.mu, r.sigma));
    }
    s
}

fn run_uq(ctx: &mut Ctx, a: UqArgs) -> Result<()> {
    let u = &mut ctx.cfg.uq;
    if let Some(v) = a.vf_mean {
        u.vf_mean = v;
    }
    if let Some(v) = a.vf_sd {
        u.vf_sd = v;
    }
    if let Some(v) = a.samples {
        u.n_samples = v;
    }
    if a.no_oracle {
        u.oracle = false;
    }
    let ck = a.checkpoint.as_deref().map(checkpoint::read_checkpoint).transpose()?;
    if let Some(ck) = &ck {
        ctx.cfg.dataset.n = ck.arch.input_n;
    }
    ctx.validated()?;
    let cfg = &ctx.cfg;
    let report = uq::run_uq(cfg, &cfg.uq, &cfg.dataset.packing, cfg.dataset.n, ck.as_ref())?;
    io::write_json(&ctx.out.join("uq.json"), &report)?;
    if let Some(s) = &report.surrogate {
        print!("{}", summary_table("surrogate", s));
    }
    if let Some(s) = &report.oracle {
        print!("{}", summary_table("oracle", s));
    }
    Ok(())
}

#[derive(Serialize)]
struct TransferSummary {
    base_checkpoint: String,
    transfer_best_epoch: usize,
    transfer_test: MareReport,
    scratch_best_epoch: Option<usize>,
    scratch_test: Option<MareReport>,
}

fn run_transfer(ctx: &mut Ctx, a: TransferArgs) -> Result<()> {
    if let Some(e) = a.epochs {
        ctx.cfg.transfer.train.epochs = e;
    }
    if a.no_baseline {
        ctx.cfg.transfer.baseline = false;
    }
    let data = Dataset::open(&a.data)?;
    ctx.cfg.dataset.n = data.manifest.n;
    ctx.validated()?;
    let bytes = io::read_bytes(&a.base)?;
    let hash = io::sha256_hex(&bytes);
    let base = checkpoint::decode(&a.base, &bytes)?;
    let outcome = transfer::run_transfer(&ctx.cfg, &base, &hash, &data, &mut |m, r| {
        epoch_line(ctx, if m == Model::Transfer { "TL " } else { "TS " }, r)
    })?;
    checkpoint::write_checkpoint(&ctx.out.join(TRANSFER_FILE), &outcome.transfer)?;
    if let Some(s) = &outcome.scratch {
        checkpoint::write_checkpoint(&ctx.out.join(SCRATCH_FILE), s)?;
    }
    io::write_bytes(
        &ctx.out.join("learning_curve.csv"),
        transfer::curve_csv(&outcome.curve).as_bytes(),
    )?;
    let best = |c: &voxhomog_core::nn::Checkpoint| c.log.as_ref().map_or(0, |l| l.best_epoch);
    let summary = TransferSummary {
        base_checkpoint: hash,
        transfer_best_epoch: best(&outcome.transfer),
        transfer_test: evaluate::evaluate(&outcome.transfer, &data, Split::Test)?,
        scratch_best_epoch: outcome.scratch.as_ref().map(best),
        scratch_test: outcome
            .scratch
            .as_ref()
            .map(|s| evaluate::evaluate(s, &data, Split::Test))
            .transpose()?,
    };
    io::write_json(&ctx.out.join("transfer.json"), &summary)?;
    print!("transfer learning\n{}", mare_table(&summary.transfer_test));
    if let Some(r) = &summary.scratch_test {
        print!("from scratch\n{}", mare_table(r));
    }
    Ok(())
}

fn bounds(ctx: &Ctx, a: BoundsArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.vf) {
        return Err(Error::config("vf", format!("must lie in [0, 1] (got {})", a.vf)));
    }
    ctx.validated()?;
    let b = homog::voigt_reuss_bounds(&ctx.cfg.phases, a.vf)?;
    io::write_json(&ctx.out.join("bounds.json"), &b)?;
    println!("vf     {}", a.vf);
    println!("Reuss  {:.3} GPa", b.reuss);
    println!("Voigt  {:.3} GPa", b.voigt);
    Ok(())
}

fn export_featmaps(ctx: &Ctx, a: FeatmapsArgs) -> Result<()> {
    ctx.validated()?;
    let ck = checkpoint::read_checkpoint(&a.checkpoint)?;
    let net = ck.network()?;
    let g = grid::read_grid(&a.grid)?;
    let index = match a.index {
        Some(i) => i,
        None => {
            let trace = net.trace();
            let t = trace.convs.get(a.layer).ok_or(Error::Core(voxhomog_core::Error::IndexOutOfRange {
                what: "conv layer",
                index: a.layer,
                len: trace.convs.len(),
            }))?;
            t.out_extent / 2
        }
    };
    let axis: Axis = a.axis.into();
    let fm = featmaps::feature_maps(&net, &g, a.layer, axis, index)?;
    let name = format!("featmaps_l{}_{}{}.vxfm", a.layer, axis_name(axis), index);
    let path = ctx.out.join(name);
    featmaps::write_feature_maps(&path, &fm)?;
    println!(
        "{} maps of {}x{} -> {}",
        fm.header.channels,
        fm.header.extent,
        fm.header.extent,
        path.display()
    );
    Ok(())
}

fn axis_name(a: Axis) -> &'static str {
    match a {
        Axis::X => "x",
        Axis::Y => "y",
        Axis::Z => "z",
    }
}

/// Path of the checkpoint `train` writes under `out`.
pub fn checkpoint_path(out: &Path) -> PathBuf {
    out.join(CHECKPOINT_FILE)
}
