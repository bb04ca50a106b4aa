//! Command-line front end: full inpainting runs, local PDE baselines,
//! nearest-neighbor-field diagnostics, metrics and synthetic fixtures.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 file i/o error,
//! 4 numerical failure (non-convergence or an ill-posed setup).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use inpaint::config::{build_spec, RawConfig};
use inpaint::error::Error;
use inpaint::fixtures::{synth_edge, synth_image, synth_mask, FixtureKind};
use inpaint::metric::Features;
use inpaint::nnf::{compute_nnf_exact, compute_soft_weights};
use inpaint::pipeline::{self, trace_to_csv, BaselineKind};
use inpaint::raster::{psnr, ImageBuffer, RegionMask};

#[derive(Parser)]
#[command(
    name = "inpaint",
    about = "Nonlocal feature-driven exemplar image inpainting",
    version
)]
struct Cli {
    /// Worker threads (default: machine parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full alternating inpainting pipeline.
    Inpaint(InpaintArgs),
    /// Zero-forcing harmonic or biharmonic Dirichlet completion.
    Baseline(BaselineArgs),
    /// Exact nearest-neighbor-field diagnostics for one graph.
    Nnf(NnfArgs),
    /// Image quality metrics.
    Metrics(MetricsArgs),
    /// Deterministic synthetic fixtures.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. --set solver.tol=1e-8 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Override the top-level seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RawConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RawConfig::load(path)?,
            None => RawConfig::default(),
        };
        cfg.apply_overrides(&self.set)?;
        if let Some(seed) = self.seed {
            cfg.set("seed", &seed.to_string());
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct InpaintArgs {
    /// Damaged input image (8-bit grayscale or RGB raster).
    #[arg(long)]
    image: PathBuf,
    /// Inpainting mask; values above 127 mark the unknown region.
    #[arg(long)]
    mask: PathBuf,
    /// Output image path; the effective config is echoed next to it.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Write the per-iteration energy trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Dump each iterate as a PNG into this directory.
    #[arg(long)]
    dump_iters: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum BaselineKindArg {
    Harmonic,
    Biharmonic,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    kind: BaselineKindArg,
    #[arg(long, default_value_t = 1e-8)]
    solver_tol: f64,
}

#[derive(Args)]
struct NnfArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Graph to analyze (1-based).
    #[arg(long, default_value_t = 1)]
    graph: usize,
    /// Write the exact field as "x y -> tx ty dist" lines.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Soft-weight diagnostic at one pixel "x,y" (needs graph.<n>.sigma).
    #[arg(long, value_name = "X,Y")]
    soft: Option<String>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Report peak signal-to-noise ratio between two images.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    psnr: Vec<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// step, two-tone or ramp.
    #[arg(long)]
    fixture: String,
    #[arg(long)]
    size: usize,
    #[arg(long)]
    output: PathBuf,
    /// Also write the fixture's standard inpainting mask.
    #[arg(long)]
    mask_out: Option<PathBuf>,
    /// Also write the fixture's edge-completion map (step only).
    #[arg(long)]
    edge_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    channels: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.threads {
        // Ignore the error when a pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (category, code) = classify(&e);
            eprintln!("error: {category}: {e}");
            ExitCode::from(code)
        }
    }
}

fn classify(e: &Error) -> (&'static str, u8) {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::DimensionMismatch { .. } => {
            ("usage", 2)
        }
        Error::Image(_) | Error::Io(_) => ("io", 3),
        _ => ("numerical", 4),
    }
}

fn dispatch(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Inpaint(args) => cmd_inpaint(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Nnf(args) => cmd_nnf(args),
        Command::Metrics(args) => cmd_metrics(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn cmd_inpaint(args: InpaintArgs) -> Result<(), Error> {
    // Fail fast: every referenced file is loaded and parsed up front.
    let cfg = args.config.resolve()?;
    let mut spec = build_spec(&cfg)?;
    let image = ImageBuffer::load(&args.image)?;
    let mask = RegionMask::load(&args.mask)?;
    mask.check_dims(image.width(), image.height())?;
    spec.dump_dir = args.dump_iters.clone();

    let outcome = pipeline::run(&image, &mask, &spec)?;
    outcome.image.save(&args.output)?;
    // Sidecar with the effective configuration; feeding it back in
    // reproduces the run.
    let sidecar = sidecar_path(&args.output);
    std::fs::write(&sidecar, cfg.to_text())?;
    if let Some(trace_path) = &args.trace {
        std::fs::write(trace_path, trace_to_csv(&outcome.trace))?;
    }
    println!(
        "inpainted {} -> {} ({} iterations, {})",
        args.image.display(),
        args.output.display(),
        outcome.iterations,
        if outcome.converged {
            "converged"
        } else {
            "iteration cap reached"
        }
    );
    Ok(())
}

fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".config.txt");
    output.with_file_name(name)
}

fn cmd_baseline(args: BaselineArgs) -> Result<(), Error> {
    let image = ImageBuffer::load(&args.image)?;
    let mask = RegionMask::load(&args.mask)?;
    let kind = match args.kind {
        BaselineKindArg::Harmonic => BaselineKind::Harmonic,
        BaselineKindArg::Biharmonic => BaselineKind::Biharmonic,
    };
    let out = pipeline::run_baseline(&image, &mask, kind, args.solver_tol)?;
    out.save(&args.output)?;
    println!("baseline written to {}", args.output.display());
    Ok(())
}

fn cmd_nnf(args: NnfArgs) -> Result<(), Error> {
    let cfg = args.config.resolve()?;
    let spec = build_spec(&cfg)?;
    let image = ImageBuffer::load(&args.image)?;
    let mask = RegionMask::load(&args.mask)?;
    mask.check_dims(image.width(), image.height())?;
    let (bank, regions, graphs) = pipeline::materialize(&mask, &spec.kernels, &spec.graphs)?;
    if args.graph == 0 || args.graph > graphs.len() {
        return Err(Error::InvalidParameter(format!(
            "graph {} out of range 1..={}",
            args.graph,
            graphs.len()
        )));
    }
    let graph = &graphs[args.graph - 1];
    let features = Features::compute(&image, &bank, spec.boundary);
    if let Some(soft) = &args.soft {
        let (sx, sy) = soft.split_once(',').ok_or_else(|| {
            Error::InvalidParameter("--soft expects a pixel as x,y".to_string())
        })?;
        let x: usize = sx
            .trim()
            .parse()
            .map_err(|e| Error::InvalidParameter(format!("--soft x: {e}")))?;
        let y: usize = sy
            .trim()
            .parse()
            .map_err(|e| Error::InvalidParameter(format!("--soft y: {e}")))?;
        let field = compute_soft_weights(&features, graph, &regions, (x, y))?;
        for (cand, w) in field.candidates.iter().zip(&field.weights) {
            println!("{} {} {}", cand.0, cand.1, w);
        }
        return Ok(());
    }
    let field = compute_nnf_exact(&features, graph, &regions)?;
    match &args.dump {
        Some(path) => std::fs::write(path, field.dump())?,
        None => print!("{}", field.dump()),
    }
    Ok(())
}

fn cmd_metrics(args: MetricsArgs) -> Result<(), Error> {
    if args.psnr.len() != 2 {
        return Err(Error::InvalidParameter(
            "metrics needs --psnr <A> <B>".to_string(),
        ));
    }
    let a = ImageBuffer::load(&args.psnr[0])?;
    let b = ImageBuffer::load(&args.psnr[1])?;
    let value = psnr(&a, &b)?;
    if value.is_infinite() {
        println!("psnr INF");
    } else {
        println!("psnr {value:.6}");
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    let kind: FixtureKind = args.fixture.parse()?;
    let image = synth_image(kind, args.size, args.channels)?;
    image.save(&args.output)?;
    if let Some(mask_path) = &args.mask_out {
        synth_mask(kind, args.size)?.save(mask_path)?;
    }
    if let Some(edge_path) = &args.edge_out {
        synth_edge(kind, args.size)?.save(edge_path)?;
    }
    println!("fixture written to {}", args.output.display());
    Ok(())
}
