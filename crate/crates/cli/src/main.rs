//! `simdflow`: generate, verify and cost SIMD convolution schedules.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error.
//! Files are only written under `--out`, and only after all computation for
//! the command has finished.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use simdflow_core::emit::{emit, EmitConfig, Flavor};
use simdflow_core::pipeline::{blocking_sweep, collect_costs, layout_dp, layout_report, sweep_csv, CostWeights};
use simdflow_core::reuse::recommend;
use simdflow_core::schedule::{generate, parse_ir};
use simdflow_core::workload::verify;
use simdflow_core::{Anchor, AuxKind, DataflowSpec, Mode, ScheduleIr};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "simdflow", version, about = "SIMD convolution dataflow explorer")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the IR dump and C source for one layer.
    Gen(GenArgs),
    /// Run a schedule on random tensors against the scalar oracle.
    Sim(SimArgs),
    /// Cost every blocking candidate of one layer.
    Sweep(SweepArgs),
    /// Pick one blocking per layer, including layout transform costs.
    Layout(LayoutArgs),
    /// Print the recommended dataflow for each layer.
    Recommend(RecommendArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the machine mode from the config.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SpecArgs {
    #[arg(long, default_value_t = 0)]
    layer: usize,
    #[arg(long, conflicts_with = "recommend")]
    anchor: Option<Anchor>,
    #[arg(long, default_value_t = 0)]
    aux_input: usize,
    #[arg(long, default_value_t = 0)]
    aux_weight: usize,
    #[arg(long, default_value_t = 0)]
    aux_output: usize,
    /// Use the recommended dataflow instead of `--anchor`.
    #[arg(long)]
    recommend: bool,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    spec: SpecArgs,
    /// Emit portable scalar C instead of NEON intrinsics.
    #[arg(long)]
    scalar: bool,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    spec: SpecArgs,
    /// Simulate an IR dump instead of generating one.
    #[arg(long)]
    ir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    layer: usize,
    /// Cost weight overrides, e.g. `loads=2,arithmetic=1`.
    #[arg(long)]
    weights: Option<String>,
}

#[derive(Args)]
struct LayoutArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    weights: Option<String>,
}

#[derive(Args)]
struct RecommendArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    layer: Option<usize>,
}

enum Failure {
    Verify(String),
    Config(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

impl From<simdflow_core::Error> for Failure {
    fn from(e: simdflow_core::Error) -> Self {
        Failure::Config(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Sim(a) => cmd_sim(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Layout(a) => cmd_layout(a),
        Command::Recommend(a) => cmd_recommend(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify(msg)) => {
            println!("FAIL: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(common: &Common) -> anyhow::Result<(RunConfig, Mode)> {
    let cfg = RunConfig::load(&common.config)?;
    let mode = common.mode.unwrap_or(cfg.machine.mode);
    Ok((cfg, mode))
}

fn build_ir(cfg: &RunConfig, mode: Mode, args: &SpecArgs) -> Result<ScheduleIr, Failure> {
    let layer = cfg.layer(args.layer)?;
    let vmc = cfg.machine(mode)?;
    let spec = if args.recommend {
        recommend(&vmc, &layer)
    } else {
        DataflowSpec::basic(args.anchor.unwrap_or(Anchor::Os))
            .with_aux(AuxKind::Input, args.aux_input)
            .with_aux(AuxKind::Weight, args.aux_weight)
            .with_aux(AuxKind::Output, args.aux_output)
    };
    generate(&layer, &vmc, &spec, mode)
        .map_err(|e| Failure::Config(anyhow!(e).context(format!("layer {}", args.layer))))
}

fn write_all(dir: &Path, files: &[(String, String)]) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn weights(cfg: &RunConfig, overrides: Option<&str>) -> anyhow::Result<CostWeights> {
    Ok(match overrides {
        Some(list) => cfg.weights.with_overrides(list)?,
        None => cfg.weights,
    })
}

fn cmd_gen(a: GenArgs) -> Outcome {
    let (cfg, mode) = load(&a.common)?;
    let ir = build_ir(&cfg, mode, &a.spec)?;
    let k = a.spec.layer;
    let anchor = ir.meta.spec.anchor;
    let flavor = if a.scalar { Flavor::ScalarC } else { Flavor::NeonC };
    let function = format!("conv_layer{k}_{anchor}");
    let ecfg = EmitConfig::new(flavor, function, mode)
        .with_guard(format!("SIMDFLOW_LAYER{k}_{}", anchor.name().to_uppercase()));
    let source = emit(&ir, &ecfg)?;
    let stem = format!("layer{k}_{anchor}");
    write_all(
        &a.common.out,
        &[(format!("{stem}.ir"), ir.to_text()), (format!("{stem}.c"), source)],
    )?;
    println!(
        "{}: {} instructions, wrote {stem}.ir and {stem}.c",
        ir.meta.spec,
        ir.instrs.len()
    );
    Ok(())
}

fn cmd_sim(a: SimArgs) -> Outcome {
    let (cfg, mode) = load(&a.common)?;
    let ir = match &a.ir {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_ir(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => build_ir(&cfg, mode, &a.spec)?,
    };
    let seed = a.seed.unwrap_or(cfg.seed);
    let v = match verify(&ir, seed) {
        Ok(v) => v,
        Err(simdflow_core::Error::Exec(e)) => return Err(Failure::Verify(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    if let Some(((k, h, w), got, want)) = v.mismatch {
        return Err(Failure::Verify(format!(
            "first mismatch at output (k={k}, h={h}, w={w}): machine {got}, oracle {want}"
        )));
    }
    let name = format!("layer{}_{}_counts.csv", a.spec.layer, ir.meta.spec.anchor);
    write_all(&a.common.out, &[(name.clone(), v.report.to_csv())])?;
    println!(
        "PASS {} ({} tiles, {} vector loads), wrote {name}",
        ir.meta.spec, v.report.tiles, v.report.layer.vector_loads
    );
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Outcome {
    let (cfg, mode) = load(&a.common)?;
    let layer = cfg.layer(a.layer)?;
    let base = cfg.machine(mode)?;
    let w = weights(&cfg, a.weights.as_deref())?;
    let rows =
        blocking_sweep(&layer, &base, &cfg.candidates(a.layer, &base), &w, mode).map_err(|e| e.at_layer(a.layer))?;
    let name = format!("layer{}_sweep.csv", a.layer);
    write_all(&a.common.out, &[(name.clone(), sweep_csv(&rows))])?;
    println!(
        "best of {}: {} cost={}, wrote {name}",
        rows.len(),
        rows[0].candidate,
        rows[0].cost
    );
    Ok(())
}

fn cmd_layout(a: LayoutArgs) -> Outcome {
    let (cfg, mode) = load(&a.common)?;
    let w = weights(&cfg, a.weights.as_deref())?;
    let table = collect_costs(&cfg.network(mode)?, &w)?;
    let assignment = layout_dp(&table)?;
    let report = layout_report(&table, &assignment);
    write_all(
        &a.common.out,
        &[
            ("layout_costs.csv".into(), table.layer_csv()),
            ("layout_boundaries.csv".into(), table.boundary_csv()),
            ("layout_report.txt".into(), report.clone()),
        ],
    )?;
    print!("{report}");
    Ok(())
}

fn cmd_recommend(a: RecommendArgs) -> Outcome {
    let cfg = RunConfig::load(&a.config)?;
    let vmc = cfg.machine(a.mode.unwrap_or(cfg.machine.mode))?;
    let ks: Vec<usize> = match a.layer {
        Some(k) => {
            cfg.layer(k)?;
            vec![k]
        }
        None => (0..cfg.layers.len()).collect(),
    };
    let mut out = String::new();
    for k in ks {
        let _ = writeln!(out, "layer {k}: {}", recommend(&vmc, &cfg.layers[k]));
    }
    print!("{out}");
    Ok(())
}
