//! `gpu-dse`: config management, workload generation, single simulations,
//! parameter sweeps, classification, and improved-setup comparison.
//!
//! Exit codes: 0 on success, 1 on domain errors (bad configs, missing
//! files, unschedulable kernels), 2 on usage errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use gpu_dse_core::arch::{self, AreaWeights};
use gpu_dse_core::dse::{self, SweepOptions};
use gpu_dse_core::report;
use gpu_dse_core::sim::{self, SimOptions, DEFAULT_CYCLE_CAP};
use gpu_dse_core::workload::{self, Archetype, ArchetypeKind, Scale};
use gpu_dse_core::{GpuConfig, ParamAxis, Platform};

const CYCLE_CAP_ENV: &str = "GPU_DSE_CYCLE_CAP";

#[derive(Parser)]
#[command(
    name = "gpu-dse",
    version,
    about = "Deterministic GPU timing simulator and design-space explorer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Export a built-in machine description.
    Config(ConfigArgs),
    /// Generate a synthetic kernel from an archetype.
    GenWorkload(GenWorkloadArgs),
    /// Simulate one kernel on one configuration.
    Simulate(SimulateArgs),
    /// Run a sweep plan and write CSV/JSON/plot data.
    Sweep(SweepArgs),
    /// Classify swept parameters from stored sweep results.
    Classify(ClassifyArgs),
    /// Compare the improved setups against the platform baseline.
    Setups(SetupsArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Preset name: tx2 or xavier.
    #[arg(long)]
    preset: String,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenWorkloadArgs {
    /// dense_linear_algebra, structured_grid, graph_traversal,
    /// dynamic_programming or unstructured_grid.
    #[arg(long)]
    archetype: String,
    /// tiny, small or medium.
    #[arg(long, default_value = "small")]
    scale: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Preset name (tx2, xavier) or a config file path.
    #[arg(long)]
    config: String,
    /// Kernel file.
    #[arg(long)]
    kernel: PathBuf,
    /// Write the full result as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dump one line per cache access for cross-checks.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep plan file.
    #[arg(long)]
    plan: PathBuf,
    /// Directory for sweep.csv, sweep.json and figure data.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Concurrent simulations; 1 keeps runs maximally reproducible.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Directory holding sweep.json from a previous `sweep` run.
    #[arg(long, value_name = "DIR")]
    results: PathBuf,
    /// Relative geomean improvement below which a parameter counts as
    /// saturated.
    #[arg(long, default_value_t = 0.02)]
    epsilon: f64,
    /// Comma-separated axes classified as software-limited.
    #[arg(long, value_delimiter = ',')]
    sw_axes: Option<Vec<String>>,
}

#[derive(Args)]
struct SetupsArgs {
    /// tx2 or xavier.
    #[arg(long)]
    platform: String,
    /// Comma-separated kernel files.
    #[arg(long, value_delimiter = ',', required = true)]
    workloads: Vec<PathBuf>,
    /// Directory for setups.csv and setups.json.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Area weight file overriding the defaults.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Config(args) => cmd_config(args),
        Command::GenWorkload(args) => cmd_gen_workload(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Setups(args) => cmd_setups(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn usage_error(message: &str) -> ExitCode {
    eprintln!("usage error: {message}");
    ExitCode::from(2)
}

fn cycle_cap() -> Result<u64> {
    match std::env::var(CYCLE_CAP_ENV) {
        Ok(v) => v
            .parse::<u64>()
            .map_err(|_| anyhow!("{CYCLE_CAP_ENV}={v} is not a cycle count")),
        Err(_) => Ok(DEFAULT_CYCLE_CAP),
    }
}

fn load_config(spec: &str) -> Result<GpuConfig> {
    match spec.parse::<Platform>() {
        Ok(platform) => Ok(arch::preset(platform)),
        Err(_) => Ok(arch::read_config_file(Path::new(spec))?),
    }
}

fn write_or_print(out: Option<&Path>, text: &str, what: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            println!("{what}: wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_config(args: ConfigArgs) -> Result<ExitCode> {
    let config = arch::preset_by_name(&args.preset)?;
    write_or_print(
        args.out.as_deref(),
        &arch::config_to_toml(&config),
        &format!("config {}", config.label),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen_workload(args: GenWorkloadArgs) -> Result<ExitCode> {
    let archetype = Archetype {
        name: args.archetype.parse::<ArchetypeKind>()?,
        scale: args.scale.parse::<Scale>()?,
    };
    let spec = workload::gen_archetype(archetype, args.seed);
    write_or_print(
        args.out.as_deref(),
        &workload::kernel_to_toml(&spec),
        &format!("workload {}", spec.label),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode> {
    let config = load_config(&args.config)?;
    let kernel = workload::read_kernel_file(&args.kernel)?;
    let trace: Option<Box<dyn std::io::Write>> = match &args.trace {
        Some(path) => {
            let file = fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            Some(Box::new(std::io::BufWriter::new(file)))
        }
        None => None,
    };
    let result = sim::simulate_with(
        &config,
        &kernel,
        SimOptions {
            cycle_cap: cycle_cap()?,
            trace,
            ..Default::default()
        },
    )?;
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&result)?;
        fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "simulate {} on {}: total_cycles={} instructions={} blocks={}",
        kernel.label,
        config.label,
        result.total_cycles,
        result.instructions_issued,
        result.blocks_executed
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let plan = dse::load_plan(&args.plan)?;
    let opts = SweepOptions {
        jobs: args.jobs.max(1),
        cycle_cap: cycle_cap()?,
    };
    let result = dse::run_sweep(&plan, &opts)?;
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    fs::write(args.out_dir.join("sweep.csv"), report::emit_csv(&result))?;
    fs::write(args.out_dir.join("sweep.json"), report::emit_json(&result))?;
    // Figure data for every figure this sweep covers, keyed by platform
    // family: fig3* off the tx2 baseline, fig6* off xavier.
    let family = if result.base_label.starts_with("xavier") {
        "fig6"
    } else {
        "fig3"
    };
    for (id, axis) in report::FIGURE_AXES {
        if !id.starts_with(family) {
            continue;
        }
        if result.axis_curve(*axis).len() < 2 {
            continue;
        }
        if let Ok(data) = report::emit_figure_data(&result, id) {
            fs::write(args.out_dir.join(format!("{id}.dat")), data)?;
        }
    }
    print!("{}", report::render_summary(&result));
    println!(
        "sweep: {} points x {} workloads -> {}",
        result.entries.len(),
        result.workloads.len(),
        args.out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_classify(args: ClassifyArgs) -> Result<ExitCode> {
    if !(args.epsilon > 0.0) || !args.epsilon.is_finite() {
        return Ok(usage_error("--epsilon must be a positive ratio"));
    }
    let sw_axes = match &args.sw_axes {
        None => dse::default_software_axes(),
        Some(names) => {
            let mut set = std::collections::BTreeSet::new();
            for name in names {
                match name.parse::<ParamAxis>() {
                    Ok(axis) => {
                        set.insert(axis);
                    }
                    Err(_) => return Ok(usage_error(&format!("unknown axis `{name}`"))),
                }
            }
            set
        }
    };
    let path = args.results.join("sweep.json");
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading {}", path.display()))?;
    let result = report::parse_json(&text)?;
    let rows = dse::classify_all(&result, args.epsilon, &sw_axes)?;
    print!("{}", report::render_classification(&rows));
    Ok(ExitCode::SUCCESS)
}

fn cmd_setups(args: SetupsArgs) -> Result<ExitCode> {
    let platform = args.platform.parse::<Platform>()?;
    let workloads = args
        .workloads
        .iter()
        .map(|p| workload::read_kernel_file(p))
        .collect::<Result<Vec<_>, _>>()?;
    let weights = match &args.weights {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            arch::weights_from_toml(&text)?
        }
        None => AreaWeights::default(),
    };
    let opts = SweepOptions {
        jobs: args.jobs.max(1),
        cycle_cap: cycle_cap()?,
    };
    let cmp = dse::compare_setups(platform, &workloads, &weights, &opts)?;
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    fs::write(args.out_dir.join("setups.csv"), report::emit_setups_csv(&cmp))?;
    fs::write(
        args.out_dir.join("setups.json"),
        report::emit_setups_json(&cmp),
    )?;
    print!("{}", report::render_setups(&cmp));
    for row in &cmp.rows {
        if row.setup == "baseline" {
            continue;
        }
        println!(
            "setups {platform}: {} geomean={} area_delta={:+.0}",
            row.setup,
            row.geomean
                .map_or_else(|| "NA".to_string(), |g| format!("{g:.6}")),
            row.area_delta
        );
    }
    Ok(ExitCode::SUCCESS)
}
