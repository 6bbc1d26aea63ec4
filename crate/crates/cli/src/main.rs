use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mss_pinn::catalog::{self, MetricChannels, SubRange};
use mss_pinn::harness::{
    compare, emit_plots, evaluate, oracle_for, resolve_example, run_reproduction, train, Checkpoint,
    MetricReport, ReproduceOptions, RmseForm, TaskGranularity, TrainingConfig,
};
use mss_pinn::loss::GridSpec;
use mss_pinn::oracle::solve_rk4;
use mss_pinn::{Error, MssModel, Result, TrajectoryTable};

#[derive(Parser)]
#[command(name = "mss-pinn", version, about = "Multi-state system reliability with physics-informed networks")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Overrides the seed of the preset or config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; `reproduce` trains both arms concurrently when ≥ 2.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// TOML training configuration (replaces the preset).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Smaller preset: iterations ×0.1, collocation points ×0.2.
    #[arg(long, global = true)]
    smoke: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model with the RK4 oracle.
    Solve {
        model: Option<String>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// Internal step; must divide the output spacing.
        #[arg(long)]
        step: Option<f64>,
    },
    /// Train a network and score it against the oracle.
    Train {
        model: Option<String>,
        #[command(flatten)]
        overrides: TrainOverrides,
    },
    /// Evaluate a checkpoint on a time grid.
    Evaluate {
        checkpoint: PathBuf,
        /// Defaults to the model recorded in the checkpoint.
        #[arg(long)]
        model: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        t_start: f64,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Error metrics of one trajectory CSV against another.
    Compare {
        estimate: PathBuf,
        reference: PathBuf,
        #[arg(long)]
        model: Option<String>,
        #[arg(long, value_enum, default_value_t = Channels::States)]
        channels: Channels,
        /// Window `START:END`, scored over `(START, END]`; repeatable.
        #[arg(long = "sub-range", value_parser = parse_sub_range)]
        sub_ranges: Vec<SubRange>,
        #[arg(long, value_enum, default_value_t = Form::Pooled)]
        rmse_form: Form,
    },
    /// Train with and without PCGrad on an example preset and compare.
    Reproduce {
        /// 1, 2 or 3.
        example: String,
        #[arg(long, value_enum, default_value_t = Granularity::TwoGroups)]
        granularity: Granularity,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long, value_enum, default_value_t = Form::Pooled)]
        rmse_form: Form,
    },
    /// List the catalog models.
    ListModels,
    /// Overlay trajectory CSVs, one SVG per channel.
    Plot {
        #[arg(required = true)]
        tables: Vec<PathBuf>,
        #[arg(long, default_value = "plot")]
        stem: String,
    },
}

#[derive(Args)]
struct TrainOverrides {
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, conflicts_with = "no_pcgrad")]
    pcgrad: bool,
    #[arg(long)]
    no_pcgrad: bool,
    #[arg(long, value_enum)]
    granularity: Option<Granularity>,
    /// Residual weight without PCGrad.
    #[arg(long)]
    weight: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Granularity {
    TwoGroups,
    PerState,
}

impl From<Granularity> for TaskGranularity {
    fn from(g: Granularity) -> Self {
        match g {
            Granularity::TwoGroups => TaskGranularity::TwoGroups,
            Granularity::PerState => TaskGranularity::PerState,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Channels {
    States,
    PerformanceRates,
}

impl From<Channels> for MetricChannels {
    fn from(c: Channels) -> Self {
        match c {
            Channels::States => MetricChannels::States,
            Channels::PerformanceRates => MetricChannels::PerformanceRates,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Pooled,
    ChannelMean,
}

impl From<Form> for RmseForm {
    fn from(f: Form) -> Self {
        match f {
            Form::Pooled => RmseForm::Pooled,
            Form::ChannelMean => RmseForm::ChannelMean,
        }
    }
}

fn parse_sub_range(s: &str) -> std::result::Result<SubRange, String> {
    let (a, b) = s.split_once(':').ok_or("expected START:END")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a.is_nan() || b.is_nan() || b <= a {
        return Err("END must exceed START".into());
    }
    Ok(SubRange::new(a, b))
}

fn read_config(path: &Path) -> Result<TrainingConfig> {
    TrainingConfig::from_toml(&fs::read_to_string(path)?)
}

/// Config from `--config`, or else the (possibly smoke-sized) preset of `model`.
fn resolve_config(g: &Global, model: Option<&str>) -> Result<TrainingConfig> {
    let mut cfg = match (&g.config, model) {
        (Some(path), _) => {
            if g.smoke {
                return Err(Error::Config("--smoke applies to presets, not config files".into()));
            }
            let cfg = read_config(path)?;
            if let Some(m) = model.filter(|m| *m != cfg.model) {
                return Err(Error::Config(format!("model '{m}' conflicts with '{}' in the config file", cfg.model)));
            }
            cfg
        }
        (None, Some(m)) => {
            let mut p = catalog::preset(catalog_name(m))?;
            if g.smoke {
                p = p.smoke();
            }
            TrainingConfig::from_preset(&p)
        }
        (None, None) => return Err(Error::Config("name a model or pass --config".into())),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn catalog_name(m: &str) -> &str {
    resolve_example(m).unwrap_or(m)
}

/// Builds `name` from the catalog, or from the config file when it defines it.
fn resolve_model(g: &Global, name: Option<&str>) -> Result<MssModel> {
    if let Some(path) = &g.config {
        let cfg = read_config(path)?;
        let model = cfg.build_model()?;
        if name.is_none_or(|n| n == cfg.model || n == model.name()) {
            return Ok(model);
        }
    }
    match name {
        Some(n) => catalog::build(catalog_name(n)),
        None => Err(Error::Config("name a model or pass --config".into())),
    }
}

fn print_report(report: &MetricReport, form: RmseForm) {
    println!("rmse ({}): {:.6e}", form_name(form), report.rmse(form));
    for (i, c) in report.channels.iter().enumerate() {
        println!(
            "  {c:>8}  rmse {:.6e}  mae {:.6e}",
            report.per_channel_rmse[i], report.per_channel_mae[i]
        );
    }
    for (label, v) in &report.sub_range_rmse {
        println!("  range {label}: rmse {v:.6e}");
    }
}

fn form_name(f: RmseForm) -> &'static str {
    match f {
        RmseForm::Pooled => "pooled",
        RmseForm::ChannelMean => "channel mean",
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::ListModels => {
            println!("{:<10} {:>6}  {:<6}  {:<16}  performance rates", "model", "states", "unit", "rates");
            let mut models: Vec<MssModel> = catalog::MODEL_NAMES.iter().map(|n| catalog::build(n)).collect::<Result<_>>()?;
            if let Some(path) = &g.config {
                let cfg = read_config(path)?;
                if cfg.custom_model.is_some() {
                    models.push(cfg.build_model()?);
                }
            }
            for m in &models {
                let perf = m
                    .performance_rates()
                    .map(|r| r.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" "))
                    .unwrap_or_else(|| "-".into());
                let kind = if m.is_homogeneous() { "homogeneous" } else { "time-dependent" };
                println!("{:<10} {:>6}  {:<6}  {:<16}  {perf}", m.name(), m.num_states(), m.time_unit(), kind);
            }
        }
        Command::Solve { model, t_end, points, step } => {
            let model = resolve_model(g, model.as_deref())?;
            let grid = match &g.config {
                Some(p) => read_config(p)?.evaluation,
                None => catalog::preset(model.name()).map(|p| p.evaluation).unwrap_or(GridSpec::new(0.0, 1.0, 101)),
            };
            let t_end = t_end.unwrap_or(grid.t_end);
            let points = points.unwrap_or(grid.points);
            if points < 2 {
                return Err(Error::Config("need at least two output points".into()));
            }
            let step = step.unwrap_or_else(|| catalog::default_internal_step(model.name(), t_end, points));
            let table = solve_rk4(&model, t_end, points, step)?;
            let (csv, _) = table.save(&g.out, "oracle")?;
            let last = table.rows.last().expect("at least two rows");
            println!("{} on [0, {t_end}] with step {step}: {} rows -> {}", model.name(), table.len(), csv.display());
            println!("p({t_end}) = {last:?}");
        }
        Command::Train { model, overrides } => {
            let mut cfg = resolve_config(g, model.as_deref())?;
            if let Some(n) = overrides.iterations {
                cfg.iterations = n;
            }
            if overrides.pcgrad {
                cfg.pcgrad = true;
            }
            if overrides.no_pcgrad {
                cfg.pcgrad = false;
            }
            if let Some(gr) = overrides.granularity {
                cfg.task_granularity = gr.into();
            }
            if let Some(w) = overrides.weight {
                cfg.weight = w;
            }
            cfg.output_dir = Some(g.out.to_string_lossy().into_owned());
            cfg.validate()?;
            let m = cfg.build_model()?;
            let oracle = (cfg.evaluation.t_start == 0.0).then(|| oracle_for(&cfg, &m)).transpose()?;
            let out = train(&cfg, oracle.as_ref())?;
            let l = &out.manifest.final_loss;
            println!(
                "{} iterations: L_u {:.6e}  L_f {:.6e}  total {:.6e}  ({:.1} s)",
                out.manifest.iterations, l.loss_u, l.loss_f, l.total, out.manifest.wall_clock_seconds
            );
            if let Some(r) = &out.manifest.metrics {
                print_report(r, RmseForm::Pooled);
            }
            println!("artifacts in {}", g.out.display());
        }
        Command::Evaluate { checkpoint, model, t_start, t_end, points } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let model = resolve_model(g, Some(model.as_deref().unwrap_or(&ck.header.model)))?;
            let default = catalog::preset(model.name()).map(|p| p.evaluation).ok();
            let t_end = t_end.or(default.map(|d| d.t_end)).ok_or_else(|| Error::Config("--t-end is required".into()))?;
            let points = points.or(default.map(|d| d.points)).unwrap_or(101);
            let table = evaluate(&ck, &model, &GridSpec::new(t_start, t_end, points))?;
            let (csv, _) = table.save(&g.out, "evaluation")?;
            println!("iteration {} on [{t_start}, {t_end}]: {} rows -> {}", ck.header.iteration, table.len(), csv.display());
        }
        Command::Compare { estimate, reference, model, channels, sub_ranges, rmse_form } => {
            let est = TrajectoryTable::load(&estimate)?;
            let reference = TrajectoryTable::load(&reference)?;
            let name = model.unwrap_or_else(|| reference.model.clone());
            let model = resolve_model(g, Some(&name))?;
            let report = compare(&est, &reference, &model, channels.into(), &sub_ranges)?;
            fs::create_dir_all(&g.out)?;
            fs::write(g.out.join("metrics.json"), serde_json::to_string_pretty(&report)?)?;
            print_report(&report, rmse_form.into());
        }
        Command::Reproduce { example, granularity, iterations, rmse_form } => {
            if g.config.is_some() {
                return Err(Error::Config("reproduce runs the fixed presets and takes no --config".into()));
            }
            let name = resolve_example(&example)?;
            let out = g.out.join(if g.smoke { format!("{name}-smoke") } else { name.to_string() });
            let opts = ReproduceOptions {
                smoke: g.smoke,
                seed: g.seed,
                threads: g.threads,
                out_dir: Some(out.clone()),
                task_granularity: granularity.into(),
                iterations,
            };
            let r = run_reproduction(name, &opts)?;
            let form: RmseForm = rmse_form.into();
            let s = &r.summary;
            let (a, b) = (s.with_pcgrad.metrics.rmse(form), s.without_pcgrad.metrics.rmse(form));
            println!("{name} (seed {}), rmse {}:", s.seed, form_name(form));
            println!("  with pcgrad     {a:.6e}");
            println!("  without pcgrad  {b:.6e}");
            println!("  ratio           {:.3}", b / a);
            for (label, v) in &s.with_pcgrad.metrics.sub_range_rmse {
                let w = s.without_pcgrad.metrics.sub_range_rmse.get(label).copied().unwrap_or(f64::NAN);
                println!("  range {label}: {v:.6e} vs {w:.6e}");
            }
            println!("artifacts in {}", out.display());
        }
        Command::Plot { tables, stem } => {
            let tables = tables.iter().map(|p| TrajectoryTable::load(p)).collect::<Result<Vec<_>>>()?;
            for p in emit_plots(&tables, &g.out, &stem)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
