//! `parascope` — planning CLI for 3d-parallel transformer training.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use output::{format_count, format_duration, format_gib, Format, Table};
use parascope_core::cost::{Method, ParallelPlan, Strategy};
use parascope_core::hardware::{HardwareProfile, GIB};
use parascope_core::model::{x_model, ModelShape};
use parascope_core::optimizer::{
    evaluate, fastest_plan, min_cluster_for_deadline, scaling_sweep, OptimizerConstraints,
    PlanEvaluation, SECONDS_PER_DAY,
};
use parascope_core::sim::{
    build_schedule, compare_to_closed_form, simulate, verify_buffering, ScheduleKind, SimRates,
    Stream,
};
use parascope_core::{scenario, tables};

#[derive(Parser)]
#[command(
    name = "parascope",
    about = "Resource usage, fastest configurations and schedule simulation for 3d-parallel transformer training",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML) providing model/profile/constraints defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// X-family index (even); overrides the scenario model.
    #[arg(long, global = true)]
    x: Option<u64>,
    /// Hardware profile name: a100-80g-ib, a100-80g-ethernet,
    /// a100-80g-unlimited-node.
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "md")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Resource usage of one fixed training configuration.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Named reference configuration (e.g. 3d-improved, none,
        /// data-tensor-partitioned); resolved by searching under that
        /// row's parallelism restrictions.
        #[arg(long)]
        plan: Option<String>,
        /// Explicit plan: training method.
        #[arg(long, value_parser = parse_method_arg)]
        method: Option<Method>,
        #[arg(long)]
        nb: Option<u64>,
        #[arg(long)]
        nl: Option<u64>,
        #[arg(long)]
        na: Option<u64>,
        #[arg(long)]
        nmu: Option<u64>,
        #[arg(long)]
        bmu: Option<u64>,
        /// Partition the training state across data-parallel ranks.
        #[arg(long)]
        partition: Option<bool>,
        #[arg(long, default_value_t = false)]
        offload_state: bool,
        #[arg(long, default_value_t = false)]
        offload_checkpoints: bool,
    },
    /// Fastest configuration, or smallest cluster under a deadline.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Strategies to optimize (repeatable).
        #[arg(long = "strategy", value_parser = parse_method_arg)]
        strategies: Vec<Method>,
        /// Find the smallest cluster finishing within this many days.
        #[arg(long)]
        deadline_days: Option<f64>,
        /// Maximum tolerated non-overlapped overhead per traffic type.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        max_gpus: Option<u64>,
        #[arg(long)]
        max_nb: Option<u64>,
        #[arg(long)]
        max_nl: Option<u64>,
        #[arg(long)]
        max_na: Option<u64>,
        #[arg(long)]
        min_nl: Option<u64>,
        #[arg(long, default_value_t = false)]
        no_offload: bool,
        /// Exit with status 2 when no feasible plan exists.
        #[arg(long, default_value_t = false)]
        strict: bool,
    },
    /// Fastest plans across a range of X-family scales.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Range of X indices, e.g. 8..512 (inclusive, even values).
        #[arg(long = "x-range", visible_alias = "xs")]
        x_range: Option<String>,
        #[arg(long, default_value_t = 4)]
        x_step: u64,
        #[arg(long = "strategy", value_parser = parse_method_arg)]
        strategies: Vec<Method>,
    },
    /// Replay training schedules with the event simulator.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        nb: u64,
        #[arg(long, default_value_t = 1)]
        nl: u64,
        #[arg(long, default_value_t = 1)]
        na: u64,
        #[arg(long)]
        nmu: Option<u64>,
        #[arg(long, default_value_t = 1)]
        bmu: u64,
        /// Schedule to replay (std-ga, layered-ga, std-pipe, modular-pipe)
        /// or `all`.
        #[arg(long, default_value = "all")]
        schedule: String,
        #[arg(long, value_parser = parse_method_arg)]
        method: Option<Method>,
        /// Partition the training state (adds restore/reduce traffic).
        #[arg(long, default_value_t = false)]
        partition: bool,
        /// Use the profile's link bandwidths; by default transfers take no
        /// time, isolating the schedule's bubble structure.
        #[arg(long, default_value_t = false)]
        network: bool,
        /// Write the task trace as CSV to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Regenerate a published reference table next to its published values.
    Reproduce {
        #[command(flatten)]
        common: Common,
        /// One of: models, hardware, speed, memory, clusters.
        table: String,
    },
}

fn parse_method_arg(s: &str) -> Result<Method, String> {
    scenario::parse_method(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are successful exits; anything else is
            // invalid input.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

struct Resolved {
    shape: Option<ModelShape>,
    profile: HardwareProfile<f64>,
    strategies: Vec<Method>,
    constraints: OptimizerConstraints<f64>,
    deadline_days: Option<f64>,
}

fn resolve(common: &Common) -> Result<Resolved> {
    let mut base = match &common.config {
        Some(path) => scenario::load(path)?,
        None => scenario::Scenario::default(),
    };
    if let Some(x) = common.x {
        base.shape = Some(x_model(x)?);
    }
    if let Some(name) = &common.profile {
        base.profile = HardwareProfile::named(name)?;
    }
    Ok(Resolved {
        shape: base.shape,
        profile: base.profile,
        strategies: base.strategies,
        constraints: base.constraints,
        deadline_days: base.deadline_days,
    })
}

fn require_shape(resolved: &Resolved) -> Result<ModelShape> {
    resolved
        .shape
        .ok_or_else(|| anyhow!("no model given; pass --x or a [model] block in --config"))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analyze {
            common,
            plan,
            method,
            nb,
            nl,
            na,
            nmu,
            bmu,
            partition,
            offload_state,
            offload_checkpoints,
        } => {
            let resolved = resolve(&common)?;
            let shape = require_shape(&resolved)?;
            let eval = if let Some(name) = &plan {
                let row = tables::named_plan(name).ok_or_else(|| {
                    anyhow!(
                        "unknown plan `{name}`; known: {}",
                        tables::named_plan_keys().join(", ")
                    )
                })?;
                let mut constraints = resolved.constraints;
                if row.data == 1 {
                    constraints.max_data = Some(1);
                }
                if row.pipe == 1 {
                    constraints.max_pipe = Some(1);
                } else {
                    constraints.min_pipe = Some(2);
                }
                if row.tensor == 1 {
                    constraints.max_tensor = Some(1);
                }
                fastest_plan(
                    &shape,
                    &resolved.profile,
                    Strategy::from_method(row.method),
                    &constraints,
                )
                .ok_or_else(|| anyhow!("no feasible configuration for plan `{name}`"))?
            } else {
                let mut strategy = Strategy::from_method(method.unwrap_or(Method::Improved));
                if let Some(partitioned) = partition {
                    strategy = strategy.with_partition(partitioned);
                }
                strategy = strategy.with_offload(offload_state, offload_checkpoints);
                let plan = ParallelPlan::new(
                    strategy,
                    nb.unwrap_or(1),
                    nl.unwrap_or(1),
                    na.unwrap_or(1),
                    nmu.or(nl).unwrap_or(1),
                    bmu.unwrap_or(1),
                );
                evaluate(&shape, &plan, &resolved.profile, &resolved.constraints)?
            };
            print_analysis(&shape, &eval, common.format);
            Ok(ExitCode::SUCCESS)
        }

        Command::Optimize {
            common,
            strategies,
            deadline_days,
            epsilon,
            steps,
            max_gpus,
            max_nb,
            max_nl,
            max_na,
            min_nl,
            no_offload,
            strict,
        } => {
            let resolved = resolve(&common)?;
            let shape = require_shape(&resolved)?;
            let mut constraints = resolved.constraints;
            if let Some(eps) = epsilon {
                if !(eps > 0.0 && eps <= 1.0) {
                    bail!("epsilon must be in (0, 1], got {eps}");
                }
                constraints.max_overhead = eps;
            }
            if let Some(steps) = steps {
                constraints.steps = steps;
            }
            constraints.max_gpus = max_gpus.or(constraints.max_gpus);
            constraints.max_data = max_nb.or(constraints.max_data);
            constraints.max_pipe = max_nl.or(constraints.max_pipe);
            constraints.max_tensor = max_na.or(constraints.max_tensor);
            constraints.min_pipe = min_nl.or(constraints.min_pipe);
            if no_offload {
                constraints.allow_offload = false;
            }
            let strategies = if strategies.is_empty() {
                resolved.strategies.clone()
            } else {
                strategies
            };
            let deadline = deadline_days.or(resolved.deadline_days);

            let mut table = plan_table_header();
            let mut missing = Vec::new();
            for method in &strategies {
                let strategy = Strategy::from_method(*method);
                let result = match deadline {
                    Some(days) => min_cluster_for_deadline(
                        &shape,
                        &resolved.profile,
                        strategy,
                        days * SECONDS_PER_DAY,
                        &constraints,
                    ),
                    None => fastest_plan(&shape, &resolved.profile, strategy, &constraints),
                };
                match result {
                    Some(eval) => plan_table_row(&mut table, &eval),
                    None => missing.push(method.label()),
                }
            }
            print!("{}", table.render(common.format));
            for label in &missing {
                println!("# {label}: no feasible configuration");
            }
            if strict && !missing.is_empty() {
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Sweep {
            common,
            x_range,
            x_step,
            strategies,
        } => {
            let resolved = resolve(&common)?;
            let strategies = if strategies.is_empty() {
                resolved.strategies.clone()
            } else {
                strategies
            };
            let xs = match (&x_range, resolved.shape) {
                (Some(range), _) => parse_x_range(range, x_step)?,
                (None, Some(shape)) => {
                    // Single-point sweep at the scenario's model scale.
                    let x = shape.layers;
                    vec![x]
                }
                (None, None) => bail!("no sweep range; pass --x-range A..B or --x"),
            };
            let report = scaling_sweep(&xs, &resolved.profile, &strategies, &resolved.constraints)?;

            let mut table = Table::new(vec![
                "x",
                "params",
                "strategy",
                "gpus",
                "efficiency",
                "time_days",
                "mem_offloadable_gib",
                "mem_nonoffloadable_gib",
                "nu_s",
                "nu_c",
                "mem_to_compute_gib_per_tflops",
            ]);
            for row in &report.rows {
                for outcome in row.outcomes.iter().flatten() {
                    table.row(vec![
                        row.x.to_string(),
                        format!("{:.4e}", row.params),
                        outcome.strategy.label().to_string(),
                        outcome.gpus.to_string(),
                        format!("{:.4}", outcome.efficiency),
                        format!("{:.4}", outcome.time_days),
                        format!("{:.4}", outcome.offloadable_gib),
                        format!("{:.4}", outcome.non_offloadable_gib),
                        format!("{:.4e}", outcome.state_offload_intensity),
                        format!("{:.4e}", outcome.checkpoint_offload_intensity),
                        format!("{:.6}", outcome.memory_to_compute),
                    ]);
                }
            }
            print!("{}", table.render(common.format));
            for (idx, (method, limits)) in report.strategies.iter().zip(&report.limits).enumerate()
            {
                // A limit equal to the last swept size means the range never
                // crossed the threshold; report it as a lower bound.
                let fmt_limit = |value: Option<f64>, threshold_days: f64| match value {
                    None => "beyond range".to_string(),
                    Some(p) => {
                        let saturated = report
                            .rows
                            .last()
                            .and_then(|row| row.outcomes[idx].as_ref())
                            .is_some_and(|o| {
                                o.time_days <= threshold_days && row_params(&report, p)
                            });
                        if saturated {
                            format!(">= {} (range exhausted)", format_count(p))
                        } else {
                            format_count(p)
                        }
                    }
                };
                println!(
                    "# {} limits: one month {} params, one year {} params",
                    method.label(),
                    fmt_limit(
                        limits.one_month_params,
                        parascope_core::optimizer::DAYS_PER_MONTH
                    ),
                    fmt_limit(
                        limits.one_year_params,
                        parascope_core::optimizer::DAYS_PER_YEAR
                    ),
                );
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Simulate {
            common,
            nb,
            nl,
            na,
            nmu,
            bmu,
            schedule,
            method,
            partition,
            network,
            trace,
        } => {
            let resolved = resolve(&common)?;
            let shape = require_shape(&resolved)?;
            let kinds: Vec<ScheduleKind> = if schedule == "all" {
                ScheduleKind::ALL.to_vec()
            } else {
                vec![schedule.parse::<ScheduleKind>()?]
            };
            let nmu = nmu.unwrap_or(nl.max(1));

            let mut table = Table::new(vec![
                "schedule",
                "makespan_s",
                "idle_fraction",
                "analytical_s",
                "deviation",
                "peak_data_net",
                "peak_pipe_net",
                "param_buffers",
                "grad_buffers",
            ]);
            let mut trace_table = Table::new(vec![
                "schedule",
                "device",
                "stream",
                "kind",
                "layer",
                "micro_batch",
                "start_s",
                "end_s",
            ]);
            for kind in kinds {
                let default_method = match kind {
                    ScheduleKind::LayeredGa | ScheduleKind::ModularPipe => Method::Improved,
                    _ => Method::Baseline,
                };
                let mut strategy = Strategy::from_method(method.unwrap_or(default_method));
                strategy = strategy.with_partition(partition);
                if !partition && method.is_none() {
                    strategy.state_partitioned = false;
                }
                // GA schedules run on a single stage.
                let pipe = match kind {
                    ScheduleKind::StdGa | ScheduleKind::LayeredGa => 1,
                    _ => nl,
                };
                let plan = ParallelPlan::new(strategy, nb, pipe, na, nmu.max(pipe), bmu);
                let graph = build_schedule::<f64>(&shape, &plan, kind)?;
                let rates = if network {
                    SimRates::from_profile(&resolved.profile, &plan)
                } else {
                    SimRates::infinite_network(resolved.profile.compute)
                };
                let timeline = simulate(&graph, &rates)?;
                let report = compare_to_closed_form(&shape, &plan, kind, &rates)?;
                let buffers = verify_buffering(&timeline);
                let idle = timeline.idle_fraction.iter().copied().fold(0.0, f64::max);
                table.row(vec![
                    kind.label().to_string(),
                    format!("{:.6e}", timeline.makespan),
                    format!("{idle:.4}"),
                    format!("{:.6e}", report.analytical_time),
                    format!("{:.4}", report.deviation),
                    format!("{:.3e}", timeline.peak_bandwidth(Stream::DataNet)),
                    format!("{:.3e}", timeline.peak_bandwidth(Stream::PipeNet)),
                    buffers.parameter_high_water.to_string(),
                    buffers.gradient_high_water.to_string(),
                ]);
                for task in timeline.trace() {
                    trace_table.row(vec![
                        kind.label().to_string(),
                        task.device.to_string(),
                        format!("{:?}", task.stream),
                        format!("{:?}", task.kind),
                        task.layer.to_string(),
                        task.micro_batch.to_string(),
                        format!("{:.9e}", task.start),
                        format!("{:.9e}", task.end),
                    ]);
                }
            }
            print!("{}", table.render(common.format));
            if let Some(path) = trace {
                std::fs::write(&path, trace_table.render(Format::Csv))
                    .with_context(|| format!("writing trace to {}", path.display()))?;
                println!("# trace written to {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Reproduce { common, table } => {
            let resolved = resolve(&common)?;
            let rendered = match table.as_str() {
                "models" => reproduce_models(common.format),
                "hardware" => reproduce_hardware(&resolved.profile, common.format),
                "speed" => reproduce_speed(&resolved.profile, common.format)?,
                "memory" => reproduce_memory(common.format)?,
                "clusters" => reproduce_clusters(&resolved.profile, common.format)?,
                other => bail!(
                    "unknown table `{other}`; expected models, hardware, speed, memory or clusters"
                ),
            };
            print!("{rendered}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Whether `params` is the last swept size (the limit hit the range edge).
fn row_params(report: &parascope_core::SweepReport, params: f64) -> bool {
    report
        .rows
        .last()
        .is_some_and(|row| (row.params - params).abs() <= 1e-9 * row.params)
}

fn parse_x_range(range: &str, step: u64) -> Result<Vec<u64>> {
    let (lo, hi) = range
        .split_once("..")
        .ok_or_else(|| anyhow!("expected a range like 8..512, got `{range}`"))?;
    let lo: u64 = lo.trim().parse().context("range start")?;
    let hi: u64 = hi
        .trim_start_matches('=')
        .trim()
        .parse()
        .context("range end")?;
    if lo > hi || lo < 2 {
        bail!("invalid range {lo}..{hi}");
    }
    let step = step.max(2) & !1; // even steps keep x even
    let lo = lo + (lo & 1); // round up to even
    let mut xs: Vec<u64> = (lo..=hi).step_by(step as usize).collect();
    if xs.last() != Some(&hi) && hi.is_multiple_of(2) {
        xs.push(hi);
    }
    Ok(xs)
}

fn plan_table_header() -> Table {
    Table::new(vec![
        "Parallelism",
        "Method",
        "Offload",
        "b",
        "b_mu",
        "n_mu",
        "n_gpu",
        "n_b",
        "n_l",
        "n_a",
        "Efficiency",
        "Time",
    ])
}

fn parallelism_label(plan: &ParallelPlan) -> String {
    let mut dims = Vec::new();
    if plan.data > 1 {
        dims.push("Data");
    }
    if plan.pipe > 1 {
        dims.push("pipe");
    }
    if plan.tensor > 1 {
        dims.push("tensor");
    }
    match dims.len() {
        0 => "None".to_string(),
        3 => "3d".to_string(),
        _ => dims.join(" + "),
    }
}

fn plan_table_row(table: &mut Table, eval: &PlanEvaluation<f64>) {
    let plan = &eval.plan;
    table.row(vec![
        parallelism_label(plan),
        plan.strategy.method.label().to_string(),
        if plan.strategy.offloads() {
            "yes"
        } else {
            "no"
        }
        .to_string(),
        plan.batch().to_string(),
        plan.micro_batch_size.to_string(),
        plan.micro_batches.to_string(),
        plan.gpus().to_string(),
        plan.data.to_string(),
        plan.pipe.to_string(),
        plan.tensor.to_string(),
        format!("{:.2}", eval.efficiency),
        format_duration(eval.training_time),
    ]);
}

fn print_analysis(shape: &ModelShape, eval: &PlanEvaluation<f64>, format: Format) {
    let mut table = plan_table_header();
    plan_table_row(&mut table, eval);
    print!("{}", table.render(format));

    let mem = &eval.memory;
    let mut memory = Table::new(vec![
        "state_gib",
        "checkpoint_gib",
        "buffers_gib",
        "activations_gib",
        "offloadable_gib",
        "non_offloadable_gib",
    ]);
    memory.row(vec![
        format_gib(mem.state / GIB),
        format_gib(mem.checkpoints / GIB),
        format_gib(mem.buffers / GIB),
        format_gib(mem.layer_activations / GIB),
        format_gib(mem.offloadable / GIB),
        format_gib(mem.non_offloadable / GIB),
    ]);
    print!("{}", memory.render(format));

    let fmt_nu = |v: Option<f64>| v.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into());
    let nu = &eval.intensities;
    let mut intensities = Table::new(vec!["nu_b", "nu_l", "nu_a", "nu_s", "nu_c", "bubble"]);
    intensities.row(vec![
        fmt_nu(nu.data),
        fmt_nu(nu.pipe),
        fmt_nu(nu.tensor),
        fmt_nu(nu.state_offload),
        fmt_nu(nu.checkpoint_offload),
        format!("{:.4}", eval.bubble),
    ]);
    print!("{}", intensities.render(format));

    let p = shape.params() as f64;
    println!(
        "# {} parameters, critical batch {:.0}, feasible: {}{}",
        format_count(p),
        shape.critical_batch::<f64>().floor(),
        eval.feasible,
        if eval.violations.is_empty() {
            String::new()
        } else {
            format!(", violations: {:?}", eval.violations)
        }
    );
}

fn deviation_cell(computed: f64, published: f64) -> String {
    format!("{:+.1}%", (computed / published - 1.0) * 100.0)
}

fn reproduce_models(format: Format) -> String {
    let mut table = Table::new(vec![
        "Model", "p", "p_ref", "p_dev", "b_c", "b_c_ref", "b_c_dev", "d_s", "d_a", "d_h", "d_m",
        "d_l",
    ]);
    for row in tables::models_table() {
        let s = row.shape;
        table.row(vec![
            row.name.to_string(),
            format_count(row.computed_params),
            format_count(row.published_params),
            deviation_cell(row.computed_params, row.published_params),
            format!("{:.0}", row.computed_critical_batch),
            format!("{:.0}", row.published_critical_batch),
            deviation_cell(row.computed_critical_batch, row.published_critical_batch),
            s.seq_len.to_string(),
            s.heads.to_string(),
            s.head_size.to_string(),
            s.hidden.to_string(),
            s.layers.to_string(),
        ]);
    }
    table.render(format)
}

fn reproduce_hardware(profile: &HardwareProfile<f64>, format: Format) -> String {
    let mut table = Table::new(vec![
        "Network",
        "bandwidth_gib_s",
        "threshold_flops_per_byte",
        "threshold_ref",
        "deviation",
    ]);
    for row in tables::hardware_table(profile) {
        table.row(vec![
            row.link.label().to_string(),
            format!("{:.2}", row.bandwidth_gib),
            format!("{:.4e}", row.computed_threshold),
            format!("{:.3e}", row.published_threshold),
            deviation_cell(row.computed_threshold, row.published_threshold),
        ]);
    }
    table.render(format)
}

fn reproduce_speed(profile: &HardwareProfile<f64>, format: Format) -> Result<String> {
    let mut table = Table::new(vec![
        "Parallelism",
        "Method",
        "Offload",
        "b",
        "b_mu",
        "n_mu",
        "n_gpu",
        "n_gpu_ref",
        "n_b",
        "n_l",
        "n_a",
        "Efficiency",
        "Eff_ref",
        "Time",
        "Time_ref",
    ]);
    for row in tables::speed_table(profile)? {
        let p = row.published;
        match row.computed {
            Some(eval) => {
                let plan = eval.plan;
                table.row(vec![
                    p.parallelism.to_string(),
                    p.method.label().to_string(),
                    if plan.strategy.offloads() {
                        "yes"
                    } else {
                        "no"
                    }
                    .to_string(),
                    plan.batch().to_string(),
                    plan.micro_batch_size.to_string(),
                    plan.micro_batches.to_string(),
                    plan.gpus().to_string(),
                    p.gpus.to_string(),
                    plan.data.to_string(),
                    plan.pipe.to_string(),
                    plan.tensor.to_string(),
                    format!("{:.2}", eval.efficiency),
                    format!("{:.2}", p.efficiency),
                    format_duration(eval.training_time),
                    format_duration(p.time_days * SECONDS_PER_DAY),
                ]);
            }
            None => {
                table.row(vec![
                    p.parallelism.to_string(),
                    p.method.label().to_string(),
                    "-".into(),
                    "infeasible".into(),
                    "-".into(),
                    "-".into(),
                    "-".into(),
                    p.gpus.to_string(),
                    "-".into(),
                    "-".into(),
                    "-".into(),
                    "-".into(),
                    format!("{:.2}", p.efficiency),
                    "-".into(),
                    format_duration(p.time_days * SECONDS_PER_DAY),
                ]);
            }
        }
    }
    Ok(table.render(format))
}

fn reproduce_memory(format: Format) -> Result<String> {
    let mut table = Table::new(vec![
        "Parallelism",
        "Method",
        "state",
        "state_ref",
        "checkpoint",
        "checkpoint_ref",
        "buffers",
        "buffers_ref",
        "activations",
        "activations_ref",
        "offloadable",
        "offloadable_ref",
        "non_offloadable",
        "non_offloadable_ref",
    ]);
    for row in tables::memory_table()? {
        let mut cells = vec![row.parallelism.to_string(), row.method.label().to_string()];
        for i in 0..6 {
            cells.push(format_gib(row.computed_gib[i]));
            cells.push(format_gib(row.published_gib[i]));
        }
        table.row(cells);
    }
    Ok(table.render(format))
}

fn reproduce_clusters(profile: &HardwareProfile<f64>, format: Format) -> Result<String> {
    let mut table = Table::new(vec![
        "Parallelism",
        "Method",
        "b",
        "b_ref",
        "n_a",
        "n_a_ref",
        "n_gpu",
        "n_gpu_ref",
        "Offloadable",
        "Non-offloadable",
        "Efficiency",
        "Eff_ref",
        "Time",
        "Time_ref",
    ]);
    for row in tables::clusters_table(profile)? {
        let p = row.published;
        match row.computed {
            Some(eval) => {
                table.row(vec![
                    p.parallelism.to_string(),
                    p.method.label().to_string(),
                    eval.plan.batch().to_string(),
                    p.batch.to_string(),
                    eval.plan.tensor.to_string(),
                    p.tensor.to_string(),
                    eval.gpus().to_string(),
                    p.gpus.to_string(),
                    format_gib(eval.memory.offloadable / GIB),
                    format_gib(eval.memory.non_offloadable / GIB),
                    format!("{:.2}", eval.efficiency),
                    format!("{:.2}", p.efficiency),
                    format_duration(eval.training_time),
                    format_duration(p.time_days * SECONDS_PER_DAY),
                ]);
            }
            None => {
                table.row(vec![
                    p.parallelism.to_string(),
                    p.method.label().to_string(),
                    "infeasible".into(),
                    p.batch.to_string(),
                    "-".into(),
                    p.tensor.to_string(),
                    "-".into(),
                    p.gpus.to_string(),
                    "-".into(),
                    "-".into(),
                    "-".into(),
                    format!("{:.2}", p.efficiency),
                    "-".into(),
                    format_duration(p.time_days * SECONDS_PER_DAY),
                ]);
            }
        }
    }
    Ok(table.render(format))
}
