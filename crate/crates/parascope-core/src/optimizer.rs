//! Feasibility, efficiency and training-time evaluation of parallel plans,
//! plus the configuration searches: fastest plan, minimum cluster under a
//! deadline, and scaling sweeps over the X family.

use serde::Serialize;

use crate::cost::{
    self, ActivationCoefficients, IntensityReport, MemoryBreakdown, Method, ParallelPlan, Strategy,
};
use crate::hardware::{HardwareProfile, LinkClass};
use crate::model::{x_model, ModelShape};
use crate::{Error, Result, Scalar};

/// Search and feasibility knobs.
#[derive(Debug, Clone, Copy)]
pub struct OptimizerConstraints<F> {
    /// Maximum tolerated non-overlapped overhead per traffic type.
    pub max_overhead: F,
    /// Training step count, defined at the critical batch size.
    pub steps: u64,
    pub max_gpus: Option<u64>,
    pub allow_offload: bool,
    /// Caps on the parallel degrees; `Some(1)` disables a dimension.
    pub max_data: Option<u64>,
    pub max_pipe: Option<u64>,
    pub max_tensor: Option<u64>,
    /// Floors on the parallel degrees; `Some(2)` forces a dimension on even
    /// when dropping it would be faster (scenario reproduction).
    pub min_pipe: Option<u64>,
    /// Pin the tensor degree exactly (scenario reproduction).
    pub fixed_tensor: Option<u64>,
    pub activation: ActivationCoefficients,
}

impl<F: Scalar> Default for OptimizerConstraints<F> {
    fn default() -> Self {
        OptimizerConstraints {
            max_overhead: F::from_f64(0.25).unwrap(),
            steps: 100_000,
            max_gpus: None,
            allow_offload: true,
            max_data: None,
            max_pipe: None,
            max_tensor: None,
            min_pipe: None,
            fixed_tensor: None,
            activation: ActivationCoefficients::default(),
        }
    }
}

impl<F: Scalar> OptimizerConstraints<F> {
    pub fn data_only(mut self) -> Self {
        self.max_pipe = Some(1);
        self.max_tensor = Some(1);
        self
    }
}

/// Why a plan is infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Violation {
    /// Batch exceeds the critical batch size.
    BatchAboveCritical,
    /// Resident memory exceeds device memory (GiB needed vs available).
    MemoryExceeded { needed_gib: f64, available_gib: f64 },
    /// A non-overlapped overhead exceeds the tolerance.
    OverheadExceeded { traffic: TrafficKind, overhead: f64 },
    /// Overlapped traffic is data-bound (network slower than compute).
    DataBoundOverlap { traffic: TrafficKind, slowdown: f64 },
    /// Tensor group does not fit the fast interconnect.
    NodeSizeExceeded,
    /// Device count exceeds the configured budget.
    GpuBudgetExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TrafficKind {
    DataParallel,
    Pipeline,
    TensorParallel,
    StateOffload,
    CheckpointOffload,
}

/// Full evaluation of one plan on one hardware profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanEvaluation<F> {
    pub plan: ParallelPlan,
    /// Fraction of peak compute the schedule sustains.
    pub efficiency: F,
    /// Wall-clock seconds for the full run. The step budget is defined at
    /// the critical batch size: runs at `b < b_c` need proportionally more
    /// steps, so the time depends on the cluster and efficiency only.
    pub training_time: F,
    pub memory: MemoryBreakdown<F>,
    pub intensities: IntensityReport<F>,
    pub bubble: F,
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

impl<F: Scalar> PlanEvaluation<F> {
    pub fn gpus(&self) -> u64 {
        self.plan.gpus()
    }
}

/// Pipeline fill/drain overhead as a fraction of the useful compute time.
///
/// Contiguous pipelines idle for `(n_l - 1) / n_mu`; the modular split cuts
/// that by `d_l / n_l`.
pub fn bubble_fraction<F: Scalar>(shape: &ModelShape, plan: &ParallelPlan) -> Result<F> {
    if plan.micro_batches < plan.pipe {
        return Err(Error::InvalidPlan(format!(
            "micro-batch count {} below pipeline degree {}",
            plan.micro_batches, plan.pipe
        )));
    }
    if plan.pipe <= 1 {
        return Ok(F::zero());
    }
    let fill = F::from_int(plan.pipe - 1);
    let nmu = F::from_int(plan.micro_batches);
    Ok(if plan.strategy.layered() {
        fill * F::from_int(plan.pipe) / (nmu * F::from_int(shape.layers))
    } else {
        fill / nmu
    })
}

/// Extra micro-batches needed to hide the pipeline transfers behind
/// computation, `ceil((nu_net / nu_l) * n_mu)`.
pub fn extra_microbatches_for_overlap<F: Scalar>(
    shape: &ModelShape,
    plan: &ParallelPlan,
    profile: &HardwareProfile<F>,
) -> u64 {
    let Some(nu_l) = cost::pipeline_intensity::<F>(shape, plan) else {
        return 0;
    };
    let threshold = profile.intensity_threshold(cost::pipeline_link(plan, profile));
    let extra = (threshold / nu_l * F::from_int(plan.micro_batches)).ceil();
    extra.to_f64().map(|v| v as u64).unwrap_or(u64::MAX)
}

/// Evaluate a structurally valid plan. Infeasibility is reported in the
/// result, not as an error.
pub fn evaluate<F: Scalar>(
    shape: &ModelShape,
    plan: &ParallelPlan,
    profile: &HardwareProfile<F>,
    constraints: &OptimizerConstraints<F>,
) -> Result<PlanEvaluation<F>> {
    let memory: MemoryBreakdown<F> =
        cost::memory_breakdown_with(shape, plan, &constraints.activation)?;
    let strategy = plan.strategy;
    let mut violations = Vec::new();
    let gib = F::from_f64(crate::hardware::GIB).unwrap();

    let critical: F = shape.critical_batch();
    let batch = F::from_int(plan.batch());
    if batch > critical {
        violations.push(Violation::BatchAboveCritical);
    }

    let resident = memory.resident(strategy.offload_state, strategy.offload_checkpoints);
    if resident > profile.memory {
        violations.push(Violation::MemoryExceeded {
            needed_gib: (resident / gib).to_f64().unwrap_or(f64::NAN),
            available_gib: (profile.memory / gib).to_f64().unwrap_or(f64::NAN),
        });
    }

    if !profile.fits_node(plan.tensor) {
        violations.push(Violation::NodeSizeExceeded);
    }
    if constraints.max_gpus.is_some_and(|cap| plan.gpus() > cap) {
        violations.push(Violation::GpuBudgetExceeded);
    }

    let bubble = bubble_fraction(shape, plan)?;
    let mut efficiency = F::one() / (F::one() + bubble);
    let epsilon = constraints.max_overhead;

    // Tensor-parallel all-reduces: never overlapped.
    if let Some(nu_a) = cost::tensor_intensity::<F>(shape, plan.tensor) {
        let threshold = profile.intensity_threshold(cost::tensor_link(plan, profile));
        let overhead = cost::overlap_overhead(nu_a, threshold, false);
        if overhead > epsilon {
            violations.push(Violation::OverheadExceeded {
                traffic: TrafficKind::TensorParallel,
                overhead: overhead.to_f64().unwrap_or(f64::NAN),
            });
        }
        efficiency = efficiency / (F::one() + overhead);
    }

    // Pipeline transfers: hidden behind computation when there are enough
    // spare micro-batches and the transfer is compute-bound, otherwise
    // charged as a non-overlapped overhead.
    if let Some(nu_l) = cost::pipeline_intensity::<F>(shape, plan) {
        let threshold = profile.intensity_threshold(cost::pipeline_link(plan, profile));
        let slack = plan.micro_batches - plan.pipe;
        let needed = extra_microbatches_for_overlap(shape, plan, profile);
        let hidden = nu_l > threshold && slack >= needed;
        if !hidden {
            let overhead = cost::overlap_overhead(nu_l, threshold, false);
            if overhead > epsilon {
                violations.push(Violation::OverheadExceeded {
                    traffic: TrafficKind::Pipeline,
                    overhead: overhead.to_f64().unwrap_or(f64::NAN),
                });
            }
            efficiency = efficiency / (F::one() + overhead);
        }
    }

    // Data-parallel reduction (and restores when partitioned).
    if let Some(traffic) = cost::data_parallel_intensity::<F>(shape, plan) {
        let threshold = profile.intensity_threshold(cost::data_parallel_link(plan, profile));
        if traffic.overlapped {
            if traffic.intensity < threshold {
                let slowdown = threshold / traffic.intensity;
                violations.push(Violation::DataBoundOverlap {
                    traffic: TrafficKind::DataParallel,
                    slowdown: slowdown.to_f64().unwrap_or(f64::NAN),
                });
                let region = dp_region_fraction::<F>(plan);
                let extra = region * (slowdown - F::one());
                efficiency = efficiency / (F::one() + extra);
            }
        } else {
            let overhead = cost::overlap_overhead(traffic.intensity, threshold, false);
            if overhead > epsilon {
                violations.push(Violation::OverheadExceeded {
                    traffic: TrafficKind::DataParallel,
                    overhead: overhead.to_f64().unwrap_or(f64::NAN),
                });
            }
            efficiency = efficiency / (F::one() + overhead);
        }
    }

    // Offload transfers ride the CPU link; they overlap computation but the
    // shared PCI-express lanes halve the budget while sustained inter-node
    // traffic is active.
    let (nu_state, nu_ckpt) = cost::offload_intensities::<F>(shape, plan);
    let base_threshold = profile.intensity_threshold(LinkClass::CpuGpu);
    let two = F::from_int(2);
    let (fwd_contended, bwd_contended) = offload_contention(plan);
    let fwd_threshold = if fwd_contended {
        base_threshold * two
    } else {
        base_threshold
    };
    let bwd_threshold = if bwd_contended {
        base_threshold * two
    } else {
        base_threshold
    };
    if let Some(nu_s) = nu_state {
        // Forward restores parameters; backward restores them again and
        // writes gradients out, at 1.5x the forward intensity.
        let bwd_intensity = nu_s * F::from_f64(1.5).unwrap();
        let quarter = F::from_f64(0.25).unwrap();
        let mut extra = F::zero();
        if nu_s < fwd_threshold {
            extra = extra + quarter * (fwd_threshold / nu_s - F::one());
        }
        if bwd_intensity < bwd_threshold {
            extra = extra + (F::one() - quarter) * (bwd_threshold / bwd_intensity - F::one());
        }
        if extra > F::zero() {
            violations.push(Violation::DataBoundOverlap {
                traffic: TrafficKind::StateOffload,
                slowdown: (F::one() + extra).to_f64().unwrap_or(f64::NAN),
            });
            efficiency = efficiency / (F::one() + extra);
        }
    }
    if let Some(nu_c) = nu_ckpt {
        let worst = if fwd_threshold > bwd_threshold {
            fwd_threshold
        } else {
            bwd_threshold
        };
        if nu_c < worst {
            let slowdown = worst / nu_c;
            violations.push(Violation::DataBoundOverlap {
                traffic: TrafficKind::CheckpointOffload,
                slowdown: slowdown.to_f64().unwrap_or(f64::NAN),
            });
            efficiency = efficiency / slowdown;
        }
    }

    // Step budget is defined at b_c; training below it needs inversely more
    // steps, training above it wastes samples.
    let effective_batch = if batch > critical { batch } else { critical };
    let flops = F::from_int(constraints.steps)
        * F::from_int(8)
        * effective_batch
        * F::from_int(shape.seq_len)
        * F::from_count(shape.params());
    let training_time = flops / (F::from_int(plan.gpus()) * profile.compute * efficiency);

    let feasible = violations.is_empty();
    Ok(PlanEvaluation {
        plan: *plan,
        efficiency,
        training_time,
        memory,
        intensities: IntensityReport::for_plan(shape, plan),
        bubble,
        feasible,
        violations,
    })
}

/// Fraction of the step covered by the data-parallel overlap window.
fn dp_region_fraction<F: Scalar>(plan: &ParallelPlan) -> F {
    let strategy = plan.strategy;
    let three_quarters = F::from_f64(0.75).unwrap();
    if strategy.layered() {
        if strategy.state_partitioned {
            F::one()
        } else {
            three_quarters
        }
    } else if strategy.state_partitioned {
        F::one()
    } else {
        // Reduction hides behind the last micro-batch's backward pass only.
        three_quarters / F::from_int(plan.micro_batches)
    }
}

/// Whether offload transfers contend with sustained inter-node traffic on
/// the shared PCI-express lanes, per pass.
///
/// Layered and partitioned schemes keep the data-parallel link busy through
/// both passes. The plain baseline only reduces gradients during the
/// backward pass, and with a pipeline each device reduces once at the end of
/// its own layers, which is not sustained.
fn offload_contention(plan: &ParallelPlan) -> (bool, bool) {
    if plan.data < 2 {
        return (false, false);
    }
    let strategy = plan.strategy;
    if strategy.layered() || strategy.state_partitioned {
        (true, true)
    } else {
        (false, plan.pipe == 1)
    }
}

/// Deterministic preference order: faster, then fewer devices, then larger
/// batch, then lexicographic plan fields.
fn better<F: Scalar>(a: &PlanEvaluation<F>, b: &PlanEvaluation<F>) -> bool {
    let rel = F::from_f64(1e-12).unwrap();
    let (ta, tb) = (a.training_time, b.training_time);
    if (ta - tb).abs() > rel * tb.max(ta) {
        return ta < tb;
    }
    cheaper_tiebreak(a, b)
}

fn cheaper_tiebreak<F: Scalar>(a: &PlanEvaluation<F>, b: &PlanEvaluation<F>) -> bool {
    let ka = (
        a.gpus(),
        std::cmp::Reverse(a.plan.batch()),
        a.plan.tensor,
        a.plan.pipe,
        a.plan.micro_batches,
        a.plan.micro_batch_size,
    );
    let kb = (
        b.gpus(),
        std::cmp::Reverse(b.plan.batch()),
        b.plan.tensor,
        b.plan.pipe,
        b.plan.micro_batches,
        b.plan.micro_batch_size,
    );
    ka < kb
}

/// Smallest-cluster preference: fewer devices, then faster, then larger batch.
fn smaller<F: Scalar>(a: &PlanEvaluation<F>, b: &PlanEvaluation<F>) -> bool {
    if a.gpus() != b.gpus() {
        return a.gpus() < b.gpus();
    }
    let rel = F::from_f64(1e-12).unwrap();
    if (a.training_time - b.training_time).abs() > rel * a.training_time.max(b.training_time) {
        return a.training_time < b.training_time;
    }
    cheaper_tiebreak(a, b)
}

/// Fastest feasible plan for one strategy, or `None` when nothing satisfies
/// the constraints.
///
/// The search follows the published selection rules per strategy — baseline
/// maximizes the pipeline depth, partitioned maximizes data parallelism
/// without a pipeline, improved fixes the micro-batch size at one and
/// maximizes data then pipeline parallelism — each expanded into a small
/// candidate neighbourhood. Small shapes fall back to exhaustive search.
pub fn fastest_plan<F: Scalar>(
    shape: &ModelShape,
    profile: &HardwareProfile<F>,
    strategy: Strategy,
    constraints: &OptimizerConstraints<F>,
) -> Option<PlanEvaluation<F>> {
    let mut best: Option<PlanEvaluation<F>> = None;
    for plan in candidate_plans(shape, profile, strategy, constraints) {
        let Ok(eval) = evaluate(shape, &plan, profile, constraints) else {
            continue;
        };
        if !eval.feasible {
            continue;
        }
        if best.as_ref().is_none_or(|b| better(&eval, b)) {
            best = Some(eval);
        }
    }
    best
}

/// Feasible plan with the fewest devices whose training time meets the
/// deadline (seconds). Batches below the critical batch size are allowed.
///
/// For the layered strategy on large shapes the pipeline depth is kept from
/// the fastest configuration (or dropped entirely); only the data and
/// tensor degrees shrink. Free pipeline depths trade the established
/// schedule for marginally fewer devices at much smaller batches.
pub fn min_cluster_for_deadline<F: Scalar>(
    shape: &ModelShape,
    profile: &HardwareProfile<F>,
    strategy: Strategy,
    deadline: F,
    constraints: &OptimizerConstraints<F>,
) -> Option<PlanEvaluation<F>> {
    let slack = F::from_f64(1.0 + 1e-9).unwrap();
    let meets = |eval: &PlanEvaluation<F>| eval.feasible && eval.training_time <= deadline * slack;
    let mut best: Option<PlanEvaluation<F>> = None;
    let mut consider = |eval: PlanEvaluation<F>| {
        if meets(&eval) && best.as_ref().is_none_or(|b| smaller(&eval, b)) {
            best = Some(eval);
        }
    };

    let pin_pipe =
        strategy.layered() && !exhaustive_search::<F>(shape) && constraints.max_pipe.is_none();
    let candidates = if pin_pipe {
        let fast_pipe = fastest_plan(shape, profile, strategy, constraints)
            .map(|e| e.plan.pipe)
            .unwrap_or(1);
        let mut plans = Vec::new();
        if constraints.min_pipe.is_none() {
            let mut no_pipe = *constraints;
            no_pipe.max_pipe = Some(1);
            plans = candidate_plans(shape, profile, strategy, &no_pipe);
        }
        if fast_pipe > 1 {
            let mut pinned = *constraints;
            pinned.min_pipe = Some(fast_pipe);
            pinned.max_pipe = Some(fast_pipe);
            plans.extend(candidate_plans(shape, profile, strategy, &pinned));
        }
        plans
    } else {
        candidate_plans(shape, profile, strategy, constraints)
    };

    for plan in candidates {
        let Ok(eval) = evaluate(shape, &plan, profile, constraints) else {
            continue;
        };
        if !meets(&eval) {
            continue;
        }
        consider(eval);
        // Shrink the data-parallel degree to the smallest value still
        // meeting the deadline; time scales as 1/n_b at fixed efficiency.
        let (mut lo, mut hi) = (1u64, plan.data);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            let probe = resolve_offload(
                shape,
                profile,
                ParallelPlan { data: mid, ..plan },
                constraints.allow_offload,
            );
            match evaluate(shape, &probe, profile, constraints) {
                Ok(eval) if meets(&eval) => {
                    hi = mid;
                    consider(eval);
                }
                _ => lo = mid + 1,
            }
        }
    }
    best
}

/// Decide which memory categories must leave the GPU for the plan to fit,
/// preferring to keep everything resident.
pub fn resolve_offload<F: Scalar>(
    shape: &ModelShape,
    profile: &HardwareProfile<F>,
    mut plan: ParallelPlan,
    allow_offload: bool,
) -> ParallelPlan {
    plan.strategy.offload_state = false;
    plan.strategy.offload_checkpoints = false;
    let Ok(memory) = cost::memory_breakdown::<F>(shape, &plan) else {
        return plan;
    };
    if memory.total() <= profile.memory || !allow_offload {
        return plan;
    }
    if memory.resident(true, false) <= profile.memory {
        plan.strategy.offload_state = true;
    } else {
        plan.strategy.offload_state = true;
        plan.strategy.offload_checkpoints = true;
    }
    plan
}

/// Small shapes are searched exhaustively; the rule-guided candidate set is
/// for scales where full enumeration would be wasteful.
fn exhaustive_search<F: Scalar>(shape: &ModelShape) -> bool {
    let critical: F = shape.critical_batch();
    let batch_max = critical.floor().to_f64().map(|v| v as u64).unwrap_or(1);
    batch_max <= 700 && shape.layers <= 16
}

fn divisors(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            out.push(n / d);
        }
        d += 1;
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn ceil_div_f<F: Scalar>(num: F, den: F) -> u64 {
    let v = (num / den).ceil().to_f64().unwrap_or(f64::MAX);
    if v < 1.0 {
        1
    } else {
        v as u64
    }
}

/// Tensor-parallel degrees worth trying: powers of two within the node (and
/// the overhead-capped maximum when the node size limit is lifted).
fn tensor_candidates<F: Scalar>(
    shape: &ModelShape,
    profile: &HardwareProfile<F>,
    constraints: &OptimizerConstraints<F>,
) -> Vec<u64> {
    if let Some(fixed) = constraints.fixed_tensor {
        return vec![fixed];
    }
    let cap_constraint = constraints.max_tensor.unwrap_or(u64::MAX);
    // Largest group with tensor overhead within epsilon over NVLink.
    let threshold = profile.intensity_threshold(LinkClass::NvLink);
    let dm = F::from_int(shape.hidden);
    let eps_cap_f = F::one()
        + constraints.max_overhead * F::from_int(4 + 2 * shape.ff_mult) * dm
            / (F::from_int(3) * threshold);
    let eps_cap = eps_cap_f.to_f64().map_or(1, |v| v.max(1.0) as u64);

    let hard_cap = match profile.max_node_size {
        Some(node) => node.min(cap_constraint),
        None => eps_cap.max(1).min(cap_constraint),
    };
    let mut out = vec![1u64];
    let mut v = 2u64;
    while v <= hard_cap {
        out.push(v);
        v = v.saturating_mul(2);
    }
    if profile.max_node_size.is_none() {
        for extra in [eps_cap.saturating_sub(1), eps_cap] {
            if (2..=cap_constraint).contains(&extra) {
                out.push(extra);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Generate the candidate plans for one strategy.
fn candidate_plans<F: Scalar>(
    shape: &ModelShape,
    profile: &HardwareProfile<F>,
    strategy: Strategy,
    constraints: &OptimizerConstraints<F>,
) -> Vec<ParallelPlan> {
    let critical: F = shape.critical_batch();
    let batch_max = critical
        .floor()
        .to_f64()
        .map(|v| v as u64)
        .unwrap_or(1)
        .max(1);
    let tensor_set = tensor_candidates(shape, profile, constraints);
    let pipe_cap = constraints.max_pipe.unwrap_or(u64::MAX).min(shape.layers);
    let pipe_floor = constraints.min_pipe.unwrap_or(1).max(1);
    let exhaustive = exhaustive_search::<F>(shape);

    let mut plans = Vec::new();
    let mut push = |data: u64, pipe: u64, tensor: u64, micro_batches: u64, micro_batch: u64| {
        if data == 0 || micro_batches < pipe || micro_batches == 0 || micro_batch == 0 {
            return;
        }
        let plan = resolve_offload(
            shape,
            profile,
            ParallelPlan::new(strategy, data, pipe, tensor, micro_batches, micro_batch),
            constraints.allow_offload,
        );
        plans.push(plan);
    };

    for &tensor in &tensor_set {
        // Largest data degree for a given micro-batch split, plus the
        // node-boundary and single-instance corners (the link class flips
        // when the whole job fits in one node).
        let data_options = |pipe: u64, micro: u64, size: u64| -> Vec<u64> {
            let per_instance = pipe * tensor;
            let mut cap = batch_max / (micro * size).max(1);
            if let Some(max_data) = constraints.max_data {
                cap = cap.min(max_data);
            }
            if let Some(max_gpus) = constraints.max_gpus {
                cap = cap.min(max_gpus / per_instance.max(1));
            }
            let mut opts = vec![cap, 1];
            let in_node = profile.gpus_per_node / per_instance.max(1);
            if in_node >= 1 {
                opts.push(in_node.min(cap));
            }
            opts.retain(|&d| d >= 1);
            opts.sort_unstable();
            opts.dedup();
            opts
        };

        if exhaustive {
            for pipe in pipe_floor..=pipe_cap.max(1) {
                for size in 1..=batch_max {
                    for micro in pipe.max(1)..=(batch_max / size).max(1) {
                        if micro * size > batch_max {
                            break;
                        }
                        for data in data_options(pipe, micro, size) {
                            push(data, pipe, tensor, micro, size);
                        }
                    }
                }
            }
            continue;
        }

        let inter_threshold: F = profile.inter_node_threshold();
        let seq = F::from_int(shape.seq_len);

        // Pipe-depth candidates per strategy rule.
        let mut pipe_set: Vec<u64> = match strategy.method {
            Method::Baseline => vec![1, pipe_cap.max(1)],
            Method::Partitioned => vec![1],
            Method::Improved => {
                let mut set: Vec<u64> = (1..=pipe_cap.clamp(1, 96)).collect();
                set.extend(
                    divisors(shape.layers)
                        .into_iter()
                        .filter(|&d| d <= pipe_cap),
                );
                set.push(pipe_cap.max(1));
                set
            }
        };
        pipe_set.retain(|&p| p >= pipe_floor && p <= pipe_cap.max(1));
        pipe_set.sort_unstable();
        pipe_set.dedup();

        // The layered schedule runs efficiently at micro-batches of one;
        // larger sizes only shrink the reachable device count.
        let size_cap = if strategy.method == Method::Improved {
            1
        } else {
            64
        };
        for pipe in pipe_set {
            for size in 1..=size_cap.min(batch_max) {
                // Minimum micro-batch count keeping the data-parallel
                // traffic compute-bound (assuming an inter-node ring).
                let dp_min = if strategy.state_partitioned {
                    ceil_div_f(F::from_int(2) * inter_threshold, seq * F::from_int(size))
                } else {
                    ceil_div_f(
                        F::from_int(4) * inter_threshold,
                        F::from_int(3) * seq * F::from_int(size),
                    )
                };
                let mut micro_set = vec![pipe, pipe + 1, dp_min.max(pipe), dp_min.max(pipe) + 1];
                // Enough spare micro-batches to hide pipeline transfers.
                if pipe >= 2 {
                    let probe =
                        ParallelPlan::new(strategy, 1, pipe, tensor, dp_min.max(pipe), size);
                    if let Some(nu_l) = cost::pipeline_intensity::<F>(shape, &probe) {
                        let thr = profile.intensity_threshold(cost::pipeline_link(&probe, profile));
                        if nu_l > thr {
                            let ratio = (thr / nu_l).to_f64().unwrap_or(1.0);
                            if ratio < 1.0 {
                                let m = (pipe as f64 / (1.0 - ratio)).ceil() as u64;
                                micro_set.push(m.max(pipe));
                            }
                        }
                    }
                }
                // Re-expand the micro-batch count to saturate the batch at
                // each candidate data degree.
                for micro in micro_set.clone() {
                    if micro == 0 {
                        continue;
                    }
                    for data in data_options(pipe, micro, size) {
                        let expanded = (batch_max / (data * size).max(1)).max(micro);
                        micro_set.push(expanded);
                    }
                }
                // Batch-saturating counts for small data degrees.
                for data in 1..=16u64 {
                    let expanded = batch_max / (data * size).max(1);
                    if expanded >= pipe {
                        micro_set.push(expanded);
                    }
                }
                micro_set.sort_unstable();
                micro_set.dedup();
                for micro in micro_set {
                    if micro < pipe || micro * size > batch_max {
                        continue;
                    }
                    for data in data_options(pipe, micro, size) {
                        push(data, pipe, tensor, micro, size);
                    }
                }
            }
        }
    }
    plans
}

/// One strategy's outcome at one scale in a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct StrategyOutcome<F> {
    pub strategy: Method,
    pub gpus: u64,
    pub efficiency: F,
    pub time_days: F,
    pub offloadable_gib: F,
    pub non_offloadable_gib: F,
    /// State-offload intensity the plan would see with offload forced on.
    pub state_offload_intensity: F,
    /// Checkpoint-offload intensity with offload forced on.
    pub checkpoint_offload_intensity: F,
    /// Per-GPU memory over per-GPU compute, GiB per Tflop/s.
    pub memory_to_compute: F,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow<F> {
    pub x: u64,
    pub params: f64,
    pub outcomes: Vec<Option<StrategyOutcome<F>>>,
}

/// Largest parameter counts trainable within a month and a year, found by
/// log-interpolating the time/size crossing on the sweep grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScaleLimits {
    pub one_month_params: Option<f64>,
    pub one_year_params: Option<f64>,
    /// Per-GPU memory of the fastest plan at the one-month limit, GiB.
    pub one_month_memory_gib: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport<F> {
    pub strategies: Vec<Method>,
    pub rows: Vec<SweepRow<F>>,
    /// Limits per strategy, same order as `strategies`.
    pub limits: Vec<ScaleLimits>,
}

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const DAYS_PER_MONTH: f64 = 30.0;
pub const DAYS_PER_YEAR: f64 = 365.25;

/// Fastest plan per strategy across a range of X-family scales.
pub fn scaling_sweep<F: Scalar>(
    xs: &[u64],
    profile: &HardwareProfile<F>,
    strategies: &[Method],
    constraints: &OptimizerConstraints<F>,
) -> Result<SweepReport<F>> {
    if xs.is_empty() {
        return Err(Error::InvalidConfig("empty sweep range".into()));
    }
    let gib = F::from_f64(crate::hardware::GIB).unwrap();
    let day = F::from_f64(SECONDS_PER_DAY).unwrap();
    let mut rows = Vec::new();
    for &x in xs {
        let shape = x_model(x)?;
        let mut outcomes = Vec::new();
        for &method in strategies {
            let strategy = Strategy::from_method(method);
            let outcome = fastest_plan(&shape, profile, strategy, constraints).map(|eval| {
                let mut offloaded = eval.plan;
                offloaded.strategy.offload_state = true;
                offloaded.strategy.offload_checkpoints = true;
                let (nu_s, nu_c) = cost::offload_intensities::<F>(&shape, &offloaded);
                StrategyOutcome {
                    strategy: method,
                    gpus: eval.gpus(),
                    efficiency: eval.efficiency,
                    time_days: eval.training_time / day,
                    offloadable_gib: eval.memory.offloadable / gib,
                    non_offloadable_gib: eval.memory.non_offloadable / gib,
                    state_offload_intensity: nu_s.unwrap_or_else(F::zero),
                    checkpoint_offload_intensity: nu_c.unwrap_or_else(F::zero),
                    memory_to_compute: one_month_memory_ratio(&shape, profile, &eval),
                }
            });
            outcomes.push(outcome);
        }
        rows.push(SweepRow {
            x,
            params: x_model(x)?.params() as f64,
            outcomes,
        });
    }

    let mut limits = Vec::new();
    for (idx, _) in strategies.iter().enumerate() {
        let series: Vec<(f64, f64, f64)> = rows
            .iter()
            .filter_map(|row| {
                row.outcomes[idx].as_ref().map(|o| {
                    (
                        row.params,
                        o.time_days.to_f64().unwrap_or(f64::NAN),
                        ((o.offloadable_gib + o.non_offloadable_gib).to_f64()).unwrap_or(f64::NAN),
                    )
                })
            })
            .collect();
        let month = limit_crossing(&series, DAYS_PER_MONTH);
        limits.push(ScaleLimits {
            one_month_params: month.map(|(p, _)| p),
            one_year_params: limit_crossing(&series, DAYS_PER_YEAR).map(|(p, _)| p),
            one_month_memory_gib: month.map(|(_, m)| m),
        });
    }

    Ok(SweepReport {
        strategies: strategies.to_vec(),
        rows,
        limits,
    })
}

/// Memory needed per unit of compute (GiB per Tflop/s) if this model were
/// forced to train in one month by scaling only the tensor degree beyond
/// the plan's, keeping the data and pipeline split. The tensor overhead is
/// ignored (the premise is faster future devices or interconnects), so this
/// isolates how memory demand scales relative to compute demand.
fn one_month_memory_ratio<F: Scalar>(
    shape: &ModelShape,
    profile: &HardwareProfile<F>,
    eval: &PlanEvaluation<F>,
) -> F {
    let month = F::from_f64(DAYS_PER_MONTH * SECONDS_PER_DAY).unwrap();
    // Total single-device compute seconds for the run.
    let total = eval.training_time * F::from_int(eval.gpus()) * eval.efficiency;
    let bubble_penalty = F::one() + eval.bubble;
    let per_instance = F::from_int(eval.plan.data * eval.plan.pipe);
    let tensor_needed = (total * bubble_penalty / (month * per_instance))
        .ceil()
        .to_f64()
        .map_or(1, |v| v.max(1.0) as u64)
        .max(eval.plan.tensor);
    let scaled = ParallelPlan {
        tensor: tensor_needed,
        ..eval.plan
    };
    let gib = F::from_f64(crate::hardware::GIB).unwrap();
    match cost::memory_breakdown::<F>(shape, &scaled) {
        Ok(memory) => memory.total() / gib / (profile.compute / F::from_f64(1e12).unwrap()),
        Err(_) => F::nan(),
    }
}

/// Last crossing of `time <= threshold_days`, log-interpolated in
/// (params, time); returns the parameter count and memory at the crossing.
fn limit_crossing(series: &[(f64, f64, f64)], threshold_days: f64) -> Option<(f64, f64)> {
    let mut crossing = None;
    for pair in series.windows(2) {
        let (p0, t0, m0) = pair[0];
        let (p1, t1, m1) = pair[1];
        if t0 <= threshold_days && t1 > threshold_days && t0 > 0.0 {
            let frac = (threshold_days.ln() - t0.ln()) / (t1.ln() - t0.ln());
            let p = (p0.ln() + frac * (p1.ln() - p0.ln())).exp();
            let m = (m0.ln() + frac * (m1.ln() - m0.ln())).exp();
            crossing = Some((p, m));
        }
    }
    // The whole series may sit below the threshold.
    if crossing.is_none() {
        if let Some(&(p, t, m)) = series.last() {
            if t <= threshold_days {
                crossing = Some((p, m));
            }
        }
    }
    crossing
}
