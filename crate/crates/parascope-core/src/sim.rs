//! Discrete-event simulator for the four training schedules.
//!
//! One data-parallel instance (`n_l` devices) is replayed task by task.
//! Each device runs four serial streams: compute, the data-parallel link,
//! the pipeline link and the host link. A task occupies its stream for
//! `flops/rate` or `bytes/bandwidth` and starts once every dependency has
//! finished, FIFO within a stream. The replay validates the closed-form
//! bubble factors, the communication-overlap claims and the mixed-buffering
//! lifetimes against an executable model.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::cost::ParallelPlan;
use crate::hardware::HardwareProfile;
use crate::model::ModelShape;
use crate::optimizer::bubble_fraction;
use crate::{cost, Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// Standard gradient accumulation: all layers per micro-batch, gradient
    /// reduction at the end (data parallelism only).
    StdGa,
    /// Layered gradient accumulation: all micro-batches per layer.
    LayeredGa,
    /// Contiguous pipeline split (GPipe-style).
    StdPipe,
    /// Modular pipeline split: layer `l` on device `l mod n_l`, scheduled
    /// layer-group by layer-group as in layered accumulation.
    ModularPipe,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 4] = [
        ScheduleKind::StdGa,
        ScheduleKind::LayeredGa,
        ScheduleKind::StdPipe,
        ScheduleKind::ModularPipe,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ScheduleKind::StdGa => "std-ga",
            ScheduleKind::LayeredGa => "layered-ga",
            ScheduleKind::StdPipe => "std-pipe",
            ScheduleKind::ModularPipe => "modular-pipe",
        }
    }

    fn layered(&self) -> bool {
        matches!(self, ScheduleKind::LayeredGa | ScheduleKind::ModularPipe)
    }
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScheduleKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::UnsupportedSchedule(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TaskKind {
    Forward,
    BackwardWithRecompute,
    Restore,
    Reduce,
    PipeSend,
    OffloadWrite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Stream {
    Compute,
    DataNet,
    PipeNet,
    HostLink,
}

impl Stream {
    pub const ALL: [Stream; 4] = [
        Stream::Compute,
        Stream::DataNet,
        Stream::PipeNet,
        Stream::HostLink,
    ];

    fn index(&self) -> usize {
        *self as usize
    }
}

/// One unit of work in the dependency graph.
#[derive(Debug, Clone)]
pub struct Task<F> {
    pub kind: TaskKind,
    pub layer: u64,
    pub micro_batch: u64,
    pub device: u64,
    pub stream: Stream,
    /// Compute cost; zero for transfers.
    pub flops: F,
    /// Transfer size; zero for compute tasks.
    pub bytes: F,
    /// FIFO priority within the (device, stream) queue, following the
    /// schedule's (micro-batch, layer) processing order.
    pub seq: u64,
    pub deps: Vec<usize>,
}

/// Dependency graph of one batch on one data-parallel instance.
#[derive(Debug, Clone)]
pub struct ScheduleGraph<F> {
    pub kind: ScheduleKind,
    pub devices: u64,
    pub micro_batches: u64,
    pub tasks: Vec<Task<F>>,
}

/// Execution rates for the four streams.
#[derive(Debug, Clone, Copy)]
pub struct SimRates<F> {
    /// flop/s per device.
    pub compute: F,
    /// bytes/s per network stream; infinity models an idealized link.
    pub data_net: F,
    pub pipe_net: F,
    pub host_link: F,
}

impl<F: Scalar> SimRates<F> {
    pub fn from_profile(profile: &HardwareProfile<F>, plan: &ParallelPlan) -> Self {
        SimRates {
            compute: profile.compute,
            data_net: profile.bandwidth(cost::data_parallel_link(plan, profile)),
            pipe_net: profile.bandwidth(cost::pipeline_link(plan, profile)),
            host_link: profile.bandwidth(crate::hardware::LinkClass::CpuGpu),
        }
    }

    /// Compute-only limit: transfers take no time.
    pub fn infinite_network(compute: F) -> Self {
        SimRates {
            compute,
            data_net: F::infinity(),
            pipe_net: F::infinity(),
            host_link: F::infinity(),
        }
    }

    fn rate(&self, stream: Stream) -> F {
        match stream {
            Stream::Compute => self.compute,
            Stream::DataNet => self.data_net,
            Stream::PipeNet => self.pipe_net,
            Stream::HostLink => self.host_link,
        }
    }
}

/// A task with its simulated interval, in graph order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduledTask<F> {
    pub kind: TaskKind,
    pub layer: u64,
    pub micro_batch: u64,
    pub device: u64,
    pub stream: Stream,
    pub start: F,
    pub end: F,
}

/// Simulated execution of a schedule graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timeline<F> {
    pub kind: ScheduleKind,
    pub devices: u64,
    pub micro_batches: u64,
    /// Indexed like the graph's task list.
    pub tasks: Vec<ScheduledTask<F>>,
    pub makespan: F,
    /// Compute-stream idle fraction per device.
    pub idle_fraction: Vec<F>,
    /// Compute-stream busy seconds per device.
    pub compute_busy: Vec<F>,
    /// Sustained transfer rate per stream: bytes moved over the stream's
    /// active span, maximized over devices. This is the link bandwidth the
    /// schedule actually needs to run undisturbed.
    pub peak_bandwidth: [F; 4],
}

impl<F: Scalar> Timeline<F> {
    pub fn peak_bandwidth(&self, stream: Stream) -> F {
        self.peak_bandwidth[stream.index()]
    }

    /// Tasks sorted for trace export: device, then stream, then start time.
    pub fn trace(&self) -> Vec<&ScheduledTask<F>> {
        let mut out: Vec<&ScheduledTask<F>> = self.tasks.iter().collect();
        out.sort_by(|a, b| {
            (a.device, a.stream)
                .cmp(&(b.device, b.stream))
                .then(a.start.partial_cmp(&b.start).unwrap())
                .then((a.layer, a.micro_batch).cmp(&(b.layer, b.micro_batch)))
        });
        out
    }

    /// Exhaustive causality check: every task starts at or after each of
    /// its dependencies ends.
    pub fn causal(&self, graph: &ScheduleGraph<F>) -> bool {
        graph.tasks.iter().enumerate().all(|(id, task)| {
            task.deps
                .iter()
                .all(|&dep| self.tasks[id].start >= self.tasks[dep].end)
        })
    }
}

struct Builder<F> {
    tasks: Vec<Task<F>>,
    seq: std::collections::HashMap<(u64, usize), u64>,
}

impl<F: Scalar> Builder<F> {
    fn new() -> Self {
        Builder {
            tasks: Vec::new(),
            seq: std::collections::HashMap::new(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        kind: TaskKind,
        layer: u64,
        micro_batch: u64,
        device: u64,
        stream: Stream,
        flops: F,
        bytes: F,
        deps: Vec<usize>,
    ) -> usize {
        let seq = self.seq.entry((device, stream.index())).or_insert(0);
        let task = Task {
            kind,
            layer,
            micro_batch,
            device,
            stream,
            flops,
            bytes,
            seq: *seq,
            deps,
        };
        *seq += 1;
        self.tasks.push(task);
        self.tasks.len() - 1
    }
}

/// Layer-to-device assignment.
fn owner(kind: ScheduleKind, layer: u64, layers: u64, stages: u64) -> u64 {
    match kind {
        ScheduleKind::StdGa | ScheduleKind::LayeredGa => 0,
        ScheduleKind::StdPipe => layer / (layers / stages),
        ScheduleKind::ModularPipe => layer % stages,
    }
}

/// Build the dependency graph of one batch under a schedule.
///
/// Restore tasks appear when the plan partitions or offloads the training
/// state; reduce tasks when gradients must be merged (`n_b >= 2`). Layered
/// schedules move state once per layer-group, the standard ones once per
/// micro-batch. Restores are gated one layer-group ahead of use so that two
/// parameter buffers suffice.
pub fn build_schedule<F: Scalar>(
    shape: &ModelShape,
    plan: &ParallelPlan,
    kind: ScheduleKind,
) -> Result<ScheduleGraph<F>> {
    build_schedule_with(shape, plan, kind, 1)
}

/// `restore_prefetch` is how many layer-groups a restore may run ahead of
/// its use; 1 matches mixed buffering (two parameter buffers). Larger
/// values model an unbounded prefetcher and are used by the buffering
/// stress tests.
pub fn build_schedule_with<F: Scalar>(
    shape: &ModelShape,
    plan: &ParallelPlan,
    kind: ScheduleKind,
    restore_prefetch: u64,
) -> Result<ScheduleGraph<F>> {
    plan.validate(shape)?;
    let stages = plan.pipe;
    match kind {
        ScheduleKind::StdGa | ScheduleKind::LayeredGa => {
            if stages != 1 {
                return Err(Error::UnsupportedSchedule(format!(
                    "{} runs on a single pipeline stage, got n_l = {stages}",
                    kind.label()
                )));
            }
        }
        ScheduleKind::StdPipe | ScheduleKind::ModularPipe => {
            if !shape.layers.is_multiple_of(stages) {
                return Err(Error::UnsupportedSchedule(format!(
                    "{} needs the stage count to divide the layer count ({} % {stages} != 0)",
                    kind.label(),
                    shape.layers
                )));
            }
        }
    }

    let layers = shape.layers;
    let micro = plan.micro_batches;
    let tensor = F::from_int(plan.tensor);
    let layer_params = F::from_count(shape.layer_params());
    let fwd_flops = F::from_int(2)
        * F::from_int(plan.micro_batch_size)
        * F::from_int(shape.seq_len)
        * layer_params
        / tensor;
    let bwd_flops = fwd_flops * F::from_int(3);
    let boundary_bytes = F::from_int(4)
        * F::from_int(plan.micro_batch_size)
        * F::from_int(shape.seq_len)
        * F::from_int(shape.hidden)
        / tensor;
    let checkpoint_bytes = boundary_bytes / F::from_int(2);

    let partitioned = plan.strategy.state_partitioned && plan.data >= 2;
    let restores = partitioned || plan.strategy.offload_state;
    let reduces = plan.data >= 2;
    let restore_bytes = F::from_int(4) * layer_params / tensor;
    let reduce_bytes = if partitioned {
        F::from_int(4) * layer_params / tensor
    } else {
        F::from_int(8) * layer_params / tensor
    };
    let per_micro_state = restores && !kind.layered();
    let per_micro_reduce = partitioned && !kind.layered();

    let mut b = Builder::new();
    let idx = |layer: u64, m: u64| (layer * micro + m) as usize;
    let mut forward = vec![usize::MAX; (layers * micro) as usize];
    let mut backward = vec![usize::MAX; (layers * micro) as usize];
    // Per-device restore gating: the compute tasks covered by each restore,
    // in restore order.
    let mut covered: Vec<Vec<Vec<usize>>> = vec![Vec::new(); stages as usize];

    // Visiting order of (layer, micro-batch) pairs per pass.
    let fwd_order: Vec<(u64, u64)> = if kind.layered() {
        (0..layers)
            .flat_map(|l| (0..micro).map(move |m| (l, m)))
            .collect()
    } else {
        (0..micro)
            .flat_map(|m| (0..layers).map(move |l| (l, m)))
            .collect()
    };
    let bwd_order: Vec<(u64, u64)> = if kind.layered() {
        (0..layers)
            .rev()
            .flat_map(|l| (0..micro).map(move |m| (l, m)))
            .collect()
    } else {
        (0..micro)
            .flat_map(|m| (0..layers).rev().map(move |l| (l, m)))
            .collect()
    };

    for pass in [true, false] {
        let order = if pass { &fwd_order } else { &bwd_order };
        let mut live_restore: Vec<Option<usize>> = vec![None; layers as usize];
        for &(layer, m) in order {
            let device = owner(kind, layer, layers, stages);
            let mut deps: Vec<usize> = Vec::new();

            if restores {
                let fresh = per_micro_state || m == 0;
                if fresh {
                    let gates = &covered[device as usize];
                    let slot = gates.len() as u64;
                    let gate_dep = slot
                        .checked_sub(restore_prefetch + 1)
                        .and_then(|s| gates[s as usize].last().copied());
                    let restore = b.push(
                        TaskKind::Restore,
                        layer,
                        m,
                        device,
                        Stream::DataNet,
                        F::zero(),
                        restore_bytes,
                        gate_dep.into_iter().collect(),
                    );
                    covered[device as usize].push(Vec::new());
                    live_restore[layer as usize] = Some(restore);
                }
                if let Some(r) = live_restore[layer as usize] {
                    deps.push(r);
                }
            }

            if pass {
                if layer > 0 {
                    let upstream = forward[idx(layer - 1, m)];
                    let up_device = owner(kind, layer - 1, layers, stages);
                    if up_device != device {
                        deps.push(b.push(
                            TaskKind::PipeSend,
                            layer - 1,
                            m,
                            up_device,
                            Stream::PipeNet,
                            F::zero(),
                            boundary_bytes,
                            vec![upstream],
                        ));
                    } else {
                        deps.push(upstream);
                    }
                }
                let task = b.push(
                    TaskKind::Forward,
                    layer,
                    m,
                    device,
                    Stream::Compute,
                    fwd_flops,
                    F::zero(),
                    deps,
                );
                forward[idx(layer, m)] = task;
                if let Some(group) = covered[device as usize].last_mut() {
                    group.push(task);
                }
                if plan.strategy.offload_checkpoints {
                    b.push(
                        TaskKind::OffloadWrite,
                        layer,
                        m,
                        device,
                        Stream::HostLink,
                        F::zero(),
                        checkpoint_bytes,
                        vec![task],
                    );
                }
            } else {
                // Checkpoint availability: this layer's forward output.
                deps.push(forward[idx(layer, m)]);
                if layer + 1 < layers {
                    let downstream = backward[idx(layer + 1, m)];
                    let down_device = owner(kind, layer + 1, layers, stages);
                    if down_device != device {
                        deps.push(b.push(
                            TaskKind::PipeSend,
                            layer + 1,
                            m,
                            down_device,
                            Stream::PipeNet,
                            F::zero(),
                            boundary_bytes,
                            vec![downstream],
                        ));
                    } else {
                        deps.push(downstream);
                    }
                }
                let task = b.push(
                    TaskKind::BackwardWithRecompute,
                    layer,
                    m,
                    device,
                    Stream::Compute,
                    bwd_flops,
                    F::zero(),
                    deps,
                );
                backward[idx(layer, m)] = task;
                if let Some(group) = covered[device as usize].last_mut() {
                    group.push(task);
                }
                if reduces {
                    if per_micro_reduce {
                        b.push(
                            TaskKind::Reduce,
                            layer,
                            m,
                            device,
                            Stream::DataNet,
                            F::zero(),
                            reduce_bytes,
                            vec![task],
                        );
                    } else if m + 1 == micro {
                        let group_deps = (0..micro).map(|mm| backward[idx(layer, mm)]).collect();
                        b.push(
                            TaskKind::Reduce,
                            layer,
                            micro - 1,
                            device,
                            Stream::DataNet,
                            F::zero(),
                            reduce_bytes,
                            group_deps,
                        );
                    }
                }
            }
        }
    }

    Ok(ScheduleGraph {
        kind,
        devices: stages,
        micro_batches: micro,
        tasks: b.tasks,
    })
}

/// f64 wrapper ordered totally, for the event queue. NaN never occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
struct EventTime(f64);

impl Eq for EventTime {}

impl PartialOrd for EventTime {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EventTime {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Execute a schedule graph by list scheduling. Identical inputs produce
/// bit-identical timelines: events are processed in (time, device, stream,
/// sequence) order with no other source of nondeterminism.
pub fn simulate<F: Scalar>(graph: &ScheduleGraph<F>, rates: &SimRates<F>) -> Result<Timeline<F>> {
    for stream in Stream::ALL {
        let positive = rates
            .rate(stream)
            .partial_cmp(&F::zero())
            .is_some_and(|ord| ord == std::cmp::Ordering::Greater);
        if !positive {
            return Err(Error::NonPositiveBandwidth(stream));
        }
    }

    let n = graph.tasks.len();
    let duration = |task: &Task<F>| -> F {
        let rate = rates.rate(task.stream);
        let cost = if task.stream == Stream::Compute {
            task.flops
        } else {
            task.bytes
        };
        if rate.is_infinite() {
            F::zero()
        } else {
            cost / rate
        }
    };

    let streams = Stream::ALL.len();
    let slots = graph.devices as usize * streams;
    let slot_of = |task: &Task<F>| task.device as usize * streams + task.stream.index();

    let mut indegree: Vec<usize> = graph.tasks.iter().map(|t| t.deps.len()).collect();
    let mut successors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (id, task) in graph.tasks.iter().enumerate() {
        for &dep in &task.deps {
            successors[dep].push(id);
        }
    }

    let mut ready: Vec<BinaryHeap<Reverse<(u64, usize)>>> =
        (0..slots).map(|_| BinaryHeap::new()).collect();
    let mut running: Vec<bool> = vec![false; slots];
    let mut events: BinaryHeap<Reverse<(EventTime, usize, usize)>> = BinaryHeap::new();
    let mut start_time: Vec<F> = vec![F::zero(); n];
    let mut end_time: Vec<F> = vec![F::zero(); n];
    let mut started = 0usize;

    for (id, task) in graph.tasks.iter().enumerate() {
        if indegree[id] == 0 {
            ready[slot_of(task)].push(Reverse((task.seq, id)));
        }
    }

    macro_rules! try_start {
        ($slot:expr, $now:expr) => {
            if !running[$slot] {
                if let Some(Reverse((_, id))) = ready[$slot].pop() {
                    running[$slot] = true;
                    start_time[id] = $now;
                    end_time[id] = $now + duration(&graph.tasks[id]);
                    started += 1;
                    events.push(Reverse((
                        EventTime(end_time[id].to_f64().unwrap()),
                        $slot,
                        id,
                    )));
                }
            }
        };
    }

    for slot in 0..slots {
        try_start!(slot, F::zero());
    }

    while let Some(Reverse((_, slot, id))) = events.pop() {
        let now = end_time[id];
        running[slot] = false;
        let mut touched = vec![slot];
        for &succ in &successors[id] {
            indegree[succ] -= 1;
            if indegree[succ] == 0 {
                let s = slot_of(&graph.tasks[succ]);
                ready[s].push(Reverse((graph.tasks[succ].seq, succ)));
                touched.push(s);
            }
        }
        touched.sort_unstable();
        touched.dedup();
        for s in touched {
            try_start!(s, now);
        }
    }

    if started != n {
        return Err(Error::DependencyCycle);
    }

    let mut makespan = F::zero();
    let mut compute_busy = vec![F::zero(); graph.devices as usize];
    let mut span: Vec<Option<(F, F)>> = vec![None; slots];
    let mut bytes_per_slot = vec![F::zero(); slots];
    let mut tasks: Vec<ScheduledTask<F>> = Vec::with_capacity(n);
    for (id, task) in graph.tasks.iter().enumerate() {
        let (s, e) = (start_time[id], end_time[id]);
        makespan = makespan.max(e);
        if task.stream == Stream::Compute {
            compute_busy[task.device as usize] = compute_busy[task.device as usize] + (e - s);
        }
        let slot = slot_of(task);
        span[slot] = Some(match span[slot] {
            None => (s, e),
            Some((a, b)) => (a.min(s), b.max(e)),
        });
        bytes_per_slot[slot] = bytes_per_slot[slot] + task.bytes;
        tasks.push(ScheduledTask {
            kind: task.kind,
            layer: task.layer,
            micro_batch: task.micro_batch,
            device: task.device,
            stream: task.stream,
            start: s,
            end: e,
        });
    }

    let idle_fraction = compute_busy
        .iter()
        .map(|&busy| {
            if makespan > F::zero() {
                F::one() - busy / makespan
            } else {
                F::zero()
            }
        })
        .collect();

    let mut peak_bandwidth = [F::zero(); 4];
    for (slot, window) in span.iter().enumerate() {
        let stream_idx = slot % streams;
        if stream_idx == Stream::Compute.index() {
            continue;
        }
        if let Some((a, b)) = window {
            let width = *b - *a;
            if width > F::zero() && bytes_per_slot[slot] / width > peak_bandwidth[stream_idx] {
                peak_bandwidth[stream_idx] = bytes_per_slot[slot] / width;
            }
        }
    }

    Ok(Timeline {
        kind: graph.kind,
        devices: graph.devices,
        micro_batches: graph.micro_batches,
        tasks,
        makespan,
        idle_fraction,
        compute_busy,
        peak_bandwidth,
    })
}

/// Buffer lifetime report for a simulated timeline.
#[derive(Debug, Clone, Serialize)]
pub struct BufferReport {
    pub parameter_high_water: u64,
    pub gradient_high_water: u64,
    pub violations: Vec<BufferViolation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BufferViolation {
    pub device: u64,
    pub buffer: &'static str,
    pub at: f64,
    pub live: u64,
}

impl BufferReport {
    /// Mixed buffering needs two parameter buffers and one gradient buffer.
    pub fn within_mixed_buffering(&self) -> bool {
        self.parameter_high_water <= 2 && self.gradient_high_water <= 1
    }
}

/// Measure buffer high-water marks on a timeline.
///
/// A parameter buffer lives from the start of its restore until the last
/// compute task it feeds (before the layer's next restore). A gradient
/// buffer opens once the covering backward task passes its recompute third
/// and closes when the matching reduce finishes. Schedules without restore
/// or reduce tasks report zero.
pub fn verify_buffering<F: Scalar>(timeline: &Timeline<F>) -> BufferReport {
    let mut param_intervals: Vec<(u64, f64, f64)> = Vec::new();
    let mut grad_intervals: Vec<(u64, f64, f64)> = Vec::new();

    for device in 0..timeline.devices {
        let tasks: Vec<&ScheduledTask<F>> = timeline
            .tasks
            .iter()
            .filter(|t| t.device == device)
            .collect();
        let mut restores: Vec<&&ScheduledTask<F>> = tasks
            .iter()
            .filter(|t| t.kind == TaskKind::Restore)
            .collect();
        restores.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
        let computes: Vec<&&ScheduledTask<F>> = tasks
            .iter()
            .filter(|t| matches!(t.kind, TaskKind::Forward | TaskKind::BackwardWithRecompute))
            .collect();

        for (i, restore) in restores.iter().enumerate() {
            let start = restore.start.to_f64().unwrap();
            let next = restores[i + 1..]
                .iter()
                .find(|r| r.layer == restore.layer)
                .map(|r| r.start.to_f64().unwrap())
                .unwrap_or(f64::INFINITY);
            let mut end = restore.end.to_f64().unwrap();
            for c in &computes {
                let cs = c.start.to_f64().unwrap();
                if c.layer == restore.layer && cs >= start && cs < next {
                    end = end.max(c.end.to_f64().unwrap());
                }
            }
            param_intervals.push((device, start, end));
        }

        let mut reduce_layers: Vec<u64> = tasks
            .iter()
            .filter(|t| t.kind == TaskKind::Reduce)
            .map(|t| t.layer)
            .collect();
        reduce_layers.sort_unstable();
        reduce_layers.dedup();
        for layer in reduce_layers {
            let mut reduces: Vec<&&ScheduledTask<F>> = tasks
                .iter()
                .filter(|t| t.kind == TaskKind::Reduce && t.layer == layer)
                .collect();
            reduces.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
            let mut backs: Vec<&&ScheduledTask<F>> = tasks
                .iter()
                .filter(|t| t.kind == TaskKind::BackwardWithRecompute && t.layer == layer)
                .collect();
            backs.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
            if backs.is_empty() {
                continue;
            }
            // Each reduce covers an equal run of backward micro-batches.
            let chunk = backs.len().div_ceil(reduces.len());
            for (i, reduce) in reduces.iter().enumerate() {
                let Some(first) = backs.get(i * chunk) else {
                    continue;
                };
                let fs = first.start.to_f64().unwrap();
                let fe = first.end.to_f64().unwrap();
                grad_intervals.push((device, fs + (fe - fs) / 3.0, reduce.end.to_f64().unwrap()));
            }
        }
    }

    let mut violations = Vec::new();
    let parameter_high_water = high_water(&param_intervals, 2, "parameter", &mut violations);
    let gradient_high_water = high_water(&grad_intervals, 1, "gradient", &mut violations);
    BufferReport {
        parameter_high_water,
        gradient_high_water,
        violations,
    }
}

fn high_water(
    intervals: &[(u64, f64, f64)],
    limit: u64,
    label: &'static str,
    violations: &mut Vec<BufferViolation>,
) -> u64 {
    let mut devices: Vec<u64> = intervals.iter().map(|&(d, _, _)| d).collect();
    devices.sort_unstable();
    devices.dedup();
    let mut high = 0u64;
    for device in devices {
        let mut edges: Vec<(f64, i64)> = Vec::new();
        for &(d, s, e) in intervals {
            if d == device && e > s {
                edges.push((s, 1));
                edges.push((e, -1));
            }
        }
        // Close before open at equal times: back-to-back reuse is one buffer.
        edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut live = 0i64;
        for (at, delta) in edges {
            live += delta;
            let count = live.max(0) as u64;
            high = high.max(count);
            if count > limit {
                violations.push(BufferViolation {
                    device,
                    buffer: label,
                    at,
                    live: count,
                });
            }
        }
    }
    high
}

/// Simulated-vs-analytical comparison for one schedule.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationReport<F> {
    pub kind: ScheduleKind,
    pub simulated_makespan: F,
    pub analytical_time: F,
    /// |simulated - analytical| / analytical.
    pub deviation: F,
    /// Busiest network stream, reported when the deviation exceeds 5%.
    pub dominating_stream: Option<Stream>,
}

/// Run a schedule and compare its makespan against the closed-form
/// prediction `T_compute * (1 + bubble)`.
pub fn compare_to_closed_form<F: Scalar>(
    shape: &ModelShape,
    plan: &ParallelPlan,
    kind: ScheduleKind,
    rates: &SimRates<F>,
) -> Result<DeviationReport<F>> {
    let graph = build_schedule::<F>(shape, plan, kind)?;
    let timeline = simulate(&graph, rates)?;

    let per_device_flops = F::from_int(8)
        * F::from_int(plan.micro_batch_size)
        * F::from_int(plan.micro_batches)
        * F::from_int(shape.seq_len)
        * F::from_count(shape.layer_params())
        * F::from_int(shape.layers / plan.pipe)
        / F::from_int(plan.tensor);
    let compute_time = per_device_flops / rates.compute;
    let mut reference = *plan;
    reference.strategy.method = match kind {
        ScheduleKind::ModularPipe => cost::Method::Improved,
        _ => cost::Method::Baseline,
    };
    let bubble: F = if matches!(kind, ScheduleKind::StdPipe | ScheduleKind::ModularPipe) {
        bubble_fraction(shape, &reference)?
    } else {
        F::zero()
    };
    let analytical = compute_time * (F::one() + bubble);
    let deviation = (timeline.makespan - analytical).abs() / analytical;

    // The stream spending the most wall time explains a deviation best.
    let dominating_stream = if deviation > F::from_f64(0.05).unwrap() {
        let busy = |stream: Stream| -> F {
            timeline
                .tasks
                .iter()
                .filter(|t| t.stream == stream)
                .fold(F::zero(), |acc, t| acc + (t.end - t.start))
        };
        [Stream::DataNet, Stream::PipeNet, Stream::HostLink]
            .into_iter()
            .max_by(|a, b| busy(*a).partial_cmp(&busy(*b)).unwrap())
    } else {
        None
    };

    Ok(DeviationReport {
        kind,
        simulated_makespan: timeline.makespan,
        analytical_time: analytical,
        deviation,
        dominating_stream,
    })
}
