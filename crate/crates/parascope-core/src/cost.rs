//! Closed-form resource usage per batch: compute, memory breakdown and
//! arithmetic intensities for each traffic type under the three training
//! strategies.

use serde::{Deserialize, Serialize};

use crate::hardware::{HardwareProfile, LinkClass};
use crate::model::ModelShape;
use crate::{Error, Result, Scalar};

/// The three training strategies compared throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Standard data/pipeline/tensor parallelism without state partition.
    Baseline,
    /// Training state partitioned across the data-parallel ranks.
    Partitioned,
    /// Layered gradient accumulation + modular pipeline parallelism.
    Improved,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Baseline => "Baseline",
            Method::Partitioned => "Partitioned",
            Method::Improved => "Improved",
        }
    }
}

/// A strategy plus its memory-placement flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub method: Method,
    /// Training state split across data-parallel ranks. Always true for
    /// [`Method::Partitioned`]; on by default for [`Method::Improved`].
    pub state_partitioned: bool,
    pub offload_state: bool,
    pub offload_checkpoints: bool,
}

impl Strategy {
    pub fn baseline() -> Self {
        Strategy {
            method: Method::Baseline,
            state_partitioned: false,
            offload_state: false,
            offload_checkpoints: false,
        }
    }

    pub fn partitioned() -> Self {
        Strategy {
            method: Method::Partitioned,
            state_partitioned: true,
            offload_state: false,
            offload_checkpoints: false,
        }
    }

    pub fn improved() -> Self {
        Strategy {
            method: Method::Improved,
            state_partitioned: true,
            offload_state: false,
            offload_checkpoints: false,
        }
    }

    pub fn from_method(method: Method) -> Self {
        match method {
            Method::Baseline => Self::baseline(),
            Method::Partitioned => Self::partitioned(),
            Method::Improved => Self::improved(),
        }
    }

    pub fn with_offload(mut self, state: bool, checkpoints: bool) -> Self {
        self.offload_state = state;
        self.offload_checkpoints = checkpoints;
        self
    }

    pub fn with_partition(mut self, partitioned: bool) -> Self {
        self.state_partitioned = partitioned || self.method == Method::Partitioned;
        self
    }

    /// Layered gradient accumulation spreads restores and reductions over
    /// the whole pass instead of concentrating them.
    pub fn layered(&self) -> bool {
        self.method == Method::Improved
    }

    pub fn offloads(&self) -> bool {
        self.offload_state || self.offload_checkpoints
    }
}

/// A concrete distributed training configuration.
///
/// The batch size is derived: `b = n_b * n_mu * b_mu` always holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelPlan {
    pub strategy: Strategy,
    /// Data-parallel degree `n_b`.
    pub data: u64,
    /// Pipeline-parallel degree `n_l`.
    pub pipe: u64,
    /// Tensor-parallel degree `n_a`.
    pub tensor: u64,
    /// Micro-batch count per data-parallel instance `n_mu`.
    pub micro_batches: u64,
    /// Micro-batch size in sequences `b_mu`.
    pub micro_batch_size: u64,
}

impl ParallelPlan {
    pub fn new(
        strategy: Strategy,
        data: u64,
        pipe: u64,
        tensor: u64,
        micro_batches: u64,
        micro_batch_size: u64,
    ) -> Self {
        ParallelPlan {
            strategy,
            data,
            pipe,
            tensor,
            micro_batches,
            micro_batch_size,
        }
    }

    /// Total batch size in sequences, `b = n_b * n_mu * b_mu`.
    pub fn batch(&self) -> u64 {
        self.data * self.micro_batches * self.micro_batch_size
    }

    /// Device count `n_gpu = n_b * n_l * n_a`.
    pub fn gpus(&self) -> u64 {
        self.data * self.pipe * self.tensor
    }

    pub fn validate(&self, shape: &ModelShape) -> Result<()> {
        if self.data == 0
            || self.pipe == 0
            || self.tensor == 0
            || self.micro_batches == 0
            || self.micro_batch_size == 0
        {
            return Err(Error::InvalidPlan(
                "all parallel degrees and batch fields must be >= 1".into(),
            ));
        }
        if self.pipe > shape.layers {
            return Err(Error::InvalidPlan(format!(
                "pipeline degree {} exceeds layer count {}",
                self.pipe, shape.layers
            )));
        }
        if self.micro_batches < self.pipe {
            return Err(Error::InvalidPlan(format!(
                "micro-batch count {} below pipeline degree {}",
                self.micro_batches, self.pipe
            )));
        }
        Ok(())
    }
}

/// Flops required to process one batch: `8 b d_s p`.
///
/// Forward costs `2 b d_s p`; the backward pass (parameter gradients, layer
/// gradients, and activation recomputation) is three times the forward.
pub fn batch_flops<F: Scalar>(shape: &ModelShape, batch: u64) -> F {
    let p = F::from_count(shape.params());
    F::from_int(8) * F::from_int(batch) * F::from_int(shape.seq_len) * p
}

/// Coefficients of the live-activation footprint between checkpoints.
///
/// `m_0 = 2 (k_hidden d_m + k_attention d_a d_s)` bytes per token per layer,
/// covering activations and their gradients at half precision, unfused.
/// The defaults are calibrated on the X_160 memory table; on the X family
/// `d_a d_s = 8 d_m`, so the two terms cannot be separated within the family
/// and the coefficients should not be trusted far off it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationCoefficients {
    pub k_hidden: f64,
    pub k_attention: f64,
}

impl Default for ActivationCoefficients {
    fn default() -> Self {
        ActivationCoefficients {
            k_hidden: 35.0,
            k_attention: 2.0,
        }
    }
}

/// Live activation bytes per token per layer, `m_0`.
pub fn activation_bytes_per_token<F: Scalar>(
    shape: &ModelShape,
    coeffs: &ActivationCoefficients,
) -> F {
    let dm = F::from_int(shape.hidden);
    let attn = F::from_int(shape.heads) * F::from_int(shape.seq_len);
    let k1 = F::from_f64(coeffs.k_hidden).unwrap();
    let k2 = F::from_f64(coeffs.k_attention).unwrap();
    F::from_int(2) * (k1 * dm + k2 * attn)
}

/// Per-GPU memory usage in bytes, by category.
///
/// `offloadable` and `non_offloadable` classify by *capability*: state and
/// checkpoints can be staged in host memory, buffers and live activations
/// cannot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemoryBreakdown<F> {
    /// Parameters plus Adam moments, 12 bytes per parameter.
    pub state: F,
    /// Activation checkpoints at each layer boundary.
    pub checkpoints: F,
    /// Two parameter buffers plus one gradient buffer (mixed buffering).
    pub buffers: F,
    /// Live activations and gradients between checkpoints.
    pub layer_activations: F,
    pub offloadable: F,
    pub non_offloadable: F,
}

impl<F: Scalar> MemoryBreakdown<F> {
    pub fn total(&self) -> F {
        self.offloadable + self.non_offloadable
    }

    /// Bytes that must stay on the GPU given which categories are offloaded.
    pub fn resident(&self, offload_state: bool, offload_checkpoints: bool) -> F {
        let mut resident = self.non_offloadable;
        if !offload_state {
            resident = resident + self.state;
        }
        if !offload_checkpoints {
            resident = resident + self.checkpoints;
        }
        resident
    }
}

/// Memory breakdown for a plan, using the default activation coefficients.
pub fn memory_breakdown<F: Scalar>(
    shape: &ModelShape,
    plan: &ParallelPlan,
) -> Result<MemoryBreakdown<F>> {
    memory_breakdown_with(shape, plan, &ActivationCoefficients::default())
}

pub fn memory_breakdown_with<F: Scalar>(
    shape: &ModelShape,
    plan: &ParallelPlan,
    coeffs: &ActivationCoefficients,
) -> Result<MemoryBreakdown<F>> {
    plan.validate(shape)?;
    let p = F::from_count(shape.params());
    let pl = F::from_count(shape.layer_params());
    let tensor = F::from_int(plan.tensor);
    let gpus = F::from_int(plan.gpus());
    let batch = F::from_int(plan.batch());
    let seq = F::from_int(shape.seq_len);

    // 12 bytes/parameter (fp32 weights + Adam moments); gradients are folded
    // away by updating as soon as possible.
    let state_bytes = F::from_int(12) * p;
    let state = if plan.strategy.state_partitioned {
        state_bytes / gpus
    } else {
        state_bytes / (F::from_int(plan.pipe) * tensor)
    };

    let checkpoints =
        F::from_int(2) * batch * seq * F::from_int(shape.hidden) * F::from_int(shape.layers) / gpus;

    let buffers = F::from_int(6) * pl / tensor;

    let m0 = activation_bytes_per_token::<F>(shape, coeffs);
    let layer_activations =
        batch * seq * m0 / (F::from_int(plan.data) * F::from_int(plan.micro_batches) * tensor);

    Ok(MemoryBreakdown {
        state,
        checkpoints,
        buffers,
        layer_activations,
        offloadable: state + checkpoints,
        non_offloadable: buffers + layer_activations,
    })
}

/// Arithmetic intensity of one traffic type, together with whether the
/// transfer overlaps computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Traffic<F> {
    pub intensity: F,
    pub overlapped: bool,
}

/// Data-parallel gradient-reduction intensity `nu_b`; `None` when `n_b = 1`.
///
/// Five published variants. The baseline overlaps the reduction with the
/// last micro-batch's backward pass; with deep pipelines that overlap window
/// vanishes, so the non-overlapped form applies (we switch at `n_l > d_l/4`).
/// Partitioned and layered variants spread the traffic over every
/// micro-batch or the whole pass respectively.
pub fn data_parallel_intensity<F: Scalar>(
    shape: &ModelShape,
    plan: &ParallelPlan,
) -> Option<Traffic<F>> {
    if plan.data < 2 {
        return None;
    }
    let b = F::from_int(plan.batch());
    let ds = F::from_int(shape.seq_len);
    let nb = F::from_int(plan.data);
    let nmu = F::from_int(plan.micro_batches);
    let three_quarters = F::from_f64(0.75).unwrap();
    let half = F::from_f64(0.5).unwrap();

    let strategy = plan.strategy;
    let (intensity, overlapped) = if strategy.layered() {
        if strategy.state_partitioned {
            (half * b * ds / nb, true)
        } else {
            (three_quarters * b * ds / nb, true)
        }
    } else if strategy.state_partitioned {
        (half * b * ds / (nb * nmu), true)
    } else if plan.pipe > shape.layers / 4 && plan.pipe > 1 {
        // Deep contiguous pipeline: reduction cannot hide behind the last
        // micro-batch, charge it outright.
        (b * ds / nb, false)
    } else {
        (three_quarters * b * ds / (nb * nmu), true)
    };
    Some(Traffic {
        intensity,
        overlapped,
    })
}

/// Pipeline-transfer intensity `nu_l`; `None` when `n_l = 1`.
pub fn pipeline_intensity<F: Scalar>(shape: &ModelShape, plan: &ParallelPlan) -> Option<F> {
    if plan.pipe < 2 {
        return None;
    }
    let dm = F::from_int(shape.hidden);
    let factor = F::from_int(2 + shape.ff_mult);
    Some(if plan.strategy.layered() {
        // Modular split: one transfer per layer.
        factor * dm
    } else {
        factor * dm * F::from_int(shape.layers) / F::from_int(plan.pipe)
    })
}

/// Tensor-parallel all-reduce intensity `nu_a`; `None` when `n_a = 1`.
/// This traffic is never overlapped with computation.
pub fn tensor_intensity<F: Scalar>(shape: &ModelShape, tensor: u64) -> Option<F> {
    if tensor < 2 {
        return None;
    }
    let dm = F::from_int(shape.hidden);
    let factor = F::from_int(4 + 2 * shape.ff_mult);
    Some(factor * dm / (F::from_int(3) * F::from_int(tensor - 1)))
}

/// State- and checkpoint-offload intensities `(nu_s, nu_c)`, present only
/// when the corresponding offload flag is set on the plan's strategy.
///
/// Without layering the state moves once per micro-batch; layered
/// accumulation amortizes the transfer over all micro-batches. Checkpoint
/// offload looks like a pipeline hop with half the computation.
pub fn offload_intensities<F: Scalar>(
    shape: &ModelShape,
    plan: &ParallelPlan,
) -> (Option<F>, Option<F>) {
    let strategy = plan.strategy;
    let state = if strategy.offload_state {
        let b = F::from_int(plan.batch());
        let ds = F::from_int(shape.seq_len);
        let nb = F::from_int(plan.data);
        let nmu = F::from_int(plan.micro_batches);
        Some(match (strategy.layered(), strategy.state_partitioned) {
            (false, false) => b * ds / (nmu * nb),
            (false, true) => b * ds / nmu,
            (true, false) => b * ds / nb,
            (true, true) => b * ds,
        })
    } else {
        None
    };
    let checkpoints = if strategy.offload_checkpoints {
        Some(F::from_int(4 + 2 * shape.ff_mult) * F::from_int(shape.hidden))
    } else {
        None
    };
    (state, checkpoints)
}

/// Arithmetic intensities for every active traffic type of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntensityReport<F> {
    /// Data-parallel reduction (and restore, when partitioned).
    pub data: Option<F>,
    /// Pipeline activation/gradient transfer.
    pub pipe: Option<F>,
    /// Tensor-parallel all-reduces.
    pub tensor: Option<F>,
    /// Training-state offload.
    pub state_offload: Option<F>,
    /// Activation-checkpoint offload.
    pub checkpoint_offload: Option<F>,
}

impl<F: Scalar> IntensityReport<F> {
    pub fn for_plan(shape: &ModelShape, plan: &ParallelPlan) -> Self {
        let (state_offload, checkpoint_offload) = offload_intensities(shape, plan);
        IntensityReport {
            data: data_parallel_intensity(shape, plan).map(|t| t.intensity),
            pipe: pipeline_intensity(shape, plan),
            tensor: tensor_intensity(shape, plan.tensor),
            state_offload,
            checkpoint_offload,
        }
    }
}

/// Relative overhead of one transfer against the computation it accompanies.
///
/// Non-overlapped traffic always costs `nu_net / nu_op` extra time.
/// Overlapped traffic is free while compute-bound (`nu_op >= nu_net`);
/// when data-bound it stretches the covered region by `nu_net / nu_op`,
/// i.e. an overhead of `nu_net / nu_op - 1` on that region.
pub fn overlap_overhead<F: Scalar>(op_intensity: F, net_intensity: F, overlapped: bool) -> F {
    if overlapped {
        if op_intensity >= net_intensity {
            F::zero()
        } else {
            net_intensity / op_intensity - F::one()
        }
    } else {
        net_intensity / op_intensity
    }
}

/// Which link each traffic type rides on.
///
/// Traffic stays on NVLink when every communicating peer shares a node:
/// tensor groups within the node-size limit, pipelines whose whole instance
/// fits in a node, and jobs small enough to fit entirely in one node.
pub fn data_parallel_link<F: Scalar>(
    plan: &ParallelPlan,
    profile: &HardwareProfile<F>,
) -> LinkClass {
    if plan.gpus() <= profile.gpus_per_node {
        LinkClass::NvLink
    } else {
        profile.inter_node
    }
}

pub fn pipeline_link<F: Scalar>(plan: &ParallelPlan, profile: &HardwareProfile<F>) -> LinkClass {
    if plan.pipe * plan.tensor <= profile.gpus_per_node {
        LinkClass::NvLink
    } else {
        profile.inter_node
    }
}

pub fn tensor_link<F: Scalar>(plan: &ParallelPlan, profile: &HardwareProfile<F>) -> LinkClass {
    if profile.fits_node(plan.tensor) {
        LinkClass::NvLink
    } else {
        profile.inter_node
    }
}
