//! Regeneration of the published reference tables, side by side with the
//! published values so deviations are visible cell by cell.

use serde::Serialize;

use crate::cost::{self, Method, ParallelPlan, Strategy};
use crate::hardware::{HardwareProfile, LinkClass, GIB};
use crate::model::{reference, x_model, ModelShape};
use crate::optimizer::{
    self, evaluate, fastest_plan, min_cluster_for_deadline, OptimizerConstraints, PlanEvaluation,
    SECONDS_PER_DAY,
};
use crate::Result;

/// One row of the model-configuration table.
#[derive(Debug, Clone, Serialize)]
pub struct ModelRow {
    pub name: &'static str,
    pub shape: ModelShape,
    pub computed_params: f64,
    pub published_params: f64,
    pub computed_critical_batch: f64,
    pub published_critical_batch: f64,
}

impl ModelRow {
    pub fn params_deviation(&self) -> f64 {
        (self.computed_params - self.published_params).abs() / self.published_params
    }

    pub fn critical_batch_deviation(&self) -> f64 {
        (self.computed_critical_batch - self.published_critical_batch).abs()
            / self.published_critical_batch
    }
}

/// Model comparison rows: the X family alongside well-known transformers.
pub fn models_table() -> Vec<ModelRow> {
    let rows: Vec<(&'static str, ModelShape, f64, f64)> = vec![
        ("X_2", x_model(2).unwrap(), 488.0, 130.0),
        ("BERT", reference::bert_large(), 301e6, 751.0),
        ("X_32", x_model(32).unwrap(), 403e6, 826.0),
        ("Megatron-LM", reference::megatron_lm(), 8.15e9, 1130.0),
        ("X_64", x_model(64).unwrap(), 12.9e9, 1310.0),
        ("T-NLG", reference::t_nlg(), 17.0e9, 1440.0),
        ("GPT-3", reference::gpt3(), 174e9, 1560.0),
        ("X_108", x_model(108).unwrap(), 176e9, 1860.0),
        ("X_160", x_model(160).unwrap(), 1.26e12, 2420.0),
    ];
    rows.into_iter()
        .map(|(name, shape, params, bc)| ModelRow {
            name,
            shape,
            computed_params: shape.params() as f64,
            published_params: params,
            computed_critical_batch: shape.critical_batch(),
            published_critical_batch: bc,
        })
        .collect()
}

/// One row of the bandwidth/intensity table.
#[derive(Debug, Clone, Serialize)]
pub struct HardwareRow {
    pub link: LinkClass,
    pub bandwidth_gib: f64,
    pub computed_threshold: f64,
    pub published_threshold: f64,
}

impl HardwareRow {
    pub fn deviation(&self) -> f64 {
        (self.computed_threshold - self.published_threshold).abs() / self.published_threshold
    }
}

pub const PUBLISHED_THRESHOLDS: [(LinkClass, f64); 8] = [
    (LinkClass::GpuMemory, 143.0),
    (LinkClass::NvLink, 484.0),
    (LinkClass::PciExpress, 4.61e3),
    (LinkClass::InfiniBand, 5.81e3),
    (LinkClass::CpuGpu, 9.22e3),
    (LinkClass::Ethernet, 46.5e3),
    (LinkClass::DiskNvme, 90.8e3),
    (LinkClass::DiskHdd, 2.91e6),
];

pub fn hardware_table(profile: &HardwareProfile<f64>) -> Vec<HardwareRow> {
    PUBLISHED_THRESHOLDS
        .iter()
        .map(|&(link, published)| HardwareRow {
            link,
            bandwidth_gib: profile.bandwidth(link) / GIB,
            computed_threshold: profile.intensity_threshold(link),
            published_threshold: published,
        })
        .collect()
}

/// Published fastest-configuration row for X_160.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PublishedSpeedRow {
    pub parallelism: &'static str,
    pub method: Method,
    pub offload: bool,
    pub batch: u64,
    pub micro_batch_size: u64,
    pub micro_batches: u64,
    pub gpus: u64,
    pub data: u64,
    pub pipe: u64,
    pub tensor: u64,
    pub efficiency: f64,
    pub time_days: f64,
}

const YEAR: f64 = 365.25;

/// The nine published fastest configurations for X_160.
#[allow(clippy::approx_constant)] // 3.14 GiB is a published memory cell
pub const PUBLISHED_SPEED: [PublishedSpeedRow; 9] = [
    PublishedSpeedRow {
        parallelism: "None",
        method: Method::Baseline,
        offload: true,
        batch: 2416,
        micro_batch_size: 4,
        micro_batches: 604,
        gpus: 1,
        data: 1,
        pipe: 1,
        tensor: 1,
        efficiency: 1.00,
        time_days: 630.0 * YEAR,
    },
    PublishedSpeedRow {
        parallelism: "Data",
        method: Method::Baseline,
        offload: true,
        batch: 2415,
        micro_batch_size: 5,
        micro_batches: 1,
        gpus: 483,
        data: 483,
        pipe: 1,
        tensor: 1,
        efficiency: 1.00,
        time_days: 1.3 * YEAR,
    },
    PublishedSpeedRow {
        parallelism: "Data",
        method: Method::Partitioned,
        offload: true,
        batch: 2415,
        micro_batch_size: 5,
        micro_batches: 1,
        gpus: 483,
        data: 483,
        pipe: 1,
        tensor: 1,
        efficiency: 1.00,
        time_days: 1.3 * YEAR,
    },
    PublishedSpeedRow {
        parallelism: "Data+pipe",
        method: Method::Baseline,
        offload: true,
        batch: 2412,
        micro_batch_size: 4,
        micro_batches: 201,
        gpus: 480,
        data: 3,
        pipe: 160,
        tensor: 1,
        efficiency: 0.56,
        time_days: 2.4 * YEAR,
    },
    PublishedSpeedRow {
        parallelism: "Data+pipe",
        method: Method::Improved,
        offload: false,
        batch: 2415,
        micro_batch_size: 1,
        micro_batches: 5,
        gpus: 2415,
        data: 483,
        pipe: 5,
        tensor: 1,
        efficiency: 0.94,
        time_days: 100.0,
    },
    PublishedSpeedRow {
        parallelism: "Data+tensor",
        method: Method::Baseline,
        offload: true,
        batch: 2415,
        micro_batch_size: 5,
        micro_batches: 1,
        gpus: 7728,
        data: 483,
        pipe: 1,
        tensor: 16,
        efficiency: 0.93,
        time_days: 32.0,
    },
    PublishedSpeedRow {
        parallelism: "Data+tensor",
        method: Method::Partitioned,
        offload: false,
        batch: 2415,
        micro_batch_size: 5,
        micro_batches: 1,
        gpus: 7728,
        data: 483,
        pipe: 1,
        tensor: 16,
        efficiency: 0.93,
        time_days: 32.0,
    },
    PublishedSpeedRow {
        parallelism: "3d",
        method: Method::Baseline,
        offload: false,
        batch: 2408,
        micro_batch_size: 1,
        micro_batches: 172,
        gpus: 35840,
        data: 14,
        pipe: 160,
        tensor: 16,
        efficiency: 0.48,
        time_days: 13.0,
    },
    PublishedSpeedRow {
        parallelism: "3d",
        method: Method::Improved,
        offload: false,
        batch: 2415,
        micro_batch_size: 1,
        micro_batches: 5,
        gpus: 38640,
        data: 483,
        pipe: 5,
        tensor: 16,
        efficiency: 0.88,
        time_days: 6.8,
    },
];

/// Dimension caps that restrict the search to one table row's parallelism.
fn row_constraints(row: &PublishedSpeedRow) -> OptimizerConstraints<f64> {
    let mut constraints = OptimizerConstraints::default();
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
    constraints
}

#[derive(Debug, Clone, Serialize)]
pub struct SpeedRow {
    pub published: PublishedSpeedRow,
    pub computed: Option<PlanEvaluation<f64>>,
}

/// Regenerate the fastest-configuration table by running the optimizer
/// under each row's parallelism restrictions.
pub fn speed_table(profile: &HardwareProfile<f64>) -> Result<Vec<SpeedRow>> {
    let shape = x_model(160)?;
    Ok(PUBLISHED_SPEED
        .iter()
        .map(|row| {
            let constraints = row_constraints(row);
            let strategy = Strategy::from_method(row.method);
            SpeedRow {
                published: *row,
                computed: fastest_plan(&shape, profile, strategy, &constraints),
            }
        })
        .collect())
}

/// Published memory cells (GiB) for the same nine configurations:
/// state, checkpoints, buffers, activations, offloadable, non-offloadable.
#[allow(clippy::approx_constant)] // 3.14 GiB is a published memory cell
pub const PUBLISHED_MEMORY: [[f64; 6]; 9] = [
    [14.1e3, 47.2e3, 43.9, 24.9, 61.2e3, 68.8],
    [14.1e3, 97.7, 43.9, 31.1, 14.2e3, 75.1],
    [29.1, 97.7, 43.9, 31.1, 127.0, 75.1],
    [87.9, 98.1, 43.9, 24.9, 186.0, 68.8],
    [5.82, 19.5, 43.9, 6.23, 25.4, 50.2],
    [879.0, 6.10, 2.75, 1.95, 885.0, 4.69],
    [1.82, 6.10, 2.75, 1.95, 7.92, 4.69],
    [5.49, 1.31, 2.75, 0.389, 6.81, 3.14],
    [0.364, 1.22, 2.75, 0.389, 1.58, 3.14],
];

#[derive(Debug, Clone, Serialize)]
pub struct MemoryRow {
    pub parallelism: &'static str,
    pub method: Method,
    /// state, checkpoints, buffers, activations, offloadable, non-offloadable.
    pub computed_gib: [f64; 6],
    pub published_gib: [f64; 6],
}

impl MemoryRow {
    pub fn deviations(&self) -> [f64; 6] {
        let mut out = [0.0; 6];
        for (slot, (computed, published)) in out
            .iter_mut()
            .zip(self.computed_gib.iter().zip(&self.published_gib))
        {
            *slot = (computed - published).abs() / published;
        }
        out
    }
}

/// Memory breakdown for the published configurations themselves (the memory
/// table describes those exact plans, not re-optimized ones).
pub fn memory_table() -> Result<Vec<MemoryRow>> {
    let shape = x_model(160)?;
    PUBLISHED_SPEED
        .iter()
        .zip(PUBLISHED_MEMORY)
        .map(|(row, published)| {
            let strategy = Strategy::from_method(row.method).with_offload(row.offload, row.offload);
            let plan = ParallelPlan::new(
                strategy,
                row.data,
                row.pipe,
                row.tensor,
                row.micro_batches,
                row.micro_batch_size,
            );
            let memory = cost::memory_breakdown::<f64>(&shape, &plan)?;
            Ok(MemoryRow {
                parallelism: row.parallelism,
                method: row.method,
                computed_gib: [
                    memory.state / GIB,
                    memory.checkpoints / GIB,
                    memory.buffers / GIB,
                    memory.layer_activations / GIB,
                    memory.offloadable / GIB,
                    memory.non_offloadable / GIB,
                ],
                published_gib: published,
            })
        })
        .collect()
}

/// Published smaller-cluster configurations for X_160 (one and six months).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PublishedClusterRow {
    pub parallelism: &'static str,
    pub method: Method,
    pub batch: u64,
    pub tensor: u64,
    pub gpus: u64,
    pub offloadable_gib: f64,
    pub non_offloadable_gib: f64,
    pub efficiency: f64,
    pub time_days: f64,
    /// Search restrictions reproducing the row's scenario.
    pub max_data: Option<u64>,
    pub max_pipe: Option<u64>,
    pub max_tensor: Option<u64>,
    pub min_pipe: Option<u64>,
    pub fixed_tensor: Option<u64>,
}

#[allow(clippy::approx_constant)] // 3.14 GiB is a published memory cell
pub const PUBLISHED_CLUSTERS: [PublishedClusterRow; 8] = [
    PublishedClusterRow {
        parallelism: "Data+tensor",
        method: Method::Partitioned,
        batch: 2415,
        tensor: 16,
        gpus: 7728,
        offloadable_gib: 7.92,
        non_offloadable_gib: 4.69,
        efficiency: 0.93,
        time_days: 32.0,
        max_data: None,
        max_pipe: Some(1),
        max_tensor: None,
        min_pipe: None,
        fixed_tensor: None,
    },
    PublishedClusterRow {
        parallelism: "3d",
        method: Method::Baseline,
        batch: 2416,
        tensor: 16,
        gpus: 10240,
        offloadable_gib: 10.1,
        non_offloadable_gib: 3.14,
        efficiency: 0.73,
        time_days: 31.0,
        max_data: None,
        max_pipe: None,
        max_tensor: None,
        min_pipe: Some(2),
        fixed_tensor: None,
    },
    PublishedClusterRow {
        parallelism: "3d",
        method: Method::Improved,
        batch: 2220,
        tensor: 4,
        gpus: 7400,
        offloadable_gib: 7.76,
        non_offloadable_gib: 12.5,
        efficiency: 0.97,
        time_days: 32.0,
        max_data: None,
        max_pipe: None,
        max_tensor: None,
        min_pipe: Some(2),
        fixed_tensor: None,
    },
    PublishedClusterRow {
        parallelism: "Data+tensor",
        method: Method::Partitioned,
        batch: 1660,
        tensor: 8,
        gpus: 1328,
        offloadable_gib: 35.0,
        non_offloadable_gib: 9.38,
        efficiency: 0.97,
        time_days: 180.0,
        max_data: None,
        max_pipe: Some(1),
        max_tensor: None,
        min_pipe: None,
        fixed_tensor: None,
    },
    PublishedClusterRow {
        parallelism: "Pipe+tensor",
        method: Method::Baseline,
        batch: 2416,
        tensor: 8,
        gpus: 1280,
        offloadable_gib: 47.9,
        non_offloadable_gib: 6.27,
        efficiency: 0.91,
        time_days: 199.0,
        max_data: Some(1),
        max_pipe: None,
        max_tensor: None,
        min_pipe: Some(2),
        fixed_tensor: None,
    },
    PublishedClusterRow {
        parallelism: "3d",
        method: Method::Improved,
        batch: 792,
        tensor: 2,
        gpus: 1320,
        offloadable_gib: 22.4,
        non_offloadable_gib: 25.1,
        efficiency: 0.97,
        time_days: 180.0,
        max_data: None,
        max_pipe: None,
        max_tensor: None,
        min_pipe: Some(2),
        fixed_tensor: Some(2),
    },
    PublishedClusterRow {
        parallelism: "Data+pipe",
        method: Method::Improved,
        batch: 1572,
        tensor: 1,
        gpus: 1310,
        offloadable_gib: 34.2,
        non_offloadable_gib: 50.2,
        efficiency: 0.98,
        time_days: 180.0,
        max_data: None,
        max_pipe: None,
        max_tensor: Some(1),
        min_pipe: Some(2),
        fixed_tensor: None,
    },
    PublishedClusterRow {
        parallelism: "3d",
        method: Method::Improved,
        batch: 102,
        tensor: 16,
        gpus: 1360,
        offloadable_gib: 11.8,
        non_offloadable_gib: 3.14,
        efficiency: 0.91,
        time_days: 186.0,
        max_data: None,
        max_pipe: None,
        max_tensor: None,
        min_pipe: Some(2),
        fixed_tensor: Some(16),
    },
];

#[derive(Debug, Clone, Serialize)]
pub struct ClusterRow {
    pub published: PublishedClusterRow,
    pub computed: Option<PlanEvaluation<f64>>,
}

/// Regenerate the smaller-cluster table: each row is the smallest cluster
/// meeting the row's published time under its scenario restrictions. The
/// published times are rounded to whole days, so the deadline carries a 1%
/// rounding allowance.
pub fn clusters_table(profile: &HardwareProfile<f64>) -> Result<Vec<ClusterRow>> {
    let shape = x_model(160)?;
    Ok(PUBLISHED_CLUSTERS
        .iter()
        .map(|row| {
            let constraints = OptimizerConstraints {
                max_data: row.max_data,
                max_pipe: row.max_pipe,
                max_tensor: row.max_tensor,
                min_pipe: row.min_pipe,
                fixed_tensor: row.fixed_tensor,
                ..OptimizerConstraints::default()
            };
            let strategy = Strategy::from_method(row.method);
            let deadline = row.time_days * 1.01 * SECONDS_PER_DAY;
            ClusterRow {
                published: *row,
                computed: min_cluster_for_deadline(
                    &shape,
                    profile,
                    strategy,
                    deadline,
                    &constraints,
                ),
            }
        })
        .collect())
}

/// Evaluate one published configuration as-is (the `analyze` entry point
/// for named plans).
pub fn evaluate_published_row(
    profile: &HardwareProfile<f64>,
    row: &PublishedSpeedRow,
) -> Result<PlanEvaluation<f64>> {
    let shape = x_model(160)?;
    let strategy = Strategy::from_method(row.method).with_offload(row.offload, row.offload);
    let plan = ParallelPlan::new(
        strategy,
        row.data,
        row.pipe,
        row.tensor,
        row.micro_batches,
        row.micro_batch_size,
    );
    evaluate(&shape, &plan, profile, &OptimizerConstraints::default())
}

/// Named plan lookup for the CLI: `3d-improved`, `data-baseline`, `none`, ...
pub fn named_plan(name: &str) -> Option<&'static PublishedSpeedRow> {
    let key = |row: &PublishedSpeedRow| {
        format!(
            "{}-{}",
            row.parallelism.to_lowercase().replace('+', "-"),
            row.method.label().to_lowercase()
        )
    };
    PUBLISHED_SPEED.iter().find(|row| {
        let full = key(row);
        full == name || (name == "none" && row.parallelism == "None")
    })
}

pub fn named_plan_keys() -> Vec<String> {
    PUBLISHED_SPEED
        .iter()
        .map(|row| {
            if row.parallelism == "None" {
                "none".to_string()
            } else {
                format!(
                    "{}-{}",
                    row.parallelism.to_lowercase().replace('+', "-"),
                    row.method.label().to_lowercase()
                )
            }
        })
        .collect()
}

/// The scaling-limit figures: largest trainable sizes for the improved
/// strategy under a time budget.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingLimits {
    pub profile: String,
    pub one_month_params: Option<f64>,
    pub one_year_params: Option<f64>,
    pub one_month_memory_gib: Option<f64>,
}

/// Sweep the improved strategy over even X indices and report the one-month
/// and one-year size limits.
pub fn scaling_limits(profile: &HardwareProfile<f64>, xs: &[u64]) -> Result<ScalingLimits> {
    let report = optimizer::scaling_sweep(
        xs,
        profile,
        &[Method::Improved],
        &OptimizerConstraints::default(),
    )?;
    Ok(ScalingLimits {
        profile: profile.name.clone(),
        one_month_params: report.limits[0].one_month_params,
        one_year_params: report.limits[0].one_year_params,
        one_month_memory_gib: report.limits[0].one_month_memory_gib,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_rows_within_one_percent() {
        for row in models_table() {
            assert!(row.params_deviation() <= 0.01, "{}: p", row.name);
            assert!(row.critical_batch_deviation() <= 0.01, "{}: b_c", row.name);
        }
    }

    #[test]
    fn named_plans_resolve() {
        assert!(named_plan("3d-improved").is_some());
        assert!(named_plan("none").is_some());
        assert!(named_plan("data-tensor-partitioned").is_some());
        assert!(named_plan("warp-drive").is_none());
    }

    #[test]
    fn memory_table_matches_published_cells() {
        for row in memory_table().unwrap() {
            let dev = row.deviations();
            for (i, d) in dev.iter().enumerate() {
                let tolerance = if i == 3 { 0.10 } else { 0.05 };
                assert!(
                    *d <= tolerance,
                    "{} {}: cell {i} computed {} vs published {}",
                    row.parallelism,
                    row.method.label(),
                    row.computed_gib[i],
                    row.published_gib[i]
                );
            }
        }
    }
}
