//! Declarative scenario files: model, hardware profile, strategies and
//! optimizer constraints in one TOML document, shared by the CLI and the
//! sweep tooling.
//!
//! ```toml
//! strategies = ["baseline", "partitioned", "improved"]
//!
//! [model]
//! x = 160              # or explicit d_l / d_a / d_h / d_s / n_i
//!
//! [profile]
//! name = "a100-80g-ib" # or inline c_gpu_tflops / m_gpu_gib / bandwidth_gib
//!
//! [constraints]
//! epsilon = 0.25
//! steps = 100000
//! deadline_days = 32
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::cost::Method;
use crate::hardware::{HardwareProfile, LinkClass, GIB};
use crate::model::{x_model, ModelShape};
use crate::optimizer::OptimizerConstraints;
use crate::{Error, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    model: Option<ModelSpec>,
    profile: Option<ProfileSpec>,
    strategies: Option<Vec<String>>,
    constraints: Option<ConstraintSpec>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSpec {
    x: Option<u64>,
    d_l: Option<u64>,
    d_a: Option<u64>,
    d_h: Option<u64>,
    d_s: Option<u64>,
    n_i: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileSpec {
    name: Option<String>,
    c_gpu_tflops: Option<f64>,
    m_gpu_gib: Option<f64>,
    bandwidth_gib: Option<BTreeMap<String, f64>>,
    /// 0 removes the node-size limit.
    max_node_size: Option<u64>,
    gpus_per_node: Option<u64>,
    inter_node: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintSpec {
    epsilon: Option<f64>,
    steps: Option<u64>,
    deadline_days: Option<f64>,
    max_gpus: Option<u64>,
    allow_offload: Option<bool>,
    max_nb: Option<u64>,
    max_nl: Option<u64>,
    max_na: Option<u64>,
}

/// A resolved scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub shape: Option<ModelShape>,
    pub profile: HardwareProfile<f64>,
    pub strategies: Vec<Method>,
    pub constraints: OptimizerConstraints<f64>,
    pub deadline_days: Option<f64>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            shape: None,
            profile: HardwareProfile::a100_80g(),
            strategies: vec![Method::Baseline, Method::Partitioned, Method::Improved],
            constraints: OptimizerConstraints::default(),
            deadline_days: None,
        }
    }
}

pub fn parse_method(name: &str) -> Result<Method> {
    match name {
        "baseline" => Ok(Method::Baseline),
        "partitioned" => Ok(Method::Partitioned),
        "improved" => Ok(Method::Improved),
        other => Err(Error::InvalidConfig(format!(
            "unknown strategy `{other}` (expected baseline, partitioned or improved)"
        ))),
    }
}

pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Scenario> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut scenario = Scenario::default();

    if let Some(model) = file.model {
        scenario.shape = Some(resolve_model(&model)?);
    }
    if let Some(profile) = file.profile {
        scenario.profile = resolve_profile(&profile)?;
    }
    if let Some(names) = file.strategies {
        scenario.strategies = names
            .iter()
            .map(|n| parse_method(n))
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(c) = file.constraints {
        if let Some(eps) = c.epsilon {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "epsilon must be in (0, 1], got {eps}"
                )));
            }
            scenario.constraints.max_overhead = eps;
        }
        if let Some(steps) = c.steps {
            if steps == 0 {
                return Err(Error::InvalidConfig("steps must be >= 1".into()));
            }
            scenario.constraints.steps = steps;
        }
        scenario.constraints.max_gpus = c.max_gpus;
        if let Some(allow) = c.allow_offload {
            scenario.constraints.allow_offload = allow;
        }
        scenario.constraints.max_data = c.max_nb;
        scenario.constraints.max_pipe = c.max_nl;
        scenario.constraints.max_tensor = c.max_na;
        scenario.deadline_days = c.deadline_days;
    }
    Ok(scenario)
}

fn resolve_model(spec: &ModelSpec) -> Result<ModelShape> {
    if let Some(x) = spec.x {
        if spec.d_l.or(spec.d_a).or(spec.d_h).or(spec.d_s).is_some() {
            return Err(Error::InvalidConfig(
                "model: give either x or explicit dimensions, not both".into(),
            ));
        }
        return x_model(x);
    }
    let (Some(d_l), Some(d_a), Some(d_h), Some(d_s)) = (spec.d_l, spec.d_a, spec.d_h, spec.d_s)
    else {
        return Err(Error::InvalidConfig(
            "model: need x or all of d_l, d_a, d_h, d_s".into(),
        ));
    };
    ModelShape::with_ff_mult(d_l, d_a, d_h, d_s, spec.n_i.unwrap_or(4))
}

fn resolve_profile(spec: &ProfileSpec) -> Result<HardwareProfile<f64>> {
    let mut profile = match &spec.name {
        Some(name) => HardwareProfile::named(name)?,
        None => HardwareProfile::a100_80g(),
    };
    if let Some(tflops) = spec.c_gpu_tflops {
        profile.compute = tflops * 1e12;
    }
    if let Some(mem) = spec.m_gpu_gib {
        profile.memory = mem * GIB;
    }
    if let Some(bandwidths) = &spec.bandwidth_gib {
        for (key, value) in bandwidths {
            let link = LinkClass::from_str(key)?;
            if *value <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "bandwidth_gib.{key} must be positive"
                )));
            }
            profile.set_bandwidth(link, value * GIB);
        }
    }
    if let Some(node) = spec.max_node_size {
        profile.max_node_size = if node == 0 { None } else { Some(node) };
    }
    if let Some(gpus) = spec.gpus_per_node {
        profile.gpus_per_node = gpus;
    }
    if let Some(link) = &spec.inter_node {
        profile.inter_node = LinkClass::from_str(link)?;
    }
    Ok(profile)
}
