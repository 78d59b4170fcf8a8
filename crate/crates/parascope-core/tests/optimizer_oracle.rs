//! Brute-force oracle for the configuration search: on small shapes the
//! rule-guided `fastest_plan` must never lose to a full enumeration over
//! the divisor grid.

use parascope_core::cost::{Method, ParallelPlan, Strategy};
use parascope_core::hardware::HardwareProfile;
use parascope_core::model::x_model;
use parascope_core::optimizer::{
    evaluate, fastest_plan, resolve_offload, OptimizerConstraints, PlanEvaluation,
};

fn divisors(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    for d in 1..=n {
        if n.is_multiple_of(d) {
            out.push(d);
        }
    }
    out
}

/// Enumerate every plan on the spec'd oracle grid: b up to the critical
/// batch, n_b over divisors of b, micro splits over divisors of b/n_b,
/// n_l free up to the layer count, n_a over the power-of-two grid.
fn brute_force_best(
    shape: &parascope_core::model::ModelShape,
    profile: &HardwareProfile<f64>,
    strategy: Strategy,
    constraints: &OptimizerConstraints<f64>,
) -> Option<PlanEvaluation<f64>> {
    let critical: f64 = shape.critical_batch();
    let batch_max = critical.floor() as u64;
    let mut best: Option<PlanEvaluation<f64>> = None;
    for batch in 1..=batch_max {
        for data in divisors(batch) {
            let per_instance = batch / data;
            for micro in divisors(per_instance) {
                let size = per_instance / micro;
                for pipe in 1..=shape.layers.min(micro) {
                    for tensor in [1u64, 2, 4, 8, 16] {
                        let plan = resolve_offload(
                            shape,
                            profile,
                            ParallelPlan::new(strategy, data, pipe, tensor, micro, size),
                            constraints.allow_offload,
                        );
                        let Ok(eval) = evaluate(shape, &plan, profile, constraints) else {
                            continue;
                        };
                        if !eval.feasible {
                            continue;
                        }
                        let replace = match &best {
                            None => true,
                            Some(b) => eval.training_time < b.training_time * (1.0 - 1e-12),
                        };
                        if replace {
                            best = Some(eval);
                        }
                    }
                }
            }
        }
    }
    best
}

#[test]
fn fastest_plan_matches_brute_force_on_small_shapes() {
    let profile = HardwareProfile::<f64>::a100_80g();
    let constraints = OptimizerConstraints::default();
    for x in [2u64, 4, 6, 8] {
        let shape = x_model(x).unwrap();
        for method in [Method::Baseline, Method::Partitioned, Method::Improved] {
            let strategy = Strategy::from_method(method);
            let fast = fastest_plan(&shape, &profile, strategy, &constraints);
            let brute = brute_force_best(&shape, &profile, strategy, &constraints);
            match (&fast, &brute) {
                (Some(f), Some(b)) => {
                    assert!(
                        f.training_time <= b.training_time * (1.0 + 1e-9),
                        "X_{x} {method:?}: search {}s vs brute force {}s ({:?} vs {:?})",
                        f.training_time,
                        b.training_time,
                        f.plan,
                        b.plan
                    );
                }
                (None, Some(b)) => panic!(
                    "X_{x} {method:?}: search found nothing, brute force found {:?}",
                    b.plan
                ),
                (Some(_), None) | (None, None) => {}
            }
        }
    }
}

#[test]
fn fastest_plan_results_satisfy_constraints() {
    let profile = HardwareProfile::<f64>::a100_80g();
    let constraints = OptimizerConstraints::default();
    for x in [2u64, 4, 8, 16, 32, 160] {
        let shape = x_model(x).unwrap();
        for method in [Method::Baseline, Method::Partitioned, Method::Improved] {
            let Some(eval) = fastest_plan(
                &shape,
                &profile,
                Strategy::from_method(method),
                &constraints,
            ) else {
                continue;
            };
            let bc: f64 = shape.critical_batch();
            assert!(eval.plan.batch() as f64 <= bc, "X_{x} {method:?}: b > b_c");
            assert!(eval.feasible);
            assert!(eval.violations.is_empty());
            let strat = eval.plan.strategy;
            let resident = eval
                .memory
                .resident(strat.offload_state, strat.offload_checkpoints);
            assert!(resident <= profile.memory, "X_{x} {method:?}: memory");
        }
    }
}

#[test]
fn improved_never_slower_than_baseline_across_scales() {
    let profile = HardwareProfile::<f64>::a100_80g();
    let constraints = OptimizerConstraints::default();
    for x in [8u64, 16, 32, 64, 108, 160, 220] {
        let shape = x_model(x).unwrap();
        let improved = fastest_plan(&shape, &profile, Strategy::improved(), &constraints)
            .map(|e| e.training_time)
            .unwrap_or(f64::INFINITY);
        let baseline = fastest_plan(&shape, &profile, Strategy::baseline(), &constraints)
            .map(|e| e.training_time)
            .unwrap_or(f64::INFINITY);
        assert!(
            improved <= baseline * (1.0 + 1e-9),
            "X_{x}: improved {improved} vs baseline {baseline}"
        );
    }
}
