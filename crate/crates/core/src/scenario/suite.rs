use std::fmt;

use rayon::prelude::*;

use super::perturb::{perturb_scene, Perturbation};
use super::{generate_scenario, Complexity, Factor, ScenarioInstance, ScenarioSpec};
use crate::adaptation::{adapt, AdaptationReport};
use crate::executor::rollout;
use crate::metrics::{CellSummary, MetricsConfig, MetricsTable, TaskOutcome};
use crate::proposers::{Proposer, SearchProposer};
use crate::symbolic::ObjectUniverse;
use crate::world_model::{build_world_model_in, DEFAULT_RETRY_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FactorGroup {
    Environment,
    Embodiment,
    Combination,
}

impl FactorGroup {
    pub const ALL: [FactorGroup; 3] = [FactorGroup::Environment, FactorGroup::Embodiment, FactorGroup::Combination];

    pub fn as_str(self) -> &'static str {
        match self {
            FactorGroup::Environment => "obstruction_affordance",
            FactorGroup::Embodiment => "kinematic_gripper",
            FactorGroup::Combination => "combination",
        }
    }

    /// Scenario counts per complexity tier in the full profile.
    fn full_counts(self) -> [usize; 3] {
        match self {
            FactorGroup::Combination => [40, 40, 40],
            _ => [60, 60, 40],
        }
    }
}

impl fmt::Display for FactorGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteProfile {
    Full,
    /// Ten scenarios per cell.
    Mini,
}

/// Exploration budgets per tier: low/medium share one value, high has its
/// own, and combined gaps get a separate pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budgets {
    pub single: (usize, usize),
    pub combined: (usize, usize),
}

impl Budgets {
    pub fn tiered() -> Self {
        Budgets {
            single: (10, 20),
            combined: (15, 30),
        }
    }

    pub fn uniform(b: usize) -> Self {
        Budgets {
            single: (b, b),
            combined: (b, b),
        }
    }

    pub fn for_spec(&self, spec: &ScenarioSpec) -> usize {
        let (lm, high) = if spec.factor() == Factor::Combination {
            self.combined
        } else {
            self.single
        };
        if spec.complexity() == Complexity::High {
            high
        } else {
            lm
        }
    }
}

/// Environment cells cycle through these factors, two seeds each.
const ENVIRONMENT_FACTORS: [Factor; 4] = [
    Factor::Obstruction(0),
    Factor::Obstruction(1),
    Factor::Obstruction(2),
    Factor::Affordance,
];

pub fn standard_suite(profile: SuiteProfile, base_seed: u64) -> Vec<ScenarioSpec> {
    let mut out = Vec::new();
    for (gi, group) in FactorGroup::ALL.into_iter().enumerate() {
        for (ci, complexity) in Complexity::ALL.into_iter().enumerate() {
            let n = match profile {
                SuiteProfile::Full => group.full_counts()[ci],
                SuiteProfile::Mini => 10,
            };
            for i in 0..n {
                let factor = match group {
                    FactorGroup::Environment => ENVIRONMENT_FACTORS[(i / 2) % ENVIRONMENT_FACTORS.len()],
                    FactorGroup::Embodiment => Factor::KinematicGripper,
                    FactorGroup::Combination => Factor::Combination,
                };
                let seed = base_seed
                    .wrapping_mul(1_000_003)
                    .wrapping_add(((gi * 3 + ci) * 10_000 + i) as u64);
                out.push(ScenarioSpec::sampled(complexity, factor, seed).expect("valid suite spec"));
            }
        }
    }
    out
}

/// `n` level-0 specs spread over the three tiers.
pub fn zero_gap_suite(n: usize, base_seed: u64) -> Vec<ScenarioSpec> {
    (0..n)
        .map(|i| {
            let c = Complexity::ALL[i % 3];
            ScenarioSpec::sampled(c, Factor::Obstruction(0), base_seed.wrapping_add(i as u64)).expect("valid spec")
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub id: String,
    pub spec: ScenarioSpec,
    pub budget: usize,
    pub outcome: TaskOutcome,
    /// Absent when the run failed before adaptation finished.
    pub report: Option<AdaptationReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    /// Sorted by scenario id.
    pub results: Vec<ScenarioResult>,
    pub table: MetricsTable,
}

fn failed(inst: &ScenarioInstance, budget: usize, error: String) -> ScenarioResult {
    let demo = inst.label_sequence(&inst.demo_procedure);
    ScenarioResult {
        id: inst.id.clone(),
        spec: inst.spec.clone(),
        budget,
        outcome: TaskOutcome {
            task_id: inst.id.clone(),
            subtasks_total: inst.subtask_goals.len(),
            subtasks_achieved: 0,
            success: false,
            demo_sequence: demo,
            adapted_sequence: Vec::new(),
        },
        report: None,
        error: Some(error),
    }
}

/// Builds the world model from the demonstration (operators recovered from
/// the library), adapts it to the deployment scene and scores the result
/// by replaying the adapted procedure.
pub fn evaluate_instance(
    inst: &ScenarioInstance,
    proposer: &mut dyn Proposer,
    budget: usize,
    perturbation: Option<Perturbation>,
) -> ScenarioResult {
    let mut recover = SearchProposer::new(inst.operator_library.iter().cloned(), 1);
    let model = match build_world_model_in(
        &inst.demonstration,
        &mut recover,
        DEFAULT_RETRY_LIMIT,
        &ObjectUniverse::new(),
        &inst.vocabulary(),
    ) {
        Ok(m) => m,
        Err(e) => return failed(inst, budget, format!("world model: {e}")),
    };
    let initial = match perturbation {
        None => inst.deployment_initial.clone(),
        Some(p) => match perturb_scene(&inst.deployment_initial, p.mode, p.fraction, p.seed) {
            Ok(s) => s,
            Err(e) => return failed(inst, budget, e.to_string()),
        },
    };
    let report = match adapt(&model, &initial, &inst.goal, proposer, budget) {
        Ok(r) => r,
        Err(e) => return failed(inst, budget, format!("adaptation: {e}")),
    };
    let run = match rollout(&initial, &report.adapted, &report.universe) {
        Ok(r) => r,
        Err(e) => return failed(inst, budget, format!("replay: {e}")),
    };
    let end = run.final_state();
    let achieved = inst.subtask_goals.iter().filter(|g| g.achieved(end)).count();
    let total = inst.subtask_goals.len();
    let outcome = TaskOutcome {
        task_id: inst.id.clone(),
        subtasks_total: total,
        subtasks_achieved: achieved,
        success: run.is_clean() && achieved == total,
        demo_sequence: inst.label_sequence(&model.procedure),
        adapted_sequence: inst.label_sequence(&report.adapted),
    };
    ScenarioResult {
        id: inst.id.clone(),
        spec: inst.spec.clone(),
        budget,
        outcome,
        report: Some(report),
        error: None,
    }
}

pub fn evaluate_suite<F>(specs: &[ScenarioSpec], make_proposer: F, budgets: &Budgets) -> SuiteReport
where
    F: Fn(&ScenarioInstance) -> Box<dyn Proposer> + Sync,
{
    evaluate_suite_with(specs, make_proposer, budgets, None, MetricsConfig::default())
}

/// Runs every scenario in parallel and aggregates one table row per
/// (factor group, complexity) cell that has scenarios.
pub fn evaluate_suite_with<F>(
    specs: &[ScenarioSpec],
    make_proposer: F,
    budgets: &Budgets,
    perturbation: Option<Perturbation>,
    config: MetricsConfig,
) -> SuiteReport
where
    F: Fn(&ScenarioInstance) -> Box<dyn Proposer> + Sync,
{
    let mut results: Vec<ScenarioResult> = specs
        .par_iter()
        .map(|spec| {
            let inst = generate_scenario(spec);
            let budget = budgets.for_spec(spec);
            let mut proposer = make_proposer(&inst);
            evaluate_instance(&inst, proposer.as_mut(), budget, perturbation)
        })
        .collect();
    results.sort_by(|a, b| a.id.cmp(&b.id));

    let mut cells = Vec::new();
    for group in FactorGroup::ALL {
        for complexity in Complexity::ALL {
            let outcomes: Vec<TaskOutcome> = results
                .iter()
                .filter(|r| r.spec.factor().group() == group && r.spec.complexity() == complexity)
                .map(|r| r.outcome.clone())
                .collect();
            if outcomes.is_empty() {
                continue;
            }
            cells.push(
                CellSummary::from_outcomes(group.as_str(), complexity.as_str(), &outcomes, config)
                    .expect("outcomes are built valid"),
            );
        }
    }
    SuiteReport {
        results,
        table: MetricsTable { cells },
    }
}
