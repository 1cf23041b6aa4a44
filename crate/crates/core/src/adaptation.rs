//! Counterfactual adaptation: roll the demonstrated procedure out from a
//! deployment state, and repair the first inconsistency with a proposer patch
//! until the goal holds or the exploration budget runs out.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::executor::rollout;
use crate::proposers::{PatchContext, Payload, Proposer, ProposerContext, ProposerError};
use crate::symbolic::{
    state_diff, ActionOperator, Atom, Literal, ObjectName, ObjectUniverse, OpRef, State,
    SymbolicError,
};
use crate::world_model::WorldModel;

/// Predicates that describe the scene rather than the robot.
pub const PHYSICS_GROUP: [&str; 5] = ["OverOf", "OnTopOf", "InsideOf", "Open", "Closed"];

/// Rewrite of one contiguous window of a procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub search: Vec<OpRef>,
    pub replace: Vec<OpRef>,
    pub rationale: String,
}

impl Patch {
    pub fn new(search: Vec<OpRef>, replace: Vec<OpRef>, rationale: impl Into<String>) -> Self {
        Patch {
            search,
            replace,
            rationale: rationale.into(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.search == self.replace
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatchError {
    #[error("SEARCH block is empty")]
    EmptySearch,
    #[error("SEARCH block matches no window of the procedure")]
    NoMatch,
    #[error("SEARCH block matches {count} windows of the procedure")]
    Ambiguous { count: usize },
}

fn same_ops(a: &[OpRef], b: &[OpRef]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| Arc::ptr_eq(x, y) || **x == **y)
}

/// Start index of the unique window of `procedure` equal to `search`.
pub fn find_window(procedure: &[OpRef], search: &[OpRef]) -> Result<usize, PatchError> {
    if search.is_empty() {
        return Err(PatchError::EmptySearch);
    }
    if search.len() > procedure.len() {
        return Err(PatchError::NoMatch);
    }
    let hits: Vec<usize> = (0..=procedure.len() - search.len())
        .filter(|&i| same_ops(&procedure[i..i + search.len()], search))
        .collect();
    match hits.as_slice() {
        [] => Err(PatchError::NoMatch),
        [w] => Ok(*w),
        many => Err(PatchError::Ambiguous { count: many.len() }),
    }
}

/// Replaces the unique window matching `patch.search`. Operators outside the
/// window are the same shared values as in `procedure`.
pub fn apply_patch(procedure: &[OpRef], patch: &Patch) -> Result<Vec<OpRef>, PatchError> {
    let w = find_window(procedure, &patch.search)?;
    Ok(splice(procedure, w, patch.search.len(), &patch.replace))
}

pub(crate) fn splice<T: Clone>(items: &[T], at: usize, remove: usize, insert: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(items.len() - remove + insert.len());
    out.extend_from_slice(&items[..at]);
    out.extend_from_slice(insert);
    out.extend_from_slice(&items[at + remove..]);
    out
}

/// Atoms that must hold and atoms that must not.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Goal {
    pub required: BTreeSet<Atom>,
    pub forbidden: BTreeSet<Atom>,
}

impl Goal {
    /// Fails with the first atom found on both sides.
    pub fn new(
        required: impl IntoIterator<Item = Atom>,
        forbidden: impl IntoIterator<Item = Atom>,
    ) -> Result<Self, Atom> {
        let required: BTreeSet<Atom> = required.into_iter().collect();
        let forbidden: BTreeSet<Atom> = forbidden.into_iter().collect();
        if let Some(a) = required.intersection(&forbidden).next() {
            return Err(a.clone());
        }
        Ok(Goal {
            required,
            forbidden,
        })
    }

    pub fn required(atoms: impl IntoIterator<Item = Atom>) -> Self {
        Goal {
            required: atoms.into_iter().collect(),
            forbidden: BTreeSet::new(),
        }
    }

    /// Goal literals that do not hold in `state`, sorted.
    pub fn unmet(&self, state: &State) -> Vec<Literal> {
        let mut out: Vec<Literal> = self
            .required
            .iter()
            .filter(|a| !state.contains(a))
            .cloned()
            .map(Literal::pos)
            .chain(
                self.forbidden
                    .iter()
                    .filter(|a| state.contains(a))
                    .cloned()
                    .map(Literal::neg),
            )
            .collect();
        out.sort();
        out
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectName> {
        self.required
            .iter()
            .chain(&self.forbidden)
            .flat_map(|a| a.args())
    }
}

pub fn goal_satisfied(state: &State, goal: &Goal) -> bool {
    goal.required.iter().all(|a| state.contains(a))
        && goal.forbidden.iter().all(|a| !state.contains(a))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ObjectMapping {
    #[default]
    Identity,
    /// Demonstration object to deployment object; unlisted objects are
    /// unmapped.
    Map(BTreeMap<ObjectName, ObjectName>),
}

/// How the final demonstration frame is turned into a deployment goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalProjection {
    /// Predicates to keep; `None` keeps every predicate.
    pub keep: Option<BTreeSet<String>>,
    pub mapping: ObjectMapping,
}

impl Default for GoalProjection {
    fn default() -> Self {
        GoalProjection {
            keep: Some(PHYSICS_GROUP.iter().map(|s| s.to_string()).collect()),
            mapping: ObjectMapping::Identity,
        }
    }
}

impl GoalProjection {
    pub fn keep_all() -> Self {
        GoalProjection {
            keep: None,
            mapping: ObjectMapping::Identity,
        }
    }

    pub fn keeping<'a>(predicates: impl IntoIterator<Item = &'a str>) -> Self {
        GoalProjection {
            keep: Some(predicates.into_iter().map(str::to_string).collect()),
            mapping: ObjectMapping::Identity,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProjectionError {
    #[error("object `{object}` of {atom} has no deployment counterpart; supply an explicit goal")]
    UnmappedObject { object: String, atom: String },
}

/// Required atoms are the kept atoms of `final_demo_state` with their
/// objects mapped; nothing is forbidden.
pub fn derive_goal(final_demo_state: &State, projection: &GoalProjection) -> Result<Goal, ProjectionError> {
    let mut required = BTreeSet::new();
    for atom in final_demo_state.iter() {
        if let Some(keep) = &projection.keep {
            if !keep.contains(atom.predicate()) {
                continue;
            }
        }
        let mapped = match &projection.mapping {
            ObjectMapping::Identity => atom.clone(),
            ObjectMapping::Map(m) => {
                let args = atom
                    .args()
                    .iter()
                    .map(|o| {
                        m.get(o).cloned().ok_or_else(|| ProjectionError::UnmappedObject {
                            object: o.to_string(),
                            atom: atom.to_string(),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Atom::new(atom.predicate(), args).expect("predicate already valid")
            }
        };
        required.insert(mapped);
    }
    Ok(Goal {
        required,
        forbidden: BTreeSet::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdaptationStatus {
    Success,
    BudgetExhausted,
    PatchRejected,
    Stuck,
}

impl fmt::Display for AdaptationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdaptationStatus::Success => "success",
            AdaptationStatus::BudgetExhausted => "budget_exhausted",
            AdaptationStatus::PatchRejected => "patch_rejected",
            AdaptationStatus::Stuck => "stuck",
        })
    }
}

/// The first problem of a rollout: a failing action, or a goal gap after a
/// clean rollout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InconsistencyRecord {
    pub index: usize,
    /// `None` for a goal gap.
    pub action: Option<String>,
    pub violated: Vec<Literal>,
}

impl InconsistencyRecord {
    /// Same failing action name and the same literals, wherever it sits.
    pub(crate) fn same_as(&self, other: &InconsistencyRecord) -> bool {
        self.action == other.action && self.violated == other.violated
    }
}

impl fmt::Display for InconsistencyRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.action {
            Some(a) => write!(f, "step {} `{a}` unmet:", self.index + 1)?,
            None => f.write_str("goal unmet:")?,
        }
        for l in &self.violated {
            write!(f, " {l}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatchOutcome {
    Accepted,
    Rejected(String),
    Declined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchLogEntry {
    /// 1-based exploration number.
    pub iteration: usize,
    pub inconsistency: InconsistencyRecord,
    pub patch: Option<Patch>,
    pub rationale: String,
    pub outcome: PatchOutcome,
    /// Demonstration step the failing action came from, when known.
    pub anchor: Option<usize>,
    /// Rejection reason passed along with this request.
    pub rejection_reason: Option<String>,
}

impl PatchLogEntry {
    pub fn to_json(&self) -> serde_json::Value {
        let (outcome, reason) = match &self.outcome {
            PatchOutcome::Accepted => ("accepted", None),
            PatchOutcome::Rejected(r) => ("rejected", Some(r.clone())),
            PatchOutcome::Declined => ("declined", None),
        };
        serde_json::json!({
            "iteration": self.iteration,
            "step": self.inconsistency.action.as_ref().map(|_| self.inconsistency.index + 1),
            "action": self.inconsistency.action,
            "violated": self.inconsistency.violated.iter().map(|l| l.to_string()).collect::<Vec<_>>(),
            "anchor": self.anchor,
            "outcome": outcome,
            "rejected_because": reason,
            "retry_of": self.rejection_reason,
            "rationale": self.rationale,
            "patch": self.patch.as_ref().map(crate::pddl_io::serialize_patch),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationReport {
    pub status: AdaptationStatus,
    /// The adapted procedure, or the best one reached before stopping.
    pub adapted: Vec<OpRef>,
    pub patches: Vec<PatchLogEntry>,
    /// Rollout of `adapted` from the deployment state.
    pub counterfactual_states: Vec<State>,
    pub explorations_used: usize,
    pub transport_errors: usize,
    pub universe: ObjectUniverse,
}

impl AdaptationReport {
    /// Status, adapted procedure names and the full patch log; patches are
    /// embedded in their SEARCH/REPLACE text form.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        let log: Vec<serde_json::Value> = self.patches.iter().map(PatchLogEntry::to_json).collect();
        json!({
            "status": self.status.to_string(),
            "explorations_used": self.explorations_used,
            "transport_errors": self.transport_errors,
            "adapted": self.adapted.iter().map(|o| o.name.clone()).collect::<Vec<_>>(),
            "final_state": self.counterfactual_states.last().map(|s| s.iter().map(|a| a.to_string()).collect::<Vec<_>>()),
            "patches": log,
        })
    }

    pub fn accepted_patches(&self) -> impl Iterator<Item = &Patch> {
        self.patches
            .iter()
            .filter(|e| e.outcome == PatchOutcome::Accepted)
            .filter_map(|e| e.patch.as_ref())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdaptError {
    #[error("exploration budget must be at least 1")]
    ZeroBudget,
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

pub(crate) struct Probe {
    pub(crate) record: InconsistencyRecord,
    pub(crate) trace: Vec<State>,
    pub(crate) clean_success: bool,
}

pub(crate) fn probe(
    initial: &State,
    procedure: &[OpRef],
    universe: &ObjectUniverse,
    goal: &Goal,
) -> Result<Probe, SymbolicError> {
    let r = rollout(initial, procedure, universe)?;
    Ok(match r.first_inconsistency {
        Some(inc) => Probe {
            record: InconsistencyRecord {
                index: inc.index,
                action: Some(procedure[inc.index].name.clone()),
                violated: inc.violations.into_iter().map(|v| v.literal).collect(),
            },
            trace: r.states,
            clean_success: false,
        },
        None => {
            let unmet = goal.unmet(r.final_state());
            Probe {
                clean_success: unmet.is_empty(),
                record: InconsistencyRecord {
                    index: procedure.len(),
                    action: None,
                    violated: unmet,
                },
                trace: r.states,
            }
        }
    })
}

/// Checks a proposed patch; returns the patched procedure and its origins.
fn vet_patch(
    patch: &Patch,
    procedure: &[OpRef],
    origins: &[Option<usize>],
    current: &InconsistencyRecord,
    initial: &State,
    universe: &ObjectUniverse,
    goal: &Goal,
) -> Result<(Vec<OpRef>, Vec<Option<usize>>), String> {
    for op in patch.search.iter().chain(&patch.replace) {
        op.check_grounded(universe).map_err(|e| e.to_string())?;
    }
    let w = find_window(procedure, &patch.search).map_err(|e| e.to_string())?;
    let next = splice(procedure, w, patch.search.len(), &patch.replace);
    let next_origins = splice(origins, w, patch.search.len(), &vec![None; patch.replace.len()]);
    let after = probe(initial, &next, universe, goal).map_err(|e| e.to_string())?;
    if after.record.action.is_some() && after.record.index < w + patch.replace.len() {
        return Err(format!("patched window does not execute: {}", after.record));
    }
    if !after.clean_success && after.record.same_as(current) {
        return Err(format!("inconsistency unchanged: {}", after.record));
    }
    Ok((next, next_origins))
}

/// Runs the identify-explore loop. Every proposer request, including the
/// single retry after a rejected patch, uses one exploration.
pub fn adapt(
    model: &WorldModel,
    counterfactual_initial: &State,
    goal: &Goal,
    proposer: &mut dyn Proposer,
    budget: usize,
) -> Result<AdaptationReport, AdaptError> {
    if budget == 0 {
        return Err(AdaptError::ZeroBudget);
    }
    let mut universe = model.universe.clone();
    universe.extend_with_state(counterfactual_initial);
    for o in goal.objects() {
        universe.insert(o.clone(), crate::symbolic::ROOT_TYPE);
    }

    let mut procedure = model.procedure.clone();
    let mut origins: Vec<Option<usize>> = (0..procedure.len()).map(Some).collect();
    let mut log = Vec::new();
    let mut explorations = 0;
    let mut transport_errors = 0;
    let mut pending_reason: Option<String> = None;

    let status = loop {
        let current = probe(counterfactual_initial, &procedure, &universe, goal)?;
        if current.clean_success {
            break AdaptationStatus::Success;
        }
        if explorations == budget {
            break AdaptationStatus::BudgetExhausted;
        }
        explorations += 1;

        let t = current.record.index;
        let anchor = origins.get(t).copied().flatten();
        let expected_effects = anchor.and_then(|j| {
            Some(state_diff(model.states.get(j)?, model.states.get(j + 1)?))
        });
        let retrying = pending_reason.is_some();
        let ctx = ProposerContext::Patch(PatchContext {
            instruction: model.instruction.clone(),
            universe: universe.clone(),
            procedure: procedure.clone(),
            erroneous_index: t,
            state: current.trace.last().expect("rollout keeps the initial state").clone(),
            trace: current.trace,
            violated: current.record.violated.clone(),
            goal: goal.clone(),
            rejection_reason: pending_reason.clone(),
            anchor,
            expected_effects,
        });
        let mut entry = PatchLogEntry {
            iteration: explorations,
            inconsistency: current.record.clone(),
            patch: None,
            rationale: String::new(),
            outcome: PatchOutcome::Declined,
            anchor,
            rejection_reason: pending_reason.take(),
        };

        let verdict: Result<(Vec<OpRef>, Vec<Option<usize>>), String> = match proposer.propose(&ctx) {
            Err(e) => {
                if e.is_transport() {
                    transport_errors += 1;
                }
                if let ProposerError::Malformed { raw, .. } = &e {
                    entry.rationale = raw.clone();
                }
                Err(e.to_string())
            }
            Ok(resp) => {
                entry.rationale = resp.rationale;
                match resp.payload {
                    Payload::Decline => {
                        log.push(entry);
                        break AdaptationStatus::Stuck;
                    }
                    Payload::Operator(op) => Err(format!("expected a patch, got operator {}", op.name)),
                    Payload::Patch(p) => {
                        let v = vet_patch(
                            &p,
                            &procedure,
                            &origins,
                            &current.record,
                            counterfactual_initial,
                            &universe,
                            goal,
                        );
                        entry.patch = Some(p);
                        v
                    }
                }
            }
        };
        match verdict {
            Ok((next, next_origins)) => {
                entry.outcome = PatchOutcome::Accepted;
                log.push(entry);
                procedure = next;
                origins = next_origins;
            }
            Err(reason) => {
                entry.outcome = PatchOutcome::Rejected(reason.clone());
                log.push(entry);
                if retrying {
                    break AdaptationStatus::PatchRejected;
                }
                pending_reason = Some(reason);
            }
        }
    };

    let final_roll = rollout(counterfactual_initial, &procedure, &universe)?;
    Ok(AdaptationReport {
        status,
        adapted: procedure,
        patches: log,
        counterfactual_states: final_roll.states,
        explorations_used: explorations,
        transport_errors,
        universe,
    })
}

/// Convenience for building a shared operator list.
pub fn shared(ops: impl IntoIterator<Item = ActionOperator>) -> Vec<OpRef> {
    ops.into_iter().map(Arc::new).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{Condition, EffectSpec};

    fn atom(p: &str, a: &[&str]) -> Atom {
        Atom::parse_parts(p, a).unwrap()
    }

    fn op(name: &str, add: &str) -> OpRef {
        Arc::new(
            ActionOperator::new(
                name,
                Condition::empty(),
                EffectSpec::new(vec![atom(add, &[])], vec![]).unwrap(),
            )
            .unwrap(),
        )
    }

    #[test]
    fn identity_patch_keeps_procedure() {
        let (a, b) = (op("A", "P"), op("B", "Q"));
        let proc_ = vec![a.clone(), b.clone()];
        let p = Patch::new(vec![b.clone()], vec![b.clone()], "");
        let out = apply_patch(&proc_, &p).unwrap();
        assert!(same_ops(&out, &proc_));
        assert!(Arc::ptr_eq(&out[0], &a));
    }

    #[test]
    fn ambiguous_and_missing_windows() {
        let (a, b, c) = (op("A", "P"), op("B", "Q"), op("C", "R"));
        let proc_ = vec![a.clone(), b, a.clone()];
        assert_eq!(
            apply_patch(&proc_, &Patch::new(vec![a], vec![], "")).unwrap_err(),
            PatchError::Ambiguous { count: 2 }
        );
        assert_eq!(
            apply_patch(&proc_, &Patch::new(vec![c], vec![], "")).unwrap_err(),
            PatchError::NoMatch
        );
        assert_eq!(
            apply_patch(&proc_, &Patch::new(vec![], vec![], "")).unwrap_err(),
            PatchError::EmptySearch
        );
    }

    #[test]
    fn structural_match_ignores_descriptions() {
        let a = op("A", "P");
        let described = Arc::new((*a).clone().with_semantic("do a"));
        let out = apply_patch(&[a.clone()], &Patch::new(vec![described], vec![], "")).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn goal_checks() {
        let s: State = [atom("InsideOf", &["magnetic_hook", "bottom_drawer"])]
            .into_iter()
            .collect();
        assert!(goal_satisfied(&s, &Goal::default()));
        assert!(goal_satisfied(
            &s,
            &Goal::required([atom("InsideOf", &["magnetic_hook", "bottom_drawer"])])
        ));
        let g = Goal::new([], [atom("InsideOf", &["magnetic_hook", "bottom_drawer"])]).unwrap();
        assert!(!goal_satisfied(&s, &g));
        assert_eq!(g.unmet(&s).len(), 1);
        assert!(Goal::new([atom("P", &[])], [atom("P", &[])]).is_err());
    }

    #[test]
    fn goal_projection() {
        let s: State = [
            atom("InsideOf", &["cube", "box"]),
            atom("Closed", &["box"]),
            atom("GripperOpen", &[]),
            atom("OverOf", &["cube", "box"]),
        ]
        .into_iter()
        .collect();
        assert_eq!(
            derive_goal(&s, &GoalProjection::keep_all()).unwrap().required,
            s.atoms().clone()
        );
        let g = derive_goal(&s, &GoalProjection::keeping(["InsideOf", "Closed"])).unwrap();
        assert_eq!(g.required.len(), 2);
        assert_eq!(derive_goal(&s, &GoalProjection::default()).unwrap().required.len(), 3);
        let mut m = BTreeMap::new();
        m.insert(ObjectName::new("cube").unwrap(), ObjectName::new("block").unwrap());
        let proj = GoalProjection {
            keep: None,
            mapping: ObjectMapping::Map(m),
        };
        assert!(matches!(
            derive_goal(&s, &proj),
            Err(ProjectionError::UnmappedObject { .. })
        ));
    }
}
