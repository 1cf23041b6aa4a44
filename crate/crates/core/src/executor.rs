//! Precondition-checked forward execution over symbolic states.

use std::fmt;

use thiserror::Error;

use crate::symbolic::{
    state_diff, unmet_literals, ActionOperator, Atom, Literal, ObjectUniverse, OpRef, State,
    SymbolicError,
};

/// An unmet grounded precondition of a specific action.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Violation {
    pub literal: Literal,
    pub action_index: usize,
    pub action_name: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.literal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Execution {
    Applied(State),
    Blocked(Vec<Violation>),
}

impl Execution {
    pub fn state(&self) -> Option<&State> {
        match self {
            Execution::Applied(s) => Some(s),
            Execution::Blocked(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass(State),
    Fail(Vec<Violation>),
}

pub(crate) fn execute_at(
    state: &State,
    action: &ActionOperator,
    index: usize,
    universe: &ObjectUniverse,
) -> Result<Execution, SymbolicError> {
    action.check_grounded(universe)?;
    let unmet = unmet_literals(state, &action.pre, universe)?;
    if unmet.is_empty() {
        Ok(Execution::Applied(state.apply(&action.eff)))
    } else {
        Ok(Execution::Blocked(
            unmet
                .into_iter()
                .map(|literal| Violation {
                    literal,
                    action_index: index,
                    action_name: action.name.clone(),
                })
                .collect(),
        ))
    }
}

/// Applies `action` to `state` if its preconditions hold. The violations of a
/// single call carry action index 0.
pub fn symbolic_execute(
    state: &State,
    action: &ActionOperator,
    universe: &ObjectUniverse,
) -> Result<Execution, SymbolicError> {
    execute_at(state, action, 0, universe)
}

pub fn symbolic_verify(
    state: &State,
    action: &ActionOperator,
    universe: &ObjectUniverse,
) -> Result<Verdict, SymbolicError> {
    Ok(match symbolic_execute(state, action, universe)? {
        Execution::Applied(next) => Verdict::Pass(next),
        Execution::Blocked(v) => Verdict::Fail(v),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inconsistency {
    pub index: usize,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RolloutResult {
    /// `states[0]` is the initial state; `states[i + 1]` follows action `i`.
    pub states: Vec<State>,
    pub executed: usize,
    pub first_inconsistency: Option<Inconsistency>,
}

impl RolloutResult {
    pub fn final_state(&self) -> &State {
        self.states.last().expect("rollout always holds the initial state")
    }

    pub fn is_clean(&self) -> bool {
        self.first_inconsistency.is_none()
    }
}

/// Executes `procedure` in order from `initial`, stopping at the first action
/// whose preconditions fail.
pub fn rollout(
    initial: &State,
    procedure: &[OpRef],
    universe: &ObjectUniverse,
) -> Result<RolloutResult, SymbolicError> {
    let mut states = Vec::with_capacity(procedure.len() + 1);
    states.push(initial.clone());
    for (i, action) in procedure.iter().enumerate() {
        let current = states.last().expect("non-empty");
        match execute_at(current, action, i, universe)? {
            Execution::Applied(next) => states.push(next),
            Execution::Blocked(violations) => {
                return Ok(RolloutResult {
                    states,
                    executed: i,
                    first_inconsistency: Some(Inconsistency {
                        index: i,
                        violations,
                    }),
                })
            }
        }
    }
    Ok(RolloutResult {
        executed: procedure.len(),
        states,
        first_inconsistency: None,
    })
}

/// How a simulated next state is compared with a recorded frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameMatch {
    /// The simulated state must equal the frame.
    #[default]
    Exact,
    /// Every atom of the frame must hold in the simulated state.
    Subset,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailureReason {
    Preconditions(Vec<Violation>),
    EffectMismatch {
        /// Atoms of the recorded frame the simulation did not produce.
        missing: Vec<Atom>,
        /// Atoms the simulation produced that the frame does not contain.
        unexpected: Vec<Atom>,
    },
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::Preconditions(v) => {
                f.write_str("unmet preconditions:")?;
                for x in v {
                    write!(f, " {x}")?;
                }
                Ok(())
            }
            FailureReason::EffectMismatch {
                missing,
                unexpected,
            } => {
                f.write_str("effect mismatch;")?;
                if !missing.is_empty() {
                    f.write_str(" missing:")?;
                    for a in missing {
                        write!(f, " {a}")?;
                    }
                }
                if !unexpected.is_empty() {
                    f.write_str(" unexpected:")?;
                    for a in unexpected {
                        write!(f, " {a}")?;
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrajectoryVerdict {
    Verified,
    /// Transition `t` (0-based: from `states[t]` to `states[t + 1]`) failed.
    Failed { t: usize, reason: FailureReason },
}

impl TrajectoryVerdict {
    pub fn is_verified(&self) -> bool {
        matches!(self, TrajectoryVerdict::Verified)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrajectoryError {
    #[error("{states} states need {} actions, got {actions}", .states.saturating_sub(1))]
    LengthMismatch { states: usize, actions: usize },
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

/// Checks one recorded transition against an operator.
pub fn check_transition(
    prev: &State,
    next: &State,
    action: &ActionOperator,
    index: usize,
    universe: &ObjectUniverse,
    mode: FrameMatch,
) -> Result<Option<FailureReason>, SymbolicError> {
    match execute_at(prev, action, index, universe)? {
        Execution::Blocked(v) => Ok(Some(FailureReason::Preconditions(v))),
        Execution::Applied(sim) => {
            let diff = state_diff(&sim, next);
            let missing: Vec<Atom> = diff.adds.into_iter().collect();
            let unexpected: Vec<Atom> = match mode {
                FrameMatch::Exact => diff.dels.into_iter().collect(),
                FrameMatch::Subset => Vec::new(),
            };
            if missing.is_empty() && unexpected.is_empty() {
                Ok(None)
            } else {
                Ok(Some(FailureReason::EffectMismatch {
                    missing,
                    unexpected,
                }))
            }
        }
    }
}

/// Verifies that each action reproduces the next recorded state.
pub fn verify_trajectory(
    states: &[State],
    actions: &[OpRef],
    universe: &ObjectUniverse,
    mode: FrameMatch,
) -> Result<TrajectoryVerdict, TrajectoryError> {
    if states.is_empty() || actions.len() + 1 != states.len() {
        return Err(TrajectoryError::LengthMismatch {
            states: states.len(),
            actions: actions.len(),
        });
    }
    for (t, action) in actions.iter().enumerate() {
        if let Some(reason) =
            check_transition(&states[t], &states[t + 1], action, t, universe, mode)?
        {
            return Ok(TrajectoryVerdict::Failed { t, reason });
        }
    }
    Ok(TrajectoryVerdict::Verified)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{Condition, EffectSpec, ObjectName, ROOT_TYPE};
    use std::sync::Arc;

    fn atom(p: &str, args: &[&str]) -> Atom {
        Atom::parse_parts(p, args).unwrap()
    }

    fn universe(names: &[&str]) -> ObjectUniverse {
        let mut u = ObjectUniverse::new();
        for n in names {
            u.insert(ObjectName::new(n).unwrap(), ROOT_TYPE);
        }
        u
    }

    fn toggle(name: &str, from: Atom, to: Atom) -> OpRef {
        Arc::new(
            ActionOperator::new(
                name,
                Condition::from_literals(vec![Literal::pos(from.clone())]),
                EffectSpec::new(vec![to], vec![from]).unwrap(),
            )
            .unwrap(),
        )
    }

    #[test]
    fn noop_leaves_state_unchanged() {
        let s: State = [atom("Open", &["box"])].into_iter().collect();
        let op = ActionOperator::noop("Wait", Condition::empty()).unwrap();
        assert_eq!(
            symbolic_execute(&s, &op, &universe(&["box"])).unwrap(),
            Execution::Applied(s.clone())
        );
    }

    #[test]
    fn input_state_is_not_mutated() {
        let s: State = [atom("Open", &["box"])].into_iter().collect();
        let before = s.clone();
        let op = toggle("CloseBox", atom("Open", &["box"]), atom("Closed", &["box"]));
        let _ = symbolic_execute(&s, &op, &universe(&["box"])).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn action_outside_universe_is_a_vocabulary_error() {
        let op = toggle("CloseBox", atom("Open", &["box"]), atom("Closed", &["box"]));
        assert_eq!(
            symbolic_execute(&State::new(), &op, &universe(&["lid"])).unwrap_err(),
            SymbolicError::UnknownObject("box".into())
        );
    }

    #[test]
    fn verify_agrees_with_execute() {
        let u = universe(&["box"]);
        let op = toggle("CloseBox", atom("Open", &["box"]), atom("Closed", &["box"]));
        let open: State = [atom("Open", &["box"])].into_iter().collect();
        let next = symbolic_execute(&open, &op, &u).unwrap();
        assert_eq!(
            symbolic_verify(&open, &op, &u).unwrap(),
            Verdict::Pass(next.state().unwrap().clone())
        );
        match symbolic_verify(&State::new(), &op, &u).unwrap() {
            Verdict::Fail(v) => assert_eq!(v[0].literal, Literal::pos(atom("Open", &["box"]))),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn empty_rollout_holds_only_initial_state() {
        let s: State = [atom("Open", &["box"])].into_iter().collect();
        let r = rollout(&s, &[], &universe(&["box"])).unwrap();
        assert_eq!(r.states, vec![s]);
        assert_eq!(r.executed, 0);
        assert!(r.is_clean());
    }

    #[test]
    fn rollout_stops_at_first_inconsistency() {
        let u = universe(&["box"]);
        let close = toggle("CloseBox", atom("Open", &["box"]), atom("Closed", &["box"]));
        let s: State = [atom("Open", &["box"])].into_iter().collect();
        let r = rollout(&s, &[close.clone(), close.clone(), close], &u).unwrap();
        assert_eq!(r.executed, 1);
        assert_eq!(r.states.len(), 2);
        let inc = r.first_inconsistency.unwrap();
        assert_eq!(inc.index, 1);
        assert_eq!(inc.violations[0].action_index, 1);
        assert_eq!(inc.violations[0].action_name, "CloseBox");
    }

    #[test]
    fn dropped_effect_atom_is_reported_as_missing() {
        let u = universe(&["box"]);
        let close = toggle("CloseBox", atom("Open", &["box"]), atom("Closed", &["box"]));
        let s0: State = [atom("Open", &["box"])].into_iter().collect();
        let good = rollout(&s0, &[close.clone()], &u).unwrap().states;
        assert!(verify_trajectory(&good, &[close.clone()], &u, FrameMatch::Exact)
            .unwrap()
            .is_verified());

        let edited = vec![s0, State::new()];
        assert_eq!(
            verify_trajectory(&edited, &[close.clone()], &u, FrameMatch::Exact).unwrap(),
            TrajectoryVerdict::Failed {
                t: 0,
                reason: FailureReason::EffectMismatch {
                    missing: vec![],
                    unexpected: vec![atom("Closed", &["box"])],
                }
            }
        );
        let mut extra = good.clone();
        extra[1].insert(atom("Open", &["lid"]));
        let u2 = universe(&["box", "lid"]);
        match verify_trajectory(&extra, &[close.clone()], &u2, FrameMatch::Exact).unwrap() {
            TrajectoryVerdict::Failed {
                reason: FailureReason::EffectMismatch { missing, .. },
                ..
            } => assert_eq!(missing, vec![atom("Open", &["lid"])]),
            other => panic!("unexpected {other:?}"),
        }
        // A partial frame passes under subset matching.
        let partial = vec![good[0].clone(), State::new()];
        assert!(verify_trajectory(&partial, &[close], &u, FrameMatch::Subset)
            .unwrap()
            .is_verified());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let u = universe(&["box"]);
        assert!(matches!(
            verify_trajectory(&[State::new()], &[], &u, FrameMatch::Exact),
            Ok(TrajectoryVerdict::Verified)
        ));
        assert_eq!(
            verify_trajectory(&[State::new(), State::new()], &[], &u, FrameMatch::Exact)
                .unwrap_err(),
            TrajectoryError::LengthMismatch {
                states: 2,
                actions: 0
            }
        );
    }
}
