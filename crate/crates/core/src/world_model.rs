//! World-model construction: vocabulary collection and per-transition
//! operator abduction with verification and bounded re-proposal.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::executor::{check_transition, FailureReason, FrameMatch};
use crate::pddl_io::TrajectoryDocument;
use crate::proposers::{OperatorContext, Payload, Proposer, ProposerContext};
use crate::symbolic::{
    state_diff, ActionOperator, Atom, Condition, EffectSpec, Literal, ObjectUniverse, OpRef,
    PredicateSchema, State, SymbolicError, Vocabulary,
};

pub const DEFAULT_RETRY_LIMIT: usize = 3;

/// Objects, predicates, operators and the demonstrated procedure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldModel {
    pub instruction: String,
    pub universe: ObjectUniverse,
    pub vocabulary: Vocabulary,
    /// Distinct operators; the procedure shares them.
    pub operators: Vec<OpRef>,
    pub procedure: Vec<OpRef>,
    /// The demonstration frames the procedure was verified against.
    pub states: Vec<State>,
}

/// Why an operator was turned down for a transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    Failure(FailureReason),
    Vocabulary(SymbolicError),
    WrongPayload(String),
    Proposer(String),
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::Failure(r) => write!(f, "{r}"),
            Rejection::Vocabulary(e) => write!(f, "{e}"),
            Rejection::WrongPayload(p) => write!(f, "expected an operator, got {p}"),
            Rejection::Proposer(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error("retry limit must be at least 1")]
    ZeroRetryLimit,
    #[error("inconsistent vocabulary: {0}")]
    Vocabulary(#[from] SymbolicError),
    #[error("transition {transition}: no verified operator after retries ({last})")]
    RetriesExhausted { transition: usize, last: Rejection },
}

/// Union of objects and predicates over all frames, in lexicographic order.
/// Predicates are declared untyped with the arity they are used with.
pub fn collect_vocabulary(states: &[State]) -> Result<(ObjectUniverse, Vocabulary), SymbolicError> {
    let mut universe = ObjectUniverse::new();
    let mut arities: BTreeMap<&str, usize> = BTreeMap::new();
    for s in states {
        universe.extend_with_state(s);
        for a in s.iter() {
            let n = a.args().len();
            let seen = *arities.entry(a.predicate()).or_insert(n);
            if seen != n {
                return Err(SymbolicError::ArityMismatch {
                    name: a.predicate().to_string(),
                    expected: seen,
                    found: n,
                });
            }
        }
    }
    let mut vocab = Vocabulary::new();
    for (name, arity) in arities {
        vocab.insert(PredicateSchema::untyped(name, arity)?);
    }
    Ok((universe, vocab))
}

fn effect_digest(adds: &[Atom], dels: &[Atom]) -> String {
    let mut h = Sha256::new();
    for a in adds {
        h.update(b"+");
        h.update(a.to_string().as_bytes());
    }
    for d in dels {
        h.update(b"-");
        h.update(d.to_string().as_bytes());
    }
    h.finalize()[..4].iter().map(|b| format!("{b:02x}")).collect()
}

/// Deterministic stand-in for a learned abducer. Effects are the state
/// difference; preconditions require every deleted atom and forbid every
/// added one.
pub fn abduce_operator_default(prev: &State, next: &State) -> ActionOperator {
    let diff = state_diff(prev, next);
    let adds: Vec<Atom> = diff.adds.into_iter().collect();
    let dels: Vec<Atom> = diff.dels.into_iter().collect();
    let pre = Condition::from_literals(
        dels.iter()
            .cloned()
            .map(Literal::pos)
            .chain(adds.iter().cloned().map(Literal::neg))
            .collect(),
    );
    if adds.is_empty() && dels.is_empty() {
        return ActionOperator::noop("Idle", pre)
            .expect("static name is valid")
            .with_semantic("Wait without changing the scene");
    }
    let name = format!("Abduced{}", effect_digest(&adds, &dels));
    let summary = adds
        .iter()
        .map(|a| format!("add {a}"))
        .chain(dels.iter().map(|d| format!("remove {d}")))
        .collect::<Vec<_>>()
        .join(", ");
    ActionOperator::new(&name, pre, EffectSpec::new(adds, dels).expect("diff sides are disjoint"))
        .expect("generated name is valid")
        .with_semantic(summary)
}

fn verify_candidate(
    op: &ActionOperator,
    prev: &State,
    next: &State,
    t: usize,
    universe: &ObjectUniverse,
    vocab: &Vocabulary,
) -> Result<(), Rejection> {
    vocab.check_operator(op).map_err(Rejection::Vocabulary)?;
    match check_transition(prev, next, op, t, universe, FrameMatch::Exact) {
        Err(e) => Err(Rejection::Vocabulary(e)),
        Ok(Some(reason)) => Err(Rejection::Failure(reason)),
        Ok(None) => Ok(()),
    }
}

fn intern(operators: &mut Vec<OpRef>, op: ActionOperator) -> OpRef {
    if let Some(existing) = operators.iter().find(|o| ***o == op) {
        return existing.clone();
    }
    let r = Arc::new(op);
    operators.push(r.clone());
    r
}

/// Builds and verifies a world model from a demonstration.
///
/// Each transition gets one request plus up to `retry_limit` re-requests
/// carrying the previous rejection. A declining proposer falls back to
/// [`abduce_operator_default`].
pub fn build_world_model(
    trajectory: &TrajectoryDocument,
    proposer: &mut dyn Proposer,
    retry_limit: usize,
) -> Result<WorldModel, BuildError> {
    build_world_model_in(
        trajectory,
        proposer,
        retry_limit,
        &ObjectUniverse::new(),
        &Vocabulary::new(),
    )
}

/// As [`build_world_model`], with objects and predicates declared up front
/// (for example by a domain file) merged into the collected vocabulary.
pub fn build_world_model_in(
    trajectory: &TrajectoryDocument,
    proposer: &mut dyn Proposer,
    retry_limit: usize,
    declared_universe: &ObjectUniverse,
    declared_vocabulary: &Vocabulary,
) -> Result<WorldModel, BuildError> {
    if retry_limit == 0 {
        return Err(BuildError::ZeroRetryLimit);
    }
    let states = trajectory.states();
    let (collected_universe, collected_vocab) = collect_vocabulary(&states)?;
    let universe = declared_universe.union(&collected_universe);
    let mut vocabulary = declared_vocabulary.clone();
    for schema in collected_vocab.iter() {
        match vocabulary.get(&schema.name) {
            Some(d) if d.arity() != schema.arity() => {
                return Err(BuildError::Vocabulary(SymbolicError::ArityMismatch {
                    name: schema.name.to_string(),
                    expected: d.arity(),
                    found: schema.arity(),
                }))
            }
            Some(_) => {}
            None => {
                vocabulary.insert(schema.clone());
            }
        }
    }

    let mut operators: Vec<OpRef> = Vec::new();
    let mut procedure = Vec::with_capacity(states.len().saturating_sub(1));
    for (t, pair) in states.windows(2).enumerate() {
        let (prev, next) = (&pair[0], &pair[1]);
        let mut reason: Option<Rejection> = None;
        let mut accepted = None;
        for _attempt in 0..=retry_limit {
            let ctx = ProposerContext::Operator(OperatorContext {
                instruction: trajectory.instruction.clone(),
                universe: universe.clone(),
                vocabulary: vocabulary.clone(),
                transition: t,
                prev: prev.clone(),
                next: next.clone(),
                diff: state_diff(prev, next),
                rejection_reason: reason.as_ref().map(ToString::to_string),
            });
            let candidate = match proposer.propose(&ctx) {
                Ok(resp) => match resp.payload {
                    Payload::Operator(op) => op,
                    Payload::Decline => abduce_operator_default(prev, next),
                    other => {
                        reason = Some(Rejection::WrongPayload(other.to_string()));
                        continue;
                    }
                },
                Err(e) => {
                    reason = Some(Rejection::Proposer(e.to_string()));
                    continue;
                }
            };
            match verify_candidate(&candidate, prev, next, t, &universe, &vocabulary) {
                Ok(()) => {
                    accepted = Some(candidate);
                    break;
                }
                Err(r) => reason = Some(r),
            }
        }
        match accepted {
            Some(op) => procedure.push(intern(&mut operators, op)),
            None => {
                return Err(BuildError::RetriesExhausted {
                    transition: t,
                    last: reason.expect("a failed attempt records its reason"),
                })
            }
        }
    }
    Ok(WorldModel {
        instruction: trajectory.instruction.clone(),
        universe,
        vocabulary,
        operators,
        procedure,
        states,
    })
}
