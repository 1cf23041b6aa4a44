//! The proposer abstraction: something that abduces operators for observed
//! transitions and offers SEARCH/REPLACE patches for inconsistent procedures.
//!
//! Every answer is re-verified by the caller; a proposer can only choose which
//! candidates are offered.

mod external;
mod scripted;
mod search;

use std::fmt;
use std::time::Duration;

use thiserror::Error;

use crate::adaptation::{Goal, Patch};
use crate::symbolic::{
    ActionOperator, Literal, ObjectUniverse, OpRef, State, StateDiff, Vocabulary,
};

pub use external::{request_body, Endpoint, ExternalProposer};
pub use scripted::ScriptedProposer;
pub use search::{search_propose, SearchProposer, PHYSICS_PREDICATES};

/// Request for an operator explaining one demonstrated transition.
#[derive(Debug, Clone)]
pub struct OperatorContext {
    pub instruction: String,
    pub universe: ObjectUniverse,
    pub vocabulary: Vocabulary,
    /// 0-based transition index (`states[t]` to `states[t + 1]`).
    pub transition: usize,
    pub prev: State,
    pub next: State,
    pub diff: StateDiff,
    pub rejection_reason: Option<String>,
}

/// Request for a patch at the first inconsistency of a rollout.
#[derive(Debug, Clone)]
pub struct PatchContext {
    pub instruction: String,
    pub universe: ObjectUniverse,
    pub procedure: Vec<OpRef>,
    /// Index of the failing action, or `procedure.len()` when every action
    /// executed but the goal does not hold.
    pub erroneous_index: usize,
    /// Counterfactual states `ŝ_1 ..= ŝ_t`; the last one is `state`.
    pub trace: Vec<State>,
    pub state: State,
    /// Unmet preconditions, or the unmet goal literals for a goal gap.
    pub violated: Vec<Literal>,
    pub goal: Goal,
    pub rejection_reason: Option<String>,
    /// Demonstration step the failing action was abduced from, if it is
    /// still an original action.
    pub anchor: Option<usize>,
    /// The demonstrated state change of that step.
    pub expected_effects: Option<StateDiff>,
}

impl PatchContext {
    pub fn executed(&self) -> &[OpRef] {
        &self.procedure[..self.erroneous_index.min(self.procedure.len())]
    }

    pub fn erroneous(&self) -> Option<&OpRef> {
        self.procedure.get(self.erroneous_index)
    }

    pub fn remaining(&self) -> &[OpRef] {
        self.procedure
            .get(self.erroneous_index + 1..)
            .unwrap_or_default()
    }

    pub fn is_goal_gap(&self) -> bool {
        self.erroneous_index >= self.procedure.len()
    }
}

#[derive(Debug, Clone)]
pub enum ProposerContext {
    Operator(OperatorContext),
    Patch(PatchContext),
}

impl ProposerContext {
    pub fn kind(&self) -> &'static str {
        match self {
            ProposerContext::Operator(_) => "operator",
            ProposerContext::Patch(_) => "patch",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Operator(ActionOperator),
    Patch(Patch),
    Decline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposerResponse {
    pub payload: Payload,
    pub rationale: String,
}

impl ProposerResponse {
    pub fn decline() -> Self {
        ProposerResponse {
            payload: Payload::Decline,
            rationale: String::new(),
        }
    }

    pub fn patch(patch: Patch) -> Self {
        ProposerResponse {
            rationale: patch.rationale.clone(),
            payload: Payload::Patch(patch),
        }
    }

    pub fn operator(op: ActionOperator) -> Self {
        ProposerResponse {
            payload: Payload::Operator(op),
            rationale: String::new(),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProposerError {
    #[error("proposer timed out after {0:?}")]
    Timeout(Duration),
    #[error("proposer transport failure: {0}")]
    Transport(String),
    #[error("malformed proposer response ({reason})")]
    Malformed { raw: String, reason: String },
}

impl ProposerError {
    /// Timeouts and transport failures, as opposed to bad answers.
    pub fn is_transport(&self) -> bool {
        matches!(self, ProposerError::Timeout(_) | ProposerError::Transport(_))
    }
}

pub trait Proposer {
    fn propose(&mut self, ctx: &ProposerContext) -> Result<ProposerResponse, ProposerError>;
}

impl<P: Proposer + ?Sized> Proposer for Box<P> {
    fn propose(&mut self, ctx: &ProposerContext) -> Result<ProposerResponse, ProposerError> {
        (**self).propose(ctx)
    }
}

/// Declines every request; world-model construction then falls back to the
/// default abducer.
#[derive(Debug, Clone, Copy, Default)]
pub struct DecliningProposer;

impl Proposer for DecliningProposer {
    fn propose(&mut self, _ctx: &ProposerContext) -> Result<ProposerResponse, ProposerError> {
        Ok(ProposerResponse::decline())
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::Operator(op) => write!(f, "operator {}", op.name),
            Payload::Patch(p) => write!(f, "patch {}→{}", p.search.len(), p.replace.len()),
            Payload::Decline => f.write_str("decline"),
        }
    }
}
