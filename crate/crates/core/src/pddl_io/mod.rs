//! Text formats: domains, trajectory JSON, SEARCH/REPLACE patches and
//! numbered task specifications.

mod blocks;
mod domain;
mod patch;
mod sexpr;
mod taskspec;
mod trajectory;

use thiserror::Error;

use crate::symbolic::SymbolicError;

pub use blocks::{serialize_operator, serialize_operators};
pub use domain::{parse_domain, serialize_domain, Domain};
pub use patch::{parse_patch, serialize_patch, REPLACE_MARKER, SEARCH_MARKER, SPLIT_MARKER};
pub use taskspec::{emit_task_specification, humanize_name};
pub use trajectory::{
    parse_atom, parse_goal, parse_state, parse_trajectory, serialize_goal, serialize_state,
    serialize_trajectory, Frame, TrajectoryDocument,
};

pub(crate) use blocks::parse_operator_blocks;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}: {source}")]
    Symbol {
        line: usize,
        #[source]
        source: SymbolicError,
    },
    #[error("predicate `{0}` declared twice")]
    DuplicatePredicate(String),
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("frame {index}: {source}")]
    InFrame {
        index: usize,
        #[source]
        source: Box<FormatError>,
    },
    #[error("atom {0} is both required and forbidden")]
    GoalOverlap(String),
    #[error("trajectory has no frames")]
    EmptyTrajectory,
    #[error("frame index {found} where {expected} was expected")]
    FrameIndex { expected: usize, found: i64 },
    #[error("missing marker line `{0}`")]
    MissingMarker(&'static str),
    #[error("marker line `{0}` appears more than once")]
    DuplicateMarker(&'static str),
    #[error("marker lines out of order: expected SEARCH, divider, REPLACE")]
    MarkerOrder,
    #[error("SEARCH block is empty")]
    EmptySearch,
}
