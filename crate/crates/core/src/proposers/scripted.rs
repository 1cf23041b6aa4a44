use std::collections::VecDeque;

use serde::Deserialize;

use super::{Payload, Proposer, ProposerContext, ProposerError, ProposerResponse};
use crate::pddl_io::{parse_operator_blocks, parse_patch, FormatError, SEARCH_MARKER};
use crate::symbolic::Vocabulary;

/// Replays a fixed list of responses in order, then declines.
#[derive(Debug, Clone, Default)]
pub struct ScriptedProposer {
    queue: VecDeque<ProposerResponse>,
    consumed: usize,
}

#[derive(Deserialize)]
struct FixtureEntry {
    #[serde(default)]
    rationale: String,
    #[serde(default)]
    payload: Option<String>,
    #[serde(default)]
    decline: bool,
}

impl ScriptedProposer {
    pub fn new(responses: impl IntoIterator<Item = ProposerResponse>) -> Self {
        ScriptedProposer {
            queue: responses.into_iter().collect(),
            consumed: 0,
        }
    }

    /// Reads a JSON array of `{"rationale", "payload"}` or `{"decline": true}`.
    /// A payload containing the SEARCH marker is a patch, otherwise a single
    /// operator block.
    pub fn from_json(text: &str, vocab: Option<&Vocabulary>) -> Result<Self, FormatError> {
        let entries: Vec<FixtureEntry> =
            serde_json::from_str(text).map_err(|e| FormatError::Json(e.to_string()))?;
        let mut out = Vec::with_capacity(entries.len());
        for e in entries {
            let payload = match (&e.payload, e.decline) {
                (_, true) | (None, false) => Payload::Decline,
                (Some(p), false) => decode_payload(p, vocab)?,
            };
            out.push(ProposerResponse {
                payload,
                rationale: e.rationale,
            });
        }
        Ok(Self::new(out))
    }

    pub fn consumed(&self) -> usize {
        self.consumed
    }

    pub fn remaining(&self) -> usize {
        self.queue.len()
    }
}

pub(crate) fn decode_payload(text: &str, vocab: Option<&Vocabulary>) -> Result<Payload, FormatError> {
    if text.lines().any(|l| l.trim_end_matches('\r') == SEARCH_MARKER) {
        return parse_patch(text, vocab).map(Payload::Patch);
    }
    let mut ops = parse_operator_blocks(text, 1, vocab)?;
    match ops.len() {
        1 => Ok(Payload::Operator(ops.remove(0))),
        n => Err(FormatError::Syntax {
            line: 1,
            col: 1,
            msg: format!("expected one operator block, found {n}"),
        }),
    }
}

impl Proposer for ScriptedProposer {
    fn propose(&mut self, _ctx: &ProposerContext) -> Result<ProposerResponse, ProposerError> {
        match self.queue.pop_front() {
            Some(r) => {
                self.consumed += 1;
                Ok(r)
            }
            None => Ok(ProposerResponse::decline()),
        }
    }
}
