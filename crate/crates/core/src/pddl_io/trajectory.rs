use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::blocks::atom_from;
use super::sexpr::{self, syntax, Pos};
use super::FormatError;
use crate::adaptation::Goal;
use crate::symbolic::{Atom, State, SymbolicError, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub index: usize,
    pub state: State,
    pub meta: Option<String>,
}

/// A demonstration: instruction text plus symbolic frames numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryDocument {
    pub instruction: String,
    pub frames: Vec<Frame>,
}

impl TrajectoryDocument {
    pub fn from_states(instruction: impl Into<String>, states: Vec<State>) -> Self {
        TrajectoryDocument {
            instruction: instruction.into(),
            frames: states
                .into_iter()
                .enumerate()
                .map(|(i, state)| Frame {
                    index: i + 1,
                    state,
                    meta: None,
                })
                .collect(),
        }
    }

    pub fn states(&self) -> Vec<State> {
        self.frames.iter().map(|f| f.state.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Deserialize, Serialize)]
struct RawFrame {
    index: i64,
    atoms: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<String>,
}

#[derive(Deserialize, Serialize)]
struct RawTrajectory {
    #[serde(default)]
    instruction: String,
    frames: Vec<RawFrame>,
}

fn json_err(e: serde_json::Error) -> FormatError {
    FormatError::Json(e.to_string())
}

/// Parses one atom such as `(OnTopOf apple floor)`.
pub fn parse_atom(text: &str, vocab: Option<&Vocabulary>) -> Result<Atom, FormatError> {
    let items = sexpr::parse_all(text, 1)?;
    match items.as_slice() {
        [one] => atom_from(one, vocab),
        [] => Err(syntax(Pos { line: 1, col: 1 }, "empty atom")),
        [_, extra, ..] => Err(syntax(extra.pos(), "expected a single atom")),
    }
}

/// Without a vocabulary, predicates must keep one arity across a document.
struct ArityLedger<'v> {
    vocab: Option<&'v Vocabulary>,
    seen: BTreeMap<String, usize>,
}

impl<'v> ArityLedger<'v> {
    fn new(vocab: Option<&'v Vocabulary>) -> Self {
        ArityLedger {
            vocab,
            seen: BTreeMap::new(),
        }
    }

    fn atom(&mut self, text: &str) -> Result<Atom, FormatError> {
        let atom = parse_atom(text, self.vocab)?;
        if self.vocab.is_none() {
            let n = atom.args().len();
            let expected = *self.seen.entry(atom.predicate().to_string()).or_insert(n);
            if expected != n {
                return Err(FormatError::Symbol {
                    line: 1,
                    source: SymbolicError::ArityMismatch {
                        name: atom.predicate().to_string(),
                        expected,
                        found: n,
                    },
                });
            }
        }
        Ok(atom)
    }

    fn state(&mut self, atoms: &[String]) -> Result<State, FormatError> {
        atoms.iter().map(|a| self.atom(a)).collect()
    }
}

pub fn parse_trajectory(
    text: &str,
    vocab: Option<&Vocabulary>,
) -> Result<TrajectoryDocument, FormatError> {
    let raw: RawTrajectory = serde_json::from_str(text).map_err(json_err)?;
    if raw.frames.is_empty() {
        return Err(FormatError::EmptyTrajectory);
    }
    let mut ledger = ArityLedger::new(vocab);
    let mut frames = Vec::with_capacity(raw.frames.len());
    for (i, f) in raw.frames.into_iter().enumerate() {
        let expected = i + 1;
        if f.index != expected as i64 {
            return Err(FormatError::FrameIndex {
                expected,
                found: f.index,
            });
        }
        let state = ledger
            .state(&f.atoms)
            .map_err(|e| FormatError::InFrame {
                index: expected,
                source: Box::new(e),
            })?;
        frames.push(Frame {
            index: expected,
            state,
            meta: f.meta,
        });
    }
    Ok(TrajectoryDocument {
        instruction: raw.instruction,
        frames,
    })
}

fn atom_strings(state: &State) -> Vec<String> {
    state.iter().map(ToString::to_string).collect()
}

pub fn serialize_trajectory(doc: &TrajectoryDocument) -> String {
    let raw = RawTrajectory {
        instruction: doc.instruction.clone(),
        frames: doc
            .frames
            .iter()
            .map(|f| RawFrame {
                index: f.index as i64,
                atoms: atom_strings(&f.state),
                meta: f.meta.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("plain data serializes")
}

fn string_list(v: &Value, field: &str) -> Result<Vec<String>, FormatError> {
    match v.get(field) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(x) => serde_json::from_value(x.clone()).map_err(json_err),
    }
}

/// A state document: `{"atoms": [...]}` or a bare array of atom strings.
pub fn parse_state(text: &str, vocab: Option<&Vocabulary>) -> Result<State, FormatError> {
    let v: Value = serde_json::from_str(text).map_err(json_err)?;
    let atoms: Vec<String> = match &v {
        Value::Array(_) => serde_json::from_value(v.clone()).map_err(json_err)?,
        Value::Object(_) if v.get("atoms").is_some() => string_list(&v, "atoms")?,
        _ => return Err(FormatError::Json("expected {\"atoms\": [...]}".into())),
    };
    ArityLedger::new(vocab).state(&atoms)
}

pub fn serialize_state(state: &State) -> String {
    serde_json::to_string_pretty(&serde_json::json!({ "atoms": atom_strings(state) }))
        .expect("plain data serializes")
}

/// `{"required": [...], "forbidden": [...]}`.
pub fn parse_goal(text: &str, vocab: Option<&Vocabulary>) -> Result<Goal, FormatError> {
    let v: Value = serde_json::from_str(text).map_err(json_err)?;
    if !v.is_object() {
        return Err(FormatError::Json("expected a goal object".into()));
    }
    let mut ledger = ArityLedger::new(vocab);
    let required = ledger.state(&string_list(&v, "required")?)?;
    let forbidden = ledger.state(&string_list(&v, "forbidden")?)?;
    Goal::new(required.into_iter(), forbidden.into_iter())
        .map_err(|a| FormatError::GoalOverlap(a.to_string()))
}

pub fn serialize_goal(goal: &Goal) -> String {
    let req: Vec<String> = goal.required.iter().map(ToString::to_string).collect();
    let forb: Vec<String> = goal.forbidden.iter().map(ToString::to_string).collect();
    serde_json::to_string_pretty(&serde_json::json!({ "required": req, "forbidden": forb }))
        .expect("plain data serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_frame_orange_document() {
        let text = r#"{"instruction": "grasp the orange",
            "frames": [
              {"index": 1, "atoms": ["(GripperOpen)", "(GripperSurrounding orange)"]},
              {"index": 2, "atoms": ["(GripperClosed)", "(GripperHolding orange)"]}
            ]}"#;
        let doc = parse_trajectory(text, None).unwrap();
        assert_eq!(doc.len(), 2);
        assert_eq!(parse_trajectory(&serialize_trajectory(&doc), None).unwrap(), doc);
    }

    #[test]
    fn index_gap_is_rejected() {
        let text = r#"{"frames": [{"index": 1, "atoms": []}, {"index": 3, "atoms": []}]}"#;
        assert_eq!(
            parse_trajectory(text, None).unwrap_err(),
            FormatError::FrameIndex {
                expected: 2,
                found: 3
            }
        );
    }

    #[test]
    fn empty_frames_and_bad_json() {
        assert_eq!(
            parse_trajectory(r#"{"frames": []}"#, None).unwrap_err(),
            FormatError::EmptyTrajectory
        );
        assert!(matches!(parse_trajectory("{", None), Err(FormatError::Json(_))));
    }

    #[test]
    fn inconsistent_arity_without_vocabulary() {
        let text = r#"{"frames": [{"index": 1, "atoms": ["(Open a)", "(Open a b)"]}]}"#;
        assert!(matches!(
            parse_trajectory(text, None).unwrap_err(),
            FormatError::InFrame { index: 1, .. }
        ));
    }

    #[test]
    fn goal_overlap_is_rejected() {
        let text = r#"{"required": ["(Open a)"], "forbidden": ["(Open a)"]}"#;
        assert!(matches!(parse_goal(text, None), Err(FormatError::GoalOverlap(_))));
    }
}
