use std::fmt::Write as _;

use crate::symbolic::ActionOperator;

/// `MoveGripperToSurroundGreenCylinder` -> `Move gripper to surround green cylinder`.
///
/// Words break at lower-to-upper transitions, before the last capital of an
/// acronym run, and at `_`/`-`. Acronyms keep their case.
pub fn humanize_name(name: &str) -> String {
    let chars: Vec<char> = name.chars().collect();
    let mut words: Vec<String> = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c == '_' || c == '-' {
            if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
            continue;
        }
        let prev = i.checked_sub(1).map(|j| chars[j]);
        let next = chars.get(i + 1).copied();
        let boundary = match prev {
            Some(p) if c.is_ascii_uppercase() => {
                p.is_ascii_lowercase()
                    || p.is_ascii_digit()
                    || (p.is_ascii_uppercase() && next.is_some_and(|n| n.is_ascii_lowercase()))
            }
            Some(p) if c.is_ascii_digit() => p.is_ascii_alphabetic(),
            _ => false,
        };
        if boundary && !cur.is_empty() {
            words.push(std::mem::take(&mut cur));
        }
        cur.push(c);
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let acronym = w.len() > 1 && w.chars().all(|c| c.is_ascii_uppercase());
            if i == 0 || acronym {
                w.clone()
            } else {
                w.to_lowercase()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// One numbered line per step, `1. ...`, LF terminated. Uses each operator's
/// description when present and the humanized name otherwise.
pub fn emit_task_specification<'a>(
    procedure: impl IntoIterator<Item = &'a ActionOperator>,
) -> String {
    let mut out = String::new();
    for (i, op) in procedure.into_iter().enumerate() {
        let text = match op.semantic.as_deref().map(str::trim) {
            Some(s) if !s.is_empty() => s.to_string(),
            _ => humanize_name(&op.name),
        };
        let _ = writeln!(out, "{}. {}", i + 1, text);
    }
    out
}
