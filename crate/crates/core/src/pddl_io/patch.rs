use std::sync::Arc;

use super::blocks::{parse_operator_blocks, serialize_operators};
use super::FormatError;
use crate::adaptation::Patch;
use crate::symbolic::Vocabulary;

pub const SEARCH_MARKER: &str = "<<<<<<< SEARCH";
pub const SPLIT_MARKER: &str = "=======";
pub const REPLACE_MARKER: &str = ">>>>>>> REPLACE";

fn find_marker(lines: &[&str], marker: &'static str) -> Result<usize, FormatError> {
    let mut hits = lines.iter().enumerate().filter(|(_, l)| **l == marker);
    let (first, _) = hits.next().ok_or(FormatError::MissingMarker(marker))?;
    if hits.next().is_some() {
        return Err(FormatError::DuplicateMarker(marker));
    }
    Ok(first)
}

/// Parses SEARCH/REPLACE text. Marker lines must match exactly (a trailing
/// `\r` is tolerated); operator blocks between them are whitespace-tolerant.
/// Text before the SEARCH marker becomes the rationale; text after the
/// REPLACE marker is ignored.
pub fn parse_patch(text: &str, vocab: Option<&Vocabulary>) -> Result<Patch, FormatError> {
    let lines: Vec<&str> = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect();
    let s = find_marker(&lines, SEARCH_MARKER)?;
    let m = find_marker(&lines, SPLIT_MARKER)?;
    let r = find_marker(&lines, REPLACE_MARKER)?;
    if !(s < m && m < r) {
        return Err(FormatError::MarkerOrder);
    }
    let search_text = lines[s + 1..m].join("\n");
    let replace_text = lines[m + 1..r].join("\n");
    let search = parse_operator_blocks(&search_text, s + 2, vocab)?;
    if search.is_empty() {
        return Err(FormatError::EmptySearch);
    }
    let replace = parse_operator_blocks(&replace_text, m + 2, vocab)?;
    Ok(Patch {
        search: search.into_iter().map(Arc::new).collect(),
        replace: replace.into_iter().map(Arc::new).collect(),
        rationale: lines[..s].join("\n").trim().to_string(),
    })
}

/// Canonical patch text; ends with a newline after the REPLACE marker.
pub fn serialize_patch(patch: &Patch) -> String {
    let mut out = String::new();
    if !patch.rationale.is_empty() {
        out.push_str(&patch.rationale);
        out.push('\n');
    }
    out.push_str(SEARCH_MARKER);
    out.push('\n');
    out.push_str(&serialize_operators(patch.search.iter().map(|o| &**o)));
    out.push_str(SPLIT_MARKER);
    out.push('\n');
    out.push_str(&serialize_operators(patch.replace.iter().map(|o| &**o)));
    out.push_str(REPLACE_MARKER);
    out.push('\n');
    out
}
