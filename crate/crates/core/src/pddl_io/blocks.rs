//! Operator prose blocks:
//!
//! ```text
//! MoveGripperToSurroundOrange
//! - Preconditions:
//!     - (GripperSurrounding orange)
//!     - (forall (?y - thing) (not (GripperHolding ?y)))
//! - Effects:
//!     - (GripperClosed)
//!     - (not (GripperOpen))
//! ```
//!
//! Indentation, bullets and line breaks inside a section are free-form; a
//! section holding only `None` is empty.

use std::fmt::Write as _;

use super::sexpr::{self, syntax, Pos, SExpr};
use super::FormatError;
use crate::symbolic::{
    is_identifier, ActionOperator, Atom, AtomPattern, Condition, EffectSpec, Literal, ObjectName,
    QuantifiedNegation, SymbolicError, Term, Vocabulary, ROOT_TYPE,
};

const ITEM_INDENT: &str = "    ";

fn symbol_err(pos: Pos, source: SymbolicError) -> FormatError {
    FormatError::Symbol {
        line: pos.line,
        source,
    }
}

fn is_keyword(tok: &str, kw: &str) -> bool {
    tok.eq_ignore_ascii_case(kw)
}

pub(crate) fn atom_from(sx: &SExpr, vocab: Option<&Vocabulary>) -> Result<Atom, FormatError> {
    let pos = sx.pos();
    let items = sx
        .as_list()
        .ok_or_else(|| syntax(pos, "expected an atom `(Predicate args...)`"))?;
    let (head, rest) = items
        .split_first()
        .ok_or_else(|| syntax(pos, "empty atom"))?;
    let pred = head
        .as_token()
        .ok_or_else(|| syntax(head.pos(), "predicate name expected"))?;
    let mut args = Vec::with_capacity(rest.len());
    for a in rest {
        let tok = a
            .as_token()
            .ok_or_else(|| syntax(a.pos(), "nested expression inside an atom"))?;
        if tok.starts_with('?') {
            return Err(symbol_err(
                a.pos(),
                SymbolicError::UnboundVariable(tok[1..].to_string()),
            ));
        }
        args.push(ObjectName::new(tok).map_err(|e| symbol_err(a.pos(), e))?);
    }
    let atom = Atom::new(pred, args).map_err(|e| symbol_err(pos, e))?;
    if let Some(v) = vocab {
        v.check_atom(&atom).map_err(|e| symbol_err(pos, e))?;
    }
    Ok(atom)
}

pub(crate) fn literal_from(sx: &SExpr, vocab: Option<&Vocabulary>) -> Result<Literal, FormatError> {
    match sx.head() {
        Some(h) if is_keyword(h, "not") => {
            let items = sx.as_list().expect("head implies list");
            if items.len() != 2 {
                return Err(syntax(sx.pos(), "`not` takes exactly one atom"));
            }
            Ok(Literal::neg(atom_from(&items[1], vocab)?))
        }
        _ => Ok(Literal::pos(atom_from(sx, vocab)?)),
    }
}

pub(crate) enum CondItem {
    Literal(Literal),
    Forall(QuantifiedNegation),
}

fn pattern_from(sx: &SExpr, vocab: Option<&Vocabulary>) -> Result<AtomPattern, FormatError> {
    let pos = sx.pos();
    let items = sx
        .as_list()
        .ok_or_else(|| syntax(pos, "expected an atom pattern"))?;
    let (head, rest) = items
        .split_first()
        .ok_or_else(|| syntax(pos, "empty atom pattern"))?;
    let pred = head
        .as_token()
        .filter(|t| is_identifier(t))
        .ok_or_else(|| syntax(head.pos(), "predicate name expected"))?;
    let mut args = Vec::with_capacity(rest.len());
    for a in rest {
        let tok = a
            .as_token()
            .ok_or_else(|| syntax(a.pos(), "nested expression inside an atom"))?;
        args.push(match tok.strip_prefix('?') {
            Some(v) if !v.is_empty() => Term::Var(v.to_string()),
            Some(_) => return Err(syntax(a.pos(), "empty variable name")),
            None => Term::Object(ObjectName::new(tok).map_err(|e| symbol_err(a.pos(), e))?),
        });
    }
    if let Some(v) = vocab {
        v.check_predicate(pred, args.len())
            .map_err(|e| symbol_err(pos, e))?;
    }
    Ok(AtomPattern {
        predicate: pred.to_string(),
        args,
    })
}

fn forall_from(sx: &SExpr, vocab: Option<&Vocabulary>) -> Result<QuantifiedNegation, FormatError> {
    let pos = sx.pos();
    let items = sx.as_list().expect("forall is a list");
    if items.len() != 3 {
        return Err(syntax(
            pos,
            "expected `(forall (?var - type) (not pattern))`",
        ));
    }
    let binder = items[1]
        .as_list()
        .ok_or_else(|| syntax(items[1].pos(), "expected `(?var - type)`"))?;
    let (var, type_tag) = match binder {
        [v] => (v.as_token(), Some(ROOT_TYPE)),
        [v, dash, t] if dash.as_token() == Some("-") => (v.as_token(), t.as_token()),
        _ => (None, None),
    };
    let var = var
        .and_then(|v| v.strip_prefix('?'))
        .filter(|v| !v.is_empty())
        .ok_or_else(|| syntax(items[1].pos(), "expected `(?var - type)`"))?;
    let type_tag = type_tag.ok_or_else(|| syntax(items[1].pos(), "expected a type name"))?;
    let body = &items[2];
    let inner = match (body.head(), body.as_list()) {
        (Some(h), Some([_, p])) if is_keyword(h, "not") => p,
        _ => {
            return Err(syntax(
                body.pos(),
                "only `(not pattern)` bodies are supported under forall",
            ))
        }
    };
    let pattern = pattern_from(inner, vocab)?;
    QuantifiedNegation::new(var, type_tag, pattern).map_err(|e| symbol_err(pos, e))
}

pub(crate) fn cond_item_from(sx: &SExpr, vocab: Option<&Vocabulary>) -> Result<CondItem, FormatError> {
    match sx.head() {
        Some(h) if is_keyword(h, "forall") => Ok(CondItem::Forall(forall_from(sx, vocab)?)),
        Some(h) if is_keyword(h, "or") || is_keyword(h, "when") || is_keyword(h, "exists") => Err(
            syntax(sx.pos(), format!("`{h}` is not supported")),
        ),
        _ => Ok(CondItem::Literal(literal_from(sx, vocab)?)),
    }
}

pub(crate) fn condition_from(items: &[SExpr], vocab: Option<&Vocabulary>) -> Result<Condition, FormatError> {
    let mut lits = Vec::new();
    let mut qs = Vec::new();
    for sx in items {
        match cond_item_from(sx, vocab)? {
            CondItem::Literal(l) => lits.push(l),
            CondItem::Forall(q) => qs.push(q),
        }
    }
    Condition::new(lits, qs).map_err(|e| symbol_err(items.first().map_or(Pos { line: 0, col: 0 }, SExpr::pos), e))
}

pub(crate) fn effects_from(
    items: &[SExpr],
    vocab: Option<&Vocabulary>,
) -> Result<EffectSpec, FormatError> {
    let mut adds = Vec::new();
    let mut dels = Vec::new();
    for sx in items {
        if sx.head().is_some_and(|h| is_keyword(h, "forall")) {
            return Err(syntax(sx.pos(), "quantified effects are not supported"));
        }
        let lit = literal_from(sx, vocab)?;
        if lit.positive {
            adds.push(lit.atom);
        } else {
            dels.push(lit.atom);
        }
    }
    let pos = items.first().map_or(Pos { line: 0, col: 0 }, SExpr::pos);
    EffectSpec::new(adds, dels).map_err(|e| symbol_err(pos, e))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Header,
    Pre,
    Eff,
}

struct Draft {
    name: String,
    name_pos: Pos,
    semantic: Option<String>,
    pre: Option<(String, usize)>,
    eff: Option<(String, usize)>,
}

fn strip_bullet(trimmed: &str) -> &str {
    let mut s = trimmed;
    while let Some(rest) = s.strip_prefix('-') {
        if rest.is_empty() || rest.starts_with(char::is_whitespace) {
            s = rest.trim_start();
        } else {
            break;
        }
    }
    s
}

/// `- Key: rest` with a case-insensitive key; returns `rest`.
fn keyed<'a>(trimmed: &'a str, keys: &[&str]) -> Option<&'a str> {
    let body = trimmed.strip_prefix('-')?.trim_start();
    let (k, rest) = body.split_once(':')?;
    keys.iter()
        .any(|key| k.trim().eq_ignore_ascii_case(key))
        .then_some(rest)
}

fn section_items(text: &str, first_line: usize) -> Result<Vec<SExpr>, FormatError> {
    let items = sexpr::parse_all(text, first_line)?;
    match items.as_slice() {
        [single] if single.as_token().is_some_and(|t| t.eq_ignore_ascii_case("none")) => {
            Ok(Vec::new())
        }
        _ => {
            if let Some(bad) = items.iter().find(|s| s.as_token().is_some()) {
                return Err(syntax(
                    bad.pos(),
                    format!("unexpected token `{}`", bad.as_token().unwrap_or_default()),
                ));
            }
            Ok(items)
        }
    }
}

fn finish(draft: Draft, vocab: Option<&Vocabulary>) -> Result<ActionOperator, FormatError> {
    let (pre_text, pre_line) = draft.pre.ok_or_else(|| {
        syntax(
            draft.name_pos,
            format!("operator `{}` lacks `- Preconditions:`", draft.name),
        )
    })?;
    let (eff_text, eff_line) = draft.eff.ok_or_else(|| {
        syntax(
            draft.name_pos,
            format!("operator `{}` lacks `- Effects:`", draft.name),
        )
    })?;
    let pre = condition_from(&section_items(&pre_text, pre_line)?, vocab)?;
    let eff_items = section_items(&eff_text, eff_line)?;
    let mut op = if eff_items.is_empty() {
        ActionOperator::noop(&draft.name, pre)
    } else {
        ActionOperator::new(&draft.name, pre, effects_from(&eff_items, vocab)?)
    }
    .map_err(|e| symbol_err(draft.name_pos, e))?;
    op.semantic = draft.semantic;
    Ok(op)
}

/// Parses a sequence of operator blocks. `first_line` numbers the first line
/// of `text` for diagnostics.
pub(crate) fn parse_operator_blocks(
    text: &str,
    first_line: usize,
    vocab: Option<&Vocabulary>,
) -> Result<Vec<ActionOperator>, FormatError> {
    let mut ops = Vec::new();
    let mut draft: Option<Draft> = None;
    let mut section = Section::Header;

    for (i, raw) in text.lines().enumerate() {
        let line_no = first_line + i;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with(';') {
            continue;
        }
        let col = raw.len() - raw.trim_start().len() + 1;
        let pos = Pos { line: line_no, col };

        if let Some(rest) = keyed(trimmed, &["Preconditions", "Precondition"]) {
            let d = draft
                .as_mut()
                .ok_or_else(|| syntax(pos, "section before any operator name"))?;
            if d.pre.is_some() || section == Section::Eff {
                return Err(syntax(pos, "unexpected `- Preconditions:`"));
            }
            d.pre = Some((rest.to_string(), line_no));
            section = Section::Pre;
            continue;
        }
        if let Some(rest) = keyed(trimmed, &["Effects", "Effect"]) {
            let d = draft
                .as_mut()
                .ok_or_else(|| syntax(pos, "section before any operator name"))?;
            if d.pre.is_none() || d.eff.is_some() {
                return Err(syntax(pos, "unexpected `- Effects:`"));
            }
            d.eff = Some((rest.to_string(), line_no));
            section = Section::Eff;
            continue;
        }
        if let Some(rest) = keyed(trimmed, &["Semantic", "Action Semantic", "Description"]) {
            let d = draft
                .as_mut()
                .ok_or_else(|| syntax(pos, "section before any operator name"))?;
            if section != Section::Header {
                return Err(syntax(pos, "`- Semantic:` must precede the preconditions"));
            }
            d.semantic = Some(rest.trim().to_string());
            continue;
        }

        let content = strip_bullet(trimmed);
        let starts_block = !trimmed.starts_with('-')
            && !content.starts_with('(')
            && !content.starts_with(')')
            && !content.eq_ignore_ascii_case("none");
        if starts_block && section != Section::Pre {
            if let Some(d) = draft.take() {
                ops.push(finish(d, vocab)?);
            }
            if !is_identifier(content) {
                return Err(syntax(pos, format!("invalid operator name `{content}`")));
            }
            draft = Some(Draft {
                name: content.to_string(),
                name_pos: pos,
                semantic: None,
                pre: None,
                eff: None,
            });
            section = Section::Header;
            continue;
        }

        let d = draft
            .as_mut()
            .ok_or_else(|| syntax(pos, format!("expected an operator name, found `{trimmed}`")))?;
        let (buf, start) = match section {
            Section::Pre => d.pre.as_mut().expect("in pre section"),
            Section::Eff => d.eff.as_mut().expect("in effect section"),
            Section::Header => {
                return Err(syntax(pos, "expected `- Preconditions:`"));
            }
        };
        // Keep line alignment so nested parse errors point at the source line.
        let have = buf.matches('\n').count();
        for _ in have..(line_no - *start) {
            buf.push('\n');
        }
        buf.push_str(content);
    }
    if let Some(d) = draft {
        ops.push(finish(d, vocab)?);
    }
    Ok(ops)
}

/// Canonical block rendering; always ends with a newline.
pub fn serialize_operator(op: &ActionOperator) -> String {
    let mut out = String::new();
    out.push_str(&op.name);
    out.push('\n');
    if let Some(s) = &op.semantic {
        let _ = writeln!(out, "- Semantic: {s}");
    }
    if op.pre.is_empty() {
        out.push_str("- Preconditions: None\n");
    } else {
        out.push_str("- Preconditions:\n");
        for l in op.pre.literals() {
            let _ = writeln!(out, "{ITEM_INDENT}- {l}");
        }
        for q in op.pre.quantified() {
            let _ = writeln!(out, "{ITEM_INDENT}- {q}");
        }
    }
    if op.eff.is_empty() {
        out.push_str("- Effects: None\n");
    } else {
        out.push_str("- Effects:\n");
        for a in op.eff.adds() {
            let _ = writeln!(out, "{ITEM_INDENT}- {a}");
        }
        for a in op.eff.dels() {
            let _ = writeln!(out, "{ITEM_INDENT}- (not {a})");
        }
    }
    out
}

/// Blocks separated by one blank line.
pub fn serialize_operators<'a>(ops: impl IntoIterator<Item = &'a ActionOperator>) -> String {
    ops.into_iter()
        .map(serialize_operator)
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRASP_BLOCK: &str = "\
MoveGripperToSurroundOrange
- Preconditions:
- (GripperSurrounding orange)
- (GripperOpen)
- (forall (?y - thing)
    (not (GripperHolding ?y))
  )
- Effects:
- (GripperClosed)
- (GripperHolding orange)
- (not (GripperOpen))
- (not (GripperSurrounding orange))
";

    #[test]
    fn parses_the_multi_line_forall_layout() {
        let ops = parse_operator_blocks(GRASP_BLOCK, 1, None).unwrap();
        assert_eq!(ops.len(), 1);
        let op = &ops[0];
        assert_eq!(op.name, "MoveGripperToSurroundOrange");
        assert_eq!(op.pre.literals().len(), 2);
        assert_eq!(op.pre.quantified().len(), 1);
        assert_eq!(op.eff.adds().len(), 2);
        assert_eq!(op.eff.dels().len(), 2);
    }

    #[test]
    fn canonical_form_reparses_equal() {
        let op = parse_operator_blocks(GRASP_BLOCK, 1, None).unwrap().remove(0);
        let text = serialize_operator(&op);
        let again = parse_operator_blocks(&text, 1, None).unwrap().remove(0);
        assert_eq!(op, again);
        assert_eq!(serialize_operator(&again), text);
    }

    #[test]
    fn none_sections_and_semantic_lines() {
        let text = "Wait\n- Semantic: Wait for the arm to settle\n- Preconditions: None\n- Effects: None\n";
        let op = parse_operator_blocks(text, 1, None).unwrap().remove(0);
        assert!(op.noop);
        assert!(op.pre.is_empty());
        assert_eq!(op.semantic.as_deref(), Some("Wait for the arm to settle"));
        assert_eq!(serialize_operator(&op), text);
    }

    #[test]
    fn missing_effects_section_is_reported() {
        let err = parse_operator_blocks("Grab\n- Preconditions: None\n", 3, None).unwrap_err();
        assert!(matches!(err, FormatError::Syntax { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn disjunction_is_rejected() {
        let text = "A\n- Preconditions:\n  - (or (Open x) (Closed x))\n- Effects:\n  - (Open y)\n";
        assert!(parse_operator_blocks(text, 1, None).is_err());
    }

    #[test]
    fn error_lines_point_into_sections() {
        let text = "A\n- Preconditions:\n  - (Open x)\n  - (Open X)\n- Effects:\n  - (Open y)\n";
        match parse_operator_blocks(text, 10, None).unwrap_err() {
            FormatError::Symbol { line, .. } => assert_eq!(line, 13),
            other => panic!("unexpected {other:?}"),
        }
    }
}
