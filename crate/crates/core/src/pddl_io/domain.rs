use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::blocks::{condition_from, effects_from, parse_operator_blocks, serialize_operators};
use super::sexpr::{syntax, Reader, SExpr};
use super::FormatError;
use crate::symbolic::{
    is_identifier, ActionOperator, ObjectName, ObjectUniverse, PredicateSchema, Vocabulary,
    ROOT_TYPE,
};

/// Predicates, declared objects and operators.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Domain {
    pub name: Option<String>,
    pub vocabulary: Vocabulary,
    /// Declared objects plus every object mentioned by an operator.
    pub universe: ObjectUniverse,
    pub operators: Vec<ActionOperator>,
}

/// `?a ?b - type ?c` style typed list. Untyped trailing items get `thing`.
fn typed_list<'a>(items: &'a [SExpr], what: &str) -> Result<Vec<(&'a str, String, SExpr)>, FormatError> {
    let mut out = Vec::new();
    let mut pending: Vec<(&str, SExpr)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let tok = items[i]
            .as_token()
            .ok_or_else(|| syntax(items[i].pos(), format!("expected {what}")))?;
        if tok == "-" {
            let ty = items
                .get(i + 1)
                .and_then(SExpr::as_token)
                .filter(|t| is_identifier(t))
                .ok_or_else(|| syntax(items[i].pos(), "expected a type name after `-`"))?;
            if pending.is_empty() {
                return Err(syntax(items[i].pos(), "type annotation without a name"));
            }
            for (n, sx) in pending.drain(..) {
                out.push((n, ty.to_string(), sx));
            }
            i += 2;
            continue;
        }
        pending.push((tok, items[i].clone()));
        i += 1;
    }
    for (n, sx) in pending {
        out.push((n, ROOT_TYPE.to_string(), sx));
    }
    Ok(out)
}

fn predicate_decl(sx: &SExpr) -> Result<PredicateSchema, FormatError> {
    let items = sx
        .as_list()
        .ok_or_else(|| syntax(sx.pos(), "expected `(Name ?param ...)`"))?;
    let (head, rest) = items
        .split_first()
        .ok_or_else(|| syntax(sx.pos(), "empty predicate declaration"))?;
    let name = head
        .as_token()
        .filter(|t| is_identifier(t))
        .ok_or_else(|| syntax(head.pos(), "predicate name expected"))?;
    let mut params = Vec::new();
    for (var, ty, psx) in typed_list(rest, "a parameter")? {
        let v = var
            .strip_prefix('?')
            .filter(|v| !v.is_empty())
            .ok_or_else(|| syntax(psx.pos(), format!("parameter `{var}` must start with `?`")))?;
        params.push((v.to_string(), ty));
    }
    PredicateSchema::new(name, params).map_err(|e| FormatError::Symbol {
        line: sx.pos().line,
        source: e,
    })
}

fn predicates_section(items: &[SExpr], vocab: &mut Vocabulary) -> Result<(), FormatError> {
    for sx in items {
        let schema = predicate_decl(sx)?;
        let name = schema.name.to_string();
        if !vocab.insert(schema) {
            return Err(FormatError::DuplicatePredicate(name));
        }
    }
    Ok(())
}

fn objects_section(items: &[SExpr], universe: &mut ObjectUniverse) -> Result<(), FormatError> {
    for (name, ty, sx) in typed_list(items, "an object name")? {
        let obj = ObjectName::new(name).map_err(|e| FormatError::Symbol {
            line: sx.pos().line,
            source: e,
        })?;
        universe.insert(obj, &ty);
    }
    Ok(())
}

fn add_operator_objects(universe: &mut ObjectUniverse, ops: &[ActionOperator]) {
    for op in ops {
        for o in op.objects() {
            universe.insert(o.clone(), ROOT_TYPE);
        }
    }
}

/// Parses either the prose-block domain form or the `(define (domain ...))`
/// interchange form.
pub fn parse_domain(text: &str) -> Result<Domain, FormatError> {
    let mut reader = Reader::new(text, 1);
    if reader.peek_significant() != Some('(') {
        return Err(syntax(reader.pos(), "expected `(:predicates ...)` or `(define ...)`"));
    }
    let first = reader.parse_one()?;
    if first.head() == Some("define") {
        if reader.peek_significant().is_some() {
            return Err(syntax(reader.pos(), "trailing content after `(define ...)`"));
        }
        return parse_pddl(&first);
    }

    let mut domain = Domain::default();
    let mut form = Some(first);
    let mut seen_predicates = false;
    loop {
        let Some(sx) = form.take() else { break };
        let items = sx.as_list().expect("parsed from `(`");
        match sx.head() {
            Some(":domain") if domain.name.is_none() && !seen_predicates => {
                let name = items
                    .get(1)
                    .and_then(SExpr::as_token)
                    .filter(|t| is_identifier(t) && items.len() == 2)
                    .ok_or_else(|| syntax(sx.pos(), "expected `(:domain name)`"))?;
                domain.name = Some(name.to_string());
            }
            Some(":predicates") if !seen_predicates => {
                predicates_section(&items[1..], &mut domain.vocabulary)?;
                seen_predicates = true;
            }
            Some(":objects") if seen_predicates => {
                objects_section(&items[1..], &mut domain.universe)?;
            }
            _ => {
                return Err(syntax(
                    sx.pos(),
                    format!("unexpected section `{}`", sx.head().unwrap_or("()")),
                ))
            }
        }
        if reader.peek_significant() == Some('(') {
            form = Some(reader.parse_one()?);
        }
    }
    if !seen_predicates {
        return Err(syntax(reader.pos(), "missing `(:predicates ...)`"));
    }
    let rest = &text[reader.offset()..];
    domain.operators = parse_operator_blocks(rest, reader.pos().line, Some(&domain.vocabulary))?;
    add_operator_objects(&mut domain.universe, &domain.operators);
    Ok(domain)
}

fn action_section<'a>(items: &'a [SExpr], key: &str) -> Option<&'a SExpr> {
    items
        .iter()
        .position(|s| s.as_token() == Some(key))
        .and_then(|i| items.get(i + 1))
}

fn conjuncts(sx: &SExpr) -> &[SExpr] {
    match sx.as_list() {
        Some([]) => &[],
        Some([head, rest @ ..]) if head.as_token() == Some("and") => rest,
        _ => std::slice::from_ref(sx),
    }
}

fn pddl_action(sx: &SExpr, vocab: &Vocabulary) -> Result<ActionOperator, FormatError> {
    let items = sx.as_list().expect("action is a list");
    let name = items
        .get(1)
        .and_then(SExpr::as_token)
        .filter(|t| is_identifier(t))
        .ok_or_else(|| syntax(sx.pos(), "expected an action name"))?;
    let mut i = 2;
    while i < items.len() {
        match items[i].as_token() {
            Some(":parameters" | ":precondition" | ":effect") if i + 1 < items.len() => i += 2,
            _ => {
                return Err(syntax(
                    items[i].pos(),
                    "expected `:parameters`, `:precondition` or `:effect`",
                ))
            }
        }
    }
    if let Some(p) = action_section(items, ":parameters") {
        if p.as_list().map_or(true, |l| !l.is_empty()) {
            return Err(syntax(p.pos(), "only grounded actions (`:parameters ()`) are supported"));
        }
    }
    let pre = match action_section(items, ":precondition") {
        Some(p) => condition_from(conjuncts(p), Some(vocab))?,
        None => Default::default(),
    };
    let eff_items = action_section(items, ":effect").map_or(&[][..], conjuncts);
    let op = if eff_items.is_empty() {
        ActionOperator::noop(name, pre)
    } else {
        ActionOperator::new(name, pre, effects_from(eff_items, Some(vocab))?)
    };
    op.map_err(|e| FormatError::Symbol {
        line: sx.pos().line,
        source: e,
    })
}

fn parse_pddl(define: &SExpr) -> Result<Domain, FormatError> {
    let items = define.as_list().expect("define is a list");
    let name = items
        .get(1)
        .and_then(SExpr::as_list)
        .and_then(|l| match l {
            [d, n] if d.as_token() == Some("domain") => n.as_token(),
            _ => None,
        })
        .filter(|n| is_identifier(n))
        .ok_or_else(|| syntax(define.pos(), "expected `(define (domain name) ...)`"))?;
    let mut domain = Domain {
        name: Some(name.to_string()),
        ..Domain::default()
    };
    let mut actions = Vec::new();
    for sx in &items[2..] {
        let sec = sx
            .as_list()
            .ok_or_else(|| syntax(sx.pos(), "expected a section"))?;
        match sx.head() {
            Some(":predicates") => predicates_section(&sec[1..], &mut domain.vocabulary)?,
            Some(":constants" | ":objects") => objects_section(&sec[1..], &mut domain.universe)?,
            Some(":action") => actions.push(sx),
            other => {
                return Err(syntax(
                    sx.pos(),
                    format!("unsupported section `{}`", other.unwrap_or("()")),
                ))
            }
        }
    }
    for a in actions {
        domain.operators.push(pddl_action(a, &domain.vocabulary)?);
    }
    add_operator_objects(&mut domain.universe, &domain.operators);
    Ok(domain)
}

/// Prose-block form. Reparses to an equal [`Domain`].
pub fn serialize_domain(domain: &Domain) -> String {
    let mut out = String::new();
    if let Some(n) = &domain.name {
        let _ = writeln!(out, "(:domain {n})");
    }
    out.push_str("(:predicates");
    for schema in domain.vocabulary.iter() {
        let _ = write!(out, "\n  ({}", schema.name);
        for (v, t) in &schema.params {
            if t == ROOT_TYPE {
                let _ = write!(out, " ?{v}");
            } else {
                let _ = write!(out, " ?{v} - {t}");
            }
        }
        out.push(')');
    }
    out.push_str(")\n");
    if !domain.universe.is_empty() {
        let mut by_type: BTreeMap<&str, Vec<&ObjectName>> = BTreeMap::new();
        for (n, t) in domain.universe.iter() {
            by_type.entry(t).or_default().push(n);
        }
        out.push_str("(:objects");
        for (t, names) in by_type {
            out.push_str("\n ");
            for n in names {
                let _ = write!(out, " {n}");
            }
            let _ = write!(out, " - {t}");
        }
        out.push_str(")\n");
    }
    if !domain.operators.is_empty() {
        out.push('\n');
        out.push_str(&serialize_operators(&domain.operators));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_domain_has_no_operators() {
        let d = parse_domain("(:predicates (Open ?x) (GripperOpen))").unwrap();
        assert_eq!(d.vocabulary.len(), 2);
        assert!(d.operators.is_empty());
        assert_eq!(parse_domain(&serialize_domain(&d)).unwrap(), d);
    }

    #[test]
    fn unknown_predicate_in_operator() {
        let text = "(:predicates (Open ?x))\n\nShut\n- Preconditions: None\n- Effects:\n  - (Closed lid)\n";
        match parse_domain(text).unwrap_err() {
            FormatError::Symbol { line, .. } => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn arity_mismatch_is_reported() {
        let text = "(:predicates (Open ?x))\nA\n- Preconditions: None\n- Effects:\n  - (Open lid box)\n";
        assert!(matches!(
            parse_domain(text).unwrap_err(),
            FormatError::Symbol {
                source: crate::symbolic::SymbolicError::ArityMismatch { .. },
                ..
            }
        ));
    }

    #[test]
    fn pddl_interchange_form() {
        let text = "(define (domain kitchen)
  (:predicates (Open ?x - container) (Closed ?x - container) (GripperHolding ?x))
  (:constants lid - container orange)
  (:action OpenLid
    :parameters ()
    :precondition (and (Closed lid) (forall (?y) (not (GripperHolding ?y))))
    :effect (and (Open lid) (not (Closed lid)))))";
        let d = parse_domain(text).unwrap();
        assert_eq!(d.name.as_deref(), Some("kitchen"));
        assert_eq!(d.operators.len(), 1);
        assert_eq!(d.operators[0].pre.quantified().len(), 1);
        assert_eq!(d.universe.len(), 2);
        let again = parse_domain(&serialize_domain(&d)).unwrap();
        assert_eq!(again, d);
    }

    #[test]
    fn requirements_are_rejected() {
        let text = "(define (domain d) (:requirements :strips) (:predicates (P)))";
        assert!(matches!(parse_domain(text), Err(FormatError::Syntax { .. })));
    }

    #[test]
    fn duplicate_predicate() {
        assert_eq!(
            parse_domain("(:predicates (P) (P ?x))").unwrap_err(),
            FormatError::DuplicatePredicate("P".into())
        );
    }
}
