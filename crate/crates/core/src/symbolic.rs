//! Grounded atoms, closed-world states, conditions, effects and operators.
//!
//! Everything here is immutable once built. Conditions and effects keep the
//! order in which their literals were written (so serialization is stable),
//! but equality is set equality: two operators written with their
//! preconditions in a different order compare equal.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Type tag every object carries unless declared otherwise.
pub const ROOT_TYPE: &str = "thing";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SymbolicError {
    #[error("invalid object name `{0}` (expected [a-z][a-z0-9_]*)")]
    InvalidObjectName(String),
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("conflicting effect: {0} is both added and deleted")]
    ConflictingEffect(Atom),
    #[error("operator `{0}` has no effects and is not flagged as a no-op")]
    EmptyEffects(String),
    #[error("quantified template over ?{var} must mention ?{var} and no other variable")]
    InvalidTemplate { var: String },
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("predicate `{name}` expects {expected} argument(s), found {found}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("unbound variable ?{0}")]
    UnboundVariable(String),
    #[error("unknown type `{0}`")]
    UnknownType(String),
}

pub type Result<T, E = SymbolicError> = std::result::Result<T, E>;

pub(crate) fn is_object_token(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// An object of the scene, e.g. `hinge_lid`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectName(Arc<str>);

impl ObjectName {
    pub fn new(token: &str) -> Result<Self> {
        if is_object_token(token) {
            Ok(ObjectName(Arc::from(token)))
        } else {
            Err(SymbolicError::InvalidObjectName(token.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ObjectName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A predicate declaration such as `(OnTopOf ?a ?b)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateSchema {
    pub name: Arc<str>,
    /// Parameter variable names paired with their type tags.
    pub params: Vec<(String, String)>,
}

impl PredicateSchema {
    pub fn new(name: &str, params: Vec<(String, String)>) -> Result<Self> {
        if !is_identifier(name) {
            return Err(SymbolicError::InvalidIdentifier(name.to_string()));
        }
        Ok(PredicateSchema {
            name: Arc::from(name),
            params,
        })
    }

    /// Schema with `arity` parameters of the root type, named `?a`, `?b`, ...
    pub fn untyped(name: &str, arity: usize) -> Result<Self> {
        let params = (0..arity)
            .map(|i| (default_var_name(i), ROOT_TYPE.to_string()))
            .collect();
        Self::new(name, params)
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn param_types(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|(_, t)| t.as_str())
    }
}

fn default_var_name(i: usize) -> String {
    let letter = (b'a' + (i % 26) as u8) as char;
    if i < 26 {
        letter.to_string()
    } else {
        format!("{letter}{}", i / 26)
    }
}

/// Set of predicate schemas, unique by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    schemas: BTreeMap<Arc<str>, PredicateSchema>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a schema; returns false if the name was already declared.
    pub fn insert(&mut self, schema: PredicateSchema) -> bool {
        if self.schemas.contains_key(&schema.name) {
            return false;
        }
        self.schemas.insert(schema.name.clone(), schema);
        true
    }

    pub fn get(&self, name: &str) -> Option<&PredicateSchema> {
        self.schemas.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.schemas.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.schemas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemas.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PredicateSchema> {
        self.schemas.values()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.schemas.keys().map(|k| &**k)
    }

    pub fn check_predicate(&self, name: &str, arity: usize) -> Result<()> {
        let schema = self
            .get(name)
            .ok_or_else(|| SymbolicError::UnknownPredicate(name.to_string()))?;
        if schema.arity() != arity {
            return Err(SymbolicError::ArityMismatch {
                name: name.to_string(),
                expected: schema.arity(),
                found: arity,
            });
        }
        Ok(())
    }

    pub fn check_atom(&self, atom: &Atom) -> Result<()> {
        self.check_predicate(atom.predicate(), atom.args().len())
    }

    pub fn check_operator(&self, op: &ActionOperator) -> Result<()> {
        for lit in op.pre.literals() {
            self.check_atom(&lit.atom)?;
        }
        for q in op.pre.quantified() {
            self.check_predicate(&q.pattern.predicate, q.pattern.args.len())?;
        }
        for atom in op.eff.adds().iter().chain(op.eff.dels()) {
            self.check_atom(atom)?;
        }
        Ok(())
    }
}

/// A grounded atom, e.g. `(OnTopOf apple floor)`.
///
/// Ordering is by predicate name, then arguments.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    predicate: Arc<str>,
    args: Vec<ObjectName>,
}

impl Atom {
    pub fn new(predicate: &str, args: Vec<ObjectName>) -> Result<Self> {
        if !is_identifier(predicate) {
            return Err(SymbolicError::InvalidIdentifier(predicate.to_string()));
        }
        Ok(Atom {
            predicate: Arc::from(predicate),
            args,
        })
    }

    /// Convenience constructor from string tokens.
    pub fn parse_parts(predicate: &str, args: &[&str]) -> Result<Self> {
        let args = args
            .iter()
            .map(|a| ObjectName::new(a))
            .collect::<Result<Vec<_>>>()?;
        Self::new(predicate, args)
    }

    pub fn predicate(&self) -> &str {
        &self.predicate
    }

    pub fn args(&self) -> &[ObjectName] {
        &self.args
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A possibly negated atom. Negation is closed-world absence.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub positive: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal {
            atom,
            positive: true,
        }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal {
            atom,
            positive: false,
        }
    }

    pub fn holds_in(&self, state: &State) -> bool {
        state.contains(&self.atom) == self.positive
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "(not {})", self.atom)
        }
    }
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Object(ObjectName),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Object(o) => write!(f, "{o}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomPattern {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl AtomPattern {
    fn ground(&self, var: &str, value: &ObjectName) -> Result<Atom> {
        let args = self
            .args
            .iter()
            .map(|t| match t {
                Term::Object(o) => Ok(o.clone()),
                Term::Var(v) if v == var => Ok(value.clone()),
                Term::Var(v) => Err(SymbolicError::UnboundVariable(v.clone())),
            })
            .collect::<Result<Vec<_>>>()?;
        Atom::new(&self.predicate, args)
    }
}

impl fmt::Display for AtomPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// `(forall (?var - type) (not pattern))`.
#[derive(Debug, Clone, Eq, Hash)]
pub struct QuantifiedNegation {
    pub var: String,
    pub type_tag: String,
    pub pattern: AtomPattern,
}

impl QuantifiedNegation {
    pub fn new(var: &str, type_tag: &str, pattern: AtomPattern) -> Result<Self> {
        let q = QuantifiedNegation {
            var: var.to_string(),
            type_tag: type_tag.to_string(),
            pattern,
        };
        q.check_single_variable()?;
        Ok(q)
    }

    fn check_single_variable(&self) -> Result<()> {
        let mut mentions_bound = false;
        for t in &self.pattern.args {
            if let Term::Var(v) = t {
                if v == &self.var {
                    mentions_bound = true;
                } else {
                    return Err(SymbolicError::UnboundVariable(v.clone()));
                }
            }
        }
        if mentions_bound {
            Ok(())
        } else {
            Err(SymbolicError::InvalidTemplate {
                var: self.var.clone(),
            })
        }
    }

    /// Pattern with the bound variable renamed to a placeholder, so that
    /// alpha-equivalent templates compare equal.
    fn canonical(&self) -> (String, AtomPattern) {
        let args = self
            .pattern
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) if v == &self.var => Term::Var(String::new()),
                other => other.clone(),
            })
            .collect();
        (
            self.type_tag.clone(),
            AtomPattern {
                predicate: self.pattern.predicate.clone(),
                args,
            },
        )
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectName> {
        self.pattern.args.iter().filter_map(|t| match t {
            Term::Object(o) => Some(o),
            Term::Var(_) => None,
        })
    }
}

impl PartialEq for QuantifiedNegation {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl PartialOrd for QuantifiedNegation {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QuantifiedNegation {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.canonical().cmp(&other.canonical())
    }
}

impl fmt::Display for QuantifiedNegation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(forall (?{} - {}) (not {}))",
            self.var, self.type_tag, self.pattern
        )
    }
}

fn dedup_in_order<T: Ord + Clone>(items: Vec<T>) -> Vec<T> {
    let mut seen = BTreeSet::new();
    items
        .into_iter()
        .filter(|x| seen.insert(x.clone()))
        .collect()
}

/// Conjunction of literals and single-variable `forall`-not templates.
#[derive(Debug, Clone, Default)]
pub struct Condition {
    literals: Vec<Literal>,
    quantified: Vec<QuantifiedNegation>,
}

impl Condition {
    pub fn new(literals: Vec<Literal>, quantified: Vec<QuantifiedNegation>) -> Result<Self> {
        for q in &quantified {
            q.check_single_variable()?;
        }
        Ok(Condition {
            literals: dedup_in_order(literals),
            quantified: dedup_in_order(quantified),
        })
    }

    pub fn from_literals(literals: Vec<Literal>) -> Self {
        Condition {
            literals: dedup_in_order(literals),
            quantified: Vec::new(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn quantified(&self) -> &[QuantifiedNegation] {
        &self.quantified
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty() && self.quantified.is_empty()
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectName> {
        self.literals
            .iter()
            .flat_map(|l| l.atom.args())
            .chain(self.quantified.iter().flat_map(|q| q.objects()))
    }

    fn key(&self) -> (BTreeSet<&Literal>, BTreeSet<&QuantifiedNegation>) {
        (self.literals.iter().collect(), self.quantified.iter().collect())
    }
}

impl PartialEq for Condition {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Condition {}

/// Add and delete lists. An atom may not appear in both.
#[derive(Debug, Clone, Default)]
pub struct EffectSpec {
    adds: Vec<Atom>,
    dels: Vec<Atom>,
}

impl EffectSpec {
    pub fn new(adds: Vec<Atom>, dels: Vec<Atom>) -> Result<Self> {
        let adds = dedup_in_order(adds);
        let dels = dedup_in_order(dels);
        let add_set: BTreeSet<&Atom> = adds.iter().collect();
        if let Some(a) = dels.iter().find(|d| add_set.contains(d)) {
            return Err(SymbolicError::ConflictingEffect(a.clone()));
        }
        Ok(EffectSpec { adds, dels })
    }

    pub fn adds(&self) -> &[Atom] {
        &self.adds
    }

    pub fn dels(&self) -> &[Atom] {
        &self.dels
    }

    pub fn is_empty(&self) -> bool {
        self.adds.is_empty() && self.dels.is_empty()
    }

    pub fn touches(&self, atom: &Atom) -> bool {
        self.adds.contains(atom) || self.dels.contains(atom)
    }

    fn key(&self) -> (BTreeSet<&Atom>, BTreeSet<&Atom>) {
        (self.adds.iter().collect(), self.dels.iter().collect())
    }
}

impl PartialEq for EffectSpec {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for EffectSpec {}

/// A closed-world symbolic state: the set of atoms that hold.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State(BTreeSet<Atom>);

impl State {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.0.contains(atom)
    }

    pub fn insert(&mut self, atom: Atom) -> bool {
        self.0.insert(atom)
    }

    pub fn remove(&mut self, atom: &Atom) -> bool {
        self.0.remove(atom)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.0.iter()
    }

    pub fn atoms(&self) -> &BTreeSet<Atom> {
        &self.0
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectName> {
        self.0.iter().flat_map(|a| a.args())
    }

    /// `(self \ dels) ∪ adds`.
    pub fn apply(&self, eff: &EffectSpec) -> State {
        let mut next = self.clone();
        for d in eff.dels() {
            next.0.remove(d);
        }
        for a in eff.adds() {
            next.0.insert(a.clone());
        }
        next
    }

    /// Every atom is over an object of `universe`.
    pub fn check_grounded(&self, universe: &ObjectUniverse) -> Result<()> {
        match self.objects().find(|o| !universe.contains(o)) {
            Some(o) => Err(SymbolicError::UnknownObject(o.to_string())),
            None => Ok(()),
        }
    }
}

impl FromIterator<Atom> for State {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        State(iter.into_iter().collect())
    }
}

impl IntoIterator for State {
    type Item = Atom;
    type IntoIter = std::collections::btree_set::IntoIter<Atom>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

impl<'a> IntoIterator for &'a State {
    type Item = &'a Atom;
    type IntoIter = std::collections::btree_set::Iter<'a, Atom>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.iter()).finish()
    }
}

/// A grounded action operator `(name, pre, eff)`.
///
/// Equality covers the name and the normalized precondition and effects; the
/// free-text description is not part of an operator's identity.
#[derive(Debug, Clone)]
pub struct ActionOperator {
    pub name: String,
    pub pre: Condition,
    pub eff: EffectSpec,
    pub semantic: Option<String>,
    pub noop: bool,
}

/// Operators are shared between the library, the demonstrated procedure and
/// adapted procedures.
pub type OpRef = Arc<ActionOperator>;

impl ActionOperator {
    pub fn new(name: &str, pre: Condition, eff: EffectSpec) -> Result<Self> {
        if !is_identifier(name) {
            return Err(SymbolicError::InvalidIdentifier(name.to_string()));
        }
        if eff.is_empty() {
            return Err(SymbolicError::EmptyEffects(name.to_string()));
        }
        Ok(ActionOperator {
            name: name.to_string(),
            pre,
            eff,
            semantic: None,
            noop: false,
        })
    }

    /// An operator explicitly flagged as having no effects.
    pub fn noop(name: &str, pre: Condition) -> Result<Self> {
        if !is_identifier(name) {
            return Err(SymbolicError::InvalidIdentifier(name.to_string()));
        }
        Ok(ActionOperator {
            name: name.to_string(),
            pre,
            eff: EffectSpec::default(),
            semantic: None,
            noop: true,
        })
    }

    pub fn with_semantic(mut self, text: impl Into<String>) -> Self {
        self.semantic = Some(text.into());
        self
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectName> {
        self.pre.objects().chain(
            self.eff
                .adds()
                .iter()
                .chain(self.eff.dels())
                .flat_map(|a| a.args()),
        )
    }

    pub fn check_grounded(&self, universe: &ObjectUniverse) -> Result<()> {
        match self.objects().find(|o| !universe.contains(o)) {
            Some(o) => Err(SymbolicError::UnknownObject(o.to_string())),
            None => Ok(()),
        }
    }
}

impl PartialEq for ActionOperator {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.noop == other.noop
            && self.pre == other.pre
            && self.eff == other.eff
    }
}

impl Eq for ActionOperator {}

/// The closed object set `Q`, each object with a type tag.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObjectUniverse {
    objects: BTreeMap<ObjectName, String>,
}

impl ObjectUniverse {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a ObjectName>) -> Self {
        let mut u = Self::new();
        for n in names {
            u.insert(n.clone(), ROOT_TYPE);
        }
        u
    }

    /// Adds `name`; an existing type tag is kept.
    pub fn insert(&mut self, name: ObjectName, type_tag: &str) {
        self.objects
            .entry(name)
            .or_insert_with(|| type_tag.to_string());
    }

    pub fn contains(&self, name: &ObjectName) -> bool {
        self.objects.contains_key(name)
    }

    pub fn type_of(&self, name: &ObjectName) -> Option<&str> {
        self.objects.get(name).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ObjectName, &str)> {
        self.objects.iter().map(|(n, t)| (n, t.as_str()))
    }

    pub fn names(&self) -> impl Iterator<Item = &ObjectName> {
        self.objects.keys()
    }

    pub fn knows_type(&self, tag: &str) -> bool {
        tag == ROOT_TYPE || self.objects.values().any(|t| t == tag)
    }

    /// Objects a variable of type `tag` ranges over. Every object is a `thing`.
    pub fn objects_of_type<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a ObjectName> {
        self.objects
            .iter()
            .filter(move |(_, t)| tag == ROOT_TYPE || t.as_str() == tag)
            .map(|(n, _)| n)
    }

    pub fn union(&self, other: &ObjectUniverse) -> ObjectUniverse {
        let mut u = self.clone();
        for (n, t) in other.iter() {
            u.insert(n.clone(), t);
        }
        u
    }

    pub fn extend_with_state(&mut self, state: &State) {
        for o in state.objects() {
            self.insert(o.clone(), ROOT_TYPE);
        }
    }
}

/// Expands quantified templates over `universe`; plain literals pass through.
pub fn ground_condition(cond: &Condition, universe: &ObjectUniverse) -> Result<BTreeSet<Literal>> {
    let mut out: BTreeSet<Literal> = cond.literals.iter().cloned().collect();
    for q in &cond.quantified {
        q.check_single_variable()?;
        if !universe.knows_type(&q.type_tag) {
            return Err(SymbolicError::UnknownType(q.type_tag.clone()));
        }
        for obj in universe.objects_of_type(&q.type_tag) {
            out.insert(Literal::neg(q.pattern.ground(&q.var, obj)?));
        }
    }
    Ok(out)
}

fn check_condition_objects(cond: &Condition, universe: &ObjectUniverse) -> Result<()> {
    match cond.objects().find(|o| !universe.contains(o)) {
        Some(o) => Err(SymbolicError::UnknownObject(o.to_string())),
        None => Ok(()),
    }
}

/// Grounded literals of `cond` that do not hold in `state`, in sorted order.
pub fn unmet_literals(
    state: &State,
    cond: &Condition,
    universe: &ObjectUniverse,
) -> Result<Vec<Literal>> {
    check_condition_objects(cond, universe)?;
    Ok(ground_condition(cond, universe)?
        .into_iter()
        .filter(|l| !l.holds_in(state))
        .collect())
}

/// Closed-world entailment of a condition.
pub fn entails(state: &State, cond: &Condition, universe: &ObjectUniverse) -> Result<bool> {
    Ok(unmet_literals(state, cond, universe)?.is_empty())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateDiff {
    pub adds: BTreeSet<Atom>,
    pub dels: BTreeSet<Atom>,
}

/// `adds = next \ prev`, `dels = prev \ next`.
pub fn state_diff(prev: &State, next: &State) -> StateDiff {
    StateDiff {
        adds: next.0.difference(&prev.0).cloned().collect(),
        dels: prev.0.difference(&next.0).cloned().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(p: &str, args: &[&str]) -> Atom {
        Atom::parse_parts(p, args).unwrap()
    }

    fn holding_forall() -> QuantifiedNegation {
        QuantifiedNegation::new(
            "y",
            ROOT_TYPE,
            AtomPattern {
                predicate: "GripperHolding".into(),
                args: vec![Term::Var("y".into())],
            },
        )
        .unwrap()
    }

    fn universe(names: &[&str]) -> ObjectUniverse {
        let mut u = ObjectUniverse::new();
        for n in names {
            u.insert(ObjectName::new(n).unwrap(), ROOT_TYPE);
        }
        u
    }

    #[test]
    fn object_names_are_validated() {
        assert!(ObjectName::new("hinge_lid").is_ok());
        assert!(ObjectName::new("cube2").is_ok());
        assert!(ObjectName::new("").is_err());
        assert!(ObjectName::new("Hinge").is_err());
        assert!(ObjectName::new("2cube").is_err());
        assert!(ObjectName::new("a-b").is_err());
    }

    #[test]
    fn negated_precondition_fails_when_atom_present() {
        let state: State = [atom("Closed", &["hinge_lid"])].into_iter().collect();
        let cond = Condition::from_literals(vec![Literal::neg(atom("Closed", &["hinge_lid"]))]);
        assert!(!entails(&state, &cond, &universe(&["hinge_lid"])).unwrap());
    }

    #[test]
    fn empty_condition_is_vacuous() {
        let state: State = [atom("Open", &["box"])].into_iter().collect();
        assert!(entails(&state, &Condition::empty(), &universe(&["box"])).unwrap());
        assert!(entails(&State::new(), &Condition::empty(), &ObjectUniverse::new()).unwrap());
    }

    #[test]
    fn forall_expands_over_universe() {
        let state: State = [atom("GripperHolding", &["orange"])].into_iter().collect();
        let cond = Condition::new(vec![], vec![holding_forall()]).unwrap();
        let u = universe(&["orange", "apple"]);
        assert!(!entails(&state, &cond, &u).unwrap());

        let grounded = ground_condition(&cond, &u).unwrap();
        let expected: BTreeSet<Literal> = [
            Literal::neg(atom("GripperHolding", &["orange"])),
            Literal::neg(atom("GripperHolding", &["apple"])),
        ]
        .into_iter()
        .collect();
        assert_eq!(grounded, expected);
    }

    #[test]
    fn forall_over_empty_universe_is_empty() {
        let cond = Condition::new(vec![], vec![holding_forall()]).unwrap();
        assert!(ground_condition(&cond, &ObjectUniverse::new())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn plain_literals_pass_through_grounding() {
        let lits = vec![
            Literal::pos(atom("GripperOpen", &[])),
            Literal::neg(atom("Closed", &["lid"])),
        ];
        let cond = Condition::from_literals(lits.clone());
        let grounded = ground_condition(&cond, &universe(&["lid"])).unwrap();
        assert_eq!(grounded, lits.into_iter().collect());
    }

    #[test]
    fn unbound_variable_is_a_grounding_error() {
        let q = QuantifiedNegation {
            var: "y".into(),
            type_tag: ROOT_TYPE.into(),
            pattern: AtomPattern {
                predicate: "OnTopOf".into(),
                args: vec![Term::Var("y".into()), Term::Var("z".into())],
            },
        };
        assert_eq!(
            QuantifiedNegation::new("y", ROOT_TYPE, q.pattern.clone()).unwrap_err(),
            SymbolicError::UnboundVariable("z".into())
        );
        let cond = Condition {
            literals: vec![],
            quantified: vec![q],
        };
        assert_eq!(
            ground_condition(&cond, &universe(&["a"])).unwrap_err(),
            SymbolicError::UnboundVariable("z".into())
        );
    }

    #[test]
    fn unknown_object_in_condition_is_reported() {
        let cond = Condition::from_literals(vec![Literal::pos(atom("Open", &["drawer"]))]);
        assert_eq!(
            entails(&State::new(), &cond, &universe(&["box"])).unwrap_err(),
            SymbolicError::UnknownObject("drawer".into())
        );
    }

    #[test]
    fn typed_quantifier_only_ranges_over_matching_objects() {
        let mut u = ObjectUniverse::new();
        u.insert(ObjectName::new("lid").unwrap(), "container");
        u.insert(ObjectName::new("apple").unwrap(), ROOT_TYPE);
        let q = QuantifiedNegation::new(
            "c",
            "container",
            AtomPattern {
                predicate: "Closed".into(),
                args: vec![Term::Var("c".into())],
            },
        )
        .unwrap();
        let cond = Condition::new(vec![], vec![q]).unwrap();
        assert_eq!(ground_condition(&cond, &u).unwrap().len(), 1);

        let bad = Condition::new(
            vec![],
            vec![QuantifiedNegation::new(
                "c",
                "furniture",
                AtomPattern {
                    predicate: "Closed".into(),
                    args: vec![Term::Var("c".into())],
                },
            )
            .unwrap()],
        )
        .unwrap();
        assert_eq!(
            ground_condition(&bad, &u).unwrap_err(),
            SymbolicError::UnknownType("furniture".into())
        );
    }

    #[test]
    fn conflicting_effects_are_rejected() {
        let a = atom("GripperOpen", &[]);
        assert_eq!(
            EffectSpec::new(vec![a.clone()], vec![a.clone()]).unwrap_err(),
            SymbolicError::ConflictingEffect(a)
        );
    }

    #[test]
    fn operators_need_effects_unless_noop() {
        assert!(ActionOperator::new("Wait", Condition::empty(), EffectSpec::default()).is_err());
        assert!(ActionOperator::noop("Wait", Condition::empty()).is_ok());
    }

    #[test]
    fn orange_grasp_diff_is_exact() {
        let prev: State = [
            atom("GripperOpen", &[]),
            atom("GripperSurrounding", &["orange"]),
        ]
        .into_iter()
        .collect();
        let next: State = [
            atom("GripperClosed", &[]),
            atom("GripperHolding", &["orange"]),
        ]
        .into_iter()
        .collect();
        let d = state_diff(&prev, &next);
        assert_eq!(d.adds, next.atoms().clone());
        assert_eq!(d.dels, prev.atoms().clone());
        assert_eq!(state_diff(&prev, &prev), StateDiff::default());
    }

    #[test]
    fn condition_equality_ignores_order_and_duplicates() {
        let a = Literal::pos(atom("GripperOpen", &[]));
        let b = Literal::neg(atom("Closed", &["lid"]));
        let c1 = Condition::from_literals(vec![a.clone(), b.clone(), a.clone()]);
        let c2 = Condition::from_literals(vec![b, a]);
        assert_eq!(c1, c2);
        assert_eq!(c1.literals().len(), 2);
    }

    #[test]
    fn alpha_equivalent_quantifiers_compare_equal() {
        let mk = |v: &str| {
            QuantifiedNegation::new(
                v,
                ROOT_TYPE,
                AtomPattern {
                    predicate: "GripperHolding".into(),
                    args: vec![Term::Var(v.into())],
                },
            )
            .unwrap()
        };
        assert_eq!(mk("x"), mk("y"));
    }
}
