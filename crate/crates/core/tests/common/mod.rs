//! Fixture loading and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use counterplan::adaptation::{apply_patch, shared, Goal, PatchOutcome};
use counterplan::pddl_io::{parse_domain, parse_goal, parse_state, parse_trajectory, Domain};
use counterplan::proposers::SearchProposer;
use counterplan::scenario::ScenarioInstance;
use counterplan::symbolic::{AtomPattern, QuantifiedNegation, Term};
use counterplan::world_model::{build_world_model_in, WorldModel, DEFAULT_RETRY_LIMIT};
use counterplan::{
    rollout, ActionOperator, AdaptationReport, Atom, Condition, EffectSpec, Literal, ObjectName,
    ObjectUniverse, OpRef, State,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(rel: &str) -> String {
    format!("{}/fixtures/{rel}", env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture_path(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub struct FixtureSet {
    pub domain: Domain,
    pub model: WorldModel,
    pub deploy: State,
    pub goal: Goal,
}

/// Domain, world model (operators matched from the domain library), the
/// deployment state and goal of a fixture directory.
pub fn fixture_set(dir: &str, deploy_file: &str) -> FixtureSet {
    let domain = parse_domain(&fixture(&format!("{dir}/domain.pddl"))).unwrap();
    let vocab = Some(&domain.vocabulary);
    let doc = parse_trajectory(&fixture(&format!("{dir}/trajectory.json")), vocab).unwrap();
    let mut library = SearchProposer::new(shared(domain.operators.clone()), 1);
    let model = build_world_model_in(
        &doc,
        &mut library,
        DEFAULT_RETRY_LIMIT,
        &domain.universe,
        &domain.vocabulary,
    )
    .unwrap();
    let deploy = parse_state(&fixture(&format!("{dir}/{deploy_file}")), vocab).unwrap();
    let goal = parse_goal(&fixture(&format!("{dir}/goal.json")), vocab).unwrap();
    FixtureSet {
        domain,
        model,
        deploy,
        goal,
    }
}

pub fn library_of(domain: &Domain) -> Vec<OpRef> {
    shared(domain.operators.clone())
}

/// World model of a generated scenario, built the same way the suite does.
pub fn scenario_model(inst: &ScenarioInstance) -> WorldModel {
    let mut recover = SearchProposer::new(inst.operator_library.iter().cloned(), 1);
    build_world_model_in(
        &inst.demonstration,
        &mut recover,
        DEFAULT_RETRY_LIMIT,
        &ObjectUniverse::new(),
        &inst.vocabulary(),
    )
    .unwrap()
}

pub fn names(ops: &[OpRef]) -> Vec<String> {
    ops.iter().map(|o| o.name.clone()).collect()
}

// ---------------------------------------------------------------------------
// Executor oracle: plain set algebra over rendered atom strings.

fn render(pred: &str, args: &[String]) -> String {
    if args.is_empty() {
        format!("({pred})")
    } else {
        format!("({pred} {})", args.join(" "))
    }
}

fn render_atom(a: &Atom) -> String {
    render(a.predicate(), &a.args().iter().map(|o| o.as_str().to_string()).collect::<Vec<_>>())
}

pub fn state_strings(s: &State) -> BTreeSet<String> {
    s.iter().map(render_atom).collect()
}

/// `Ok(next)` or `Err(violated literals)`, both as strings.
pub fn oracle_execute(
    state: &State,
    op: &ActionOperator,
    universe: &[String],
) -> Result<BTreeSet<String>, BTreeSet<String>> {
    let s = state_strings(state);
    let mut violated = BTreeSet::new();
    for l in op.pre.literals() {
        let a = render_atom(&l.atom);
        let holds = s.contains(&a);
        if l.positive && !holds {
            violated.insert(a);
        } else if !l.positive && holds {
            violated.insert(format!("(not {a})"));
        }
    }
    for q in op.pre.quantified() {
        for o in universe {
            let args: Vec<String> = q
                .pattern
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(_) => o.clone(),
                    Term::Object(x) => x.as_str().to_string(),
                })
                .collect();
            let a = render(&q.pattern.predicate, &args);
            if s.contains(&a) {
                violated.insert(format!("(not {a})"));
            }
        }
    }
    if !violated.is_empty() {
        return Err(violated);
    }
    let dels: BTreeSet<String> = op.eff.dels().iter().map(render_atom).collect();
    let adds: BTreeSet<String> = op.eff.adds().iter().map(render_atom).collect();
    Ok(s.difference(&dels).cloned().chain(adds).collect())
}

// ---------------------------------------------------------------------------
// Random worlds.

const UNARY: [&str; 3] = ["Open", "Closed", "Marked"];
const BINARY: [&str; 2] = ["OnTopOf", "InsideOf"];
const NULLARY: [&str; 2] = ["GripperOpen", "Busy"];

pub fn random_objects(rng: &mut ChaCha8Rng, max: usize) -> Vec<String> {
    let n = rng.gen_range(1..=max);
    (0..n).map(|i| format!("o{i}")).collect()
}

pub fn universe_of(objects: &[String]) -> ObjectUniverse {
    let mut u = ObjectUniverse::new();
    for o in objects {
        u.insert(ObjectName::new(o).unwrap(), "thing");
    }
    u
}

pub fn random_atom(rng: &mut ChaCha8Rng, objects: &[String]) -> Atom {
    let pick = |rng: &mut ChaCha8Rng| objects[rng.gen_range(0..objects.len())].clone();
    match rng.gen_range(0..3) {
        0 => Atom::parse_parts(NULLARY[rng.gen_range(0..2)], &[]).unwrap(),
        1 => Atom::parse_parts(UNARY[rng.gen_range(0..3)], &[&pick(rng)]).unwrap(),
        _ => {
            let (a, b) = (pick(rng), pick(rng));
            Atom::parse_parts(BINARY[rng.gen_range(0..2)], &[&a, &b]).unwrap()
        }
    }
}

pub fn random_state(rng: &mut ChaCha8Rng, objects: &[String]) -> State {
    let n = rng.gen_range(0..=3 * objects.len() + 2);
    (0..n).map(|_| random_atom(rng, objects)).collect()
}

fn random_quantifier(rng: &mut ChaCha8Rng, objects: &[String]) -> QuantifiedNegation {
    let var = Term::Var("y".into());
    let obj = Term::Object(ObjectName::new(&objects[rng.gen_range(0..objects.len())]).unwrap());
    let pattern = if rng.gen_bool(0.4) {
        AtomPattern {
            predicate: UNARY[rng.gen_range(0..3)].into(),
            args: vec![var],
        }
    } else {
        let args = match rng.gen_range(0..3) {
            0 => vec![var, obj],
            1 => vec![obj, var],
            _ => vec![var.clone(), var],
        };
        AtomPattern {
            predicate: BINARY[rng.gen_range(0..2)].into(),
            args,
        }
    };
    QuantifiedNegation::new("y", "thing", pattern).unwrap()
}

pub fn random_operator(rng: &mut ChaCha8Rng, objects: &[String], state: &State) -> ActionOperator {
    // Bias half the preconditions toward the current state so both verdicts
    // are well represented.
    let n_lits = rng.gen_range(0..=4);
    let mut lits = Vec::new();
    let present: Vec<&Atom> = state.iter().collect();
    for _ in 0..n_lits {
        let lit = if !present.is_empty() && rng.gen_bool(0.5) {
            Literal::pos(present[rng.gen_range(0..present.len())].clone())
        } else if rng.gen_bool(0.5) {
            Literal::neg(random_atom(rng, objects))
        } else {
            Literal::pos(random_atom(rng, objects))
        };
        lits.push(lit);
    }
    let quants = (0..rng.gen_range(0..=2)).map(|_| random_quantifier(rng, objects)).collect();
    let pre = Condition::new(lits, quants).unwrap();
    let mut adds = BTreeSet::new();
    let mut dels = BTreeSet::new();
    let n_eff = rng.gen_range(1..=4);
    while adds.len() + dels.len() < n_eff {
        let a = if !present.is_empty() && rng.gen_bool(0.3) {
            present[rng.gen_range(0..present.len())].clone()
        } else {
            random_atom(rng, objects)
        };
        if adds.contains(&a) || dels.contains(&a) {
            continue;
        }
        if rng.gen_bool(0.5) {
            adds.insert(a);
        } else {
            dels.insert(a);
        }
    }
    let eff = EffectSpec::new(adds.into_iter().collect(), dels.into_iter().collect()).unwrap();
    ActionOperator::new("RandomStep", pre, eff).unwrap()
}

// ---------------------------------------------------------------------------
// Sequence edit distance: textbook dynamic program.

pub fn levenshtein_dp<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

// ---------------------------------------------------------------------------
// Exhaustive repair oracle.

pub const PHYSICS: [&str; 5] = ["OverOf", "OnTopOf", "InsideOf", "Open", "Closed"];

fn relevant_predicate(pred: &str, initial: &State) -> bool {
    let marker = |m: &str| initial.iter().any(|a| a.predicate() == m);
    PHYSICS.contains(&pred)
        || (marker("FingerGripper") && pred.starts_with("Gripper"))
        || (marker("VacuumSuction") && pred.starts_with("Vacuum"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct FirstProblem {
    index: usize,
    action: Option<String>,
    violated: BTreeSet<Literal>,
    clean_success: bool,
}

fn first_problem(initial: &State, proc: &[OpRef], universe: &ObjectUniverse, goal: &Goal) -> (FirstProblem, Vec<State>) {
    let r = rollout(initial, proc, universe).unwrap();
    let p = match &r.first_inconsistency {
        Some(inc) => FirstProblem {
            index: inc.index,
            action: Some(proc[inc.index].name.clone()),
            violated: inc.violations.iter().map(|v| v.literal.clone()).collect(),
            clean_success: false,
        },
        None => {
            let unmet: BTreeSet<Literal> = goal.unmet(r.final_state()).into_iter().collect();
            FirstProblem {
                index: proc.len(),
                action: None,
                clean_success: unmet.is_empty(),
                violated: unmet,
            }
        }
    };
    (p, r.states)
}

fn occurrences(proc: &[OpRef], window: &[OpRef]) -> usize {
    if window.is_empty() || window.len() > proc.len() {
        return 0;
    }
    proc.windows(window.len())
        .filter(|w| w.iter().zip(window).all(|(a, b)| **a == **b))
        .count()
}

pub struct RepairOracle<'a> {
    pub alphabet: Vec<OpRef>,
    pub universe: &'a ObjectUniverse,
    pub initial: &'a State,
    pub goal: &'a Goal,
    pub depth: usize,
}

impl<'a> RepairOracle<'a> {
    pub fn new(library: &[OpRef], proc: &[OpRef], universe: &'a ObjectUniverse, initial: &'a State, goal: &'a Goal, depth: usize) -> Self {
        let mut alphabet: Vec<OpRef> = Vec::new();
        for op in library.iter().chain(proc) {
            if !alphabet.iter().any(|o| **o == **op) {
                alphabet.push(op.clone());
            }
        }
        RepairOracle {
            alphabet,
            universe,
            initial,
            goal,
            depth,
        }
    }

    fn windows(&self, n: usize, t: usize) -> Vec<(usize, usize)> {
        let d = self.depth;
        let mut out = Vec::new();
        if t >= n {
            for len in 1..=d.min(n) {
                out.push((n - len, n));
            }
        } else {
            for w in 0..=t {
                for e in t + 1..=n {
                    if t - w <= d && e - 1 - t <= d {
                        out.push((w, e));
                    }
                }
            }
        }
        out
    }

    /// The admissibility rule, restated from scratch.
    pub fn admissible(&self, proc: &[OpRef], w: usize, e: usize, replace: &[OpRef]) -> bool {
        let (current, states) = first_problem(self.initial, proc, self.universe, self.goal);
        if current.clean_success || w > current.index || e <= w || e > proc.len() {
            return false;
        }
        let window = &proc[w..e];
        if occurrences(proc, window) != 1 {
            return false;
        }
        let start = &states[w];
        let Ok(run) = rollout(start, replace, self.universe) else {
            return false;
        };
        if !run.is_clean() {
            return false;
        }
        let end = run.final_state();
        let mut forced = state_strings(start);
        for op in window {
            for d in op.eff.dels() {
                forced.remove(&render_atom(d));
            }
            for a in op.eff.adds() {
                forced.insert(render_atom(a));
            }
        }
        let end_s = state_strings(end);
        for op in window {
            for a in op.eff.adds().iter().chain(op.eff.dels()) {
                if relevant_predicate(a.predicate(), self.initial) {
                    let s = render_atom(a);
                    if forced.contains(&s) != end_s.contains(&s) {
                        return false;
                    }
                }
            }
        }
        if current.action.is_none() && !current.violated.iter().all(|l| l.holds_in(end)) {
            return false;
        }
        let mut patched: Vec<OpRef> = proc[..w].to_vec();
        patched.extend(replace.iter().cloned());
        patched.extend(proc[e..].iter().cloned());
        let (after, _) = first_problem(self.initial, &patched, self.universe, self.goal);
        if after.clean_success {
            return true;
        }
        let inside = after.action.is_some() && after.index < w + replace.len();
        let same = after.action == current.action && after.violated == current.violated;
        !inside && !same
    }

    /// Every sequence reachable from `seq` with at most `k` single-operator
    /// insertions, deletions or substitutions.
    fn neighbourhood(&self, seq: &[OpRef], k: usize) -> Vec<Vec<OpRef>> {
        let mut frontier: Vec<Vec<OpRef>> = vec![seq.to_vec()];
        let mut all = frontier.clone();
        for _ in 0..k {
            let mut next = Vec::new();
            for s in &frontier {
                for i in 0..=s.len() {
                    for x in &self.alphabet {
                        let mut v = s.clone();
                        v.insert(i, x.clone());
                        next.push(v);
                    }
                    if i < s.len() {
                        let mut v = s.clone();
                        v.remove(i);
                        next.push(v);
                        for x in &self.alphabet {
                            let mut v = s.clone();
                            v[i] = x.clone();
                            next.push(v);
                        }
                    }
                }
            }
            all.extend(next.iter().cloned());
            frontier = next;
        }
        all
    }

    /// Smallest edit count of any admissible patch, trying counts up to
    /// `limit`.
    pub fn minimum_edits(&self, proc: &[OpRef], limit: usize) -> Option<usize> {
        let (current, _) = first_problem(self.initial, proc, self.universe, self.goal);
        let windows = self.windows(proc.len(), current.index);
        for k in 0..=limit {
            for &(w, e) in &windows {
                let window = &proc[w..e];
                for cand in self.neighbourhood(window, k) {
                    if levenshtein_dp(window, &cand) == k && self.admissible(proc, w, e, &cand) {
                        return Some(k);
                    }
                }
            }
        }
        None
    }

    /// Whether the window `[w, e)` is one the search may rewrite.
    pub fn window_allowed(&self, proc: &[OpRef], w: usize, e: usize) -> bool {
        let (current, _) = first_problem(self.initial, proc, self.universe, self.goal);
        self.windows(proc.len(), current.index).contains(&(w, e))
    }
}

/// Checks every accepted patch of a search-driven run against the oracle.
/// Returns a description of the first disagreement.
pub fn audit_search_run(
    library: &[OpRef],
    start_proc: &[OpRef],
    initial: &State,
    goal: &Goal,
    report: &AdaptationReport,
    depth: usize,
) -> Result<usize, String> {
    let mut proc = start_proc.to_vec();
    let mut audited = 0;
    for entry in &report.patches {
        if entry.outcome != PatchOutcome::Accepted {
            continue;
        }
        let patch = entry.patch.as_ref().expect("accepted entries carry a patch");
        let oracle = RepairOracle::new(library, &proc, &report.universe, initial, goal, depth);
        let w = (0..proc.len())
            .find(|&i| proc[i..].starts_with(&patch.search))
            .ok_or("accepted SEARCH window not found")?;
        let e = w + patch.search.len();
        let k = levenshtein_dp(&patch.search, &patch.replace);
        if !oracle.window_allowed(&proc, w, e) {
            return Err(format!("iteration {}: window {w}..{e} outside the search radius", entry.iteration));
        }
        if !oracle.admissible(&proc, w, e, &patch.replace) {
            return Err(format!("iteration {}: patch is not admissible", entry.iteration));
        }
        match oracle.minimum_edits(&proc, k) {
            Some(m) if m == k => {}
            other => {
                return Err(format!(
                    "iteration {}: patch uses {k} edits, oracle minimum {other:?}",
                    entry.iteration
                ))
            }
        }
        proc = apply_patch(&proc, patch).map_err(|e| e.to_string())?;
        audited += 1;
    }
    if proc.len() != report.adapted.len() || proc.iter().zip(&report.adapted).any(|(a, b)| **a != **b) {
        return Err("replayed patches do not reproduce the adapted procedure".into());
    }
    Ok(audited)
}
