use std::collections::HashSet;
use std::sync::Arc;

use super::{OperatorContext, PatchContext, Proposer, ProposerContext, ProposerError, ProposerResponse};
use crate::adaptation::{find_window, probe, splice, Patch, PHYSICS_GROUP};
use crate::executor::{check_transition, FrameMatch};
use crate::symbolic::{entails, Atom, ObjectUniverse, OpRef, State};

pub const PHYSICS_PREDICATES: [&str; 5] = PHYSICS_GROUP;

/// Marker predicate of an embodiment and the name prefix of its predicate
/// family.
const DEFAULT_FAMILIES: [(&str, &str); 2] = [("FingerGripper", "Gripper"), ("VacuumSuction", "Vacuum")];

/// Deterministic bounded-depth repair search over a fixed operator library.
///
/// A patch rewrites a window of the procedure around the failing step. Its
/// edit count is the Levenshtein distance between the window and the
/// replacement, counted in operators. Candidates are tried by edit count,
/// then by the replacement's operator names, then by window position.
///
/// A replacement is admissible when it executes from the state before the
/// window, agrees with the forced effects of the window on every relevant
/// atom the window touches, and moves the first inconsistency (for a goal
/// gap it must also establish the unmet goal literals). Relevant atoms are
/// those of the physics predicates plus the predicate family of each
/// embodiment whose marker holds in the deployment state.
#[derive(Debug, Clone)]
pub struct SearchProposer {
    library: Vec<OpRef>,
    depth: usize,
    families: Vec<(String, String)>,
}

impl SearchProposer {
    pub fn new(library: impl IntoIterator<Item = OpRef>, depth: usize) -> Self {
        let mut lib: Vec<OpRef> = Vec::new();
        for op in library {
            if !lib.iter().any(|o| **o == *op) {
                lib.push(op);
            }
        }
        lib.sort_by(|a, b| a.name.cmp(&b.name));
        SearchProposer {
            library: lib,
            depth: depth.max(1),
            families: DEFAULT_FAMILIES
                .iter()
                .map(|(m, p)| (m.to_string(), p.to_string()))
                .collect(),
        }
    }

    /// Replaces the embodiment families; each entry is (marker predicate,
    /// family prefix).
    pub fn with_families(mut self, families: impl IntoIterator<Item = (String, String)>) -> Self {
        self.families = families.into_iter().collect();
        self
    }

    pub fn library(&self) -> &[OpRef] {
        &self.library
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    fn propose_operator(&self, ctx: &OperatorContext) -> ProposerResponse {
        for op in &self.library {
            if ctx.vocabulary.check_operator(op).is_err() {
                continue;
            }
            let fits = check_transition(
                &ctx.prev,
                &ctx.next,
                op,
                ctx.transition,
                &ctx.universe,
                FrameMatch::Exact,
            );
            if matches!(fits, Ok(None)) {
                let mut r = ProposerResponse::operator((**op).clone());
                r.rationale = format!("library operator {} reproduces the transition", op.name);
                return r;
            }
        }
        ProposerResponse::decline()
    }

    fn relevant(&self, initial: &State) -> impl Fn(&Atom) -> bool {
        let prefixes: Vec<String> = self
            .families
            .iter()
            .filter(|(marker, _)| initial.iter().any(|a| a.predicate() == marker))
            .map(|(_, p)| p.clone())
            .collect();
        move |a: &Atom| {
            PHYSICS_GROUP.contains(&a.predicate())
                || prefixes.iter().any(|p| a.predicate().starts_with(p.as_str()))
        }
    }

    fn propose_patch(&self, ctx: &PatchContext) -> ProposerResponse {
        let procedure = &ctx.procedure;
        let n = procedure.len();
        let t = ctx.erroneous_index;
        if n == 0 || ctx.trace.len() <= t.min(n) {
            return ProposerResponse::decline();
        }
        let initial = &ctx.trace[0];
        let Ok(current) = probe(initial, procedure, &ctx.universe, &ctx.goal) else {
            return ProposerResponse::decline();
        };
        if current.clean_success {
            return ProposerResponse::decline();
        }
        let relevant = self.relevant(initial);

        let mut alphabet: Vec<OpRef> = self.library.clone();
        for op in procedure {
            if !alphabet.iter().any(|o| **o == **op) {
                alphabet.push(op.clone());
            }
        }
        alphabet.sort_by(|a, b| a.name.cmp(&b.name));

        let windows = candidate_windows(n, t, self.depth);
        let search = Search {
            alphabet: &alphabet,
            universe: &ctx.universe,
        };

        for k in 1..=self.depth {
            let mut best: Option<(Vec<&str>, usize, usize, Vec<usize>)> = None;
            for &(w, e) in &windows {
                let window = &procedure[w..e];
                if find_window(procedure, window) != Ok(w) {
                    continue;
                }
                let start = &ctx.trace[w];
                let original: Vec<usize> = window
                    .iter()
                    .map(|op| alphabet.iter().position(|a| **a == **op).expect("in alphabet"))
                    .collect();
                let mut found = HashSet::new();
                search.enumerate(&original, 0, k, start, &mut Vec::new(), &mut found);
                for r in found {
                    if r == original {
                        continue;
                    }
                    let names: Vec<&str> = r.iter().map(|&i| alphabet[i].name.as_str()).collect();
                    let better = match &best {
                        None => true,
                        Some((bn, bw, be, br)) => (&names, w, e, &r) < (bn, *bw, *be, br),
                    };
                    if !better {
                        continue;
                    }
                    let replace: Vec<OpRef> = r.iter().map(|&i| alphabet[i].clone()).collect();
                    if self.admissible(ctx, &current.record, w, e, &replace, start, &relevant) {
                        best = Some((names, w, e, r));
                    }
                }
            }
            if let Some((_, w, e, r)) = best {
                let replace: Vec<OpRef> = r.iter().map(|&i| alphabet[i].clone()).collect();
                let rationale = format!(
                    "{k}-edit repair of steps {}..{} restoring {}",
                    w + 1,
                    e,
                    ctx.violated
                        .iter()
                        .map(|l| l.to_string())
                        .collect::<Vec<_>>()
                        .join(" ")
                );
                return ProposerResponse::patch(Patch::new(procedure[w..e].to_vec(), replace, rationale));
            }
        }
        ProposerResponse::decline()
    }

    #[allow(clippy::too_many_arguments)]
    fn admissible(
        &self,
        ctx: &PatchContext,
        current: &crate::adaptation::InconsistencyRecord,
        w: usize,
        e: usize,
        replace: &[OpRef],
        start: &State,
        relevant: &impl Fn(&Atom) -> bool,
    ) -> bool {
        let window = &ctx.procedure[w..e];
        let Some(end) = run(start, replace, &ctx.universe) else {
            return false;
        };
        let mut forced = start.clone();
        for op in window {
            forced = forced.apply(&op.eff);
        }
        let touched = window
            .iter()
            .flat_map(|op| op.eff.adds().iter().chain(op.eff.dels()))
            .filter(|a| relevant(a));
        for a in touched {
            if forced.contains(a) != end.contains(a) {
                return false;
            }
        }
        if ctx.is_goal_gap() && !ctx.violated.iter().all(|l| l.holds_in(&end)) {
            return false;
        }
        let patched = splice(&ctx.procedure, w, e - w, replace);
        match probe(&ctx.trace[0], &patched, &ctx.universe, &ctx.goal) {
            Ok(after) => {
                after.clean_success
                    || !(after.record.same_as(current)
                        || (after.record.action.is_some() && after.record.index < w + replace.len()))
            }
            Err(_) => false,
        }
    }
}

/// Windows `[w, e)` holding the failing step with at most `depth` steps on
/// either side; for a goal gap, suffixes of length at most `depth`.
fn candidate_windows(n: usize, t: usize, depth: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if t >= n {
        for len in 1..=depth.min(n) {
            out.push((n - len, n));
        }
    } else {
        for w in t.saturating_sub(depth)..=t {
            for e in t + 1..=(t + 1 + depth).min(n) {
                out.push((w, e));
            }
        }
    }
    out
}

fn run(start: &State, ops: &[OpRef], universe: &ObjectUniverse) -> Option<State> {
    let mut s = start.clone();
    for op in ops {
        if !entails(&s, &op.pre, universe).ok()? {
            return None;
        }
        s = s.apply(&op.eff);
    }
    Some(s)
}

struct Search<'a> {
    alphabet: &'a [OpRef],
    universe: &'a ObjectUniverse,
}

impl Search<'_> {
    fn step(&self, s: &State, op: usize) -> Option<State> {
        let op = &self.alphabet[op];
        match entails(s, &op.pre, self.universe) {
            Ok(true) => Some(s.apply(&op.eff)),
            _ => None,
        }
    }

    /// Collects every executable replacement reachable from `original[i..]`
    /// with at most `budget` keep-free edits.
    fn enumerate(
        &self,
        original: &[usize],
        i: usize,
        budget: usize,
        s: &State,
        prefix: &mut Vec<usize>,
        out: &mut HashSet<Vec<usize>>,
    ) {
        if i == original.len() {
            out.insert(prefix.clone());
        }
        if i < original.len() {
            if let Some(next) = self.step(s, original[i]) {
                prefix.push(original[i]);
                self.enumerate(original, i + 1, budget, &next, prefix, out);
                prefix.pop();
            }
        }
        if budget == 0 {
            return;
        }
        if i < original.len() {
            self.enumerate(original, i + 1, budget - 1, s, prefix, out);
        }
        for x in 0..self.alphabet.len() {
            let Some(next) = self.step(s, x) else { continue };
            prefix.push(x);
            if i < original.len() && x != original[i] {
                self.enumerate(original, i + 1, budget - 1, &next, prefix, out);
            }
            self.enumerate(original, i, budget - 1, &next, prefix, out);
            prefix.pop();
        }
    }
}

impl Proposer for SearchProposer {
    fn propose(&mut self, ctx: &ProposerContext) -> Result<ProposerResponse, ProposerError> {
        Ok(match ctx {
            ProposerContext::Operator(c) => self.propose_operator(c),
            ProposerContext::Patch(c) => self.propose_patch(c),
        })
    }
}

/// One-shot form of [`SearchProposer`].
pub fn search_propose(library: &[OpRef], ctx: &ProposerContext, depth: usize) -> ProposerResponse {
    let mut p = SearchProposer::new(library.iter().map(Arc::clone), depth);
    p.propose(ctx).expect("search never fails")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_respect_radius() {
        assert_eq!(candidate_windows(5, 2, 1), vec![(1, 3), (1, 4), (2, 3), (2, 4)]);
        assert_eq!(candidate_windows(3, 3, 2), vec![(2, 3), (1, 3)]);
        assert_eq!(candidate_windows(1, 0, 2), vec![(0, 1)]);
    }
}
