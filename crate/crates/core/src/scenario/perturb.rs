use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ScenarioError;
use crate::adaptation::PHYSICS_GROUP;
use crate::symbolic::{Atom, ObjectName, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PerturbMode {
    /// Remove relation atoms.
    Drop,
    /// Insert random well-formed relation atoms.
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub mode: PerturbMode,
    pub fraction: f64,
    pub seed: u64,
}

fn arity(predicate: &str) -> usize {
    match predicate {
        "Open" | "Closed" => 1,
        _ => 2,
    }
}

/// Relation atoms are those of the physics predicates; embodiment atoms are
/// never touched. Drop removes `floor(fraction * relations)` of them
/// uniformly; noise inserts that many fresh ones over the state's objects.
pub fn perturb_scene(state: &State, mode: PerturbMode, fraction: f64, seed: u64) -> Result<State, ScenarioError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(ScenarioError::Fraction(fraction.to_string()));
    }
    let relations: Vec<&Atom> = state
        .iter()
        .filter(|a| PHYSICS_GROUP.contains(&a.predicate()))
        .collect();
    let count = (fraction * relations.len() as f64 + 1e-9).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = state.clone();
    match mode {
        PerturbMode::Drop => {
            for a in relations.choose_multiple(&mut rng, count) {
                out.remove(a);
            }
        }
        PerturbMode::Noise => {
            let mut objects: Vec<ObjectName> = state.objects().cloned().collect();
            objects.sort();
            objects.dedup();
            if objects.is_empty() {
                return Ok(out);
            }
            let mut added = 0;
            let mut attempts = 0;
            while added < count && attempts < 1000 * (count + 1) {
                attempts += 1;
                let p = PHYSICS_GROUP[rng.gen_range(0..PHYSICS_GROUP.len())];
                let args: Vec<ObjectName> = (0..arity(p))
                    .map(|_| objects[rng.gen_range(0..objects.len())].clone())
                    .collect();
                if args.len() == 2 && args[0] == args[1] {
                    continue;
                }
                let a = Atom::new(p, args).expect("well-formed predicate");
                if out.insert(a) {
                    added += 1;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(n: usize) -> State {
        let mut s: State = (0..n)
            .map(|i| Atom::parse_parts("OnTopOf", &[&format!("o{i}"), "floor"]).unwrap())
            .collect();
        s.insert(Atom::parse_parts("GripperOpen", &[]).unwrap());
        s
    }

    #[test]
    fn drop_counts() {
        let s = scene(30);
        assert_eq!(perturb_scene(&s, PerturbMode::Drop, 0.0, 1).unwrap(), s);
        assert_eq!(perturb_scene(&s, PerturbMode::Drop, 0.1, 1).unwrap().len(), 28);
        let all = perturb_scene(&s, PerturbMode::Drop, 1.0, 1).unwrap();
        assert_eq!(all.len(), 1);
        assert!(perturb_scene(&s, PerturbMode::Drop, 1.5, 1).is_err());
    }

    #[test]
    fn noise_is_deterministic() {
        let s = scene(10);
        let a = perturb_scene(&s, PerturbMode::Noise, 0.3, 9).unwrap();
        assert_eq!(a, perturb_scene(&s, PerturbMode::Noise, 0.3, 9).unwrap());
        assert_eq!(a.len(), s.len() + 3);
    }
}
