//! Symbolic benchmark scenarios: long-horizon tasks composed of pick-and-place,
//! sweep, rotate and slide subtasks, with a controlled gap between the
//! demonstration and the deployment scene.

mod perturb;
mod suite;
mod templates;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use crate::adaptation::Goal;
use crate::executor::rollout;
use crate::pddl_io::{serialize_goal, serialize_operators, serialize_state, serialize_trajectory, TrajectoryDocument};
use crate::symbolic::{ActionOperator, Atom, ObjectUniverse, OpRef, State, Vocabulary};

pub use perturb::{perturb_scene, PerturbMode, Perturbation};
pub use suite::{
    evaluate_instance, evaluate_suite, evaluate_suite_with, standard_suite, zero_gap_suite, Budgets,
    FactorGroup, ScenarioResult, SuiteProfile, SuiteReport,
};
pub use templates::{scenario_vocabulary, Embodiment, SCENARIO_PREDICATES};

use templates::{
    container_op, extract_op, pick_place_ops, sweep_finish, sweep_op, sweep_prepare, unstack_op, BOARD,
    FLOOR, PIECE_BOX,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SubtaskKind {
    PickPlace,
    Sweep,
    Rotate,
    Slide,
}

impl SubtaskKind {
    pub const ALL: [SubtaskKind; 4] = [
        SubtaskKind::PickPlace,
        SubtaskKind::Sweep,
        SubtaskKind::Rotate,
        SubtaskKind::Slide,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SubtaskKind::PickPlace => "pick_place",
            SubtaskKind::Sweep => "sweep",
            SubtaskKind::Rotate => "rotate",
            SubtaskKind::Slide => "slide",
        }
    }

    fn pool(self) -> [&'static str; 4] {
        match self {
            SubtaskKind::PickPlace => ["red_cube", "blue_cube", "yellow_cube", "green_cube"],
            SubtaskKind::Sweep => ["white_pawn", "black_pawn", "white_knight", "black_knight"],
            SubtaskKind::Rotate => ["orange", "apple", "pear", "lemon"],
            SubtaskKind::Slide => ["green_cylinder", "red_cylinder", "blue_cylinder", "yellow_cylinder"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Complexity {
    Low,
    Medium,
    High,
}

impl Complexity {
    pub const ALL: [Complexity; 3] = [Complexity::Low, Complexity::Medium, Complexity::High];

    pub fn subtasks(self) -> usize {
        match self {
            Complexity::Low => 2,
            Complexity::Medium => 3,
            Complexity::High => 4,
        }
    }

    pub fn objects_per_subtask(self) -> usize {
        match self {
            Complexity::High => 2,
            _ => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Complexity::Low => "low",
            Complexity::Medium => "medium",
            Complexity::High => "high",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Factor {
    /// Level 0 is the zero-gap setting.
    Obstruction(u8),
    /// The first object starts inside a tray.
    Affordance,
    /// Deployment uses a vacuum tool instead of the demonstrated finger
    /// gripper.
    KinematicGripper,
    /// Level-1 obstruction, affordance and the vacuum tool together.
    Combination,
}

impl Factor {
    fn obstruction(self) -> u8 {
        match self {
            Factor::Obstruction(k) => k,
            Factor::Combination => 1,
            _ => 0,
        }
    }

    fn affordance(self) -> bool {
        matches!(self, Factor::Affordance | Factor::Combination)
    }

    fn deployment_embodiment(self) -> Embodiment {
        match self {
            Factor::KinematicGripper | Factor::Combination => Embodiment::Vacuum,
            _ => Embodiment::Finger,
        }
    }

    pub fn group(self) -> FactorGroup {
        match self {
            Factor::Obstruction(_) | Factor::Affordance => FactorGroup::Environment,
            Factor::KinematicGripper => FactorGroup::Embodiment,
            Factor::Combination => FactorGroup::Combination,
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Obstruction(k) => write!(f, "obstruction{k}"),
            Factor::Affordance => f.write_str("affordance"),
            Factor::KinematicGripper => f.write_str("kinematic"),
            Factor::Combination => f.write_str("combination"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("{tier} complexity needs {expected} subtasks, got {found}")]
    SubtaskCount {
        tier: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("subtask {0} appears twice")]
    RepeatedSubtask(&'static str),
    #[error("obstruction level {0} is outside 0..=2")]
    Level(u8),
    #[error("perturbation fraction {0} is outside [0, 1]")]
    Fraction(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScenarioSpec {
    subtasks: Vec<SubtaskKind>,
    complexity: Complexity,
    factor: Factor,
    seed: u64,
}

impl ScenarioSpec {
    pub fn new(
        subtasks: Vec<SubtaskKind>,
        complexity: Complexity,
        factor: Factor,
        seed: u64,
    ) -> Result<Self, ScenarioError> {
        if subtasks.len() != complexity.subtasks() {
            return Err(ScenarioError::SubtaskCount {
                tier: complexity.as_str(),
                expected: complexity.subtasks(),
                found: subtasks.len(),
            });
        }
        for (i, k) in subtasks.iter().enumerate() {
            if subtasks[..i].contains(k) {
                return Err(ScenarioError::RepeatedSubtask(k.as_str()));
            }
        }
        if let Factor::Obstruction(k) = factor {
            if k > 2 {
                return Err(ScenarioError::Level(k));
            }
        }
        Ok(ScenarioSpec {
            subtasks,
            complexity,
            factor,
            seed,
        })
    }

    /// Subtask order drawn from the seed.
    pub fn sampled(complexity: Complexity, factor: Factor, seed: u64) -> Result<Self, ScenarioError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut kinds = SubtaskKind::ALL.to_vec();
        kinds.shuffle(&mut rng);
        kinds.truncate(complexity.subtasks());
        Self::new(kinds, complexity, factor, seed)
    }

    pub fn subtasks(&self) -> &[SubtaskKind] {
        &self.subtasks
    }

    pub fn complexity(&self) -> Complexity {
        self.complexity
    }

    pub fn factor(&self) -> Factor {
        self.factor
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn id(&self) -> String {
        let kinds: Vec<&str> = self.subtasks.iter().map(|k| k.as_str()).collect();
        format!(
            "{}-{}-{}-s{}",
            self.factor,
            self.complexity.as_str(),
            kinds.join("+"),
            self.seed
        )
    }
}

/// Atoms that mark one subtask as achieved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtaskGoal {
    pub label: String,
    pub atoms: Vec<Atom>,
}

impl SubtaskGoal {
    pub fn achieved(&self, state: &State) -> bool {
        self.atoms.iter().all(|a| state.contains(a))
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioInstance {
    pub id: String,
    pub spec: ScenarioSpec,
    pub demonstration: TrajectoryDocument,
    /// The procedure the demonstration was generated from.
    pub demo_procedure: Vec<OpRef>,
    pub deployment_initial: State,
    pub goal: Goal,
    pub subtask_goals: Vec<SubtaskGoal>,
    /// Every operator of both embodiments plus the repair operators the gap
    /// needs, sorted by name.
    pub operator_library: Vec<OpRef>,
    /// Step label for each library operator, by operator name.
    pub labels: BTreeMap<String, String>,
    /// Edit depth within which every seeded gap can be repaired.
    pub repair_depth: usize,
}

impl ScenarioInstance {
    /// Step labels of `procedure`; unknown operators keep their name.
    pub fn label_sequence(&self, procedure: &[OpRef]) -> Vec<String> {
        procedure
            .iter()
            .map(|op| self.labels.get(&op.name).cloned().unwrap_or_else(|| op.name.clone()))
            .collect()
    }

    pub fn vocabulary(&self) -> Vocabulary {
        scenario_vocabulary()
    }

    /// Objects of the demonstration and the deployment scene.
    pub fn universe(&self) -> ObjectUniverse {
        let mut u = ObjectUniverse::new();
        for s in self.demonstration.states() {
            u.extend_with_state(&s);
        }
        u.extend_with_state(&self.deployment_initial);
        u
    }

    /// Trajectory JSON plus a `scenario` envelope.
    pub fn to_json(&self) -> serde_json::Value {
        let traj: serde_json::Value =
            serde_json::from_str(&serialize_trajectory(&self.demonstration)).expect("own output is JSON");
        let goal: serde_json::Value = serde_json::from_str(&serialize_goal(&self.goal)).expect("own output is JSON");
        let deploy: serde_json::Value =
            serde_json::from_str(&serialize_state(&self.deployment_initial)).expect("own output is JSON");
        json!({
            "trajectory": traj,
            "scenario": {
                "id": self.id,
                "goal": goal,
                "deployment_initial": deploy,
                "library": serialize_operators(self.operator_library.iter().map(|o| &**o)),
                "labels": self.labels,
                "repair_depth": self.repair_depth,
            }
        })
    }
}

struct Builder {
    demo: State,
    deploy: State,
    procedure: Vec<ActionOperator>,
    library: Vec<(ActionOperator, String)>,
    goals: Vec<SubtaskGoal>,
    blockers: usize,
    demo_embodiment: Embodiment,
    deploy_embodiment: Embodiment,
}

fn atom(p: &str, args: &[&str]) -> Atom {
    Atom::parse_parts(p, args).expect("generator atoms are well formed")
}

impl Builder {
    fn both(&mut self, a: Atom) {
        self.demo.insert(a.clone());
        self.deploy.insert(a);
    }

    fn add_library(&mut self, entries: impl IntoIterator<Item = (ActionOperator, String)>) {
        self.library.extend(entries);
    }

    /// Demonstrated steps use the demonstration embodiment; both variants
    /// go into the library.
    fn pick_place_chunk(&mut self, x: &str, target: &str, lid: Option<&str>, verb: &str) {
        let demo = pick_place_ops(self.demo_embodiment, x, target, lid, verb);
        self.procedure.extend(demo.iter().map(|(o, _)| o.clone()));
        self.add_library(pick_place_ops(Embodiment::Finger, x, target, lid, verb));
        self.add_library(pick_place_ops(Embodiment::Vacuum, x, target, lid, verb));
    }

    /// Stacks `levels` fresh blocks on `base` in the deployment scene.
    fn stack_on(&mut self, base: &str, levels: u8) {
        let mut under = base.to_string();
        for _ in 0..levels {
            self.blockers += 1;
            let block = format!("stack_block_{}", self.blockers);
            self.deploy.insert(atom("OnTopOf", &[&block, &under]));
            self.add_library([
                unstack_op(Embodiment::Finger, &block, &under),
                unstack_op(Embodiment::Vacuum, &block, &under),
            ]);
            under = block;
        }
    }

    /// Moves `x` from `surface` into a tray in the deployment scene.
    fn put_in_tray(&mut self, x: &str, surface: &str) {
        self.deploy.remove(&atom("OnTopOf", &[x, surface]));
        self.deploy.insert(atom("InsideOf", &[x, "tray"]));
        self.deploy.insert(atom("OnTopOf", &["tray", FLOOR]));
        self.add_library([extract_op("Tip", x, "tray", surface)]);
    }
}

fn title(kind: SubtaskKind, objects: &[&str]) -> String {
    let list = objects.join(" and ").replace('_', " ");
    match kind {
        SubtaskKind::PickPlace => format!("put the {list} into the toy box"),
        SubtaskKind::Sweep => format!("sweep the {list} into the piece box"),
        SubtaskKind::Rotate => format!("place the {list} in the hinged container and close its lid"),
        SubtaskKind::Slide => format!("place the {list} in the bottom drawer and slide it shut"),
    }
}

/// Deterministic in the spec. The demonstration is produced by executing
/// the demonstrated procedure, so it always verifies.
pub fn generate_scenario(spec: &ScenarioSpec) -> ScenarioInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_0b1e_c7);
    let level = spec.factor.obstruction();
    let mut b = Builder {
        demo: State::new(),
        deploy: State::new(),
        procedure: Vec::new(),
        library: Vec::new(),
        goals: Vec::new(),
        blockers: 0,
        demo_embodiment: Embodiment::Finger,
        deploy_embodiment: spec.factor.deployment_embodiment(),
    };
    for a in b.demo_embodiment.atoms() {
        b.demo.insert(atom(a, &[]));
    }
    for a in b.deploy_embodiment.atoms() {
        b.deploy.insert(atom(a, &[]));
    }

    let mut instruction = Vec::new();
    let mut depth = 1;
    for (si, &kind) in spec.subtasks.iter().enumerate() {
        let mut pool = kind.pool().to_vec();
        pool.shuffle(&mut rng);
        let objects: Vec<&str> = pool[..spec.complexity.objects_per_subtask()].to_vec();
        let first = objects[0];
        let affordance = spec.factor.affordance() && si == 0;
        instruction.push(title(kind, &objects));
        let mut goal = Vec::new();
        match kind {
            SubtaskKind::PickPlace => {
                b.both(atom("OnTopOf", &["toy_box", FLOOR]));
                for &x in &objects {
                    b.both(atom("OnTopOf", &[x, FLOOR]));
                    b.pick_place_chunk(x, "toy_box", None, "OpenGripperToPlace");
                    goal.push(atom("InsideOf", &[x, "toy_box"]));
                }
                if level > 0 {
                    b.stack_on(first, level);
                }
                if affordance {
                    b.put_in_tray(first, FLOOR);
                }
            }
            SubtaskKind::Sweep => {
                b.both(atom("OnTopOf", &[BOARD, FLOOR]));
                b.both(atom("OnTopOf", &[PIECE_BOX, FLOOR]));
                let prep = sweep_prepare(b.demo_embodiment);
                b.procedure.extend(prep.iter().map(|(o, _)| o.clone()));
                b.add_library(sweep_prepare(Embodiment::Finger));
                for &p in &objects {
                    b.both(atom("OnTopOf", &[p, BOARD]));
                    b.procedure.push(sweep_op(b.demo_embodiment, p).0);
                    b.add_library([sweep_op(Embodiment::Finger, p), sweep_op(Embodiment::Vacuum, p)]);
                    goal.push(atom("InsideOf", &[p, PIECE_BOX]));
                }
                let fin = sweep_finish(b.demo_embodiment);
                b.procedure.extend(fin.iter().map(|(o, _)| o.clone()));
                b.add_library(sweep_finish(Embodiment::Finger));
                if level > 0 {
                    b.deploy.remove(&atom("OnTopOf", &[first, BOARD]));
                    b.deploy.insert(atom("InsideOf", &[first, "spare_box"]));
                    b.deploy.insert(atom("OnTopOf", &["spare_box", FLOOR]));
                    b.add_library([extract_op("Retrieve", first, "spare_box", BOARD)]);
                    if level > 1 {
                        b.stack_on(first, level - 1);
                    }
                }
                // A piece already sitting in the spare box needs no tray.
                if affordance && level == 0 {
                    b.put_in_tray(first, BOARD);
                }
            }
            SubtaskKind::Rotate | SubtaskKind::Slide => {
                let (body, part, verb, release) = if kind == SubtaskKind::Rotate {
                    ("hinge_body", "hinge_lid", "Rotate", "OpenGripperToDrop")
                } else {
                    ("bottom_drawer", "bottom_drawer", "Slide", "Release")
                };
                b.both(atom("OnTopOf", &[body, FLOOR]));
                b.demo.insert(atom("Open", &[part]));
                for &x in &objects {
                    b.both(atom("OnTopOf", &[x, FLOOR]));
                    b.pick_place_chunk(x, body, Some(part), release);
                    goal.push(atom("InsideOf", &[x, body]));
                }
                let close = container_op(verb, part, false);
                b.procedure.push(close.0.clone());
                b.add_library([close]);
                goal.push(atom("Closed", &[part]));
                if level > 0 {
                    b.deploy.insert(atom("Closed", &[part]));
                    b.add_library([container_op(verb, part, true)]);
                    if level > 1 {
                        b.stack_on(part, level - 1);
                    }
                } else {
                    b.deploy.insert(atom("Open", &[part]));
                }
                if affordance {
                    b.put_in_tray(first, FLOOR);
                }
            }
        }
        b.goals.push(SubtaskGoal {
            label: format!("{}:{}", kind.as_str(), objects.join("+")),
            atoms: goal,
        });
    }
    if level > 0 {
        depth = depth.max(level as usize);
    }
    if b.deploy_embodiment != b.demo_embodiment {
        depth = depth.max(2);
    }

    let procedure: Vec<OpRef> = b.procedure.into_iter().map(Arc::new).collect();
    let mut universe = ObjectUniverse::new();
    universe.extend_with_state(&b.demo);
    for op in &procedure {
        for o in op.objects() {
            universe.insert(o.clone(), crate::symbolic::ROOT_TYPE);
        }
    }
    let run = rollout(&b.demo, &procedure, &universe).expect("generator operators are grounded");
    assert!(run.is_clean(), "generated demonstration must execute");
    let mut text = instruction.join(", then ");
    if let Some(c) = text.get_mut(0..1) {
        c.make_ascii_uppercase();
    }
    let demonstration = TrajectoryDocument::from_states(text + ".", run.states);

    let mut library: Vec<(ActionOperator, String)> = Vec::new();
    for (op, label) in b.library {
        if !library.iter().any(|(o, _)| *o == op) {
            library.push((op, label));
        }
    }
    library.sort_by(|a, b| a.0.name.cmp(&b.0.name));
    let labels = library.iter().map(|(o, l)| (o.name.clone(), l.clone())).collect();
    let goal = Goal::required(b.goals.iter().flat_map(|g| g.atoms.iter().cloned()));

    ScenarioInstance {
        id: spec.id(),
        spec: spec.clone(),
        demonstration,
        demo_procedure: procedure,
        deployment_initial: b.deploy,
        goal,
        subtask_goals: b.goals,
        operator_library: library.into_iter().map(|(o, _)| Arc::new(o)).collect(),
        labels,
        repair_depth: depth,
    }
}
