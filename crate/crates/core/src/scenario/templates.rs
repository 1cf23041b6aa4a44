//! Operator templates for the four subtask families and their repairs.

use crate::pddl_io::parse_operator_blocks;
use crate::symbolic::{ActionOperator, PredicateSchema, Vocabulary};

pub(crate) const FLOOR: &str = "floor";

/// Predicates used by generated scenarios, with arities.
pub const SCENARIO_PREDICATES: [(&str, usize); 15] = [
    ("OverOf", 2),
    ("OnTopOf", 2),
    ("InsideOf", 2),
    ("Open", 1),
    ("Closed", 1),
    ("FingerGripper", 0),
    ("VacuumSuction", 0),
    ("GripperSurrounding", 1),
    ("GripperHolding", 1),
    ("GripperOpen", 0),
    ("GripperClosed", 0),
    ("VacuumAligned", 1),
    ("VacuumAttached", 1),
    ("VacuumActive", 0),
    ("VacuumInactive", 0),
];

pub fn scenario_vocabulary() -> Vocabulary {
    let mut v = Vocabulary::new();
    for (name, arity) in SCENARIO_PREDICATES {
        v.insert(PredicateSchema::untyped(name, arity).expect("valid predicate"));
    }
    v
}

/// `red_cube` -> `RedCube`.
pub(crate) fn camel(object: &str) -> String {
    object
        .split('_')
        .map(|w| {
            let mut c = w.chars();
            match c.next() {
                Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
                None => String::new(),
            }
        })
        .collect()
}

fn op(name: &str, pre: &[String], eff: &[String]) -> ActionOperator {
    let mut text = format!("{name}\n- Preconditions:\n");
    for p in pre {
        text.push_str(&format!("    - {p}\n"));
    }
    text.push_str("- Effects:\n");
    for e in eff {
        text.push_str(&format!("    - {e}\n"));
    }
    let mut ops = parse_operator_blocks(&text, 1, None).expect("template operators parse");
    ops.remove(0)
}

fn none_of(pattern: &str) -> String {
    format!("(forall (?y - thing) (not {pattern}))")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Embodiment {
    Finger,
    Vacuum,
}

impl Embodiment {
    pub fn atoms(self) -> [&'static str; 2] {
        match self {
            Embodiment::Finger => ["FingerGripper", "GripperOpen"],
            Embodiment::Vacuum => ["VacuumSuction", "VacuumInactive"],
        }
    }
}

fn free_hand() -> Vec<String> {
    vec![none_of("(GripperHolding ?y)"), none_of("(VacuumAttached ?y)")]
}

/// Pick-and-place chunk: reach, grasp, carry over the target, release.
/// `lid` is a container part that must not be closed while carrying.
pub(crate) fn pick_place_ops(
    embodiment: Embodiment,
    x: &str,
    target: &str,
    lid: Option<&str>,
    release_verb: &str,
) -> [(ActionOperator, String); 4] {
    let (cx, ct) = (camel(x), camel(target));
    let lid_pre: Vec<String> = lid.map(|l| format!("(not (Closed {l}))")).into_iter().collect();
    let clear = [none_of(&format!("(OnTopOf ?y {x})")), none_of(&format!("(InsideOf {x} ?y)"))];
    match embodiment {
        Embodiment::Finger => {
            let reach = op(
                &format!("MoveGripperToSurround{cx}"),
                &[
                    vec!["(GripperOpen)".into(), none_of("(GripperHolding ?y)")],
                    clear.to_vec(),
                ]
                .concat(),
                &[format!("(GripperSurrounding {x})")],
            );
            let grasp = op(
                &format!("CloseGripperOn{cx}"),
                &[format!("(GripperSurrounding {x})"), "(GripperOpen)".into()],
                &[
                    "(GripperClosed)".into(),
                    format!("(GripperHolding {x})"),
                    "(not (GripperOpen))".into(),
                    format!("(not (GripperSurrounding {x}))"),
                    format!("(not (OnTopOf {x} {FLOOR}))"),
                ],
            );
            let carry = op(
                &format!("MoveHeld{cx}Over{ct}"),
                &[vec![format!("(GripperHolding {x})")], lid_pre.clone()].concat(),
                &[format!("(OverOf {x} {target})")],
            );
            let place = op(
                &format!("{release_verb}{cx}Into{ct}"),
                &[
                    vec![
                        format!("(GripperHolding {x})"),
                        format!("(OverOf {x} {target})"),
                        format!("(not (InsideOf {x} {target}))"),
                    ],
                    lid_pre,
                ]
                .concat(),
                &[
                    format!("(InsideOf {x} {target})"),
                    "(GripperOpen)".into(),
                    "(not (GripperClosed))".into(),
                    format!("(not (GripperHolding {x}))"),
                    format!("(not (OverOf {x} {target}))"),
                ],
            );
            labelled(x, [reach, grasp, carry, place])
        }
        Embodiment::Vacuum => {
            let reach = op(
                &format!("MoveVacuumTo{cx}"),
                &[
                    vec!["(VacuumInactive)".into(), none_of("(VacuumAttached ?y)")],
                    clear.to_vec(),
                ]
                .concat(),
                &[format!("(VacuumAligned {x})")],
            );
            let grasp = op(
                &format!("ActivateVacuumOn{cx}"),
                &[format!("(VacuumAligned {x})"), "(VacuumInactive)".into()],
                &[
                    "(VacuumActive)".into(),
                    format!("(VacuumAttached {x})"),
                    "(not (VacuumInactive))".into(),
                    format!("(not (VacuumAligned {x}))"),
                    format!("(not (OnTopOf {x} {FLOOR}))"),
                ],
            );
            let carry = op(
                &format!("MoveAttached{cx}Over{ct}"),
                &[vec![format!("(VacuumAttached {x})")], lid_pre.clone()].concat(),
                &[format!("(OverOf {x} {target})")],
            );
            let place = op(
                &format!("DeactivateVacuumToRelease{cx}Into{ct}"),
                &[
                    vec![
                        format!("(VacuumAttached {x})"),
                        format!("(OverOf {x} {target})"),
                        format!("(not (InsideOf {x} {target}))"),
                    ],
                    lid_pre,
                ]
                .concat(),
                &[
                    format!("(InsideOf {x} {target})"),
                    "(VacuumInactive)".into(),
                    "(not (VacuumActive))".into(),
                    format!("(not (VacuumAttached {x}))"),
                    format!("(not (OverOf {x} {target}))"),
                ],
            );
            labelled(x, [reach, grasp, carry, place])
        }
    }
}

fn labelled(x: &str, ops: [ActionOperator; 4]) -> [(ActionOperator, String); 4] {
    let [a, b, c, d] = ops;
    [
        (a, format!("reach:{x}")),
        (b, format!("grasp:{x}")),
        (c, format!("carry:{x}")),
        (d, format!("place:{x}")),
    ]
}

pub(crate) const BOARD: &str = "chess_board";
pub(crate) const PIECE_BOX: &str = "piece_box";

/// Finger sweeping closes the gripper first and reopens it afterwards.
pub(crate) fn sweep_prepare(embodiment: Embodiment) -> Option<(ActionOperator, String)> {
    (embodiment == Embodiment::Finger).then(|| {
        (
            op(
                "CloseGripper",
                &[
                    "(GripperOpen)".into(),
                    none_of("(GripperHolding ?y)"),
                    none_of("(GripperSurrounding ?y)"),
                ],
                &["(GripperClosed)".into(), "(not (GripperOpen))".into()],
            ),
            "close_gripper".into(),
        )
    })
}

pub(crate) fn sweep_finish(embodiment: Embodiment) -> Option<(ActionOperator, String)> {
    (embodiment == Embodiment::Finger).then(|| {
        (
            op(
                "OpenGripper",
                &["(GripperClosed)".into(), none_of("(GripperHolding ?y)")],
                &["(GripperOpen)".into(), "(not (GripperClosed))".into()],
            ),
            "open_gripper".into(),
        )
    })
}

pub(crate) fn sweep_op(embodiment: Embodiment, piece: &str) -> (ActionOperator, String) {
    let cp = camel(piece);
    let mut pre = match embodiment {
        Embodiment::Finger => vec!["(GripperClosed)".to_string(), none_of("(GripperHolding ?y)")],
        Embodiment::Vacuum => vec!["(VacuumInactive)".to_string(), none_of("(VacuumAttached ?y)")],
    };
    pre.push(format!("(OnTopOf {piece} {BOARD})"));
    pre.push(none_of(&format!("(OnTopOf ?y {piece})")));
    let name = match embodiment {
        Embodiment::Finger => format!("Sweep{cp}IntoPieceBox"),
        Embodiment::Vacuum => format!("SweepWithVacuum{cp}IntoPieceBox"),
    };
    (
        op(
            &name,
            &pre,
            &[
                format!("(InsideOf {piece} {PIECE_BOX})"),
                format!("(not (OnTopOf {piece} {BOARD}))"),
            ],
        ),
        format!("sweep:{piece}"),
    )
}

/// Embodiment-independent container motion: `Rotate{C}Closed` and friends.
pub(crate) fn container_op(verb: &str, part: &str, open: bool) -> (ActionOperator, String) {
    let cp = camel(part);
    let (from, to, suffix) = if open {
        ("Closed", "Open", "Open")
    } else {
        ("Open", "Closed", "Closed")
    };
    let mut pre = vec![format!("({from} {part})")];
    if open {
        pre.push(none_of(&format!("(OnTopOf ?y {part})")));
    }
    pre.extend(free_hand());
    (
        op(
            &format!("{verb}{cp}{suffix}"),
            &pre,
            &[format!("({to} {part})"), format!("(not ({from} {part}))")],
        ),
        format!("{}:{part}", if open { "open" } else { "close" }),
    )
}

/// Moves a stacked block from `under` to the floor.
pub(crate) fn unstack_op(embodiment: Embodiment, block: &str, under: &str) -> (ActionOperator, String) {
    let cb = camel(block);
    let (name, mut pre) = match embodiment {
        Embodiment::Finger => (
            format!("Move{cb}ToFloor"),
            vec!["(GripperOpen)".to_string(), none_of("(GripperHolding ?y)")],
        ),
        Embodiment::Vacuum => (
            format!("Move{cb}ToFloorWithVacuum"),
            vec!["(VacuumInactive)".to_string(), none_of("(VacuumAttached ?y)")],
        ),
    };
    pre.push(format!("(OnTopOf {block} {under})"));
    pre.push(none_of(&format!("(OnTopOf ?y {block})")));
    (
        op(
            &name,
            &pre,
            &[
                format!("(OnTopOf {block} {FLOOR})"),
                format!("(not (OnTopOf {block} {under}))"),
            ],
        ),
        format!("unstack:{block}"),
    )
}

/// Takes `x` out of `holder` and sets it on `surface`.
pub(crate) fn extract_op(verb: &str, x: &str, holder: &str, surface: &str) -> (ActionOperator, String) {
    let mut pre = vec![
        format!("(InsideOf {x} {holder})"),
        none_of(&format!("(OnTopOf ?y {x})")),
    ];
    pre.extend(free_hand());
    (
        op(
            &format!("{verb}{}OutOf{}", camel(x), camel(holder)),
            &pre,
            &[
                format!("(OnTopOf {x} {surface})"),
                format!("(not (InsideOf {x} {holder}))"),
            ],
        ),
        format!("extract:{x}"),
    )
}
