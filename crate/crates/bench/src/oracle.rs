//! Scripted optimal policies for the five tasks.
//!
//! The oracle plans each step in closed loop against the simulator and emits
//! the exact agent messages (EXECUTE blocks) plus matching retrospection
//! responses, so a scripted backend can drive a full episode to success with
//! zero replans. Routes place each robot on its own travel layer and move
//! one robot at a time within a step (the others hold position via repeated
//! path cells), which keeps joint plans collision-free by construction; the
//! rope task instead translates both endpoints in tandem.

use std::collections::BTreeMap;

use retrocollab_core::actions::{render_plan, ActionPlan, AgentAction, TargetRef, Verb};
use retrocollab_core::llm::ScriptEntry;
use retrocollab_core::validation::validate;
use retrocollab_core::world::{
    apply_plan, is_success, load_task, object_cell, GridCell, ObjectPlace, TaskId, TaskSpec,
    WorldState,
};

/// Hand-computed minimal environment steps per task, fixed by the task
/// geometry: cabinet = open + pick + place, sweep = three sweeps + dump,
/// sandwich = pipelined pick/place of four ingredients, sort = parallel pick
/// then parallel place, rope = pick then carry-and-place.
pub fn optimal_steps(task: TaskId) -> u32 {
    match task {
        TaskId::ArrangeCabinet => 3,
        TaskId::SweepFloor => 4,
        TaskId::MakeSandwich => 5,
        TaskId::SortCubes => 2,
        TaskId::MoveRope => 2,
    }
}

/// The scripted responses for one full optimal episode.
#[derive(Debug, Clone)]
pub struct OracleScripts {
    pub llm1: Vec<ScriptEntry>,
    pub llm2: Vec<ScriptEntry>,
}

/// Travel layer per robot: distinct z planes so staggered routes can never
/// meet mid-flight.
fn layers(spec: &TaskSpec) -> BTreeMap<String, i32> {
    match spec.task_id {
        // C operates at z=1 because the cup and the handles sit there.
        TaskId::ArrangeCabinet => [("A", 2), ("B", 3), ("C", 1)],
        _ => [("A", 1), ("B", 2), ("C", 3)],
    }
    .iter()
    .take(spec.robots.len())
    .map(|(n, z)| (n.to_string(), *z))
    .collect()
}

/// Axis-ordered route: climb to the travel layer, walk x, walk y, descend to
/// the destination. Starts at `from` (inclusive).
fn route(from: GridCell, to: GridCell, layer: i32) -> Vec<GridCell> {
    let mut cells = vec![from];
    let mut cur = from;
    while cur.z != layer {
        cur.z += (layer - cur.z).signum();
        cells.push(cur);
    }
    while cur.x != to.x {
        cur.x += (to.x - cur.x).signum();
        cells.push(cur);
    }
    while cur.y != to.y {
        cur.y += (to.y - cur.y).signum();
        cells.push(cur);
    }
    while cur.z != to.z {
        cur.z += (to.z - cur.z).signum();
        cells.push(cur);
    }
    cells
}

/// One robot's job for the next step.
#[derive(Debug, Clone)]
enum Assign {
    Wait,
    Do {
        verb: Verb,
        object: Option<String>,
        target: Option<TargetRef>,
        dest: GridCell,
    },
}

/// Build a joint plan from per-robot assignments: route every mover on its
/// own layer, order movers so nobody arrives at a cell another mover has not
/// vacated yet, and stagger them in micro-time with repeated hold cells.
fn build_plan(spec: &TaskSpec, state: &WorldState, assigns: &[(String, Assign)]) -> ActionPlan {
    let layer_map = layers(spec);
    let cur = |name: &str| state.robots[name].effector;

    let movers: Vec<(usize, &String, &Assign)> = assigns
        .iter()
        .enumerate()
        .filter_map(|(ix, (name, a))| match a {
            Assign::Do { .. } => Some((ix, name, a)),
            Assign::Wait => None,
        })
        .collect();

    // A mover whose destination is another robot's current cell must wait
    // for that robot to leave first.
    let mut order: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (0..movers.len()).collect();
    while !remaining.is_empty() {
        let pick = remaining
            .iter()
            .position(|&m| {
                let (_, _, assign) = movers[m];
                let Assign::Do { dest, .. } = assign else {
                    return true;
                };
                let blocked_by_mover = remaining.iter().any(|&o| {
                    o != m && {
                        let (_, other_name, _) = movers[o];
                        cur(other_name) == *dest
                    }
                });
                let blocked_by_waiter = assigns.iter().any(|(name, a)| {
                    matches!(a, Assign::Wait) && cur(name) == *dest
                });
                assert!(
                    !blocked_by_waiter,
                    "oracle bug: destination {dest} is occupied by a waiting robot"
                );
                !blocked_by_mover
            })
            .expect("oracle bug: cyclic destination dependency");
        order.push(remaining.remove(pick));
    }

    let mut paths: BTreeMap<String, Vec<GridCell>> = BTreeMap::new();
    let mut delay = 0usize;
    for &m in &order {
        let (_, name, assign) = movers[m];
        let Assign::Do { dest, .. } = assign else {
            unreachable!()
        };
        let start = cur(name);
        let travel = route(start, *dest, layer_map[name.as_str()]);
        let mut path = vec![start; delay];
        delay += travel.len();
        path.extend(travel);
        paths.insert(name.clone(), path);
    }

    let actions: Vec<AgentAction> = assigns
        .iter()
        .map(|(name, assign)| match assign {
            Assign::Wait => AgentAction::wait(name),
            Assign::Do {
                verb,
                object,
                target,
                ..
            } => AgentAction {
                agent: name.clone(),
                verb: *verb,
                object: object.clone(),
                target: target.clone(),
                path: paths[name].clone(),
            },
        })
        .collect();
    ActionPlan::from_actions(actions, &spec.roster())
}

fn held_by(state: &WorldState, name: &str) -> Option<String> {
    state.robots[name].held.clone()
}

fn free_cell(state: &WorldState, object: &str) -> Option<GridCell> {
    match state.objects.get(object) {
        Some(ObjectPlace::Cell(c)) => Some(*c),
        _ => None,
    }
}

fn sort_cubes_plan(spec: &TaskSpec, state: &WorldState) -> ActionPlan {
    let pads = spec.pad_for_object.as_ref().unwrap();
    let owner = |cube: &str| match cube {
        "cube_red" => "A",
        "cube_green" => "B",
        _ => "C",
    };
    let mut assigns: Vec<(String, Assign)> = Vec::new();
    for robot in &spec.robots {
        let cube = pads
            .keys()
            .find(|c| owner(c) == robot.name)
            .expect("every robot owns a cube");
        let pad_cell = spec.named_cell(&pads[cube]).unwrap();
        let assign = if held_by(state, &robot.name).as_deref() == Some(cube.as_str()) {
            Assign::Do {
                verb: Verb::Place,
                object: Some(cube.clone()),
                target: Some(TargetRef::Name(pads[cube].clone())),
                dest: pad_cell,
            }
        } else if let Some(cell) = free_cell(state, cube) {
            if cell == pad_cell {
                Assign::Wait
            } else {
                Assign::Do {
                    verb: Verb::Pick,
                    object: Some(cube.clone()),
                    target: None,
                    dest: cell,
                }
            }
        } else {
            Assign::Wait
        };
        assigns.push((robot.name.clone(), assign));
    }
    build_plan(spec, state, &assigns)
}

fn arrange_cabinet_plan(spec: &TaskSpec, state: &WorldState) -> ActionPlan {
    let door_open = state.door_open.unwrap_or(false);
    let assigns: Vec<(String, Assign)> = if !door_open {
        vec![
            (
                "A".into(),
                Assign::Do {
                    verb: Verb::Open,
                    object: None,
                    target: Some(TargetRef::Name("handle_left".into())),
                    dest: spec.named_cell("handle_left").unwrap(),
                },
            ),
            (
                "B".into(),
                Assign::Do {
                    verb: Verb::Open,
                    object: None,
                    target: Some(TargetRef::Name("handle_right".into())),
                    dest: spec.named_cell("handle_right").unwrap(),
                },
            ),
            ("C".into(), Assign::Wait),
        ]
    } else if let Some(cup) = free_cell(state, "cup") {
        vec![
            ("A".into(), Assign::Wait),
            ("B".into(), Assign::Wait),
            (
                "C".into(),
                Assign::Do {
                    verb: Verb::Pick,
                    object: Some("cup".into()),
                    target: None,
                    dest: cup,
                },
            ),
        ]
    } else {
        vec![
            ("A".into(), Assign::Wait),
            ("B".into(), Assign::Wait),
            (
                "C".into(),
                Assign::Do {
                    verb: Verb::Place,
                    object: Some("cup".into()),
                    target: Some(TargetRef::Name("table_target".into())),
                    dest: spec.named_cell("table_target").unwrap(),
                },
            ),
        ]
    };
    build_plan(spec, state, &assigns)
}

fn sweep_floor_plan(spec: &TaskSpec, state: &WorldState) -> ActionPlan {
    let next_trash = state
        .objects
        .iter()
        .filter(|(name, _)| {
            spec.broom.as_deref() != Some(name.as_str())
                && spec.dustpan.as_deref() != Some(name.as_str())
        })
        .find_map(|(name, place)| match place {
            ObjectPlace::Cell(c) => Some((name.clone(), *c)),
            _ => None,
        });
    let assigns: Vec<(String, Assign)> = match next_trash {
        Some((name, cell)) => vec![
            (
                "A".into(),
                Assign::Do {
                    verb: Verb::Sweep,
                    object: Some(name),
                    target: None,
                    dest: GridCell::new(cell.x, cell.y - 1, cell.z),
                },
            ),
            (
                "B".into(),
                Assign::Do {
                    verb: Verb::Move,
                    object: None,
                    target: None,
                    dest: GridCell::new(cell.x, cell.y + 1, cell.z),
                },
            ),
        ],
        None => vec![
            ("A".into(), Assign::Wait),
            (
                "B".into(),
                Assign::Do {
                    verb: Verb::Dump,
                    object: None,
                    target: None,
                    dest: spec.named_cell("bin").unwrap(),
                },
            ),
        ],
    };
    build_plan(spec, state, &assigns)
}

fn make_sandwich_plan(spec: &TaskSpec, state: &WorldState) -> ActionPlan {
    let recipe = spec.recipe.as_ref().unwrap();
    let stack_len = state.stack.as_ref().map(|s| s.len()).unwrap_or(0);
    let expected = recipe.get(stack_len).map(|s| s.as_str());
    let stack_cell = spec.named_cell("stack").unwrap();
    let owner = |ingredient: &str| {
        if ingredient == "bread_slice_1" || ingredient == "tomato" {
            "A"
        } else {
            "B"
        }
    };
    let parking = GridCell::new(stack_cell.x - 1, stack_cell.y, stack_cell.z);

    let mut assigns: Vec<(String, Assign)> = Vec::new();
    for robot in &spec.robots {
        let name = robot.name.as_str();
        let assign = if let Some(held) = held_by(state, name) {
            if Some(held.as_str()) == expected {
                Assign::Do {
                    verb: Verb::Place,
                    object: Some(held),
                    target: Some(TargetRef::Name("stack".into())),
                    dest: stack_cell,
                }
            } else {
                Assign::Wait
            }
        } else {
            let fetchable = recipe
                .iter()
                .skip(stack_len)
                .find(|i| owner(i) == name && free_cell(state, i).is_some());
            match fetchable {
                Some(ingredient) => Assign::Do {
                    verb: Verb::Pick,
                    object: Some(ingredient.clone()),
                    target: None,
                    dest: free_cell(state, ingredient).unwrap(),
                },
                // An idle robot parked on the stack cell steps aside so the
                // other robot can deliver.
                None if state.robots[name].effector == stack_cell => Assign::Do {
                    verb: Verb::Move,
                    object: None,
                    target: None,
                    dest: parking,
                },
                None => Assign::Wait,
            }
        };
        assigns.push((robot.name.clone(), assign));
    }
    build_plan(spec, state, &assigns)
}

fn move_rope_plan(spec: &TaskSpec, state: &WorldState) -> ActionPlan {
    let both_held = held_by(state, "A").is_some() && held_by(state, "B").is_some();
    if !both_held {
        let assigns = vec![
            (
                "A".to_string(),
                Assign::Do {
                    verb: Verb::Pick,
                    object: Some("rope_l".into()),
                    target: None,
                    dest: object_cell(state, "rope_l").unwrap(),
                },
            ),
            (
                "B".to_string(),
                Assign::Do {
                    verb: Verb::Pick,
                    object: Some("rope_r".into()),
                    target: None,
                    dest: object_cell(state, "rope_r").unwrap(),
                },
            ),
        ];
        return build_plan(spec, state, &assigns);
    }

    // Tandem carry-and-place: both endpoints translate by the same unit
    // moves every micro-step, so their distance never changes.
    let tray = spec.tray_cells.as_ref().unwrap();
    let target_l = tray[0];
    let target_r = tray[tray.len() - 1];
    let from_l = state.robots["A"].effector;
    let from_r = state.robots["B"].effector;
    debug_assert_eq!(target_l.sub(&from_l), target_r.sub(&from_r));

    let tandem = |from: GridCell, to: GridCell| -> Vec<GridCell> {
        let mut cells = vec![from];
        let mut cur = from;
        while cur.x != to.x {
            cur.x += (to.x - cur.x).signum();
            cells.push(cur);
        }
        while cur.y != to.y {
            cur.y += (to.y - cur.y).signum();
            cells.push(cur);
        }
        while cur.z != to.z {
            cur.z += (to.z - cur.z).signum();
            cells.push(cur);
        }
        cells
    };
    let actions = vec![
        AgentAction {
            agent: "A".into(),
            verb: Verb::Place,
            object: Some("rope_l".into()),
            target: Some(TargetRef::Cell(target_l)),
            path: tandem(from_l, target_l),
        },
        AgentAction {
            agent: "B".into(),
            verb: Verb::Place,
            object: Some("rope_r".into()),
            target: Some(TargetRef::Cell(target_r)),
            path: tandem(from_r, target_r),
        },
    ];
    ActionPlan::from_actions(actions, &spec.roster())
}

/// The next optimal joint plan for the current state.
pub fn optimal_plan(spec: &TaskSpec, state: &WorldState) -> ActionPlan {
    match spec.task_id {
        TaskId::SortCubes => sort_cubes_plan(spec, state),
        TaskId::ArrangeCabinet => arrange_cabinet_plan(spec, state),
        TaskId::SweepFloor => sweep_floor_plan(spec, state),
        TaskId::MakeSandwich => make_sandwich_plan(spec, state),
        TaskId::MoveRope => move_rope_plan(spec, state),
    }
}

/// Generate the scripted-backend entries for one full optimal episode of
/// `(task, seed)`. Panics if the oracle ever produces an invalid plan.
pub fn oracle_scripts(task: TaskId, seed: i64) -> OracleScripts {
    let (spec, mut state) = load_task(task, seed).expect("known task");
    let mut llm1 = Vec::new();
    let mut llm2 = Vec::new();
    let mut step = 0u32;
    while !is_success(&state, &spec) {
        let plan = optimal_plan(&spec, &state);
        let report = validate(&plan, &state, &spec);
        assert!(
            report.ok,
            "oracle produced an invalid plan for {task} seed {seed} at step {step}:\n{}",
            report.feedback_text
        );
        llm1.push(ScriptEntry::new(format!(
            "Team, here is the agreed joint plan for this step.\nEXECUTE\n{}",
            render_plan(&plan)
        )));
        llm2.push(ScriptEntry::new(format!(
            "Step {step} review: every path stays within reach, the grippers never cross, and \
             each action's precondition holds. No issues found."
        )));
        llm2.push(ScriptEntry::new(
            "Keep the current assignment; no modifications are needed.",
        ));
        let (next, _) = apply_plan(&state, &spec, &plan).expect("oracle plan must execute");
        state = next;
        step += 1;
        assert!(
            step <= spec.max_steps,
            "oracle exceeded the step budget on {task} seed {seed}"
        );
    }
    assert_eq!(
        step,
        optimal_steps(task),
        "oracle step count drifted for {task} seed {seed}"
    );
    OracleScripts { llm1, llm2 }
}

/// Scripts for the retrospection demo on move_rope: the first plan makes the
/// two grippers collide, the critique names the crossing cell, and the
/// second plan (gated on that critique text reaching its prompt) corrects
/// course and finishes the task.
pub fn retrospect_demo_scripts(seed: i64) -> OracleScripts {
    let (spec, state) = load_task(TaskId::MoveRope, seed).expect("known task");
    let critique_marker = "the two paths cross at cell (3,0,2)";

    let bad_plan = ActionPlan::from_actions(
        vec![
            AgentAction {
                agent: "A".into(),
                verb: Verb::Move,
                object: None,
                target: None,
                path: vec![
                    GridCell::new(1, 0, 1),
                    GridCell::new(2, 0, 1),
                    GridCell::new(3, 0, 1),
                    GridCell::new(3, 0, 2),
                ],
            },
            AgentAction {
                agent: "B".into(),
                verb: Verb::Move,
                object: None,
                target: None,
                path: vec![
                    GridCell::new(6, 0, 2),
                    GridCell::new(5, 0, 2),
                    GridCell::new(4, 0, 2),
                    GridCell::new(3, 0, 2),
                ],
            },
        ],
        &spec.roster(),
    );
    let report = validate(&bad_plan, &state, &spec);
    assert!(
        !report.ok && report.feedback_text.contains("collides"),
        "demo plan must fail with a collision"
    );

    let optimal = oracle_scripts(TaskId::MoveRope, seed);
    let mut llm1 = vec![ScriptEntry::new(format!(
        "Let us both reposition first.\nEXECUTE\n{}",
        render_plan(&bad_plan)
    ))];
    let mut entries = optimal.llm1.into_iter();
    let first_good = entries.next().expect("optimal script has entries");
    llm1.push(ScriptEntry::new(first_good.response).when_contains(critique_marker));
    llm1.extend(entries);

    let mut llm2 = vec![
        ScriptEntry::new(format!(
            "The joint plan is unsafe: {critique_marker} at the same move, so the grippers \
             would collide; the approach moves must not share a cell."
        )),
        ScriptEntry::new(
            "Agent A should go straight to rope_l and Agent B to rope_r on separate layers, \
             then carry the rope to the tray together.",
        ),
    ];
    llm2.extend(optimal.llm2);
    OracleScripts { llm1, llm2 }
}
