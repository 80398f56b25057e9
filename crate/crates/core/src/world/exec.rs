//! Joint plan execution.
//!
//! Movement is lockstep: at micro-step i every agent occupies `path[i]`,
//! holding its last cell once its path is exhausted. Verb effects are applied
//! after movement, in roster order, against the evolving state — with one
//! exception: door gating reads the pre-step door state, so a cup behind the
//! door cannot be picked in the very step that opens it.
//!
//! `apply_plan` assumes the plan already passed `validation::validate`. It
//! still re-checks preconditions with its own independent logic; a violation
//! raises `WorldError::InternalInconsistency`, which in a validated plan
//! signals validator/simulator drift. Joint geometric conditionals (OPEN
//! pairing, SWEEP alignment, DUMP location) are lenient instead: they leave
//! the state unchanged and note the incomplete action in the feedback.

use crate::actions::{ActionPlan, TargetRef, Verb};

use super::{
    check_state_invariants, object_cell, GridCell, ObjectPlace, TaskId, TaskSpec, WorldError,
    WorldState,
};

fn inconsistency(msg: String) -> WorldError {
    WorldError::InternalInconsistency(msg)
}

fn resolve_target(spec: &TaskSpec, target: &TargetRef) -> Option<GridCell> {
    match target {
        TargetRef::Cell(c) => Some(*c),
        TargetRef::Name(n) => spec.named_cell(n),
    }
}

fn handle_cells(spec: &TaskSpec) -> Vec<GridCell> {
    ["handle_left", "handle_right"]
        .iter()
        .filter_map(|n| spec.named_cell(n))
        .collect()
}

/// Execute one validated joint plan. Returns the successor state and a
/// rendered feedback summary of the step's effects.
pub fn apply_plan(
    state: &WorldState,
    spec: &TaskSpec,
    plan: &ActionPlan,
) -> Result<(WorldState, String), WorldError> {
    let roster = spec.roster();
    if plan.actions.len() != roster.len()
        || !roster.iter().all(|r| plan.action_for(r).is_some())
    {
        return Err(inconsistency(
            "plan does not cover the roster exactly".to_string(),
        ));
    }

    let mut next = state.clone();
    let door_open_before = state.door_open.unwrap_or(false);
    let rope_before = (
        object_cell(state, "rope_l"),
        object_cell(state, "rope_r"),
    );

    // Movement, with strict path re-checks.
    let mut final_cells: Vec<(String, GridCell)> = Vec::new();
    for robot_spec in &spec.robots {
        let action = plan.action_for(&robot_spec.name).unwrap();
        let robot = next.robots.get(&robot_spec.name).unwrap().clone();
        if let Some(first) = action.path.first() {
            if *first != robot.effector {
                return Err(inconsistency(format!(
                    "agent {} path starts at {} but its effector is at {}",
                    robot_spec.name, first, robot.effector
                )));
            }
        }
        for cell in &action.path {
            if !robot_spec.envelope.contains(cell) {
                return Err(inconsistency(format!(
                    "agent {} waypoint {} is outside its reach envelope",
                    robot_spec.name, cell
                )));
            }
        }
        let final_cell = action.final_cell(robot.effector);
        if let Some((other, _)) = final_cells.iter().find(|(_, c)| *c == final_cell) {
            return Err(inconsistency(format!(
                "agents {} and {} end the step on the same cell {}",
                other, robot_spec.name, final_cell
            )));
        }
        final_cells.push((robot_spec.name.clone(), final_cell));
        next.robots.get_mut(&robot_spec.name).unwrap().effector = final_cell;
    }

    // Verb effects in roster order.
    let mut feedback: Vec<String> = Vec::new();
    let mut engaged_handles: Vec<(String, GridCell)> = Vec::new();
    for robot_spec in &spec.robots {
        let name = &robot_spec.name;
        let action = plan.action_for(name).unwrap();
        let at = next.robots.get(name).unwrap().effector;
        match action.verb {
            Verb::Wait => feedback.push(format!("Agent {name} waited at {at}.")),
            Verb::Move => feedback.push(format!("Agent {name} moved to {at}.")),
            Verb::Pick => {
                let obj = action.object.as_deref().unwrap_or_default();
                let place = next
                    .objects
                    .get(obj)
                    .cloned()
                    .ok_or_else(|| inconsistency(format!("agent {name} picks unknown object {obj}")))?;
                let cell = match place {
                    ObjectPlace::Cell(c) => c,
                    other => {
                        return Err(inconsistency(format!(
                            "agent {name} picks {obj} which is not free on the table ({other:?})"
                        )))
                    }
                };
                if cell != at {
                    return Err(inconsistency(format!(
                        "agent {name} ends at {at} but {obj} is at {cell}"
                    )));
                }
                if next.robots.get(name).unwrap().held.is_some() {
                    return Err(inconsistency(format!(
                        "agent {name} picks {obj} with a full hand"
                    )));
                }
                if let Some(region) = &spec.cabinet_region {
                    if region.contains(&cell) && !door_open_before {
                        return Err(inconsistency(format!(
                            "agent {name} picks {obj} from behind the closed door"
                        )));
                    }
                }
                next.objects.insert(obj.to_string(), ObjectPlace::Held(name.clone()));
                next.robots.get_mut(name).unwrap().held = Some(obj.to_string());
                feedback.push(format!("Agent {name} picked up {obj} at {cell}."));
            }
            Verb::Place => {
                let obj = action.object.as_deref().unwrap_or_default();
                if next.robots.get(name).unwrap().held.as_deref() != Some(obj) {
                    return Err(inconsistency(format!(
                        "agent {name} places {obj} without holding it"
                    )));
                }
                let target = action.target.as_ref().unwrap();
                let cell = resolve_target(spec, target).ok_or_else(|| {
                    inconsistency(format!("agent {name} places {obj} at unknown target {target}"))
                })?;
                if cell != at {
                    return Err(inconsistency(format!(
                        "agent {name} ends at {at} but the place target is {cell}"
                    )));
                }
                let is_stack = spec.recipe.is_some() && spec.named_cell("stack") == Some(cell);
                if is_stack {
                    let recipe = spec.recipe.as_ref().unwrap();
                    let stack = next.stack.get_or_insert_with(Vec::new);
                    match recipe.get(stack.len()) {
                        Some(expected) if expected == obj => {}
                        Some(expected) => {
                            return Err(inconsistency(format!(
                                "agent {name} stacks {obj} but the recipe expects {expected}"
                            )))
                        }
                        None => {
                            return Err(inconsistency(format!(
                                "agent {name} stacks {obj} but the sandwich is already complete"
                            )))
                        }
                    }
                    stack.push(obj.to_string());
                    next.objects.insert(obj.to_string(), ObjectPlace::Stack);
                    feedback.push(format!("Agent {name} added {obj} to the stack."));
                } else {
                    let occupied = next.objects.iter().any(|(other, place)| {
                        other != obj && matches!(place, ObjectPlace::Cell(c) if *c == cell)
                    });
                    if occupied {
                        return Err(inconsistency(format!(
                            "agent {name} places {obj} on occupied cell {cell}"
                        )));
                    }
                    next.objects.insert(obj.to_string(), ObjectPlace::Cell(cell));
                    feedback.push(format!("Agent {name} placed {obj} at {cell}."));
                }
                next.robots.get_mut(name).unwrap().held = None;
            }
            Verb::Sweep => {
                let obj = action.object.as_deref().unwrap_or_default();
                let broom = spec.broom.as_deref().ok_or_else(|| {
                    inconsistency(format!("agent {name} sweeps but this task has no broom"))
                })?;
                if next.robots.get(name).unwrap().held.as_deref() != Some(broom) {
                    return Err(inconsistency(format!(
                        "agent {name} sweeps without holding the {broom}"
                    )));
                }
                let cell = match next.objects.get(obj) {
                    Some(ObjectPlace::Cell(c)) => *c,
                    other => {
                        return Err(inconsistency(format!(
                            "agent {name} sweeps {obj} which is not free on the table ({other:?})"
                        )))
                    }
                };
                let dustpan = spec.dustpan.as_deref().unwrap_or_default();
                let holder = next
                    .robots
                    .values()
                    .find(|r| r.held.as_deref() == Some(dustpan))
                    .ok_or_else(|| {
                        inconsistency(format!("nobody holds the {dustpan} for agent {name}'s sweep"))
                    })?;
                let opposite = cell.add(&cell.sub(&at));
                if cell.manhattan(&at) == 1 && holder.effector == opposite {
                    next.objects.insert(obj.to_string(), ObjectPlace::Dustpan);
                    next.dustpan_contents.insert(obj.to_string());
                    feedback.push(format!("Agent {name} swept {obj} into the dustpan."));
                } else {
                    feedback.push(format!(
                        "Agent {name}'s sweep on {obj} had no effect: the broom and the dustpan \
                         must end adjacent to it on opposite sides."
                    ));
                }
            }
            Verb::Dump => {
                let dustpan = spec.dustpan.as_deref().ok_or_else(|| {
                    inconsistency(format!("agent {name} dumps but this task has no dustpan"))
                })?;
                if next.robots.get(name).unwrap().held.as_deref() != Some(dustpan) {
                    return Err(inconsistency(format!(
                        "agent {name} dumps without holding the {dustpan}"
                    )));
                }
                let bin = spec.named_cell("bin").ok_or_else(|| {
                    inconsistency(format!("agent {name} dumps but this task has no bin"))
                })?;
                if at == bin {
                    let count = next.dustpan_contents.len();
                    for obj in std::mem::take(&mut next.dustpan_contents) {
                        next.objects.insert(obj.clone(), ObjectPlace::Bin);
                        next.bin_contents.insert(obj);
                    }
                    feedback.push(format!(
                        "Agent {name} dumped {count} object(s) into the bin."
                    ));
                } else {
                    feedback.push(format!(
                        "Agent {name}'s dump had no effect: the dustpan is at {at}, not at the \
                         bin {bin}."
                    ));
                }
            }
            Verb::Open => {
                let target = action.target.as_ref().unwrap();
                let cell = resolve_target(spec, target).ok_or_else(|| {
                    inconsistency(format!("agent {name} opens unknown handle {target}"))
                })?;
                if !handle_cells(spec).contains(&cell) {
                    return Err(inconsistency(format!(
                        "agent {name} opens {target} which is not a door handle"
                    )));
                }
                if cell != at {
                    return Err(inconsistency(format!(
                        "agent {name} ends at {at} but the handle is at {cell}"
                    )));
                }
                engaged_handles.push((name.clone(), cell));
                feedback.push(format!("Agent {name} pulled the handle at {cell}."));
            }
        }
    }

    // Door pairing: both handles engaged by distinct agents in this step.
    let opens_issued = plan.actions.iter().any(|a| a.verb == Verb::Open);
    if opens_issued {
        let handles = handle_cells(spec);
        let covered = handles.len() == 2
            && handles.iter().all(|h| engaged_handles.iter().any(|(_, c)| c == h));
        if covered && !door_open_before {
            next.door_open = Some(true);
            feedback.push("The door is now open.".to_string());
        } else if !door_open_before {
            feedback.push(
                "The door did not open: both handles must be pulled by two agents in the same \
                 step."
                    .to_string(),
            );
        }
    }

    // Rope coupling: endpoints move together and stay within the rope length.
    if spec.task_id == TaskId::MoveRope {
        let rope_after = (object_cell(&next, "rope_l"), object_cell(&next, "rope_r"));
        let moved_l = rope_before.0 != rope_after.0;
        let moved_r = rope_before.1 != rope_after.1;
        if moved_l != moved_r {
            return Err(inconsistency(
                "exactly one rope endpoint moved this step".to_string(),
            ));
        }
        if let (Some(l), Some(r)) = rope_after {
            let len = spec.rope_length.unwrap_or(i32::MAX);
            if l.manhattan(&r) > len {
                return Err(inconsistency(format!(
                    "rope stretched to {} cells (limit {len})",
                    l.manhattan(&r)
                )));
            }
        }
    }

    next.t = state.t + 1;
    check_state_invariants(&next, spec)?;
    Ok((next, feedback.join(" ")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::{ActionPlan, AgentAction};
    use crate::world::{load_task, GridCell};

    fn wait_plan(spec: &TaskSpec) -> ActionPlan {
        let roster = spec.roster();
        ActionPlan::from_actions(roster.iter().map(|r| AgentAction::wait(r)).collect(), &roster)
    }

    fn path(cells: &[(i32, i32, i32)]) -> Vec<GridCell> {
        cells.iter().map(|&(x, y, z)| GridCell::new(x, y, z)).collect()
    }

    #[test]
    fn all_wait_only_advances_the_clock() {
        for task in crate::world::ALL_TASKS {
            let (spec, state) = load_task(task, 1).unwrap();
            let (next, _) = apply_plan(&state, &spec, &wait_plan(&spec)).unwrap();
            assert_eq!(next.t, state.t + 1);
            let mut rewound = next.clone();
            rewound.t = state.t;
            assert_eq!(rewound, state);
        }
    }

    #[test]
    fn apply_is_deterministic() {
        let (spec, state) = load_task(TaskId::SortCubes, 5).unwrap();
        let a = apply_plan(&state, &spec, &wait_plan(&spec)).unwrap();
        let b = apply_plan(&state, &spec, &wait_plan(&spec)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pick_attaches_object_at_final_waypoint() {
        let (spec, mut state) = load_task(TaskId::SortCubes, 0).unwrap();
        let cube = GridCell::new(0, 2, 0);
        state
            .objects
            .insert("cube_red".into(), ObjectPlace::Cell(cube));
        let roster = spec.roster();
        let mut actions = vec![
            AgentAction::wait("B"),
            AgentAction::wait("C"),
        ];
        actions.push(AgentAction {
            agent: "A".into(),
            verb: Verb::Pick,
            object: Some("cube_red".into()),
            target: None,
            path: path(&[(0, 0, 1), (0, 1, 1), (0, 2, 1), (0, 2, 0)]),
        });
        let plan = ActionPlan::from_actions(actions, &roster);
        let (next, feedback) = apply_plan(&state, &spec, &plan).unwrap();
        assert_eq!(
            next.objects.get("cube_red"),
            Some(&ObjectPlace::Held("A".into()))
        );
        assert_eq!(next.robots["A"].held.as_deref(), Some("cube_red"));
        assert!(feedback.contains("picked up cube_red"));
    }

    #[test]
    fn lone_open_leaves_door_closed_with_feedback() {
        let (spec, state) = load_task(TaskId::ArrangeCabinet, 0).unwrap();
        let roster = spec.roster();
        let handle = spec.named_cell("handle_left").unwrap();
        let actions = vec![
            AgentAction {
                agent: "A".into(),
                verb: Verb::Open,
                object: None,
                target: Some(TargetRef::Name("handle_left".into())),
                path: path(&[(1, 0, 2), (2, 0, 2), (2, 1, 2), (2, 2, 2), (2, 3, 2), (2, 4, 2), (2, 4, 1)]),
            },
            AgentAction::wait("B"),
            AgentAction::wait("C"),
        ];
        let plan = ActionPlan::from_actions(actions, &roster);
        let (next, feedback) = apply_plan(&state, &spec, &plan).unwrap();
        assert_eq!(next.door_open, Some(false));
        assert_eq!(next.robots["A"].effector, handle);
        assert!(feedback.contains("did not open"));
    }

    #[test]
    fn paired_open_opens_the_door_and_it_stays_open() {
        let (spec, state) = load_task(TaskId::ArrangeCabinet, 0).unwrap();
        let roster = spec.roster();
        let actions = vec![
            AgentAction {
                agent: "A".into(),
                verb: Verb::Open,
                object: None,
                target: Some(TargetRef::Name("handle_left".into())),
                path: path(&[(1, 0, 2), (2, 0, 2), (2, 1, 2), (2, 2, 2), (2, 3, 2), (2, 4, 2), (2, 4, 1)]),
            },
            AgentAction {
                agent: "B".into(),
                verb: Verb::Open,
                object: None,
                target: Some(TargetRef::Name("handle_right".into())),
                path: path(&[(6, 0, 3), (5, 0, 3), (5, 1, 3), (5, 2, 3), (5, 3, 3), (5, 4, 3), (5, 4, 2), (5, 4, 1)]),
            },
            AgentAction::wait("C"),
        ];
        let plan = ActionPlan::from_actions(actions, &roster);
        let (next, feedback) = apply_plan(&state, &spec, &plan).unwrap();
        assert_eq!(next.door_open, Some(true));
        assert!(feedback.contains("The door is now open."));
        let (after_wait, _) = apply_plan(&next, &spec, &wait_plan(&spec)).unwrap();
        assert_eq!(after_wait.door_open, Some(true));
    }

    #[test]
    fn only_the_simultaneous_open_pair_opens_the_door() {
        let (spec, state) = load_task(TaskId::ArrangeCabinet, 0).unwrap();
        let roster = spec.roster();
        let open_left = AgentAction {
            agent: "A".into(),
            verb: Verb::Open,
            object: None,
            target: Some(TargetRef::Name("handle_left".into())),
            path: path(&[(1, 0, 2), (2, 0, 2), (2, 1, 2), (2, 2, 2), (2, 3, 2), (2, 4, 2), (2, 4, 1)]),
        };
        let open_right = AgentAction {
            agent: "B".into(),
            verb: Verb::Open,
            object: None,
            target: Some(TargetRef::Name("handle_right".into())),
            path: path(&[(6, 0, 3), (5, 0, 3), (5, 1, 3), (5, 2, 3), (5, 3, 3), (5, 4, 3), (5, 4, 2), (5, 4, 1)]),
        };
        let combos: Vec<(Vec<AgentAction>, bool)> = vec![
            (vec![open_left.clone(), AgentAction::wait("B"), AgentAction::wait("C")], false),
            (vec![AgentAction::wait("A"), open_right.clone(), AgentAction::wait("C")], false),
            (vec![open_left, open_right, AgentAction::wait("C")], true),
        ];
        for (actions, should_open) in combos {
            let plan = ActionPlan::from_actions(actions, &roster);
            let (next, _) = apply_plan(&state, &spec, &plan).unwrap();
            assert_eq!(next.door_open, Some(should_open), "{plan:?}");
        }
    }

    #[test]
    fn pick_behind_closed_door_is_inconsistent() {
        let (spec, state) = load_task(TaskId::ArrangeCabinet, 0).unwrap();
        let cup = crate::world::object_cell(&state, "cup").unwrap();
        let roster = spec.roster();
        // Walk C from its home straight to the cup; door still closed.
        let mut cells = vec![GridCell::new(4, 0, 1)];
        let mut cur = cells[0];
        while cur.x != cup.x {
            cur.x += (cup.x - cur.x).signum();
            cells.push(cur);
        }
        while cur.y != cup.y {
            cur.y += (cup.y - cur.y).signum();
            cells.push(cur);
        }
        let actions = vec![
            AgentAction::wait("A"),
            AgentAction::wait("B"),
            AgentAction {
                agent: "C".into(),
                verb: Verb::Pick,
                object: Some("cup".into()),
                target: None,
                path: cells,
            },
        ];
        let plan = ActionPlan::from_actions(actions, &roster);
        let err = apply_plan(&state, &spec, &plan).unwrap_err();
        assert!(matches!(err, WorldError::InternalInconsistency(_)));
    }

    #[test]
    fn moving_one_rope_endpoint_is_inconsistent() {
        let (spec, state) = load_task(TaskId::MoveRope, 0).unwrap();
        let l = crate::world::object_cell(&state, "rope_l").unwrap();
        let roster = spec.roster();
        // First step: A legitimately picks up rope_l (endpoint does not move).
        let mut cells = vec![GridCell::new(1, 0, 1)];
        let mut cur = cells[0];
        while cur.x != l.x {
            cur.x += (l.x - cur.x).signum();
            cells.push(cur);
        }
        while cur.y != l.y {
            cur.y += (l.y - cur.y).signum();
            cells.push(cur);
        }
        while cur.z != l.z {
            cur.z += (l.z - cur.z).signum();
            cells.push(cur);
        }
        let pick = ActionPlan::from_actions(
            vec![
                AgentAction {
                    agent: "A".into(),
                    verb: Verb::Pick,
                    object: Some("rope_l".into()),
                    target: None,
                    path: cells,
                },
                AgentAction::wait("B"),
            ],
            &roster,
        );
        let (held, _) = apply_plan(&state, &spec, &pick).unwrap();
        // Second step: A carries rope_l away while B waits. rope_r stays.
        let from = held.robots["A"].effector;
        let away = GridCell::new(from.x, from.y, from.z + 1);
        let carry = ActionPlan::from_actions(
            vec![
                AgentAction {
                    agent: "A".into(),
                    verb: Verb::Move,
                    object: None,
                    target: None,
                    path: vec![from, away],
                },
                AgentAction::wait("B"),
            ],
            &roster,
        );
        let err = apply_plan(&held, &spec, &carry).unwrap_err();
        assert!(matches!(err, WorldError::InternalInconsistency(_)));
    }
}
