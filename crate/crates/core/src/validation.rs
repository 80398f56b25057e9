//! Plan validation: reachability ("IK"), lockstep collision checking, and
//! per-verb subgoal feasibility, rendered as feedback text for prompts.
//!
//! Collision semantics are the standard multi-agent path-finding conflicts in
//! lockstep time: a vertex conflict is two agents on the same cell at the
//! same micro-step, a swap conflict is two agents exchanging cells between
//! consecutive micro-steps. Paths are padded by holding their last cell; an
//! agent without a path holds its current effector cell.

use serde::{Deserialize, Serialize};

use crate::actions::{ActionPlan, AgentAction, TargetRef, Verb};
use crate::world::{GridCell, ObjectPlace, TaskId, TaskSpec, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    IkFailure,
    Collision,
    SwapCollision,
    SubgoalInfeasible,
    JointActionIncomplete,
    RopeConstraint,
}

/// One validation problem, attributed to an agent and a micro-step. `detail`
/// is the rendered feedback sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub agent: String,
    pub micro_step: usize,
    pub kind: FindingKind,
    pub detail: String,
}

/// Outcome of validating one plan. `ok` iff there are no findings;
/// `feedback_text` is non-empty iff the plan failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub findings: Vec<Finding>,
    pub feedback_text: String,
}

impl ValidationReport {
    /// A failure report that carries no validator findings, used for parse
    /// and discussion failures recorded in round records.
    pub fn failure_text(text: impl Into<String>) -> Self {
        ValidationReport {
            ok: false,
            findings: Vec::new(),
            feedback_text: text.into(),
        }
    }
}

fn effector_of(state: &WorldState, agent: &str) -> GridCell {
    state
        .robots
        .get(agent)
        .map(|r| r.effector)
        .unwrap_or(GridCell::new(0, 0, 0))
}

fn final_cell_of(state: &WorldState, action: &AgentAction) -> GridCell {
    action.final_cell(effector_of(state, &action.agent))
}

fn resolve_target(spec: &TaskSpec, target: &TargetRef) -> Option<GridCell> {
    match target {
        TargetRef::Cell(c) => Some(*c),
        TargetRef::Name(n) => spec.named_cell(n),
    }
}

/// One `ik_failure` per waypoint outside the acting robot's reach envelope;
/// a path must also start at the robot's current effector cell.
pub fn check_reachability(
    plan: &ActionPlan,
    state: &WorldState,
    spec: &TaskSpec,
) -> Vec<Finding> {
    let mut findings = Vec::new();
    for action in &plan.actions {
        let Some(robot) = spec.robot(&action.agent) else {
            continue;
        };
        if let Some(first) = action.path.first() {
            let effector = effector_of(state, &action.agent);
            if *first != effector {
                findings.push(Finding {
                    agent: action.agent.clone(),
                    micro_step: 0,
                    kind: FindingKind::IkFailure,
                    detail: format!(
                        "The path for Agent {} must start at its current position {}, not {}.",
                        action.agent, effector, first
                    ),
                });
            }
        }
        for (ix, cell) in action.path.iter().enumerate() {
            if !robot.envelope.contains(cell) {
                findings.push(Finding {
                    agent: action.agent.clone(),
                    micro_step: ix,
                    kind: FindingKind::IkFailure,
                    detail: format!(
                        "The waypoint {} for Agent {} at step {} is outside its reach; adjust \
                         the path.",
                        cell, action.agent, ix
                    ),
                });
            }
        }
    }
    findings
}

/// Vertex and swap conflicts over the padded lockstep occupancy; both agents
/// of a conflicting pair are reported.
pub fn check_collisions(plan: &ActionPlan, state: &WorldState) -> Vec<Finding> {
    let mut findings = Vec::new();
    let horizon = plan.micro_len();
    let occupancy: Vec<(&AgentAction, GridCell)> = plan
        .actions
        .iter()
        .map(|a| (a, effector_of(state, &a.agent)))
        .collect();
    for i in 0..occupancy.len() {
        for j in (i + 1)..occupancy.len() {
            let (a, a_start) = occupancy[i];
            let (b, b_start) = occupancy[j];
            for t in 0..horizon {
                let pa = a.position_at(a_start, t);
                let pb = b.position_at(b_start, t);
                if pa == pb {
                    for (x, y) in [(a, b), (b, a)] {
                        findings.push(Finding {
                            agent: x.agent.clone(),
                            micro_step: t,
                            kind: FindingKind::Collision,
                            detail: format!(
                                "The path for Agent {} collides with Agent {} at step {}; \
                                 adjust the path.",
                                x.agent, y.agent, t
                            ),
                        });
                    }
                }
                if t > 0 {
                    let pa_prev = a.position_at(a_start, t - 1);
                    let pb_prev = b.position_at(b_start, t - 1);
                    if pa == pb_prev && pb == pa_prev && pa != pb {
                        for (x, y) in [(a, b), (b, a)] {
                            findings.push(Finding {
                                agent: x.agent.clone(),
                                micro_step: t,
                                kind: FindingKind::SwapCollision,
                                detail: format!(
                                    "Agent {} and Agent {} swap positions at step {}; adjust \
                                     the paths.",
                                    x.agent, y.agent, t
                                ),
                            });
                        }
                    }
                }
            }
        }
    }
    findings
}

fn infeasible(action: &AgentAction, micro_step: usize, detail: String) -> Finding {
    Finding {
        agent: action.agent.clone(),
        micro_step,
        kind: FindingKind::SubgoalInfeasible,
        detail,
    }
}

/// Verb preconditions against the current state. Effects within one step are
/// projected in roster order (so two stack placements in one plan are checked
/// against the growing stack), while door gating reads the pre-step state.
pub fn check_subgoals(plan: &ActionPlan, state: &WorldState, spec: &TaskSpec) -> Vec<Finding> {
    let mut findings = Vec::new();
    let door_open = state.door_open.unwrap_or(false);
    let mut projected_stack_len = state.stack.as_ref().map(|s| s.len()).unwrap_or(0);

    for action in &plan.actions {
        let last = action.micro_len() - 1;
        let final_cell = final_cell_of(state, action);
        match action.verb {
            Verb::Wait | Verb::Move => {}
            Verb::Pick => {
                let obj = action.object.as_deref().unwrap_or_default();
                let holder = &action.agent;
                match state.objects.get(obj) {
                    None => findings.push(infeasible(
                        action,
                        last,
                        format!("Agent {holder} cannot pick {obj}: no such object."),
                    )),
                    Some(ObjectPlace::Cell(cell)) => {
                        if *cell != final_cell {
                            findings.push(infeasible(
                                action,
                                last,
                                format!(
                                    "Agent {holder} cannot pick {obj}: the path must end at its \
                                     cell {cell}, not {final_cell}."
                                ),
                            ));
                        }
                        if let Some(held) = state
                            .robots
                            .get(holder)
                            .and_then(|r| r.held.clone())
                        {
                            findings.push(infeasible(
                                action,
                                last,
                                format!(
                                    "Agent {holder} cannot pick {obj}: its hand already holds \
                                     {held}."
                                ),
                            ));
                        }
                        if let Some(region) = &spec.cabinet_region {
                            if region.contains(cell) && !door_open {
                                findings.push(infeasible(
                                    action,
                                    last,
                                    format!(
                                        "Agent {holder} cannot pick {obj}: it is behind the \
                                         closed cabinet door."
                                    ),
                                ));
                            }
                        }
                    }
                    Some(other) => findings.push(infeasible(
                        action,
                        last,
                        format!(
                            "Agent {holder} cannot pick {obj}: it is not free on the table \
                             ({}).",
                            describe_place(other)
                        ),
                    )),
                }
            }
            Verb::Place => {
                let obj = action.object.as_deref().unwrap_or_default();
                let holder = &action.agent;
                let holding = state
                    .robots
                    .get(holder)
                    .map(|r| r.held.as_deref() == Some(obj))
                    .unwrap_or(false);
                if !holding {
                    findings.push(infeasible(
                        action,
                        last,
                        format!("Agent {holder} cannot place {obj}: it is not holding it."),
                    ));
                    continue;
                }
                let target = action.target.as_ref().unwrap();
                let Some(cell) = resolve_target(spec, target) else {
                    findings.push(infeasible(
                        action,
                        last,
                        format!("Agent {holder} cannot place {obj}: unknown target `{target}`."),
                    ));
                    continue;
                };
                if cell != final_cell {
                    findings.push(infeasible(
                        action,
                        last,
                        format!(
                            "Agent {holder} cannot place {obj}: the path must end at the target \
                             {cell}, not {final_cell}."
                        ),
                    ));
                    continue;
                }
                let is_stack = spec.recipe.is_some() && spec.named_cell("stack") == Some(cell);
                if is_stack {
                    let recipe = spec.recipe.as_ref().unwrap();
                    match recipe.get(projected_stack_len) {
                        Some(expected) if expected == obj => projected_stack_len += 1,
                        Some(expected) => findings.push(infeasible(
                            action,
                            last,
                            format!(
                                "Agent {holder} cannot stack {obj}: the recipe expects \
                                 {expected} next."
                            ),
                        )),
                        None => findings.push(infeasible(
                            action,
                            last,
                            format!(
                                "Agent {holder} cannot stack {obj}: the sandwich is already \
                                 complete."
                            ),
                        )),
                    }
                } else {
                    let occupied = state.objects.iter().find(|(other, place)| {
                        other.as_str() != obj
                            && matches!(place, ObjectPlace::Cell(c) if *c == cell)
                    });
                    if let Some((other, _)) = occupied {
                        findings.push(infeasible(
                            action,
                            last,
                            format!(
                                "Agent {holder} cannot place {obj}: cell {cell} is occupied by \
                                 {other}."
                            ),
                        ));
                    }
                }
            }
            Verb::Sweep => {
                let obj = action.object.as_deref().unwrap_or_default();
                let agent = &action.agent;
                let Some(broom) = spec.broom.as_deref() else {
                    findings.push(infeasible(
                        action,
                        last,
                        format!("Agent {agent} cannot sweep: this task has no broom."),
                    ));
                    continue;
                };
                if state.robots.get(agent).map(|r| r.held.as_deref()) != Some(Some(broom)) {
                    findings.push(infeasible(
                        action,
                        last,
                        format!("Agent {agent} cannot sweep: it is not holding the {broom}."),
                    ));
                    continue;
                }
                let Some(ObjectPlace::Cell(cell)) = state.objects.get(obj) else {
                    findings.push(infeasible(
                        action,
                        last,
                        format!("Agent {agent} cannot sweep {obj}: it is not free on the table."),
                    ));
                    continue;
                };
                let dustpan = spec.dustpan.as_deref().unwrap_or_default();
                let holder_action = state
                    .robots
                    .values()
                    .find(|r| r.held.as_deref() == Some(dustpan))
                    .and_then(|r| plan.action_for(&r.name));
                let Some(holder_action) = holder_action else {
                    findings.push(infeasible(
                        action,
                        last,
                        format!("Agent {agent} cannot sweep {obj}: nobody holds the {dustpan}."),
                    ));
                    continue;
                };
                let dustpan_final = final_cell_of(state, holder_action);
                let opposite = cell.add(&cell.sub(&final_cell));
                if cell.manhattan(&final_cell) != 1 || dustpan_final != opposite {
                    findings.push(infeasible(
                        action,
                        last,
                        format!(
                            "Agent {agent}'s sweep on {obj} cannot work: the broom must end \
                             adjacent to {cell} with the dustpan directly opposite."
                        ),
                    ));
                }
            }
            Verb::Dump => {
                let agent = &action.agent;
                let Some(dustpan) = spec.dustpan.as_deref() else {
                    findings.push(infeasible(
                        action,
                        last,
                        format!("Agent {agent} cannot dump: this task has no dustpan."),
                    ));
                    continue;
                };
                if state.robots.get(agent).map(|r| r.held.as_deref()) != Some(Some(dustpan)) {
                    findings.push(infeasible(
                        action,
                        last,
                        format!("Agent {agent} cannot dump: it is not holding the {dustpan}."),
                    ));
                    continue;
                }
                match spec.named_cell("bin") {
                    Some(bin) if bin == final_cell => {}
                    Some(bin) => findings.push(infeasible(
                        action,
                        last,
                        format!(
                            "Agent {agent} cannot dump: the path must end at the bin {bin}, not \
                             {final_cell}."
                        ),
                    )),
                    None => findings.push(infeasible(
                        action,
                        last,
                        format!("Agent {agent} cannot dump: this task has no bin."),
                    )),
                }
            }
            Verb::Open => {
                let agent = &action.agent;
                let handles: Vec<GridCell> = ["handle_left", "handle_right"]
                    .iter()
                    .filter_map(|n| spec.named_cell(n))
                    .collect();
                if handles.is_empty() {
                    findings.push(infeasible(
                        action,
                        last,
                        format!("Agent {agent} cannot open: there is no door in this task."),
                    ));
                    continue;
                }
                let target = action.target.as_ref().unwrap();
                match resolve_target(spec, target) {
                    Some(cell) if handles.contains(&cell) => {
                        if cell != final_cell {
                            findings.push(infeasible(
                                action,
                                last,
                                format!(
                                    "Agent {agent} cannot open: the path must end at the handle \
                                     {cell}, not {final_cell}."
                                ),
                            ));
                        }
                    }
                    _ => findings.push(infeasible(
                        action,
                        last,
                        format!("Agent {agent} cannot open: `{target}` is not a door handle."),
                    )),
                }
            }
        }
    }

    // Door pairing completeness: OPEN only works as a simultaneous pair on
    // both handles by two distinct agents.
    let opens: Vec<&AgentAction> = plan
        .actions
        .iter()
        .filter(|a| a.verb == Verb::Open)
        .collect();
    if !opens.is_empty() {
        let handles: Vec<GridCell> = ["handle_left", "handle_right"]
            .iter()
            .filter_map(|n| spec.named_cell(n))
            .collect();
        let engaged: Vec<GridCell> = opens
            .iter()
            .filter_map(|a| a.target.as_ref().and_then(|t| resolve_target(spec, t)))
            .collect();
        let complete = handles.len() == 2 && handles.iter().all(|h| engaged.contains(h));
        if !complete {
            for action in &opens {
                findings.push(Finding {
                    agent: action.agent.clone(),
                    micro_step: action.micro_len() - 1,
                    kind: FindingKind::JointActionIncomplete,
                    detail: format!(
                        "Opening the door requires two agents pulling both handles in the same \
                         step; Agent {}'s pull alone will not open it.",
                        action.agent
                    ),
                });
            }
        }
    }

    if spec.task_id == TaskId::MoveRope {
        findings.extend(check_rope(plan, state, spec));
    }

    findings
}

fn describe_place(place: &ObjectPlace) -> String {
    match place {
        ObjectPlace::Cell(c) => format!("at {c}"),
        ObjectPlace::Held(holder) => format!("held by Agent {holder}"),
        ObjectPlace::Dustpan => "already in the dustpan".to_string(),
        ObjectPlace::Stack => "already in the stack".to_string(),
        ObjectPlace::Bin => "already in the bin".to_string(),
    }
}

/// Rope coupling: both endpoints move together, and the Manhattan distance
/// between their projected positions never exceeds the rope length at any
/// micro-step.
fn check_rope(plan: &ActionPlan, state: &WorldState, spec: &TaskSpec) -> Vec<Finding> {
    let mut findings = Vec::new();
    let length = spec.rope_length.unwrap_or(i32::MAX);
    let horizon = plan.micro_len();

    // An endpoint either rides its holder's path or stays at its cell.
    let track = |name: &str| -> Option<(Option<String>, Vec<GridCell>)> {
        match state.objects.get(name)? {
            ObjectPlace::Cell(c) => Some((None, vec![*c; horizon])),
            ObjectPlace::Held(holder) => {
                let action = plan.action_for(holder)?;
                let start = effector_of(state, holder);
                Some((
                    Some(holder.clone()),
                    (0..horizon).map(|t| action.position_at(start, t)).collect(),
                ))
            }
            _ => None,
        }
    };
    let (Some((holder_l, track_l)), Some((holder_r, track_r))) =
        (track("rope_l"), track("rope_r"))
    else {
        return findings;
    };

    let moved_l = track_l.first() != track_l.last();
    let moved_r = track_r.first() != track_r.last();
    if moved_l != moved_r {
        let (moved_name, holder) = if moved_l {
            ("rope_l", &holder_l)
        } else {
            ("rope_r", &holder_r)
        };
        let agent = holder.clone().unwrap_or_else(|| plan.actions[0].agent.clone());
        findings.push(Finding {
            agent,
            micro_step: horizon - 1,
            kind: FindingKind::RopeConstraint,
            detail: format!(
                "The rope endpoints must move together: this step moves only {moved_name}."
            ),
        });
    }

    for t in 0..horizon {
        let d = track_l[t].manhattan(&track_r[t]);
        if d > length {
            for agent in [&holder_l, &holder_r].into_iter().flatten() {
                findings.push(Finding {
                    agent: agent.clone(),
                    micro_step: t,
                    kind: FindingKind::RopeConstraint,
                    detail: format!(
                        "The rope would stretch to {d} cells at step {t} (limit {length}); \
                         keep the endpoints within {length} cells of each other."
                    ),
                });
            }
            break;
        }
    }
    findings
}

/// Run all three checks and render the findings deterministically, ordered
/// by agent name, then micro-step, then kind.
pub fn validate(plan: &ActionPlan, state: &WorldState, spec: &TaskSpec) -> ValidationReport {
    let mut findings = check_reachability(plan, state, spec);
    findings.extend(check_collisions(plan, state));
    findings.extend(check_subgoals(plan, state, spec));
    findings.sort_by(|a, b| {
        (&a.agent, a.micro_step, a.kind, &a.detail).cmp(&(&b.agent, b.micro_step, b.kind, &b.detail))
    });
    let feedback_text = findings
        .iter()
        .map(|f| f.detail.clone())
        .collect::<Vec<_>>()
        .join("\n");
    ValidationReport {
        ok: findings.is_empty(),
        findings,
        feedback_text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::{ActionPlan, AgentAction};
    use crate::world::{load_task, object_cell, RobotState};
    use std::collections::BTreeMap;

    fn two_robot_state(a: (i32, i32, i32), b: (i32, i32, i32)) -> WorldState {
        let mut robots = BTreeMap::new();
        for (name, cell) in [("A", a), ("B", b)] {
            robots.insert(
                name.to_string(),
                RobotState {
                    name: name.to_string(),
                    effector: GridCell::new(cell.0, cell.1, cell.2),
                    held: None,
                },
            );
        }
        WorldState {
            task_id: TaskId::SortCubes,
            t: 0,
            robots,
            objects: BTreeMap::new(),
            door_open: None,
            stack: None,
            dustpan_contents: Default::default(),
            bin_contents: Default::default(),
        }
    }

    fn move_action(agent: &str, cells: &[(i32, i32, i32)]) -> AgentAction {
        AgentAction {
            agent: agent.to_string(),
            verb: Verb::Move,
            object: None,
            target: None,
            path: cells.iter().map(|&(x, y, z)| GridCell::new(x, y, z)).collect(),
        }
    }

    fn plan_of(actions: Vec<AgentAction>) -> ActionPlan {
        let roster: Vec<String> = actions.iter().map(|a| a.agent.clone()).collect();
        ActionPlan::from_actions(actions, &roster)
    }

    #[test]
    fn vertex_collision_reports_both_agents_at_the_step() {
        let state = two_robot_state((1, 1, 1), (1, 3, 1));
        let plan = plan_of(vec![
            move_action("A", &[(1, 1, 1), (1, 2, 1)]),
            move_action("B", &[(1, 3, 1), (1, 2, 1)]),
        ]);
        let findings = check_collisions(&plan, &state);
        assert_eq!(findings.len(), 2);
        assert!(findings
            .iter()
            .all(|f| f.kind == FindingKind::Collision && f.micro_step == 1));
        let agents: Vec<&str> = findings.iter().map(|f| f.agent.as_str()).collect();
        assert!(agents.contains(&"A") && agents.contains(&"B"));
    }

    #[test]
    fn swap_collision_detected() {
        let state = two_robot_state((1, 1, 1), (1, 2, 1));
        let plan = plan_of(vec![
            move_action("A", &[(1, 1, 1), (1, 2, 1)]),
            move_action("B", &[(1, 2, 1), (1, 1, 1)]),
        ]);
        let findings = check_collisions(&plan, &state);
        assert_eq!(findings.len(), 2);
        assert!(findings
            .iter()
            .all(|f| f.kind == FindingKind::SwapCollision && f.micro_step == 1));
    }

    #[test]
    fn single_agent_plan_has_no_collisions() {
        let state = two_robot_state((1, 1, 1), (1, 3, 1));
        let plan = ActionPlan::from_actions(
            vec![move_action("A", &[(1, 1, 1), (1, 2, 1)])],
            &["A".to_string()],
        );
        assert!(check_collisions(&plan, &state).is_empty());
    }

    #[test]
    fn reachability_flags_out_of_envelope_and_start_mismatch() {
        let (spec, state) = load_task(TaskId::SortCubes, 0).unwrap();
        // A's envelope is x in [0,1]; cell (2,0,1) is outside it.
        let plan = plan_of(vec![
            move_action("A", &[(0, 0, 1), (1, 0, 1), (2, 0, 1)]),
            AgentAction::wait("B"),
            AgentAction::wait("C"),
        ]);
        let findings = check_reachability(&plan, &state, &spec);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].kind, FindingKind::IkFailure);
        assert_eq!(findings[0].micro_step, 2);

        let plan = plan_of(vec![
            move_action("A", &[(0, 1, 1), (0, 2, 1)]),
            AgentAction::wait("B"),
            AgentAction::wait("C"),
        ]);
        let findings = check_reachability(&plan, &state, &spec);
        assert_eq!(findings[0].micro_step, 0);
        assert!(findings[0].detail.contains("must start at its current position"));
    }

    #[test]
    fn all_wait_plan_validates_ok_everywhere() {
        for task in crate::world::ALL_TASKS {
            let (spec, state) = load_task(task, 2).unwrap();
            let roster = spec.roster();
            let plan = ActionPlan::from_actions(
                roster.iter().map(|r| AgentAction::wait(r)).collect(),
                &roster,
            );
            let report = validate(&plan, &state, &spec);
            assert!(report.ok, "{task:?}: {}", report.feedback_text);
            assert!(report.feedback_text.is_empty());
        }
    }

    #[test]
    fn report_is_deterministic_and_renders_every_finding_once() {
        let state = two_robot_state((1, 1, 1), (1, 3, 1));
        let (spec, _) = load_task(TaskId::SortCubes, 0).unwrap();
        let plan = plan_of(vec![
            move_action("A", &[(1, 1, 1), (1, 2, 1)]),
            move_action("B", &[(1, 3, 1), (1, 2, 1)]),
        ]);
        let r1 = validate(&plan, &state, &spec);
        let r2 = validate(&plan, &state, &spec);
        assert_eq!(r1, r2);
        assert!(!r1.ok);
        for f in &r1.findings {
            assert_eq!(r1.feedback_text.matches(&f.detail).count(), 1, "{f:?}");
        }
        assert!(r1.feedback_text.contains("collides with Agent B at step 1"));
    }

    fn straight_path(from: GridCell, to: GridCell) -> Vec<GridCell> {
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
    }

    #[test]
    fn pick_and_place_subgoal_failures() {
        let (spec, state) = load_task(TaskId::MakeSandwich, 0).unwrap();
        let tomato = object_cell(&state, "tomato").unwrap();
        let a_home = state.robots["A"].effector;
        let cells = straight_path(a_home, tomato);
        let pick = AgentAction {
            agent: "A".into(),
            verb: Verb::Pick,
            object: Some("tomato".into()),
            target: None,
            path: cells,
        };
        let plan = plan_of(vec![pick.clone(), AgentAction::wait("B")]);
        assert!(check_subgoals(&plan, &state, &spec).is_empty());

        // Placing the tomato first violates the recipe order.
        let mut held = state.clone();
        held.objects.insert("tomato".into(), ObjectPlace::Held("A".into()));
        held.robots.get_mut("A").unwrap().held = Some("tomato".into());
        let stack_cell = spec.named_cell("stack").unwrap();
        held.robots.get_mut("A").unwrap().effector = stack_cell;
        let place = AgentAction {
            agent: "A".into(),
            verb: Verb::Place,
            object: Some("tomato".into()),
            target: Some(TargetRef::Name("stack".into())),
            path: vec![stack_cell],
        };
        let plan = plan_of(vec![place, AgentAction::wait("B")]);
        let findings = check_subgoals(&plan, &held, &spec);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].kind, FindingKind::SubgoalInfeasible);
        assert!(findings[0].detail.contains("expects bread_slice_1 next"));
    }

    #[test]
    fn lone_open_is_joint_action_incomplete() {
        let (spec, state) = load_task(TaskId::ArrangeCabinet, 0).unwrap();
        let plan = plan_of(vec![
            AgentAction {
                agent: "A".into(),
                verb: Verb::Open,
                object: None,
                target: Some(TargetRef::Name("handle_left".into())),
                path: vec![
                    GridCell::new(1, 0, 2),
                    GridCell::new(2, 0, 2),
                    GridCell::new(2, 1, 2),
                    GridCell::new(2, 2, 2),
                    GridCell::new(2, 3, 2),
                    GridCell::new(2, 4, 2),
                    GridCell::new(2, 4, 1),
                ],
            },
            AgentAction::wait("B"),
            AgentAction::wait("C"),
        ]);
        let findings = check_subgoals(&plan, &state, &spec);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].kind, FindingKind::JointActionIncomplete);
    }

    #[test]
    fn rope_stretch_mid_path_is_flagged_at_the_micro_step() {
        let (spec, state) = load_task(TaskId::MoveRope, 0).unwrap();
        let l = object_cell(&state, "rope_l").unwrap();
        let r = object_cell(&state, "rope_r").unwrap();
        let mut held = state.clone();
        for (endpoint, agent, cell) in [("rope_l", "A", l), ("rope_r", "B", r)] {
            held.objects
                .insert(endpoint.into(), ObjectPlace::Held(agent.into()));
            held.robots.get_mut(agent).unwrap().held = Some(endpoint.into());
            held.robots.get_mut(agent).unwrap().effector = cell;
        }
        // A climbs for two moves while B idles in place before moving: both
        // endpoints move this step, but the gap already exceeds the rope
        // length at micro-step 1.
        let plan = plan_of(vec![
            move_action("A", &[(l.x, l.y, l.z), (l.x, l.y, l.z + 1), (l.x, l.y, l.z + 2)]),
            move_action("B", &[(r.x, r.y, r.z), (r.x, r.y, r.z), (r.x, r.y + 1, r.z)]),
        ]);
        let findings = check_subgoals(&plan, &held, &spec);
        let stretch: Vec<&Finding> = findings
            .iter()
            .filter(|f| f.kind == FindingKind::RopeConstraint)
            .collect();
        assert_eq!(stretch.len(), 2, "{findings:?}");
        assert!(stretch.iter().all(|f| f.micro_step == 1));
        assert!(stretch[0].detail.contains("stretch"));
    }

    #[test]
    fn single_endpoint_rope_move_is_flagged() {
        let (spec, state) = load_task(TaskId::MoveRope, 0).unwrap();
        let l = object_cell(&state, "rope_l").unwrap();
        let mut held = state.clone();
        held.objects.insert("rope_l".into(), ObjectPlace::Held("A".into()));
        held.robots.get_mut("A").unwrap().held = Some("rope_l".into());
        held.robots.get_mut("A").unwrap().effector = l;
        let up = GridCell::new(l.x, l.y, l.z + 1);
        let plan = plan_of(vec![
            move_action("A", &[(l.x, l.y, l.z), (up.x, up.y, up.z)]),
            AgentAction::wait("B"),
        ]);
        let findings = check_subgoals(&plan, &held, &spec);
        assert!(findings
            .iter()
            .any(|f| f.kind == FindingKind::RopeConstraint
                && f.detail.contains("moves only rope_l")));
    }
}
