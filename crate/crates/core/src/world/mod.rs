//! Deterministic discrete state machines for the five benchmark tasks.
//!
//! The world is an X×Y×Z integer grid with 6-connected movement. Each robot
//! is a single end-effector cell confined to an axis-aligned reach envelope
//! (the discrete stand-in for inverse-kinematics feasibility). One call to
//! [`apply_plan`] executes one joint action plan in lockstep micro-steps and
//! advances the step counter by exactly one.

mod exec;
mod tasks;

pub use exec::apply_plan;
pub use tasks::{load_task, TaskId, ALL_TASKS};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One lattice cell. Coordinates are in grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridCell {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl GridCell {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    pub fn manhattan(&self, other: &GridCell) -> i32 {
        (self.x - other.x).abs() + (self.y - other.y).abs() + (self.z - other.z).abs()
    }

    /// True when the cells are 6-connected neighbours or identical.
    /// Repeating a cell in a path holds position for one micro-step.
    pub fn is_step_from(&self, other: &GridCell) -> bool {
        self.manhattan(other) <= 1
    }

    pub fn add(&self, d: &GridCell) -> GridCell {
        GridCell::new(self.x + d.x, self.y + d.y, self.z + d.z)
    }

    pub fn sub(&self, d: &GridCell) -> GridCell {
        GridCell::new(self.x - d.x, self.y - d.y, self.z - d.z)
    }

    pub fn neg(&self) -> GridCell {
        GridCell::new(-self.x, -self.y, -self.z)
    }
}

impl std::fmt::Display for GridCell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.x, self.y, self.z)
    }
}

/// Grid dimensions; valid cells satisfy `0 <= c < dim` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl GridDims {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    pub fn contains(&self, c: &GridCell) -> bool {
        (0..self.x).contains(&c.x) && (0..self.y).contains(&c.y) && (0..self.z).contains(&c.z)
    }
}

/// Inclusive axis-aligned box of cells a robot's effector may occupy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachEnvelope {
    pub min_cell: GridCell,
    pub max_cell: GridCell,
}

impl ReachEnvelope {
    pub const fn new(min_cell: GridCell, max_cell: GridCell) -> Self {
        Self { min_cell, max_cell }
    }

    pub fn contains(&self, c: &GridCell) -> bool {
        (self.min_cell.x..=self.max_cell.x).contains(&c.x)
            && (self.min_cell.y..=self.max_cell.y).contains(&c.y)
            && (self.min_cell.z..=self.max_cell.z).contains(&c.z)
    }

    pub fn cells(&self) -> impl Iterator<Item = GridCell> + '_ {
        (self.min_cell.x..=self.max_cell.x).flat_map(move |x| {
            (self.min_cell.y..=self.max_cell.y).flat_map(move |y| {
                (self.min_cell.z..=self.max_cell.z).map(move |z| GridCell::new(x, y, z))
            })
        })
    }
}

/// Static description of one robot in the roster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub name: String,
    pub envelope: ReachEnvelope,
    /// Effector cell at episode start.
    pub home: GridCell,
}

/// Dynamic state of one robot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotState {
    pub name: String,
    pub effector: GridCell,
    pub held: Option<String>,
}

/// Where an object currently is. Every object is in exactly one place.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ObjectPlace {
    Cell(GridCell),
    Held(String),
    Dustpan,
    Stack,
    Bin,
}

/// Full task state. Value-semantic; copying a state forks the world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub task_id: TaskId,
    /// Environment step counter; +1 per `apply_plan`.
    pub t: u32,
    pub robots: BTreeMap<String, RobotState>,
    pub objects: BTreeMap<String, ObjectPlace>,
    pub door_open: Option<bool>,
    /// Ordered ingredient stack (make_sandwich only).
    pub stack: Option<Vec<String>>,
    pub dustpan_contents: BTreeSet<String>,
    pub bin_contents: BTreeSet<String>,
}

/// Static description of one benchmark task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: TaskId,
    pub dims: GridDims,
    /// Roster in turn order.
    pub robots: Vec<RobotSpec>,
    pub goal_text: String,
    pub max_steps: u32,
    /// Task landmarks addressable by name in action plans (pads, handles,
    /// stack, bin, table target).
    pub named_cells: BTreeMap<String, GridCell>,
    /// Required stack order, bottom to top (make_sandwich).
    pub recipe: Option<Vec<String>>,
    /// cube name -> pad name (sort_cubes).
    pub pad_for_object: Option<BTreeMap<String, String>>,
    /// Cells of the tray surface (move_rope).
    pub tray_cells: Option<Vec<GridCell>>,
    /// Required endpoint difference vector, up to sign (move_rope).
    pub tray_orientation: Option<GridCell>,
    /// Maximum Manhattan distance between rope endpoints (move_rope).
    pub rope_length: Option<i32>,
    /// Region behind the cabinet door; picking from it needs the door open.
    pub cabinet_region: Option<ReachEnvelope>,
    /// Tool object that must be held to SWEEP (sweep_floor).
    pub broom: Option<String>,
    /// Tool object that must be held to DUMP and that receives sweeps.
    pub dustpan: Option<String>,
}

impl TaskSpec {
    pub fn roster(&self) -> Vec<String> {
        self.robots.iter().map(|r| r.name.clone()).collect()
    }

    pub fn robot(&self, name: &str) -> Option<&RobotSpec> {
        self.robots.iter().find(|r| r.name == name)
    }

    /// Resolve a named landmark to its cell.
    pub fn named_cell(&self, name: &str) -> Option<GridCell> {
        self.named_cells.get(name).copied()
    }
}

/// What one robot can see: its own hand plus free objects inside its own
/// reach envelope, and the task-global flags. Objects outside the envelope
/// are omitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub agent: String,
    pub effector: GridCell,
    pub held: Option<String>,
    pub visible_objects: BTreeMap<String, GridCell>,
    pub door_open: Option<bool>,
    pub stack: Option<Vec<String>>,
    pub dustpan_contents: Option<BTreeSet<String>>,
    pub bin_count: usize,
}

impl Observation {
    /// Stable one-observation text used verbatim inside prompts.
    pub fn rendered(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "You are Agent {}. Your gripper is at {}.",
            self.agent, self.effector
        ));
        match &self.held {
            Some(o) => out.push_str(&format!(" You are holding {o}.")),
            None => out.push_str(" You are holding nothing."),
        }
        out.push('\n');
        if self.visible_objects.is_empty() {
            out.push_str("Objects within your reach: none.\n");
        } else {
            let items: Vec<String> = self
                .visible_objects
                .iter()
                .map(|(n, c)| format!("{n} at {c}"))
                .collect();
            out.push_str(&format!("Objects within your reach: {}.\n", items.join(", ")));
        }
        if let Some(open) = self.door_open {
            out.push_str(&format!(
                "Door: {}.\n",
                if open { "open" } else { "closed" }
            ));
        }
        if let Some(stack) = &self.stack {
            if stack.is_empty() {
                out.push_str("Stack so far: empty.\n");
            } else {
                out.push_str(&format!("Stack so far (bottom to top): {}.\n", stack.join(", ")));
            }
        }
        if let Some(dustpan) = &self.dustpan_contents {
            if dustpan.is_empty() {
                out.push_str("In the dustpan: nothing.\n");
            } else {
                let items: Vec<&str> = dustpan.iter().map(|s| s.as_str()).collect();
                out.push_str(&format!("In the dustpan: {}.\n", items.join(", ")));
            }
        }
        out.push_str(&format!("Objects in the bin: {}.\n", self.bin_count));
        out
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorldError {
    #[error("unknown task id `{0}`")]
    UnknownTask(String),
    #[error("unknown robot `{0}`")]
    UnknownRobot(String),
    /// A plan violated a precondition the validator should have caught.
    /// Reaching this from a validated plan signals validator/simulator drift.
    #[error("internal inconsistency while executing plan: {0}")]
    InternalInconsistency(String),
}

/// Project the robot's view of the state.
pub fn observe(
    state: &WorldState,
    spec: &TaskSpec,
    robot_name: &str,
) -> Result<Observation, WorldError> {
    let robot = state
        .robots
        .get(robot_name)
        .ok_or_else(|| WorldError::UnknownRobot(robot_name.to_string()))?;
    let envelope = spec
        .robot(robot_name)
        .ok_or_else(|| WorldError::UnknownRobot(robot_name.to_string()))?
        .envelope;
    let mut visible = BTreeMap::new();
    for (name, place) in &state.objects {
        if let ObjectPlace::Cell(c) = place {
            if envelope.contains(c) {
                visible.insert(name.clone(), *c);
            }
        }
    }
    Ok(Observation {
        agent: robot_name.to_string(),
        effector: robot.effector,
        held: robot.held.clone(),
        visible_objects: visible,
        door_open: state.door_open,
        stack: state.stack.clone(),
        dustpan_contents: if spec.dustpan.is_some() {
            Some(state.dustpan_contents.clone())
        } else {
            None
        },
        bin_count: state.bin_contents.len(),
    })
}

/// Task-specific goal predicate.
pub fn is_success(state: &WorldState, spec: &TaskSpec) -> bool {
    match spec.task_id {
        TaskId::SortCubes => {
            let Some(pads) = &spec.pad_for_object else {
                return false;
            };
            pads.iter().all(|(cube, pad)| {
                let target = spec.named_cell(pad);
                matches!(
                    (state.objects.get(cube), target),
                    (Some(ObjectPlace::Cell(c)), Some(t)) if *c == t
                )
            })
        }
        TaskId::MakeSandwich => match (&state.stack, &spec.recipe) {
            (Some(stack), Some(recipe)) => stack == recipe,
            _ => false,
        },
        TaskId::ArrangeCabinet => {
            let door_open = state.door_open.unwrap_or(false);
            let target = spec.named_cell("table_target");
            let cup_placed = matches!(
                (state.objects.get("cup"), target),
                (Some(ObjectPlace::Cell(c)), Some(t)) if *c == t
            );
            door_open && cup_placed
        }
        TaskId::SweepFloor => {
            let swept: Vec<&String> = state
                .objects
                .keys()
                .filter(|n| Some((*n).clone()) != spec.broom && Some((*n).clone()) != spec.dustpan)
                .collect();
            !swept.is_empty() && swept.iter().all(|n| state.bin_contents.contains(*n))
        }
        TaskId::MoveRope => {
            let (Some(tray), Some(orient)) = (&spec.tray_cells, &spec.tray_orientation) else {
                return false;
            };
            let (Some(ObjectPlace::Cell(l)), Some(ObjectPlace::Cell(r))) =
                (state.objects.get("rope_l"), state.objects.get("rope_r"))
            else {
                return false;
            };
            let diff = r.sub(l);
            tray.contains(l) && tray.contains(r) && (diff == *orient || diff == orient.neg())
        }
    }
}

/// Current cell of an object for geometric checks: held objects sit at the
/// holder's effector.
pub fn object_cell(state: &WorldState, name: &str) -> Option<GridCell> {
    match state.objects.get(name)? {
        ObjectPlace::Cell(c) => Some(*c),
        ObjectPlace::Held(holder) => state.robots.get(holder).map(|r| r.effector),
        _ => None,
    }
}

/// Internal consistency checks shared by the executor and the tests:
/// conservation, holder agreement, envelope confinement, and free-cell
/// uniqueness outside container cells.
pub fn check_state_invariants(state: &WorldState, spec: &TaskSpec) -> Result<(), WorldError> {
    let mut seen_cells: BTreeMap<GridCell, String> = BTreeMap::new();
    for (name, place) in &state.objects {
        match place {
            ObjectPlace::Cell(c) => {
                if !spec.dims.contains(c) {
                    return Err(WorldError::InternalInconsistency(format!(
                        "object {name} out of grid at {c}"
                    )));
                }
                if let Some(prev) = seen_cells.insert(*c, name.clone()) {
                    return Err(WorldError::InternalInconsistency(format!(
                        "objects {prev} and {name} share cell {c}"
                    )));
                }
            }
            ObjectPlace::Held(holder) => {
                let robot = state.robots.get(holder).ok_or_else(|| {
                    WorldError::InternalInconsistency(format!(
                        "object {name} held by unknown robot {holder}"
                    ))
                })?;
                if robot.held.as_deref() != Some(name.as_str()) {
                    return Err(WorldError::InternalInconsistency(format!(
                        "object {name} marked held by {holder} but the robot disagrees"
                    )));
                }
            }
            ObjectPlace::Stack => {
                let in_stack = state
                    .stack
                    .as_ref()
                    .map(|s| s.contains(name))
                    .unwrap_or(false);
                if !in_stack {
                    return Err(WorldError::InternalInconsistency(format!(
                        "object {name} marked stacked but missing from the stack list"
                    )));
                }
            }
            ObjectPlace::Dustpan => {
                if !state.dustpan_contents.contains(name) {
                    return Err(WorldError::InternalInconsistency(format!(
                        "object {name} marked in dustpan but missing from dustpan contents"
                    )));
                }
            }
            ObjectPlace::Bin => {
                if !state.bin_contents.contains(name) {
                    return Err(WorldError::InternalInconsistency(format!(
                        "object {name} marked binned but missing from bin contents"
                    )));
                }
            }
        }
    }
    for (name, robot) in &state.robots {
        let rs = spec
            .robot(name)
            .ok_or_else(|| WorldError::UnknownRobot(name.clone()))?;
        if !rs.envelope.contains(&robot.effector) {
            return Err(WorldError::InternalInconsistency(format!(
                "robot {name} effector {} escaped its reach envelope",
                robot.effector
            )));
        }
        if let Some(held) = &robot.held {
            if state.objects.get(held) != Some(&ObjectPlace::Held(name.clone())) {
                return Err(WorldError::InternalInconsistency(format!(
                    "robot {name} claims to hold {held} but the object disagrees"
                )));
            }
        }
    }
    if let Some(stack) = &state.stack {
        for name in stack {
            if state.objects.get(name) != Some(&ObjectPlace::Stack) {
                return Err(WorldError::InternalInconsistency(format!(
                    "stack lists {name} but the object is elsewhere"
                )));
            }
        }
    }
    Ok(())
}
