//! The five benchmark tasks: fixed landmarks, rosters, reach envelopes, and
//! seeded initial object placement.
//!
//! All tasks share an 8×6×4 grid. Row y=0 is kept free of task landmarks so
//! robots can idle there. Seeds only permute object placements inside
//! task-legal regions; robots, pads, handles, tray, and bin are fixed.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    GridCell, GridDims, ObjectPlace, ReachEnvelope, RobotSpec, RobotState, TaskSpec, WorldError,
    WorldState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    ArrangeCabinet,
    SweepFloor,
    MakeSandwich,
    SortCubes,
    MoveRope,
}

pub const ALL_TASKS: [TaskId; 5] = [
    TaskId::ArrangeCabinet,
    TaskId::SweepFloor,
    TaskId::MakeSandwich,
    TaskId::SortCubes,
    TaskId::MoveRope,
];

impl TaskId {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskId::ArrangeCabinet => "arrange_cabinet",
            TaskId::SweepFloor => "sweep_floor",
            TaskId::MakeSandwich => "make_sandwich",
            TaskId::SortCubes => "sort_cubes",
            TaskId::MoveRope => "move_rope",
        }
    }
}

impl std::fmt::Display for TaskId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskId {
    type Err = WorldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arrange_cabinet" => Ok(TaskId::ArrangeCabinet),
            "sweep_floor" => Ok(TaskId::SweepFloor),
            "make_sandwich" => Ok(TaskId::MakeSandwich),
            "sort_cubes" => Ok(TaskId::SortCubes),
            "move_rope" => Ok(TaskId::MoveRope),
            other => Err(WorldError::UnknownTask(other.to_string())),
        }
    }
}

const DIMS: GridDims = GridDims::new(8, 6, 4);
const MAX_STEPS: u32 = 15;

fn robot(name: &str, min: (i32, i32, i32), max: (i32, i32, i32), home: (i32, i32, i32)) -> RobotSpec {
    RobotSpec {
        name: name.to_string(),
        envelope: ReachEnvelope::new(
            GridCell::new(min.0, min.1, min.2),
            GridCell::new(max.0, max.1, max.2),
        ),
        home: GridCell::new(home.0, home.1, home.2),
    }
}

fn rng_for(task: TaskId, seed: i64) -> ChaCha8Rng {
    let task_ix = ALL_TASKS.iter().position(|t| *t == task).unwrap() as u64;
    ChaCha8Rng::seed_from_u64((seed as u64) ^ (task_ix << 56))
}

/// Pick `k` distinct cells from `region`, in rng order.
fn sample_cells(rng: &mut ChaCha8Rng, region: &[GridCell], k: usize) -> Vec<GridCell> {
    assert!(region.len() >= k, "region too small to place {k} objects");
    let mut pool: Vec<GridCell> = region.to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let ix = rng.random_range(0..pool.len());
        out.push(pool.swap_remove(ix));
    }
    out
}

fn region(xs: std::ops::RangeInclusive<i32>, ys: std::ops::RangeInclusive<i32>, z: i32) -> Vec<GridCell> {
    let mut cells = Vec::new();
    for x in xs {
        for y in ys.clone() {
            cells.push(GridCell::new(x, y, z));
        }
    }
    cells
}

fn base_state(task_id: TaskId, robots: &[RobotSpec]) -> WorldState {
    WorldState {
        task_id,
        t: 0,
        robots: robots
            .iter()
            .map(|r| {
                (
                    r.name.clone(),
                    RobotState {
                        name: r.name.clone(),
                        effector: r.home,
                        held: None,
                    },
                )
            })
            .collect(),
        objects: BTreeMap::new(),
        door_open: None,
        stack: None,
        dustpan_contents: BTreeSet::new(),
        bin_contents: BTreeSet::new(),
    }
}

/// Build the initial world for `(task_id, seed)`. Deterministic: the same
/// pair always yields the same spec and state.
pub fn load_task(task_id: TaskId, seed: i64) -> Result<(TaskSpec, WorldState), WorldError> {
    let mut rng = rng_for(task_id, seed);
    match task_id {
        TaskId::SortCubes => Ok(sort_cubes(&mut rng)),
        TaskId::ArrangeCabinet => Ok(arrange_cabinet(&mut rng)),
        TaskId::SweepFloor => Ok(sweep_floor(&mut rng)),
        TaskId::MakeSandwich => Ok(make_sandwich(&mut rng)),
        TaskId::MoveRope => Ok(move_rope(&mut rng)),
    }
}

fn spec_skeleton(task_id: TaskId, robots: Vec<RobotSpec>, goal_text: String) -> TaskSpec {
    TaskSpec {
        task_id,
        dims: DIMS,
        robots,
        goal_text,
        max_steps: MAX_STEPS,
        named_cells: BTreeMap::new(),
        recipe: None,
        pad_for_object: None,
        tray_cells: None,
        tray_orientation: None,
        rope_length: None,
        cabinet_region: None,
        broom: None,
        dustpan: None,
    }
}

fn describe_roster(robots: &[RobotSpec]) -> String {
    robots
        .iter()
        .map(|r| {
            format!(
                "Agent {} can reach cells from {} to {}",
                r.name, r.envelope.min_cell, r.envelope.max_cell
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn sort_cubes(rng: &mut ChaCha8Rng) -> (TaskSpec, WorldState) {
    let robots = vec![
        robot("A", (0, 0, 0), (1, 5, 3), (0, 0, 1)),
        robot("B", (3, 0, 0), (4, 5, 3), (3, 0, 2)),
        robot("C", (6, 0, 0), (7, 5, 3), (6, 0, 3)),
    ];
    let pads = [
        ("pad_red", GridCell::new(1, 1, 0)),
        ("pad_green", GridCell::new(4, 1, 0)),
        ("pad_blue", GridCell::new(6, 1, 0)),
    ];
    let zones = [
        ("cube_red", 0..=1),
        ("cube_green", 3..=4),
        ("cube_blue", 6..=7),
    ];

    let goal = format!(
        "Three colored cubes sit on the table and each must end up on the pad of \
         its own color: cube_red on pad_red at {}, cube_green on pad_green at {}, \
         cube_blue on pad_blue at {}. {}. Each agent can only handle the cube and \
         pad inside its reach.",
        pads[0].1,
        pads[1].1,
        pads[2].1,
        describe_roster(&robots)
    );
    let mut spec = spec_skeleton(TaskId::SortCubes, robots, goal);
    for (name, cell) in pads {
        spec.named_cells.insert(name.to_string(), cell);
    }
    spec.pad_for_object = Some(
        [
            ("cube_red", "pad_red"),
            ("cube_green", "pad_green"),
            ("cube_blue", "pad_blue"),
        ]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect(),
    );

    let mut state = base_state(TaskId::SortCubes, &spec.robots);
    for (name, xs) in zones {
        let cell = sample_cells(rng, &region(xs, 2..=5, 0), 1)[0];
        state.objects.insert(name.to_string(), ObjectPlace::Cell(cell));
    }
    (spec, state)
}

fn arrange_cabinet(rng: &mut ChaCha8Rng) -> (TaskSpec, WorldState) {
    let robots = vec![
        robot("A", (0, 0, 0), (3, 5, 3), (1, 0, 2)),
        robot("B", (4, 0, 0), (7, 5, 3), (6, 0, 3)),
        robot("C", (2, 0, 0), (5, 5, 3), (4, 0, 1)),
    ];
    let handle_left = GridCell::new(2, 4, 1);
    let handle_right = GridCell::new(5, 4, 1);
    let table_target = GridCell::new(3, 1, 0);

    let goal = format!(
        "A cup sits inside a cabinet at the back of the table, behind a closed \
         door. The door only opens when two agents pull both handles \
         (handle_left at {handle_left}, handle_right at {handle_right}) in the \
         same step, and it stays open afterwards. Once the door is open, the cup \
         must be picked and placed on the table at table_target {table_target}. \
         {}.",
        describe_roster(&robots)
    );
    let mut spec = spec_skeleton(TaskId::ArrangeCabinet, robots, goal);
    spec.named_cells.insert("handle_left".into(), handle_left);
    spec.named_cells.insert("handle_right".into(), handle_right);
    spec.named_cells.insert("table_target".into(), table_target);
    spec.cabinet_region = Some(ReachEnvelope::new(
        GridCell::new(2, 5, 0),
        GridCell::new(5, 5, 2),
    ));

    let mut state = base_state(TaskId::ArrangeCabinet, &spec.robots);
    state.door_open = Some(false);
    let cup = sample_cells(rng, &region(3..=4, 5..=5, 1), 1)[0];
    state.objects.insert("cup".into(), ObjectPlace::Cell(cup));
    (spec, state)
}

fn sweep_floor(rng: &mut ChaCha8Rng) -> (TaskSpec, WorldState) {
    let robots = vec![
        robot("A", (0, 0, 0), (7, 5, 3), (1, 0, 1)),
        robot("B", (0, 0, 0), (7, 5, 3), (6, 0, 2)),
    ];
    let bin = GridCell::new(7, 5, 0);

    let goal = format!(
        "Three pieces of trash lie on the table. Agent A holds the broom and \
         Agent B holds the dustpan. A SWEEP moves one piece into the dustpan \
         when the broom ends directly on one side of it and the dustpan ends on \
         the opposite side in the same step. Carry the dustpan to the bin at \
         {bin} and DUMP to throw everything away. All three pieces must end up \
         in the bin. {}.",
        describe_roster(&robots)
    );
    let mut spec = spec_skeleton(TaskId::SweepFloor, robots, goal);
    spec.named_cells.insert("bin".into(), bin);
    spec.broom = Some("broom".into());
    spec.dustpan = Some("dustpan".into());

    let mut state = base_state(TaskId::SweepFloor, &spec.robots);
    state.objects.insert("broom".into(), ObjectPlace::Held("A".into()));
    state.objects.insert("dustpan".into(), ObjectPlace::Held("B".into()));
    state.robots.get_mut("A").unwrap().held = Some("broom".into());
    state.robots.get_mut("B").unwrap().held = Some("dustpan".into());

    // Trash pieces sit in distinct, well-separated columns so a sweep on one
    // piece never runs into another.
    let mut columns = [1, 3, 5];
    for i in (1..columns.len()).rev() {
        let j = rng.random_range(0..=i);
        columns.swap(i, j);
    }
    for (ix, name) in ["trash_1", "trash_2", "trash_3"].iter().enumerate() {
        let y = rng.random_range(1..=4);
        state.objects.insert(
            name.to_string(),
            ObjectPlace::Cell(GridCell::new(columns[ix], y, 0)),
        );
    }
    (spec, state)
}

fn make_sandwich(rng: &mut ChaCha8Rng) -> (TaskSpec, WorldState) {
    let robots = vec![
        robot("A", (0, 0, 0), (4, 5, 3), (1, 0, 1)),
        robot("B", (3, 0, 0), (7, 5, 3), (6, 0, 2)),
    ];
    let stack_cell = GridCell::new(4, 4, 0);
    let recipe: Vec<String> = ["bread_slice_1", "ham", "tomato", "bread_slice_2"]
        .into_iter()
        .map(String::from)
        .collect();

    let goal = format!(
        "Ingredients are spread on the table and must be stacked at the cutting \
         board (named `stack`, at {stack_cell}) in exactly this order, bottom to \
         top: {}. Placing an ingredient out of order is not allowed. {}.",
        recipe.join(", "),
        describe_roster(&robots)
    );
    let mut spec = spec_skeleton(TaskId::MakeSandwich, robots, goal);
    spec.named_cells.insert("stack".into(), stack_cell);
    spec.recipe = Some(recipe);

    let mut state = base_state(TaskId::MakeSandwich, &spec.robots);
    state.stack = Some(Vec::new());
    let left = sample_cells(rng, &region(0..=2, 1..=5, 0), 2);
    let right = sample_cells(rng, &region(5..=7, 1..=5, 0), 2);
    state.objects.insert("bread_slice_1".into(), ObjectPlace::Cell(left[0]));
    state.objects.insert("tomato".into(), ObjectPlace::Cell(left[1]));
    state.objects.insert("ham".into(), ObjectPlace::Cell(right[0]));
    state.objects.insert("bread_slice_2".into(), ObjectPlace::Cell(right[1]));
    (spec, state)
}

fn move_rope(rng: &mut ChaCha8Rng) -> (TaskSpec, WorldState) {
    let robots = vec![
        robot("A", (0, 0, 0), (4, 5, 3), (1, 0, 1)),
        robot("B", (3, 0, 0), (7, 5, 3), (6, 0, 2)),
    ];
    let tray: Vec<GridCell> = (2..=5).map(|x| GridCell::new(x, 4, 1)).collect();
    let orientation = GridCell::new(3, 0, 0);
    let rope_length = 3;

    let goal = format!(
        "A rope lies on the table; its endpoints are the objects rope_l and \
         rope_r and they can never be more than {rope_length} cells apart \
         (Manhattan distance). Both endpoints must be placed on the raised tray \
         (cells {}) so that the endpoints line up along the x axis exactly \
         {rope_length} cells apart, e.g. rope_l at {} and rope_r at {}. The \
         endpoints must move together: a step may not move only one of them. \
         {}.",
        tray.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "),
        tray[0],
        tray[3],
        describe_roster(&robots)
    );
    let mut spec = spec_skeleton(TaskId::MoveRope, robots, goal);
    spec.tray_cells = Some(tray);
    spec.tray_orientation = Some(orientation);
    spec.rope_length = Some(rope_length);

    let mut state = base_state(TaskId::MoveRope, &spec.robots);
    let xl = rng.random_range(0..=4);
    let y = rng.random_range(1..=3);
    state
        .objects
        .insert("rope_l".into(), ObjectPlace::Cell(GridCell::new(xl, y, 0)));
    state.objects.insert(
        "rope_r".into(),
        ObjectPlace::Cell(GridCell::new(xl + rope_length, y, 0)),
    );
    (spec, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::object_cell;

    #[test]
    fn load_task_is_deterministic() {
        for task in ALL_TASKS {
            let (s1, w1) = load_task(task, 7).unwrap();
            let (s2, w2) = load_task(task, 7).unwrap();
            assert_eq!(s1, s2);
            assert_eq!(w1, w2);
        }
    }

    #[test]
    fn sort_cubes_has_three_of_everything() {
        let (spec, state) = load_task(TaskId::SortCubes, 7).unwrap();
        assert_eq!(spec.robots.len(), 3);
        assert_eq!(state.objects.len(), 3);
        assert_eq!(spec.pad_for_object.as_ref().unwrap().len(), 3);
    }

    #[test]
    fn arrange_cabinet_starts_closed_with_three_robots() {
        let (spec, state) = load_task(TaskId::ArrangeCabinet, 0).unwrap();
        assert_eq!(state.door_open, Some(false));
        assert_eq!(spec.robots.len(), 3);
        let cup = object_cell(&state, "cup").unwrap();
        assert!(spec.cabinet_region.unwrap().contains(&cup));
    }

    #[test]
    fn rope_endpoints_respect_length_over_seeds() {
        for seed in 0..1000 {
            let (spec, state) = load_task(TaskId::MoveRope, seed).unwrap();
            let l = object_cell(&state, "rope_l").unwrap();
            let r = object_cell(&state, "rope_r").unwrap();
            assert!(l.manhattan(&r) <= spec.rope_length.unwrap(), "seed {seed}");
        }
    }

    #[test]
    fn seeds_shuffle_placements() {
        let (_, w0) = load_task(TaskId::SortCubes, 0).unwrap();
        let distinct = (1..50).any(|s| load_task(TaskId::SortCubes, s).unwrap().1 != w0);
        assert!(distinct, "seeding never changed the initial placement");
    }

    #[test]
    fn special_cells_lie_inside_the_grid() {
        for task in ALL_TASKS {
            let (spec, _) = load_task(task, 0).unwrap();
            for (name, cell) in &spec.named_cells {
                assert!(spec.dims.contains(cell), "{task:?}/{name}");
            }
            for r in &spec.robots {
                assert!(spec.dims.contains(&r.envelope.min_cell));
                assert!(spec.dims.contains(&r.envelope.max_cell));
                assert!(r.envelope.contains(&r.home));
            }
            if let Some(tray) = &spec.tray_cells {
                assert!(tray.iter().all(|c| spec.dims.contains(c)));
            }
        }
    }

    #[test]
    fn unknown_task_string_errors() {
        assert!("warehouse".parse::<TaskId>().is_err());
    }
}
