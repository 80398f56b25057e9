//! Grammar, parser, and canonical renderer for the structured action block
//! agents emit at the end of a discussion.
//!
//! One action per line:
//!
//! ```text
//! NAME <agent> ACTION <VERB> [<object>] [TO <target>] [PATH (x,y,z)->(x,y,z)->...]
//! ```
//!
//! The block follows a line consisting of the single word `EXECUTE` inside an
//! agent message. Keywords and verbs are case-insensitive; agent and object
//! names are exact. Consecutive path cells must be identical or 6-adjacent
//! (repeating a cell holds position for one micro-step). See
//! `docs/grammar.md` for the full reference.

use serde::{Deserialize, Serialize};

use crate::world::{GridCell, GridDims};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verb {
    Pick,
    Place,
    Move,
    Sweep,
    Dump,
    Open,
    Wait,
}

impl Verb {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verb::Pick => "PICK",
            Verb::Place => "PLACE",
            Verb::Move => "MOVE",
            Verb::Sweep => "SWEEP",
            Verb::Dump => "DUMP",
            Verb::Open => "OPEN",
            Verb::Wait => "WAIT",
        }
    }

    fn parse(token: &str) -> Option<Verb> {
        match token.to_ascii_uppercase().as_str() {
            "PICK" => Some(Verb::Pick),
            "PLACE" => Some(Verb::Place),
            "MOVE" => Some(Verb::Move),
            "SWEEP" => Some(Verb::Sweep),
            "DUMP" => Some(Verb::Dump),
            "OPEN" => Some(Verb::Open),
            "WAIT" => Some(Verb::Wait),
            _ => None,
        }
    }
}

impl std::fmt::Display for Verb {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Target slot of an action: a named landmark or a literal cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TargetRef {
    Name(String),
    Cell(GridCell),
}

impl std::fmt::Display for TargetRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TargetRef::Name(n) => f.write_str(n),
            TargetRef::Cell(c) => write!(f, "{c}"),
        }
    }
}

/// One agent's action for one environment step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentAction {
    pub agent: String,
    pub verb: Verb,
    pub object: Option<String>,
    pub target: Option<TargetRef>,
    /// Waypoints for this step; empty for WAIT.
    pub path: Vec<GridCell>,
}

impl AgentAction {
    pub fn wait(agent: &str) -> Self {
        AgentAction {
            agent: agent.to_string(),
            verb: Verb::Wait,
            object: None,
            target: None,
            path: Vec::new(),
        }
    }

    /// Cell occupied at micro-step `i` given the agent's pre-step effector:
    /// waypoints are consumed in lockstep and the last cell is held once the
    /// path is exhausted. A WAIT holds the effector cell throughout.
    pub fn position_at(&self, effector: GridCell, i: usize) -> GridCell {
        if self.path.is_empty() {
            effector
        } else {
            self.path[i.min(self.path.len() - 1)]
        }
    }

    /// Final cell after the step.
    pub fn final_cell(&self, effector: GridCell) -> GridCell {
        self.position_at(effector, usize::MAX)
    }

    /// Number of micro-steps this action occupies (≥ 1).
    pub fn micro_len(&self) -> usize {
        self.path.len().max(1)
    }
}

/// One validated-or-proposed joint action: exactly one action per roster
/// agent, stored in roster order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionPlan {
    pub actions: Vec<AgentAction>,
    /// The block text this plan was parsed from ("" for built plans).
    pub raw_text: String,
}

impl ActionPlan {
    /// Build a plan from per-agent actions, ordering them by `roster`.
    /// Panics if the actions do not cover the roster exactly once each.
    pub fn from_actions(mut actions: Vec<AgentAction>, roster: &[String]) -> Self {
        assert_eq!(actions.len(), roster.len(), "one action per roster agent");
        for agent in roster {
            assert_eq!(
                actions.iter().filter(|a| &a.agent == agent).count(),
                1,
                "agent {agent} must have exactly one action"
            );
        }
        actions.sort_by_key(|a| {
            roster
                .iter()
                .position(|r| *r == a.agent)
                .expect("action agent must be in the roster")
        });
        ActionPlan {
            actions,
            raw_text: String::new(),
        }
    }

    pub fn action_for(&self, agent: &str) -> Option<&AgentAction> {
        self.actions.iter().find(|a| a.agent == agent)
    }

    /// Longest micro-step horizon across agents (≥ 1).
    pub fn micro_len(&self) -> usize {
        self.actions.iter().map(|a| a.micro_len()).max().unwrap_or(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    UnknownAgent,
    MissingAgent,
    DuplicateAgent,
    UnknownVerb,
    MalformedWaypoint,
    OutOfBounds,
    NonAdjacentPath,
    MissingArgument,
}

/// A plan rejection with a 1-based position inside the offending input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
    pub message: String,
    pub offending_fragment: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "line {}, column {}: {} (`{}`)",
            self.line, self.column, self.message, self.offending_fragment
        )
    }
}

impl std::error::Error for ParseError {}

/// Text after the last line equal to `EXECUTE` (surrounding whitespace
/// ignored), or `None` when the marker is absent.
pub fn extract_execute_block(message_text: &str) -> Option<String> {
    let mut block_start = None;
    let mut offset = 0;
    for line in message_text.split_inclusive('\n') {
        let end = offset + line.len();
        if line.trim() == "EXECUTE" {
            block_start = Some(end);
        }
        offset = end;
    }
    // A trailing line without '\n' is covered: split_inclusive yields it too.
    block_start.map(|start| message_text[start..].to_string())
}

struct Cursor<'a> {
    line_no: usize,
    tokens: Vec<(usize, &'a str)>,
    next: usize,
    line_len: usize,
}

impl<'a> Cursor<'a> {
    fn new(line_no: usize, line: &'a str) -> Self {
        let mut tokens = Vec::new();
        let mut col = 0usize;
        let mut start = None;
        for (ix, ch) in line.char_indices() {
            col += 1;
            if ch.is_whitespace() {
                if let Some((s_col, s_ix)) = start.take() {
                    tokens.push((s_col, &line[s_ix..ix]));
                }
            } else if start.is_none() {
                start = Some((col, ix));
            }
        }
        if let Some((s_col, s_ix)) = start {
            tokens.push((s_col, &line[s_ix..]));
        }
        Cursor {
            line_no,
            tokens,
            next: 0,
            line_len: line.chars().count(),
        }
    }

    fn peek(&self) -> Option<(usize, &'a str)> {
        self.tokens.get(self.next).copied()
    }

    fn take(&mut self) -> Option<(usize, &'a str)> {
        let t = self.peek();
        if t.is_some() {
            self.next += 1;
        }
        t
    }

    fn end_column(&self) -> usize {
        self.line_len.max(1)
    }

    fn error(
        &self,
        column: usize,
        kind: ParseErrorKind,
        message: impl Into<String>,
        fragment: &str,
    ) -> ParseError {
        ParseError {
            line: self.line_no,
            column,
            kind,
            message: message.into(),
            offending_fragment: fragment.to_string(),
        }
    }
}

fn parse_cell(text: &str) -> Option<GridCell> {
    let inner = text.strip_prefix('(')?.strip_suffix(')')?;
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != 3 {
        return None;
    }
    let mut nums = [0i32; 3];
    for (slot, part) in nums.iter_mut().zip(&parts) {
        *slot = part.trim().parse::<i32>().ok()?;
    }
    Some(GridCell::new(nums[0], nums[1], nums[2]))
}

fn looks_like_cell(token: &str) -> bool {
    token.starts_with('(')
}

/// Parse the waypoint list that follows the PATH keyword. `base_col` is the
/// 1-based column of the first character of `text` within its line.
fn parse_path(
    cur: &Cursor<'_>,
    text: &str,
    base_col: usize,
    dims: &GridDims,
) -> Result<Vec<GridCell>, ParseError> {
    let mut cells = Vec::new();
    let mut col = base_col;
    for segment in text.split("->") {
        let leading_ws = segment.chars().take_while(|c| c.is_whitespace()).count();
        let seg_col = col + leading_ws;
        let trimmed = segment.trim();
        if trimmed.is_empty() {
            return Err(cur.error(
                seg_col,
                ParseErrorKind::MalformedWaypoint,
                "empty waypoint in path",
                segment,
            ));
        }
        let cell = parse_cell(trimmed).ok_or_else(|| {
            cur.error(
                seg_col,
                ParseErrorKind::MalformedWaypoint,
                "waypoints must look like (x,y,z) with integer coordinates",
                trimmed,
            )
        })?;
        if !dims.contains(&cell) {
            return Err(cur.error(
                seg_col,
                ParseErrorKind::OutOfBounds,
                format!(
                    "waypoint {cell} is outside the {}x{}x{} grid",
                    dims.x, dims.y, dims.z
                ),
                trimmed,
            ));
        }
        if let Some(prev) = cells.last() {
            if !cell.is_step_from(prev) {
                return Err(cur.error(
                    seg_col,
                    ParseErrorKind::NonAdjacentPath,
                    format!("waypoint {cell} is not adjacent to the previous waypoint {prev}"),
                    trimmed,
                ));
            }
        }
        cells.push(cell);
        col += segment.chars().count() + 2; // past this segment and the "->"
    }
    Ok(cells)
}

fn parse_line(
    line_no: usize,
    line: &str,
    roster: &[String],
    dims: &GridDims,
) -> Result<AgentAction, ParseError> {
    let mut cur = Cursor::new(line_no, line);

    let (kw_col, kw) = cur.take().expect("caller skips blank lines");
    if !kw.eq_ignore_ascii_case("NAME") {
        return Err(cur.error(
            kw_col,
            ParseErrorKind::MissingArgument,
            "expected the NAME keyword at the start of an action line",
            kw,
        ));
    }

    let (agent_col, agent) = cur.take().ok_or_else(|| {
        cur.error(
            cur.end_column(),
            ParseErrorKind::MissingArgument,
            "expected an agent name after NAME",
            "",
        )
    })?;
    if !roster.iter().any(|r| r == agent) {
        return Err(cur.error(
            agent_col,
            ParseErrorKind::UnknownAgent,
            format!(
                "agent `{agent}` is not in the roster ({})",
                roster.join(", ")
            ),
            agent,
        ));
    }

    match cur.take() {
        Some((_, t)) if t.eq_ignore_ascii_case("ACTION") => {}
        Some((col, t)) => {
            return Err(cur.error(
                col,
                ParseErrorKind::MissingArgument,
                "expected the ACTION keyword after the agent name",
                t,
            ))
        }
        None => {
            return Err(cur.error(
                cur.end_column(),
                ParseErrorKind::MissingArgument,
                "expected the ACTION keyword after the agent name",
                "",
            ))
        }
    }

    let (verb_col, verb_tok) = cur.take().ok_or_else(|| {
        cur.error(
            cur.end_column(),
            ParseErrorKind::MissingArgument,
            "expected a verb after ACTION",
            "",
        )
    })?;
    let verb = Verb::parse(verb_tok).ok_or_else(|| {
        cur.error(
            verb_col,
            ParseErrorKind::UnknownVerb,
            format!("`{verb_tok}` is not one of PICK, PLACE, MOVE, SWEEP, DUMP, OPEN, WAIT"),
            verb_tok,
        )
    })?;

    let mut object: Option<String> = None;
    let mut target: Option<TargetRef> = None;
    let mut path: Vec<GridCell> = Vec::new();

    // Optional object: a bare token before any TO/PATH keyword.
    if let Some((col, tok)) = cur.peek() {
        if !tok.eq_ignore_ascii_case("TO") && !tok.eq_ignore_ascii_case("PATH") {
            if looks_like_cell(tok) {
                return Err(cur.error(
                    col,
                    ParseErrorKind::MissingArgument,
                    "object slot cannot be a cell; use TO <target> or PATH",
                    tok,
                ));
            }
            object = Some(tok.to_string());
            cur.take();
        }
    }

    if let Some((_, tok)) = cur.peek() {
        if tok.eq_ignore_ascii_case("TO") {
            cur.take();
            let (t_col, t_tok) = cur.take().ok_or_else(|| {
                cur.error(
                    cur.end_column(),
                    ParseErrorKind::MissingArgument,
                    "expected a target after TO",
                    "",
                )
            })?;
            if looks_like_cell(t_tok) {
                let cell = parse_cell(t_tok).ok_or_else(|| {
                    cur.error(
                        t_col,
                        ParseErrorKind::MalformedWaypoint,
                        "target cell must look like (x,y,z)",
                        t_tok,
                    )
                })?;
                if !dims.contains(&cell) {
                    return Err(cur.error(
                        t_col,
                        ParseErrorKind::OutOfBounds,
                        format!("target cell {cell} is outside the grid"),
                        t_tok,
                    ));
                }
                target = Some(TargetRef::Cell(cell));
            } else {
                target = Some(TargetRef::Name(t_tok.to_string()));
            }
        }
    }

    if let Some((_, tok)) = cur.peek() {
        if tok.eq_ignore_ascii_case("PATH") {
            let (path_col, path_kw) = cur.take().unwrap();
            // The waypoint list is the remainder of the line; it may contain
            // spaces around the "->" separators.
            let rest_col = match cur.peek() {
                Some((col, _)) => col,
                None => {
                    return Err(cur.error(
                        path_col,
                        ParseErrorKind::MissingArgument,
                        "expected waypoints after PATH",
                        path_kw,
                    ))
                }
            };
            let rest: String = line.chars().skip(rest_col - 1).collect();
            path = parse_path(&cur, &rest, rest_col, dims)?;
            while cur.take().is_some() {}
        }
    }

    if let Some((col, tok)) = cur.peek() {
        return Err(cur.error(
            col,
            ParseErrorKind::MissingArgument,
            "unexpected trailing input after the action",
            tok,
        ));
    }

    // Per-verb argument shape.
    let arity_err = |msg: &str| {
        Err(ParseError {
            line: line_no,
            column: verb_col,
            kind: ParseErrorKind::MissingArgument,
            message: msg.to_string(),
            offending_fragment: verb_tok.to_string(),
        })
    };
    match verb {
        Verb::Pick => {
            if object.is_none() {
                return arity_err("PICK requires an object");
            }
            if target.is_some() {
                return arity_err("PICK takes no TO target");
            }
            if path.is_empty() {
                return arity_err("PICK requires a PATH ending at the object");
            }
        }
        Verb::Place => {
            if object.is_none() {
                return arity_err("PLACE requires an object");
            }
            if target.is_none() {
                return arity_err("PLACE requires a TO target");
            }
            if path.is_empty() {
                return arity_err("PLACE requires a PATH ending at the target");
            }
        }
        Verb::Move => {
            if object.is_some() || target.is_some() {
                return arity_err("MOVE takes only a PATH");
            }
            if path.is_empty() {
                return arity_err("MOVE requires a PATH");
            }
        }
        Verb::Sweep => {
            if object.is_none() {
                return arity_err("SWEEP requires an object");
            }
            if target.is_some() {
                return arity_err("SWEEP takes no TO target");
            }
            if path.is_empty() {
                return arity_err("SWEEP requires a PATH");
            }
        }
        Verb::Dump => {
            if object.is_some() || target.is_some() {
                return arity_err("DUMP takes only a PATH");
            }
            if path.is_empty() {
                return arity_err("DUMP requires a PATH ending at the bin");
            }
        }
        Verb::Open => {
            if object.is_some() {
                return arity_err("OPEN takes no object");
            }
            if target.is_none() {
                return arity_err("OPEN requires TO <handle>");
            }
            if path.is_empty() {
                return arity_err("OPEN requires a PATH ending at the handle");
            }
        }
        Verb::Wait => {
            if object.is_some() || target.is_some() || !path.is_empty() {
                return arity_err("WAIT takes no arguments");
            }
        }
    }

    Ok(AgentAction {
        agent: agent.to_string(),
        verb,
        object,
        target,
        path,
    })
}

/// Parse an EXECUTE block into an [`ActionPlan`]. Fails fast with a
/// positioned [`ParseError`]; never panics on malformed input.
pub fn parse_plan(
    block_text: &str,
    roster: &[String],
    dims: &GridDims,
) -> Result<ActionPlan, ParseError> {
    assert!(!roster.is_empty(), "roster must be non-empty");
    let mut actions: Vec<AgentAction> = Vec::new();
    let mut last_nonempty_line = 1usize;
    for (ix, line) in block_text.lines().enumerate() {
        let line_no = ix + 1;
        if line.trim().is_empty() {
            continue;
        }
        last_nonempty_line = line_no;
        let action = parse_line(line_no, line, roster, dims)?;
        if actions.iter().any(|a| a.agent == action.agent) {
            let col = Cursor::new(line_no, line)
                .tokens
                .get(1)
                .map(|(c, _)| *c)
                .unwrap_or(1);
            return Err(ParseError {
                line: line_no,
                column: col,
                kind: ParseErrorKind::DuplicateAgent,
                message: format!("agent `{}` already has an action", action.agent),
                offending_fragment: action.agent.clone(),
            });
        }
        actions.push(action);
    }
    for agent in roster {
        if !actions.iter().any(|a| &a.agent == agent) {
            return Err(ParseError {
                line: last_nonempty_line,
                column: 1,
                kind: ParseErrorKind::MissingAgent,
                message: format!("no action line for agent `{agent}`"),
                offending_fragment: agent.clone(),
            });
        }
    }
    let mut plan = ActionPlan::from_actions(actions, roster);
    plan.raw_text = block_text.to_string();
    Ok(plan)
}

/// Canonical text for a plan: agents in stored (roster) order, single
/// spaces, uppercase verbs. `parse_plan(render_plan(p)) == p` up to
/// `raw_text`.
pub fn render_plan(plan: &ActionPlan) -> String {
    let mut out = String::new();
    for action in &plan.actions {
        out.push_str(&format!("NAME {} ACTION {}", action.agent, action.verb));
        if let Some(obj) = &action.object {
            out.push_str(&format!(" {obj}"));
        }
        if let Some(target) = &action.target {
            out.push_str(&format!(" TO {target}"));
        }
        if !action.path.is_empty() {
            let cells: Vec<String> = action.path.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!(" PATH {}", cells.join("->")));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn roster(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    const DIMS: GridDims = GridDims::new(8, 6, 4);

    #[test]
    fn extract_absent_marker() {
        assert_eq!(extract_execute_block("let's discuss the plan"), None);
    }

    #[test]
    fn extract_simple_block() {
        assert_eq!(
            extract_execute_block("ok\nEXECUTE\nNAME A ACTION WAIT\n"),
            Some("NAME A ACTION WAIT\n".to_string())
        );
    }

    #[test]
    fn extract_takes_last_marker() {
        let text = "EXECUTE\nold plan\nEXECUTE\nnew plan";
        assert_eq!(extract_execute_block(text), Some("new plan".to_string()));
    }

    #[test]
    fn minimal_wait_plan_parses() {
        let plan = parse_plan("NAME A ACTION WAIT\nNAME B ACTION WAIT", &roster(&["A", "B"]), &DIMS)
            .unwrap();
        assert_eq!(plan.actions.len(), 2);
        assert!(plan.actions.iter().all(|a| a.verb == Verb::Wait));
    }

    #[test]
    fn missing_agent_is_reported() {
        let err = parse_plan(
            "NAME A ACTION PICK cube_red PATH (1,1,1)->(1,2,1)",
            &roster(&["A", "B"]),
            &DIMS,
        )
        .unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::MissingAgent);
    }

    #[test]
    fn duplicate_agent_is_reported() {
        let err = parse_plan(
            "NAME A ACTION WAIT\nNAME A ACTION WAIT\nNAME B ACTION WAIT",
            &roster(&["A", "B"]),
            &DIMS,
        )
        .unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::DuplicateAgent);
        assert_eq!(err.line, 2);
    }

    #[test]
    fn unknown_verb_and_agent() {
        let err = parse_plan("NAME A ACTION FLY", &roster(&["A"]), &DIMS).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownVerb);
        let err = parse_plan("NAME Z ACTION WAIT", &roster(&["A"]), &DIMS).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownAgent);
    }

    #[test]
    fn waypoint_bounds_and_adjacency() {
        let err = parse_plan(
            "NAME A ACTION MOVE PATH (9,0,0)",
            &roster(&["A"]),
            &DIMS,
        )
        .unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::OutOfBounds);
        let err = parse_plan(
            "NAME A ACTION MOVE PATH (1,1,1)->(3,1,1)",
            &roster(&["A"]),
            &DIMS,
        )
        .unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NonAdjacentPath);
        assert_eq!(err.line, 1);
        assert!(err.column > 0);
    }

    #[test]
    fn repeated_cell_in_path_is_allowed() {
        let plan = parse_plan(
            "NAME A ACTION MOVE PATH (1,1,1)->(1,1,1)->(1,2,1)",
            &roster(&["A"]),
            &DIMS,
        )
        .unwrap();
        assert_eq!(plan.actions[0].path.len(), 3);
    }

    #[test]
    fn malformed_waypoint_positions_point_into_input() {
        let text = "NAME A ACTION MOVE PATH (1,1,1)->(x,2,1)";
        let err = parse_plan(text, &roster(&["A"]), &DIMS).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::MalformedWaypoint);
        let line: Vec<char> = text.chars().collect();
        assert_eq!(line[err.column - 1], '(');
        assert_eq!(err.offending_fragment, "(x,2,1)");
    }

    #[test]
    fn missing_arguments_per_verb() {
        for bad in [
            "NAME A ACTION PICK PATH (1,1,1)",
            "NAME A ACTION PLACE cube_red PATH (1,1,1)",
            "NAME A ACTION OPEN PATH (1,1,1)",
            "NAME A ACTION MOVE",
            "NAME A ACTION WAIT PATH (1,1,1)",
        ] {
            let err = parse_plan(bad, &roster(&["A"]), &DIMS).unwrap_err();
            assert_eq!(err.kind, ParseErrorKind::MissingArgument, "{bad}");
        }
    }

    #[test]
    fn canonical_rendering_collapses_whitespace() {
        let messy = "NAME   A   ACTION   pick   cube_red   PATH  (1,1,1) -> (1,2,1)";
        let plan = parse_plan(messy, &roster(&["A"]), &DIMS).unwrap();
        assert_eq!(
            render_plan(&plan),
            "NAME A ACTION PICK cube_red PATH (1,1,1)->(1,2,1)\n"
        );
        let reparsed = parse_plan(&render_plan(&plan), &roster(&["A"]), &DIMS).unwrap();
        assert_eq!(reparsed.actions, plan.actions);
    }

    #[test]
    fn wait_only_plan_renders_one_line_per_agent() {
        let names = roster(&["A", "B", "C"]);
        let plan = ActionPlan::from_actions(
            names.iter().map(|n| AgentAction::wait(n)).collect(),
            &names,
        );
        assert_eq!(render_plan(&plan).lines().count(), 3);
    }

    proptest! {
        #[test]
        fn extract_result_never_contains_marker_line(
            before in ".{0,40}",
            after in "[^\\r]{0,40}",
        ) {
            let text = format!("{before}\nEXECUTE\n{after}");
            let block = extract_execute_block(&text).unwrap();
            prop_assert!(!block.lines().any(|l| l.trim() == "EXECUTE"));
        }

        #[test]
        fn parser_never_panics_on_ascii_soup(input in "[ -~\\n]{0,120}") {
            let _ = parse_plan(&input, &roster(&["A", "B"]), &DIMS);
        }
    }
}
