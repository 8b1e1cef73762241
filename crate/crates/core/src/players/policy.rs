//! Greedy pellet-seeking policy shared by all synthetic players.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::game::{Command, GameState, GhostMode, Maze, Tile, SUBSTEPS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Tiles within this walking distance of a dangerous ghost are avoided.
    pub ghost_fear_radius: u32,
    /// Frames between re-decisions.
    pub replan_period: u32,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            ghost_fear_radius: 3,
            replan_period: 2,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("no legal move from tile ({0}, {1})")]
    NoLegalMove(i32, i32),
    #[error("replan period must be at least one frame")]
    ReplanPeriod,
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.replan_period == 0 {
            return Err(PolicyError::ReplanPeriod);
        }
        Ok(())
    }
}

/// Multi-source BFS over walkable tiles, skipping `blocked` ones.
fn bfs(maze: &Maze, sources: &[Tile], blocked: Option<&[bool]>) -> Vec<Option<u32>> {
    let mut dist = vec![None; maze.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        let i = maze.index(s);
        if !maze.cell(s).is_walkable() || blocked.is_some_and(|b| b[i]) || dist[i].is_some() {
            continue;
        }
        dist[i] = Some(0);
        queue.push_back(s);
    }
    while let Some(t) = queue.pop_front() {
        let d = dist[maze.index(t)].unwrap_or(0);
        for dir in Command::PRIORITY {
            if !maze.can_move(t, dir) {
                continue;
            }
            let n = maze.neighbor(t, dir);
            let i = maze.index(n);
            if dist[i].is_none() && !blocked.is_some_and(|b| b[i]) {
                dist[i] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

/// One way of carrying out a command: the tiles its first move commits to.
struct Candidate {
    command: Command,
    /// Tile passed through before `next`.
    via: Option<Tile>,
    next: Tile,
    /// Substeps from the current position to `via` (or to `next` when direct).
    to_via: u32,
}

impl Candidate {
    fn to_next(&self) -> u32 {
        match self.via {
            Some(_) => self.to_via + u32::from(SUBSTEPS),
            None => self.to_via,
        }
    }
}

fn candidates(state: &GameState, maze: &Maze) -> Vec<Candidate> {
    let pm = &state.pacman;
    let mut out = Vec::with_capacity(6);
    if pm.at_center() {
        for c in Command::PRIORITY {
            if maze.can_move(pm.tile, c) {
                out.push(Candidate {
                    command: c,
                    via: None,
                    next: maze.neighbor(pm.tile, c),
                    to_via: u32::from(SUBSTEPS),
                });
            }
        }
        return out;
    }
    // Between `tile` and `ahead`. A turn takes effect on arrival at `ahead`;
    // reversing returns to `tile` and carries on through one of its other exits.
    let ahead = maze.neighbor(pm.tile, pm.heading);
    let back = pm.heading.reverse();
    for c in Command::PRIORITY {
        if c == back {
            let mut exits = Command::PRIORITY
                .into_iter()
                .filter(|e| *e != pm.heading && maze.can_move(pm.tile, *e))
                .peekable();
            if exits.peek().is_none() {
                out.push(Candidate {
                    command: c,
                    via: None,
                    next: pm.tile,
                    to_via: u32::from(pm.offset),
                });
            }
            for e in exits {
                out.push(Candidate {
                    command: c,
                    via: Some(pm.tile),
                    next: maze.neighbor(pm.tile, e),
                    to_via: u32::from(pm.offset),
                });
            }
        } else if maze.can_move(ahead, c) {
            out.push(Candidate {
                command: c,
                via: Some(ahead),
                next: maze.neighbor(ahead, c),
                to_via: u32::from(SUBSTEPS - pm.offset),
            });
        }
    }
    out
}

/// Chooses the command that best serves the greedy objective from the
/// current position.
///
/// Candidates are ranked by (safe, shortest distance to a target, distance
/// from the nearest dangerous ghost); remaining ties go to the earlier entry
/// of UP, LEFT, DOWN, RIGHT. Targets are the remaining pellets, or the
/// frightened ghosts while a power window is running and one of them is
/// closer than every pellet.
pub fn policy_decide(state: &GameState, maze: &Maze, config: &PolicyConfig) -> Result<Command, PolicyError> {
    let pm = &state.pacman;
    let cands = candidates(state, maze);
    if cands.is_empty() {
        return Err(PolicyError::NoLegalMove(pm.tile.x, pm.tile.y));
    }

    let threats: Vec<Tile> = state
        .ghosts
        .iter()
        .filter(|g| g.is_dangerous())
        .map(|g| g.occupied(maze))
        .collect();
    let ghost_dist = bfs(maze, &threats, None);
    let danger: Vec<bool> = ghost_dist
        .iter()
        .map(|d| d.is_some_and(|d| d <= config.ghost_fear_radius))
        .collect();

    let mut targets = pellet_tiles(state, maze);
    if state.power_timer > 0 {
        let prey: Vec<Tile> = state
            .ghosts
            .iter()
            .filter(|g| g.released && g.mode == GhostMode::Frightened)
            .map(|g| g.occupied(maze))
            .collect();
        if !prey.is_empty() {
            let from_me = maze.distances_from(pm.occupied(maze));
            let nearest = |ts: &[Tile]| ts.iter().filter_map(|t| from_me[maze.index(*t)]).min();
            if let Some(p) = nearest(&prey) {
                if nearest(&targets).is_none_or(|q| p < q) {
                    targets = prey;
                }
            }
        }
    }
    let target_dist = bfs(maze, &targets, Some(&danger));

    let key = |c: &Candidate| {
        let tiles = c.via.iter().chain(std::iter::once(&c.next));
        let safe = tiles.clone().all(|t| !danger[maze.index(*t)]);
        // a target passed on the way counts as reached
        let step = u32::from(SUBSTEPS);
        let cost = match c.via.and_then(|v| target_dist[maze.index(v)]) {
            Some(0) => Some(c.to_via),
            _ => target_dist[maze.index(c.next)].map(|d| c.to_next() + step * d),
        };
        let cost = cost.map_or(i64::MIN, |d| -i64::from(d));
        let clearance = ghost_dist[maze.index(c.next)].map_or(i64::MAX, i64::from);
        (safe, cost, clearance)
    };
    let mut best = &cands[0];
    let mut best_key = key(best);
    for c in &cands[1..] {
        let k = key(c);
        if k > best_key {
            best = c;
            best_key = k;
        }
    }
    Ok(best.command)
}

fn pellet_tiles(state: &GameState, maze: &Maze) -> Vec<Tile> {
    (0..maze.len())
        .map(|i| maze.tile_at(i))
        .filter(|t| state.has_pellet(maze, *t))
        .collect()
}
