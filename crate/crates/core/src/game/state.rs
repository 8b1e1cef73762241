use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::log::{EndReason, ScoreItem};
use super::maze::{
    Cell, Maze, Tile, FRUIT_POINTS, FRUIT_THRESHOLDS, GHOST_CHAIN_POINTS, PELLET_POINTS, POWER_PELLET_POINTS,
};
use super::Command;

/// Sub-tile positions per tile. Pac-Man advances one per frame (7.5 tiles/s at 60 fps).
pub const SUBSTEPS: u8 = 8;
pub const START_LIVES: u8 = 3;
/// Power window length.
pub const FRIGHTENED_FRAMES: u32 = 360;
const FRUIT_FRAMES: u32 = 570;
/// Frames after each life start at which Blinky, Pinky, Inky and Clyde leave the house.
const RELEASE_FRAMES: [u32; 4] = [0, 90, 360, 720];
/// Clyde falls back to his corner when this close (squared tiles).
const CLYDE_SHY_DIST2: i64 = 64;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StepError {
    #[error("cannot step a finished game ({0:?})")]
    StepOnFinishedGame(EndReason),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PacMan {
    pub tile: Tile,
    /// Progress from `tile` towards the next tile along `heading`, in `0..SUBSTEPS`.
    pub offset: u8,
    pub heading: Command,
    pub pending_command: Option<Command>,
    pub moved_this_frame: bool,
}

impl PacMan {
    fn spawn(maze: &Maze) -> Self {
        Self {
            tile: maze.pacman_spawn,
            offset: 0,
            heading: Command::Left,
            pending_command: None,
            moved_this_frame: false,
        }
    }

    pub fn at_center(&self) -> bool {
        self.offset == 0
    }

    /// Moves one substep, applying the pending command where legal.
    /// Returns (moved, arrived at a new tile centre).
    pub fn advance(&mut self, maze: &Maze) -> (bool, bool) {
        if self.at_center() {
            if let Some(p) = self.pending_command {
                if maze.can_move(self.tile, p) {
                    self.heading = p;
                    self.pending_command = None;
                }
            }
            if !maze.can_move(self.tile, self.heading) {
                self.moved_this_frame = false;
                return (false, false);
            }
        } else if self.pending_command == Some(self.heading.reverse()) {
            self.tile = maze.neighbor(self.tile, self.heading);
            self.offset = SUBSTEPS - self.offset;
            self.heading = self.heading.reverse();
            self.pending_command = None;
        }
        self.offset += 1;
        self.moved_this_frame = true;
        if self.offset == SUBSTEPS {
            self.tile = maze.neighbor(self.tile, self.heading);
            self.offset = 0;
            return (true, true);
        }
        (true, false)
    }

    /// Tile the avatar is considered to occupy (nearest tile centre).
    pub fn occupied(&self, maze: &Maze) -> Tile {
        occupied(maze, self.tile, self.offset, self.heading)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GhostMode {
    Chase,
    Frightened,
    Eaten,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ghost {
    pub tile: Tile,
    pub offset: u8,
    pub heading: Command,
    pub mode: GhostMode,
    /// Frames spent in the current mode.
    pub mode_timer: u32,
    /// False while waiting inside the ghost house.
    pub released: bool,
}

impl Ghost {
    fn spawn(tile: Tile) -> Self {
        Self {
            tile,
            offset: 0,
            heading: Command::Left,
            mode: GhostMode::Chase,
            mode_timer: 0,
            released: false,
        }
    }

    pub fn occupied(&self, maze: &Maze) -> Tile {
        occupied(maze, self.tile, self.offset, self.heading)
    }

    /// Roaming and able to kill Pac-Man on contact.
    pub fn is_dangerous(&self) -> bool {
        self.released && self.mode == GhostMode::Chase
    }

    fn set_mode(&mut self, mode: GhostMode) {
        self.mode = mode;
        self.mode_timer = 0;
    }

    fn reverse(&mut self, maze: &Maze) {
        if self.offset > 0 {
            self.tile = maze.neighbor(self.tile, self.heading);
            self.offset = SUBSTEPS - self.offset;
        }
        self.heading = self.heading.reverse();
    }
}

fn occupied(maze: &Maze, tile: Tile, offset: u8, heading: Command) -> Tile {
    if offset * 2 < SUBSTEPS {
        tile
    } else {
        maze.neighbor(tile, heading)
    }
}

/// Everything that happened during one frame, in log order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrameEvents {
    pub moved: bool,
    pub turn: Option<(Command, Command)>,
    /// Set when Pac-Man's step counter reaches a multiple of 10.
    pub steps: Option<u64>,
    pub scores: Vec<(ScoreItem, u32)>,
    pub life_lost: bool,
    pub end: Option<EndReason>,
}

#[derive(Clone, Debug)]
pub struct GameState {
    pub pacman: PacMan,
    pub ghosts: [Ghost; 4],
    /// Per-cell flag: consumable still present.
    pellets: Vec<bool>,
    pub pellets_remaining: u32,
    pub score: u32,
    pub lives: u8,
    pub power_timer: u32,
    pub frame: u64,
    /// Tiles Pac-Man has entered.
    pub steps: u64,
    ghost_chain: usize,
    pellets_eaten: u32,
    fruit_timer: u32,
    life_frame: u32,
    release_frames: [u32; 4],
    finished: Option<EndReason>,
    rng: ChaCha8Rng,
}

impl GameState {
    pub fn new(maze: &Maze, seed: u64) -> Self {
        let pellets = maze.cells().iter().map(|c| c.is_consumable()).collect();
        let mut state = Self {
            pacman: PacMan::spawn(maze),
            ghosts: maze.ghost_spawns.map(Ghost::spawn),
            pellets,
            pellets_remaining: maze.consumable_count(),
            score: 0,
            lives: START_LIVES,
            power_timer: 0,
            frame: 0,
            steps: 0,
            ghost_chain: 0,
            pellets_eaten: 0,
            fruit_timer: 0,
            life_frame: 0,
            release_frames: RELEASE_FRAMES,
            finished: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        state.release_ghosts(maze);
        state
    }

    pub fn is_live(&self) -> bool {
        self.finished.is_none()
    }

    pub fn end_reason(&self) -> Option<EndReason> {
        self.finished
    }

    pub fn has_pellet(&self, maze: &Maze, t: Tile) -> bool {
        maze.in_bounds(t) && self.pellets[maze.index(t)]
    }

    pub fn pellets_eaten(&self) -> u32 {
        self.pellets_eaten
    }

    pub fn fruit_active(&self) -> bool {
        self.fruit_timer > 0
    }

    /// Buffers a command; a newer one replaces any command still pending.
    pub fn submit(&mut self, command: Command) {
        self.pacman.pending_command = Some(command);
    }

    /// Marks the game as ended by the frame cap.
    pub fn stop(&mut self, reason: EndReason) {
        if self.finished.is_none() {
            self.finished = Some(reason);
        }
    }

    /// Moves Pac-Man alone along his current course for up to `frames`
    /// frames, clearing pellets he passes. Ghosts, score and timers are left
    /// untouched; this is a look-ahead aid, not a game step.
    pub fn coast(&mut self, maze: &Maze, frames: u32) {
        for _ in 0..frames {
            let (moved, arrived) = self.pacman.advance(maze);
            if !moved {
                break;
            }
            if arrived {
                let idx = maze.index(self.pacman.tile);
                if self.pellets[idx] {
                    self.pellets[idx] = false;
                    self.pellets_remaining -= 1;
                }
            }
        }
    }

    /// Advances exactly one frame.
    pub fn step(&mut self, maze: &Maze, command: Option<Command>) -> Result<FrameEvents, StepError> {
        if let Some(reason) = self.finished {
            return Err(StepError::StepOnFinishedGame(reason));
        }
        if let Some(c) = command {
            self.submit(c);
        }
        let mut ev = FrameEvents::default();
        self.move_pacman(maze, &mut ev);
        if self.pellets_remaining == 0 {
            self.finished = Some(EndReason::Cleared);
        } else if !self.resolve_collisions(maze, &mut ev) {
            self.move_ghosts(maze, &mut ev);
        }
        if self.finished.is_none() && !ev.life_lost {
            self.tick_timers(maze);
        }
        self.frame += 1;
        ev.end = self.finished;
        Ok(ev)
    }

    fn move_pacman(&mut self, maze: &Maze, ev: &mut FrameEvents) {
        let before = self.pacman.heading;
        let (moved, arrived) = self.pacman.advance(maze);
        ev.moved = moved;
        if !moved {
            return;
        }
        if self.pacman.heading != before {
            ev.turn = Some((before, self.pacman.heading));
        }
        if arrived {
            self.steps += 1;
            if self.steps.is_multiple_of(10) {
                ev.steps = Some(self.steps);
            }
            self.arrive(maze, ev);
        }
    }

    fn arrive(&mut self, maze: &Maze, ev: &mut FrameEvents) {
        let t = self.pacman.tile;
        let idx = maze.index(t);
        if self.pellets[idx] {
            self.pellets[idx] = false;
            self.pellets_remaining -= 1;
            self.pellets_eaten += 1;
            if maze.cell(t) == Cell::PowerPellet {
                self.award(ev, ScoreItem::PowerPellet, POWER_PELLET_POINTS);
                self.energize(maze);
            } else {
                self.award(ev, ScoreItem::Pellet, PELLET_POINTS);
            }
            if FRUIT_THRESHOLDS.contains(&self.pellets_eaten) {
                self.fruit_timer = FRUIT_FRAMES;
            }
        }
        if self.fruit_timer > 0 && t == maze.fruit_tile {
            self.fruit_timer = 0;
            self.award(ev, ScoreItem::Fruit, FRUIT_POINTS);
        }
    }

    fn award(&mut self, ev: &mut FrameEvents, item: ScoreItem, points: u32) {
        self.score += points;
        ev.scores.push((item, points));
    }

    fn energize(&mut self, maze: &Maze) {
        self.power_timer = FRIGHTENED_FRAMES;
        self.ghost_chain = 0;
        for g in self.ghosts.iter_mut().filter(|g| g.released) {
            match g.mode {
                GhostMode::Chase => {
                    g.set_mode(GhostMode::Frightened);
                    g.reverse(maze);
                }
                GhostMode::Frightened => g.mode_timer = 0,
                GhostMode::Eaten => {}
            }
        }
    }

    /// Returns true if Pac-Man died this frame.
    fn resolve_collisions(&mut self, maze: &Maze, ev: &mut FrameEvents) -> bool {
        let p = self.pacman.occupied(maze);
        for i in 0..self.ghosts.len() {
            let g = &self.ghosts[i];
            if !g.released || g.occupied(maze) != p {
                continue;
            }
            match g.mode {
                GhostMode::Frightened => {
                    let points = GHOST_CHAIN_POINTS[self.ghost_chain.min(3)];
                    self.ghost_chain += 1;
                    self.ghosts[i].set_mode(GhostMode::Eaten);
                    self.award(ev, ScoreItem::Ghost, points);
                }
                GhostMode::Chase => {
                    self.lose_life(maze, ev);
                    return true;
                }
                GhostMode::Eaten => {}
            }
        }
        false
    }

    fn lose_life(&mut self, maze: &Maze, ev: &mut FrameEvents) {
        self.lives -= 1;
        ev.life_lost = true;
        if self.lives == 0 {
            self.finished = Some(EndReason::NoLives);
            return;
        }
        self.pacman = PacMan::spawn(maze);
        self.ghosts = maze.ghost_spawns.map(Ghost::spawn);
        self.power_timer = 0;
        self.fruit_timer = 0;
        self.life_frame = 0;
        self.release_ghosts(maze);
    }

    fn move_ghosts(&mut self, maze: &Maze, ev: &mut FrameEvents) {
        let frame = self.frame;
        for i in 0..self.ghosts.len() {
            if !self.ghosts[i].released {
                continue;
            }
            let substeps = match self.ghosts[i].mode {
                GhostMode::Chase => u8::from(frame % 16 != 15),
                GhostMode::Frightened => u8::from(frame.is_multiple_of(2)),
                GhostMode::Eaten => 2,
            };
            for _ in 0..substeps {
                let target = self.ghost_target(maze, i);
                self.ghost_substep(maze, i, target);
                let g = &mut self.ghosts[i];
                if g.mode == GhostMode::Eaten && g.offset == 0 && g.tile == maze.house_exit {
                    g.set_mode(GhostMode::Chase);
                    break;
                }
            }
            if self.resolve_collisions(maze, ev) {
                return;
            }
        }
    }

    fn ghost_target(&self, maze: &Maze, i: usize) -> Tile {
        let g = &self.ghosts[i];
        if g.mode == GhostMode::Eaten {
            return maze.house_exit;
        }
        let pm = &self.pacman;
        let p = pm.occupied(maze);
        match i {
            0 => p,
            1 => p.offset(pm.heading, 4),
            2 => {
                let pivot = p.offset(pm.heading, 2);
                let b = self.ghosts[0].occupied(maze);
                Tile::new(2 * pivot.x - b.x, 2 * pivot.y - b.y)
            }
            _ => {
                if g.occupied(maze).dist2(p) > CLYDE_SHY_DIST2 {
                    p
                } else {
                    Tile::new(0, maze.height() - 1)
                }
            }
        }
    }

    fn ghost_substep(&mut self, maze: &Maze, i: usize, target: Tile) {
        if self.ghosts[i].offset == 0 {
            let g = &self.ghosts[i];
            let mut options = [Command::Up; 4];
            let mut n = 0;
            for d in Command::PRIORITY {
                if d != g.heading.reverse() && maze.can_move(g.tile, d) {
                    options[n] = d;
                    n += 1;
                }
            }
            let heading = if n == 0 {
                if !maze.can_move(g.tile, g.heading.reverse()) {
                    return;
                }
                g.heading.reverse()
            } else if g.mode == GhostMode::Frightened {
                options[self.rng.random_range(0..n)]
            } else {
                // min_by_key keeps the first of equal keys: priority order.
                *options[..n]
                    .iter()
                    .min_by_key(|d| maze.neighbor(g.tile, **d).dist2(target))
                    .unwrap_or(&g.heading)
            };
            self.ghosts[i].heading = heading;
        }
        let g = &mut self.ghosts[i];
        g.offset += 1;
        if g.offset == SUBSTEPS {
            g.tile = maze.neighbor(g.tile, g.heading);
            g.offset = 0;
        }
    }

    fn tick_timers(&mut self, maze: &Maze) {
        if self.power_timer > 0 {
            self.power_timer -= 1;
            if self.power_timer == 0 {
                for g in self.ghosts.iter_mut() {
                    if g.mode == GhostMode::Frightened {
                        g.set_mode(GhostMode::Chase);
                    }
                }
            }
        }
        if self.fruit_timer > 0 {
            self.fruit_timer -= 1;
        }
        for g in self.ghosts.iter_mut() {
            g.mode_timer = g.mode_timer.saturating_add(1);
        }
        self.life_frame = self.life_frame.saturating_add(1);
        self.release_ghosts(maze);
    }

    /// Keeps every ghost in the house (test scenarios).
    #[cfg(test)]
    pub(crate) fn hold_ghosts(&mut self) {
        self.release_frames = [u32::MAX; 4];
        for g in self.ghosts.iter_mut() {
            g.released = false;
        }
    }

    fn release_ghosts(&mut self, maze: &Maze) {
        for (g, &at) in self.ghosts.iter_mut().zip(self.release_frames.iter()) {
            if !g.released && self.life_frame >= at {
                g.released = true;
                g.tile = maze.house_exit;
                g.offset = 0;
                g.heading = Command::Left;
                g.set_mode(GhostMode::Chase);
            }
        }
    }
}
