//! Deterministic frame-stepped Pac-Man simulator.
//!
//! A game is a pure function of (maze, clock, timed commands, seed). The
//! wall-clock to frame conversion happens here and nowhere else: everything
//! downstream of the [`EventLog`] works in frames.

mod clock;
mod log;
mod maze;
mod run;
mod state;

use serde::{Deserialize, Serialize};

pub use clock::{FrameClock, BASE_FRAME_MS};
pub use log::{EndReason, Event, EventKind, EventLog, LogError, ScoreItem};
pub use maze::{
    load_canonical_level, Cell, Maze, MazeError, Tile, FRUIT_POINTS, FRUIT_THRESHOLDS, GHOST_CHAIN_POINTS,
    PELLET_POINTS, POWER_PELLET_POINTS,
};
pub use run::{run_game, RunError, Session, TimedCommand, MAX_FRAMES};
pub use state::{
    FrameEvents, GameState, Ghost, GhostMode, PacMan, StepError, FRIGHTENED_FRAMES, START_LIVES, SUBSTEPS,
};

/// Directional command; also used as a heading.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "UPPERCASE")]
pub enum Command {
    Up,
    Right,
    Down,
    Left,
}

impl Command {
    pub const ALL: [Command; 4] = [Command::Up, Command::Right, Command::Down, Command::Left];
    /// Tie-break order used by ghosts and the player policy.
    pub const PRIORITY: [Command; 4] = [Command::Up, Command::Left, Command::Down, Command::Right];

    /// Unit step in tile coordinates; y grows downwards.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Command::Up => (0, -1),
            Command::Right => (1, 0),
            Command::Down => (0, 1),
            Command::Left => (-1, 0),
        }
    }

    pub fn reverse(self) -> Command {
        match self {
            Command::Up => Command::Down,
            Command::Right => Command::Left,
            Command::Down => Command::Up,
            Command::Left => Command::Right,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Up => "UP",
            Command::Right => "RIGHT",
            Command::Down => "DOWN",
            Command::Left => "LEFT",
        }
    }
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
