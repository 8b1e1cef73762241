use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::log::{EndReason, EventKind, EventLog};
use super::maze::Maze;
use super::state::GameState;
use super::{Command, FrameClock};

/// Liveness backstop.
pub const MAX_FRAMES: u64 = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedCommand {
    pub t_ms: f64,
    pub command: Command,
}

impl TimedCommand {
    pub fn new(t_ms: f64, command: Command) -> Self {
        Self { t_ms, command }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RunError {
    #[error("command timestamps must be finite and non-decreasing: {prev} ms then {next} ms")]
    Unordered { prev: f64, next: f64 },
}

/// A game in progress, fed commands incrementally.
///
/// Commands are applied at the start of the frame their timestamp falls in.
/// Closed-loop players push commands while stepping; [`run_game`] pushes the
/// whole stream up front. Both paths produce the same log for the same stream.
#[derive(Clone, Debug)]
pub struct Session<'m> {
    maze: &'m Maze,
    clock: FrameClock,
    state: GameState,
    queue: VecDeque<TimedCommand>,
    last_t: f64,
    log: EventLog,
}

impl<'m> Session<'m> {
    pub fn new(maze: &'m Maze, clock: FrameClock, seed: u64) -> Self {
        Self {
            maze,
            clock,
            state: GameState::new(maze, seed),
            queue: VecDeque::new(),
            last_t: f64::NEG_INFINITY,
            log: EventLog::new(),
        }
    }

    pub fn maze(&self) -> &'m Maze {
        self.maze
    }

    pub fn clock(&self) -> FrameClock {
        self.clock
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn frame(&self) -> u64 {
        self.state.frame
    }

    pub fn is_finished(&self) -> bool {
        !self.state.is_live()
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn into_log(self) -> EventLog {
        self.log
    }

    /// Wall-clock start of the next frame to be played.
    pub fn now_ms(&self) -> f64 {
        self.clock.start_of(self.state.frame)
    }

    pub fn push(&mut self, cmd: TimedCommand) -> Result<(), RunError> {
        if !cmd.t_ms.is_finite() || cmd.t_ms < self.last_t {
            return Err(RunError::Unordered {
                prev: self.last_t,
                next: cmd.t_ms,
            });
        }
        self.last_t = cmd.t_ms;
        self.queue.push_back(cmd);
        Ok(())
    }

    /// Plays one frame. Returns false once the game is over.
    pub fn advance(&mut self) -> bool {
        if self.is_finished() {
            return false;
        }
        let frame = self.state.frame;
        while let Some(cmd) = self.queue.front().copied() {
            if self.clock.frame_of(cmd.t_ms) > frame {
                break;
            }
            self.queue.pop_front();
            self.log
                .push(frame, cmd.t_ms, EventKind::Command { command: cmd.command });
            self.state.submit(cmd.command);
        }
        let t = self.clock.start_of(frame);
        let ev = self.state.step(self.maze, None).expect("session only steps live games");
        if let Some((from, to)) = ev.turn {
            self.log.push(frame, t, EventKind::Turn { from, to });
        }
        self.log.push(
            frame,
            t,
            EventKind::Motion {
                moved: ev.moved,
                steps: ev.steps,
            },
        );
        let mut running = self.state.score - ev.scores.iter().map(|(_, p)| p).sum::<u32>();
        for (item, points) in ev.scores {
            running += points;
            self.log.push(
                frame,
                t,
                EventKind::Score {
                    item,
                    points,
                    score: running,
                },
            );
        }
        if ev.life_lost {
            self.log.push(
                frame,
                t,
                EventKind::Life {
                    lives: self.state.lives,
                },
            );
        }
        if self.state.is_live() && self.state.frame >= MAX_FRAMES {
            self.state.stop(EndReason::FrameCap);
        }
        if let Some(reason) = self.state.end_reason() {
            self.log.push(
                frame,
                t,
                EventKind::End {
                    reason,
                    score: self.state.score,
                    frames: self.state.frame,
                },
            );
            return false;
        }
        true
    }

    pub fn run_to_end(&mut self) {
        while self.advance() {}
    }
}

/// Plays a whole game from a pre-recorded command stream. Commands stamped
/// after the game ends are dropped.
pub fn run_game(maze: &Maze, clock: FrameClock, commands: &[TimedCommand], seed: u64) -> Result<EventLog, RunError> {
    let mut session = Session::new(maze, clock, seed);
    for c in commands {
        session.push(*c)?;
    }
    session.run_to_end();
    Ok(session.into_log())
}
