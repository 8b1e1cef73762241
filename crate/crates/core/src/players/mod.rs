//! Synthetic players standing in for human participants.
//!
//! Both players run the same closed loop: every `replan_period` frames, if
//! no command is still on its way, they look ahead to Pac-Man's next decision
//! point (junction, corner or dead end), ask [`policy_decide`] what to do
//! there, and issue the decision if it differs from what Pac-Man is already
//! set to do. The
//! keyboard player's command lands after a sampled reaction latency; the
//! reaching player's hand first waits out its reaction time and then travels
//! to the target region, and the command fires when the hand enters it.

mod policy;
mod reach;

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::game::{Command, EventLog, FrameClock, GameState, Maze, Session, TimedCommand};

pub use policy::{policy_decide, PolicyConfig, PolicyError};
pub use reach::{play_reach, play_reach_traced, ReachGame, ReachProfile, HAND_SAMPLE_HZ};

/// Shifted Gamma latency in milliseconds. A zero scale makes it a point mass
/// at the offset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    pub shape: f64,
    pub scale_ms: f64,
    pub offset_ms: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProfileError {
    #[error("latency shape must be positive, got {0}")]
    Shape(f64),
    #[error("latency scale must be non-negative, got {0}")]
    Scale(f64),
    #[error("latency offset must be non-negative, got {0}")]
    Offset(f64),
    #[error("hand speed must be positive, got {0}")]
    Speed(f64),
    #[error("speed coefficient of variation must be in [0, 1), got {0}")]
    SpeedCv(f64),
    #[error("speed-distance exponent must be in [0, 1], got {0}")]
    SpeedExponent(f64),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Gamepad(#[from] crate::gamepad::GamepadError),
}

impl Latency {
    pub const fn new(shape: f64, scale_ms: f64, offset_ms: f64) -> Self {
        Self {
            shape,
            scale_ms,
            offset_ms,
        }
    }

    pub const fn fixed(ms: f64) -> Self {
        Self::new(1.0, 0.0, ms)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if !(self.shape > 0.0 && self.shape.is_finite()) {
            return Err(ProfileError::Shape(self.shape));
        }
        if !(self.scale_ms >= 0.0 && self.scale_ms.is_finite()) {
            return Err(ProfileError::Scale(self.scale_ms));
        }
        if !(self.offset_ms >= 0.0 && self.offset_ms.is_finite()) {
            return Err(ProfileError::Offset(self.offset_ms));
        }
        Ok(())
    }

    pub fn mean_ms(&self) -> f64 {
        self.offset_ms + self.shape * self.scale_ms
    }

    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> f64 {
        if self.scale_ms == 0.0 {
            return self.offset_ms;
        }
        let g = Gamma::new(self.shape, self.scale_ms).expect("validated latency");
        self.offset_ms + g.sample(rng)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyboardProfile {
    pub latency: Latency,
}

impl Default for KeyboardProfile {
    fn default() -> Self {
        Self {
            latency: Latency::new(2.2, 130.0, 80.0),
        }
    }
}

impl KeyboardProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        self.latency.validate()
    }
}

/// Independent random streams derived from one game seed.
pub(crate) struct Streams {
    pub latency: ChaCha8Rng,
    pub motor: ChaCha8Rng,
    pub jitter: ChaCha8Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        let stream = |k| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(k);
            r
        };
        Self {
            latency: stream(1),
            motor: stream(2),
            jitter: stream(3),
        }
    }
}

/// What Pac-Man will do at its next opportunity without further input.
pub(crate) fn effective_direction(state: &GameState) -> Command {
    state.pacman.pending_command.unwrap_or(state.pacman.heading)
}

/// Frames of look-ahead after which the player stops searching for the next
/// decision point.
const MAX_LOOKAHEAD_FRAMES: u32 = 600;

/// Whether Pac-Man, centred on `tile` and heading `heading`, has anything to
/// decide there: a junction, a corner or a dead end.
fn is_decision_point(maze: &Maze, tile: crate::game::Tile, heading: Command) -> bool {
    let mut onward = maze.exits(tile).filter(|d| *d != heading.reverse());
    !(onward.next() == Some(heading) && onward.next().is_none())
}

/// The state at Pac-Man's next decision point: he coasts along his current
/// corridor, clearing pellets, and stops on the centre of the first tile
/// where a choice has to be made (before any pending command is applied).
pub(crate) fn predict(state: &GameState, maze: &Maze) -> GameState {
    let mut s = state.clone();
    for _ in 0..MAX_LOOKAHEAD_FRAMES {
        let pm = &s.pacman;
        if pm.at_center() && is_decision_point(maze, pm.tile, pm.heading) {
            break;
        }
        s.coast(maze, 1);
    }
    s
}

/// Shared closed loop: decide, hand the decision to the actuator, let the
/// actuator push whatever commands land in the current frame, play the frame.
pub(crate) trait Actuator {
    /// Whether an issued command is still on its way.
    fn busy(&self, now_ms: f64) -> bool;
    fn issue(&mut self, command: Command, now_ms: f64);
    /// Commands landing before `until_ms`, in time order.
    fn drain(&mut self, until_ms: f64) -> Vec<TimedCommand>;
}

pub(crate) fn drive<A: Actuator>(
    maze: &Maze,
    clock: FrameClock,
    policy: &PolicyConfig,
    seed: u64,
    actuator: &mut A,
) -> Result<EventLog, PolicyError> {
    policy.validate()?;
    let mut session = Session::new(maze, clock, seed);
    let replan = u64::from(policy.replan_period);
    loop {
        let now = session.now_ms();
        if session.frame().is_multiple_of(replan) && !actuator.busy(now) {
            let ahead = predict(session.state(), maze);
            let decision = policy_decide(&ahead, maze, policy)?;
            if decision != effective_direction(&ahead) {
                actuator.issue(decision, now);
            }
        }
        let next = clock.start_of(session.frame() + 1);
        for c in actuator.drain(next) {
            session.push(c).expect("actuators emit ordered timestamps");
        }
        if !session.advance() {
            break;
        }
    }
    Ok(session.into_log())
}

struct Keyboard {
    latency: Latency,
    rng: ChaCha8Rng,
    in_flight: VecDeque<TimedCommand>,
}

impl Actuator for Keyboard {
    fn busy(&self, _now_ms: f64) -> bool {
        !self.in_flight.is_empty()
    }

    fn issue(&mut self, command: Command, now_ms: f64) {
        // key presses reach the game in the order they were made
        let earliest = self.in_flight.back().map_or(f64::NEG_INFINITY, |c| c.t_ms);
        let t = (now_ms + self.latency.sample(&mut self.rng)).max(earliest);
        self.in_flight.push_back(TimedCommand::new(t, command));
    }

    fn drain(&mut self, until_ms: f64) -> Vec<TimedCommand> {
        let mut out = Vec::new();
        while let Some(c) = self.in_flight.pop_front_if(|c| c.t_ms < until_ms) {
            out.push(c);
        }
        out
    }
}

/// Plays one game with keyboard input.
pub fn play_keyboard(
    maze: &Maze,
    clock: FrameClock,
    profile: &KeyboardProfile,
    policy: &PolicyConfig,
    seed: u64,
) -> Result<EventLog, ProfileError> {
    profile.validate()?;
    let mut keyboard = Keyboard {
        latency: profile.latency,
        rng: Streams::new(seed).latency,
        in_flight: VecDeque::new(),
    };
    Ok(drive(maze, clock, policy, seed, &mut keyboard)?)
}
