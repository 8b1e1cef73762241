//! Arm-reaching player on the virtual gamepad.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{drive, Actuator, Latency, PolicyConfig, ProfileError, Streams};
use crate::game::{run_game, Command, EventLog, FrameClock, Maze, TimedCommand};
use crate::gamepad::{trajectory_to_commands, EdgeDetector, GamepadConfig, HandSample};

/// Tracker sampling rate.
pub const HAND_SAMPLE_HZ: f64 = 120.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachProfile {
    /// Delay between deciding and the hand starting to move.
    pub reaction: Latency,
    /// Mean hand speed, metres per second.
    pub hand_speed_mps: f64,
    /// Per-reach speed coefficient of variation.
    pub speed_cv: f64,
    /// Longer reaches are faster: a reach of length `d` moves at
    /// `hand_speed_mps * (d / REFERENCE_REACH_M)^exponent`. Zero gives every
    /// reach the same speed.
    #[serde(default)]
    pub speed_distance_exponent: f64,
}

/// Reach length at which the hand moves at exactly `hand_speed_mps`.
pub const REFERENCE_REACH_M: f64 = 0.3;

impl Default for ReachProfile {
    fn default() -> Self {
        Self {
            reaction: Latency::new(2.2, 130.0, 80.0),
            hand_speed_mps: 0.5,
            speed_cv: 0.1,
            speed_distance_exponent: 0.0,
        }
    }
}

impl ReachProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        self.reaction.validate()?;
        if !(self.hand_speed_mps > 0.0) {
            return Err(ProfileError::Speed(self.hand_speed_mps));
        }
        if !(0.0..1.0).contains(&self.speed_cv) {
            return Err(ProfileError::SpeedCv(self.speed_cv));
        }
        if !(0.0..=1.0).contains(&self.speed_distance_exponent) {
            return Err(ProfileError::SpeedExponent(self.speed_distance_exponent));
        }
        Ok(())
    }
}

/// A finished reaching game with its hand trace.
#[derive(Clone, Debug)]
pub struct ReachGame {
    pub log: EventLog,
    pub samples: Vec<HandSample>,
    /// Total noise-free hand path length, metres.
    pub path_length_m: f64,
}

type Point = (f64, f64);

fn dist(a: Point, b: Point) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Constant-speed travel along a polyline, starting at `start_ms`.
#[derive(Clone, Debug)]
struct Reach {
    start_ms: f64,
    /// Metres per millisecond.
    speed: f64,
    /// Filled in from the hand position when the reach starts.
    path: Vec<Point>,
    target: Command,
}

impl Reach {
    fn position(&self, t_ms: f64) -> Point {
        let mut left = (t_ms - self.start_ms).max(0.0) * self.speed;
        for w in self.path.windows(2) {
            let d = dist(w[0], w[1]);
            if left <= d {
                let f = if d > 0.0 { left / d } else { 1.0 };
                return (w[0].0 + (w[1].0 - w[0].0) * f, w[0].1 + (w[1].1 - w[0].1) * f);
            }
            left -= d;
        }
        *self.path.last().expect("non-empty path")
    }

    fn end_ms(&self) -> f64 {
        let len: f64 = self.path.windows(2).map(|w| dist(w[0], w[1])).sum();
        self.start_ms + len / self.speed
    }
}

/// Peak speed grows with reach length as `(len / 0.3 m)^exponent`.
fn scaled_speed(speed: f64, len_m: f64, exponent: f64) -> f64 {
    if len_m > 0.0 {
        speed * (len_m / REFERENCE_REACH_M).powf(exponent)
    } else {
        speed
    }
}

struct Hand {
    pad: GamepadConfig,
    reaction: Latency,
    speed_mps: f64,
    speed_cv: f64,
    speed_exponent: f64,
    latency_rng: ChaCha8Rng,
    motor_rng: ChaCha8Rng,
    jitter_rng: ChaCha8Rng,
    detector: EdgeDetector,
    /// Reach under way (or finished, with the hand resting at its end).
    current: Option<Reach>,
    /// Decided reach still in its reaction delay; its path starts empty.
    queued: Option<Reach>,
    /// Target of the last issued decision whose region has not been entered yet.
    awaiting: Option<Command>,
    next_sample: u64,
    last_clean: Point,
    samples: Vec<HandSample>,
    path_length_m: f64,
}

impl Hand {
    fn sample_period_ms() -> f64 {
        1000.0 / HAND_SAMPLE_HZ
    }

    fn clean_position(&self, t_ms: f64) -> Point {
        match &self.current {
            Some(r) => r.position(t_ms),
            None => self.pad.origin,
        }
    }

    fn start_queued(&mut self, t_ms: f64) {
        let Some(mut r) = self.queued.take_if(|r| r.start_ms <= t_ms) else {
            return;
        };
        let from = self.clean_position(r.start_ms);
        let goal = self.pad.centroid(r.target);
        // reaching for the region already occupied needs an exit and re-entry
        let via_origin = self.detector.current() == Some(r.target);
        r.path = if via_origin {
            vec![from, self.pad.origin, goal]
        } else {
            vec![from, goal]
        };
        let len: f64 = r.path.windows(2).map(|w| dist(w[0], w[1])).sum();
        r.speed = scaled_speed(r.speed, len, self.speed_exponent);
        self.current = Some(r);
    }
}

impl Actuator for Hand {
    fn busy(&self, _now_ms: f64) -> bool {
        self.awaiting.is_some()
    }

    fn issue(&mut self, command: Command, now_ms: f64) {
        let start = now_ms + self.reaction.sample(&mut self.latency_rng);
        let z: f64 = StandardNormal.sample(&mut self.motor_rng);
        let speed = self.speed_mps * (1.0 + self.speed_cv * z).max(0.1);
        self.queued = Some(Reach {
            start_ms: start,
            speed: speed / 1000.0,
            path: Vec::new(),
            target: command,
        });
        self.awaiting = Some(command);
    }

    fn drain(&mut self, until_ms: f64) -> Vec<TimedCommand> {
        let mut out = Vec::new();
        loop {
            let t = self.next_sample as f64 * Self::sample_period_ms();
            if t >= until_ms {
                break;
            }
            self.next_sample += 1;
            self.start_queued(t);
            let clean = self.clean_position(t);
            if !self.samples.is_empty() {
                self.path_length_m += dist(self.last_clean, clean);
            }
            self.last_clean = clean;
            let sigma = self.pad.jitter_sigma;
            let (x, y) = if sigma > 0.0 {
                let dx: f64 = self.jitter_rng.sample(StandardNormal);
                let dy: f64 = self.jitter_rng.sample(StandardNormal);
                (clean.0 + sigma * dx, clean.1 + sigma * dy)
            } else {
                clean
            };
            let s = HandSample { t_ms: t, x, y };
            self.samples.push(s);
            if let Some(c) = self.detector.feed(&self.pad, &s) {
                if self.awaiting == Some(c) {
                    self.awaiting = None;
                }
                out.push(TimedCommand::new(t, c));
            }
            // a reach that ends outside its region (jitter) is given up
            if let Some(r) = self.current.as_ref().filter(|_| self.queued.is_none()) {
                if self.awaiting == Some(r.target) && t >= r.end_ms() && self.detector.current() != Some(r.target) {
                    self.awaiting = None;
                }
            }
        }
        out
    }
}

/// Plays one game with the reaching player, returning the hand trace as well.
///
/// The closed loop produces the hand samples; the log is then produced the
/// same way as for recorded data, by running the game on the commands
/// extracted from the trace.
pub fn play_reach_traced(
    maze: &Maze,
    clock: FrameClock,
    gamepad: &GamepadConfig,
    profile: &ReachProfile,
    policy: &PolicyConfig,
    seed: u64,
) -> Result<ReachGame, ProfileError> {
    gamepad.validate()?;
    profile.validate()?;
    let streams = Streams::new(seed);
    let mut hand = Hand {
        pad: *gamepad,
        reaction: profile.reaction,
        speed_mps: profile.hand_speed_mps,
        speed_cv: profile.speed_cv,
        speed_exponent: profile.speed_distance_exponent,
        latency_rng: streams.latency,
        motor_rng: streams.motor,
        jitter_rng: streams.jitter,
        detector: EdgeDetector::default(),
        current: None,
        queued: None,
        awaiting: None,
        next_sample: 0,
        last_clean: gamepad.origin,
        samples: Vec::new(),
        path_length_m: 0.0,
    };
    drive(maze, clock, policy, seed, &mut hand)?;
    let commands = trajectory_to_commands(gamepad, &hand.samples);
    let log = run_game(maze, clock, &commands, seed).expect("trace timestamps are ordered");
    Ok(ReachGame {
        log,
        samples: hand.samples,
        path_length_m: hand.path_length_m,
    })
}

pub fn play_reach(
    maze: &Maze,
    clock: FrameClock,
    gamepad: &GamepadConfig,
    profile: &ReachProfile,
    policy: &PolicyConfig,
    seed: u64,
) -> Result<EventLog, ProfileError> {
    play_reach_traced(maze, clock, gamepad, profile, policy, seed).map(|g| g.log)
}
