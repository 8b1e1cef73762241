//! Virtual four-region gamepad on the table plane.
//!
//! Each region is an isosceles triangle whose tip points at the origin from
//! `spread_r / 2` away along its axis (UP = +y, RIGHT = +x, DOWN = -y,
//! LEFT = -x) and whose base lies `radial_extent` beyond the tip. Triangles
//! are closed sets. A command fires when the hand enters a region.

use serde::{Deserialize, Serialize};

use crate::game::{Command, TimedCommand};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GamepadConfig {
    /// Table-plane origin in metres.
    pub origin: (f64, f64),
    /// Distance between opposing inner tips, metres.
    pub spread_r: f64,
    pub tip_half_angle_deg: f64,
    /// Triangle height beyond the tip, metres.
    pub radial_extent: f64,
    /// Standard deviation of Gaussian positional noise added to tracked samples, metres.
    #[serde(default)]
    pub jitter_sigma: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GamepadError {
    #[error("spread must be positive, got {0}")]
    Spread(f64),
    #[error("tip half-angle must lie in (0, 45] degrees, got {0}")]
    HalfAngle(f64),
    #[error("radial extent must be positive, got {0}")]
    Extent(f64),
    #[error("jitter sigma must be non-negative, got {0}")]
    Jitter(f64),
}

impl GamepadConfig {
    pub const DEFAULT_HALF_ANGLE_DEG: f64 = 45.0;
    pub const DEFAULT_EXTENT_M: f64 = 0.25;

    pub fn with_spread(spread_r: f64) -> Self {
        Self {
            origin: (0.0, 0.0),
            spread_r,
            tip_half_angle_deg: Self::DEFAULT_HALF_ANGLE_DEG,
            radial_extent: Self::DEFAULT_EXTENT_M,
            jitter_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), GamepadError> {
        if !(self.spread_r > 0.0 && self.spread_r.is_finite()) {
            return Err(GamepadError::Spread(self.spread_r));
        }
        // wider than 45 degrees lets neighbouring triangles overlap
        if !(self.tip_half_angle_deg > 0.0 && self.tip_half_angle_deg <= 45.0) {
            return Err(GamepadError::HalfAngle(self.tip_half_angle_deg));
        }
        if !(self.radial_extent > 0.0 && self.radial_extent.is_finite()) {
            return Err(GamepadError::Extent(self.radial_extent));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(GamepadError::Jitter(self.jitter_sigma));
        }
        Ok(())
    }

    /// Scales every length, keeping the origin fixed.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            origin: (self.origin.0 * factor, self.origin.1 * factor),
            spread_r: self.spread_r * factor,
            radial_extent: self.radial_extent * factor,
            jitter_sigma: self.jitter_sigma * factor,
            ..*self
        }
    }

    /// Centroid of a region's triangle.
    pub fn centroid(&self, region: Command) -> (f64, f64) {
        let (ax, ay) = axis(region);
        let d = self.spread_r / 2.0 + 2.0 * self.radial_extent / 3.0;
        (self.origin.0 + ax * d, self.origin.1 + ay * d)
    }

    /// Inner tip of a region's triangle.
    pub fn tip(&self, region: Command) -> (f64, f64) {
        let (ax, ay) = axis(region);
        let d = self.spread_r / 2.0;
        (self.origin.0 + ax * d, self.origin.1 + ay * d)
    }
}

impl Default for GamepadConfig {
    fn default() -> Self {
        Self::with_spread(0.10)
    }
}

/// Table-plane unit axis of a region (y up).
fn axis(region: Command) -> (f64, f64) {
    match region {
        Command::Up => (0.0, 1.0),
        Command::Right => (1.0, 0.0),
        Command::Down => (0.0, -1.0),
        Command::Left => (-1.0, 0.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandSample {
    pub t_ms: f64,
    pub x: f64,
    pub y: f64,
}

/// The region containing `point`, if any.
pub fn region_of(config: &GamepadConfig, point: (f64, f64)) -> Option<Command> {
    let dx = point.0 - config.origin.0;
    let dy = point.1 - config.origin.1;
    let slope = config.tip_half_angle_deg.to_radians().tan();
    let half = config.spread_r / 2.0;
    Command::ALL.into_iter().find(|&region| {
        let (ax, ay) = axis(region);
        let along = dx * ax + dy * ay - half;
        let across = (dx * ay - dy * ax).abs();
        along >= 0.0 && along <= config.radial_extent && across <= along * slope
    })
}

/// Edge-triggered command extraction: a command fires on each sample whose
/// region differs from the previous sample's and is not empty. The first
/// sample only establishes the starting region.
pub fn trajectory_to_commands(config: &GamepadConfig, samples: &[HandSample]) -> Vec<TimedCommand> {
    let mut out = Vec::new();
    let mut detector = EdgeDetector::default();
    for s in samples {
        if let Some(c) = detector.feed(config, s) {
            out.push(TimedCommand::new(s.t_ms, c));
        }
    }
    out
}

/// Incremental form of [`trajectory_to_commands`].
#[derive(Clone, Copy, Debug, Default)]
pub struct EdgeDetector {
    primed: bool,
    current: Option<Command>,
}

impl EdgeDetector {
    pub fn feed(&mut self, config: &GamepadConfig, s: &HandSample) -> Option<Command> {
        let region = region_of(config, (s.x, s.y));
        let fired = if self.primed && region != self.current {
            region
        } else {
            None
        };
        self.primed = true;
        self.current = region;
        fired
    }

    pub fn current(&self) -> Option<Command> {
        self.current
    }
}
