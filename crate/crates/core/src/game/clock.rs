use serde::{Deserialize, Serialize};

/// Milliseconds per frame at full speed (60 fps).
pub const BASE_FRAME_MS: f64 = 1000.0 / 60.0;

/// Maps wall-clock time onto frames. Lowering `time_rate` stretches every
/// frame, slowing the game without touching its rules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameClock {
    pub base_frame_ms: f64,
    pub time_rate: f64,
}

impl FrameClock {
    /// Panics unless `time_rate` lies in (0, 1] and `base_frame_ms` is positive.
    pub fn new(base_frame_ms: f64, time_rate: f64) -> Self {
        assert!(
            time_rate > 0.0 && time_rate <= 1.0,
            "time rate {time_rate} outside (0, 1]"
        );
        assert!(base_frame_ms > 0.0 && base_frame_ms.is_finite());
        Self {
            base_frame_ms,
            time_rate,
        }
    }

    pub fn with_rate(time_rate: f64) -> Self {
        Self::new(BASE_FRAME_MS, time_rate)
    }

    pub fn frame_ms(&self) -> f64 {
        self.base_frame_ms / self.time_rate
    }

    /// Frame whose interval contains `t_ms` (floor quantisation).
    pub fn frame_of(&self, t_ms: f64) -> u64 {
        if t_ms <= 0.0 {
            return 0;
        }
        (t_ms / self.frame_ms()).floor() as u64
    }

    /// Wall-clock start of `frame`.
    pub fn start_of(&self, frame: u64) -> f64 {
        frame as f64 * self.frame_ms()
    }
}

impl Default for FrameClock {
    fn default() -> Self {
        Self::with_rate(1.0)
    }
}
