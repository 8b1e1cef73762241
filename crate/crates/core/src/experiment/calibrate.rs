//! Calibration of the synthetic players.
//!
//! The keyboard latency is tuned so that baseline frame-domain IKI has the
//! mean and standard deviation of the reference Gamma(k = 2.19,
//! mu = -2.06, scale = 17.11) and a fitted shape close to its k. The
//! reaching player then reuses that reaction latency, and its hand speed is set so that at the easiest grid cell
//! (smallest spread, slowest time rate) it issues commands, measured in
//! frames, as often as the calibrated keyboard player does at full speed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::search::Grid;
use super::stats::{mean, sd};
use super::{derive_seed, play, validate_levels, Condition, ExperimentError, Phase, PlanError, Profiles};
use crate::game::{load_canonical_level, Maze};
use crate::model::{fit_gamma, GammaParams};
use crate::players::Latency;
use crate::telemetry::extract_iki;

/// Largest accepted relative error on each calibrated moment.
pub const CALIBRATION_TOLERANCE: f64 = 0.10;

/// Seed streams reserved for calibration, far from the run's cell streams.
const KEYBOARD_STREAM: u64 = u64::MAX - 1;
const REACH_STREAM: u64 = u64::MAX - 2;

const SHAPES: [f64; 4] = [2.2, 4.0, 8.0, 16.0];
const MEANS_MS: [f64; 5] = [250.0, 300.0, 350.0, 400.0, 450.0];
const SDS_MS: [f64; 5] = [60.0, 90.0, 120.0, 150.0, 180.0];
/// Relative tolerance on the fitted IKI shape.
pub const SHAPE_TOLERANCE: f64 = 0.25;
const SPEED_BRACKET_MPS: (f64, f64) = (0.05, 5.0);
/// Halvings of the log-speed bracket; 12 leave it about 0.1% wide.
const SPEED_BISECTIONS: u32 = 12;

/// The reference IKI distribution, frames.
pub fn target_iki() -> GammaParams {
    GammaParams::new(2.19, -2.06, 17.11)
}

/// Mean and standard deviation of the reference IKI distribution, frames.
pub fn target_iki_moments() -> (f64, f64) {
    let g = target_iki();
    (g.mean(), g.variance().sqrt())
}

/// IKI summary of a batch of games.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IkiSummary {
    pub mean: f64,
    pub sd: f64,
    /// Fitted Gamma shape; NaN when the fit fails.
    pub k: f64,
}

impl IkiSummary {
    fn of(iki: &[f64]) -> Self {
        Self {
            mean: mean(iki),
            sd: sd(iki),
            k: fit_gamma(iki).map_or(f64::NAN, |f| f.params.k),
        }
    }

    /// Worst of the three relative errors, each scaled by its tolerance, so
    /// that 1 marks the edge of acceptance.
    pub fn error(&self) -> f64 {
        let (m, s) = target_iki_moments();
        let parts = [
            rel(self.mean, m) / CALIBRATION_TOLERANCE,
            rel(self.sd, s) / CALIBRATION_TOLERANCE,
            rel(self.k, target_iki().k) / SHAPE_TOLERANCE,
        ];
        if parts.iter().any(|p| p.is_nan()) {
            return f64::INFINITY;
        }
        parts.into_iter().fold(0.0, f64::max)
    }
}

fn rel(got: f64, want: f64) -> f64 {
    (got / want - 1.0).abs()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub profiles: Profiles,
    pub keyboard: IkiSummary,
    pub anchor_spread_m: f64,
    pub anchor_time_rate: f64,
    pub reach_iki_mean: f64,
    pub games: usize,
}

/// Pooled IKI of `games` games per profile, all on the same seeds.
fn pooled_iki(
    maze: &Maze,
    candidates: &[Profiles],
    condition: Condition,
    stream: u64,
    games: usize,
    master_seed: u64,
) -> Result<Vec<IkiSummary>, ExperimentError> {
    let jobs: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..games).map(move |g| (c, g)))
        .collect();
    let iki = jobs
        .par_iter()
        .map(|&(c, g)| {
            let log = play(
                maze,
                &candidates[c],
                condition,
                derive_seed(master_seed, stream, g as u64),
            )?;
            Ok(extract_iki(&log))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(iki
        .chunks(games)
        .map(|chunk| {
            let all: Vec<f64> = chunk.iter().flatten().map(|&v| v as f64).collect();
            IkiSummary::of(&all)
        })
        .collect())
}

fn with_latency(base: &Profiles, latency: Latency) -> Profiles {
    let mut p = *base;
    p.keyboard.latency = latency;
    p
}

fn calibrate_keyboard(
    maze: &Maze,
    base: &Profiles,
    games: usize,
    master_seed: u64,
) -> Result<(Latency, IkiSummary), ExperimentError> {
    let latencies: Vec<Latency> = SHAPES
        .iter()
        .flat_map(|&k| {
            MEANS_MS
                .iter()
                .flat_map(move |&m| SDS_MS.iter().map(move |&s| (k, m, s)))
        })
        .filter_map(|(k, m, s)| {
            let scale = s / k.sqrt();
            let offset = m - k * scale;
            (offset >= 0.0).then(|| Latency::new(k, scale, offset))
        })
        .collect();
    let candidates: Vec<Profiles> = latencies.iter().map(|&l| with_latency(base, l)).collect();
    let kb = Condition::Keyboard { phase: Phase::Pre };
    let summaries = pooled_iki(maze, &candidates, kb, KEYBOARD_STREAM, games, master_seed)?;
    let best = (0..latencies.len())
        .min_by(|&a, &b| summaries[a].error().total_cmp(&summaries[b].error()))
        .expect("non-empty search grid");
    Ok((latencies[best], summaries[best]))
}

fn calibrate_reach_speed(
    maze: &Maze,
    base: &Profiles,
    anchor: Condition,
    target_mean: f64,
    games: usize,
    master_seed: u64,
) -> Result<(f64, f64), ExperimentError> {
    let iki_mean = |speed: f64| -> Result<f64, ExperimentError> {
        let mut p = *base;
        p.reach.hand_speed_mps = speed;
        Ok(pooled_iki(maze, &[p], anchor, REACH_STREAM, games, master_seed)?[0].mean)
    };
    let (mut lo, mut hi) = SPEED_BRACKET_MPS;
    // IKI shrinks as the hand speeds up
    let at_hi = iki_mean(hi)?;
    if at_hi >= target_mean {
        return Ok((hi, at_hi));
    }
    let at_lo = iki_mean(lo)?;
    if at_lo <= target_mean {
        return Ok((lo, at_lo));
    }
    for _ in 0..SPEED_BISECTIONS {
        let mid = (lo * hi).sqrt();
        if iki_mean(mid)? > target_mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let speed = (lo * hi).sqrt();
    Ok((speed, iki_mean(speed)?))
}

/// Calibrates `base` for the given grid using `games` games per evaluation.
pub fn calibrate(
    base: &Profiles,
    grid: &Grid,
    games: usize,
    master_seed: u64,
) -> Result<CalibrationReport, ExperimentError> {
    base.validate()?;
    if grid.spreads.is_empty() || grid.time_rates.is_empty() {
        return Err(PlanError::EmptyLevels("grid").into());
    }
    validate_levels(&grid.spreads, &grid.time_rates, base)?;
    if games < 2 {
        return Err(PlanError::GamesPerCell.into());
    }
    let maze = load_canonical_level();
    let (latency, kb) = calibrate_keyboard(&maze, base, games, master_seed)?;
    log::info!(
        "keyboard latency shape {:.2} scale {:.1} ms offset {:.1} ms: IKI mean {:.2} sd {:.2} k {:.2}",
        latency.shape,
        latency.scale_ms,
        latency.offset_ms,
        kb.mean,
        kb.sd,
        kb.k
    );
    let mut profiles = with_latency(base, latency);
    profiles.reach.reaction = latency;

    let spread = grid.spreads.iter().copied().fold(f64::INFINITY, f64::min);
    let time_rate = grid.time_rates.iter().copied().fold(f64::INFINITY, f64::min);
    let anchor = Condition::Reach { spread, time_rate };
    let (speed, reach_mean) = calibrate_reach_speed(&maze, &profiles, anchor, kb.mean, games, master_seed)?;
    log::info!("hand speed {speed:.3} m/s: IKI mean {reach_mean:.2} at spread {spread} m, time rate {time_rate:.3}");
    profiles.reach.hand_speed_mps = speed;

    let report = CalibrationReport {
        profiles,
        keyboard: kb,
        anchor_spread_m: spread,
        anchor_time_rate: time_rate,
        reach_iki_mean: reach_mean,
        games,
    };
    if !(kb.error() <= 1.0) {
        let (m, s) = target_iki_moments();
        return Err(ExperimentError::NonConvergence(format!(
            "keyboard IKI mean {:.2} sd {:.2} k {:.2} vs target {m:.2} {s:.2} {:.2}",
            kb.mean,
            kb.sd,
            kb.k,
            target_iki().k
        )));
    }
    if !(rel(reach_mean, kb.mean) <= CALIBRATION_TOLERANCE) {
        return Err(ExperimentError::NonConvergence(format!(
            "reach IKI mean {reach_mean:.2} vs keyboard {:.2}",
            kb.mean
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_moments() {
        let (m, s) = target_iki_moments();
        assert!((m - (-2.06 + 2.19 * 17.11)).abs() < 1e-9);
        assert!((s - 2.19f64.sqrt() * 17.11).abs() < 1e-9);
    }

    #[test]
    fn error_is_worst_scaled_relative_error() {
        let (m, s) = target_iki_moments();
        let exact = IkiSummary {
            mean: m,
            sd: s,
            k: 2.19,
        };
        assert!(exact.error() < 1e-12);
        let e = IkiSummary {
            mean: m * 1.05,
            sd: s,
            k: 2.19 * 0.9,
        }
        .error();
        assert!((e - 0.5).abs() < 1e-9, "{e}");
        assert!(
            (IkiSummary {
                k: 2.19 * 1.25,
                ..exact
            }
            .error()
                - 1.0)
                .abs()
                < 1e-9
        );
        assert_eq!(IkiSummary { k: f64::NAN, ..exact }.error(), f64::INFINITY);
    }

    #[test]
    fn rejects_bad_input() {
        let grid = Grid {
            spreads: vec![],
            time_rates: vec![1.0],
        };
        assert!(calibrate(&Profiles::default(), &grid, 4, 0).is_err());
        let grid = Grid {
            spreads: vec![0.1],
            time_rates: vec![1.0],
        };
        assert!(calibrate(&Profiles::default(), &grid, 1, 0).is_err());
    }
}
