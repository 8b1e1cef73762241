//! Factorial experiment harness: plans, runs, scoring, analysis, search and
//! calibration.
//!
//! A run directory looks like
//!
//! ```text
//! out/
//!   plan.json
//!   manifest.csv
//!   keyboard/pre/game_000.jsonl
//!   keyboard/post/game_000.jsonl
//!   reach/spread_0.10/trate_0.333/game_000.jsonl
//! ```
//!
//! Every game gets its own seed, derived from the plan's master seed, the
//! index of its cell and its index within the cell, so games can run in any
//! order and a run is reproducible from the plan alone.

mod analysis;
mod calibrate;
mod search;
pub mod stats;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::game::{load_canonical_level, EventLog, FrameClock, LogError, Maze};
use crate::gamepad::GamepadConfig;
use crate::model::{FitError, ModelFileError, RefModel};
use crate::players::{play_keyboard, play_reach, KeyboardProfile, PolicyConfig, ProfileError, ReachProfile};

pub use analysis::{
    analyze, score_logs, score_run, summarise_run, write_report, AnalysisReport, ConditionSummary, MIN_SCORED_GAMES,
};
pub use calibrate::{
    calibrate, target_iki, target_iki_moments, CalibrationReport, IkiSummary, CALIBRATION_TOLERANCE, SHAPE_TOLERANCE,
};
pub use search::{evaluate_grid, find_config, CellResult, Grid};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const PLAN_FILE: &str = "plan.json";

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("{0} levels must not be empty")]
    EmptyLevels(&'static str),
    #[error("games per cell must be at least 1")]
    GamesPerCell,
    #[error("baseline games must be at least 1")]
    BaselineGames,
    #[error("time rate must lie in (0, 1], got {0}")]
    TimeRate(f64),
    #[error("levels {0} and {1} map to the same directory")]
    DuplicateLevel(f64, f64),
    #[error("tolerance must be non-negative, got {0}")]
    Tolerance(f64),
    #[error("no output directory given")]
    OutputDir,
    #[error("bad grid spec {0:?}: expected spread=a,b,...,trate=c,d,...")]
    GridSpec(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid plan: {0}")]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Log { path: PathBuf, source: LogError },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    ModelFile { path: PathBuf, source: ModelFileError },
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("no event logs found under {}", .0.display())]
    NoLogs(PathBuf),
    #[error("insufficient data: need at least {needed} scored games, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("calibration did not converge: {0}")]
    NonConvergence(String),
}

impl ExperimentError {
    /// Process exit status: 2 for invalid input, 3 for numerical
    /// non-convergence, 1 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::NonConvergence(_) | Self::Fit(FitError::NonConvergence(_)) => 3,
            Self::Io { .. } | Self::Csv { .. } => 1,
            Self::Log {
                source: LogError::Io(_),
                ..
            }
            | Self::ModelFile {
                source: ModelFileError::Io(_),
                ..
            } => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Everything that shapes the synthetic participants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Profiles {
    pub keyboard: KeyboardProfile,
    pub reach: ReachProfile,
    pub policy: PolicyConfig,
    /// Gamepad geometry; its spread is replaced by each level's.
    pub gamepad: GamepadConfig,
}

impl Profiles {
    pub fn validate(&self) -> Result<(), ProfileError> {
        self.keyboard.validate()?;
        self.reach.validate()?;
        self.policy.validate()?;
        self.gamepad.validate()?;
        Ok(())
    }

    pub fn pad(&self, spread: f64) -> GamepadConfig {
        GamepadConfig {
            spread_r: spread,
            ..self.gamepad
        }
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let p: Self = serde_json::from_str(&text).map_err(|source| ExperimentError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<(), ExperimentError> {
        let text = serde_json::to_string_pretty(self).expect("profiles serialise") + "\n";
        std::fs::write(path, text).map_err(io_err(path))
    }
}

/// Profiles written inline or kept in a separate file (such as one written
/// by calibration), resolved relative to the plan file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSource {
    File(PathBuf),
    Inline(Profiles),
}

impl Default for ProfileSource {
    fn default() -> Self {
        Self::Inline(Profiles::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct PlanFile {
    spread_levels: Vec<f64>,
    time_rates: Vec<f64>,
    games_per_cell: usize,
    baseline_games: usize,
    #[serde(default)]
    master_seed: u64,
    #[serde(default)]
    profiles: ProfileSource,
    #[serde(default)]
    out_dir: Option<PathBuf>,
}

/// A factorial experiment: baseline keyboard games split into a pre and a
/// post phase around the full spread x time-rate grid of reaching games.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    /// Gamepad spreads, metres.
    pub spread_levels: Vec<f64>,
    pub time_rates: Vec<f64>,
    pub games_per_cell: usize,
    /// Keyboard games at full speed; the first half (rounded up) is played
    /// before the grid, the rest after.
    pub baseline_games: usize,
    pub master_seed: u64,
    pub profiles: Profiles,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentPlan {
    /// Two spreads (10 and 40 cm) by three time rates, 30 games per cell,
    /// with reach speed growing as the square root of reach length.
    pub fn standard() -> Self {
        let mut profiles = Profiles::default();
        profiles.reach.speed_distance_exponent = 0.5;
        Self {
            spread_levels: vec![0.10, 0.40],
            time_rates: vec![1.0 / 3.0, 2.0 / 3.0, 1.0],
            games_per_cell: 30,
            baseline_games: 24,
            master_seed: 1,
            profiles,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.spread_levels.is_empty() {
            return Err(PlanError::EmptyLevels("spread"));
        }
        if self.time_rates.is_empty() {
            return Err(PlanError::EmptyLevels("time rate"));
        }
        if self.games_per_cell == 0 {
            return Err(PlanError::GamesPerCell);
        }
        if self.baseline_games == 0 {
            return Err(PlanError::BaselineGames);
        }
        self.profiles.validate()?;
        validate_levels(&self.spread_levels, &self.time_rates, &self.profiles)
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, ExperimentError> {
        let raw: PlanFile = serde_json::from_str(text).map_err(|source| ExperimentError::Json {
            path: base_dir.to_path_buf(),
            source,
        })?;
        let profiles = match raw.profiles {
            ProfileSource::Inline(p) => p,
            ProfileSource::File(f) => Profiles::load(&base_dir.join(f))?,
        };
        let plan = Self {
            spread_levels: raw.spread_levels,
            time_rates: raw.time_rates,
            games_per_cell: raw.games_per_cell,
            baseline_games: raw.baseline_games,
            master_seed: raw.master_seed,
            profiles,
            out_dir: raw.out_dir,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base).map_err(|e| match e {
            ExperimentError::Json { source, .. } => ExperimentError::Json {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })
    }

    /// The plan with its profiles inlined.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialises") + "\n"
    }

    pub fn grid(&self) -> Grid {
        Grid {
            spreads: self.spread_levels.clone(),
            time_rates: self.time_rates.clone(),
        }
    }

    fn jobs(&self) -> Vec<Job> {
        let pre = self.baseline_games.div_ceil(2);
        let mut jobs = Vec::new();
        for (cell, phase, n) in [(0, Phase::Pre, pre), (1, Phase::Post, self.baseline_games - pre)] {
            for game in 0..n {
                jobs.push(Job {
                    condition: Condition::Keyboard { phase },
                    game,
                    seed: derive_seed(self.master_seed, cell, game as u64),
                });
            }
        }
        for (i, (spread, time_rate)) in self.grid().cells().enumerate() {
            for game in 0..self.games_per_cell {
                jobs.push(Job {
                    condition: Condition::Reach { spread, time_rate },
                    game,
                    seed: derive_seed(self.master_seed, 2 + i as u64, game as u64),
                });
            }
        }
        jobs
    }
}

pub(crate) fn validate_levels(spreads: &[f64], rates: &[f64], profiles: &Profiles) -> Result<(), PlanError> {
    for &r in rates {
        if !(r > 0.0 && r <= 1.0) {
            return Err(PlanError::TimeRate(r));
        }
    }
    for &s in spreads {
        profiles.pad(s).validate().map_err(ProfileError::from)?;
    }
    check_distinct(spreads, spread_dir)?;
    check_distinct(rates, rate_dir)
}

fn check_distinct(levels: &[f64], name: fn(f64) -> String) -> Result<(), PlanError> {
    for (i, &a) in levels.iter().enumerate() {
        if let Some(&b) = levels[..i].iter().find(|&&b| name(b) == name(a)) {
            return Err(PlanError::DuplicateLevel(b, a));
        }
    }
    Ok(())
}

fn spread_dir(s: f64) -> String {
    format!("spread_{s:.2}")
}

fn rate_dir(r: f64) -> String {
    format!("trate_{r:.3}")
}

/// SplitMix64 finaliser over (master, cell, game).
pub fn derive_seed(master: u64, cell: u64, game: u64) -> u64 {
    let mut z = master;
    for v in [cell, game] {
        z = z
            .wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(v.wrapping_mul(0xd1b5_4a32_d192_ed03));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pre,
    Post,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Condition {
    Keyboard { phase: Phase },
    Reach { spread: f64, time_rate: f64 },
}

impl Condition {
    /// Directory of this condition's logs, relative to the run directory.
    pub fn dir(&self) -> PathBuf {
        match *self {
            Self::Keyboard { phase: Phase::Pre } => PathBuf::from("keyboard/pre"),
            Self::Keyboard { phase: Phase::Post } => PathBuf::from("keyboard/post"),
            Self::Reach { spread, time_rate } => Path::new("reach").join(spread_dir(spread)).join(rate_dir(time_rate)),
        }
    }

    pub fn label(&self) -> String {
        self.dir().to_string_lossy().replace('\\', "/")
    }

    pub fn is_keyboard(&self) -> bool {
        matches!(self, Self::Keyboard { .. })
    }
}

struct Job {
    condition: Condition,
    game: usize,
    seed: u64,
}

/// Plays one game of `condition` with the given profiles.
pub fn play(maze: &Maze, profiles: &Profiles, condition: Condition, seed: u64) -> Result<EventLog, ProfileError> {
    match condition {
        Condition::Keyboard { .. } => play_keyboard(
            maze,
            FrameClock::with_rate(1.0),
            &profiles.keyboard,
            &profiles.policy,
            seed,
        ),
        Condition::Reach { spread, time_rate } => play_reach(
            maze,
            FrameClock::with_rate(time_rate),
            &profiles.pad(spread),
            &profiles.reach,
            &profiles.policy,
            seed,
        ),
    }
}

/// One row of `manifest.csv`.
///
/// Header: `path,modality,phase,spread_m,time_rate,game,seed,score,frames,sha256`.
/// `phase` is empty for reaching games and `spread_m` for keyboard games.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    /// Log path relative to the run directory, `/`-separated.
    pub path: String,
    pub modality: String,
    pub phase: Option<Phase>,
    pub spread_m: Option<f64>,
    pub time_rate: f64,
    pub game: usize,
    pub seed: u64,
    pub score: u32,
    pub frames: u64,
    pub sha256: String,
}

impl ManifestRow {
    pub fn condition(&self) -> Condition {
        match (self.phase, self.spread_m) {
            (Some(phase), _) => Condition::Keyboard { phase },
            (None, Some(spread)) => Condition::Reach {
                spread,
                time_rate: self.time_rate,
            },
            (None, None) => Condition::Keyboard { phase: Phase::Pre },
        }
    }

    pub fn is_keyboard(&self) -> bool {
        self.modality == "keyboard"
    }
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<(), ExperimentError> {
    let csv_err = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_manifest(run_dir: &Path) -> Result<Vec<ManifestRow>, ExperimentError> {
    let path = run_dir.join(MANIFEST_FILE);
    let csv_err = |source| ExperimentError::Csv {
        path: path.clone(),
        source,
    };
    let mut r = csv::Reader::from_path(&path).map_err(csv_err)?;
    r.deserialize().collect::<Result<Vec<_>, _>>().map_err(csv_err)
}

/// Plays every game of the plan and writes logs, manifest and a copy of the
/// plan under `out_dir`.
pub fn cmd_run(plan: &ExperimentPlan, out_dir: &Path) -> Result<Vec<ManifestRow>, ExperimentError> {
    plan.validate()?;
    let maze = load_canonical_level();
    let jobs = plan.jobs();
    log::info!("running {} games into {}", jobs.len(), out_dir.display());
    let logs = jobs
        .par_iter()
        .map(|j| play(&maze, &plan.profiles, j.condition, j.seed))
        .collect::<Result<Vec<_>, _>>()?;

    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let plan_path = out_dir.join(PLAN_FILE);
    std::fs::write(&plan_path, plan.to_json()).map_err(io_err(&plan_path))?;
    let mut rows = Vec::with_capacity(jobs.len());
    for (job, log) in jobs.iter().zip(&logs) {
        let dir = job.condition.dir();
        let abs_dir = out_dir.join(&dir);
        std::fs::create_dir_all(&abs_dir).map_err(io_err(&abs_dir))?;
        let name = format!("game_{:03}.jsonl", job.game);
        let file = abs_dir.join(&name);
        log.save(&file).map_err(|source| ExperimentError::Log {
            path: file.clone(),
            source,
        })?;
        let (modality, phase, spread_m, time_rate) = match job.condition {
            Condition::Keyboard { phase } => ("keyboard", Some(phase), None, 1.0),
            Condition::Reach { spread, time_rate } => ("reach", None, Some(spread), time_rate),
        };
        rows.push(ManifestRow {
            path: format!("{}/{name}", job.condition.label()),
            modality: modality.to_string(),
            phase,
            spread_m,
            time_rate,
            game: job.game,
            seed: job.seed,
            score: log.final_score(),
            frames: log.frames(),
            sha256: log.sha256(),
        });
    }
    write_manifest(&out_dir.join(MANIFEST_FILE), &rows)?;
    Ok(rows)
}

/// All `.jsonl` files below `dir`, sorted by path.
pub fn find_logs(dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(dir) {
        let entry = entry.map_err(|e| ExperimentError::Io {
            path: dir.to_path_buf(),
            source: e.into(),
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "jsonl") {
            out.push(entry.into_path());
        }
    }
    out.sort();
    Ok(out)
}

pub fn load_log(path: &Path) -> Result<EventLog, ExperimentError> {
    EventLog::load(path).map_err(|source| ExperimentError::Log {
        path: path.to_path_buf(),
        source,
    })
}

/// Fits the reference model on every log below `baseline_dir`.
pub fn cmd_fit(baseline_dir: &Path) -> Result<RefModel, ExperimentError> {
    if !baseline_dir.is_dir() {
        return Err(ExperimentError::NoLogs(baseline_dir.to_path_buf()));
    }
    let paths = find_logs(baseline_dir)?;
    if paths.is_empty() {
        return Err(ExperimentError::NoLogs(baseline_dir.to_path_buf()));
    }
    let logs = paths.iter().map(|p| load_log(p)).collect::<Result<Vec<_>, _>>()?;
    Ok(crate::model::fit_reference(&logs)?)
}

pub fn load_model(path: &Path) -> Result<RefModel, ExperimentError> {
    RefModel::load(path).map_err(|source| ExperimentError::ModelFile {
        path: path.to_path_buf(),
        source,
    })
}
