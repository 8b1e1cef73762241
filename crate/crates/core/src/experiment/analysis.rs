//! Scoring a run against a reference model and summarising the result.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{mean, regress, sd, Regression};
use super::{io_err, load_log, read_manifest, Condition, ExperimentError, ManifestRow};
use crate::game::EventLog;
use crate::model::{ll_iki, ll_ptt, nll, RefModel};
use crate::telemetry::{nscore, write_metrics_csv, FeatureSeries, SessionMetrics};

/// Fewest games with a defined NLL that an analysis accepts.
pub const MIN_SCORED_GAMES: usize = 3;

fn metrics(session: String, log: &EventLog, model: &RefModel, keyboard_mean: f64) -> SessionMetrics {
    let features = &FeatureSeries::from_log(log);
    let (score, frames) = (log.final_score(), log.frames());
    let a = ll_iki(features, &model.iki).unwrap_or(f64::NAN);
    let b = ll_ptt(features, &model.ptt).unwrap_or(f64::NAN);
    let ll = a + b;
    SessionMetrics {
        session,
        score,
        nscore: nscore(score, keyboard_mean).unwrap_or(f64::NAN),
        ll,
        nll: nll(ll, model).unwrap_or(f64::NAN),
        ll_iki: a,
        ll_ptt: b,
        n_iki: features.iki.len(),
        n_ptt: features.ptt.len(),
        frames,
        frames_per_score_sample: frames as f64,
        frames_per_ll_sample: features.mean_sample_gap().unwrap_or(f64::NAN),
    }
}

/// Per-game metrics for every log in a run directory, in manifest order.
/// NSCORE is relative to the mean score of the run's own keyboard games.
pub fn score_run(run_dir: &Path, model: &RefModel) -> Result<(Vec<ManifestRow>, Vec<SessionMetrics>), ExperimentError> {
    let rows = read_manifest(run_dir)?;
    let kb: Vec<f64> = rows
        .iter()
        .filter(|r| r.is_keyboard())
        .map(|r| f64::from(r.score))
        .collect();
    let keyboard_mean = mean(&kb);
    if kb.is_empty() || keyboard_mean <= 0.0 {
        log::warn!("no keyboard games with a positive mean score; NSCORE undefined");
    }
    let out = rows
        .iter()
        .map(|r| {
            let log = load_log(&run_dir.join(&r.path))?;
            Ok(metrics(r.path.clone(), &log, model, keyboard_mean))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok((rows, out))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub spread_m: Option<f64>,
    pub time_rate: f64,
    pub games: usize,
    pub scored_games: usize,
    pub nscore_mean: f64,
    pub nscore_sd: f64,
    pub nll_mean: f64,
    pub nll_sd: f64,
    pub frames_per_score_sample: f64,
    pub frames_per_ll_sample: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub keyboard_mean_score: f64,
    /// `keyboard` (pre and post pooled), then each phase, then reach cells.
    pub conditions: Vec<ConditionSummary>,
    /// NLL regressed on NSCORE over all reaching games.
    pub full: Regression,
    pub iki_only: Regression,
    pub ptt_only: Regression,
    /// Mean frames per completed reaching game.
    pub frames_per_score_sample: f64,
    /// Mean frames between feature samples in reaching games.
    pub frames_per_ll_sample: f64,
    pub warnings: Vec<String>,
}

impl AnalysisReport {
    pub fn condition(&self, label: &str) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|c| c.condition == label)
    }

    /// How many score samples one LL sample is worth, in frames.
    pub fn latency_ratio(&self) -> f64 {
        self.frames_per_score_sample / self.frames_per_ll_sample
    }
}

fn summarise(label: String, spread_m: Option<f64>, time_rate: f64, games: &[&SessionMetrics]) -> ConditionSummary {
    let scored: Vec<&SessionMetrics> = games.iter().copied().filter(|m| m.nll.is_finite()).collect();
    let ns: Vec<f64> = games.iter().map(|m| m.nscore).collect();
    let nl: Vec<f64> = scored.iter().map(|m| m.nll).collect();
    let per_ll: Vec<f64> = games
        .iter()
        .map(|m| m.frames_per_ll_sample)
        .filter(|v| v.is_finite())
        .collect();
    ConditionSummary {
        condition: label,
        spread_m,
        time_rate,
        games: games.len(),
        scored_games: scored.len(),
        nscore_mean: mean(&ns),
        nscore_sd: sd(&ns),
        nll_mean: mean(&nl),
        nll_sd: sd(&nl),
        frames_per_score_sample: mean(&games.iter().map(|m| m.frames_per_score_sample).collect::<Vec<_>>()),
        frames_per_ll_sample: mean(&per_ll),
    }
}

fn correlate(name: &str, x: &[f64], y: &[f64], warnings: &mut Vec<String>) -> Regression {
    regress(x, y).unwrap_or_else(|| {
        let w = format!("{name}: correlation undefined (zero variance or too few games); reported as NaN");
        log::warn!("{w}");
        warnings.push(w);
        Regression::nan(x.len())
    })
}

/// Builds the report from already scored games.
pub fn summarise_run(
    rows: &[ManifestRow],
    games: &[SessionMetrics],
    model: &RefModel,
) -> Result<AnalysisReport, ExperimentError> {
    let scored = games.iter().filter(|m| m.nll.is_finite()).count();
    if scored < MIN_SCORED_GAMES {
        return Err(ExperimentError::InsufficientData {
            needed: MIN_SCORED_GAMES,
            got: scored,
        });
    }
    let kb_scores: Vec<f64> = rows
        .iter()
        .filter(|r| r.is_keyboard())
        .map(|r| f64::from(r.score))
        .collect();
    let mut warnings = Vec::new();
    if kb_scores.is_empty() {
        warnings.push("run has no keyboard games; NSCORE undefined".to_string());
    }

    let mut conditions = Vec::new();
    let keyboard: Vec<&SessionMetrics> = rows
        .iter()
        .zip(games)
        .filter(|(r, _)| r.is_keyboard())
        .map(|p| p.1)
        .collect();
    if !keyboard.is_empty() {
        conditions.push(summarise("keyboard".into(), None, 1.0, &keyboard));
    }
    let mut order: Vec<Condition> = Vec::new();
    let mut groups: HashMap<String, Vec<&SessionMetrics>> = HashMap::new();
    for (r, m) in rows.iter().zip(games) {
        let c = r.condition();
        let label = c.label();
        if !groups.contains_key(&label) {
            order.push(c);
        }
        groups.entry(label).or_default().push(m);
    }
    for c in order {
        let (spread, rate) = match c {
            Condition::Keyboard { .. } => (None, 1.0),
            Condition::Reach { spread, time_rate } => (Some(spread), time_rate),
        };
        let label = c.label();
        conditions.push(summarise(label.clone(), spread, rate, &groups[&label]));
    }

    let sweep: Vec<&SessionMetrics> = rows
        .iter()
        .zip(games)
        .filter(|(r, _)| !r.is_keyboard())
        .map(|p| p.1)
        .collect();
    let usable: Vec<&SessionMetrics> = sweep
        .iter()
        .copied()
        .filter(|m| m.nll.is_finite() && m.nscore.is_finite())
        .collect();
    let ns: Vec<f64> = usable.iter().map(|m| m.nscore).collect();
    let full: Vec<f64> = usable.iter().map(|m| m.nll).collect();
    let iki: Vec<f64> = usable
        .iter()
        .map(|m| model.nll_iki(m.ll_iki).unwrap_or(f64::NAN))
        .collect();
    let ptt: Vec<f64> = usable
        .iter()
        .map(|m| model.nll_ptt(m.ll_ptt).unwrap_or(f64::NAN))
        .collect();
    let per_ll: Vec<f64> = sweep
        .iter()
        .map(|m| m.frames_per_ll_sample)
        .filter(|v| v.is_finite())
        .collect();

    Ok(AnalysisReport {
        keyboard_mean_score: mean(&kb_scores),
        conditions,
        full: correlate("NLL", &ns, &full, &mut warnings),
        iki_only: correlate("IKI-only NLL", &ns, &iki, &mut warnings),
        ptt_only: correlate("PTT-only NLL", &ns, &ptt, &mut warnings),
        frames_per_score_sample: mean(&sweep.iter().map(|m| m.frames_per_score_sample).collect::<Vec<_>>()),
        frames_per_ll_sample: mean(&per_ll),
        warnings,
    })
}

/// Per-game metrics for a single log, a run directory or any directory of
/// logs. Outside a run there is no keyboard reference, so NSCORE is NaN.
pub fn score_logs(path: &Path, model: &RefModel) -> Result<Vec<SessionMetrics>, ExperimentError> {
    if path.join(super::MANIFEST_FILE).is_file() {
        return Ok(score_run(path, model)?.1);
    }
    let paths = if path.is_file() {
        vec![path.to_path_buf()]
    } else {
        super::find_logs(path)?
    };
    if paths.is_empty() {
        return Err(ExperimentError::NoLogs(path.to_path_buf()));
    }
    paths
        .iter()
        .map(|p| {
            let log = load_log(p)?;
            Ok(metrics(p.display().to_string(), &log, model, f64::NAN))
        })
        .collect()
}

/// Scores and summarises a run directory.
pub fn analyze(run_dir: &Path, model: &RefModel) -> Result<(AnalysisReport, Vec<SessionMetrics>), ExperimentError> {
    let (rows, games) = score_run(run_dir, model)?;
    let report = summarise_run(&rows, &games, model)?;
    Ok((report, games))
}

/// Writes `per_game.csv`, `per_condition.csv`, `correlations.csv` and
/// `summary.txt` into `out_dir`.
pub fn write_report(report: &AnalysisReport, games: &[SessionMetrics], out_dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let per_game = out_dir.join("per_game.csv");
    let f = std::fs::File::create(&per_game).map_err(io_err(&per_game))?;
    write_metrics_csv(f, games).map_err(|source| ExperimentError::Csv { path: per_game, source })?;

    let per_condition = out_dir.join("per_condition.csv");
    write_rows(&per_condition, &report.conditions)?;

    let correlations = out_dir.join("correlations.csv");
    let rows = [
        ("full", report.full),
        ("iki_only", report.iki_only),
        ("ptt_only", report.ptt_only),
    ];
    let mut w = csv::Writer::from_path(&correlations).map_err(|source| ExperimentError::Csv {
        path: correlations.clone(),
        source,
    })?;
    w.write_record(["model", "n", "r", "slope", "intercept", "slope_stderr"])
        .map_err(|source| ExperimentError::Csv {
            path: correlations.clone(),
            source,
        })?;
    for (name, r) in rows {
        let rec = [
            name.to_string(),
            r.n.to_string(),
            r.r.to_string(),
            r.slope.to_string(),
            r.intercept.to_string(),
            r.slope_stderr.to_string(),
        ];
        w.write_record(&rec).map_err(|source| ExperimentError::Csv {
            path: correlations.clone(),
            source,
        })?;
    }
    w.flush().map_err(io_err(&correlations))?;

    let summary = out_dir.join("summary.txt");
    std::fs::write(&summary, report.to_string()).map_err(io_err(&summary))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ExperimentError> {
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

impl fmt::Display for AnalysisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "keyboard mean score: {:.1}", self.keyboard_mean_score)?;
        writeln!(f)?;
        writeln!(
            f,
            "{:<32} {:>5} {:>6} {:>13} {:>13}",
            "condition", "games", "scored", "NSCORE", "NLL"
        )?;
        for c in &self.conditions {
            writeln!(
                f,
                "{:<32} {:>5} {:>6} {:>6.3}±{:<6.3} {:>6.3}±{:<6.3}",
                c.condition, c.games, c.scored_games, c.nscore_mean, c.nscore_sd, c.nll_mean, c.nll_sd
            )?;
        }
        writeln!(f)?;
        writeln!(f, "NLL ~ NSCORE over reaching games:")?;
        for (name, r) in [
            ("full", &self.full),
            ("IKI only", &self.iki_only),
            ("PTT only", &self.ptt_only),
        ] {
            writeln!(
                f,
                "  {name:<9} n={:<4} r={:.3} slope={:.3} intercept={:.3} stderr={:.3}",
                r.n, r.r, r.slope, r.intercept, r.slope_stderr
            )?;
        }
        writeln!(f)?;
        writeln!(f, "frames per SCORE sample: {:.1}", self.frames_per_score_sample)?;
        writeln!(f, "frames per LL sample:    {:.1}", self.frames_per_ll_sample)?;
        writeln!(f, "ratio:                   {:.1}x", self.latency_ratio())?;
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExpParams, FitMetadata, GammaParams};

    fn model() -> RefModel {
        RefModel {
            iki: GammaParams::new(2.0, 0.0, 10.0),
            ptt: ExpParams::new(1.0),
            ll_ref_mean: -5.0,
            ll_ref_iki_mean: -4.0,
            ll_ref_ptt_mean: -1.0,
            meta: FitMetadata {
                n_games: 4,
                n_scored_games: 4,
                n_iki: 100,
                n_ptt: 100,
                location_fallback: false,
                iterations: 1,
            },
        }
    }

    fn row(path: &str, keyboard: bool, score: u32) -> ManifestRow {
        ManifestRow {
            path: path.into(),
            modality: if keyboard { "keyboard" } else { "reach" }.into(),
            phase: keyboard.then_some(super::super::Phase::Pre),
            spread_m: (!keyboard).then_some(0.1),
            time_rate: 1.0,
            game: 0,
            seed: 0,
            score,
            frames: 1000,
            sha256: String::new(),
        }
    }

    fn game(nscore: f64, nll: f64) -> SessionMetrics {
        let m = model();
        // split the LL so that both single-feature NLLs also track nll
        let ll = m.ll_ref_mean / nll;
        SessionMetrics {
            session: String::new(),
            score: 0,
            nscore,
            ll,
            nll,
            ll_iki: ll * 0.8,
            ll_ptt: ll * 0.2,
            n_iki: 10,
            n_ptt: 10,
            frames: 1000,
            frames_per_score_sample: 1000.0,
            frames_per_ll_sample: 20.0,
        }
    }

    #[test]
    fn perfect_agreement_gives_unit_correlation() {
        let rows: Vec<ManifestRow> = (0..5).map(|i| row(&format!("g{i}"), false, 100)).collect();
        let games: Vec<SessionMetrics> = [0.2, 0.5, 0.7, 0.9, 1.1].iter().map(|&v| game(v, v)).collect();
        let r = summarise_run(&rows, &games, &model()).unwrap();
        assert!((r.full.r - 1.0).abs() < 1e-12);
        assert!((r.full.slope - 1.0).abs() < 1e-12);
        assert!(r.full.intercept.abs() < 1e-12);
        assert!(r.iki_only.r > 0.999 && r.ptt_only.r > 0.999);
        assert_eq!(r.latency_ratio(), 50.0);
        assert!(r.warnings.iter().any(|w| w.contains("no keyboard")));
    }

    #[test]
    fn constant_nll_is_nan_with_warning() {
        let rows: Vec<ManifestRow> = (0..4).map(|i| row(&format!("g{i}"), false, 100)).collect();
        let games: Vec<SessionMetrics> = [0.2, 0.5, 0.7, 0.9].iter().map(|&v| game(v, 0.8)).collect();
        let r = summarise_run(&rows, &games, &model()).unwrap();
        assert!(r.full.r.is_nan());
        assert!(r.warnings.iter().any(|w| w.starts_with("NLL")));
    }

    #[test]
    fn too_few_scored_games() {
        let rows: Vec<ManifestRow> = (0..3).map(|i| row(&format!("g{i}"), i == 0, 100)).collect();
        let mut games: Vec<SessionMetrics> = (0..3).map(|_| game(1.0, 1.0)).collect();
        games[2].nll = f64::NAN;
        assert!(matches!(
            summarise_run(&rows, &games, &model()),
            Err(ExperimentError::InsufficientData { needed: 3, got: 2 })
        ));
    }
}
