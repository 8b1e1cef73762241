//! Behavioural features and score normalisation from event logs.
//!
//! - IKI: frames between consecutive issued commands.
//! - PTT: frames Pac-Man stood still between consecutive turns. A turn is
//!   any heading change the game applied; a change applied while stalled
//!   is stamped on the frame motion resumes, so the stall counts towards it.

use serde::{Deserialize, Serialize};

use crate::game::{EventKind, EventLog};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSeries {
    pub iki: Vec<u64>,
    pub ptt: Vec<u64>,
    /// Frame at which each IKI sample became observable (the later command).
    pub iki_frames: Vec<u64>,
    /// Frame at which each PTT sample became observable (the later turn).
    pub ptt_frames: Vec<u64>,
}

impl FeatureSeries {
    pub fn from_log(log: &EventLog) -> Self {
        let (iki, iki_frames) = iki_with_frames(log);
        let (ptt, ptt_frames) = ptt_with_frames(log);
        Self {
            iki,
            ptt,
            iki_frames,
            ptt_frames,
        }
    }

    pub fn iki_f64(&self) -> Vec<f64> {
        self.iki.iter().map(|&v| v as f64).collect()
    }

    pub fn ptt_f64(&self) -> Vec<f64> {
        self.ptt.iter().map(|&v| v as f64).collect()
    }

    /// Frames at which any feature sample arrived, sorted.
    pub fn sample_frames(&self) -> Vec<u64> {
        let mut all: Vec<u64> = self.iki_frames.iter().chain(&self.ptt_frames).copied().collect();
        all.sort_unstable();
        all
    }

    /// Mean gap between consecutive feature samples, in frames.
    pub fn mean_sample_gap(&self) -> Option<f64> {
        let frames = self.sample_frames();
        if frames.len() < 2 {
            return None;
        }
        let span = frames[frames.len() - 1] - frames[0];
        Some(span as f64 / (frames.len() - 1) as f64)
    }
}

pub fn extract_iki(log: &EventLog) -> Vec<u64> {
    iki_with_frames(log).0
}

pub fn extract_ptt(log: &EventLog) -> Vec<u64> {
    ptt_with_frames(log).0
}

fn iki_with_frames(log: &EventLog) -> (Vec<u64>, Vec<u64>) {
    let frames: Vec<u64> = log.commands().map(|(f, _)| f).collect();
    let iki = frames.windows(2).map(|w| w[1].saturating_sub(w[0])).collect();
    let at = frames.iter().skip(1).copied().collect();
    (iki, at)
}

fn ptt_with_frames(log: &EventLog) -> (Vec<u64>, Vec<u64>) {
    let mut ptt = Vec::new();
    let mut at = Vec::new();
    let mut last_turn: Option<u64> = None;
    let mut still = 0u64;
    for e in log.iter() {
        match e.kind {
            EventKind::Turn { .. } => {
                if last_turn.is_some() {
                    ptt.push(still);
                    at.push(e.frame);
                }
                last_turn = Some(e.frame);
                still = 0;
            }
            EventKind::Motion { moved: false, .. } => {
                if matches!(last_turn, Some(t) if e.frame > t) {
                    still += 1;
                }
            }
            _ => {}
        }
    }
    (ptt, at)
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TelemetryError {
    #[error("keyboard mean score must be positive, got {0}")]
    DivisionByZero(f64),
}

/// Score relative to the mean keyboard score.
pub fn nscore(score: u32, keyboard_mean: f64) -> Result<f64, TelemetryError> {
    if keyboard_mean <= 0.0 || !keyboard_mean.is_finite() {
        return Err(TelemetryError::DivisionByZero(keyboard_mean));
    }
    Ok(f64::from(score) / keyboard_mean)
}

/// One row of the per-session metrics CSV.
///
/// Header: `session,score,nscore,ll,nll,ll_iki,ll_ptt,n_iki,n_ptt,frames,frames_per_score_sample,frames_per_ll_sample`.
/// Undefined values are written as `NaN`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub session: String,
    pub score: u32,
    pub nscore: f64,
    pub ll: f64,
    pub nll: f64,
    pub ll_iki: f64,
    pub ll_ptt: f64,
    pub n_iki: usize,
    pub n_ptt: usize,
    pub frames: u64,
    /// One score observation per completed game.
    pub frames_per_score_sample: f64,
    pub frames_per_ll_sample: f64,
}

pub fn write_metrics_csv<W: std::io::Write>(out: W, rows: &[SessionMetrics]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: std::io::Read>(input: R) -> csv::Result<Vec<SessionMetrics>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Command, EventKind};
    use proptest::prelude::*;

    fn log_with(commands: &[u64], turns: &[u64], still: &[u64], frames: u64) -> EventLog {
        let mut log = EventLog::new();
        for f in 0..frames {
            if commands.contains(&f) {
                log.push(f, f as f64, EventKind::Command { command: Command::Up });
            }
            if turns.contains(&f) {
                log.push(
                    f,
                    f as f64,
                    EventKind::Turn {
                        from: Command::Left,
                        to: Command::Up,
                    },
                );
            }
            log.push(
                f,
                f as f64,
                EventKind::Motion {
                    moved: !still.contains(&f),
                    steps: None,
                },
            );
        }
        log
    }

    #[test]
    fn iki_is_successive_difference() {
        let log = log_with(&[10, 25, 27], &[], &[], 30);
        assert_eq!(extract_iki(&log), vec![15, 2]);
        assert_eq!(extract_iki(&log_with(&[4], &[], &[], 10)), Vec::<u64>::new());
    }

    #[test]
    fn same_frame_commands_give_zero() {
        let mut log = EventLog::new();
        log.push(3, 50.0, EventKind::Command { command: Command::Up });
        log.push(3, 51.0, EventKind::Command { command: Command::Left });
        assert_eq!(extract_iki(&log), vec![0]);
    }

    #[test]
    fn ptt_counts_stalls_between_turns() {
        let log = log_with(&[], &[5, 9], &[6, 7], 12);
        assert_eq!(extract_ptt(&log), vec![2]);
        let smooth = log_with(&[], &[2, 5, 11, 15], &[], 20);
        assert_eq!(extract_ptt(&smooth), vec![0, 0, 0]);
        // stalls before the first turn belong to no pair
        let early = log_with(&[], &[5, 9], &[1, 2, 3], 12);
        assert_eq!(extract_ptt(&early), vec![0]);
    }

    #[test]
    fn nscore_examples() {
        assert_eq!(nscore(4390, 4390.0).unwrap(), 1.0);
        assert_eq!(nscore(0, 17.0).unwrap(), 0.0);
        assert_eq!(nscore(2195, 4390.0).unwrap(), 0.5);
        assert_eq!(nscore(10, 0.0), Err(TelemetryError::DivisionByZero(0.0)));
    }

    #[test]
    fn sample_gap() {
        let log = log_with(&[10, 20, 40], &[15, 35], &[], 50);
        let f = FeatureSeries::from_log(&log);
        // samples at frames 20, 35 (ptt), 40
        assert_eq!(f.sample_frames(), vec![20, 35, 40]);
        assert_eq!(f.mean_sample_gap(), Some(10.0));
    }

    #[test]
    fn metrics_csv_round_trip() {
        let row = SessionMetrics {
            session: "keyboard/pre/game_000".into(),
            score: 1230,
            nscore: 0.9,
            ll: -4.5,
            nll: 1.01,
            ll_iki: -4.0,
            ll_ptt: -0.5,
            n_iki: 40,
            n_ptt: 50,
            frames: 2400,
            frames_per_score_sample: 2400.0,
            frames_per_ll_sample: f64::NAN,
        };
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, std::slice::from_ref(&row)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("session,score,nscore,ll,nll,ll_iki,ll_ptt,n_iki,n_ptt,frames,"));
        let back = read_metrics_csv(buf.as_slice()).unwrap();
        assert_eq!(back[0].score, 1230);
        assert!(back[0].frames_per_ll_sample.is_nan());
    }

    proptest! {
        #[test]
        fn iki_sums_to_command_span(mut frames in proptest::collection::vec(0u64..5000, 1..80)) {
            frames.sort_unstable();
            let log = log_with(&frames, &[], &[], 5001);
            let iki = extract_iki(&log);
            let distinct: Vec<u64> = { let mut d = frames.clone(); d.dedup(); d };
            prop_assert_eq!(iki.len(), distinct.len() - 1);
            prop_assert_eq!(iki.iter().sum::<u64>(), distinct[distinct.len() - 1] - distinct[0]);
            prop_assert_eq!(extract_iki(&log), iki);
        }
    }
}
