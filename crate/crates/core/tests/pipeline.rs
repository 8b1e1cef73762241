//! End-to-end run, fit, score and analyze on a small plan.

use pacfit_core::experiment::{
    analyze, cmd_fit, cmd_run, load_log, load_model, read_manifest, score_logs, write_report, ExperimentPlan,
};
use pacfit_core::game::EventKind;
use pacfit_core::model::RefModel;
use pacfit_core::telemetry::{extract_iki, extract_ptt, read_metrics_csv};

fn plan() -> ExperimentPlan {
    ExperimentPlan {
        spread_levels: vec![0.1, 0.4],
        time_rates: vec![1.0 / 3.0, 1.0],
        games_per_cell: 5,
        baseline_games: 8,
        master_seed: 11,
        ..ExperimentPlan::standard()
    }
}

#[test]
fn run_fit_analyze_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let rows = cmd_run(&plan(), &run).unwrap();
    assert_eq!(rows.len(), 8 + 4 * 5);
    assert_eq!(read_manifest(&run).unwrap(), rows);

    // logs on disk match the manifest and satisfy the feature-length invariants
    for r in &rows {
        let log = load_log(&run.join(&r.path)).unwrap();
        assert_eq!(log.sha256(), r.sha256);
        assert_eq!(log.final_score(), r.score);
        let commands = log.commands().count();
        let turns = log.iter().filter(|e| matches!(e.kind, EventKind::Turn { .. })).count();
        assert_eq!(extract_iki(&log).len(), commands.saturating_sub(1));
        assert_eq!(extract_ptt(&log).len(), turns.saturating_sub(1));
    }

    let model = cmd_fit(&run.join("keyboard")).unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded, model);
    assert_eq!(RefModel::from_json(&model.to_json()).unwrap(), model);
    assert_eq!(cmd_fit(&run.join("keyboard")).unwrap().to_json(), model.to_json());

    let (report, games) = analyze(&run, &model).unwrap();
    assert_eq!(games.len(), rows.len());
    assert!((-1.0..=1.0).contains(&report.full.r));
    let kb = report.condition("keyboard").unwrap();
    assert!((kb.nscore_mean - 1.0).abs() < 1e-12);
    assert_eq!(report.conditions.len(), 3 + 4);

    let out = dir.path().join("report");
    write_report(&report, &games, &out).unwrap();
    let per_game = read_metrics_csv(std::fs::File::open(out.join("per_game.csv")).unwrap()).unwrap();
    assert_eq!(per_game.len(), games.len());
    for (a, b) in per_game.iter().zip(&games) {
        assert_eq!(a.session, b.session);
        assert_eq!(a.score, b.score);
        assert!((a.nll - b.nll).abs() < 1e-12 || (a.nll.is_nan() && b.nll.is_nan()));
    }

    // scoring a run directory matches the analysis; loose logs have no NSCORE
    assert_eq!(score_logs(&run, &model).unwrap(), games);
    let loose = score_logs(&run.join("reach"), &model).unwrap();
    assert_eq!(loose.len(), 20);
    assert!(loose.iter().all(|g| g.nscore.is_nan()));
    let single = score_logs(&run.join(&rows[0].path), &model).unwrap();
    assert_eq!(single.len(), 1);
    assert_eq!(single[0].ll, games[0].ll);
}
