use std::fs;
use std::path::Path;

use cgrl::guidance::GuidanceMode;
use cgrl::harness::{
    eval_command, evaluate, read_metrics, sweep_command, train_command, EnvKind, EvalSummary,
    ExperimentConfig, HarnessError, CHECKPOINT_FILE, CONFIG_FILE, METRICS_FILE, SUMMARY_FILE,
};
use cgrl::neural::{ActorCritic, NetSpec};

fn tiny(env: EnvKind, guidance: GuidanceMode, out: &Path) -> ExperimentConfig {
    let mut config = ExperimentConfig {
        env,
        guidance,
        total_frames: 64,
        out: out.to_path_buf(),
        ..ExperimentConfig::default()
    };
    config.ppo.num_envs = 2;
    config.ppo.rollout_len = 16;
    config.ppo.minibatches = 2;
    config
}

#[test]
fn update_count_and_metrics_layout() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig {
        total_frames: 1000,
        out: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    config.ppo.num_envs = 4;
    let outcome = train_command(&config).unwrap();
    assert_eq!(outcome.rows.len(), 2);

    let text = fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "frames,updates,return_mean,return_max,episode_len_mean,invalid_action_count,duplicate_pickup_count,policy_loss,value_loss,entropy"
    );
    assert_eq!(lines.count(), 2);

    let rows = read_metrics(text.as_bytes()).unwrap();
    assert_eq!(rows, outcome.rows);
    assert_eq!(rows[0].frames, 512);
    assert_eq!(rows[1].frames, 1024);
    for pair in rows.windows(2) {
        assert!(pair[0].frames <= pair[1].frames);
    }
    for row in &rows {
        assert!(row.return_max >= row.return_mean);
    }
    assert!(dir.path().join(CHECKPOINT_FILE).exists());
    let recorded = ExperimentConfig::load(&dir.path().join(CONFIG_FILE)).unwrap();
    assert_eq!(recorded, config);
}

#[test]
fn action_mask_training_logs_no_invalid_actions() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny(EnvKind::CardGame, GuidanceMode::ActionMask, dir.path());
    config.total_frames = 4096;
    config.ppo.num_envs = 8;
    config.ppo.rollout_len = 64;
    let outcome = train_command(&config).unwrap();
    assert_eq!(outcome.rows.len(), 8);
    assert!(outcome.rows.iter().all(|r| r.invalid_action_count == 0));

    // the unguided agent does hit invalid moves early on
    config.guidance = GuidanceMode::None;
    config.out = dir.path().join("none");
    let outcome = train_command(&config).unwrap();
    assert!(outcome.rows.iter().any(|r| r.invalid_action_count > 0));
}

#[test]
fn invalid_config_is_rejected_by_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny(EnvKind::CardGame, GuidanceMode::None, dir.path());
    config.total_frames = 8;
    let err = train_command(&config).unwrap_err();
    assert!(matches!(&err, HarnessError::Config { field, .. } if field == "total_frames"), "{err}");
    assert!(!dir.path().join(METRICS_FILE).exists());
}

#[test]
fn eval_with_no_episodes_is_empty() {
    let net = ActorCritic::new(NetSpec::card_game(), 0).unwrap();
    let config = ExperimentConfig::default();
    assert_eq!(
        evaluate(&net, &config, 0).unwrap(),
        EvalSummary::default()
    );
}

#[test]
fn eval_of_random_policy_under_action_mask_is_safe_and_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.bin");
    let net = ActorCritic::new(NetSpec::card_game(), 21).unwrap();
    cgrl::neural::checkpoint::save(&net, &path).unwrap();
    let config = ExperimentConfig {
        guidance: GuidanceMode::ActionMask,
        seed: 5,
        ..ExperimentConfig::default()
    };
    let a = eval_command(&path, &config, 100).unwrap();
    let b = eval_command(&path, &config, 100).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.episodes, 100);
    assert_eq!(a.invalid_actions, 0);
    assert!(a.return_max >= a.return_mean && a.return_std >= 0.0);
}

#[test]
fn eval_rejects_checkpoint_for_other_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("card.bin");
    cgrl::neural::checkpoint::save(&ActorCritic::new(NetSpec::card_game(), 1).unwrap(), &path).unwrap();
    let config = ExperimentConfig {
        env: EnvKind::GridWorld,
        ..ExperimentConfig::default()
    };
    let err = eval_command(&path, &config, 1).unwrap_err();
    assert!(matches!(err, HarnessError::Mismatch(_)), "{err}");
}

#[test]
fn sweep_writes_one_metrics_file_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let base = tiny(EnvKind::CardGame, GuidanceMode::None, dir.path());
    let outcome = sweep_command(&base, &GuidanceMode::ALL, &[0, 1, 2], false).unwrap();
    assert_eq!(outcome.cells.len(), 12);
    let metrics = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path().join(METRICS_FILE);
            p.exists().then_some(p)
        })
        .count();
    assert_eq!(metrics, 12);
    assert!(dir.path().join(SUMMARY_FILE).exists());
    let summary = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(summary.starts_with("guidance,runs,failed,final_return_mean,final_return_std\n"));
    assert!(outcome.summary.iter().all(|s| s.runs == 3 && s.failed == 0));
}

#[test]
fn parallel_sweep_matches_sequential() {
    let seq_dir = tempfile::tempdir().unwrap();
    let par_dir = tempfile::tempdir().unwrap();
    let modes = [GuidanceMode::None, GuidanceMode::ActionMask];
    let seq = sweep_command(&tiny(EnvKind::CardGame, GuidanceMode::None, seq_dir.path()), &modes, &[3, 4], false).unwrap();
    let par = sweep_command(&tiny(EnvKind::CardGame, GuidanceMode::None, par_dir.path()), &modes, &[3, 4], true).unwrap();
    assert_eq!(seq.summary, par.summary);
    for cell in &seq.cells {
        let name = cell.out.file_name().unwrap();
        assert_eq!(
            fs::read(cell.out.join(METRICS_FILE)).unwrap(),
            fs::read(par_dir.path().join(name).join(METRICS_FILE)).unwrap()
        );
    }
}

#[test]
fn single_seed_std_is_zero_and_failures_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    // a plain file where the cell directory should go makes that cell fail
    fs::write(dir.path().join("obs-mask-seed0"), b"in the way").unwrap();
    let base = tiny(EnvKind::CardGame, GuidanceMode::None, dir.path());
    let modes = [GuidanceMode::None, GuidanceMode::ObservationMask];
    let outcome = sweep_command(&base, &modes, &[0], false).unwrap();
    let none = &outcome.summary[0];
    assert_eq!(none.final_return_std, Some(0.0));
    assert_eq!(none.runs, 1);
    let obs = &outcome.summary[1];
    assert_eq!((obs.runs, obs.failed), (0, 1));
    assert_eq!(obs.final_return_mean, None);
    assert!(outcome.cells[1].result.is_err());
    let summary = fs::read_to_string(&outcome.summary_path).unwrap();
    assert!(summary.contains("obs-mask,0,1,,"));
}

#[test]
fn sweep_needs_guidance_and_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let base = tiny(EnvKind::CardGame, GuidanceMode::None, dir.path());
    assert!(sweep_command(&base, &[], &[0], false).is_err());
    assert!(sweep_command(&base, &[GuidanceMode::None], &[], false).is_err());
}

#[test]
fn grid_world_training_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny(EnvKind::GridWorld, GuidanceMode::ActionReplacement, dir.path());
    config.step_cap = Some(20);
    let outcome = train_command(&config).unwrap();
    assert_eq!(outcome.rows.len(), 2);
    assert!(outcome.rows.iter().all(|r| r.duplicate_pickup_count == 0));
    assert!(outcome.rows.iter().all(|r| r.episode_len_mean <= 20.0));
}
