use irrl_core::cropsim::replay_actions;
use irrl_core::learner::{evaluate, initial_parameters, train, TrainConfig};
use irrl_core::policy::{load_checkpoint, save_checkpoint, Architecture, InputScaling};
use irrl_core::synthetic::{synthetic_pool, synthetic_year};
use irrl_core::weather::{load_weather_dir, write_weather_file};
use irrl_core::{EnvConfig, WeatherPool};

fn quick_config() -> TrainConfig {
    TrainConfig {
        episodes_n: 60,
        alpha: 1e-5,
        init_scale: 0.1,
        ma_order: 10,
        ..TrainConfig::default()
    }
}

#[test]
fn weather_written_to_disk_trains_like_in_memory_weather() {
    let dir = tempfile::tempdir().unwrap();
    let pool = synthetic_pool(1981, 3, 4).unwrap();
    for y in pool.years() {
        write_weather_file(y, dir.path()).unwrap();
    }
    let reread = WeatherPool::new(load_weather_dir(dir.path()).unwrap()).unwrap();
    assert_eq!(reread.years(), pool.years());

    let env = EnvConfig::default();
    let config = quick_config();
    let arch = Architecture::new(vec![5]);
    let init = || initial_parameters(&config, &arch, Some(InputScaling::centered())).unwrap();
    let a = train(&config, init(), &env, &pool, |_, _| {}).unwrap();
    let b = train(&config, init(), &env, &reread, |_, _| {}).unwrap();
    assert_eq!(a.log.rows, b.log.rows);
    assert_eq!(a.best, b.best);
}

#[test]
fn checkpoint_on_disk_evaluates_identically() {
    let dir = tempfile::tempdir().unwrap();
    let pool = synthetic_pool(1981, 2, 0).unwrap();
    let env = EnvConfig::default();
    let config = quick_config();
    let arch = Architecture::new(vec![4, 3]);
    let initial = initial_parameters(&config, &arch, Some(InputScaling::typical_magnitudes())).unwrap();
    let out = train(&config, initial, &env, &pool, |_, _| {}).unwrap();

    let path = dir.path().join("best.ckpt");
    save_checkpoint(&out.best, &path).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded, out.best);

    let test = synthetic_year(1995, 0);
    let e1 = evaluate(&out.best, &env, &test, 4, 11).unwrap();
    let e2 = evaluate(&loaded, &env, &test, 4, 11).unwrap();
    assert_eq!(e1.mean, e2.mean);
    for t in &e1.traces {
        let r = replay_actions(&env, &test, &t.action_indices()).unwrap();
        assert_eq!(r.profit, t.profit);
        assert_eq!(r.yield_kg_ha, t.yield_kg_ha);
    }
}

#[test]
fn log_rows_cover_every_episode_with_pool_years() {
    let pool = synthetic_pool(2001, 4, 2).unwrap();
    let ids: Vec<i32> = pool.years().iter().map(|y| y.year_id).collect();
    let config = quick_config();
    let initial = initial_parameters(&config, &Architecture::new(vec![]), None).unwrap();
    let out = train(&config, initial, &EnvConfig::default(), &pool, |_, _| {}).unwrap();
    assert_eq!(out.log.rows.len(), config.episodes_n);
    for (i, row) in out.log.rows.iter().enumerate() {
        assert_eq!(row.episode, i + 1);
        assert!(ids.contains(&row.year_id));
        assert!(row.length > 0);
    }
    assert!((1..=config.episodes_n).contains(&out.log.best_episode));
}
