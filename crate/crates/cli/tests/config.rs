use std::fs;

use hredq::config::{Derivable, KEYS};
use hredq::{load_config, preset, preset_names, ConfigSources, ExperimentConfig, Family};
use hredq_core::agent::TargetMode;

fn load_file(text: &str, overrides: &[String]) -> anyhow::Result<ExperimentConfig> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    fs::write(&path, text).unwrap();
    let sources = ConfigSources {
        file: Some(&path),
        overrides,
        ..ConfigSources::default()
    };
    load_config(&sources).map(|(c, _)| c)
}

fn load_preset(name: &str) -> ExperimentConfig {
    let sources = ConfigSources {
        preset: Some(name),
        ..ConfigSources::default()
    };
    load_config(&sources).unwrap().0
}

#[test]
fn empty_file_gives_the_table_defaults() {
    let c = load_file("", &[]).unwrap();
    assert_eq!(
        (c.replay_ratio, c.ensemble_size, c.target_subset),
        (20, 5, 2)
    );
    assert_eq!((c.learning_rate, c.gamma, c.tau), (3e-4, 0.99, 0.005));
    assert_eq!((c.buffer_capacity, c.batch_size), (1_000_000, 256));
    assert_eq!((c.hidden_layers, c.hidden_units), (2, 256));
    let (lo, hi) = c.q_bounds();
    assert!((lo + 100.0).abs() < 1e-9);
    assert_eq!(hi, 0.0);
}

#[test]
fn comments_and_blank_lines_are_ignored() {
    let c = load_file("# a comment\n\n  seed = 7  \n", &[]).unwrap();
    assert_eq!(c.seed, 7);
}

#[test]
fn random_start_depends_on_hindsight() {
    assert_eq!(load_preset("redq+her").random_start(), 10_000);
    assert_eq!(load_preset("redq+bq").random_start(), 5_000);
    let c = load_file("random_start_steps = 123\n", &[]).unwrap();
    assert_eq!(c.random_start(), 123);
}

#[test]
fn derived_bounds_follow_an_overridden_gamma() {
    let c = load_file("", &["gamma=0.9".into()]).unwrap();
    let (lo, hi) = c.q_bounds();
    assert!((lo + 10.0).abs() < 1e-12);
    assert_eq!(hi, 0.0);
    let c = load_file("q_min = -3\n", &["gamma=0.9".into()]).unwrap();
    assert_eq!(c.q_min, Derivable::Given(-3.0));
}

#[test]
fn errors_name_the_offending_key() {
    let err = format!("{:#}", load_file("learning_rat = 0.1\n", &[]).unwrap_err());
    assert!(err.contains("learning_rat"), "{err}");
    let err = format!("{:#}", load_file("batch_size = lots\n", &[]).unwrap_err());
    assert!(err.contains("batch_size"), "{err}");
    let err = format!(
        "{:#}",
        load_file("", &["use_her=maybe".into()]).unwrap_err()
    );
    assert!(err.contains("use_her"), "{err}");
    let err = format!("{:#}", load_file("target_subset = 9\n", &[]).unwrap_err());
    assert!(err.contains("target_subset"), "{err}");
}

#[test]
fn later_sources_win() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    fs::write(&path, "replay_ratio = 7\nseed = 1\n").unwrap();
    let overrides = vec!["seed=3".to_string()];
    let sources = ConfigSources {
        file: Some(&path),
        preset: Some("redq+her+bq-cdq/ent+rr1"),
        flags: vec![("seed", "2".into()), ("env", "point_push".into())],
        overrides: &overrides,
    };
    let (c, expansion) = load_config(&sources).unwrap();
    // the file beats the preset, flags beat the file, overrides beat flags
    assert_eq!(c.replay_ratio, 7);
    assert_eq!(c.seed, 3);
    assert_eq!(c.env, "point_push");
    assert!(expansion.contains(&("replay_ratio", "1".to_string())));
}

#[test]
fn presets_expand_to_their_flag_sets() {
    let c = load_preset("redq");
    assert_eq!(
        (c.family, c.use_her, c.use_bq),
        (Family::Redq, false, false)
    );
    assert_eq!(
        (c.ensemble_size, c.target_subset, c.replay_ratio),
        (5, 2, 20)
    );
    assert!(c.use_layer_norm);
    assert_eq!(c.target_mode, TargetMode::CdqEntropy);

    let c = load_preset("redq+her+bq");
    assert!(c.use_her && c.use_bq);

    let c = load_preset("redq+her+bq-cdq/ent");
    assert_eq!(c.target_mode, TargetMode::EnsembleMean);
    assert!(c.use_her && c.use_bq);

    let c = load_preset("redq+her+bq-cdq/ent+rr1");
    assert_eq!(
        (c.target_mode, c.replay_ratio),
        (TargetMode::EnsembleMean, 1)
    );

    let c = load_preset("redq+her+bq-cdq/ent-reg");
    assert_eq!((c.ensemble_size, c.use_layer_norm), (2, false));
    assert_eq!(c.target_mode, TargetMode::EnsembleMean);

    for k in [1usize, 4, 9] {
        let c = load_preset(&format!("reset({k})+her+bq"));
        assert_eq!(
            (c.family, c.num_resets, c.ensemble_size),
            (Family::Reset, k, 2)
        );
        assert!(c.use_her && c.use_bq);
        let c = load_preset(&format!("reset({k})"));
        assert!(!c.use_her && !c.use_bq);
    }
}

#[test]
fn preset_expansion_is_injective() {
    let names = preset_names();
    assert_eq!(names.len(), 7 + 12);
    let mut seen = Vec::new();
    for n in &names {
        let mut c = ExperimentConfig::default();
        for (k, v) in preset(n).unwrap() {
            c.set(k, &v).unwrap();
        }
        assert!(!seen.contains(&c), "{n} collides with another preset");
        seen.push(c);
    }
    assert!(preset("reset(2)").is_err());
    assert!(preset("redq+her+her").is_err());
}

#[test]
fn expanded_text_reproduces_the_config() {
    let mut c = load_preset("reset(4)+her+bq");
    c.set("gamma", "0.95").unwrap();
    let text = c.to_text();
    for k in KEYS {
        assert!(text.contains(&format!("{k} = ")), "{k} missing");
    }
    let back = ExperimentConfig::from_text(&text).unwrap();
    assert_eq!(back.expanded(), c.expanded());
    assert_eq!(back.q_bounds(), c.q_bounds());
    assert_eq!(back.random_start(), c.random_start());
}

#[test]
fn reset_family_requires_two_critics() {
    let err = format!(
        "{:#}",
        load_file("family = reset\nnum_resets = 1\n", &[]).unwrap_err()
    );
    assert!(err.contains("ensemble_size"), "{err}");
}
