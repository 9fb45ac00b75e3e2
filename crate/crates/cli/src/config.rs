//! Flat `key = value` experiment configuration and the named presets.
//!
//! Resolution order: built-in defaults, then the preset, then the config
//! file, then command-line values. `q_min`/`q_max` default to `derived`
//! (`-1 / (1 - gamma)` and `0`), and `random_start_steps` to `auto`
//! (10000 with hindsight relabeling, 5000 without).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use hredq_core::agent::{sparse_reward_bounds, AgentConfig, AlphaMode, TargetMode};
use hredq_core::env::AnyEnv;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Redq,
    Reset,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Redq => "redq",
            Family::Reset => "reset",
        }
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "redq" => Ok(Family::Redq),
            "reset" => Ok(Family::Reset),
            _ => Err("expected redq or reset".into()),
        }
    }
}

/// A value that is either given explicitly or computed from other settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Derivable<T> {
    Derived,
    Given(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: String,
    pub family: Family,
    pub preset: Option<String>,
    pub ensemble_size: usize,
    pub target_subset: usize,
    pub replay_ratio: usize,
    pub gamma: f64,
    pub tau: f64,
    pub q_min: Derivable<f64>,
    pub q_max: Derivable<f64>,
    pub use_bq: bool,
    pub target_mode: TargetMode,
    pub use_layer_norm: bool,
    pub alpha_mode: String,
    pub alpha: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub use_her: bool,
    pub her_relabel_count: usize,
    pub buffer_capacity: usize,
    pub random_start_steps: Derivable<u64>,
    pub num_resets: usize,
    pub total_env_steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub probe_batch_size: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let a = AgentConfig::default();
        Self {
            env: "point_reach".into(),
            family: Family::Redq,
            preset: None,
            ensemble_size: a.ensemble_size,
            target_subset: a.target_subset,
            replay_ratio: a.replay_ratio,
            gamma: a.gamma,
            tau: a.tau,
            q_min: Derivable::Derived,
            q_max: Derivable::Derived,
            use_bq: true,
            target_mode: a.target_mode,
            use_layer_norm: a.use_layer_norm,
            alpha_mode: "auto".into(),
            alpha: 1.0,
            batch_size: a.batch_size,
            learning_rate: a.learning_rate,
            hidden_layers: a.hidden_layers,
            hidden_units: a.hidden_units,
            use_her: true,
            her_relabel_count: 1,
            buffer_capacity: 1_000_000,
            random_start_steps: Derivable::Derived,
            num_resets: 0,
            total_env_steps: 100_000,
            eval_interval: 1000,
            eval_episodes: 10,
            probe_batch_size: 256,
            seed: 0,
        }
    }
}

/// Every accepted key, in the order the expanded config is written.
pub const KEYS: [&str; 29] = [
    "env",
    "family",
    "preset",
    "ensemble_size",
    "target_subset",
    "replay_ratio",
    "gamma",
    "tau",
    "q_min",
    "q_max",
    "use_bq",
    "target_mode",
    "use_layer_norm",
    "alpha_mode",
    "alpha",
    "batch_size",
    "learning_rate",
    "hidden_layers",
    "hidden_units",
    "use_her",
    "her_relabel_count",
    "buffer_capacity",
    "random_start_steps",
    "num_resets",
    "total_env_steps",
    "eval_interval",
    "eval_episodes",
    "probe_batch_size",
    "seed",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("{key}: cannot parse {value:?} ({e})"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => bail!("{key}: expected true or false, got {value:?}"),
    }
}

fn parse_derivable<T: FromStr>(key: &str, value: &str, word: &str) -> Result<Derivable<T>>
where
    T::Err: fmt::Display,
{
    if value == word {
        Ok(Derivable::Derived)
    } else {
        parse(key, value).map(Derivable::Given)
    }
}

impl ExperimentConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "env" => {
                if AnyEnv::from_id(v).is_none() {
                    bail!(
                        "env: unknown environment {v:?} (known: {})",
                        AnyEnv::IDS.join(", ")
                    );
                }
                self.env = v.into();
            }
            "family" => self.family = v.parse().map_err(|e| anyhow!("family: {e}"))?,
            "preset" => {
                self.preset = match v {
                    "" | "none" => None,
                    name => Some(name.into()),
                }
            }
            "ensemble_size" => self.ensemble_size = parse(key, v)?,
            "target_subset" => self.target_subset = parse(key, v)?,
            "replay_ratio" => self.replay_ratio = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "tau" => self.tau = parse(key, v)?,
            "q_min" => self.q_min = parse_derivable(key, v, "derived")?,
            "q_max" => self.q_max = parse_derivable(key, v, "derived")?,
            "use_bq" => self.use_bq = parse_bool(key, v)?,
            "target_mode" => {
                self.target_mode = TargetMode::parse(v).ok_or_else(|| {
                    anyhow!("target_mode: expected cdq_entropy or ensemble_mean, got {v:?}")
                })?
            }
            "use_layer_norm" => self.use_layer_norm = parse_bool(key, v)?,
            "alpha_mode" => match v {
                "auto" | "fixed" => self.alpha_mode = v.into(),
                _ => bail!("alpha_mode: expected auto or fixed, got {v:?}"),
            },
            "alpha" => self.alpha = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "hidden_layers" => self.hidden_layers = parse(key, v)?,
            "hidden_units" => self.hidden_units = parse(key, v)?,
            "use_her" => self.use_her = parse_bool(key, v)?,
            "her_relabel_count" => self.her_relabel_count = parse(key, v)?,
            "buffer_capacity" => self.buffer_capacity = parse(key, v)?,
            "random_start_steps" => self.random_start_steps = parse_derivable(key, v, "auto")?,
            "num_resets" => self.num_resets = parse(key, v)?,
            "total_env_steps" => self.total_env_steps = parse(key, v)?,
            "eval_interval" => self.eval_interval = parse(key, v)?,
            "eval_episodes" => self.eval_episodes = parse(key, v)?,
            "probe_batch_size" => self.probe_batch_size = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            _ => bail!("unknown key {key:?}"),
        }
        Ok(())
    }

    /// Applies every line of a flat `key = value` document. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{origin}:{}: expected key = value", n + 1))?;
            self.set(k.trim(), v)
                .with_context(|| format!("{origin}:{}", n + 1))?;
        }
        Ok(())
    }

    /// Applies a `key=value` override from the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("override {assignment:?}: expected key=value"))?;
        self.set(k.trim(), v)
    }

    pub fn q_bounds(&self) -> (f64, f64) {
        let (lo, hi) = sparse_reward_bounds(self.gamma);
        let pick = |d: Derivable<f64>, fallback| match d {
            Derivable::Derived => fallback,
            Derivable::Given(v) => v,
        };
        (pick(self.q_min, lo), pick(self.q_max, hi))
    }

    pub fn random_start(&self) -> u64 {
        match self.random_start_steps {
            Derivable::Given(v) => v,
            Derivable::Derived if self.use_her => 10_000,
            Derivable::Derived => 5_000,
        }
    }

    pub fn agent_config(&self) -> Result<AgentConfig> {
        let (q_min, q_max) = self.q_bounds();
        let alpha_mode = match self.alpha_mode.as_str() {
            "fixed" => AlphaMode::Fixed(self.alpha),
            _ => AlphaMode::Auto {
                initial: self.alpha,
            },
        };
        let c = AgentConfig {
            ensemble_size: self.ensemble_size,
            target_subset: self.target_subset,
            replay_ratio: self.replay_ratio,
            gamma: self.gamma,
            tau: self.tau,
            q_min,
            q_max,
            use_bq: self.use_bq,
            target_mode: self.target_mode,
            use_layer_norm: self.use_layer_norm,
            alpha_mode,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            hidden_layers: self.hidden_layers,
            hidden_units: self.hidden_units,
        };
        c.validate().map_err(|e| anyhow!("{e}"))?;
        Ok(c)
    }

    /// Checks cross-field invariants after all sources are applied.
    pub fn validate(&self) -> Result<()> {
        self.agent_config()?;
        if self.family == Family::Reset && (self.ensemble_size != 2 || self.target_subset != 2) {
            bail!("ensemble_size/target_subset: the reset family uses exactly two critics");
        }
        if self.family == Family::Redq && self.num_resets != 0 {
            bail!("num_resets: only the reset family resets");
        }
        if self.num_resets > 0 && self.total_env_steps < self.num_resets as u64 + 1 {
            bail!(
                "total_env_steps: {} resets need at least {} steps",
                self.num_resets,
                self.num_resets + 1
            );
        }
        if self.buffer_capacity == 0 {
            bail!("buffer_capacity must be positive");
        }
        if self.eval_interval == 0 {
            bail!("eval_interval must be positive");
        }
        if self.eval_episodes == 0 {
            bail!("eval_episodes must be positive");
        }
        if self.probe_batch_size == 0 {
            bail!("probe_batch_size must be positive");
        }
        Ok(())
    }

    /// Fully resolved `(key, value)` pairs in `KEYS` order; derived values
    /// are written out, so the result reproduces the run without presets.
    pub fn expanded(&self) -> Vec<(&'static str, String)> {
        let (q_min, q_max) = self.q_bounds();
        KEYS.iter()
            .map(|&k| {
                let v = match k {
                    "env" => self.env.clone(),
                    "family" => self.family.as_str().into(),
                    "preset" => self.preset.clone().unwrap_or_else(|| "none".into()),
                    "ensemble_size" => self.ensemble_size.to_string(),
                    "target_subset" => self.target_subset.to_string(),
                    "replay_ratio" => self.replay_ratio.to_string(),
                    "gamma" => self.gamma.to_string(),
                    "tau" => self.tau.to_string(),
                    "q_min" => q_min.to_string(),
                    "q_max" => q_max.to_string(),
                    "use_bq" => self.use_bq.to_string(),
                    "target_mode" => self.target_mode.as_str().into(),
                    "use_layer_norm" => self.use_layer_norm.to_string(),
                    "alpha_mode" => self.alpha_mode.clone(),
                    "alpha" => self.alpha.to_string(),
                    "batch_size" => self.batch_size.to_string(),
                    "learning_rate" => self.learning_rate.to_string(),
                    "hidden_layers" => self.hidden_layers.to_string(),
                    "hidden_units" => self.hidden_units.to_string(),
                    "use_her" => self.use_her.to_string(),
                    "her_relabel_count" => self.her_relabel_count.to_string(),
                    "buffer_capacity" => self.buffer_capacity.to_string(),
                    "random_start_steps" => self.random_start().to_string(),
                    "num_resets" => self.num_resets.to_string(),
                    "total_env_steps" => self.total_env_steps.to_string(),
                    "eval_interval" => self.eval_interval.to_string(),
                    "eval_episodes" => self.eval_episodes.to_string(),
                    "probe_batch_size" => self.probe_batch_size.to_string(),
                    "seed" => self.seed.to_string(),
                    _ => unreachable!("every key is listed"),
                };
                (k, v)
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        self.expanded()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text, "<config>")?;
        c.validate()?;
        Ok(c)
    }
}

/// Names accepted by [`preset`].
pub fn preset_names() -> Vec<String> {
    let mut names: Vec<String> = [
        "redq",
        "redq+her",
        "redq+bq",
        "redq+her+bq",
        "redq+her+bq-cdq/ent",
        "redq+her+bq-cdq/ent+rr1",
        "redq+her+bq-cdq/ent-reg",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for k in [1, 4, 9] {
        for suffix in ["", "+her", "+bq", "+her+bq"] {
            names.push(format!("reset({k}){suffix}"));
        }
    }
    names
}

/// The settings a preset fixes, as `(key, value)` assignments.
pub fn preset(name: &str) -> Result<Vec<(&'static str, String)>> {
    let s = |v: &str| v.to_string();
    let base = |her: bool, bq: bool| {
        vec![
            ("family", s("redq")),
            ("use_her", her.to_string()),
            ("use_bq", bq.to_string()),
            ("target_mode", s("cdq_entropy")),
            ("ensemble_size", s("5")),
            ("target_subset", s("2")),
            ("replay_ratio", s("20")),
            ("use_layer_norm", s("true")),
            ("num_resets", s("0")),
        ]
    };
    let with = |mut v: Vec<(&'static str, String)>, extra: &[(&'static str, &str)]| {
        for (k, x) in extra {
            match v.iter_mut().find(|(key, _)| key == k) {
                Some(slot) => slot.1 = x.to_string(),
                None => v.push((k, x.to_string())),
            }
        }
        v
    };
    let ablation = with(base(true, true), &[("target_mode", "ensemble_mean")]);
    Ok(match name {
        "redq" => base(false, false),
        "redq+her" => base(true, false),
        "redq+bq" => base(false, true),
        "redq+her+bq" => base(true, true),
        "redq+her+bq-cdq/ent" => ablation,
        "redq+her+bq-cdq/ent+rr1" => with(ablation, &[("replay_ratio", "1")]),
        "redq+her+bq-cdq/ent-reg" => with(
            ablation,
            &[("ensemble_size", "2"), ("use_layer_norm", "false")],
        ),
        other => {
            let (k, suffix) = parse_reset(other).ok_or_else(|| {
                anyhow!(
                    "unknown preset {other:?} (known: {})",
                    preset_names().join(", ")
                )
            })?;
            let (her, bq) = match suffix {
                "" => (false, false),
                "+her" => (true, false),
                "+bq" => (false, true),
                "+her+bq" => (true, true),
                _ => unreachable!("checked by parse_reset"),
            };
            vec![
                ("family", s("reset")),
                ("use_her", her.to_string()),
                ("use_bq", bq.to_string()),
                ("target_mode", s("cdq_entropy")),
                ("ensemble_size", s("2")),
                ("target_subset", s("2")),
                ("replay_ratio", s("20")),
                ("use_layer_norm", s("false")),
                ("num_resets", k.to_string()),
            ]
        }
    })
}

fn parse_reset(name: &str) -> Option<(usize, &str)> {
    let rest = name.strip_prefix("reset(")?;
    let (k, suffix) = rest.split_once(')')?;
    let k: usize = k.parse().ok()?;
    if ![1, 4, 9].contains(&k) || !["", "+her", "+bq", "+her+bq"].contains(&suffix) {
        return None;
    }
    Some((k, suffix))
}

/// Command-line inputs to [`load_config`].
#[derive(Debug, Clone, Default)]
pub struct ConfigSources<'a> {
    pub file: Option<&'a Path>,
    pub preset: Option<&'a str>,
    /// Direct flags (`--seed`, `--env`, `--steps`) as key/value pairs.
    pub flags: Vec<(&'static str, String)>,
    pub overrides: &'a [String],
}

/// Defaults, then preset, then file, then flags, then `--set` overrides.
/// Returns the config and the preset expansion that was applied.
pub fn load_config(
    sources: &ConfigSources,
) -> Result<(ExperimentConfig, Vec<(&'static str, String)>)> {
    let mut c = ExperimentConfig::default();
    let mut expansion = Vec::new();
    if let Some(name) = sources.preset {
        expansion = preset(name)?;
        for (k, v) in &expansion {
            c.set(k, v)?;
        }
        c.preset = Some(name.into());
    }
    if let Some(path) = sources.file {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        c.apply_text(&text, &path.display().to_string())?;
    }
    for (k, v) in &sources.flags {
        c.set(k, v)?;
    }
    for o in sources.overrides {
        c.apply_override(o)?;
    }
    c.validate()?;
    Ok((c, expansion))
}

/// Output location for a run, kept apart from the reproducible settings.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub dir: PathBuf,
}

impl RunPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
    pub fn config(&self) -> PathBuf {
        self.dir.join("config.txt")
    }
    pub fn metrics(&self) -> PathBuf {
        self.dir.join("metrics.csv")
    }
    pub fn metadata(&self) -> PathBuf {
        self.dir.join("metadata.json")
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.dir.join("checkpoint.bin")
    }
}

/// Parsed expanded config as a map, for metadata.
pub fn expanded_map(c: &ExperimentConfig) -> BTreeMap<String, String> {
    c.expanded()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}
