use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::grid_world::GridConfig;
use crate::guidance::GuidanceMode;
use crate::ppo::PpoConfig;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    CardGame,
    GridWorld,
}

impl EnvKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::CardGame => "cardgame",
            EnvKind::GridWorld => "gridworld",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cardgame" => Ok(EnvKind::CardGame),
            "gridworld" => Ok(EnvKind::GridWorld),
            other => Err(format!("unknown environment `{other}` (expected cardgame or gridworld)")),
        }
    }
}

/// One training run.
///
/// Text form is one `key = value` per line; `#` starts a comment. Keys and
/// defaults:
///
/// | key              | default          |
/// |------------------|------------------|
/// | `env`            | `cardgame`       |
/// | `guidance`       | `none`           |
/// | `total_frames`   | `100000`         |
/// | `num_envs`       | `16`             |
/// | `seed`           | `0`              |
/// | `out`            | `runs/default`   |
/// | `gamma`          | `0.99`           |
/// | `lambda`         | `0.95`           |
/// | `clip_eps`       | `0.2`            |
/// | `epochs`         | `4`              |
/// | `minibatches`    | `8`              |
/// | `learning_rate`  | `0.00025`        |
/// | `entropy_coef`   | `0.01`           |
/// | `value_coef`     | `0.5`            |
/// | `rollout_len`    | `128`            |
/// | `grad_clip_norm` | `0.5`            |
/// | `duplicate_items`| `8` (grid world) |
/// | `step_cap`       | env default      |
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub guidance: GuidanceMode,
    pub total_frames: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Holds `num_envs` as well.
    pub ppo: PpoConfig,
    pub duplicate_items: usize,
    /// Per-episode step limit; `None` uses the environment's own.
    pub step_cap: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::CardGame,
            guidance: GuidanceMode::None,
            total_frames: 100_000,
            seed: 0,
            out: PathBuf::from("runs/default"),
            ppo: PpoConfig::default(),
            duplicate_items: GridConfig::default().duplicate_items,
            step_cap: None,
        }
    }
}

pub const CONFIG_KEYS: [&str; 18] = [
    "env",
    "guidance",
    "total_frames",
    "num_envs",
    "seed",
    "out",
    "gamma",
    "lambda",
    "clip_eps",
    "epochs",
    "minibatches",
    "learning_rate",
    "entropy_coef",
    "value_coef",
    "rollout_len",
    "grad_clip_norm",
    "duplicate_items",
    "step_cap",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| HarnessError::Config {
        field: key.to_string(),
        reason: format!("cannot parse `{value}`: {e}"),
    })
}

impl ExperimentConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let (key, value) = (key.trim(), value.trim());
        match key {
            "env" => self.env = parse(key, value)?,
            "guidance" => self.guidance = parse(key, value)?,
            "total_frames" => self.total_frames = parse(key, value)?,
            "num_envs" => self.ppo.num_envs = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "gamma" => self.ppo.gamma = parse(key, value)?,
            "lambda" => self.ppo.lambda = parse(key, value)?,
            "clip_eps" => self.ppo.clip_eps = parse(key, value)?,
            "epochs" => self.ppo.epochs = parse(key, value)?,
            "minibatches" => self.ppo.minibatches = parse(key, value)?,
            "learning_rate" => self.ppo.learning_rate = parse(key, value)?,
            "entropy_coef" => self.ppo.entropy_coef = parse(key, value)?,
            "value_coef" => self.ppo.value_coef = parse(key, value)?,
            "rollout_len" => self.ppo.rollout_len = parse(key, value)?,
            "grad_clip_norm" => self.ppo.grad_clip_norm = parse(key, value)?,
            "duplicate_items" => self.duplicate_items = parse(key, value)?,
            "step_cap" => {
                self.step_cap = match value {
                    "" | "default" => None,
                    v => Some(parse(key, v)?),
                }
            }
            other => {
                return Err(HarnessError::Config {
                    field: other.to_string(),
                    reason: "unknown key".into(),
                })
            }
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| HarnessError::Config {
                field: format!("line {}", n + 1),
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, HarnessError> {
        let mut config = Self::default();
        config.apply_text(text)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Text form that [`ExperimentConfig::from_text`] reads back unchanged.
    pub fn to_text(&self) -> String {
        let p = &self.ppo;
        let step_cap = self.step_cap.map_or("default".to_string(), |c| c.to_string());
        let values = [
            self.env.to_string(),
            self.guidance.to_string(),
            self.total_frames.to_string(),
            p.num_envs.to_string(),
            self.seed.to_string(),
            self.out.display().to_string(),
            p.gamma.to_string(),
            p.lambda.to_string(),
            p.clip_eps.to_string(),
            p.epochs.to_string(),
            p.minibatches.to_string(),
            p.learning_rate.to_string(),
            p.entropy_coef.to_string(),
            p.value_coef.to_string(),
            p.rollout_len.to_string(),
            p.grad_clip_norm.to_string(),
            self.duplicate_items.to_string(),
            step_cap,
        ];
        CONFIG_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.ppo.validate().map_err(|e| match e {
            crate::ppo::PpoError::Config { field, reason } => HarnessError::Config {
                field: field.to_string(),
                reason,
            },
            other => HarnessError::Ppo(other),
        })?;
        if self.total_frames < self.ppo.batch_size() {
            return Err(HarnessError::Config {
                field: "total_frames".into(),
                reason: format!(
                    "{} is below num_envs * rollout_len = {}",
                    self.total_frames,
                    self.ppo.batch_size()
                ),
            });
        }
        if self.step_cap == Some(0) {
            return Err(HarnessError::Config {
                field: "step_cap".into(),
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Number of PPO updates: `ceil(total_frames / (num_envs * rollout_len))`.
    pub fn update_count(&self) -> usize {
        self.total_frames.div_ceil(self.ppo.batch_size())
    }

    pub fn grid_config(&self) -> GridConfig {
        GridConfig {
            duplicate_items: self.duplicate_items,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let text = "# run of record\nenv = gridworld\nguidance = action-mask  # safest\n\nnum_envs=4\nlearning_rate = 1e-3\nstep_cap = 50\n";
        let c = ExperimentConfig::from_text(text).unwrap();
        assert_eq!(c.env, EnvKind::GridWorld);
        assert_eq!(c.guidance, GuidanceMode::ActionMask);
        assert_eq!(c.ppo.num_envs, 4);
        assert_eq!(c.ppo.learning_rate, 1e-3);
        assert_eq!(c.step_cap, Some(50));
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn text_round_trip() {
        let mut c = ExperimentConfig::default();
        c.set("guidance", "obs-mask").unwrap();
        c.set("gamma", "0.9").unwrap();
        c.set("out", "somewhere/else").unwrap();
        assert_eq!(ExperimentConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn errors_name_the_field() {
        let err = ExperimentConfig::from_text("epochs = many").unwrap_err();
        assert!(matches!(&err, HarnessError::Config { field, .. } if field == "epochs"), "{err}");
        let err = ExperimentConfig::from_text("colour = blue").unwrap_err();
        assert!(err.to_string().contains("colour"));
        let err = ExperimentConfig::from_text("just words").unwrap_err();
        assert!(err.to_string().contains("line 1"));

        let mut c = ExperimentConfig {
            total_frames: 100,
            ..ExperimentConfig::default()
        };
        assert!(matches!(c.validate(), Err(HarnessError::Config { field, .. }) if field == "total_frames"));
        c.total_frames = 10_000;
        c.ppo.gamma = 1.5;
        assert!(matches!(c.validate(), Err(HarnessError::Config { field, .. }) if field == "gamma"));
    }

    #[test]
    fn update_count_rounds_up() {
        let mut c = ExperimentConfig {
            total_frames: 1000,
            ..ExperimentConfig::default()
        };
        c.ppo.num_envs = 4;
        assert_eq!(c.update_count(), 2);
    }
}
