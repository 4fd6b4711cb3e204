use std::path::{Path, PathBuf};

use dmbn_core::training::Ablation;
use dmbn_core::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::args::TrainOpts;
use crate::error::{CliError, CliResult};

/// Everything a training-style command needs, as read from `--config`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = dmbn_core::io::read_text(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// The config file (or defaults) with every given flag applied on top.
    pub fn resolve(opts: &TrainOpts) -> CliResult<Self> {
        let mut cfg = match &opts.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        cfg.apply(opts);
        cfg.model.check()?;
        cfg.train.check()?;
        Ok(cfg)
    }

    fn apply(&mut self, o: &TrainOpts) {
        fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
            if let Some(v) = value {
                *slot = v.clone();
            }
        }
        if o.data.is_some() {
            self.data = o.data.clone();
        }
        if o.out.is_some() {
            self.out = o.out.clone();
        }
        let t = &mut self.train;
        set(&mut t.epochs, &o.epochs);
        set(&mut t.optimizer.lr, &o.lr);
        set(&mut t.optimizer.weight_decay, &o.weight_decay);
        set(&mut t.seed, &o.seed);
        set(&mut t.folds, &o.folds);
        set(&mut t.loss.global, &o.mu_global);
        set(&mut t.loss.local, &o.mu_local);
        set(&mut t.loss.gamma, &o.gamma);
        set(&mut t.validation_fraction, &o.validation_fraction);
        if o.full_batch {
            t.batch_size = None;
        } else if o.batch_size.is_some() {
            t.batch_size = o.batch_size;
        }
        if o.no_early_stop {
            t.patience = None;
        } else if o.patience.is_some() {
            t.patience = o.patience;
        }
        for a in &o.ablate {
            self.add_ablation(*a);
        }
        let m = &mut self.model;
        set(&mut m.hidden_dim, &o.hidden_dim);
        set(&mut m.heads, &o.heads);
        set(&mut m.pos_layers, &o.pos_layers);
        set(&mut m.neg_layers, &o.neg_layers);
        set(
            &mut m.head_hidden,
            &o.head_hidden.clone().filter(|h| !h.is_empty()),
        );
        set(&mut m.gamma, &o.gamma);
        set(&mut m.mixer_init, &o.mixer_init);
        set(&mut m.init_features, &o.init_features);
    }

    pub fn add_ablation(&mut self, a: Ablation) {
        if !self.train.ablations.contains(&a) {
            self.train.ablations.push(a);
        }
    }

    pub fn data(&self) -> CliResult<&Path> {
        self.data.as_deref().ok_or_else(|| {
            CliError::Usage("a dataset is required: pass --data or set `data` in --config".into())
        })
    }

    pub fn out(&self) -> CliResult<&Path> {
        self.out.as_deref().ok_or_else(|| {
            CliError::Usage(
                "an output directory is required: pass --out or set `out` in --config".into(),
            )
        })
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"train": {"epochs": 3}}"#).is_ok());
        assert!(serde_json::from_str::<RunConfig>(r#"{"trian": {}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"train": {"epoch": 3}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"model": {"layers": 3}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"train": {"loss": {"mu": 1}}}"#).is_err());
    }

    #[test]
    fn default_config_round_trips() {
        let cfg = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&cfg.to_pretty_json()).unwrap();
        assert_eq!(back, cfg);
    }
}
