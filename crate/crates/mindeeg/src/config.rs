//! Model and training hyperparameters, with a flat `key = value` config-file
//! format. Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

/// Every architectural and training hyperparameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Channel count (graph nodes).
    pub n: usize,
    /// Frequency bands per channel.
    pub d: usize,
    /// Number of brain regions.
    pub q: usize,
    /// Global codebook size.
    pub k1: usize,
    /// Intra-regional codebook size (per region).
    pub k2: usize,
    /// Inter-regional codebook size.
    pub k3: usize,
    /// Codebook embedding width.
    pub embed_dim: usize,
    /// Weight of the global codebook loss.
    pub alpha: f64,
    /// Weight of the intra-regional codebook loss.
    pub beta: f64,
    /// Weight of the inter-regional codebook loss.
    pub gamma: f64,
    /// Commitment weight inside each codebook loss.
    pub beta_vq: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// MAGCN depth.
    pub layers: usize,
    pub global_out: usize,
    pub intra_out: usize,
    pub inter_out: usize,
    pub head_hidden1: usize,
    pub head_hidden2: usize,
    pub classes: usize,
    pub seed: u64,
    pub drop_global: bool,
    pub drop_intra: bool,
    pub drop_inter: bool,
    pub drop_regional: bool,
    /// Positivity shift applied after ELU when building adjacencies.
    pub adjacency_shift: f64,
    /// Permit overlapping region partitions.
    pub allow_overlap: bool,
    /// Select codebook entries by cosine similarity instead of L2.
    pub cosine_codebook: bool,
    /// Straight-through gradient path through quantization (on by default).
    pub straight_through: bool,
    /// Share one region-attention weight matrix across regions.
    pub shared_fuse_weight: bool,
    pub se_reduction: usize,
    pub cbam_reduction: usize,
    /// Band width the inter-regional features are projected to before the
    /// adaptive graph encoder.
    pub inter_bands: usize,
    pub use_residual: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n: 62,
            d: 5,
            q: 7,
            k1: 32,
            k2: 64,
            k3: 128,
            embed_dim: 64,
            alpha: 0.2,
            beta: 0.5,
            gamma: 1.0,
            beta_vq: 0.25,
            lr: 1e-2,
            batch_size: 32,
            epochs: 200,
            layers: 2,
            global_out: 50,
            intra_out: 50,
            inter_out: 60,
            head_hidden1: 256,
            head_hidden2: 64,
            classes: 4,
            seed: 0,
            drop_global: false,
            drop_intra: false,
            drop_inter: false,
            drop_regional: false,
            adjacency_shift: 1.0,
            allow_overlap: false,
            cosine_codebook: false,
            straight_through: true,
            shared_fuse_weight: false,
            se_reduction: 2,
            cbam_reduction: 4,
            inter_bands: 5,
            use_residual: true,
        }
    }
}

macro_rules! config_fields {
    ($macro:ident) => {
        $macro! {
            n: usize, d: usize, q: usize, k1: usize, k2: usize, k3: usize,
            embed_dim: usize, alpha: f64, beta: f64, gamma: f64, beta_vq: f64,
            lr: f64, batch_size: usize, epochs: usize, layers: usize,
            global_out: usize, intra_out: usize, inter_out: usize,
            head_hidden1: usize, head_hidden2: usize, classes: usize, seed: u64,
            drop_global: bool, drop_intra: bool, drop_inter: bool,
            drop_regional: bool, adjacency_shift: f64, allow_overlap: bool,
            cosine_codebook: bool, straight_through: bool,
            shared_fuse_weight: bool, se_reduction: usize,
            cbam_reduction: usize, inter_bands: usize, use_residual: bool,
        }
    };
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n", self.n),
            ("d", self.d),
            ("q", self.q),
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("embed_dim", self.embed_dim),
            ("batch_size", self.batch_size),
            ("layers", self.layers),
            ("global_out", self.global_out),
            ("intra_out", self.intra_out),
            ("inter_out", self.inter_out),
            ("head_hidden1", self.head_hidden1),
            ("head_hidden2", self.head_hidden2),
            ("classes", self.classes),
            ("se_reduction", self.se_reduction),
            ("cbam_reduction", self.cbam_reduction),
            ("inter_bands", self.inter_bands),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("beta_vq", self.beta_vq),
        ] {
            if v < 0.0 {
                return Err(Error::Config(format!("{name} must be non-negative")));
            }
        }
        if self.drop_global && self.drop_regional {
            return Err(Error::Config(
                "all feature streams are ablated; at least one of the global or regional streams must remain".into(),
            ));
        }
        Ok(())
    }

    /// Parse a flat `key = value` config file. Blank lines and `#` comments
    /// are skipped; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ModelConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.set(key, value).map_err(|e| {
                Error::Config(format!("line {}: {e}", lineno + 1))
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        macro_rules! setter {
            ($($field:ident : $ty:ty,)*) => {
                match key {
                    $(stringify!($field) => {
                        self.$field = value
                            .parse::<$ty>()
                            .map_err(|_| format!("invalid value `{value}` for key `{key}`"))?;
                        Ok(())
                    })*
                    _ => Err(format!("unknown config key `{key}`")),
                }
            };
        }
        config_fields!(setter)
    }

    /// Serialize as the same `key = value` text `parse` accepts.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        macro_rules! emitter {
            ($($field:ident : $ty:ty,)*) => {
                $(writeln!(s, "{} = {}", stringify!($field), self.$field).unwrap();)*
            };
        }
        config_fields!(emitter);
        s
    }
}
