//! The assembled model: global state encoder, regional encoders, row
//! attention over the stacked multi-granularity features, a 3-layer
//! classifier head, and the integrative loss.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codebook::SimilarityMetric;
use crate::encoder::{EncoderSettings, GranularEncoder};
use crate::regional::{
    partition_features, region_attention_fuse, IntraRegionalModule, InterRegionalModule,
    RegionPartition,
};
use crate::tensor::Tensor;
use crate::{ModelConfig, Result};

pub(crate) fn metric_of(cfg: &ModelConfig) -> SimilarityMetric {
    if cfg.cosine_codebook {
        SimilarityMetric::Cosine
    } else {
        SimilarityMetric::L2
    }
}

/// Classifier head: row self-attention over the stacked features followed by
/// three fully connected layers.
pub struct ClassifierHead {
    pub attn_w: Tensor,
    pub fc1_w: Tensor,
    pub fc1_b: Tensor,
    pub fc2_w: Tensor,
    pub fc2_b: Tensor,
    pub fc3_w: Tensor,
    pub fc3_b: Tensor,
    pub rows: usize,
    pub width: usize,
}

impl ClassifierHead {
    fn new(rng: &mut ChaCha8Rng, cfg: &ModelConfig, rows: usize, width: usize) -> Self {
        let flat = rows * width;
        ClassifierHead {
            attn_w: Tensor::param_fan_in(rng, width, width, width),
            fc1_w: Tensor::param_fan_in(rng, flat, cfg.head_hidden1, flat),
            fc1_b: Tensor::zeros_param(1, cfg.head_hidden1),
            fc2_w: Tensor::param_fan_in(rng, cfg.head_hidden1, cfg.head_hidden2, cfg.head_hidden1),
            fc2_b: Tensor::zeros_param(1, cfg.head_hidden2),
            fc3_w: Tensor::param_fan_in(rng, cfg.head_hidden2, cfg.classes, cfg.head_hidden2),
            fc3_b: Tensor::zeros_param(1, cfg.classes),
            rows,
            width,
        }
    }

    pub fn forward(&self, stacked: &Tensor) -> Tensor {
        assert_eq!(
            stacked.shape(),
            (self.rows, self.width),
            "head: expected {}x{} stacked features, got {:?}",
            self.rows,
            self.width,
            stacked.shape()
        );
        let xw = stacked.matmul(&self.attn_w);
        let scores = xw.matmul(&xw.transpose()).row_sums(); // R x 1
        let weights = scores.transpose().softmax_rows().transpose(); // R x 1
        let attended = stacked.scale_rows(&weights);
        let flat = attended.reshape(1, self.rows * self.width);
        let h1 = flat.matmul(&self.fc1_w).add(&self.fc1_b).relu();
        let h2 = h1.matmul(&self.fc2_w).add(&self.fc2_b).relu();
        h2.matmul(&self.fc3_w).add(&self.fc3_b)
    }

    fn params(&self) -> Vec<(String, Tensor)> {
        vec![
            ("attn_w".into(), self.attn_w.clone()),
            ("fc1_w".into(), self.fc1_w.clone()),
            ("fc1_b".into(), self.fc1_b.clone()),
            ("fc2_w".into(), self.fc2_w.clone()),
            ("fc2_b".into(), self.fc2_b.clone()),
            ("fc3_w".into(), self.fc3_w.clone()),
            ("fc3_b".into(), self.fc3_b.clone()),
        ]
    }
}

/// Everything the forward pass of one sample produces.
pub struct ForwardOutput {
    /// `1 x C` logits.
    pub logits: Tensor,
    pub l_bg: Tensor,
    pub l_br1: Tensor,
    pub l_br2: Tensor,
}

pub struct MindEegModel {
    pub cfg: ModelConfig,
    pub partition: RegionPartition,
    pub global: GranularEncoder,
    pub intra: IntraRegionalModule,
    pub inter: InterRegionalModule,
    /// Maps inter-regional features to head width.
    pub inter_to_head: Tensor,
    /// Maps intra-regional features to head width when the inter encoder is
    /// ablated.
    pub intra_to_head: Tensor,
    /// Raw-feature fusion weights used when the intra encoders are ablated.
    pub bypass_fuse: Vec<Tensor>,
    /// Lifts bypass-fused raw features to intra width.
    pub bypass_lift: Tensor,
    pub head: ClassifierHead,
}

impl MindEegModel {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        Self::with_partition(cfg, None)
    }

    pub fn with_partition(cfg: &ModelConfig, partition: Option<RegionPartition>) -> Result<Self> {
        cfg.validate()?;
        let partition = match partition {
            Some(p) => p,
            None => {
                if cfg.n == 62 && cfg.q == 7 {
                    RegionPartition::default_62()
                } else {
                    // contiguous fallback for non-default montages
                    contiguous_partition(cfg.n, cfg.q)
                }
            }
        };
        if partition.len() != cfg.q {
            return Err(crate::Error::Config(format!(
                "partition has {} regions but config expects q = {}",
                partition.len(),
                cfg.q
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let global = GranularEncoder::new(
            &mut rng,
            &EncoderSettings {
                nodes: cfg.n,
                bands: cfg.d,
                magcn_in: cfg.d,
                out_dim: cfg.global_out,
                codebook_entries: cfg.k1,
                embed_dim: cfg.embed_dim,
                commitment_weight: cfg.beta_vq,
                metric: metric_of(cfg),
                shift: cfg.adjacency_shift,
                se_reduction: cfg.se_reduction,
                cbam_reduction: cfg.cbam_reduction,
                depth: cfg.layers,
                use_residual: cfg.use_residual,
                straight_through: cfg.straight_through,
            },
        )?;
        let intra = IntraRegionalModule::new(&mut rng, cfg, partition.clone())?;
        let inter = InterRegionalModule::new(&mut rng, cfg)?;
        let width = cfg.global_out;
        let inter_to_head = Tensor::param_fan_in(&mut rng, cfg.inter_out, width, cfg.inter_out);
        let intra_to_head = Tensor::param_fan_in(&mut rng, cfg.intra_out, width, cfg.intra_out);
        let bypass_fuse: Vec<Tensor> = (0..cfg.q)
            .map(|_| Tensor::param_fan_in(&mut rng, cfg.d, cfg.d, cfg.d))
            .collect();
        let bypass_lift = Tensor::param_fan_in(&mut rng, cfg.d, cfg.intra_out, cfg.d);
        let rows = Self::head_rows(cfg);
        let head = ClassifierHead::new(&mut rng, cfg, rows, width);
        Ok(MindEegModel {
            cfg: cfg.clone(),
            partition,
            global,
            intra,
            inter,
            inter_to_head,
            intra_to_head,
            bypass_fuse,
            bypass_lift,
            head,
        })
    }

    fn head_rows(cfg: &ModelConfig) -> usize {
        let mut rows = 0;
        if !cfg.drop_global {
            rows += cfg.n;
        }
        if !cfg.drop_regional {
            rows += cfg.q;
        }
        rows
    }

    pub fn forward(&self, x: &Tensor) -> ForwardOutput {
        assert_eq!(
            x.shape(),
            (self.cfg.n, self.cfg.d),
            "forward: sample must be {}x{}, got {:?}",
            self.cfg.n,
            self.cfg.d,
            x.shape()
        );
        let zero = Tensor::scalar(0.0);
        let mut rows: Vec<Tensor> = Vec::new();
        let mut l_bg = zero.clone();
        let mut l_br1 = zero.clone();
        let mut l_br2 = zero.clone();

        if !self.cfg.drop_global {
            let g = self.global.forward(x);
            rows.push(g.features);
            l_bg = g.vq_loss;
        }
        if !self.cfg.drop_regional {
            let fused = if !self.cfg.drop_intra {
                let out = self.intra.forward(x);
                l_br1 = out.vq_loss;
                out.fused
            } else {
                let slices = partition_features(x, &self.partition);
                let fused_rows: Vec<Tensor> = slices
                    .iter()
                    .zip(&self.bypass_fuse)
                    .map(|(s, w)| region_attention_fuse(s, w))
                    .collect();
                let refs: Vec<&Tensor> = fused_rows.iter().collect();
                Tensor::concat_rows(&refs).matmul(&self.bypass_lift)
            };
            let reg_rows = if !self.cfg.drop_inter {
                let (xbar, vq) = self.inter.forward(&fused);
                l_br2 = vq;
                xbar.matmul(&self.inter_to_head)
            } else {
                fused.matmul(&self.intra_to_head)
            };
            rows.push(reg_rows);
        }
        let refs: Vec<&Tensor> = rows.iter().collect();
        let stacked = Tensor::concat_rows(&refs);
        let logits = self.head.forward(&stacked);
        ForwardOutput {
            logits,
            l_bg,
            l_br1,
            l_br2,
        }
    }

    /// Total loss per the integrative objective:
    /// `L_C + alpha L_BG + beta L_BR1 + gamma L_BR2`.
    pub fn integrative_loss(&self, out: &ForwardOutput, label: usize) -> Tensor {
        integrative_loss(
            &out.logits,
            label,
            &out.l_bg,
            &out.l_br1,
            &out.l_br2,
            self.cfg.alpha,
            self.cfg.beta,
            self.cfg.gamma,
        )
    }

    /// Every parameter, active or not, in a stable order for checkpointing.
    pub fn named_params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (k, t) in self.global.params() {
            out.push((format!("global.{k}"), t));
        }
        for (k, t) in self.intra.params() {
            out.push((format!("intra.{k}"), t));
        }
        for (k, t) in self.inter.params() {
            out.push((format!("inter.{k}"), t));
        }
        out.push(("inter_to_head".into(), self.inter_to_head.clone()));
        out.push(("intra_to_head".into(), self.intra_to_head.clone()));
        for (i, w) in self.bypass_fuse.iter().enumerate() {
            out.push((format!("bypass.region{i}.fuse_w"), w.clone()));
        }
        out.push(("bypass.lift".into(), self.bypass_lift.clone()));
        for (k, t) in self.head.params() {
            out.push((format!("head.{k}"), t));
        }
        out
    }

    /// Parameters reachable by the forward pass under the current ablation
    /// flags, deduplicated.
    pub fn active_params(&self) -> Vec<(String, Tensor)> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut push = |name: String, t: Tensor| {
            if seen.insert(t.id()) {
                out.push((name, t));
            }
        };
        if !self.cfg.drop_global {
            for (k, t) in self.global.params() {
                push(format!("global.{k}"), t);
            }
        }
        if !self.cfg.drop_regional {
            if !self.cfg.drop_intra {
                for (k, t) in self.intra.params() {
                    push(format!("intra.{k}"), t);
                }
            } else {
                for (i, w) in self.bypass_fuse.iter().enumerate() {
                    push(format!("bypass.region{i}.fuse_w"), w.clone());
                }
                push("bypass.lift".into(), self.bypass_lift.clone());
            }
            if !self.cfg.drop_inter {
                for (k, t) in self.inter.params() {
                    push(format!("inter.{k}"), t);
                }
                push("inter_to_head".into(), self.inter_to_head.clone());
            } else {
                push("intra_to_head".into(), self.intra_to_head.clone());
            }
        }
        for (k, t) in self.head.params() {
            push(format!("head.{k}"), t);
        }
        out
    }

    /// Number of scalar parameters the forward pass can train.
    pub fn trainable_param_count(&self) -> usize {
        self.active_params().iter().map(|(_, t)| t.numel()).sum()
    }

    /// One SGD step over every trainable parameter, zeroing gradients.
    pub fn sgd_step(&self, lr: f64) {
        let mut seen = HashSet::new();
        for (_, t) in self.named_params() {
            if t.requires_grad() && seen.insert(t.id()) {
                t.sgd_update(lr);
            }
        }
    }

    pub fn zero_grads(&self) {
        for (_, t) in self.named_params() {
            t.zero_grad();
        }
    }

    pub fn reset_usage(&self) {
        self.global.codebook.reset_usage();
        for enc in &self.intra.encoders {
            enc.codebook.reset_usage();
        }
        self.inter.encoder.codebook.reset_usage();
    }

    /// Restart unused codebook entries at recent projections and clear the
    /// usage counters. Run between training epochs.
    pub fn revive_codebooks(&self) {
        self.global.codebook.revive_unused();
        for enc in &self.intra.encoders {
            enc.codebook.revive_unused();
        }
        self.inter.encoder.codebook.revive_unused();
        self.reset_usage();
    }
}

/// `L = L_C + alpha L_BG + beta L_BR1 + gamma L_BR2` with cross-entropy `L_C`.
#[allow(clippy::too_many_arguments)]
pub fn integrative_loss(
    logits: &Tensor,
    label: usize,
    l_bg: &Tensor,
    l_br1: &Tensor,
    l_br2: &Tensor,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> Tensor {
    logits
        .cross_entropy(label)
        .add(&l_bg.mul_scalar(alpha))
        .add(&l_br1.mul_scalar(beta))
        .add(&l_br2.mul_scalar(gamma))
}

/// Evenly sized contiguous partition used when no montage table applies.
pub fn contiguous_partition(n: usize, q: usize) -> RegionPartition {
    let base = n / q;
    let extra = n % q;
    let mut regions = Vec::with_capacity(q);
    let mut start = 0;
    for i in 0..q {
        let len = base + usize::from(i < extra);
        regions.push((format!("region{i}"), (start..start + len).collect()));
        start += len;
    }
    RegionPartition {
        regions,
        channels: n,
    }
}
